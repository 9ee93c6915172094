//! Quick invariant suite behind the `selftest` subcommand: operator
//! adjointness, exactness of the gradients, the anisotropy assumptions, the
//! zero fixed point and the per-step energy inequality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::Anisotropy;
use crate::energy::{energy, grad_alpha, grad_u_step, step_functional, ModelParams, StepData};
use crate::error::Result;
use crate::grid::{div, grad, inner_l2, GridSpec, ScalarField, VectorField};
use crate::instances::noisy_bump;
use crate::solver::{run, SolveConfig};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_field(g: GridSpec<f64>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField<f64> {
    ScalarField::from_fn(g, |_, _| rng.gen_range(lo..=hi))
}

/// Largest `|⟨grad f, v⟩ + ⟨f, div v⟩| / (‖f‖‖v‖)` over random pairs.
pub fn adjointness_defect(pairs: usize, max_n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let (nx, ny) = (rng.gen_range(2..=max_n), rng.gen_range(2..=max_n));
        let g = GridSpec::new(nx, ny, rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0))?;
        let f = random_field(g, &mut rng, -1.0, 1.0);
        let cells = g.cell_len();
        let vx = (0..cells).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let vy = (0..cells).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let v = VectorField::from_components(g, vx, vy)?;
        let defect = (inner_l2(&grad(&f), &v)? + inner_l2(&f, &div(&v))?).abs();
        worst = worst.max(defect / (f.norm_l2() * v.norm_l2()));
    }
    Ok(worst)
}

/// Largest relative mismatch between symmetric difference quotients of `E`
/// (in `α`) and `Ψ` (in `u`) and the pairing with the analytic gradients.
///
/// The relative error is `|fd − an| / max(|an|, 10⁻³)`.
pub fn gradient_defect(instances: usize, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = GridSpec::unit(n, n)?;
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for k in 0..instances {
        let a = match k % 3 {
            0 => Anisotropy::smoothed_l1(rng.gen_range(0.05..1.0))?,
            1 => Anisotropy::smoothed_ngon(rng.gen_range(2..7), rng.gen_range(0.05..1.0))?,
            _ => Anisotropy::smoothed_euclid(rng.gen_range(0.05..1.0))?,
        };
        let params = ModelParams {
            kappa: rng.gen_range(0.1..10.0),
            mu: rng.gen_range(0.01..1.0),
            nu: rng.gen_range(0.01..1.0),
            lambda: rng.gen_range(0.1..10.0),
            p: [2.5, 3.0, 4.0][(k / 3) % 3],
            tau: rng.gen_range(0.01..1.0),
            t_final: 1.0,
        };
        let alpha = random_field(g, &mut rng, -1.0, 1.0);
        let u = random_field(g, &mut rng, 0.0, 1.0);
        let step = StepData::new(
            random_field(g, &mut rng, 0.0, 1.0),
            random_field(g, &mut rng, 0.0, 1.0),
        )?;
        let phi = random_field(g, &mut rng, -1.0, 1.0);
        let shifted = |f: &ScalarField<f64>, s: f64| {
            let mut out = f.clone();
            out.axpy(s, &phi);
            out
        };
        let e = |al: &ScalarField<f64>| energy(al, &u, &step.u_org, &params, &a).map(|b| b.total);
        let fd = (e(&shifted(&alpha, eps))? - e(&shifted(&alpha, -eps))?) / (2.0 * eps);
        let an = inner_l2(&grad_alpha(&alpha, &u, &params, &a)?, &phi)?;
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3));

        let psi = |uu: &ScalarField<f64>| step_functional(&alpha, uu, &step, &params, &a);
        let fd = (psi(&shifted(&u, eps))? - psi(&shifted(&u, -eps))?) / (2.0 * eps);
        let an = inner_l2(&grad_u_step(&alpha, &u, &step, &params, &a)?, &phi)?;
        worst = worst.max((fd - an).abs() / an.abs().max(1e-3));
    }
    Ok(worst)
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> SelfCheck {
    match outcome {
        Ok((passed, detail)) => SelfCheck {
            name,
            passed,
            detail,
        },
        Err(e) => SelfCheck {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs every check; all should pass on a correct build.
pub fn run_selftest(seed: u64) -> Vec<SelfCheck> {
    let mut out = Vec::new();
    out.push(check(
        "adjointness",
        adjointness_defect(50, 16, seed).map(|d| (d <= 1e-12, format!("worst defect {d:.3e}"))),
    ));
    out.push(check(
        "gradient exactness",
        gradient_defect(18, 6, seed).map(|d| (d <= 1e-5, format!("worst relative error {d:.3e}"))),
    ));
    out.push(check("anisotropy assumptions", (|| {
        let fams = [
            Anisotropy::smoothed_l1(0.1)?,
            Anisotropy::smoothed_ngon(6, 0.1)?,
            Anisotropy::smoothed_euclid(0.1)?,
        ];
        let failed: Vec<&str> = fams
            .iter()
            .filter(|a| !a.verify_a2(400, seed).all_passed())
            .map(|a| a.name())
            .collect();
        Ok((failed.is_empty(), format!("failing families: {failed:?}")))
    })()));

    let params = ModelParams {
        kappa: 1.0,
        mu: 0.01,
        nu: 0.01,
        lambda: 10.0,
        p: 3.0,
        tau: 0.25,
        t_final: 0.75,
    };
    let a = Anisotropy::smoothed_l1(0.1).expect("valid smoothing radius");
    let cfg = SolveConfig::default();
    out.push(check("zero fixed point", (|| {
        let z = ScalarField::zeros(GridSpec::unit(6, 6)?);
        let traj = run(&z, &z, &params, &a, &cfg)?;
        let all_zero = traj.steps().iter().all(|s| {
            s.u == z && s.alpha == z && s.report.energy_after.total == 0.0
        });
        Ok((all_zero, format!("{} steps", traj.step_count())))
    })()));
    out.push(check("energy inequality", (|| {
        let u0 = noisy_bump(10, 0.2, seed)?;
        let traj = run(&u0, &u0, &params, &a, &cfg)?;
        let e0 = traj.energy_totals()[0];
        let worst = traj.steps()[1..]
            .iter()
            .map(|s| s.report.ineq_slack)
            .fold(f64::INFINITY, f64::min);
        Ok((worst >= -1e-8 * (1.0 + e0), format!("smallest slack {worst:.3e}")))
    })()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest(3) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
