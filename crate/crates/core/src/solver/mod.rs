//! The time-discrete scheme: compute the orientation `α⁰` from `u₀`, then
//! advance `i = 1…m` by minimizing `Ψ_{uⁱ⁻¹}` over `(αⁱ, uⁱ)` from the warm
//! start `(αⁱ⁻¹, uⁱ⁻¹)`.
//!
//! Each step alternates a `u`-block (convex, damped Newton–CG) and an
//! `α`-block (modified Newton). Both use Armijo backtracking, so `Ψ` never
//! increases along the sweeps, which gives the per-step energy inequality.
//! A step is accepted only when both gradient residuals pass the
//! tolerance `tol_res·(1 + ‖u‖_{H¹} + ‖α‖_{H¹})`.

mod descent;
mod trajectory;

pub use trajectory::{residuals_s, residuals_s_with, SResiduals, Trajectory, TrajectoryStep};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::Anisotropy;
use crate::energy::{
    check_unit_range, energy, grad_alpha, grad_u_step, step_functional, step_penalties,
    EnergyBreakdown, ModelParams, StepData,
};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::scalar::Real;
use crate::spectral::DirichletSolver;

use descent::{minimize_alpha_block, minimize_u_block};

/// Width of the band around `[0, 1]` tolerated by the maximum-principle check.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-10;

/// Tolerances and line-search constants of the block solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig<T> {
    /// Relative stationarity tolerance on `L²` gradient norms.
    pub tol_res: T,
    /// Alternating sweeps per step.
    pub max_outer: usize,
    /// Iterations per block solve.
    pub max_inner: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: T,
    /// Step shrink factor.
    pub backtrack: T,
    /// Initial line-search step.
    pub init_step: T,
}

impl<T: Real> Default for SolveConfig<T> {
    fn default() -> Self {
        Self {
            tol_res: T::lit(1e-8),
            max_outer: 200,
            max_inner: 500,
            armijo_c: T::lit(1e-4),
            backtrack: T::lit(0.5),
            init_step: T::one(),
        }
    }
}

impl<T: Real> SolveConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.tol_res > T::zero()) || !self.tol_res.is_finite() {
            return bad("tol_res must be positive");
        }
        if !(self.armijo_c > T::zero() && self.armijo_c < T::one()) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack > T::zero() && self.backtrack < T::one()) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.init_step > T::zero()) || !self.init_step.is_finite() {
            return bad("init_step must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("max_outer and max_inner must be at least 1");
        }
        Ok(())
    }

    /// Absolute stopping threshold for the current state.
    pub fn tolerance(&self, alpha: &ScalarField<T>, u: &ScalarField<T>) -> T {
        self.tol_res * (T::one() + u.norm_h1() + alpha.norm_h1())
    }
}

/// Diagnostics of one accepted step (index 0 is the initial orientation).
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport<T> {
    pub index: usize,
    pub outer_sweeps: usize,
    /// Total block-descent iterations over all sweeps.
    pub inner_iterations: usize,
    pub res_alpha: T,
    pub res_u: T,
    /// Absolute tolerance the residuals were held to.
    pub tolerance: T,
    pub energy_before: EnergyBreakdown<T>,
    pub energy_after: EnergyBreakdown<T>,
    pub dissipation_l2: T,
    pub dissipation_h1: T,
    /// `E(αⁱ⁻¹,uⁱ⁻¹) − [dissipation_l2 + dissipation_h1 + E(αⁱ,uⁱ)]`.
    pub ineq_slack: T,
    /// `Ψ` after the warm start and after every sweep (nonincreasing).
    pub psi_sweeps: Vec<T>,
}

fn check_finite<T: Real>(f: &ScalarField<T>, what: &str) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

fn check_max_principle<T: Real>(u: &ScalarField<T>) -> Result<()> {
    let tol = T::lit(MAX_PRINCIPLE_TOL);
    let (lo, hi) = (-tol, T::one() + tol);
    if let Some((node, v)) = u
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= lo && **v <= hi))
    {
        return Err(Error::MaximumPrinciple {
            value: v.to_f64_lossy(),
            node,
            lower: lo.to_f64_lossy(),
            upper: hi.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Orientation equation `−κΔα + ∇γ(R(α)∇u₀)·R(α+π/2)∇u₀ = 0` from `α ≡ 0`.
pub fn solve_initial_orientation<T: Real>(
    u0: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
) -> Result<(ScalarField<T>, StepReport<T>)> {
    solve_initial_orientation_from(ScalarField::zeros(*u0.grid()), u0, params, a, cfg)
}

/// Same as [`solve_initial_orientation`] from a caller-supplied initial guess.
pub fn solve_initial_orientation_from<T: Real>(
    alpha_init: ScalarField<T>,
    u0: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
) -> Result<(ScalarField<T>, StepReport<T>)> {
    params.validate()?;
    cfg.validate()?;
    alpha_init.grid().check_same(u0.grid())?;
    check_finite(&alpha_init, "initial orientation guess")?;
    check_unit_range(u0, "A3", "u0")?;
    let spectral = DirichletSolver::new(*u0.grid());
    // The threshold depends on ‖α‖, so re-enter the block until it is met
    // at the threshold evaluated at the final iterate.
    let mut alpha = alpha_init;
    let mut iterations = 0;
    let mut rounds = 0;
    let budget = cfg.max_inner.saturating_mul(cfg.max_outer);
    let (res, tol) = loop {
        let tol = cfg.tolerance(&alpha, u0);
        let out = minimize_alpha_block(
            alpha,
            u0,
            params,
            a,
            &spectral,
            tol,
            budget - iterations,
            cfg,
        )?;
        alpha = out.x;
        iterations += out.iterations;
        rounds += 1;
        let tol = cfg.tolerance(&alpha, u0);
        if out.residual <= tol {
            break (out.residual, tol);
        }
        if !out.converged && out.iterations == 0 || iterations >= budget || rounds > cfg.max_outer {
            return Err(Error::Convergence {
                iterations,
                res_alpha: out.residual.to_f64_lossy(),
                res_u: 0.0,
                tolerance: tol.to_f64_lossy(),
            });
        }
    };
    check_finite(&alpha, "initial orientation")?;
    let e = energy(&alpha, u0, u0, params, a)?;
    let report = StepReport {
        index: 0,
        outer_sweeps: rounds,
        inner_iterations: iterations,
        res_alpha: res,
        res_u: T::zero(),
        tolerance: tol,
        energy_before: e,
        energy_after: e,
        dissipation_l2: T::zero(),
        dissipation_h1: T::zero(),
        ineq_slack: T::zero(),
        psi_sweeps: Vec::new(),
    };
    Ok((alpha, report))
}

/// Runs the orientation solve from `α ≡ 0` and from `restarts` random
/// initial fields (uniform in `[−amplitude, amplitude]`, seeded), returning
/// every result; under the uniqueness condition all coincide.
pub fn orientation_multistart<T: Real>(
    u0: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
    restarts: usize,
    amplitude: T,
    seed: u64,
) -> Result<Vec<ScalarField<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![solve_initial_orientation(u0, params, a, cfg)?.0];
    let amp = amplitude.to_f64_lossy();
    for _ in 0..restarts {
        let init = ScalarField::from_fn(*u0.grid(), |_, _| T::lit(rng.gen_range(-amp..=amp)));
        out.push(solve_initial_orientation_from(init, u0, params, a, cfg)?.0);
    }
    Ok(out)
}

/// One step of the scheme: minimizes `Ψ_{u_prev}` from `(alpha_prev, u_prev)`.
pub fn minimize_step<T: Real>(
    alpha_prev: &ScalarField<T>,
    u_prev: &ScalarField<T>,
    u_org: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
) -> Result<(ScalarField<T>, ScalarField<T>, StepReport<T>)> {
    params.validate()?;
    cfg.validate()?;
    alpha_prev.grid().check_same(u_prev.grid())?;
    check_finite(alpha_prev, "alpha")?;
    check_finite(u_prev, "u")?;
    let step = StepData::new(u_prev.clone(), u_org.clone())?;
    let spectral = DirichletSolver::new(*u_prev.grid());
    let mut alpha = alpha_prev.clone();
    let mut u = u_prev.clone();
    let mut psi = vec![step_functional(&alpha, &u, &step, params, a)?];
    let mut inner = 0;
    let mut sweeps = 0;
    let mut res_u = grad_u_step(&alpha, &u, &step, params, a)?.norm_l2();
    let mut res_alpha = grad_alpha(&alpha, &u, params, a)?.norm_l2();
    let mut tol = cfg.tolerance(&alpha, &u);
    while !(res_u <= tol && res_alpha <= tol) {
        if sweeps >= cfg.max_outer {
            return Err(Error::Convergence {
                iterations: sweeps,
                res_alpha: res_alpha.to_f64_lossy(),
                res_u: res_u.to_f64_lossy(),
                tolerance: tol.to_f64_lossy(),
            });
        }
        sweeps += 1;
        let ou = minimize_u_block(&alpha, u, &step, params, a, &spectral, tol, cfg)?;
        u = ou.x;
        inner += ou.iterations;
        let tol_a = cfg.tolerance(&alpha, &u);
        let oa = minimize_alpha_block(alpha, &u, params, a, &spectral, tol_a, cfg.max_inner, cfg)?;
        alpha = oa.x;
        inner += oa.iterations;
        check_finite(&u, "u")?;
        check_finite(&alpha, "alpha")?;
        psi.push(step_functional(&alpha, &u, &step, params, a)?);
        res_u = grad_u_step(&alpha, &u, &step, params, a)?.norm_l2();
        res_alpha = oa.residual;
        tol = cfg.tolerance(&alpha, &u);
        // no block can move any more: further sweeps would repeat this one
        if ou.iterations == 0 && oa.iterations == 0 && !(res_u <= tol && res_alpha <= tol) {
            return Err(Error::Convergence {
                iterations: sweeps,
                res_alpha: res_alpha.to_f64_lossy(),
                res_u: res_u.to_f64_lossy(),
                tolerance: tol.to_f64_lossy(),
            });
        }
    }
    check_max_principle(&u)?;
    let before = energy(alpha_prev, u_prev, u_org, params, a)?;
    let after = energy(&alpha, &u, u_org, params, a)?;
    let (d_l2, d_h1) = step_penalties(&u, u_prev, params)?;
    let report = StepReport {
        index: 0,
        outer_sweeps: sweeps,
        inner_iterations: inner,
        res_alpha,
        res_u,
        tolerance: tol,
        energy_before: before,
        energy_after: after,
        dissipation_l2: d_l2,
        dissipation_h1: d_h1,
        ineq_slack: before.total - ((d_l2 + d_h1) + after.total),
        psi_sweeps: psi,
    };
    Ok((alpha, u, report))
}

/// The whole scheme: `α⁰` from `u₀`, then `m = T/τ` steps.
pub fn run<T: Real>(
    u0: &ScalarField<T>,
    u_org: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
) -> Result<Trajectory<T>> {
    let m = params.validate()?;
    cfg.validate()?;
    u0.grid().check_same(u_org.grid())?;
    check_unit_range(u_org, "A1", "u_org")?;
    check_unit_range(u0, "A3", "u0")?;
    let (alpha0, mut report0) = solve_initial_orientation(u0, params, a, cfg)?;
    let e0 = energy(&alpha0, u0, u_org, params, a)?;
    report0.energy_before = e0;
    report0.energy_after = e0;
    let mut steps = vec![TrajectoryStep {
        alpha: alpha0,
        u: u0.clone(),
        report: report0,
    }];
    for i in 1..=m {
        let prev = &steps[i - 1];
        let (alpha, u, mut report) = minimize_step(&prev.alpha, &prev.u, u_org, params, a, cfg)
            .map_err(|e| Error::Step {
                step: i,
                source: Box::new(e),
            })?;
        report.index = i;
        steps.push(TrajectoryStep { alpha, u, report });
    }
    Ok(Trajectory::new(*params, u_org.clone(), steps))
}

#[cfg(test)]
mod tests;
