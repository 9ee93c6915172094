//! Stored trajectories, their time interpolants and the residuals of the
//! continuous weak formulation evaluated on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anisotropy::Anisotropy;
use crate::energy::{aniso_integral, grad_alpha, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{grad, inner_l2, ScalarField};
use crate::scalar::{pairwise_sum_by, Real};

use super::StepReport;

/// State `(αⁱ, uⁱ)` after step `i` with its diagnostics.
#[derive(Debug, Clone)]
pub struct TrajectoryStep<T> {
    pub alpha: ScalarField<T>,
    pub u: ScalarField<T>,
    pub report: StepReport<T>,
}

/// The sequence `(αⁱ, uⁱ)`, `i = 0…m`, at times `tᵢ = iτ`.
///
/// Interpolants follow the usual Rothe conventions: on `(tᵢ₋₁, tᵢ]` the
/// upper piecewise-constant interpolant is `uⁱ`, the lower one is `uⁱ⁻¹`,
/// and the piecewise-linear one joins `uⁱ⁻¹` to `uⁱ`. At `t = 0` all three
/// equal `u₀`.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    params: ModelParams<T>,
    u_org: ScalarField<T>,
    steps: Vec<TrajectoryStep<T>>,
}

impl<T: Real> Trajectory<T> {
    pub(crate) fn new(
        params: ModelParams<T>,
        u_org: ScalarField<T>,
        steps: Vec<TrajectoryStep<T>>,
    ) -> Self {
        Self {
            params,
            u_org,
            steps,
        }
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn u_org(&self) -> &ScalarField<T> {
        &self.u_org
    }

    pub fn steps(&self) -> &[TrajectoryStep<T>] {
        &self.steps
    }

    /// Number of time steps `m` (the trajectory holds `m + 1` states).
    pub fn step_count(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn time(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.params.tau
    }

    pub fn last(&self) -> &TrajectoryStep<T> {
        self.steps.last().expect("trajectory holds the initial state")
    }

    /// `E(αⁱ, uⁱ)` for `i = 0…m`.
    pub fn energy_totals(&self) -> Vec<T> {
        self.steps.iter().map(|s| s.report.energy_after.total).collect()
    }

    /// Index `i` of the interval `(tᵢ₋₁, tᵢ]` containing `t` (0 for `t = 0`).
    pub fn interval(&self, t: T) -> Result<usize> {
        let t_final = T::from_usize_lossy(self.step_count()) * self.params.tau;
        let slack = T::lit(1e-12) * (T::one() + t_final);
        if !(t >= -slack && t <= t_final + slack) {
            return Err(Error::Domain(format!("time {t} outside [0, {t_final}]")));
        }
        if t <= T::zero() {
            return Ok(0);
        }
        let k = (t / self.params.tau - T::lit(1e-9)).ceil();
        Ok(k.to_usize().unwrap_or(0).clamp(1, self.step_count()))
    }

    /// Upper piecewise-constant interpolant `[ū]_τ(t)`.
    pub fn u_upper(&self, t: T) -> Result<&ScalarField<T>> {
        Ok(&self.steps[self.interval(t)?].u)
    }

    /// Lower piecewise-constant interpolant `[u̲]_τ(t)`.
    pub fn u_lower(&self, t: T) -> Result<&ScalarField<T>> {
        Ok(&self.steps[self.interval(t)?.saturating_sub(1)].u)
    }

    /// Upper piecewise-constant interpolant of the orientation.
    pub fn alpha_upper(&self, t: T) -> Result<&ScalarField<T>> {
        Ok(&self.steps[self.interval(t)?].alpha)
    }

    /// Piecewise-linear interpolant `[u]_τ(t)`.
    pub fn u_linear(&self, t: T) -> Result<ScalarField<T>> {
        let i = self.interval(t)?;
        if i == 0 {
            return Ok(self.steps[0].u.clone());
        }
        let theta = (t - self.time(i - 1)) / self.params.tau;
        let mut out = self.steps[i - 1].u.scale(T::one() - theta);
        out.axpy(theta, &self.steps[i].u);
        Ok(out)
    }

    /// Time derivative of `[u]_τ` at `t` (right derivative at `t = 0`).
    pub fn u_time_derivative(&self, t: T) -> Result<ScalarField<T>> {
        if self.step_count() == 0 {
            return Ok(ScalarField::zeros(*self.steps[0].u.grid()));
        }
        let i = self.interval(t)?.max(1);
        Ok(self.steps[i]
            .u
            .sub(&self.steps[i - 1].u)?
            .scale(T::one() / self.params.tau))
    }
}

/// Residuals of the weak formulation at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SResiduals<T> {
    /// `L²` norm of the orientation equation's residual.
    pub res_s1: T,
    /// Largest violation `max(0, slack)` of the variational inequality.
    pub res_s2_slack: T,
    /// Largest `L²` norm among the probe fields.
    pub probe_norm: T,
}

/// [`residuals_s_with`] with 8 random probes and seed 0.
pub fn residuals_s<T: Real>(
    traj: &Trajectory<T>,
    a: &Anisotropy<T>,
    t: T,
) -> Result<SResiduals<T>> {
    residuals_s_with(traj, a, t, 8, 0)
}

/// Evaluates the weak formulation at the upper interpolant with the
/// derivative of the linear interpolant. The inequality is tested on
/// `ψ = 0`, `ψ = u` and `probes` seeded random fields (half uniform in
/// `[0, 1]`, half perturbations of `u`); its slack is
///
/// ```text
/// (∂ₜu, u−ψ) + λ(u−u_org, u−ψ) + μ(∇∂ₜu, ∇(u−ψ))
///   + ν∫|∇u|^{p−2}∇u·∇(u−ψ) + ∫γ(R∇u) − ∫γ(R∇ψ)
/// ```
///
/// which must be `≤ 0` for a solution.
pub fn residuals_s_with<T: Real>(
    traj: &Trajectory<T>,
    a: &Anisotropy<T>,
    t: T,
    probes: usize,
    seed: u64,
) -> Result<SResiduals<T>> {
    let params = traj.params();
    let i = traj.interval(t)?;
    let state = &traj.steps()[i];
    let (alpha, u) = (&state.alpha, &state.u);
    let res_s1 = grad_alpha(alpha, u, params, a)?.norm_l2();

    let dt_u = traj.u_time_derivative(t)?;
    let grid = *u.grid();
    let du = grad(u);
    let d_dt = grad(&dt_u);
    let alpha_cells = alpha.at_cells();
    let gamma_u = aniso_integral(&alpha_cells, &du, a);
    let two = T::lit(2.0);
    let slack = |psi: &ScalarField<T>| -> Result<T> {
        let diff = u.sub(psi)?;
        let dd = grad(&diff);
        let fid = u.sub(traj.u_org())?;
        let p_pair = pairwise_sum_by(0, du.len(), |c| {
            let w = du.get(c);
            let m = w[0].hypot(w[1]);
            let k = if m == T::zero() {
                T::zero()
            } else {
                m.powf(params.p - two)
            };
            let v = dd.get(c);
            k * (w[0] * v[0] + w[1] * v[1])
        }) * grid.cell_area();
        let gamma_psi = aniso_integral(&alpha_cells, &grad(psi), a);
        Ok(inner_l2(&dt_u, &diff)?
            + params.lambda * inner_l2(&fid, &diff)?
            + params.mu * inner_l2(&d_dt, &dd)?
            + params.nu * p_pair
            + (gamma_u - gamma_psi))
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_set = vec![ScalarField::zeros(grid), u.clone()];
    for k in 0..probes {
        let f = if k % 2 == 0 {
            ScalarField::from_fn(grid, |_, _| T::lit(rng.gen_range(0.0..=1.0)))
        } else {
            let noise = ScalarField::from_fn(grid, |_, _| T::lit(rng.gen_range(-0.1..=0.1)));
            u.add(&noise)?
        };
        probe_set.push(f);
    }
    let mut worst = T::zero();
    let mut probe_norm = T::zero();
    for psi in &probe_set {
        worst = worst.max(slack(psi)?);
        probe_norm = probe_norm.max(psi.norm_l2());
    }
    Ok(SResiduals {
        res_s1,
        res_s2_slack: worst,
        probe_norm,
    })
}
