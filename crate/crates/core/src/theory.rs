//! Explicit constants of the well-posedness theory and the twin-trajectory
//! stability experiment.
//!
//! The largeness thresholds for `κ` and `τ` involve a Poincaré constant and
//! two Sobolev embedding constants. The Poincaré constant of a rectangle is
//! exact; the Sobolev constants have no closed form, so the defaults here are
//! explicit *upper bounds* (see [`sobolev_bound`]) and may be overridden.

use crate::anisotropy::Anisotropy;
use crate::energy::{energy, ModelParams};
use crate::error::{Error, Result};
use crate::grid::{grad, norm_lp_rooted, ScalarField};
use crate::scalar::Real;
use crate::solver::{run, SolveConfig, Trajectory};

/// `C_P` and the constants of `H¹ ⊂ L^{2p/(p−2)}` and `H¹ ⊂ L^{2p/(p−1)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants<T> {
    pub c_poincare: T,
    pub c_sob_1: T,
    pub c_sob_2: T,
}

impl<T: Real> EmbeddingConstants<T> {
    pub fn new(c_poincare: T, c_sob_1: T, c_sob_2: T) -> Result<Self> {
        for (name, v) in [
            ("c_poincare", c_poincare),
            ("c_sob_1", c_sob_1),
            ("c_sob_2", c_sob_2),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            c_poincare,
            c_sob_1,
            c_sob_2,
        })
    }

    /// Exact `C_P` and the Sobolev upper bounds for the rectangle `(0,a)×(0,b)`.
    pub fn default_for(a: T, b: T, p: T) -> Result<Self> {
        if !(p > T::lit(2.0)) {
            return Err(Error::Assumption {
                assumption: "A0",
                message: format!("p > 2 required, got p = {p}"),
            });
        }
        let area = a * b;
        let two = T::lit(2.0);
        Self::new(
            poincare_rectangle(a, b)?,
            sobolev_bound(two * p / (p - two), area)?,
            sobolev_bound(two * p / (p - T::one()), area)?,
        )
    }
}

/// `C_P = 1/√λ₁` with `λ₁ = π²(1/a² + 1/b²)` on `(0,a)×(0,b)`.
pub fn poincare_rectangle<T: Real>(a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > T::zero()) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "rectangle sides must be positive, got {a} × {b}"
        )));
    }
    let lambda1 = T::PI() * T::PI() * (a.powi(-2) + b.powi(-2));
    Ok(lambda1.sqrt().recip())
}

/// Upper bound `C` with `‖f‖_{L^q} ≤ C (‖f‖²_{L²} + ‖∇f‖²_{L²})^{1/2}` for
/// `f ∈ H¹₀` of a planar domain of area `area`, `q > 2`.
///
/// Applying `‖g‖₂ ≤ (2√2)⁻¹‖∇g‖₁` to `g = |f|^s`, `s = q/2`, gives
/// `‖f‖_q^s ≤ (s/2√2)‖f‖_{2(s−1)}^{s−1}‖∇f‖₂`. For `s ≥ 2` the middle norm
/// interpolates between `L²` and `L^q`, giving `C = (s/2√2)^{(s−1)/s}`; for
/// `1 < s < 2` Hölder's inequality gives `C = ((s/2√2)|Ω|^{(2−s)/2})^{1/s}`.
/// The two expressions agree at `s = 2`.
pub fn sobolev_bound<T: Real>(q: T, area: T) -> Result<T> {
    let two = T::lit(2.0);
    if !(q > two) || !q.is_finite() || !(area > T::zero()) {
        return Err(Error::Domain(format!(
            "Sobolev bound needs q > 2 and positive area, got q = {q}, |Ω| = {area}"
        )));
    }
    let s = q / two;
    let c = s / (two * two.sqrt());
    Ok(if s >= two {
        c.powf((s - T::one()) / s)
    } else {
        (c * area.powf((two - s) / two)).powf(s.recip())
    })
}

/// Raw inputs of the threshold formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionInputs<T> {
    pub kappa: T,
    pub tau: T,
    pub mu: T,
    pub nu: T,
    pub p: T,
    pub emb: EmbeddingConstants<T>,
    /// `|∇γ|_{W^{1,∞}}`, taken as `grad_bound + hess_bound`.
    pub gamma_w1inf: T,
    /// `|∇u₀|_{L^p}`.
    pub grad_u_lp: T,
    /// `E(0, u₀)`.
    pub energy0: T,
}

/// Thresholds for `κ` and `τ`, each in the two forms that appear in the
/// theory, with the comparisons against the configured values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport<T> {
    pub inputs: ConditionInputs<T>,
    /// `C₁` with `|∇u|²_{L^p}` (statement form).
    pub c1: T,
    /// `C₁` with `(1 + |∇u|_{L^p})²` (proof form).
    pub c1_proof: T,
    /// `C₂` built on `c1`.
    pub c2: T,
    /// `C₂` built on `c1_proof`.
    pub c2_proof: T,
    /// `κ̂` with `(1 + (ν/p)E(0,u₀))^{2/p}`.
    pub kappa_hat: T,
    /// `κ̂` with `(1 + ((p/ν)E(0,u₀))^{1/p})²`, the form of the energy bound
    /// `|∇u|_{L^p} ≤ ((p/ν)E)^{1/p}`.
    pub kappa_hat_alt: T,
    /// `τ̂` built on `kappa_hat`.
    pub tau_hat: T,
    /// `τ̂` built on `kappa_hat_alt` with `((p/ν)E)^{1/p}`.
    pub tau_hat_alt: T,
    pub kappa_ok: bool,
    pub tau_ok: bool,
    pub kappa_ok_alt: bool,
    pub tau_ok_alt: bool,
    /// Uniqueness threshold for the initial orientation.
    pub alpha0_unique_bound: T,
    pub alpha0_unique: bool,
}

impl<T: Real> ConditionReport<T> {
    /// Evaluates every formula from raw inputs.
    pub fn from_inputs(inputs: ConditionInputs<T>) -> Self {
        let ConditionInputs {
            kappa,
            tau,
            mu,
            nu,
            p,
            emb,
            gamma_w1inf: g,
            grad_u_lp: gu,
            energy0: e0,
        } = inputs;
        let one = T::one();
        let two = T::lit(2.0);
        let sqrt2 = two.sqrt();
        let (cp, s1, s2) = (emb.c_poincare, emb.c_sob_1, emb.c_sob_2);
        let core = (s1 + s2).powi(2) * (one + cp).powi(2) * g;
        let min_mu = mu.min(one);
        let denom = T::lit(54.0) * (one + cp).powi(2) * (one + s1).powi(2);
        let small = |c: T, v: T| {
            c * min_mu * (one + g).powi(-2) * (one + v).powi(-2) / (denom * (one + two * c))
        };

        let c1 = T::lit(4.0) * sqrt2 * core * gu.powi(2);
        let c1_proof = T::lit(4.0) * sqrt2 * core * (one + gu).powi(2);
        let c2 = small(c1, gu);
        let c2_proof = small(c1_proof, gu);

        let e_np = nu / p * e0;
        let e_pn = p / nu * e0;
        let kappa_hat = T::lit(8.0) * sqrt2 * core * (one + e_np).powf(two / p);
        let kappa_hat_alt = T::lit(8.0) * sqrt2 * core * (one + e_pn.powf(p.recip())).powi(2);
        let tau_hat = small(kappa_hat, e_np.powf(p.recip()));
        let tau_hat_alt = small(kappa_hat_alt, e_pn.powf(p.recip()));
        let alpha0_unique_bound = T::lit(4.0) * sqrt2 * core * (one + gu).powi(2);
        Self {
            inputs,
            c1,
            c1_proof,
            c2,
            c2_proof,
            kappa_hat,
            kappa_hat_alt,
            tau_hat,
            tau_hat_alt,
            kappa_ok: kappa > kappa_hat,
            tau_ok: tau < tau_hat,
            kappa_ok_alt: kappa > kappa_hat_alt,
            tau_ok_alt: tau < tau_hat_alt,
            alpha0_unique_bound,
            alpha0_unique: kappa > alpha0_unique_bound,
        }
    }
}

/// Evaluates the thresholds for a concrete instance; `E(0, u₀)` uses `u_org`
/// in the fidelity term and `|∇γ|_{W^{1,∞}}` is `grad_bound + hess_bound`.
pub fn compute_conditions<T: Real>(
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    u0: &ScalarField<T>,
    u_org: &ScalarField<T>,
    emb: &EmbeddingConstants<T>,
) -> Result<ConditionReport<T>> {
    params.validate()?;
    u0.grid().check_same(u_org.grid())?;
    let zero = ScalarField::zeros(*u0.grid());
    let energy0 = energy(&zero, u0, u_org, params, a)?.total;
    let grad_u_lp = norm_lp_rooted(&grad(u0), params.p)?;
    Ok(ConditionReport::from_inputs(ConditionInputs {
        kappa: params.kappa,
        tau: params.tau,
        mu: params.mu,
        nu: params.nu,
        p: params.p,
        emb: *emb,
        gamma_w1inf: a.w1inf_bound(),
        grad_u_lp,
        energy0,
    }))
}

/// `J(tᵢ) = |u₁−u₂|²_{L²} + μ|∇(u₁−u₂)|²_{L²}` and `|∇(α₁−α₂)|²_{L²}` per step.
#[derive(Debug, Clone, PartialEq)]
pub struct JTrace<T> {
    pub times: Vec<T>,
    pub j_values: Vec<T>,
    pub alpha_gap: Vec<T>,
}

impl<T: Real> JTrace<T> {
    /// `sup_i J(tᵢ)/J(0)`, or 0 when `J(0) = 0`.
    pub fn stability_ratio(&self) -> T {
        let j0 = self.j_values.first().copied().unwrap_or_else(T::zero);
        if j0 == T::zero() {
            return T::zero();
        }
        self.j_values
            .iter()
            .fold(T::zero(), |m, j| m.max(*j / j0))
    }
}

pub fn j_functional<T: Real>(a: &Trajectory<T>, b: &Trajectory<T>) -> Result<JTrace<T>> {
    if a.params() != b.params() || a.step_count() != b.step_count() {
        return Err(Error::Shape(
            "trajectories differ in parameters or step count".into(),
        ));
    }
    let mu = a.params().mu;
    let mut trace = JTrace {
        times: Vec::new(),
        j_values: Vec::new(),
        alpha_gap: Vec::new(),
    };
    for (i, (sa, sb)) in a.steps().iter().zip(b.steps()).enumerate() {
        let du = sa.u.sub(&sb.u)?;
        let da = sa.alpha.sub(&sb.alpha)?;
        trace.times.push(a.time(i));
        trace
            .j_values
            .push(du.norm_l2().powi(2) + mu * grad(&du).norm_l2().powi(2));
        trace.alpha_gap.push(grad(&da).norm_l2().powi(2));
    }
    Ok(trace)
}

/// Both trajectories of a twin run with their `J` trace.
#[derive(Debug, Clone)]
pub struct TwinRun<T> {
    pub first: Trajectory<T>,
    pub second: Trajectory<T>,
    pub trace: JTrace<T>,
    pub stability_ratio: T,
}

/// Runs the scheme from two initial images with identical settings.
pub fn twin_run<T: Real>(
    u0_a: &ScalarField<T>,
    u0_b: &ScalarField<T>,
    u_org: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    cfg: &SolveConfig<T>,
) -> Result<TwinRun<T>> {
    let first = run(u0_a, u_org, params, a, cfg)?;
    let second = run(u0_b, u_org, params, a, cfg)?;
    let trace = j_functional(&first, &second)?;
    let stability_ratio = trace.stability_ratio();
    Ok(TwinRun {
        first,
        second,
        trace,
        stability_ratio,
    })
}
