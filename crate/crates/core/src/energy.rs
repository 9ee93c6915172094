//! The discrete energy, the per-step functional and their exact gradients.
//!
//! Every term uses the nodewise rule on lattice cells, with `α` read at the
//! cell's anchor node (zero on the boundary ring). Because the same rule is
//! used for the energies and for the gradients, [`grad_alpha`] and
//! [`grad_u_step`] are the exact `L²` gradients of [`energy`] and
//! [`step_functional`].

use crate::anisotropy::{rotate, Angle, Anisotropy};
use crate::error::{Error, Result};
use crate::grid::{div, grad, GridSpec, ScalarField, VectorField};
use crate::scalar::{pairwise_sum_by, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    pub kappa: T,
    pub mu: T,
    pub nu: T,
    pub lambda: T,
    pub p: T,
    pub tau: T,
    pub t_final: T,
}

impl<T: Real> ModelParams<T> {
    /// Checks (A0) and the time grid; returns the number of steps.
    pub fn validate(&self) -> Result<usize> {
        let a0 = |message: String| Error::Assumption {
            assumption: "A0",
            message,
        };
        for (name, v) in [
            ("kappa", self.kappa),
            ("mu", self.mu),
            ("nu", self.nu),
            ("lambda", self.lambda),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(a0(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.p > T::lit(2.0)) || !self.p.is_finite() {
            return Err(a0(format!("p > 2 required, got p = {}", self.p)));
        }
        if !(self.tau > T::zero()) || !(self.t_final > T::zero()) {
            return Err(Error::Config(format!(
                "tau and T must be positive, got tau = {}, T = {}",
                self.tau, self.t_final
            )));
        }
        let ratio = self.t_final / self.tau;
        let m = ratio.round();
        if m < T::one() || (ratio - m).abs() > T::lit(1e-9) * ratio.max(T::one()) {
            return Err(Error::Config(format!(
                "T / tau must be a positive integer, got {ratio}"
            )));
        }
        m.to_usize()
            .ok_or_else(|| Error::Config(format!("step count {m} out of range")))
    }

    pub fn steps(&self) -> Result<usize> {
        self.validate()
    }

    pub fn with_tau(mut self, tau: T) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_kappa(mut self, kappa: T) -> Self {
        self.kappa = kappa;
        self
    }
}

/// The four terms of `E(α, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown<T> {
    pub dirichlet_alpha: T,
    pub p_term: T,
    pub aniso_term: T,
    pub fidelity: T,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    fn new(dirichlet_alpha: T, p_term: T, aniso_term: T, fidelity: T) -> Self {
        Self {
            dirichlet_alpha,
            p_term,
            aniso_term,
            fidelity,
            total: (dirichlet_alpha + p_term) + (aniso_term + fidelity),
        }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero(), T::zero())
    }
}

/// Data of one implicit step: the previous image `w̄` and the target `u_org`.
#[derive(Debug, Clone)]
pub struct StepData<T> {
    pub w_bar: ScalarField<T>,
    pub u_org: ScalarField<T>,
}

impl<T: Real> StepData<T> {
    pub fn new(w_bar: ScalarField<T>, u_org: ScalarField<T>) -> Result<Self> {
        w_bar.grid().check_same(u_org.grid())?;
        check_unit_range(&u_org, "A1", "u_org")?;
        Ok(Self { w_bar, u_org })
    }
}

pub(crate) fn check_unit_range<T: Real>(
    f: &ScalarField<T>,
    assumption: &'static str,
    name: &str,
) -> Result<()> {
    if let Some((k, v)) = f
        .values()
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= T::zero() && **v <= T::one()))
    {
        return Err(Error::Assumption {
            assumption,
            message: format!("{name} must lie in [0, 1]; node {k} has {v}"),
        });
    }
    Ok(())
}

#[inline]
fn p_power<T: Real>(m: T, p: T) -> T {
    if m == T::zero() {
        T::zero()
    } else {
        m.powf(p)
    }
}

// |v|^{p-2}, continuously extended by 0 at v = 0 (p > 2)
#[inline]
fn p_weight<T: Real>(m: T, p: T) -> T {
    if m == T::zero() {
        T::zero()
    } else {
        m.powf(p - T::lit(2.0))
    }
}

fn sum_sq<T: Real>(v: &VectorField<T>) -> T {
    let (x, y) = (v.x(), v.y());
    pairwise_sum_by(0, x.len(), |k| x[k] * x[k] + y[k] * y[k]) * v.grid().cell_area()
}

fn field_sum_sq<T: Real>(f: &ScalarField<T>) -> T {
    let v = f.values();
    pairwise_sum_by(0, v.len(), |k| v[k] * v[k]) * f.grid().cell_area()
}

fn check3<T: Real>(a: &GridSpec<T>, b: &GridSpec<T>, c: &GridSpec<T>) -> Result<()> {
    a.check_same(b)?;
    a.check_same(c)
}

/// `∫ γ(R(α)∇u)` with `∇u` given per cell.
pub(crate) fn aniso_integral<T: Real>(
    alpha_cells: &[T],
    du: &VectorField<T>,
    a: &Anisotropy<T>,
) -> T {
    let s = pairwise_sum_by(0, du.len(), |c| {
        a.eval(rotate(Angle(alpha_cells[c]), du.get(c)))
    });
    s * du.grid().cell_area()
}

pub(crate) fn p_integral<T: Real>(du: &VectorField<T>, p: T) -> T {
    let (x, y) = (du.x(), du.y());
    pairwise_sum_by(0, x.len(), |c| p_power(x[c].hypot(y[c]), p)) * du.grid().cell_area()
}

/// `E(α, u)` term by term.
pub fn energy<T: Real>(
    alpha: &ScalarField<T>,
    u: &ScalarField<T>,
    u_org: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
) -> Result<EnergyBreakdown<T>> {
    check3(alpha.grid(), u.grid(), u_org.grid())?;
    let half = T::lit(0.5);
    let du = grad(u);
    let dirichlet = half * params.kappa * sum_sq(&grad(alpha));
    let p_term = params.nu / params.p * p_integral(&du, params.p);
    let aniso = aniso_integral(&alpha.at_cells(), &du, a);
    let fid = half * params.lambda * field_sum_sq(&u.sub(u_org)?);
    Ok(EnergyBreakdown::new(dirichlet, p_term, aniso, fid))
}

/// The two step penalties `(1/2τ)|u − w̄|²` and `(μ/2τ)|∇(u − w̄)|²`.
pub fn step_penalties<T: Real>(
    u: &ScalarField<T>,
    w_bar: &ScalarField<T>,
    params: &ModelParams<T>,
) -> Result<(T, T)> {
    let d = u.sub(w_bar)?;
    let half_tau = T::lit(0.5) / params.tau;
    Ok((
        half_tau * field_sum_sq(&d),
        half_tau * params.mu * sum_sq(&grad(&d)),
    ))
}

/// `Ψ_w̄(α, u) = E(α, u) + (1/2τ)|u − w̄|² + (μ/2τ)|∇(u − w̄)|²`.
pub fn step_functional<T: Real>(
    alpha: &ScalarField<T>,
    u: &ScalarField<T>,
    step: &StepData<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
) -> Result<T> {
    let e = energy(alpha, u, &step.u_org, params, a)?;
    let (l2, h1) = step_penalties(u, &step.w_bar, params)?;
    Ok(e.total + (l2 + h1))
}

/// `L²` gradient of `E` in `α`: `−κ·laplacian(α) + ∇γ(R(α)∇u)·R(α+π/2)∇u`.
pub fn grad_alpha<T: Real>(
    alpha: &ScalarField<T>,
    u: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
) -> Result<ScalarField<T>> {
    alpha.grid().check_same(u.grid())?;
    let g = *alpha.grid();
    let du = grad(u);
    let lap = crate::grid::laplacian(alpha);
    Ok(ScalarField::from_fn(g, |i, j| {
        let c = g.cell_of_node(i, j);
        -params.kappa * lap.at(i, j) + a.angle_derivative(Angle(alpha.at(i, j)), du.get(c))
    }))
}

/// Flux `ᵀR(α)∇γ(R(α)∇u) + ν|∇u|^{p−2}∇u` per cell.
fn energy_flux<T: Real>(
    alpha_cells: &[T],
    du: &VectorField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
) -> VectorField<T> {
    let mut flux = VectorField::zeros(*du.grid());
    for c in 0..du.len() {
        let w = du.get(c);
        let th = Angle(alpha_cells[c]);
        let back = rotate(Angle(-th.0), a.grad(rotate(th, w)));
        let k = params.nu * p_weight(w[0].hypot(w[1]), params.p);
        flux.set(c, [back[0] + k * w[0], back[1] + k * w[1]]);
    }
    flux
}

/// `L²` gradient of `Ψ_w̄` in `u`:
/// `(u − w̄)/τ − div(ᵀR∇γ(R∇u) + ν|∇u|^{p−2}∇u + (μ/τ)∇(u − w̄)) + λ(u − u_org)`.
pub fn grad_u_step<T: Real>(
    alpha: &ScalarField<T>,
    u: &ScalarField<T>,
    step: &StepData<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
) -> Result<ScalarField<T>> {
    check3(alpha.grid(), u.grid(), step.w_bar.grid())?;
    u.grid().check_same(step.u_org.grid())?;
    let du = grad(u);
    let diff = u.sub(&step.w_bar)?;
    let mut flux = energy_flux(&alpha.at_cells(), &du, params, a);
    flux.axpy(params.mu / params.tau, &grad(&diff));
    let dv = div(&flux);
    let inv_tau = T::one() / params.tau;
    let g = *u.grid();
    let out: Vec<T> = (0..g.len())
        .map(|k| {
            inv_tau * diff.values()[k] - dv.values()[k]
                + params.lambda * (u.values()[k] - step.u_org.values()[k])
        })
        .collect();
    ScalarField::from_vec(g, out).map_err(|_| Error::Numeric("grad_u_step".into()))
}

/// Second variation of `Ψ_w̄` in `u` at a fixed state:
/// `ψ ↦ (1/τ + λ)ψ − div(A ∇ψ)` with a symmetric 2×2 tensor `A` per cell.
#[derive(Debug, Clone)]
pub struct UHessian<T> {
    grid: GridSpec<T>,
    shift: T,
    // (a00, a01, a11) per cell
    tensors: Vec<[T; 3]>,
    mean_diffusivity: T,
}

impl<T: Real> UHessian<T> {
    pub fn new(
        alpha: &ScalarField<T>,
        u: &ScalarField<T>,
        params: &ModelParams<T>,
        a: &Anisotropy<T>,
    ) -> Self {
        let g = *u.grid();
        let du = grad(u);
        let alpha_cells = alpha.at_cells();
        let two = T::lit(2.0);
        let mu_tau = params.mu / params.tau;
        let mut tensors = Vec::with_capacity(du.len());
        let mut trace_sum = T::zero();
        for c in 0..du.len() {
            let w = du.get(c);
            let th = Angle(alpha_cells[c]);
            let h = a.hess(rotate(th, w));
            // Rᵀ H R, columns of R are R e1, R e2
            let (s, co) = th.0.sin_cos();
            let r = [[co, -s], [s, co]];
            let mut rhr = [[T::zero(); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    let mut acc = T::zero();
                    for k in 0..2 {
                        for l in 0..2 {
                            acc = acc + r[k][i] * h[k][l] * r[l][j];
                        }
                    }
                    rhr[i][j] = acc;
                }
            }
            let m = w[0].hypot(w[1]);
            let (p00, p01, p11) = if m == T::zero() {
                (T::zero(), T::zero(), T::zero())
            } else {
                let base = params.nu * m.powf(params.p - two);
                let k = params.nu * (params.p - two) * m.powf(params.p - T::lit(4.0));
                (base + k * w[0] * w[0], k * w[0] * w[1], base + k * w[1] * w[1])
            };
            let t = [
                rhr[0][0] + p00 + mu_tau,
                (rhr[0][1] + rhr[1][0]) / two + p01,
                rhr[1][1] + p11 + mu_tau,
            ];
            trace_sum = trace_sum + (t[0] + t[2]) / two;
            tensors.push(t);
        }
        Self {
            grid: g,
            shift: T::one() / params.tau + params.lambda,
            mean_diffusivity: trace_sum / T::from_usize_lossy(du.len()),
            tensors,
        }
    }

    pub fn apply(&self, v: &ScalarField<T>) -> ScalarField<T> {
        let dv = grad(v);
        let mut flux = VectorField::zeros(self.grid);
        for (c, t) in self.tensors.iter().enumerate() {
            let w = dv.get(c);
            flux.set(c, [t[0] * w[0] + t[1] * w[1], t[1] * w[0] + t[2] * w[1]]);
        }
        let mut out = div(&flux).scale(-T::one());
        out.axpy(self.shift, v);
        out
    }

    /// `1/τ + λ`.
    pub fn shift(&self) -> T {
        self.shift
    }

    /// Average of `trace(A)/2` over cells, used to scale the preconditioner.
    pub fn mean_diffusivity(&self) -> T {
        self.mean_diffusivity
    }
}

/// Nodewise `d²/dα² γ(R(α)∇u)`, the non-Laplacian part of the `α` Hessian.
pub fn alpha_curvature<T: Real>(
    alpha: &ScalarField<T>,
    u: &ScalarField<T>,
    a: &Anisotropy<T>,
) -> ScalarField<T> {
    let g = *u.grid();
    let du = grad(u);
    ScalarField::from_fn(g, |i, j| {
        a.angle_second_derivative(Angle(alpha.at(i, j)), du.get(g.cell_of_node(i, j)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{inner_l2, laplacian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params() -> ModelParams<f64> {
        ModelParams {
            kappa: 0.7,
            mu: 0.3,
            nu: 0.2,
            lambda: 2.0,
            p: 3.0,
            tau: 0.5,
            t_final: 1.0,
        }
    }

    fn rand_field(g: GridSpec<f64>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ScalarField<f64> {
        ScalarField::from_fn(g, |_, _| rng.gen_range(lo..hi))
    }

    // Direct transcription of the energy with its own stencil loops.
    fn naive_energy(
        alpha: &ScalarField<f64>,
        u: &ScalarField<f64>,
        u_org: &ScalarField<f64>,
        p: &ModelParams<f64>,
        a: &Anisotropy<f64>,
    ) -> f64 {
        let g = *u.grid();
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let rd = |f: &ScalarField<f64>, i: isize, j: isize| {
            if i < 0 || j < 0 || i >= nx || j >= ny {
                0.0
            } else {
                f.at(i as usize, j as usize)
            }
        };
        let mut e = 0.0;
        for j in -1..ny {
            for i in -1..nx {
                let ax = (rd(alpha, i + 1, j) - rd(alpha, i, j)) / g.hx;
                let ay = (rd(alpha, i, j + 1) - rd(alpha, i, j)) / g.hy;
                let ux = (rd(u, i + 1, j) - rd(u, i, j)) / g.hx;
                let uy = (rd(u, i, j + 1) - rd(u, i, j)) / g.hy;
                let th = rd(alpha, i, j);
                let rw = [ux * th.cos() - uy * th.sin(), ux * th.sin() + uy * th.cos()];
                e += 0.5 * p.kappa * (ax * ax + ay * ay)
                    + p.nu / p.p * (ux * ux + uy * uy).powf(p.p / 2.0)
                    + a.eval(rw);
            }
        }
        for j in 0..ny {
            for i in 0..nx {
                let d = rd(u, i, j) - rd(u_org, i, j);
                e += 0.5 * p.lambda * d * d;
            }
        }
        e * g.hx * g.hy
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let g = GridSpec::new(3, 4, 0.2, 0.2).unwrap();
        let z = ScalarField::zeros(g);
        let a = Anisotropy::smoothed_l1(0.1).unwrap();
        assert_eq!(energy(&z, &z, &z, &params(), &a).unwrap(), EnergyBreakdown::zero());
    }

    #[test]
    fn fidelity_on_2x2() {
        let g = GridSpec::new(2, 2, 0.5, 0.5).unwrap();
        let z = ScalarField::zeros(g);
        let one = ScalarField::constant(g, 1.0);
        let p = ModelParams {
            lambda: 2.0,
            ..params()
        };
        let a = Anisotropy::smoothed_euclid(0.5).unwrap();
        let e = energy(&z, &z, &one, &p, &a).unwrap();
        assert_eq!(e.fidelity, 1.0);
        assert_eq!(e.dirichlet_alpha + e.p_term + e.aniso_term, 0.0);
        assert_eq!(e.total, 1.0);
    }

    #[test]
    fn energy_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = GridSpec::new(4, 4, 0.25, 0.25).unwrap();
        for a in [
            Anisotropy::smoothed_l1(0.2).unwrap(),
            Anisotropy::smoothed_ngon(5, 0.3).unwrap(),
            Anisotropy::smoothed_euclid(0.1).unwrap(),
        ] {
            for _ in 0..10 {
                let alpha = rand_field(g, &mut rng, -1.0, 1.0);
                let u = rand_field(g, &mut rng, 0.0, 1.0);
                let uo = rand_field(g, &mut rng, 0.0, 1.0);
                let e = energy(&alpha, &u, &uo, &params(), &a).unwrap();
                let n = naive_energy(&alpha, &u, &uo, &params(), &a);
                assert!((e.total - n).abs() <= 1e-12 * n.abs(), "{} vs {n}", e.total);
                let sum = e.dirichlet_alpha + e.p_term + e.aniso_term + e.fidelity;
                assert!((e.total - sum).abs() <= 1e-14 * e.total);
            }
        }
    }

    #[test]
    fn step_functional_spike_example() {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        let z = ScalarField::zeros(g);
        let spike = ScalarField::from_fn(g, |i, j| if (i, j) == (1, 1) { 1.0 } else { 0.0 });
        let p = ModelParams {
            mu: 1.0,
            tau: 0.5,
            ..params()
        };
        let a = Anisotropy::smoothed_l1(0.3).unwrap();
        let step = StepData::new(spike, z.clone()).unwrap();
        let psi = step_functional(&z, &z, &step, &p, &a).unwrap();
        let e = energy(&z, &z, &step.u_org, &p, &a).unwrap().total;
        assert_eq!(e, 0.0);
        // 1/(2τ) = 1: |spike|² = 1 and |∇spike|² = 4
        assert!((psi - (1.0 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn step_functional_dominates_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = GridSpec::new(5, 3, 0.2, 0.3).unwrap();
        let a = Anisotropy::smoothed_ngon(3, 0.2).unwrap();
        for _ in 0..20 {
            let alpha = rand_field(g, &mut rng, -2.0, 2.0);
            let u = rand_field(g, &mut rng, 0.0, 1.0);
            let step = StepData::new(
                rand_field(g, &mut rng, 0.0, 1.0),
                rand_field(g, &mut rng, 0.0, 1.0),
            )
            .unwrap();
            let psi = step_functional(&alpha, &u, &step, &params(), &a).unwrap();
            let e = energy(&alpha, &u, &step.u_org, &params(), &a).unwrap().total;
            assert!(psi >= e);
            let same = StepData::new(u.clone(), step.u_org.clone()).unwrap();
            assert_eq!(step_functional(&alpha, &u, &same, &params(), &a).unwrap(), e);
        }
    }

    #[test]
    fn grad_alpha_without_image_is_dirichlet_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GridSpec::new(4, 5, 0.2, 0.2).unwrap();
        let alpha = rand_field(g, &mut rng, -1.0, 1.0);
        let z = ScalarField::zeros(g);
        let a = Anisotropy::smoothed_l1(0.1).unwrap();
        let ga = grad_alpha(&alpha, &z, &params(), &a).unwrap();
        let expected = laplacian(&alpha).scale(-params().kappa);
        assert_eq!(ga, expected);
        assert!(grad_alpha(&z, &z, &params(), &a)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        // isotropic: coupling vanishes for any image, and the map is linear
        let iso = Anisotropy::smoothed_euclid(0.1).unwrap();
        let u = rand_field(g, &mut rng, 0.0, 1.0);
        assert_eq!(grad_alpha(&alpha, &u, &params(), &iso).unwrap(), expected);
        let scaled = grad_alpha(&alpha.scale(3.0), &u, &params(), &iso).unwrap();
        for (s, e) in scaled.values().iter().zip(expected.values()) {
            assert!((s - 3.0 * e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn grad_u_step_vanishes_at_zero() {
        let g = GridSpec::new(3, 3, 0.25, 0.25).unwrap();
        let z = ScalarField::zeros(g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let alpha = rand_field(g, &mut rng, -1.0, 1.0);
        let step = StepData::new(z.clone(), z.clone()).unwrap();
        let a = Anisotropy::smoothed_l1(0.1).unwrap();
        let gu = grad_u_step(&alpha, &z, &step, &params(), &a).unwrap();
        assert!(gu.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_u_step_mu_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GridSpec::new(6, 6, 1.0 / 7.0, 1.0 / 7.0).unwrap();
        let z = ScalarField::zeros(g);
        let u = rand_field(g, &mut rng, 0.0, 1.0);
        let step = StepData::new(
            rand_field(g, &mut rng, 0.0, 1.0),
            rand_field(g, &mut rng, 0.0, 1.0),
        )
        .unwrap();
        let a = Anisotropy::smoothed_euclid(0.2).unwrap();
        let p1 = params();
        let p10 = ModelParams {
            mu: 10.0 * p1.mu,
            ..p1
        };
        let g1 = grad_u_step(&z, &u, &step, &p1, &a).unwrap();
        let g10 = grad_u_step(&z, &u, &step, &p10, &a).unwrap();
        let expected = laplacian(&u.sub(&step.w_bar).unwrap()).scale(-9.0 * p1.mu / p1.tau);
        for ((x, y), e) in g10.values().iter().zip(g1.values()).zip(expected.values()) {
            assert!(((x - y) - e).abs() <= 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let g = GridSpec::new(5, 4, 0.2, 0.2).unwrap();
        let fams = [
            Anisotropy::smoothed_l1(0.3).unwrap(),
            Anisotropy::smoothed_ngon(4, 0.3).unwrap(),
            Anisotropy::smoothed_euclid(0.3).unwrap(),
        ];
        for a in &fams {
            for &pe in &[2.5, 3.0, 4.0] {
                let p = ModelParams { p: pe, ..params() };
                let alpha = rand_field(g, &mut rng, -1.0, 1.0);
                let u = rand_field(g, &mut rng, 0.0, 1.0);
                let step = StepData::new(
                    rand_field(g, &mut rng, 0.0, 1.0),
                    rand_field(g, &mut rng, 0.0, 1.0),
                )
                .unwrap();
                let phi = rand_field(g, &mut rng, -1.0, 1.0);
                let eps = 1e-6;
                let e = |al: &ScalarField<f64>| energy(al, &u, &step.u_org, &p, a).unwrap().total;
                let mut ap = alpha.clone();
                ap.axpy(eps, &phi);
                let mut am = alpha.clone();
                am.axpy(-eps, &phi);
                let fd = (e(&ap) - e(&am)) / (2.0 * eps);
                let an = inner_l2(&grad_alpha(&alpha, &u, &p, a).unwrap(), &phi).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} {an}");

                let psi = |uu: &ScalarField<f64>| step_functional(&alpha, uu, &step, &p, a).unwrap();
                let mut up = u.clone();
                up.axpy(eps, &phi);
                let mut um = u.clone();
                um.axpy(-eps, &phi);
                let fd = (psi(&up) - psi(&um)) / (2.0 * eps);
                let an = inner_l2(&grad_u_step(&alpha, &u, &step, &p, a).unwrap(), &phi).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{fd} {an}");
            }
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = GridSpec::new(5, 5, 1.0 / 6.0, 1.0 / 6.0).unwrap();
        for a in [
            Anisotropy::smoothed_l1(0.3).unwrap(),
            Anisotropy::smoothed_ngon(3, 0.2).unwrap(),
            Anisotropy::smoothed_euclid(0.4).unwrap(),
        ] {
            for &pe in &[2.5, 3.0, 4.0] {
                let p = ModelParams { p: pe, ..params() };
                let alpha = rand_field(g, &mut rng, -1.0, 1.0);
                let u = rand_field(g, &mut rng, 0.0, 1.0);
                let step = StepData::new(
                    rand_field(g, &mut rng, 0.0, 1.0),
                    rand_field(g, &mut rng, 0.0, 1.0),
                )
                .unwrap();
                let v = rand_field(g, &mut rng, -1.0, 1.0);
                let h = UHessian::new(&alpha, &u, &p, &a);
                let hv = h.apply(&v);
                let eps = 1e-6;
                let mut up = u.clone();
                up.axpy(eps, &v);
                let mut um = u.clone();
                um.axpy(-eps, &v);
                let gp = grad_u_step(&alpha, &up, &step, &p, &a).unwrap();
                let gm = grad_u_step(&alpha, &um, &step, &p, &a).unwrap();
                let fd = gp.sub(&gm).unwrap().scale(0.5 / eps);
                let err = fd.sub(&hv).unwrap().norm_l2();
                assert!(err <= 1e-5 * hv.norm_l2(), "{} {err}", a.name());
            }
        }
    }

    #[test]
    fn alpha_curvature_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = GridSpec::new(4, 4, 0.2, 0.2).unwrap();
        let a = Anisotropy::smoothed_ngon(3, 0.3).unwrap();
        let alpha = rand_field(g, &mut rng, -1.0, 1.0);
        let u = rand_field(g, &mut rng, 0.0, 1.0);
        let curv = alpha_curvature(&alpha, &u, &a);
        let p = ModelParams {
            kappa: 1.0,
            ..params()
        };
        // the curvature is the diagonal of the α Hessian minus the Laplacian part
        let eps = 1e-6;
        for k in 0..g.len() {
            let mut ap = alpha.clone();
            ap.values_mut()[k] += eps;
            let mut am = alpha.clone();
            am.values_mut()[k] -= eps;
            let d = (grad_alpha(&ap, &u, &p, &a).unwrap().values()[k]
                - grad_alpha(&am, &u, &p, &a).unwrap().values()[k])
                / (2.0 * eps);
            let lap_diag = 2.0 / (g.hx * g.hx) + 2.0 / (g.hy * g.hy);
            assert!((d - lap_diag - curv.values()[k]).abs() < 1e-5 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn u_slice_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = GridSpec::new(6, 5, 0.15, 0.15).unwrap();
        let a = Anisotropy::smoothed_ngon(3, 0.1).unwrap();
        for _ in 0..20 {
            let alpha = rand_field(g, &mut rng, -3.0, 3.0);
            let u1 = rand_field(g, &mut rng, -1.0, 2.0);
            let u2 = rand_field(g, &mut rng, -1.0, 2.0);
            let step = StepData::new(
                rand_field(g, &mut rng, 0.0, 1.0),
                rand_field(g, &mut rng, 0.0, 1.0),
            )
            .unwrap();
            let p = params();
            let f1 = step_functional(&alpha, &u1, &step, &p, &a).unwrap();
            let f2 = step_functional(&alpha, &u2, &step, &p, &a).unwrap();
            let g1 = grad_u_step(&alpha, &u1, &step, &p, &a).unwrap();
            let lin = f1 + inner_l2(&g1, &u2.sub(&u1).unwrap()).unwrap();
            assert!(f2 >= lin - 1e-10 * (1.0 + f2.abs()));
        }
    }

    #[test]
    fn rejects_grid_mismatch() {
        let a = Anisotropy::smoothed_l1(0.1).unwrap();
        let f = ScalarField::<f64>::zeros(GridSpec::new(2, 2, 0.5, 0.5).unwrap());
        let h = ScalarField::<f64>::zeros(GridSpec::new(3, 2, 0.5, 0.5).unwrap());
        assert!(matches!(energy(&f, &h, &f, &params(), &a), Err(Error::Shape(_))));
        assert!(matches!(grad_alpha(&f, &h, &params(), &a), Err(Error::Shape(_))));
    }

    #[test]
    fn params_validation() {
        assert_eq!(params().validate().unwrap(), 2);
        let bad_p = ModelParams { p: 2.0, ..params() };
        assert!(matches!(
            bad_p.validate(),
            Err(Error::Assumption { assumption: "A0", .. })
        ));
        let bad_m = ModelParams {
            tau: 0.3,
            ..params()
        };
        assert!(matches!(bad_m.validate(), Err(Error::Config(_))));
        let fine = ModelParams {
            tau: 0.1,
            t_final: 0.3,
            ..params()
        };
        assert_eq!(fine.validate().unwrap(), 3);
    }
}
