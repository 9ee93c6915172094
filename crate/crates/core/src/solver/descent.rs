//! Block descent with Armijo backtracking.
//!
//! Each block minimizes one variable of `Ψ` with the other frozen. The search
//! direction solves `M d = −g` with a symmetric positive definite model `M`
//! (the exact Hessian for the convex `u` slice, the Dirichlet part plus the
//! nonnegative part of the angular curvature for `α`), so every direction is
//! a descent direction and the Armijo rule makes the objective nonincreasing.

use crate::anisotropy::Anisotropy;
use crate::energy::{
    aniso_integral, alpha_curvature, grad_alpha, grad_u_step, p_integral, step_penalties,
    ModelParams, StepData, UHessian,
};
use crate::error::{Error, Result};
use crate::grid::{grad, laplacian, ScalarField};
use crate::scalar::{pairwise_sum_by, Real};
use crate::spectral::DirichletSolver;

use super::SolveConfig;

fn dot<T: Real>(a: &ScalarField<T>, b: &ScalarField<T>) -> T {
    let (x, y) = (a.values(), b.values());
    pairwise_sum_by(0, x.len(), |k| x[k] * y[k])
}

/// Preconditioned conjugate gradients for an SPD operator; returns the
/// iterate after the relative residual drops below `rtol` or `max_iter`.
pub(crate) fn pcg<T: Real>(
    apply: impl Fn(&ScalarField<T>) -> ScalarField<T>,
    precond: impl Fn(&ScalarField<T>) -> ScalarField<T>,
    rhs: &ScalarField<T>,
    rtol: T,
    max_iter: usize,
) -> (ScalarField<T>, usize) {
    let mut x = ScalarField::zeros(*rhs.grid());
    let mut r = rhs.clone();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == T::zero() {
        return (x, 0);
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return (x, it);
        }
        let step = rz / pap;
        x.axpy(step, &p);
        r.axpy(-step, &ap);
        if dot(&r, &r).sqrt() <= rtol * b_norm {
            return (x, it);
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        let mut next = z.clone();
        next.axpy(beta, &p);
        p = next;
    }
    (x, max_iter)
}

#[derive(Debug, Clone)]
pub(crate) struct BlockOutcome<T> {
    pub x: ScalarField<T>,
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
}

/// Armijo backtracking along `d`; returns the accepted point and its value.
///
/// When both the predicted decrease and the change in `f` are below the
/// rounding level of `f`, the step is accepted on the strength of the
/// gradient decrease alone: the objective cannot resolve progress there.
fn line_search<T: Real>(
    f: &impl Fn(&ScalarField<T>) -> T,
    gnorm: &impl Fn(&ScalarField<T>) -> T,
    x: &ScalarField<T>,
    fx: T,
    g_norm_x: T,
    slope: T,
    d: &ScalarField<T>,
    cfg: &SolveConfig<T>,
) -> Option<(ScalarField<T>, T)> {
    let noise = T::lit(64.0) * T::epsilon() * (T::one() + fx.abs());
    let mut t = cfg.init_step;
    for _ in 0..60 {
        let mut trial = x.clone();
        trial.axpy(t, d);
        let ft = f(&trial);
        if ft.is_finite() {
            if ft <= fx + cfg.armijo_c * t * slope {
                return Some((trial, ft));
            }
            if (t * slope).abs() <= noise && ft <= fx + noise && gnorm(&trial) < g_norm_x {
                return Some((trial, ft));
            }
        }
        t = t * cfg.backtrack;
    }
    None
}

fn descend<T: Real>(
    x0: ScalarField<T>,
    f: impl Fn(&ScalarField<T>) -> T,
    gradient: impl Fn(&ScalarField<T>) -> ScalarField<T>,
    direction: impl Fn(&ScalarField<T>, &ScalarField<T>) -> ScalarField<T>,
    tol: T,
    max_iter: usize,
    cfg: &SolveConfig<T>,
) -> Result<BlockOutcome<T>> {
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = gradient(&x);
    let mut res = g.norm_l2();
    let gnorm = |y: &ScalarField<T>| gradient(y).norm_l2();
    for it in 0..max_iter {
        if !res.is_finite() || !fx.is_finite() {
            return Err(Error::Numeric("block descent".into()));
        }
        if res <= tol {
            return Ok(BlockOutcome {
                x,
                iterations: it,
                residual: res,
                converged: true,
            });
        }
        let mut d = direction(&x, &g);
        let mut slope = dot(&g, &d) * x.grid().cell_area();
        if !(slope < T::zero()) {
            d = g.scale(-T::one());
            slope = -dot(&g, &g) * x.grid().cell_area();
        }
        match line_search(&f, &gnorm, &x, fx, res, slope, &d, cfg) {
            Some((nx, nf)) => {
                x = nx;
                fx = nf;
                g = gradient(&x);
                res = g.norm_l2();
            }
            None => {
                return Ok(BlockOutcome {
                    x,
                    iterations: it,
                    residual: res,
                    converged: false,
                })
            }
        }
    }
    Ok(BlockOutcome {
        x,
        iterations: max_iter,
        residual: res,
        converged: res <= tol,
    })
}

const CG_RTOL: f64 = 1e-4;
const CG_MAX: usize = 200;

/// Minimizes `u ↦ Ψ(α, u)` (convex) by damped Newton–CG.
pub(crate) fn minimize_u_block<T: Real>(
    alpha: &ScalarField<T>,
    u0: ScalarField<T>,
    step: &StepData<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    spectral: &DirichletSolver<T>,
    tol: T,
    cfg: &SolveConfig<T>,
) -> Result<BlockOutcome<T>> {
    let alpha_cells = alpha.at_cells();
    let half = T::lit(0.5);
    // Ψ without the α-only Dirichlet term
    let f = |u: &ScalarField<T>| {
        let du = grad(u);
        let p_term = params.nu / params.p * p_integral(&du, params.p);
        let aniso = aniso_integral(&alpha_cells, &du, a);
        let fid = half * params.lambda * u.sub(&step.u_org).expect("grid").norm_l2().powi(2);
        let (l2, h1) = step_penalties(u, &step.w_bar, params).expect("grid");
        (p_term + aniso) + (fid + (l2 + h1))
    };
    let gradient = |u: &ScalarField<T>| grad_u_step(alpha, u, step, params, a).expect("grid");
    let direction = |u: &ScalarField<T>, g: &ScalarField<T>| {
        let h = UHessian::new(alpha, u, params, a);
        let (shift, diff) = (h.shift(), h.mean_diffusivity());
        let (d, _) = pcg(
            |v| h.apply(v),
            |r| spectral.solve(shift, diff, r),
            &g.scale(-T::one()),
            T::lit(CG_RTOL),
            CG_MAX,
        );
        d
    };
    descend(u0, f, gradient, direction, tol, cfg.max_inner, cfg)
}

/// Minimizes `α ↦ κ/2|∇α|² + ∫γ(R(α)∇u)` from `alpha0`.
pub(crate) fn minimize_alpha_block<T: Real>(
    alpha0: ScalarField<T>,
    u: &ScalarField<T>,
    params: &ModelParams<T>,
    a: &Anisotropy<T>,
    spectral: &DirichletSolver<T>,
    tol: T,
    max_iter: usize,
    cfg: &SolveConfig<T>,
) -> Result<BlockOutcome<T>> {
    let du = grad(u);
    let half = T::lit(0.5);
    let f = |al: &ScalarField<T>| {
        half * params.kappa * grad(al).norm_l2().powi(2) + aniso_integral(&al.at_cells(), &du, a)
    };
    let gradient = |al: &ScalarField<T>| grad_alpha(al, u, params, a).expect("grid");
    let direction = |al: &ScalarField<T>, g: &ScalarField<T>| {
        let curv = alpha_curvature(al, u, a).map(|c| c.max(T::zero()));
        let mean = curv.values().iter().copied().sum::<T>() / T::from_usize_lossy(curv.values().len());
        let apply = |v: &ScalarField<T>| {
            let mut out = laplacian(v).scale(-params.kappa);
            for (o, (c, x)) in out.values_mut().iter_mut().zip(curv.values().iter().zip(v.values())) {
                *o = *o + *c * *x;
            }
            out
        };
        let (d, _) = pcg(
            apply,
            |r| spectral.solve(mean, params.kappa, r),
            &g.scale(-T::one()),
            T::lit(CG_RTOL),
            CG_MAX,
        );
        d
    };
    descend(alpha0, f, gradient, direction, tol, max_iter, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn pcg_solves_shifted_laplacian() {
        let g = GridSpec::new(6, 5, 0.2, 0.2).unwrap();
        let b = ScalarField::from_fn(g, |i, j| (i as f64 - 2.0) * (j as f64 + 1.0));
        let op = |v: &ScalarField<f64>| {
            let mut o = laplacian(v).scale(-1.0);
            o.axpy(3.0, v);
            o
        };
        let (x, it) = pcg(op, |r| r.clone(), &b, 1e-12, 200);
        assert!(it < 200);
        let r = op(&x).sub(&b).unwrap();
        assert!(r.norm_l2() <= 1e-10 * b.norm_l2());
        // exact preconditioner converges in one iteration
        let s = DirichletSolver::new(g);
        let (_, it) = pcg(op, |r| s.solve(3.0, 1.0, r), &b, 1e-12, 200);
        assert_eq!(it, 1);
    }
}
