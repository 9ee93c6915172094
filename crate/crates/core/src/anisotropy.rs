//! Smooth convex anisotropies `γ` and the rotation `R(α)` acting on gradients.
//!
//! All families are sums of `√(s² + ε²) − ε` over projections `s` of the
//! argument, so `γ(0) = 0` is the unique minimizer, `∇γ` is bounded and
//! `∇²γ` is bounded by `Σ weights / ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type Vec2<T> = [T; 2];

/// Orientation angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle<T>(pub T);

#[derive(Debug, Clone, PartialEq)]
pub enum Family<T> {
    /// `Σ_k √(w_k² + ε²) − ε` over the two axes.
    SmoothedL1,
    /// `Σ_j c_j (√((n_j·w)² + ε²) − ε)` with `n_j = (cos jπ/N, sin jπ/N)`.
    SmoothedNgon { weights: Vec<T> },
    /// `√(|w|² + ε²) − ε`; rotation invariant.
    SmoothedEuclid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anisotropy<T> {
    family: Family<T>,
    epsilon: T,
    // Unit normals for the n-gon family; empty otherwise.
    dirs: Vec<Vec2<T>>,
    grad_bound: T,
    hess_bound: T,
}

#[inline]
fn smooth_abs<T: Real>(s: T, eps: T) -> T {
    // √(s²+ε²) − ε, written to avoid cancellation for small |s|.
    let r = (s * s + eps * eps).sqrt();
    s * s / (r + eps)
}

#[inline]
fn dot<T: Real>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
fn norm<T: Real>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

/// Counterclockwise rotation by `alpha`.
#[inline]
pub fn rotate<T: Real>(alpha: Angle<T>, w: Vec2<T>) -> Vec2<T> {
    let (s, c) = alpha.0.sin_cos();
    [w[0] * c - w[1] * s, w[0] * s + w[1] * c]
}

/// `R(π/2) w`.
#[inline]
pub fn perp<T: Real>(w: Vec2<T>) -> Vec2<T> {
    [-w[1], w[0]]
}

impl<T: Real> Anisotropy<T> {
    pub fn smoothed_l1(epsilon: T) -> Result<Self> {
        Self::new(Family::SmoothedL1, epsilon)
    }

    pub fn smoothed_euclid(epsilon: T) -> Result<Self> {
        Self::new(Family::SmoothedEuclid, epsilon)
    }

    /// Regular n-gon family with unit weights.
    pub fn smoothed_ngon(n_dirs: usize, epsilon: T) -> Result<Self> {
        Self::new(
            Family::SmoothedNgon {
                weights: vec![T::one(); n_dirs],
            },
            epsilon,
        )
    }

    pub fn new(family: Family<T>, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::Assumption {
                assumption: "A2",
                message: format!("smoothing radius epsilon must be positive, got {epsilon}"),
            });
        }
        let (dirs, grad_bound, hess_bound) = match &family {
            Family::SmoothedL1 => (Vec::new(), T::lit(2.0).sqrt(), T::lit(2.0) / epsilon),
            Family::SmoothedEuclid => (Vec::new(), T::one(), T::one() / epsilon),
            Family::SmoothedNgon { weights } => {
                let n = weights.len();
                if n < 2 {
                    return Err(Error::Assumption {
                        assumption: "A2",
                        message: format!("n-gon anisotropy needs at least 2 directions, got {n}"),
                    });
                }
                if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
                    return Err(Error::Assumption {
                        assumption: "A2",
                        message: "n-gon weights must be finite and nonnegative".into(),
                    });
                }
                let dirs = ngon_dirs::<T>(n);
                if !spans_plane(&dirs, weights) {
                    return Err(Error::Assumption {
                        assumption: "A2",
                        message: "positive-weight directions must span the plane, otherwise \
                                  the origin is not the unique minimizer"
                            .into(),
                    });
                }
                let total: T = weights.iter().copied().sum();
                let gb = zonotope_radius(&dirs, weights);
                (dirs, gb, total / epsilon)
            }
        };
        Ok(Self {
            family,
            epsilon,
            dirs,
            grad_bound,
            hess_bound,
        })
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `sup_w |∇γ(w)|`.
    pub fn grad_bound(&self) -> T {
        self.grad_bound
    }

    /// Lipschitz constant of `∇γ`.
    pub fn hess_bound(&self) -> T {
        self.hess_bound
    }

    /// `|∇γ|_{W^{1,∞}}` taken as `grad_bound + hess_bound`.
    pub fn w1inf_bound(&self) -> T {
        self.grad_bound + self.hess_bound
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            Family::SmoothedL1 => "smoothed-l1",
            Family::SmoothedNgon { .. } => "smoothed-ngon",
            Family::SmoothedEuclid => "smoothed-euclid",
        }
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.family, Family::SmoothedEuclid)
    }

    pub fn eval(&self, w: Vec2<T>) -> T {
        let eps = self.epsilon;
        match &self.family {
            Family::SmoothedL1 => smooth_abs(w[0], eps) + smooth_abs(w[1], eps),
            Family::SmoothedEuclid => smooth_abs(norm(w), eps),
            Family::SmoothedNgon { weights } => self
                .dirs
                .iter()
                .zip(weights)
                .map(|(n, &c)| c * smooth_abs(dot(*n, w), eps))
                .fold(T::zero(), |a, b| a + b),
        }
    }

    pub fn grad(&self, w: Vec2<T>) -> Vec2<T> {
        let eps = self.epsilon;
        let d = |s: T| s / (s * s + eps * eps).sqrt();
        match &self.family {
            Family::SmoothedL1 => [d(w[0]), d(w[1])],
            Family::SmoothedEuclid => {
                let r = (dot(w, w) + eps * eps).sqrt();
                [w[0] / r, w[1] / r]
            }
            Family::SmoothedNgon { weights } => {
                let mut g = [T::zero(); 2];
                for (n, &c) in self.dirs.iter().zip(weights) {
                    let k = c * d(dot(*n, w));
                    g[0] = g[0] + k * n[0];
                    g[1] = g[1] + k * n[1];
                }
                g
            }
        }
    }

    /// Hessian `[[h00, h01], [h01, h11]]`.
    pub fn hess(&self, w: Vec2<T>) -> [[T; 2]; 2] {
        let eps = self.epsilon;
        let e2 = eps * eps;
        let dd = |s: T| {
            let r = (s * s + e2).sqrt();
            e2 / (r * r * r)
        };
        match &self.family {
            Family::SmoothedL1 => [[dd(w[0]), T::zero()], [T::zero(), dd(w[1])]],
            Family::SmoothedEuclid => {
                let q = dot(w, w) + e2;
                let r3 = q * q.sqrt();
                [
                    [(q - w[0] * w[0]) / r3, -w[0] * w[1] / r3],
                    [-w[0] * w[1] / r3, (q - w[1] * w[1]) / r3],
                ]
            }
            Family::SmoothedNgon { weights } => {
                let mut h = [[T::zero(); 2]; 2];
                for (n, &c) in self.dirs.iter().zip(weights) {
                    let k = c * dd(dot(*n, w));
                    h[0][0] = h[0][0] + k * n[0] * n[0];
                    h[0][1] = h[0][1] + k * n[0] * n[1];
                    h[1][1] = h[1][1] + k * n[1] * n[1];
                }
                h[1][0] = h[0][1];
                h
            }
        }
    }

    /// `∇γ(R(α)w) · R(α + π/2)w`, which is `d/dα γ(R(α)w)`.
    pub fn angle_derivative(&self, alpha: Angle<T>, w: Vec2<T>) -> T {
        if self.is_isotropic() {
            return T::zero();
        }
        let rw = rotate(alpha, w);
        dot(self.grad(rw), perp(rw))
    }

    /// `d²/dα² γ(R(α)w) = (R⊥w)ᵀ∇²γ(Rw)(R⊥w) − ∇γ(Rw)·Rw`.
    pub fn angle_second_derivative(&self, alpha: Angle<T>, w: Vec2<T>) -> T {
        if self.is_isotropic() {
            return T::zero();
        }
        let rw = rotate(alpha, w);
        let q = perp(rw);
        let h = self.hess(rw);
        let quad = q[0] * (h[0][0] * q[0] + h[0][1] * q[1]) + q[1] * (h[1][0] * q[0] + h[1][1] * q[1]);
        quad - dot(self.grad(rw), rw)
    }

    /// Samples the plane and checks the (A2) properties; see [`A2Report`].
    pub fn verify_a2(&self, samples: usize, seed: u64) -> A2Report {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = self.epsilon.to_f64_lossy();
        let sample = |rng: &mut ChaCha8Rng| -> Vec2<T> {
            // log-uniform radius from 1e-3 ε to 1e3 ε
            let r = eps * 10f64.powf(rng.gen_range(-3.0..3.0));
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            [T::lit(r * th.cos()), T::lit(r * th.sin())]
        };
        let mut convex = Check::new("midpoint convexity");
        let mut gradb = Check::new("|grad| <= grad_bound");
        let mut lip = Check::new("grad Lipschitz <= hess_bound");
        let mut pos = Check::new("gamma(w) > 0 for w != 0");
        let gb = self.grad_bound.to_f64_lossy();
        let hb = self.hess_bound.to_f64_lossy();
        let rel = 1e-9;
        for _ in 0..samples.max(1) {
            let w = sample(&mut rng);
            let v = sample(&mut rng);
            let (gw, gv) = (self.eval(w).to_f64_lossy(), self.eval(v).to_f64_lossy());
            let mid = self
                .eval([(w[0] + v[0]) / T::lit(2.0), (w[1] + v[1]) / T::lit(2.0)])
                .to_f64_lossy();
            // positive when convexity is violated
            convex.record(mid - 0.5 * (gw + gv), rel * (1.0 + gw.abs() + gv.abs()), w, v);
            let dw = self.grad(w);
            let dv = self.grad(v);
            let nw = norm(dw).to_f64_lossy();
            gradb.record(nw - gb, rel * gb, w, w);
            let dgrad = norm([dw[0] - dv[0], dw[1] - dv[1]]).to_f64_lossy();
            let dx = norm([w[0] - v[0], w[1] - v[1]]).to_f64_lossy();
            lip.record(dgrad - hb * dx, rel * (1.0 + hb * dx), w, v);
            pos.record(if gw > 0.0 { -gw } else { 1.0 }, 0.0, w, w);
        }
        A2Report {
            family: self.name(),
            samples: samples.max(1),
            checks: vec![convex, gradb, lip, pos],
        }
    }
}

fn ngon_dirs<T: Real>(n: usize) -> Vec<Vec2<T>> {
    (0..n)
        .map(|j| {
            let th = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(n);
            [th.cos(), th.sin()]
        })
        .collect()
}

fn spans_plane<T: Real>(dirs: &[Vec2<T>], weights: &[T]) -> bool {
    let active: Vec<_> = dirs
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > T::zero())
        .map(|(d, _)| *d)
        .collect();
    active.iter().enumerate().any(|(k, a)| {
        active[k + 1..]
            .iter()
            .any(|b| (a[0] * b[1] - a[1] * b[0]).abs() > T::lit(1e-6))
    })
}

// sup over sign patterns of |Σ σ_j c_j n_j|; the maximizing patterns are the
// half-plane patterns sign(n_j · e), enumerated between consecutive normals.
fn zonotope_radius<T: Real>(dirs: &[Vec2<T>], weights: &[T]) -> T {
    let n = dirs.len();
    let mut best = T::zero();
    for k in 0..2 * n {
        let th = T::PI() / T::lit(2.0)
            + T::PI() * (T::from_usize_lossy(k) + T::lit(0.5)) / T::from_usize_lossy(n);
        let e = [th.cos(), th.sin()];
        let mut s = [T::zero(); 2];
        for (d, &c) in dirs.iter().zip(weights) {
            let sg = if dot(*d, e) >= T::zero() { T::one() } else { -T::one() };
            s[0] = s[0] + sg * c * d[0];
            s[1] = s[1] + sg * c * d[1];
        }
        best = best.max(norm(s));
    }
    best
}

/// Outcome of one sampled property.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Largest violation margin seen (≤ tolerance when passed).
    pub worst: f64,
    pub witness: ([f64; 2], [f64; 2]),
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: true,
            worst: f64::NEG_INFINITY,
            witness: ([0.0; 2], [0.0; 2]),
        }
    }

    fn record<T: Real>(&mut self, margin: f64, tol: f64, w: Vec2<T>, v: Vec2<T>) {
        if margin > self.worst {
            self.worst = margin;
            self.witness = (
                [w[0].to_f64_lossy(), w[1].to_f64_lossy()],
                [v[0].to_f64_lossy(), v[1].to_f64_lossy()],
            );
        }
        if margin > tol {
            self.passed = false;
        }
    }
}

#[derive(Debug, Clone)]
pub struct A2Report {
    pub family: &'static str,
    pub samples: usize,
    pub checks: Vec<Check>,
}

impl A2Report {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Free-function forms used by the energy code.
pub fn gamma_eval<T: Real>(a: &Anisotropy<T>, w: Vec2<T>) -> T {
    a.eval(w)
}

pub fn gamma_grad<T: Real>(a: &Anisotropy<T>, w: Vec2<T>) -> Vec2<T> {
    a.grad(w)
}

pub fn gamma_angle_derivative<T: Real>(a: &Anisotropy<T>, alpha: Angle<T>, w: Vec2<T>) -> T {
    a.angle_derivative(alpha, w)
}
