//! Deterministic test images on the unit-square grid.
//!
//! All generators return fields with values in `[0, 1]`; random ones are
//! seeded with ChaCha8 so the same arguments always give the same bits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Real;

fn unit_coords<T: Real>(g: &GridSpec<T>, i: usize, j: usize) -> (T, T) {
    (
        T::from_usize_lossy(i + 1) * g.hx,
        T::from_usize_lossy(j + 1) * g.hy,
    )
}

/// `exp(−|x − c|²/(2σ²))` centred in the domain, `σ` = 0.15 of the extent.
pub fn smooth_bump<T: Real>(n: usize) -> Result<ScalarField<T>> {
    Ok(bump_on(GridSpec::<T>::unit(n, n)?))
}

/// [`smooth_bump`] on an arbitrary grid.
pub fn bump_on<T: Real>(g: GridSpec<T>) -> ScalarField<T> {
    let (a, b) = g.extent();
    let half = T::lit(0.5);
    let s2 = T::lit(2.0) * (T::lit(0.15) * a.max(b)).powi(2);
    ScalarField::from_fn(g, |i, j| {
        let (x, y) = unit_coords(&g, i, j);
        let r2 = (x - half * a).powi(2) + (y - half * b).powi(2);
        (-r2 / s2).exp()
    })
}

/// Smooth bump plus uniform noise of amplitude `noise`, clipped to `[0, 1]`.
pub fn noisy_bump<T: Real>(n: usize, noise: f64, seed: u64) -> Result<ScalarField<T>> {
    let clean = smooth_bump::<T>(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = clean;
    for v in out.values_mut() {
        let e = T::lit(rng.gen_range(-noise..=noise));
        *v = (*v + e).max(T::zero()).min(T::one());
    }
    Ok(out)
}

/// Stripes along the diagonal: `(1 + sin(2π·k·(x + y)))/2`.
pub fn diagonal_ramp<T: Real>(n: usize, periods: f64) -> Result<ScalarField<T>> {
    let g = GridSpec::<T>::unit(n, n)?;
    let k = T::lit(periods) * T::TAU();
    let half = T::lit(0.5);
    Ok(ScalarField::from_fn(g, |i, j| {
        let (x, y) = unit_coords(&g, i, j);
        half * (T::one() + (k * (x + y)).sin())
    }))
}

/// Uniform grey `background` with a fraction `density` of nodes set to 0 or 1.
pub fn salt_and_pepper<T: Real>(
    n: usize,
    background: f64,
    density: f64,
    seed: u64,
) -> Result<ScalarField<T>> {
    let g = GridSpec::<T>::unit(n, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ScalarField::from_fn(g, |_, _| {
        if rng.gen_bool(density) {
            if rng.gen_bool(0.5) {
                T::one()
            } else {
                T::zero()
            }
        } else {
            T::lit(background)
        }
    }))
}

/// Uniform random values in `[0, 1]`.
pub fn uniform<T: Real>(n: usize, seed: u64) -> Result<ScalarField<T>> {
    let g = GridSpec::<T>::unit(n, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ScalarField::from_fn(g, |_, _| T::lit(rng.gen_range(0.0..=1.0))))
}
