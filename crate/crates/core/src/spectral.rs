//! Exact solves with `a·I − b·laplacian` on a Dirichlet grid.
//!
//! The discrete sine vectors diagonalize the 5-point Laplacian, so the
//! operator is inverted by a forward transform, a pointwise division and a
//! backward transform. Transforms are dense matrix products, which is plenty
//! for the image sizes the solver targets.

use crate::grid::{GridSpec, ScalarField};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct DirichletSolver<T> {
    grid: GridSpec<T>,
    // sine_x[k * nx + i] = sin(π (k+1)(i+1) / (nx+1))
    sine_x: Vec<T>,
    sine_y: Vec<T>,
    eig_x: Vec<T>,
    eig_y: Vec<T>,
}

fn sine_matrix<T: Real>(n: usize) -> Vec<T> {
    let np1 = T::from_usize_lossy(n + 1);
    let mut m = Vec::with_capacity(n * n);
    for k in 0..n {
        for i in 0..n {
            let arg = T::PI() * T::from_usize_lossy((k + 1) * (i + 1)) / np1;
            m.push(arg.sin());
        }
    }
    m
}

fn eigenvalues<T: Real>(n: usize, h: T) -> Vec<T> {
    let np1 = T::from_usize_lossy(n + 1);
    let four = T::lit(4.0);
    (0..n)
        .map(|k| {
            let s = (T::PI() * T::from_usize_lossy(k + 1) / (T::lit(2.0) * np1)).sin();
            four / (h * h) * s * s
        })
        .collect()
}

impl<T: Real> DirichletSolver<T> {
    pub fn new(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            sine_x: sine_matrix(grid.nx),
            sine_y: sine_matrix(grid.ny),
            eig_x: eigenvalues(grid.nx, grid.hx),
            eig_y: eigenvalues(grid.ny, grid.hy),
        }
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    /// Eigenvalues of `-laplacian` along x and y; the 2-D spectrum is all sums.
    pub fn eigenvalues(&self) -> (&[T], &[T]) {
        (&self.eig_x, &self.eig_y)
    }

    // out[l][k] = Σ_j Σ_i S_y[l][j] S_x[k][i] f[j][i]
    fn transform(&self, f: &[T]) -> Vec<T> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut rows = vec![T::zero(); nx * ny];
        for j in 0..ny {
            let src = &f[j * nx..(j + 1) * nx];
            for k in 0..nx {
                let s = &self.sine_x[k * nx..(k + 1) * nx];
                let mut acc = T::zero();
                for i in 0..nx {
                    acc = acc + s[i] * src[i];
                }
                rows[j * nx + k] = acc;
            }
        }
        let mut out = vec![T::zero(); nx * ny];
        for l in 0..ny {
            let s = &self.sine_y[l * ny..(l + 1) * ny];
            for j in 0..ny {
                let w = s[j];
                let src = &rows[j * nx..(j + 1) * nx];
                let dst = &mut out[l * nx..(l + 1) * nx];
                for k in 0..nx {
                    dst[k] = dst[k] + w * src[k];
                }
            }
        }
        out
    }

    /// Solves `(a·I − b·laplacian) x = rhs`; requires `a + b·λ > 0` for all
    /// discrete eigenvalues `λ`.
    pub fn solve(&self, a: T, b: T, rhs: &ScalarField<T>) -> ScalarField<T> {
        debug_assert_eq!(rhs.grid(), &self.grid);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut coef = self.transform(rhs.values());
        let norm = T::lit(4.0) / (T::from_usize_lossy(nx + 1) * T::from_usize_lossy(ny + 1));
        for l in 0..ny {
            for k in 0..nx {
                let d = a + b * (self.eig_x[k] + self.eig_y[l]);
                coef[l * nx + k] = coef[l * nx + k] * norm / d;
            }
        }
        // The sine matrix is symmetric, so the same transform inverts itself
        // up to the normalization applied above.
        let vals = self.transform(&coef);
        ScalarField::from_vec(self.grid, vals).expect("finite solve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::laplacian;

    #[test]
    fn solve_inverts_shifted_laplacian() {
        let g = GridSpec::new(7, 5, 0.1, 0.15).unwrap();
        let f = ScalarField::from_fn(g, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0);
        let s = DirichletSolver::new(g);
        let (a, b) = (2.5, 0.3);
        let x = s.solve(a, b, &f);
        let back = x.scale(a).sub(&laplacian(&x).scale(b)).unwrap();
        for (p, q) in back.values().iter().zip(f.values()) {
            assert!((p - q).abs() < 1e-11, "{p} vs {q}");
        }
    }

    #[test]
    fn smallest_eigenvalue_matches_grid() {
        let g = GridSpec::<f64>::new(9, 4, 0.1, 0.2).unwrap();
        let s = DirichletSolver::new(g);
        let (ex, ey) = s.eigenvalues();
        assert!((ex[0] + ey[0] - g.first_eigenvalue()).abs() < 1e-12);
    }
}
