//! Rectangular grids, zero-Dirichlet fields and the discrete calculus on them.
//!
//! A [`ScalarField`] stores the `nx × ny` interior nodes of the rectangle
//! `(0, a) × (0, b)`; every node outside the interior reads as zero. A
//! [`VectorField`] stores one vector per *cell* of the lattice including the
//! boundary ring, i.e. `(nx + 1) × (ny + 1)` entries. Cell `(ci, cj)` is
//! anchored at node `(ci - 1, cj - 1)`, so cell `(0, ·)` holds the forward
//! difference across the left boundary. With this layout
//!
//! ```text
//! <grad f, v> = -<f, div v>
//! ```
//!
//! holds exactly and `div ∘ grad` is the Dirichlet 5-point Laplacian.

use crate::error::{Error, Result};
use crate::scalar::{pairwise_sum_by, Real};

/// Uniform grid on an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub hx: T,
    pub hy: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, hx: T, hy: T) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!(
                "grid needs at least one interior node per axis, got {nx}x{ny}"
            )));
        }
        if !(hx > T::zero() && hy > T::zero()) || !hx.is_finite() || !hy.is_finite() {
            return Err(Error::Domain(format!(
                "grid spacings must be positive and finite, got hx={hx}, hy={hy}"
            )));
        }
        Ok(Self { nx, ny, hx, hy })
    }

    /// Square cells with `h = 1 / (max(nx, ny) + 1)`, so the domain fits in
    /// the unit square.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        let h = T::one() / T::from_usize_lossy(nx.max(ny) + 1);
        Self::new(nx, ny, h, h)
    }

    /// Physical extent `(a, b)` of the rectangle.
    pub fn extent(&self) -> (T, T) {
        (
            T::from_usize_lossy(self.nx + 1) * self.hx,
            T::from_usize_lossy(self.ny + 1) * self.hy,
        )
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of cells in a [`VectorField`] on this grid.
    #[inline]
    pub fn cell_len(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn cell_idx(&self, ci: usize, cj: usize) -> usize {
        cj * (self.nx + 1) + ci
    }

    /// Cell whose anchor is interior node `(i, j)`.
    #[inline]
    pub fn cell_of_node(&self, i: usize, j: usize) -> usize {
        self.cell_idx(i + 1, j + 1)
    }

    /// Area weight of one node / cell.
    #[inline]
    pub fn cell_area(&self) -> T {
        self.hx * self.hy
    }

    /// Smallest eigenvalue of the discrete Dirichlet Laplacian `-laplacian`.
    pub fn first_eigenvalue(&self) -> T {
        let (a, b) = self.extent();
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let sx = (T::PI() * self.hx / (two * a)).sin();
        let sy = (T::PI() * self.hy / (two * b)).sin();
        four / (self.hx * self.hx) * sx * sx + four / (self.hy * self.hy) * sy * sy
    }

    pub fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "grid {}x{} (h={}, {}) vs {}x{} (h={}, {})",
                self.nx, self.ny, self.hx, self.hy, other.nx, other.ny, other.hx, other.hy
            )))
        }
    }
}

/// Real value per interior node; zero on and outside the boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.len()],
        }
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Takes ownership of row-major node values (`i` fastest).
    pub fn from_vec(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx,
                grid.ny,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("scalar field entry {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.idx(i, j)]
    }

    /// Zero-extended read.
    #[inline]
    pub fn get(&self, i: isize, j: isize) -> T {
        if i < 0 || j < 0 || i >= self.grid.nx as isize || j >= self.grid.ny as isize {
            T::zero()
        } else {
            self.values[self.grid.idx(i as usize, j as usize)]
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    /// `self += a * x`. Panics on grid mismatch (internal use only).
    pub fn axpy(&mut self, a: T, x: &Self) {
        debug_assert_eq!(self.grid, x.grid);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s = *s + a * v;
        }
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// `|f|_{L²}`.
    pub fn norm_l2(&self) -> T {
        inner_unchecked(&self.values, &self.values, self.grid.cell_area()).sqrt()
    }

    /// `(|f|² + |∇f|²)^{1/2}`.
    pub fn norm_h1(&self) -> T {
        let g = grad(self);
        (self.norm_l2().powi(2) + g.norm_l2().powi(2)).sqrt()
    }

    /// Values sampled at the anchor node of every cell, zero on the boundary
    /// ring.
    pub fn at_cells(&self) -> Vec<T> {
        let g = &self.grid;
        let mut out = vec![T::zero(); g.cell_len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                out[g.cell_of_node(i, j)] = self.values[g.idx(i, j)];
            }
        }
        out
    }

    /// Adjoint of [`Self::at_cells`]: keeps the cells anchored at interior
    /// nodes and drops the boundary ring.
    pub fn from_cells(grid: GridSpec<T>, cells: &[T]) -> Self {
        debug_assert_eq!(cells.len(), grid.cell_len());
        Self::from_fn(grid, |i, j| cells[grid.cell_of_node(i, j)])
    }
}

/// One 2-vector per lattice cell (boundary ring included).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: GridSpec<T>,
    x: Vec<T>,
    y: Vec<T>,
}

impl<T: Real> VectorField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            x: vec![T::zero(); grid.cell_len()],
            y: vec![T::zero(); grid.cell_len()],
        }
    }

    pub fn from_components(grid: GridSpec<T>, x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = grid.cell_len();
        if x.len() != n || y.len() != n {
            return Err(Error::Shape(format!(
                "expected {n} cell values per component, got {} and {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("vector field".into()));
        }
        Ok(Self { grid, x, y })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn x(&self) -> &[T] {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[T] {
        &self.y
    }

    #[inline]
    pub fn get(&self, cell: usize) -> [T; 2] {
        [self.x[cell], self.y[cell]]
    }

    #[inline]
    pub fn set(&mut self, cell: usize, v: [T; 2]) {
        self.x[cell] = v[0];
        self.y[cell] = v[1];
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn norm_l2(&self) -> T {
        inner_l2(self, self).expect("same grid").sqrt()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: T, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (s, &v) in self.x.iter_mut().zip(&other.x) {
            *s = *s + a * v;
        }
        for (s, &v) in self.y.iter_mut().zip(&other.y) {
            *s = *s + a * v;
        }
    }
}

/// Forward differences with zero-extension, one per lattice cell.
pub fn grad<T: Real>(f: &ScalarField<T>) -> VectorField<T> {
    let g = *f.grid();
    let mut out = VectorField::zeros(g);
    for cj in 0..=g.ny {
        let j = cj as isize - 1;
        for ci in 0..=g.nx {
            let i = ci as isize - 1;
            let here = f.get(i, j);
            let c = g.cell_idx(ci, cj);
            out.x[c] = (f.get(i + 1, j) - here) / g.hx;
            out.y[c] = (f.get(i, j + 1) - here) / g.hy;
        }
    }
    out
}

/// Backward differences; the negative adjoint of [`grad`].
pub fn div<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let g = *v.grid();
    ScalarField::from_fn(g, |i, j| {
        let c = g.cell_of_node(i, j);
        let left = g.cell_idx(i, j + 1);
        let down = g.cell_idx(i + 1, j);
        (v.x[c] - v.x[left]) / g.hx + (v.y[c] - v.y[down]) / g.hy
    })
}

/// Dirichlet 5-point Laplacian, `div(grad f)`.
pub fn laplacian<T: Real>(f: &ScalarField<T>) -> ScalarField<T> {
    let g = *f.grid();
    let (cx, cy) = (T::one() / (g.hx * g.hx), T::one() / (g.hy * g.hy));
    let two = T::lit(2.0);
    ScalarField::from_fn(g, |i, j| {
        let (i, j) = (i as isize, j as isize);
        let c = f.get(i, j);
        cx * (f.get(i + 1, j) - two * c + f.get(i - 1, j))
            + cy * (f.get(i, j + 1) - two * c + f.get(i, j - 1))
    })
}

fn inner_unchecked<T: Real>(a: &[T], b: &[T], w: T) -> T {
    pairwise_sum_by(0, a.len(), |k| a[k] * b[k]) * w
}

/// Fields that carry an `L²(Ω)` inner product.
pub trait L2Inner<T> {
    fn inner_l2(&self, other: &Self) -> Result<T>;
}

impl<T: Real> L2Inner<T> for ScalarField<T> {
    fn inner_l2(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        Ok(inner_unchecked(
            &self.values,
            &other.values,
            self.grid.cell_area(),
        ))
    }
}

impl<T: Real> L2Inner<T> for VectorField<T> {
    fn inner_l2(&self, other: &Self) -> Result<T> {
        self.grid.check_same(&other.grid)?;
        let n = self.x.len();
        let s = pairwise_sum_by(0, n, |k| {
            self.x[k] * other.x[k] + self.y[k] * other.y[k]
        });
        Ok(s * self.grid.cell_area())
    }
}

/// `Σ f·g·hx·hy` (componentwise for vector fields).
pub fn inner_l2<T: Real, F: L2Inner<T>>(f: &F, g: &F) -> Result<T> {
    f.inner_l2(g)
}

/// `∫ |v|^p` by the nodewise rule (no p-th root).
pub fn norm_lp<T: Real>(v: &VectorField<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::Domain(format!("norm exponent must be >= 1, got {p}")));
    }
    let s = pairwise_sum_by(0, v.len(), |k| {
        let m = v.x[k].hypot(v.y[k]);
        if m == T::zero() {
            T::zero()
        } else {
            m.powf(p)
        }
    });
    Ok(s * v.grid.cell_area())
}

/// `(∫ |v|^p)^{1/p}`.
pub fn norm_lp_rooted<T: Real>(v: &VectorField<T>, p: T) -> Result<T> {
    Ok(norm_lp(v, p)?.powf(T::one() / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spike3() -> ScalarField<f64> {
        let g = GridSpec::new(3, 3, 1.0, 1.0).unwrap();
        ScalarField::from_fn(g, |i, j| if (i, j) == (1, 1) { 1.0 } else { 0.0 })
    }

    #[test]
    fn grad_of_zero_is_zero() {
        let g = GridSpec::new(4, 3, 0.5, 0.25).unwrap();
        let v = grad(&ScalarField::zeros(g));
        assert!(v.x().iter().chain(v.y()).all(|&c| c == 0.0));
    }

    #[test]
    fn grad_of_center_spike() {
        let f = spike3();
        let g = *f.grid();
        let v = grad(&f);
        for cj in 0..=3 {
            for ci in 0..=3 {
                let c = g.cell_idx(ci, cj);
                // anchor node (ci-1, cj-1)
                let ex = match (ci, cj) {
                    (2, 2) => -1.0,
                    (1, 2) => 1.0,
                    _ => 0.0,
                };
                let ey = match (ci, cj) {
                    (2, 2) => -1.0,
                    (2, 1) => 1.0,
                    _ => 0.0,
                };
                assert_eq!(v.x()[c], ex, "x at cell {ci},{cj}");
                assert_eq!(v.y()[c], ey, "y at cell {ci},{cj}");
            }
        }
    }

    #[test]
    fn laplacian_of_center_spike() {
        let l = laplacian(&spike3());
        let expected = [0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(l.values(), &expected);
        let d = div(&grad(&spike3()));
        assert_eq!(d.values(), &expected);
    }

    #[test]
    fn div_of_zero_is_zero() {
        let g = GridSpec::new(2, 5, 0.1, 0.2).unwrap();
        assert!(div(&VectorField::zeros(g)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inner_of_ones_on_2x2() {
        let g = GridSpec::new(2, 2, 0.5, 0.5).unwrap();
        let f = ScalarField::constant(g, 1.0);
        assert_eq!(inner_l2(&f, &f).unwrap(), 1.0);
        let z = ScalarField::zeros(g);
        assert_eq!(inner_l2(&z, &f).unwrap(), 0.0);
    }

    #[test]
    fn inner_rejects_mismatched_grids() {
        let a = ScalarField::<f64>::zeros(GridSpec::new(2, 2, 0.5, 0.5).unwrap());
        let b = ScalarField::<f64>::zeros(GridSpec::new(2, 3, 0.5, 0.5).unwrap());
        assert!(matches!(inner_l2(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn norm_lp_single_cell() {
        let g = GridSpec::new(1, 1, 1.0, 1.0).unwrap();
        let mut v = VectorField::zeros(g);
        v.set(0, [3.0, 4.0]);
        assert_eq!(norm_lp(&v, 2.0).unwrap(), 25.0);
        assert_eq!(norm_lp_rooted(&v, 2.0).unwrap(), 5.0);
        assert_eq!(norm_lp(&VectorField::zeros(g), 3.0).unwrap(), 0.0);
        assert!(matches!(norm_lp(&v, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::<f64>::new(0, 3, 1.0, 1.0).is_err());
        assert!(GridSpec::<f64>::new(3, 3, 0.0, 1.0).is_err());
        assert!(GridSpec::<f64>::new(3, 3, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn extent_is_consistent() {
        let g = GridSpec::<f64>::new(7, 4, 0.125, 0.2).unwrap();
        let (a, b) = g.extent();
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        let u = GridSpec::<f64>::unit(15, 9).unwrap();
        assert_eq!(u.extent().0, 1.0);
    }

    #[test]
    fn from_vec_rejects_nan_and_bad_length() {
        let g = GridSpec::new(2, 2, 1.0, 1.0).unwrap();
        assert!(matches!(
            ScalarField::from_vec(g, vec![0.0; 3]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            ScalarField::from_vec(g, vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::Numeric(_))
        ));
    }

    fn field_strategy() -> impl Strategy<Value = ScalarField<f64>> {
        (1usize..7, 1usize..7, 0.1f64..2.0, 0.1f64..2.0).prop_flat_map(|(nx, ny, hx, hy)| {
            prop::collection::vec(-3.0f64..3.0, nx * ny).prop_map(move |vals| {
                ScalarField::from_vec(GridSpec::new(nx, ny, hx, hy).unwrap(), vals).unwrap()
            })
        })
    }

    fn pair_strategy() -> impl Strategy<Value = (ScalarField<f64>, ScalarField<f64>)> {
        field_strategy().prop_flat_map(|f| {
            let g = *f.grid();
            prop::collection::vec(-3.0f64..3.0, g.len()).prop_map(move |vals| {
                (f.clone(), ScalarField::from_vec(g, vals).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_is_symmetric_negative((f, g) in pair_strategy()) {
            let lf = laplacian(&f);
            let lg = laplacian(&g);
            let a = inner_l2(&lf, &g).unwrap();
            let b = inner_l2(&f, &lg).unwrap();
            let scale = 1.0 + a.abs().max(b.abs());
            prop_assert!((a - b).abs() <= 1e-12 * scale);
            prop_assert!(inner_l2(&lf, &f).unwrap() <= 1e-12 * (1.0 + f.norm_l2()));
        }

        #[test]
        fn laplacian_equals_div_grad(f in field_strategy()) {
            let a = laplacian(&f);
            let b = div(&grad(&f));
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn discrete_poincare(f in field_strategy()) {
            let lam = f.grid().first_eigenvalue();
            let lhs = inner_l2(&f, &f).unwrap();
            let gf = grad(&f);
            let rhs = inner_l2(&gf, &gf).unwrap() / lam;
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn inner_is_symmetric((f, g) in pair_strategy()) {
            prop_assert_eq!(inner_l2(&f, &g).unwrap(), inner_l2(&g, &f).unwrap());
        }

        #[test]
        fn zero_ring_extension_preserves_operators(f in field_strategy()) {
            let g = *f.grid();
            let big = GridSpec::new(g.nx + 2, g.ny + 2, g.hx, g.hy).unwrap();
            let fb = ScalarField::from_fn(big, |i, j| {
                if i == 0 || j == 0 || i == g.nx + 1 || j == g.ny + 1 {
                    0.0
                } else {
                    f.at(i - 1, j - 1)
                }
            });
            let (l, lb) = (laplacian(&f), laplacian(&fb));
            let (v, vb) = (grad(&f), grad(&fb));
            for j in 0..g.ny {
                for i in 0..g.nx {
                    prop_assert_eq!(l.at(i, j), lb.at(i + 1, j + 1));
                }
            }
            for cj in 0..=g.ny {
                for ci in 0..=g.nx {
                    let c = g.cell_idx(ci, cj);
                    let cb = big.cell_idx(ci + 1, cj + 1);
                    prop_assert_eq!(v.get(c), vb.get(cb));
                }
            }
        }
    }
}
