//! Uniform one-dimensional cell-centred grids and piecewise-constant lattice
//! functions.
//!
//! Cell `i` covers `[x_i - dx/2, x_i + dx/2)` with centre `x_i = i dx`, for
//! `i` in `-K..=K`. Values outside the grid are taken equal to the nearest
//! boundary cell, which is the extension the scheme uses for its nonlocal
//! term.

use crate::error::{Error, Result};
use crate::special::gauss_legendre;

/// Uniform grid with cells indexed `-K..=K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    dx: f64,
    k_cells: usize,
}

impl Grid1D {
    pub fn new(dx: f64, k_cells: usize) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!("cell width must be positive, got {dx}")));
        }
        if k_cells < 1 {
            return Err(Error::InvalidParameter("truncation half-width K must be at least 1".into()));
        }
        Ok(Self { dx, k_cells })
    }

    /// Grid whose outermost cell centres sit at `±half_width`; `half_width / dx`
    /// must be an integer.
    pub fn covering(half_width: f64, dx: f64) -> Result<Self> {
        let k = half_width / dx;
        let rounded = k.round();
        if (k - rounded).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "half-width {half_width} is not an integer multiple of dx = {dx}"
            )));
        }
        Self::new(dx, rounded as usize)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// The truncation half-width `K`.
    pub fn k(&self) -> usize {
        self.k_cells
    }

    pub fn cell_count(&self) -> usize {
        2 * self.k_cells + 1
    }

    /// Signed cell indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = isize> {
        let k = self.k_cells as isize;
        -k..=k
    }

    pub fn center(&self, i: isize) -> f64 {
        i as f64 * self.dx
    }

    /// Left and right faces of cell `i`.
    pub fn faces(&self, i: isize) -> (f64, f64) {
        let c = self.center(i);
        (c - 0.5 * self.dx, c + 0.5 * self.dx)
    }

    /// Storage offset of signed index `i`.
    pub fn slot(&self, i: isize) -> usize {
        (i + self.k_cells as isize) as usize
    }

    fn same_as(&self, other: &Grid1D) -> bool {
        self.k_cells == other.k_cells && (self.dx - other.dx).abs() <= 1e-14 * self.dx
    }
}

/// Cell averages on a [`Grid1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    grid: Grid1D,
    values: Vec<f64>,
}

impl LatticeFunction {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.cell_count()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite value in cell {}",
                pos as isize - grid.k() as isize
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid1D, c: f64) -> Self {
        Self { grid, values: vec![c; grid.cell_count()] }
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Samples `f` at the cell centres.
    pub fn from_centers(grid: Grid1D, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.indices().map(|i| f(grid.center(i))).collect();
        Self::new(grid, values)
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.cell_count());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value in signed cell `i`.
    pub fn at(&self, i: isize) -> f64 {
        self.values[self.grid.slot(i)]
    }

    /// Value with constant extension beyond the boundary cells.
    pub fn extended(&self, i: isize) -> f64 {
        let k = self.grid.k() as isize;
        self.at(i.clamp(-k, k))
    }

    /// `Σ U_i dx`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.dx()
    }

    /// `(Σ |U_i|^p dx)^(1/p)`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.grid.dx()).powf(1.0 / p)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Cell averages of `u0` by per-cell Gauss–Legendre quadrature of the given
/// order. Cells containing one of the `kinks` (points where `u0` is not
/// smooth) are split there before integrating.
pub fn project_initial(
    u0: impl Fn(f64) -> f64,
    kinks: &[f64],
    grid: Grid1D,
    quad_order: usize,
) -> Result<LatticeFunction> {
    if quad_order < 1 {
        return Err(Error::InvalidParameter("quadrature order must be at least 1".into()));
    }
    let (nodes, weights) = gauss_legendre(quad_order);
    let mut values = Vec::with_capacity(grid.cell_count());
    let mut pieces = Vec::with_capacity(4);
    for i in grid.indices() {
        let (lo, hi) = grid.faces(i);
        pieces.clear();
        pieces.push(lo);
        pieces.extend(kinks.iter().copied().filter(|&k| k > lo && k < hi));
        pieces.push(hi);
        pieces.sort_by(f64::total_cmp);
        let mut integral = 0.0;
        for w in pieces.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            for (x, wt) in nodes.iter().zip(&weights) {
                let xq = mid + half * x;
                let v = u0(xq);
                if !v.is_finite() {
                    return Err(Error::NonFiniteInitialData { cell: i, x: xq });
                }
                integral += wt * half * v;
            }
        }
        values.push(integral / grid.dx());
    }
    Ok(LatticeFunction::from_raw(grid, values))
}

/// Overlap weights of fine cells (offsets relative to the fine cell under the
/// coarse centre) making up one coarse cell of `ratio` fine widths.
fn restriction_stencil(ratio: usize) -> Vec<(isize, f64)> {
    let r = ratio as isize;
    let inv = 1.0 / ratio as f64;
    if ratio % 2 == 1 {
        let h = (r - 1) / 2;
        (-h..=h).map(|k| (k, inv)).collect()
    } else {
        // Coarse faces fall on fine centres: the two end cells count half.
        let h = r / 2;
        (-h..=h)
            .map(|k| (k, if k.abs() == h { 0.5 * inv } else { inv }))
            .collect()
    }
}

/// Exact cell-average restriction onto the grid with `ratio` times the cell
/// width and the same outer centres: each coarse value is the mean of the
/// (constant-extended) fine function over the coarse cell.
///
/// For odd ratios coarse cells are unions of whole fine cells, and
/// restrictions compose (`r∘s = rs`) away from the two outermost cells. For
/// even ratios the coarse faces bisect fine cells, which then contribute half.
pub fn restrict(fine: &LatticeFunction, ratio: usize) -> Result<LatticeFunction> {
    if ratio < 2 {
        return Err(Error::InvalidParameter(format!("restriction ratio must be >= 2, got {ratio}")));
    }
    let kf = fine.grid().k();
    if !kf.is_multiple_of(ratio) {
        return Err(Error::InvalidParameter(format!(
            "fine half-width K = {kf} is not divisible by the ratio {ratio}"
        )));
    }
    let coarse = Grid1D::new(fine.grid().dx() * ratio as f64, kf / ratio)?;
    let stencil = restriction_stencil(ratio);
    let r = ratio as isize;
    let values = coarse
        .indices()
        .map(|i| stencil.iter().map(|&(k, w)| w * fine.extended(i * r + k)).sum())
        .collect();
    Ok(LatticeFunction::from_raw(coarse, values))
}

/// `Σ |a_i - b_i| dx`.
pub fn l1_distance(a: &LatticeFunction, b: &LatticeFunction) -> Result<f64> {
    if !a.grid().same_as(b.grid()) {
        return Err(Error::GridMismatch(format!(
            "dx {} / K {} against dx {} / K {}",
            a.grid().dx(),
            a.grid().k(),
            b.grid().dx(),
            b.grid().k()
        )));
    }
    let sum: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum * a.grid().dx())
}

/// Total variation `Σ |a_{i+1} - a_i|` over neighbouring cells.
pub fn bv_seminorm(a: &LatticeFunction) -> f64 {
    a.values().windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
