//! Uniform square grids, cell-centred scalar and vector fields, and the
//! collocated finite-difference operators shared by every solver.
//!
//! Cells outside the box act as homogeneous Dirichlet ghosts: every stencil
//! reads them as zero. With that convention the central-difference `dx`/`dy`
//! operators commute exactly, so `divergence(from_stream(phi))` vanishes to
//! rounding and the curl update of the plane-wave solver never creates
//! divergence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform `n x n` grid of square cells covering `[-L, L]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    half_width: f64,
    n: usize,
}

impl GridSpec {
    pub const MIN_CELLS: usize = 8;

    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Domain(format!(
                "grid half width must be positive and finite, got {half_width}"
            )));
        }
        if n < Self::MIN_CELLS {
            return Err(Error::Domain(format!(
                "grid needs at least {} cells per side, got {n}",
                Self::MIN_CELLS
            )));
        }
        Ok(Self { half_width, n })
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell spacing `2L / n`.
    #[inline]
    pub fn h(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Area weight of one cell.
    #[inline]
    pub fn cell_area(&self) -> f64 {
        let h = self.h();
        h * h
    }

    /// Centre coordinate of column / row `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h()
    }

    /// Row-major index with `y` as the outer index.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Whether cell `(i, j)` touches the outer boundary of the box.
    #[inline]
    pub fn on_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.n || j + 1 == self.n
    }

    /// Iterator over `(i, j, x, y)` for every cell.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n).flat_map(move |j| {
            let y = self.coord(j);
            (0..self.n).map(move |i| (i, j, self.coord(i), y))
        })
    }
}

/// Cell-centred values on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "field has {} values but the grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite field value at cell {k}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at every cell centre.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.cells().map(|(_, _, x, y)| f(x, y)).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Value with zero ghost cells outside the box.
    #[inline]
    pub fn ghost(&self, i: isize, j: isize) -> f64 {
        let n = self.grid.n as isize;
        if i < 0 || j < 0 || i >= n || j >= n {
            0.0
        } else {
            self.values[j as usize * self.grid.n + i as usize]
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Signed integral `h^2 * sum(u)`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_area() * self.values.iter().sum::<f64>()
    }

    /// Largest `|u|` over cells touching the box boundary.
    pub fn boundary_max_abs(&self) -> f64 {
        let n = self.grid.n;
        let mut m: f64 = 0.0;
        for k in 0..n {
            for (i, j) in [(k, 0), (k, n - 1), (0, k), (n - 1, k)] {
                m = m.max(self.at(i, j).abs());
            }
        }
        m
    }

    /// Largest `|u|` over cells whose centre lies within `band` of the box edge.
    pub fn max_abs_within(&self, band: f64) -> f64 {
        let limit = self.grid.half_width - band;
        self.grid
            .cells()
            .filter(|&(_, _, x, y)| x.abs() > limit || y.abs() > limit)
            .map(|(i, j, _, _)| self.at(i, j).abs())
            .fold(0.0, f64::max)
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }
}

/// The plane-wave field `H = (h1, h2, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField2 {
    pub comp1: ScalarField,
    pub comp2: ScalarField,
}

impl VectorField2 {
    pub fn new(comp1: ScalarField, comp2: ScalarField) -> Result<Self> {
        if comp1.grid != comp2.grid {
            return Err(Error::Domain("vector components live on different grids".into()));
        }
        Ok(Self { comp1, comp2 })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self { comp1: ScalarField::zeros(grid), comp2: ScalarField::zeros(grid) }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        self.comp1.grid()
    }

    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        Self { comp1: self.comp1.axpy(a, &other.comp1), comp2: self.comp2.axpy(a, &other.comp2) }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { comp1: self.comp1.scale(a), comp2: self.comp2.scale(a) }
    }

    /// `h^2 * sum(|H|^2)`
    pub fn energy(&self) -> f64 {
        dot(self, self)
    }

    pub fn l2(&self) -> f64 {
        self.energy().sqrt()
    }
}

/// Cell-weighted inner product `h^2 * sum(a . b)`.
pub fn dot(a: &VectorField2, b: &VectorField2) -> f64 {
    let s1: f64 = a.comp1.values.iter().zip(&b.comp1.values).map(|(x, y)| x * y).sum();
    let s2: f64 = a.comp2.values.iter().zip(&b.comp2.values).map(|(x, y)| x * y).sum();
    a.grid().cell_area() * (s1 + s2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Cell-weighted L1, L2 and max norms.
pub fn norms(u: &ScalarField) -> Norms {
    let w = u.grid.cell_area();
    let (mut s1, mut s2, mut m) = (0.0, 0.0, 0.0f64);
    for &v in &u.values {
        s1 += v.abs();
        s2 += v * v;
        m = m.max(v.abs());
    }
    Norms { l1: w * s1, l2: (w * s2).sqrt(), linf: m }
}

/// `L1` distance `h^2 * sum|a - b|`.
pub fn l1_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    a.grid.cell_area() * a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

pub fn l2_distance(a: &ScalarField, b: &ScalarField) -> f64 {
    debug_assert_eq!(a.grid, b.grid);
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum();
    (a.grid.cell_area() * s).sqrt()
}

/// Five-point Laplacian written into `out`.
pub fn laplacian5_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    for j in 0..n {
        let row = j * n;
        for i in 0..n {
            let c = u[row + i];
            let w = if i > 0 { u[row + i - 1] } else { 0.0 };
            let e = if i + 1 < n { u[row + i + 1] } else { 0.0 };
            let s = if j > 0 { u[row - n + i] } else { 0.0 };
            let nn = if j + 1 < n { u[row + n + i] } else { 0.0 };
            out[row + i] = (e + w + nn + s - 4.0 * c) * inv_h2;
        }
    }
}

/// Standard five-point Laplacian with homogeneous Dirichlet ghosts.
pub fn laplacian5(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.grid.len()];
    laplacian5_into(&u.grid, &u.values, &mut out);
    ScalarField { grid: u.grid, values: out }
}

/// Central difference in `x` on raw row-major values, zero ghosts.
pub fn dx_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv = 1.0 / (2.0 * grid.h());
    for j in 0..n {
        let row = j * n;
        for i in 0..n {
            let e = if i + 1 < n { u[row + i + 1] } else { 0.0 };
            let w = if i > 0 { u[row + i - 1] } else { 0.0 };
            out[row + i] = (e - w) * inv;
        }
    }
}

/// Central difference in `y` on raw row-major values, zero ghosts.
pub fn dy_into(grid: &GridSpec, u: &[f64], out: &mut [f64]) {
    let n = grid.n;
    let inv = 1.0 / (2.0 * grid.h());
    for j in 0..n {
        for i in 0..n {
            let k = j * n + i;
            let nn = if j + 1 < n { u[k + n] } else { 0.0 };
            let s = if j > 0 { u[k - n] } else { 0.0 };
            out[k] = (nn - s) * inv;
        }
    }
}

/// Central difference in `x`, zero ghosts.
pub fn dx(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.grid.len()];
    dx_into(&u.grid, &u.values, &mut out);
    ScalarField { grid: u.grid, values: out }
}

/// Central difference in `y`, zero ghosts.
pub fn dy(u: &ScalarField) -> ScalarField {
    let mut out = vec![0.0; u.grid.len()];
    dy_into(&u.grid, &u.values, &mut out);
    ScalarField { grid: u.grid, values: out }
}

/// Scalar curl `h2_x - h1_y`.
pub fn curl_z(field: &VectorField2) -> ScalarField {
    let a = dx(&field.comp2);
    let b = dy(&field.comp1);
    a.zip_map(&b, |p, q| p - q)
}

/// `h1_x + h2_y`.
pub fn divergence(field: &VectorField2) -> ScalarField {
    let a = dx(&field.comp1);
    let b = dy(&field.comp2);
    a.zip_map(&b, |p, q| p + q)
}

/// Divergence-free field `(phi_y, -phi_x)` from a stream function.
pub fn from_stream(phi: &ScalarField) -> VectorField2 {
    VectorField2 { comp1: dy(phi), comp2: dx(phi).scale(-1.0) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(1.0, n).unwrap()
    }

    fn interior(g: &GridSpec, margin: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = g.n();
        (margin..n - margin).flat_map(move |j| (margin..n - margin).map(move |i| (i, j)))
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(GridSpec::new(1.0, 7).is_err());
        assert!(GridSpec::new(0.0, 16).is_err());
        assert!(GridSpec::new(f64::NAN, 16).is_err());
        let g = grid(16);
        assert_eq!(g.h(), 0.125);
        assert!((g.coord(0) + 0.9375).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_constant_and_quadratic() {
        let g = grid(16);
        let c = laplacian5(&ScalarField::constant(g, 3.5));
        for (i, j) in interior(&g, 1) {
            assert!(c.at(i, j).abs() < 1e-12);
        }
        let q = laplacian5(&ScalarField::from_fn(g, |x, y| x * x + y * y));
        for (i, j) in interior(&g, 1) {
            assert!((q.at(i, j) - 4.0).abs() < 1e-10, "{}", q.at(i, j));
        }
    }

    fn pseudo_random(g: GridSpec, seed: u64) -> ScalarField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ScalarField::from_values(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn laplacian_matches_loop_oracle() {
        let g = grid(8);
        let u = pseudo_random(g, 7);
        let lap = laplacian5(&u);
        let h2 = g.h() * g.h();
        for j in 0..8isize {
            for i in 0..8isize {
                let expect = (u.ghost(i + 1, j) + u.ghost(i - 1, j) + u.ghost(i, j + 1)
                    + u.ghost(i, j - 1)
                    - 4.0 * u.ghost(i, j))
                    / h2;
                assert!((lap.at(i as usize, j as usize) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn curl_of_linear_fields() {
        let g = grid(16);
        let h = VectorField2::new(ScalarField::zeros(g), ScalarField::from_fn(g, |x, _| x)).unwrap();
        let w = curl_z(&h);
        for (i, j) in interior(&g, 1) {
            assert!((w.at(i, j) - 1.0).abs() < 1e-12);
        }
        let sym = VectorField2::new(ScalarField::from_fn(g, |_, y| y), ScalarField::from_fn(g, |x, _| x)).unwrap();
        let w = curl_z(&sym);
        for (i, j) in interior(&g, 1) {
            assert!(w.at(i, j).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_linear_field_and_oracle() {
        let g = grid(16);
        let h = VectorField2::new(ScalarField::from_fn(g, |x, _| x), ScalarField::zeros(g)).unwrap();
        let d = divergence(&h);
        for (i, j) in interior(&g, 1) {
            assert!((d.at(i, j) - 1.0).abs() < 1e-12);
        }
        let g8 = grid(8);
        let f = VectorField2::new(pseudo_random(g8, 1), pseudo_random(g8, 2)).unwrap();
        let d = divergence(&f);
        let inv = 1.0 / (2.0 * g8.h());
        for j in 0..8isize {
            for i in 0..8isize {
                let expect = (f.comp1.ghost(i + 1, j) - f.comp1.ghost(i - 1, j)) * inv
                    + (f.comp2.ghost(i, j + 1) - f.comp2.ghost(i, j - 1)) * inv;
                assert!((d.at(i as usize, j as usize) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stream_fields() {
        let g = grid(16);
        let zero = from_stream(&ScalarField::zeros(g));
        assert_eq!(zero.comp1.max_abs() + zero.comp2.max_abs(), 0.0);
        let lin = from_stream(&ScalarField::from_fn(g, |_, y| y));
        for (i, j) in interior(&g, 1) {
            assert!((lin.comp1.at(i, j) - 1.0).abs() < 1e-12);
            assert!(lin.comp2.at(i, j).abs() < 1e-12);
        }
    }

    #[test]
    fn stream_field_is_divergence_free_everywhere() {
        for seed in 0..4 {
            let g = grid(16);
            let d = divergence(&from_stream(&pseudo_random(g, seed)));
            assert!(d.max_abs() < 1e-12, "{}", d.max_abs());
        }
    }

    #[test]
    fn curl_of_stream_converges_to_minus_laplacian() {
        // Two code paths: wide-stencil curl of the stream field and the compact Laplacian.
        let mut errs = Vec::new();
        for n in [32, 64, 128] {
            let g = GridSpec::new(4.0, n).unwrap();
            let phi = ScalarField::from_fn(g, |x, y| (-x * x - y * y).exp());
            let w = curl_z(&from_stream(&phi));
            let lap = laplacian5(&phi);
            let err = interior(&g, 2).map(|(i, j)| (w.at(i, j) + lap.at(i, j)).abs()).fold(0.0, f64::max);
            errs.push(err);
        }
        for k in 1..errs.len() {
            let ratio = errs[k - 1] / errs[k];
            assert!(ratio > 3.3, "errors {errs:?} not second order");
        }
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = grid(16);
        let one = ScalarField::constant(g, 1.0).norms();
        assert!((one.l1 - 4.0).abs() < 1e-14);
        assert!((one.l2 - 2.0).abs() < 1e-14);
        assert_eq!(one.linf, 1.0);
        let zero = ScalarField::zeros(g).norms();
        assert_eq!((zero.l1, zero.l2, zero.linf), (0.0, 0.0, 0.0));
        let mut ind = ScalarField::zeros(g);
        for k in [3, 40, 41, 200, 255] {
            ind.values_mut()[k] = 1.0;
        }
        assert!((ind.norms().l1 - 5.0 * g.cell_area()).abs() < 1e-15);
    }

    #[test]
    fn laplacian_is_symmetric_for_compact_fields() {
        let g = grid(32);
        let bump = |cx: f64, cy: f64, r: f64| {
            move |x: f64, y: f64| {
                let s = 1.0 - ((x - cx).powi(2) + (y - cy).powi(2)) / (r * r);
                if s > 0.0 { s.powi(3) } else { 0.0 }
            }
        };
        let u = ScalarField::from_fn(g, bump(0.1, -0.2, 0.5));
        let v = ScalarField::from_fn(g, bump(-0.2, 0.1, 0.6));
        let a: f64 = v.values().iter().zip(laplacian5(&u).values()).map(|(p, q)| p * q).sum();
        let b: f64 = u.values().iter().zip(laplacian5(&v).values()).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn from_values_validates() {
        let g = grid(8);
        assert!(ScalarField::from_values(g, vec![0.0; 63]).is_err());
        let mut v = vec![0.0; 64];
        v[5] = f64::NAN;
        assert!(ScalarField::from_values(g, v).is_err());
    }
}
