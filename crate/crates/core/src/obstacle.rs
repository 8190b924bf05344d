//! Projected SOR for the discrete obstacle problem
//!
//! ```text
//! w >= 0,   -Lap w >= q,   w (-Lap w - q) = 0
//! ```
//!
//! and the mesa / collapse profiles assembled from its noncoincidence set
//! `{w > 0}`. A one-dimensional radial solver provides independent reference
//! profiles for radially symmetric data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{laplacian5_into, GridSpec, ScalarField};
use crate::linalg::pcg;

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleData {
    pub q: ScalarField,
}

impl ObstacleData {
    pub fn new(q: ScalarField) -> Self {
        Self { q }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsorOptions {
    pub relaxation: f64,
    /// Stop once the largest cell update of a sweep falls below this.
    pub tol: f64,
    /// Defaults to `200 n` when unset.
    pub max_sweeps: Option<usize>,
}

impl Default for PsorOptions {
    fn default() -> Self {
        Self { relaxation: 1.5, tol: 1e-12, max_sweeps: None }
    }
}

impl PsorOptions {
    /// Near-optimal over-relaxation for the five-point stencil on `grid`.
    pub fn tuned(grid: &GridSpec) -> Self {
        let s = (std::f64::consts::PI / grid.n() as f64).sin();
        Self { relaxation: 2.0 / (1.0 + s), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViResiduals {
    /// `max |w r|` with the stencil-scaled residual `r = h^2 (-Lap w - q)`.
    pub complementarity: f64,
    /// `max(0, -min r)`, stencil-scaled.
    pub feasibility: f64,
    /// `max |-Lap w - q|` over the noncoincidence set, unscaled.
    pub free_equation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViSolution {
    pub w: ScalarField,
    pub noncoincidence_mask: Vec<bool>,
    pub mask_tol: f64,
    pub residuals: ViResiduals,
    pub iterations: usize,
}

impl ViSolution {
    pub fn noncoincidence_cells(&self) -> usize {
        self.noncoincidence_mask.iter().filter(|&&b| b).count()
    }
}

/// Threshold separating `w > 0` from `w = 0` on the grid.
pub fn mask_tolerance(w: &ScalarField) -> f64 {
    1e-9 * w.max().max(1.0)
}

pub fn vi_residuals(w: &ScalarField, q: &ScalarField, mask: &[bool]) -> ViResiduals {
    let grid = *w.grid();
    let h2 = grid.cell_area();
    let mut lap = vec![0.0; grid.len()];
    laplacian5_into(&grid, w.values(), &mut lap);
    let mut out = ViResiduals { complementarity: 0.0, feasibility: 0.0, free_equation: 0.0 };
    for k in 0..grid.len() {
        let r_unscaled = -lap[k] - q.values()[k];
        let r = h2 * r_unscaled;
        out.complementarity = out.complementarity.max((w.values()[k] * r).abs());
        out.feasibility = out.feasibility.max(-r);
        if mask[k] {
            out.free_equation = out.free_equation.max(r_unscaled.abs());
        }
    }
    out
}

/// Projected Gauss-Seidel with over-relaxation, lexicographic sweeps.
pub fn psor_solve(data: &ObstacleData, opts: &PsorOptions) -> Result<ViSolution> {
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::Domain(format!("relaxation must lie in (0, 2), got {}", opts.relaxation)));
    }
    let q = &data.q;
    let grid = *q.grid();
    let n = grid.n();
    let h2 = grid.cell_area();
    let omega = opts.relaxation;
    let max_sweeps = opts.max_sweeps.unwrap_or(200 * n);
    let src: Vec<f64> = q.values().iter().map(|v| h2 * v).collect();
    let mut w = vec![0.0; grid.len()];

    let mut sweeps = 0;
    loop {
        let mut max_update: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                let mut nb = src[k];
                if i > 0 {
                    nb += w[k - 1];
                }
                if i + 1 < n {
                    nb += w[k + 1];
                }
                if j > 0 {
                    nb += w[k - n];
                }
                if j + 1 < n {
                    nb += w[k + n];
                }
                let old = w[k];
                let new = (old + omega * (0.25 * nb - old)).max(0.0);
                max_update = max_update.max((new - old).abs());
                w[k] = new;
            }
        }
        sweeps += 1;
        if max_update < opts.tol {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NotConverged { sweeps, update: max_update });
        }
    }
    let w = ScalarField::from_values(grid, w)?;
    let mask_tol = mask_tolerance(&w);
    let mask: Vec<bool> = w.values().iter().map(|&v| v > mask_tol).collect();
    let residuals = vi_residuals(&w, q, &mask);
    Ok(ViSolution { w, noncoincidence_mask: mask, mask_tol, residuals, iterations: sweeps })
}

/// Solves `-Lap w = q` with zero Dirichlet ghosts by conjugate gradients.
pub fn unconstrained_poisson(q: &ScalarField) -> ScalarField {
    let grid = *q.grid();
    let n = grid.len();
    let diag = vec![4.0 / grid.cell_area(); n];
    let mut x = vec![0.0; n];
    let apply = |v: &[f64], out: &mut [f64]| {
        laplacian5_into(&grid, v, out);
        out.iter_mut().for_each(|o| *o = -*o);
    };
    pcg(apply, &diag, q.values(), &mut x, 1e-14, 50 * grid.n() + 1000);
    ScalarField::from_values(grid, x).expect("finite Poisson solution")
}

/// Piecewise-linear radial profile on cell centres `(i + 1/2) dr`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    pub sweeps: usize,
}

impl RadialProfile {
    pub fn eval(&self, r: f64) -> f64 {
        let dr = self.r[1] - self.r[0];
        let last = self.r.len() - 1;
        if r <= self.r[0] {
            return self.w[0];
        }
        if r >= self.r[last] {
            // linear decay to zero at the outer wall
            let wall = self.r[last] + 0.5 * dr;
            return if r >= wall { 0.0 } else { self.w[last] * (wall - r) / (0.5 * dr) };
        }
        let x = (r - self.r[0]) / dr;
        let k = (x.floor() as usize).min(last - 1);
        let th = x - k as f64;
        (1.0 - th) * self.w[k] + th * self.w[k + 1]
    }

    /// Radius of the outermost cell with `w > tol`, or 0 when there is none.
    pub fn free_boundary(&self, tol: f64) -> f64 {
        self.r.iter().zip(&self.w).filter(|(_, &w)| w > tol).map(|(r, _)| *r).fold(0.0, f64::max)
    }
}

/// Radial obstacle problem `-(1/r)(r w')' >= q(r)`, `w >= 0`, complementarity,
/// `w'(0) = 0`, `w(r_max) = 0`, by projected SOR on a finite-volume mesh.
pub fn radial_obstacle_oracle(q_profile: impl Fn(f64) -> f64, r_max: f64, n1d: usize) -> Result<RadialProfile> {
    if n1d < 1000 {
        return Err(Error::Domain(format!("radial oracle needs at least 1000 cells, got {n1d}")));
    }
    if !(r_max > 0.0) {
        return Err(Error::Domain("radial oracle needs a positive outer radius".into()));
    }
    let dr = r_max / n1d as f64;
    let r: Vec<f64> = (0..n1d).map(|i| (i as f64 + 0.5) * dr).collect();
    let src: Vec<f64> = r.iter().map(|&ri| q_profile(ri) * ri * dr * dr).collect();
    let face = |i: usize| i as f64 * dr; // face between cells i-1 and i
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / n1d as f64).sin());
    let max_sweeps = 400 * n1d;
    let mut w = vec![0.0; n1d];
    let mut sweeps = 0;
    loop {
        let mut max_update: f64 = 0.0;
        for i in 0..n1d {
            let (rm, rp) = (face(i), face(i + 1));
            let (num, den) = if i + 1 < n1d {
                let left = if i > 0 { rm * w[i - 1] } else { 0.0 };
                (left + rp * w[i + 1] + src[i], rm + rp)
            } else {
                (rm * w[i - 1] + src[i], rm + 2.0 * rp)
            };
            let old = w[i];
            let new = (old + omega * (num / den - old)).max(0.0);
            max_update = max_update.max((new - old).abs());
            w[i] = new;
        }
        sweeps += 1;
        if max_update < 1e-14 {
            break;
        }
        if sweeps >= max_sweeps {
            return Err(Error::NotConverged { sweeps, update: max_update });
        }
    }
    Ok(RadialProfile { r, w, sweeps })
}

/// Limit profile together with the obstacle solve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MesaProfile {
    pub u_limit: ScalarField,
    pub mask: Vec<bool>,
    pub vi: ViSolution,
}

/// `1` on the noncoincidence set and `base + Lap w` elsewhere. Off the set
/// `Lap w` vanishes except on the ring of cells bordering it, where it carries
/// the discrete flux out of the plateau; this keeps `sum u = sum base` exactly.
fn assemble(base: &ScalarField, vi: ViSolution) -> MesaProfile {
    let grid = *base.grid();
    let mut lap = vec![0.0; grid.len()];
    laplacian5_into(&grid, vi.w.values(), &mut lap);
    let mut u = base.clone();
    for ((v, &on), &l) in u.values_mut().iter_mut().zip(&vi.noncoincidence_mask).zip(&lap) {
        *v = if on { 1.0 } else { (*v + l).min(1.0) };
    }
    MesaProfile { u_limit: u, mask: vi.noncoincidence_mask.clone(), vi }
}

fn check_nonnegative(what: &str, u: &ScalarField) -> Result<()> {
    if u.min() < -1e-12 {
        return Err(Error::Domain(format!("{what} must be nonnegative (min {})", u.min())));
    }
    Ok(())
}

/// Large-exponent limit at time `t` for data `f` and accumulated source
/// `accumulated = int_0^t g`: `1` where `w > 0`, `f + accumulated` elsewhere
/// (up to the one-cell flux ring, see [`assemble`]).
pub fn mesa_profile(f: &ScalarField, accumulated: &ScalarField, _t: f64, opts: &PsorOptions) -> Result<MesaProfile> {
    if f.max() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("mesa profile needs |f|_inf <= 1, got {}", f.max())));
    }
    check_nonnegative("f", f)?;
    check_nonnegative("accumulated source", accumulated)?;
    let base = f.axpy(1.0, accumulated);
    let vi = psor_solve(&ObstacleData::new(base.map(|v| v - 1.0)), opts)?;
    Ok(assemble(&base, vi))
}

/// Instantaneous collapse of data `f` (possibly exceeding 1) onto its mesa.
pub fn collapse_profile(f: &ScalarField, opts: &PsorOptions) -> Result<MesaProfile> {
    check_nonnegative("f", f)?;
    let vi = psor_solve(&ObstacleData::new(f.map(|v| v - 1.0)), opts)?;
    Ok(assemble(f, vi))
}
