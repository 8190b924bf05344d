//! Explicit solver for the plane-wave p-curl system
//!
//! ```text
//! h1_t + d_y psi(w) = f1,   h2_t - d_x psi(w) = f2,   w = d_x h2 - d_y h1
//! ```
//!
//! with `psi(s) = |s|^{p-2} s`, together with current-density, resistivity,
//! energy and variational-inequality diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{curl_z, divergence, dot, dx_into, dy_into, GridSpec, ScalarField, VectorField2};
use crate::forcing::VectorForcing;
use crate::pme::{check_margin, SUPPORT_MARGIN_FRACTION};
use crate::power::PowerLaw;

/// `|w|` beyond which explicit stepping is declared unstable.
pub const BLOW_UP_CURL: f64 = 10.0;
const DIVERGENCE_TOL: f64 = 1e-10;
const ADMISSIBLE_CURL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct CurlProblem {
    pub grid: GridSpec,
    pub p: f64,
    pub h0: VectorField2,
    pub forcing: VectorForcing,
    pub horizon: f64,
}

impl CurlProblem {
    pub fn new(p: f64, h0: VectorField2, forcing: VectorForcing, horizon: f64) -> Result<Self> {
        let grid = *h0.grid();
        if !(p.is_finite() && p > 2.0) {
            return Err(Error::Domain(format!("curl exponent p must exceed 2, got {p}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if forcing.grid() != grid {
            return Err(Error::Domain("forcing and initial field live on different grids".into()));
        }
        let div0 = divergence(&h0).max_abs();
        if div0 > DIVERGENCE_TOL {
            return Err(Error::Domain(format!("initial field has divergence {div0:e}")));
        }
        for f in forcing.sample_fields() {
            let d = divergence(f).max_abs();
            if d > DIVERGENCE_TOL {
                return Err(Error::Domain(format!("forcing sample has divergence {d:e}")));
            }
        }
        let band = SUPPORT_MARGIN_FRACTION * grid.half_width();
        check_margin("initial field", &h0.comp1, band)?;
        check_margin("initial field", &h0.comp2, band)?;
        Ok(Self { grid, p, h0, forcing, horizon })
    }

    /// The scalar law `psi_{p-1}` acting on the curl.
    pub fn law(&self) -> PowerLaw {
        PowerLaw::from_curl_exponent(self.p).expect("validated exponent")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlConfig {
    /// Upper bound on the step; the stability bound usually binds first.
    pub dt_max: f64,
    pub dt_min: f64,
    pub snapshot_times: Vec<f64>,
}

impl CurlConfig {
    pub fn new(dt_max: f64, snapshot_times: Vec<f64>) -> Self {
        Self { dt_max, dt_min: 1e-12, snapshot_times }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max && self.dt_max.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < dt_min <= dt_max, got dt_min = {}, dt_max = {}",
                self.dt_min, self.dt_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlSnapshot {
    pub t: f64,
    pub h: VectorField2,
    pub omega: ScalarField,
    pub j: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlDiagnostics {
    pub t: f64,
    pub dt: f64,
    /// `(h^2 sum |H|^2)^{1/2}`.
    pub l2_h: f64,
    /// `h^2 sum |w|^p` at the start of the step.
    pub dissipation: f64,
    /// `h^2 sum |F|^2` at the start of the step.
    pub forcing_energy: f64,
    /// `max |div H(t) - div H(0)|`.
    pub divergence_drift: f64,
    pub max_curl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlSolution {
    pub snapshots: Vec<CurlSnapshot>,
    /// One entry per accepted step, preceded by the `t = 0` state.
    pub diagnostics: Vec<CurlDiagnostics>,
}

impl CurlSolution {
    pub fn final_snapshot(&self) -> &CurlSnapshot {
        self.snapshots.last().expect("solution has snapshots")
    }

    pub fn max_divergence_drift(&self) -> f64 {
        self.diagnostics.iter().map(|d| d.divergence_drift).fold(0.0, f64::max)
    }
}

/// `h^2 / (8 max psi'(w) + 1e-30)`.
pub fn dt_stability(omega: &[f64], grid: &GridSpec, law: &PowerLaw) -> f64 {
    let peak = omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    grid.cell_area() / (8.0 * law.psi_prime(peak) + 1e-30)
}

/// Reusable buffers for explicit stepping.
struct Workspace {
    omega: Vec<f64>,
    flux: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { omega: vec![0.0; n], flux: vec![0.0; n], a: vec![0.0; n], b: vec![0.0; n] }
    }

    fn curl(&mut self, grid: &GridSpec, h: &VectorField2) {
        dx_into(grid, h.comp2.values(), &mut self.a);
        dy_into(grid, h.comp1.values(), &mut self.b);
        for k in 0..self.omega.len() {
            self.omega[k] = self.a[k] - self.b[k];
        }
    }

    /// Advances `h` in place; `omega` must hold the curl of `h`.
    fn advance(&mut self, grid: &GridSpec, law: &PowerLaw, h: &mut VectorField2, f: &VectorField2, dt: f64) {
        for (fl, &w) in self.flux.iter_mut().zip(&self.omega) {
            *fl = law.psi(w);
        }
        dy_into(grid, &self.flux, &mut self.a);
        dx_into(grid, &self.flux, &mut self.b);
        let (f1, f2) = (f.comp1.values(), f.comp2.values());
        for (k, v) in h.comp1.values_mut().iter_mut().enumerate() {
            *v += dt * (f1[k] - self.a[k]);
        }
        for (k, v) in h.comp2.values_mut().iter_mut().enumerate() {
            *v += dt * (f2[k] + self.b[k]);
        }
    }
}

/// One forward-Euler step of length `dt` from time `t`.
pub fn curl_step(h: &VectorField2, t: f64, dt: f64, problem: &CurlProblem) -> Result<VectorField2> {
    let grid = problem.grid;
    let law = problem.law();
    let mut ws = Workspace::new(grid.len());
    ws.curl(&grid, h);
    let bound = dt_stability(&ws.omega, &grid, &law);
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("dt = {dt:e} exceeds the stability bound {bound:e}")));
    }
    let mut out = h.clone();
    ws.advance(&grid, &law, &mut out, &problem.forcing.at(t), dt);
    check_blow_up(&mut ws, &grid, &out, t + dt)?;
    Ok(out)
}

fn check_blow_up(ws: &mut Workspace, grid: &GridSpec, h: &VectorField2, t: f64) -> Result<f64> {
    ws.curl(grid, h);
    let peak = ws.omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    if !(peak <= BLOW_UP_CURL) {
        return Err(Error::BlowUp { t, max_curl: peak });
    }
    Ok(peak)
}

pub fn current_density(h: &VectorField2) -> ScalarField {
    curl_z(h).map(f64::abs)
}

/// Effective resistivity `|w|^{p-2}`.
pub fn resistivity_coeff(omega: &ScalarField, p: f64) -> Result<ScalarField> {
    if !(p > 2.0) {
        return Err(Error::Domain(format!("curl exponent p must exceed 2, got {p}")));
    }
    Ok(omega.map(|w| if w == 0.0 { 0.0 } else { w.abs().powf(p - 2.0) }))
}

fn snapshot(t: f64, h: &VectorField2) -> CurlSnapshot {
    let omega = curl_z(h);
    let j = omega.map(f64::abs);
    CurlSnapshot { t, h: h.clone(), omega, j }
}

fn diagnostics(t: f64, dt: f64, h: &VectorField2, omega: &[f64], p: f64, f: &VectorField2, div0: &ScalarField) -> CurlDiagnostics {
    let area = h.grid().cell_area();
    let dissipation = area * omega.iter().map(|w| w.abs().powf(p)).sum::<f64>();
    let max_curl = omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let drift = divergence(h).zip_map(div0, |a, b| a - b).max_abs();
    CurlDiagnostics {
        t,
        dt,
        l2_h: h.l2(),
        dissipation,
        forcing_energy: f.energy(),
        divergence_drift: drift,
        max_curl,
    }
}

/// Adaptive explicit stepping from `0` to `T`.
pub fn curl_solve(problem: &CurlProblem, config: &CurlConfig) -> Result<CurlSolution> {
    config.validate()?;
    let grid = problem.grid;
    let law = problem.law();
    let p = problem.p;
    let mut ws = Workspace::new(grid.len());
    let mut h = problem.h0.clone();
    ws.curl(&grid, &h);
    let peak0 = ws.omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    if p > 8.0 && peak0 > 1.0 + ADMISSIBLE_CURL_SLACK {
        return Err(Error::Domain(format!(
            "explicit stepping with p = {p} needs |curl H0|_inf <= 1, got {peak0}"
        )));
    }
    let div0 = divergence(&h);
    let mut t = 0.0;
    let mut f = problem.forcing.at(0.0);
    let mut snapshots = vec![snapshot(0.0, &h)];
    let mut diags = vec![diagnostics(0.0, 0.0, &h, &ws.omega, p, &f, &div0)];

    let mut targets: Vec<f64> =
        config.snapshot_times.iter().copied().filter(|&s| s > 0.0 && s < problem.horizon).collect();
    targets.push(problem.horizon);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    for target in targets {
        while t < target {
            let bound = dt_stability(&ws.omega, &grid, &law).min(config.dt_max);
            if bound < config.dt_min {
                return Err(Error::StepTooSmall { t, dt: bound });
            }
            let remaining = target - t;
            let landing = bound >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { bound };
            // diagnostics of the state the step starts from
            let area = grid.cell_area();
            let dissipation = area * ws.omega.iter().map(|w| w.abs().powf(p)).sum::<f64>();
            let forcing_energy = f.energy();
            ws.advance(&grid, &law, &mut h, &f, step);
            t = if landing { target } else { t + step };
            let max_curl = check_blow_up(&mut ws, &grid, &h, t)?;
            f = problem.forcing.at(t);
            let drift = divergence(&h).zip_map(&div0, |a, b| a - b).max_abs();
            diags.push(CurlDiagnostics {
                t,
                dt: step,
                l2_h: h.l2(),
                dissipation,
                forcing_energy,
                divergence_drift: drift,
                max_curl,
            });
        }
        snapshots.push(snapshot(target, &h));
    }
    Ok(CurlSolution { snapshots, diagnostics: diags })
}

/// Discrete energy budget of a run, at the step where it is tightest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBudget {
    /// `h^2 sum |H(t)|^2 + 2 sum_{steps < t} dt h^2 sum |w|^p`.
    pub lhs: f64,
    /// `e^t (h^2 sum |H0|^2 + sum_{steps < t} dt h^2 sum |F|^2)`.
    pub rhs: f64,
    pub t: f64,
}

impl EnergyBudget {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack)
    }
}

/// Energy inequality with the Gronwall factor `e^t`, checked after every
/// step. It bounds `sup_t |H|^2 + int |w|^p` by `3/2 e^T (|H0|^2 + int |F|^2)`.
pub fn energy_budget(solution: &CurlSolution) -> EnergyBudget {
    let d = &solution.diagnostics;
    let e0 = d[0].l2_h * d[0].l2_h;
    let mut worst = EnergyBudget { lhs: e0, rhs: e0, t: 0.0 };
    let (mut dissipated, mut forcing) = (0.0, 0.0);
    for s in d.iter().skip(1) {
        dissipated += s.dt * s.dissipation;
        forcing += s.dt * s.forcing_energy;
        let lhs = s.l2_h * s.l2_h + 2.0 * dissipated;
        let rhs = s.t.exp() * (e0 + forcing);
        if lhs * worst.rhs > worst.lhs * rhs {
            worst = EnergyBudget { lhs, rhs, t: s.t };
        }
    }
    worst
}

/// Checks that `v` lies in the limit constraint set: `|curl v| <= 1` and
/// discretely divergence-free.
pub fn check_admissible(v: &VectorField2) -> Result<()> {
    let c = curl_z(v).max_abs();
    if c > 1.0 + ADMISSIBLE_CURL_SLACK {
        return Err(Error::Domain(format!("test field has |curl|_inf = {c} > 1")));
    }
    let d = divergence(v).max_abs();
    if d > DIVERGENCE_TOL {
        return Err(Error::Domain(format!("test field has divergence {d:e}")));
    }
    Ok(())
}

/// `r(t_k) = h^2 sum (F - H_t) . (V - H)` at every snapshot after the first,
/// with `H_t` the backward difference of consecutive snapshots.
pub fn vi_residual(solution: &CurlSolution, v: &VectorField2, forcing: &VectorForcing) -> Result<Vec<(f64, f64)>> {
    check_admissible(v)?;
    let s = &solution.snapshots;
    Ok(s.windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0], &w[1]);
            let ht = cur.h.axpy(-1.0, &prev.h).scale(1.0 / (cur.t - prev.t));
            let lhs = forcing.at(cur.t).axpy(-1.0, &ht);
            let rhs = v.axpy(-1.0, &cur.h);
            (cur.t, dot(&lhs, &rhs))
        })
        .collect())
}
