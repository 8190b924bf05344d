//! Backward-Euler integrator for `u_t - Lap psi_m(u) = g`.
//!
//! Each step solves `u - dt Lap psi(u) = u_prev + dt g(t + dt)` by damped
//! Newton. With `D = diag(psi'(u))` and `S = D^{1/2}` the Newton system
//! `(I - dt Lap D) du = -F` is equivalent to the SPD system
//! `(I - dt S Lap S) y = -S F` with `y = S du`; this is the transformed-variable
//! Jacobian `D^{-1} - dt Lap` scaled symmetrically by `S`, which stays regular
//! where `psi'` vanishes. The correction is applied per cell in whichever of
//! `u` or `v = psi(u)` the cell is closer to linear in: `v` where the diffusion
//! term dominates (`4 dt psi'(u) / h^2 > 1`), `u` elsewhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{laplacian5_into, GridSpec, ScalarField};
use crate::forcing::ScalarForcing;
use crate::linalg::pcg;
use crate::power::PowerLaw;

/// Fraction of the half width that initial data and sources must keep clear.
pub const SUPPORT_MARGIN_FRACTION: f64 = 0.25;
const SUPPORT_TOL: f64 = 1e-10;

const CG_REL_TOL: f64 = 1e-12;
const CG_MAX_ITER: usize = 20_000;
const LINE_SEARCH_HALVINGS: usize = 30;

#[derive(Debug, Clone)]
pub struct PmeProblem {
    pub grid: GridSpec,
    pub law: PowerLaw,
    pub u0: ScalarField,
    pub forcing: ScalarForcing,
    pub horizon: f64,
}

impl PmeProblem {
    pub fn new(law: PowerLaw, u0: ScalarField, forcing: ScalarForcing, horizon: f64) -> Result<Self> {
        let grid = *u0.grid();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if forcing.grid() != grid {
            return Err(Error::Domain("forcing and initial data live on different grids".into()));
        }
        let band = SUPPORT_MARGIN_FRACTION * grid.half_width();
        check_margin("initial data", &u0, band)?;
        for f in forcing.sample_fields() {
            check_margin("forcing", f, band)?;
        }
        Ok(Self { grid, law, u0, forcing, horizon })
    }
}

pub(crate) fn check_margin(what: &str, u: &ScalarField, band: f64) -> Result<()> {
    let edge = u.max_abs_within(band);
    if edge > SUPPORT_TOL * u.max_abs().max(1.0) {
        return Err(Error::Domain(format!(
            "{what} reaches within {band} of the boundary (|value| = {edge:e} there)"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmeConfig {
    pub dt_init: f64,
    pub dt_min: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub max_halvings: usize,
    pub snapshot_times: Vec<f64>,
}

impl PmeConfig {
    pub fn new(dt_init: f64, snapshot_times: Vec<f64>) -> Self {
        Self {
            dt_init,
            dt_min: dt_init * 1e-9,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            max_halvings: 20,
            snapshot_times,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_init && self.dt_init.is_finite()) {
            return Err(Error::Domain(format!(
                "need 0 < dt_min <= dt_init, got dt_min = {}, dt_init = {}",
                self.dt_min, self.dt_init
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Domain("newton_tol must be positive".into()));
        }
        if self.max_newton_iters == 0 {
            return Err(Error::Domain("max_newton_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub dt: f64,
    /// Signed integral `h^2 sum u`.
    pub mass: f64,
    pub sup_norm: f64,
    pub pressure_max: f64,
    pub newton_iters: usize,
    /// Max `|u|` on boundary-adjacent cells (truncation quality).
    pub boundary_max: f64,
    /// Source mass injected so far by the scheme, `sum dt h^2 sum g`.
    pub source_mass: f64,
    /// `t * |(u_new - u_prev) / dt|_1`.
    pub ut_l1_times_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmeSolution {
    pub snapshots: Vec<Snapshot>,
    /// One entry per accepted step, preceded by the `t = 0` state.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl PmeSolution {
    pub fn final_state(&self) -> &ScalarField {
        &self.snapshots.last().expect("solution has snapshots").u
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&ScalarField> {
        self.snapshots.iter().find(|s| s.t == t).map(|s| &s.u)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: ScalarField,
    pub newton_iters: usize,
    pub residual: f64,
}

struct Residual<'a> {
    grid: &'a GridSpec,
    law: &'a PowerLaw,
    dt: f64,
    rhs: &'a [f64],
    lap: Vec<f64>,
    v: Vec<f64>,
}

impl Residual<'_> {
    /// `F(u) = u - dt Lap psi(u) - rhs`, returns `(|F|_2^2, |F|_inf)`.
    fn eval(&mut self, u: &[f64], out: &mut [f64]) -> (f64, f64) {
        for (vk, &uk) in self.v.iter_mut().zip(u) {
            *vk = self.law.psi(uk);
        }
        laplacian5_into(self.grid, &self.v, &mut self.lap);
        let (mut s2, mut inf) = (0.0, 0.0f64);
        for k in 0..u.len() {
            let f = u[k] - self.dt * self.lap[k] - self.rhs[k];
            out[k] = f;
            s2 += f * f;
            inf = inf.max(f.abs());
        }
        (s2, inf)
    }
}

/// One backward-Euler step from `u_prev` at time `t` to `t + dt`.
pub fn pme_step(
    u_prev: &ScalarField,
    t: f64,
    dt: f64,
    problem: &PmeProblem,
    config: &PmeConfig,
) -> Result<StepOutcome> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let grid = problem.grid;
    let law = problem.law;
    let n = grid.len();
    let g = problem.forcing.at(t + dt);
    let rhs: Vec<f64> = u_prev.values().iter().zip(g.values()).map(|(u, g)| u + dt * g).collect();

    let mut res = Residual { grid: &grid, law: &law, dt, rhs: &rhs, lap: vec![0.0; n], v: vec![0.0; n] };
    let mut u = u_prev.values().to_vec();
    let mut f = vec![0.0; n];
    let (mut norm2, mut inf) = res.eval(&u, &mut f);

    let diag_coef = 4.0 * dt / grid.cell_area();
    let mut s = vec![0.0; n];
    let mut sy = vec![0.0; n];
    let mut du = vec![0.0; n];
    let mut work = vec![0.0; n];
    let mut rhs_lin = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    let mut use_v = vec![false; n];
    let mut sx_buf = vec![0.0; n];
    let mut tmp_buf = vec![0.0; n];

    let mut iters = 0;
    while inf > config.newton_tol {
        if iters >= config.max_newton_iters {
            return Err(Error::NewtonDiverged { t, dt, residual: inf });
        }
        iters += 1;
        for k in 0..n {
            let d = law.psi_prime(u[k]);
            s[k] = d.sqrt();
            diag[k] = 1.0 + diag_coef * d;
            rhs_lin[k] = -s[k] * f[k];
            use_v[k] = diag_coef * d > 1.0;
        }
        let (sx, tmp) = (&mut sx_buf, &mut tmp_buf);
        let apply = |x: &[f64], out: &mut [f64]| {
            for k in 0..x.len() {
                sx[k] = x[k] * s[k];
            }
            laplacian5_into(&grid, sx, tmp);
            for k in 0..x.len() {
                out[k] = x[k] - dt * s[k] * tmp[k];
            }
        };
        y.iter_mut().for_each(|v| *v = 0.0);
        pcg(apply, &diag, &rhs_lin, &mut y, CG_REL_TOL, CG_MAX_ITER);
        for k in 0..n {
            sy[k] = s[k] * y[k];
        }
        laplacian5_into(&grid, &sy, &mut work);
        for k in 0..n {
            du[k] = -f[k] + dt * work[k];
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=LINE_SEARCH_HALVINGS {
            for k in 0..n {
                trial[k] = if use_v[k] {
                    law.psi_inv(law.psi(u[k]) + alpha * sy[k])
                } else {
                    u[k] + alpha * du[k]
                };
            }
            let (n2, ninf) = res.eval(&trial, &mut f_trial);
            if n2.is_finite() && (n2 <= (1.0 - 1e-4 * alpha) * norm2 || ninf <= config.newton_tol) {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut f, &mut f_trial);
                norm2 = n2;
                inf = ninf;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged { t, dt, residual: inf });
        }
    }
    Ok(StepOutcome { u: ScalarField::from_values(grid, u)?, newton_iters: iters, residual: inf })
}

/// Pressure variable `m / (m - 1) |u|^{m - 1}`.
pub fn pressure_field(u: &ScalarField, law: &PowerLaw) -> ScalarField {
    let m = law.m();
    let c = m / (m - 1.0);
    u.map(|v| if v == 0.0 { 0.0 } else { c * v.abs().powf(m - 1.0) })
}

fn diagnostics(
    u: &ScalarField,
    law: &PowerLaw,
    t: f64,
    dt: f64,
    newton_iters: usize,
    source_mass: f64,
    ut_l1_times_t: f64,
) -> StepDiagnostics {
    StepDiagnostics {
        t,
        dt,
        mass: u.integral(),
        sup_norm: u.max_abs(),
        pressure_max: pressure_field(u, law).max(),
        newton_iters,
        boundary_max: u.boundary_max_abs(),
        source_mass,
        ut_l1_times_t,
    }
}

/// Snapshot targets: the requested times inside `(0, T]` plus `T`, sorted.
fn snapshot_targets(times: &[f64], horizon: f64) -> Vec<f64> {
    let mut out: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0 && t < horizon).collect();
    out.push(horizon);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Advances the problem from `0` to `T` with adaptive step control.
pub fn pme_solve(problem: &PmeProblem, config: &PmeConfig) -> Result<PmeSolution> {
    config.validate()?;
    let law = problem.law;
    let mut u = problem.u0.clone();
    let mut t = 0.0;
    let mut dt = config.dt_init;
    let mut successes = 0;
    let mut halvings = 0;
    let mut source_mass = 0.0;

    let mut snapshots = vec![Snapshot { t: 0.0, u: u.clone() }];
    let mut diags = vec![diagnostics(&u, &law, 0.0, 0.0, 0, 0.0, 0.0)];

    for target in snapshot_targets(&config.snapshot_times, problem.horizon) {
        while t < target {
            let remaining = target - t;
            let landing = dt >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { dt };
            match pme_step(&u, t, step, problem, config) {
                Ok(out) => {
                    let t_new = if landing { target } else { t + step };
                    let g = problem.forcing.at(t_new);
                    source_mass += step * g.integral();
                    let ut = crate::field::l1_distance(&out.u, &u) / step * t_new;
                    u = out.u;
                    t = t_new;
                    diags.push(diagnostics(&u, &law, t, step, out.newton_iters, source_mass, ut));
                    halvings = 0;
                    successes += 1;
                    if successes >= 3 {
                        dt = (dt * 1.2).min(config.dt_init);
                        successes = 0;
                    }
                }
                Err(Error::NewtonDiverged { .. }) => {
                    successes = 0;
                    halvings += 1;
                    dt = step * 0.5;
                    if halvings > config.max_halvings || dt < config.dt_min {
                        return Err(Error::StepTooSmall { t, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        snapshots.push(Snapshot { t: target, u: u.clone() });
    }
    Ok(PmeSolution { snapshots, diagnostics: diags })
}

/// Relative mass defect `|mass(t) - mass(0) - injected(t)|` per accepted step.
///
/// The injected mass is the scheme's own quadrature of the source. The
/// denominator is `|mass(0)| + |injected(t)| + 1e-30` so that runs starting
/// from zero data remain meaningful.
pub fn mass_balance_residual(solution: &PmeSolution, _problem: &PmeProblem) -> Vec<(f64, f64)> {
    let m0 = solution.diagnostics[0].mass;
    solution
        .diagnostics
        .iter()
        .map(|d| {
            let defect = (d.mass - m0 - d.source_mass).abs();
            (d.t, defect / (m0.abs() + d.source_mass.abs() + 1e-30))
        })
        .collect()
}
