//! Experiment driver. Each experiment runs one or more solves described by an
//! [`ExperimentSpec`] and condenses them into a [`Report`]: a table of scalar
//! metrics plus pass/fail verdicts computed from that table alone.
//!
//! Schedule entries are independent and run in parallel; results are
//! assembled in schedule order so reports do not depend on thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barenblatt::Barenblatt;
use crate::curl::{curl_solve, energy_budget, vi_residual, CurlConfig, CurlProblem, CurlSolution};
use crate::data::{normalize_stream, random_admissible_fields, Radial, Stream};
use crate::error::{Error, Result};
use crate::field::{curl_z, from_stream, l1_distance, l2_distance, laplacian5, GridSpec, ScalarField, VectorField2};
use crate::forcing::Forcing;
use crate::obstacle::{collapse_profile, mesa_profile, psor_solve, radial_obstacle_oracle, ObstacleData, PsorOptions};
use crate::pme::{mass_balance_residual, pme_solve, PmeConfig, PmeProblem, PmeSolution};
use crate::power::PowerLaw;

/// Largest exponent accepted in a schedule; beyond it `psi` near `|u| = 1`
/// loses too much accuracy in double precision.
pub const MAX_SCHEDULE_EXPONENT: f64 = 96.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SolvePme,
    SolveCurl,
    SolveObstacle,
    MesaProfile,
    SweepP,
    SweepM,
    Collapse,
    SmallData,
    Equivalence,
    Contraction,
    BarenblattConvergence,
}

impl Experiment {
    pub const ALL: [Experiment; 11] = [
        Experiment::SolvePme,
        Experiment::SolveCurl,
        Experiment::SolveObstacle,
        Experiment::MesaProfile,
        Experiment::SweepP,
        Experiment::SweepM,
        Experiment::Collapse,
        Experiment::SmallData,
        Experiment::Equivalence,
        Experiment::Contraction,
        Experiment::BarenblattConvergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::SolvePme => "solve-pme",
            Experiment::SolveCurl => "solve-curl",
            Experiment::SolveObstacle => "solve-obstacle",
            Experiment::MesaProfile => "mesa-profile",
            Experiment::SweepP => "sweep-p",
            Experiment::SweepM => "sweep-m",
            Experiment::Collapse => "collapse",
            Experiment::SmallData => "small-data",
            Experiment::Equivalence => "equivalence",
            Experiment::Contraction => "contraction",
            Experiment::BarenblattConvergence => "barenblatt-convergence",
        }
    }

    /// Whether the schedule lists curl exponents `p` rather than `m`.
    pub fn uses_curl_exponent(self) -> bool {
        matches!(self, Experiment::SolveCurl | Experiment::SweepP | Experiment::Equivalence)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Domain(format!("unknown experiment '{s}'")))
    }
}

/// A radial profile placed at a centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedRadial {
    pub profile: Radial,
    pub center: [f64; 2],
}

impl PlacedRadial {
    pub fn centered(profile: Radial) -> Self {
        Self { profile, center: [0.0, 0.0] }
    }

    pub fn field(&self, grid: GridSpec) -> ScalarField {
        self.profile.field_at(grid, self.center[0], self.center[1])
    }
}

/// A stream potential, optionally rescaled so its curl peaks at `curl_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamData {
    pub stream: Stream,
    pub curl_max: Option<f64>,
}

impl StreamData {
    pub fn zero() -> Self {
        Self { stream: Stream::Zero, curl_max: None }
    }

    /// Factor applied to the raw potential on `grid`.
    pub fn scale(&self, grid: GridSpec) -> f64 {
        let raw = self.stream.potential(grid);
        match self.curl_max {
            Some(target) => {
                let peak = curl_z(&from_stream(&raw)).max_abs();
                if peak == 0.0 { 1.0 } else { target / peak }
            }
            None => 1.0,
        }
    }

    pub fn potential(&self, grid: GridSpec) -> ScalarField {
        let raw = self.stream.potential(grid);
        match self.curl_max {
            Some(target) => normalize_stream(&raw, target),
            None => raw,
        }
    }

    pub fn field(&self, grid: GridSpec) -> VectorField2 {
        from_stream(&self.potential(grid))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub half_width: f64,
    pub n: usize,
    /// Grid sizes for refinement studies.
    pub refinements: Vec<usize>,
    /// Exponents `m` or `p`, strictly increasing.
    pub schedule: Vec<f64>,
    pub horizon: f64,
    /// Time step override; each experiment has its own default rule.
    pub dt: Option<f64>,
    pub newton_tol: f64,
    pub snapshot_times: Vec<f64>,
    /// `None` selects the near-optimal relaxation for the grid.
    pub psor_relaxation: Option<f64>,
    pub psor_tol: f64,
    pub f: PlacedRadial,
    /// Second initial datum for contraction runs.
    pub f2: PlacedRadial,
    /// Steady source.
    pub g: PlacedRadial,
    pub h0: StreamData,
    pub forcing: StreamData,
    pub vi_fields: usize,
    pub vi_seed: u64,
    pub barenblatt_t0: f64,
    pub barenblatt_mass: f64,
    pub check_monotonicity: bool,
    pub output_dir: Option<String>,
}

impl ExperimentSpec {
    /// Defaults for `kind`: the reference configuration of each experiment.
    pub fn preset(kind: Experiment) -> Self {
        let zero = PlacedRadial::centered(Radial::Zero);
        let base = Self {
            name: kind.name().to_string(),
            half_width: 2.0,
            n: 64,
            refinements: vec![64, 128],
            schedule: vec![8.0, 16.0, 32.0, 64.0],
            horizon: 1.0,
            dt: None,
            newton_tol: 1e-10,
            snapshot_times: vec![],
            psor_relaxation: None,
            psor_tol: 1e-12,
            f: zero,
            f2: zero,
            g: zero,
            h0: StreamData::zero(),
            forcing: StreamData::zero(),
            vi_fields: 20,
            vi_seed: 2024,
            barenblatt_t0: 1.0,
            barenblatt_mass: 1.0,
            check_monotonicity: false,
            output_dir: None,
        };
        let bump = |height, radius| PlacedRadial::centered(Radial::Bump { height, radius });
        match kind {
            Experiment::SolvePme => Self {
                schedule: vec![8.0],
                f: bump(0.3, 1.0),
                g: bump(0.03, 1.0),
                snapshot_times: vec![0.25, 0.5, 0.75],
                dt: Some(0.02),
                check_monotonicity: true,
                ..base
            },
            Experiment::SolveCurl => Self {
                schedule: vec![4.0],
                horizon: 0.5,
                h0: StreamData { stream: Stream::Bump { amplitude: 1.0, radius: 1.2 }, curl_max: Some(1.0) },
                snapshot_times: vec![0.1, 0.2, 0.3, 0.4],
                ..base
            },
            Experiment::SolveObstacle => Self {
                half_width: 4.0,
                n: 128,
                f: PlacedRadial::centered(Radial::Disk { height: 1.5, radius: 1.0 }),
                ..base
            },
            Experiment::MesaProfile => Self { f: bump(0.9, 1.0), g: bump(0.4, 0.8), ..base },
            Experiment::SweepP => Self {
                schedule: vec![4.0, 8.0, 16.0, 32.0],
                horizon: 0.5,
                h0: StreamData { stream: Stream::Bump { amplitude: 1.0, radius: 1.2 }, curl_max: Some(1.0) },
                forcing: StreamData { stream: Stream::Bump { amplitude: 3.0, radius: 1.2 }, curl_max: None },
                snapshot_times: (1..10).map(|k| 0.05 * k as f64).collect(),
                ..base
            },
            Experiment::SweepM => Self {
                f: bump(0.9, 1.0),
                g: bump(0.4, 0.8),
                dt: Some(0.01),
                ..base
            },
            Experiment::Collapse => Self { f: bump(1.5, 0.8), g: bump(0.5, 0.8), ..base },
            Experiment::SmallData => Self {
                f: bump(0.5, 0.8),
                g: bump(0.3, 0.8),
                dt: Some(0.02),
                ..base
            },
            Experiment::Equivalence => Self {
                schedule: vec![4.0],
                horizon: 0.25,
                h0: StreamData {
                    stream: Stream::Gaussian { amplitude: 1.0, sigma: 0.25, cutoff: 1.4 },
                    curl_max: Some(1.0),
                },
                snapshot_times: vec![0.05, 0.1, 0.15, 0.2],
                ..base
            },
            Experiment::Contraction => Self {
                schedule: vec![8.0],
                f: bump(0.6, 0.9),
                f2: bump(0.9, 1.0),
                g: bump(0.2, 0.8),
                dt: Some(0.02),
                newton_tol: 1e-12,
                snapshot_times: vec![0.25, 0.5, 0.75],
                ..base
            },
            Experiment::BarenblattConvergence => Self {
                schedule: vec![3.0],
                refinements: vec![64, 128, 256],
                ..base
            },
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.half_width, self.n)
    }

    pub fn psor_options(&self, grid: &GridSpec) -> PsorOptions {
        let mut opts = PsorOptions::tuned(grid);
        if let Some(w) = self.psor_relaxation {
            opts.relaxation = w;
        }
        opts.tol = self.psor_tol;
        opts
    }

    pub fn validate(&self, kind: Experiment) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        if self.name.trim().is_empty() {
            return bad("experiment name must not be empty".into());
        }
        GridSpec::new(self.half_width, self.n)?;
        if self.refinements.is_empty() || self.refinements.windows(2).any(|w| w[1] <= w[0]) {
            return bad("refinements must be non-empty and strictly increasing".into());
        }
        for &n in &self.refinements {
            GridSpec::new(self.half_width, n)?;
        }
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("schedule must be non-empty and strictly increasing".into());
        }
        let floor = if kind.uses_curl_exponent() { 2.0 } else { 1.0 };
        for &e in &self.schedule {
            if !(e > floor && e <= MAX_SCHEDULE_EXPONENT) {
                return bad(format!("schedule entry {e} outside ({floor}, {MAX_SCHEDULE_EXPONENT}]"));
            }
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return bad(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton tolerance must be positive".into());
        }
        if self.snapshot_times.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return bad("snapshot times must be finite and nonnegative".into());
        }
        if let Some(w) = self.psor_relaxation {
            if !(w > 0.0 && w < 2.0) {
                return bad(format!("psor relaxation must lie in (0, 2), got {w}"));
            }
        }
        if !(self.psor_tol > 0.0) {
            return bad("psor tolerance must be positive".into());
        }
        if !(self.barenblatt_t0 > 0.0 && self.barenblatt_mass > 0.0) {
            return bad("Barenblatt time and mass must be positive".into());
        }
        Ok(())
    }
}

/// Reference to one entry of the metric table.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MetricRef {
    pub label: String,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub rule: String,
    pub uses: Vec<MetricRef>,
}

pub type MetricTable = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    /// `label -> metric -> value`; labels name schedule entries such as
    /// `m=8`, `p=4`, `n=64`, or `summary`.
    pub metrics: MetricTable,
    pub verdicts: BTreeMap<String, Verdict>,
    pub config: ExperimentSpec,
    pub provenance: BTreeMap<String, String>,
}

impl Report {
    pub fn new(kind: Experiment, spec: &ExperimentSpec) -> Self {
        let mut provenance = BTreeMap::new();
        provenance.insert("experiment".into(), kind.name().into());
        provenance.insert("grid".into(), format!("[-{0}, {0}]^2, n = {1}", spec.half_width, spec.n));
        provenance.insert("newton_tol".into(), format!("{:e}", spec.newton_tol));
        provenance.insert("psor_tol".into(), format!("{:e}", spec.psor_tol));
        Self { experiment: kind.name().into(), metrics: BTreeMap::new(), verdicts: BTreeMap::new(), config: spec.clone(), provenance }
    }

    /// Stores a metric. Non-finite values are clamped to `+-f64::MAX` so the
    /// table stays serializable.
    pub fn record(&mut self, label: &str, metric: &str, value: f64) {
        let v = if value.is_nan() || value == f64::INFINITY {
            f64::MAX
        } else if value == f64::NEG_INFINITY {
            f64::MIN
        } else {
            value
        };
        self.metrics.entry(label.to_string()).or_default().insert(metric.to_string(), v);
    }

    pub fn metric(&self, label: &str, metric: &str) -> Option<f64> {
        self.metrics.get(label).and_then(|m| m.get(metric)).copied()
    }

    /// Adds a verdict evaluated on the listed metrics, read back from the table.
    pub fn judge(&mut self, name: &str, rule: &str, uses: &[(&str, &str)], test: impl FnOnce(&[f64]) -> bool) {
        let refs: Vec<MetricRef> =
            uses.iter().map(|(l, m)| MetricRef { label: l.to_string(), metric: m.to_string() }).collect();
        let values: Option<Vec<f64>> = refs.iter().map(|r| self.metric(&r.label, &r.metric)).collect();
        let passed = values.is_some_and(|v| test(&v));
        self.verdicts.insert(name.to_string(), Verdict { passed, rule: rule.to_string(), uses: refs });
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, v)| !v.passed).map(|(k, _)| k.as_str()).collect()
    }

    /// Every verdict must reference metrics present in the table.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in &self.verdicts {
            for r in &v.uses {
                if self.metric(&r.label, &r.metric).is_none() {
                    return Err(Error::Domain(format!(
                        "verdict '{name}' references missing metric {}/{}",
                        r.label, r.metric
                    )));
                }
            }
        }
        Ok(())
    }

    fn merge(&mut self, prefix: &str, other: Report) {
        for (label, metrics) in other.metrics {
            for (k, v) in metrics {
                self.record(&format!("{prefix}{label}"), &k, v);
            }
        }
        for (name, mut v) in other.verdicts {
            for r in &mut v.uses {
                r.label = format!("{prefix}{}", r.label);
            }
            self.verdicts.insert(format!("{prefix}{name}"), v);
        }
    }
}

/// A field produced by an experiment, to be written out by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedField {
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

impl NamedField {
    fn new(name: impl Into<String>, t: f64, field: ScalarField) -> Self {
        Self { name: name.into(), t, field }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub fields: Vec<NamedField>,
}

/// Runs `kind` on `spec` after validating it.
pub fn run_experiment(kind: Experiment, spec: &ExperimentSpec) -> Result<Outcome> {
    spec.validate(kind)?;
    let outcome = match kind {
        Experiment::SolvePme => solve_pme(spec),
        Experiment::SolveCurl => solve_curl(spec),
        Experiment::SolveObstacle => solve_obstacle(spec),
        Experiment::MesaProfile => mesa_experiment(spec),
        Experiment::SweepP => sweep_p(spec),
        Experiment::SweepM => sweep_m_vs_mesa(spec),
        Experiment::Collapse => collapse_experiment(spec),
        Experiment::SmallData => small_data_check(spec),
        Experiment::Equivalence => equivalence_check(spec),
        Experiment::Contraction => l1_contraction_check(spec),
        Experiment::BarenblattConvergence => barenblatt_convergence(spec),
    }?;
    outcome.report.validate()?;
    Ok(outcome)
}

fn m_label(m: f64) -> String {
    format!("m={m}")
}

fn p_label(p: f64) -> String {
    format!("p={p}")
}

fn n_label(n: usize) -> String {
    format!("n={n}")
}

fn labels(prefix: fn(f64) -> String, schedule: &[f64]) -> Vec<String> {
    schedule.iter().map(|&e| prefix(e)).collect()
}

fn refs<'a>(labels: &'a [String], metric: &'a str) -> Vec<(&'a str, &'a str)> {
    labels.iter().map(|l| (l.as_str(), metric)).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn pme_law(m: f64) -> Result<PowerLaw> {
    PowerLaw::new(m)
}

fn steady(g: &ScalarField) -> Forcing<ScalarField> {
    if g.max_abs() == 0.0 { Forcing::Zero(*g.grid()) } else { Forcing::Steady(g.clone()) }
}

fn pme_run(
    m: f64,
    f: &ScalarField,
    g: &ScalarField,
    horizon: f64,
    dt: f64,
    snapshots: &[f64],
    newton_tol: f64,
) -> Result<(PmeProblem, PmeSolution)> {
    let problem = PmeProblem::new(pme_law(m)?, f.clone(), steady(g), horizon)?;
    let mut cfg = PmeConfig::new(dt, snapshots.to_vec());
    cfg.newton_tol = newton_tol;
    let sol = pme_solve(&problem, &cfg)?;
    Ok((problem, sol))
}

/// Run-level diagnostics shared by all porous-medium experiments.
fn record_pme_stats(report: &mut Report, label: &str, problem: &PmeProblem, sol: &PmeSolution) {
    let d = &sol.diagnostics;
    let fold = |f: fn(&crate::pme::StepDiagnostics) -> f64| d.iter().map(f).fold(f64::MIN, f64::max);
    report.record(label, "pressure_max", fold(|s| s.pressure_max));
    report.record(label, "sup_u_max", fold(|s| s.sup_norm));
    report.record(label, "boundary_max", fold(|s| s.boundary_max));
    report.record(label, "ut_l1_times_t_max", fold(|s| s.ut_l1_times_t));
    report.record(label, "newton_iters_max", fold(|s| s.newton_iters as f64));
    report.record(label, "steps", (d.len() - 1) as f64);
    let min_u = sol.snapshots.iter().map(|s| s.u.min()).fold(f64::MAX, f64::min);
    report.record(label, "min_u", min_u);
    let mb = mass_balance_residual(sol, problem).into_iter().map(|(_, r)| r).fold(0.0, f64::max);
    report.record(label, "mass_balance_max", mb);
}

fn default_pme_dt(spec: &ExperimentSpec) -> f64 {
    spec.dt.unwrap_or(spec.horizon / 50.0)
}

/// Small-data limit: for `|f| + T|g| < 1` the solution tends to `f + int g`.
pub fn small_data_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SmallData;
    let grid = spec.grid()?;
    let (f, g) = (spec.f.field(grid), spec.g.field(grid));
    let bound = f.max_abs() + spec.horizon * g.max_abs();
    if !(bound < 1.0) {
        return Err(Error::PreconditionFailed(format!("small-data check needs |f| + T|g| < 1, got {bound}")));
    }
    let target = f.axpy(1.0, &steady(&g).accumulated(spec.horizon));
    let dt = default_pme_dt(spec);
    let runs: Vec<Result<(PmeProblem, PmeSolution)>> =
        spec.schedule.par_iter().map(|&m| pme_run(m, &f, &g, spec.horizon, dt, &spec.snapshot_times, spec.newton_tol)).collect();

    let mut report = Report::new(kind, spec);
    let mut fields = vec![NamedField::new("limit", spec.horizon, target.clone())];
    let f_l1 = f.norms().l1;
    for (&m, run) in spec.schedule.iter().zip(runs) {
        let (problem, sol) = run?;
        let label = m_label(m);
        let d = l1_distance(sol.final_state(), &target);
        report.record(&label, "d", d);
        report.record(&label, "d_over_f_l1", if f_l1 > 0.0 { d / f_l1 } else { d });
        record_pme_stats(&mut report, &label, &problem, &sol);
        fields.push(NamedField::new(format!("u_m{m}"), spec.horizon, sol.final_state().clone()));
    }
    report.record("summary", "data_bound", bound);
    let ls = labels(m_label, &spec.schedule);
    let (first, last) = (ls[0].clone(), ls[ls.len() - 1].clone());
    report.judge("d_strictly_decreasing", "d(m) strictly decreasing along the schedule", &refs(&ls, "d"), strictly_decreasing);
    report.judge("d_ratio", "d(max m) <= d(min m) / 3", &[(&first, "d"), (&last, "d")], |v| v[1] <= v[0] / 3.0);
    judge_pme_invariants(&mut report, &ls, f.min() >= 0.0 && g.min() >= 0.0);
    Ok(Outcome { report, fields })
}

/// Pressure, comparison, positivity and conservation checks on every label.
fn judge_pme_invariants(report: &mut Report, ls: &[String], nonnegative: bool) {
    report.judge("pressure_bound", "max pressure <= 2.1 for every exponent", &refs(ls, "pressure_max"), |v| {
        v.iter().all(|&p| p <= 2.1)
    });
    let mut uses = refs(ls, "sup_u_max");
    uses.push(("summary", "data_bound"));
    report.judge("comparison_bound", "sup u <= |f| + T|g| + 1e-6", &uses, |v| {
        let (b, s) = v.split_last().unwrap();
        s.iter().all(|&x| x <= b + 1e-6)
    });
    if nonnegative {
        report.judge("nonnegative", "min u >= -1e-10", &refs(ls, "min_u"), |v| v.iter().all(|&x| x >= -1e-10));
    }
    report.judge("mass_balance", "mass-balance residual <= 1e-8", &refs(ls, "mass_balance_max"), |v| {
        v.iter().all(|&x| x <= 1e-8)
    });
}

/// Distance of the large-exponent solutions to the obstacle-based mesa limit.
pub fn sweep_m_vs_mesa(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SweepM;
    let grid = spec.grid()?;
    let (f, g) = (spec.f.field(grid), spec.g.field(grid));
    let acc = steady(&g).accumulated(spec.horizon);
    let mesa = mesa_profile(&f, &acc, spec.horizon, &spec.psor_options(&grid))?;
    let dt = default_pme_dt(spec);
    let runs: Vec<Result<(PmeProblem, PmeSolution)>> =
        spec.schedule.par_iter().map(|&m| pme_run(m, &f, &g, spec.horizon, dt, &spec.snapshot_times, spec.newton_tol)).collect();

    let mut report = Report::new(kind, spec);
    let mask = ScalarField::from_values(grid, mesa.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())?;
    let mut fields = vec![
        NamedField::new("mesa", spec.horizon, mesa.u_limit.clone()),
        NamedField::new("mask", spec.horizon, mask),
        NamedField::new("w", spec.horizon, mesa.vi.w.clone()),
    ];
    for (&m, run) in spec.schedule.iter().zip(runs) {
        let (problem, sol) = run?;
        let label = m_label(m);
        report.record(&label, "e", l1_distance(sol.final_state(), &mesa.u_limit));
        record_pme_stats(&mut report, &label, &problem, &sol);
        fields.push(NamedField::new(format!("u_m{m}"), spec.horizon, sol.final_state().clone()));
    }
    record_mesa(&mut report, &mesa);
    report.record("summary", "data_bound", f.max_abs() + spec.horizon * g.max_abs());
    let ls = labels(m_label, &spec.schedule);
    let (first, last) = (ls[0].clone(), ls[ls.len() - 1].clone());
    report.judge("e_strictly_decreasing", "e(m) strictly decreasing along the schedule", &refs(&ls, "e"), strictly_decreasing);
    report.judge("e_ratio", "e(max m) <= e(min m) / 3", &[(&first, "e"), (&last, "e")], |v| v[1] <= v[0] / 3.0);
    judge_mesa(&mut report);
    report.judge("pressure_bound", "max pressure <= 2.1 for every exponent", &refs(&ls, "pressure_max"), |v| {
        v.iter().all(|&p| p <= 2.1)
    });
    report.judge("mass_balance", "mass-balance residual <= 1e-8", &refs(&ls, "mass_balance_max"), |v| {
        v.iter().all(|&x| x <= 1e-8)
    });
    Ok(Outcome { report, fields })
}

fn record_mesa(report: &mut Report, mesa: &crate::obstacle::MesaProfile) {
    let area = mesa.u_limit.grid().cell_area();
    report.record("mesa", "u_max", mesa.u_limit.max());
    report.record("mesa", "u_min", mesa.u_limit.min());
    report.record("mesa", "plateau_area", area * mesa.vi.noncoincidence_cells() as f64);
    report.record("mesa", "complementarity", mesa.vi.residuals.complementarity);
    report.record("mesa", "feasibility", mesa.vi.residuals.feasibility);
    report.record("mesa", "free_equation", mesa.vi.residuals.free_equation);
    report.record("mesa", "w_max", mesa.vi.w.max());
    report.record("mesa", "psor_sweeps", mesa.vi.iterations as f64);
}

fn judge_mesa(report: &mut Report) {
    report.judge("mesa_bounds", "0 <= mesa <= 1 + 1e-12", &[("mesa", "u_min"), ("mesa", "u_max")], |v| {
        v[0] >= 0.0 && v[1] <= 1.0 + 1e-12
    });
    report.judge("mesa_complementarity", "complementarity residual <= 1e-10", &[("mesa", "complementarity")], |v| {
        v[0] <= 1e-10
    });
}

/// Initial collapse of super-critical data onto the mesa projection of `f`.
pub fn collapse_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::Collapse;
    let grid = spec.grid()?;
    let (f, g) = (spec.f.field(grid), spec.g.field(grid));
    let cp = collapse_profile(&f, &spec.psor_options(&grid))?;
    let zero = ScalarField::zeros(grid);
    let steps = 20.0;
    let runs: Vec<Result<(f64, PmeSolution, PmeSolution, PmeProblem)>> = spec
        .schedule
        .par_iter()
        .map(|&m| {
            let tm = 1.0 / m;
            let dt = spec.dt.unwrap_or(tm / steps);
            let (problem, forced) = pme_run(m, &f, &g, tm, dt, &[], spec.newton_tol)?;
            let (_, free) = pme_run(m, &f, &zero, tm, dt, &[], spec.newton_tol)?;
            Ok((tm, forced, free, problem))
        })
        .collect();

    let mut report = Report::new(kind, spec);
    let mask = ScalarField::from_values(grid, cp.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())?;
    let mut fields = vec![NamedField::new("collapse", 0.0, cp.u_limit.clone()), NamedField::new("mask", 0.0, mask)];
    let support = grid.cell_area() * g.values().iter().filter(|&&v| v > 0.0).count() as f64;
    for (&m, run) in spec.schedule.iter().zip(runs) {
        let (tm, forced, free, problem) = run?;
        let label = m_label(m);
        let (uf, u0) = (forced.final_state(), free.final_state());
        report.record(&label, "t_m", tm);
        report.record(&label, "dist_forced", l1_distance(uf, &cp.u_limit));
        report.record(&label, "dist_unforced", l1_distance(u0, &cp.u_limit));
        report.record(&label, "mutual", l1_distance(uf, u0));
        report.record(&label, "source_bound", g.max_abs() * tm * support);
        record_pme_stats(&mut report, &label, &problem, &forced);
        fields.push(NamedField::new(format!("u_m{m}"), tm, uf.clone()));
        fields.push(NamedField::new(format!("u_unforced_m{m}"), tm, u0.clone()));
    }
    let mass_f = f.integral();
    report.record("collapse", "mass_f", mass_f);
    report.record("collapse", "mass_defect", (cp.u_limit.integral() - mass_f).abs() / mass_f.abs().max(1e-300));
    report.record("collapse", "u_max", cp.u_limit.max());
    report.record("collapse", "plateau_area", grid.cell_area() * cp.vi.noncoincidence_cells() as f64);
    report.record("collapse", "complementarity", cp.vi.residuals.complementarity);
    let ls = labels(m_label, &spec.schedule);
    report.judge("forced_decreasing", "distance with forcing strictly decreasing", &refs(&ls, "dist_forced"), strictly_decreasing);
    report.judge("unforced_decreasing", "distance without forcing strictly decreasing", &refs(&ls, "dist_unforced"), strictly_decreasing);
    report.judge("mutual_decreasing", "forced/unforced distance strictly decreasing", &refs(&ls, "mutual"), strictly_decreasing);
    for l in &ls {
        report.judge(
            &format!("source_bound[{l}]"),
            "forced/unforced distance <= |g| t_m |supp g| + 1e-8",
            &[(l, "mutual"), (l, "source_bound")],
            |v| v[0] <= v[1] * (1.0 + 1e-6) + 1e-8,
        );
    }
    report.judge("collapse_mass", "collapse profile conserves mass to 0.5%", &[("collapse", "mass_defect")], |v| v[0] <= 5e-3);
    report.judge("collapse_bound", "collapse profile <= 1 + 1e-12 where f <= 1", &[("collapse", "u_max")], |v| {
        v[0] <= 1.0 + 1e-12
    });
    Ok(Outcome { report, fields })
}

/// Saturation of the current density as `p` grows, with the limit
/// variational-inequality residual on random admissible test fields.
pub fn sweep_p(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SweepP;
    let grid = spec.grid()?;
    let h0 = spec.h0.field(grid);
    let forcing = steady_vector(spec.forcing.field(grid));
    let tests = random_admissible_fields(grid, spec.vi_fields, spec.vi_seed, 0.7 * spec.half_width);
    let dt_max = spec.dt.unwrap_or(grid.h());
    let f_norm = spec.forcing.field(grid).l2();
    let runs: Vec<Result<(CurlSolution, f64, f64)>> = spec
        .schedule
        .par_iter()
        .map(|&p| {
            let problem = CurlProblem::new(p, h0.clone(), forcing.clone(), spec.horizon)?;
            let sol = curl_solve(&problem, &CurlConfig::new(dt_max, spec.snapshot_times.clone()))?;
            let (mut vi_max, mut vi_scaled) = (f64::MIN, f64::MIN);
            for v in &tests {
                for ((_, r), snap) in vi_residual(&sol, v, &forcing)?.into_iter().zip(&sol.snapshots[1..]) {
                    vi_max = vi_max.max(r);
                    let scale = f_norm * v.axpy(-1.0, &snap.h).l2();
                    vi_scaled = vi_scaled.max(if scale > 0.0 { r / scale } else { r });
                }
            }
            Ok((sol, vi_max, vi_scaled))
        })
        .collect();

    let mut report = Report::new(kind, spec);
    let mut fields = Vec::new();
    let area = grid.cell_area();
    for (&p, run) in spec.schedule.iter().zip(runs) {
        let (sol, vi_max, vi_scaled) = run?;
        let label = p_label(p);
        let last = sol.final_snapshot();
        for (delta, key) in [(0.05, "mu_0.05"), (0.1, "mu_0.1"), (0.2, "mu_0.2")] {
            let count = last.omega.values().iter().filter(|w| w.abs() >= 1.0 + delta).count();
            report.record(&label, key, area * count as f64);
        }
        report.record(&label, "sup_omega_final", last.omega.max_abs());
        report.record(&label, "sup_omega_max", sol.diagnostics.iter().map(|d| d.max_curl).fold(0.0, f64::max));
        report.record(&label, "vi_max", vi_max);
        report.record(&label, "vi_scaled_max", vi_scaled);
        record_curl_stats(&mut report, &label, &sol);
        fields.push(NamedField::new(format!("omega_p{p}"), last.t, last.omega.clone()));
    }
    report.record("summary", "cell_area", area);
    let ls = labels(p_label, &spec.schedule);
    for key in ["mu_0.05", "mu_0.1", "mu_0.2"] {
        let mut uses = refs(&ls, key);
        uses.push(("summary", "cell_area"));
        report.judge(&format!("{key}_nonincreasing"), "excess measure non-increasing in p (one cell of slack)", &uses, |v| {
            let (a, s) = v.split_last().unwrap();
            s.windows(2).all(|w| w[1] <= w[0] + a)
        });
    }
    let (first, last) = (ls[0].clone(), ls[ls.len() - 1].clone());
    report.judge(
        "mu_0.1_halved",
        "mu_0.1(max p) <= mu_0.1(min p) / 2 + h^2",
        &[(&first, "mu_0.1"), (&last, "mu_0.1"), ("summary", "cell_area")],
        |v| v[1] <= v[0] / 2.0 + v[2],
    );
    report.judge("vi_decreasing", "max_t vi residual strictly decreasing in p", &refs(&ls, "vi_max"), strictly_decreasing);
    report.judge("vi_tolerance", "max_t r / (|F| |V - H|) <= 0.05 at max p", &[(&last, "vi_scaled_max")], |v| v[0] <= 0.05);
    judge_curl_invariants(&mut report, &ls);
    Ok(Outcome { report, fields })
}

fn steady_vector(f: VectorField2) -> Forcing<VectorField2> {
    if f.comp1.max_abs() == 0.0 && f.comp2.max_abs() == 0.0 {
        Forcing::Zero(*f.grid())
    } else {
        Forcing::Steady(f)
    }
}

fn record_curl_stats(report: &mut Report, label: &str, sol: &CurlSolution) {
    let budget = energy_budget(sol);
    report.record(label, "energy_lhs", budget.lhs);
    report.record(label, "energy_rhs", budget.rhs);
    report.record(label, "energy_tightest_t", budget.t);
    report.record(label, "divergence_drift", sol.max_divergence_drift());
    report.record(label, "steps", (sol.diagnostics.len() - 1) as f64);
}

fn judge_curl_invariants(report: &mut Report, ls: &[String]) {
    report.judge("divergence_drift", "divergence drift <= 1e-10", &refs(ls, "divergence_drift"), |v| {
        v.iter().all(|&d| d <= 1e-10)
    });
    let uses: Vec<(&str, &str)> =
        ls.iter().flat_map(|l| [(l.as_str(), "energy_lhs"), (l.as_str(), "energy_rhs")]).collect();
    report.judge("energy_budget", "Gronwall energy inequality holds at every step with 5% slack", &uses, |v| {
        v.chunks(2).all(|c| c[0] <= 1.05 * c[1])
    });
}

/// Cross-validation of the curl solver against the scalar reduction.
pub fn equivalence_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::Equivalence;
    let mut report = Report::new(kind, spec);
    let mut fields = Vec::new();
    for &p in &spec.schedule {
        if p > 16.0 {
            return Err(Error::PreconditionFailed(format!("equivalence check needs p <= 16, got {p}")));
        }
    }
    let jobs: Vec<(f64, usize)> =
        spec.schedule.iter().flat_map(|&p| spec.refinements.iter().map(move |&n| (p, n))).collect();
    let runs: Vec<Result<EquivalenceRun>> = jobs.par_iter().map(|&(p, n)| equivalence_run(spec, p, n)).collect();
    for (&(p, n), run) in jobs.iter().zip(runs) {
        let run = run?;
        let label = format!("{},{}", p_label(p), n_label(n));
        for (t, rel) in &run.discrepancy {
            report.record(&label, &format!("rel_l2@t={t}"), *rel);
        }
        let worst = run.discrepancy.iter().map(|(_, r)| *r).fold(0.0, f64::max);
        report.record(&label, "rel_l2_max", worst);
        report.record(&label, "tolerance", 5.0 * run.h);
        report.record(&label, "g_two_path", run.g_two_path);
        report.record(&label, "omega0_max", run.omega0_max);
        fields.push(NamedField::new(format!("omega_p{p}_n{n}"), spec.horizon, run.omega_final));
        fields.push(NamedField::new(format!("u_m{}_n{n}", p - 1.0), spec.horizon, run.u_final));
    }
    for &p in &spec.schedule {
        let ls: Vec<String> = spec.refinements.iter().map(|&n| format!("{},{}", p_label(p), n_label(n))).collect();
        for l in &ls {
            report.judge(&format!("within_5h[{l}]"), "relative L2 discrepancy <= 5h at every snapshot", &[(l, "rel_l2_max"), (l, "tolerance")], |v| {
                v[0] <= v[1]
            });
            report.judge(&format!("subcritical[{l}]"), "|curl H0| <= 1 + 1e-9", &[(l, "omega0_max")], |v| v[0] <= 1.0 + 1e-9);
        }
        if ls.len() > 1 {
            report.judge(&format!("refines[{}]", p_label(p)), "discrepancy decreases under refinement", &refs(&ls, "rel_l2_max"), |v| {
                v.iter().all(|&x| x == 0.0) || strictly_decreasing(v)
            });
            if spec.forcing.stream != Stream::Zero {
                report.judge(&format!("g_second_order[{}]", p_label(p)), "two-path source agreement improves like h^2", &refs(&ls, "g_two_path"), |v| {
                    v.windows(2).all(|w| w[1] <= w[0] / 3.0)
                });
            }
        }
    }
    Ok(Outcome { report, fields })
}

struct EquivalenceRun {
    h: f64,
    discrepancy: Vec<(f64, f64)>,
    g_two_path: f64,
    omega0_max: f64,
    omega_final: ScalarField,
    u_final: ScalarField,
}

fn equivalence_run(spec: &ExperimentSpec, p: f64, n: usize) -> Result<EquivalenceRun> {
    let grid = GridSpec::new(spec.half_width, n)?;
    let h0 = spec.h0.field(grid);
    let chi = spec.forcing.potential(grid);
    let forcing_field = from_stream(&chi);
    let u0 = curl_z(&h0);
    let g = curl_z(&forcing_field);
    let omega0_max = u0.max_abs();
    if omega0_max > 1.0 + 1e-9 {
        return Err(Error::PreconditionFailed(format!("equivalence check needs |curl H0| <= 1, got {omega0_max}")));
    }
    // analytic -Lap chi against the discrete curl of from_stream(chi)
    let scale = spec.forcing.scale(grid);
    let stream = spec.forcing.stream;
    let analytic = ScalarField::from_fn(grid, |x, y| scale * stream.minus_laplacian((x * x + y * y).sqrt()));
    let g_two_path = g.zip_map(&analytic, |a, b| a - b).max_abs();

    let curl_problem = CurlProblem::new(p, h0, steady_vector(forcing_field), spec.horizon)?;
    let curl_sol = curl_solve(&curl_problem, &CurlConfig::new(grid.h(), spec.snapshot_times.clone()))?;
    let dt = spec.dt.unwrap_or(0.5 * grid.cell_area());
    let pme_problem = PmeProblem::new(PowerLaw::from_curl_exponent(p)?, u0, steady(&g), spec.horizon)?;
    let mut cfg = PmeConfig::new(dt, spec.snapshot_times.clone());
    cfg.newton_tol = spec.newton_tol;
    let pme_sol = pme_solve(&pme_problem, &cfg)?;

    let discrepancy = curl_sol
        .snapshots
        .iter()
        .zip(&pme_sol.snapshots)
        .skip(1)
        .map(|(c, s)| {
            debug_assert_eq!(c.t, s.t);
            let norm = s.u.norms().l2;
            let diff = l2_distance(&c.omega, &s.u);
            (s.t, if diff == 0.0 { 0.0 } else { diff / norm.max(1e-300) })
        })
        .collect();
    Ok(EquivalenceRun {
        h: grid.h(),
        discrepancy,
        g_two_path,
        omega0_max,
        omega_final: curl_sol.final_snapshot().omega.clone(),
        u_final: pme_sol.final_state().clone(),
    })
}

/// L1 contraction and comparison between two runs sharing the source.
pub fn l1_contraction_check(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::Contraction;
    let grid = spec.grid()?;
    let (f1, f2, g) = (spec.f.field(grid), spec.f2.field(grid), spec.g.field(grid));
    let dt = default_pme_dt(spec);
    let runs: Vec<Result<(PmeSolution, PmeSolution)>> = spec
        .schedule
        .par_iter()
        .map(|&m| {
            let (_, a) = pme_run(m, &f1, &g, spec.horizon, dt, &spec.snapshot_times, spec.newton_tol)?;
            let (_, b) = pme_run(m, &f2, &g, spec.horizon, dt, &spec.snapshot_times, spec.newton_tol)?;
            Ok((a, b))
        })
        .collect();
    let mut report = Report::new(kind, spec);
    let ordered = f1.zip_map(&f2, |a, b| a - b).max() <= 0.0;
    let d0 = l1_distance(&f1, &f2);
    report.record("summary", "initial_distance", d0);
    report.record("summary", "ordered", if ordered { 1.0 } else { 0.0 });
    let mut fields = Vec::new();
    for (&m, run) in spec.schedule.iter().zip(runs) {
        let (a, b) = run?;
        let label = m_label(m);
        let dist: Vec<f64> = a.snapshots.iter().zip(&b.snapshots).map(|(x, y)| l1_distance(&x.u, &y.u)).collect();
        for (s, d) in a.snapshots.iter().zip(&dist) {
            report.record(&label, &format!("distance@t={}", s.t), *d);
        }
        report.record(&label, "distance_max", dist.iter().copied().fold(0.0, f64::max));
        report.record(&label, "distance_increase_max", dist.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
        let order_violation =
            a.snapshots.iter().zip(&b.snapshots).map(|(x, y)| x.u.zip_map(&y.u, |p, q| p - q).max()).fold(f64::MIN, f64::max);
        report.record(&label, "order_violation", order_violation);
        fields.push(NamedField::new(format!("u1_m{m}"), spec.horizon, a.final_state().clone()));
        fields.push(NamedField::new(format!("u2_m{m}"), spec.horizon, b.final_state().clone()));
    }
    let ls = labels(m_label, &spec.schedule);
    for l in &ls {
        report.judge(
            &format!("contraction[{l}]"),
            "|u1(t) - u2(t)|_1 <= |f1 - f2|_1 (1 + 1e-6) at every snapshot",
            &[(l, "distance_max"), ("summary", "initial_distance")],
            |v| v[0] <= v[1] * (1.0 + 1e-6),
        );
        if ordered {
            report.judge(&format!("comparison[{l}]"), "f1 <= f2 implies u1 <= u2 + 1e-8", &[(l, "order_violation")], |v| {
                v[0] <= 1e-8
            });
        }
    }
    Ok(Outcome { report, fields })
}

/// Monotonicity in radius and time for radially decreasing data with
/// `Lap f^m + g >= 0`.
pub fn monotonicity_check(spec: &ExperimentSpec, problem: &PmeProblem, solution: &PmeSolution) -> Result<Report> {
    let grid = problem.grid;
    let f = &problem.u0;
    if !is_d4_symmetric(f) {
        return Err(Error::PreconditionFailed("monotonicity check needs data symmetric about the origin".into()));
    }
    let g0 = problem.forcing.at(0.0);
    if !is_d4_symmetric(&g0) {
        return Err(Error::PreconditionFailed("monotonicity check needs a source symmetric about the origin".into()));
    }
    let lap = laplacian5(&f.map(|v| problem.law.psi(v)));
    let h43 = lap.axpy(1.0, &g0).min();
    if h43 < -1e-8 {
        return Err(Error::PreconditionFailed(format!("discrete Lap f^m + g >= 0 fails by {:e}", -h43)));
    }
    let mut report = Report::new(Experiment::SolvePme, spec);
    report.experiment = "monotonicity".into();
    let radial = solution.snapshots.iter().map(|s| radial_increase(&s.u)).fold(0.0, f64::max);
    let temporal = solution
        .snapshots
        .windows(2)
        .map(|w| w[0].u.zip_map(&w[1].u, |a, b| a - b).max())
        .fold(0.0, f64::max);
    report.record("monotonicity", "h43_min", h43);
    report.record("monotonicity", "radial_increase_max", radial);
    report.record("monotonicity", "time_decrease_max", temporal);
    report.record("monotonicity", "grid_n", grid.n() as f64);
    report.judge("radially_nonincreasing", "snapshots non-increasing along grid rays (1e-8 slack)", &[("monotonicity", "radial_increase_max")], |v| v[0] <= 1e-8);
    report.judge("time_nondecreasing", "u(t2) >= u(t1) - 1e-8 cellwise", &[("monotonicity", "time_decrease_max")], |v| v[0] <= 1e-8);
    Ok(report)
}

/// Exact invariance under the reflections and the diagonal swap of the grid.
fn is_d4_symmetric(u: &ScalarField) -> bool {
    let n = u.grid().n();
    let tol = 1e-12 * u.max_abs().max(1e-300);
    (0..n).all(|j| {
        (0..n).all(|i| {
            let v = u.at(i, j);
            (v - u.at(n - 1 - i, j)).abs() <= tol && (v - u.at(i, n - 1 - j)).abs() <= tol && (v - u.at(j, i)).abs() <= tol
        })
    })
}

/// Largest increase along the eight grid rays leaving the centre cells.
fn radial_increase(u: &ScalarField) -> f64 {
    let n = u.grid().n();
    let half = n / 2;
    let mut worst: f64 = 0.0;
    // (start, step) pairs in cell indices; n is even for centred rays
    let dirs: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)];
    for (di, dj) in dirs {
        let si = if di >= 0 { half } else { half - 1 } as isize;
        let sj = if dj >= 0 { half } else { half - 1 } as isize;
        let starts: Vec<(isize, isize)> = if di == 0 {
            vec![(half as isize, sj), (half as isize - 1, sj)]
        } else if dj == 0 {
            vec![(si, half as isize), (si, half as isize - 1)]
        } else {
            vec![(si, sj)]
        };
        for (mut i, mut j) in starts {
            let mut prev = u.at(i as usize, j as usize);
            loop {
                i += di;
                j += dj;
                if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
                    break;
                }
                let v = u.at(i as usize, j as usize);
                worst = worst.max(v - prev);
                prev = v;
            }
        }
    }
    worst
}

/// Convergence against the Barenblatt profile under refinement with `dt = h / 2`.
pub fn barenblatt_convergence(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::BarenblattConvergence;
    let m = spec.schedule[0];
    let law = PowerLaw::new(m)?;
    let exact = Barenblatt::new(law, 2, spec.barenblatt_mass)?;
    let (t0, horizon) = (spec.barenblatt_t0, spec.horizon);
    let runs: Vec<Result<(f64, f64, f64, ScalarField)>> = spec
        .refinements
        .par_iter()
        .map(|&n| {
            let grid = GridSpec::new(spec.half_width, n)?;
            let problem = PmeProblem::new(law, exact.field(grid, t0), Forcing::Zero(grid), horizon)?;
            let dt = spec.dt.unwrap_or(0.5 * grid.h());
            let mut cfg = PmeConfig::new(dt, spec.snapshot_times.clone());
            cfg.newton_tol = spec.newton_tol;
            let sol = pme_solve(&problem, &cfg)?;
            let err = l1_distance(sol.final_state(), &exact.field(grid, t0 + horizon));
            let mb = mass_balance_residual(&sol, &problem).into_iter().map(|(_, r)| r).fold(0.0, f64::max);
            Ok((grid.h(), err, mb, sol.final_state().clone()))
        })
        .collect();
    let mut report = Report::new(kind, spec);
    let mut fields = Vec::new();
    let mut pts = Vec::new();
    for (&n, run) in spec.refinements.iter().zip(runs) {
        let (h, err, mb, u) = run?;
        let label = n_label(n);
        report.record(&label, "h", h);
        report.record(&label, "l1_error", err);
        report.record(&label, "mass_balance_max", mb);
        pts.push((h.ln(), err.ln()));
        fields.push(NamedField::new(format!("u_n{n}"), t0 + horizon, u));
    }
    report.record("summary", "order", fitted_slope(&pts));
    report.record("summary", "support_radius_final", exact.support_radius(t0 + horizon));
    let ls: Vec<String> = spec.refinements.iter().map(|&n| n_label(n)).collect();
    report.judge("errors_decreasing", "L1 error strictly decreasing under refinement", &refs(&ls, "l1_error"), strictly_decreasing);
    report.judge("order", "estimated order >= 0.8", &[("summary", "order")], |v| v[0] >= 0.8);
    report.judge("mass_balance", "mass-balance residual <= 1e-8", &refs(&ls, "mass_balance_max"), |v| v.iter().all(|&x| x <= 1e-8));
    Ok(Outcome { report, fields })
}

/// Least-squares slope of `y` against `x`; a single point gives 0.
pub fn fitted_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// A single porous-medium run at `schedule[0]`.
pub fn solve_pme(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SolvePme;
    let grid = spec.grid()?;
    let m = spec.schedule[0];
    let (f, g) = (spec.f.field(grid), spec.g.field(grid));
    let (problem, sol) = pme_run(m, &f, &g, spec.horizon, default_pme_dt(spec), &spec.snapshot_times, spec.newton_tol)?;
    let mut report = Report::new(kind, spec);
    let label = m_label(m);
    record_pme_stats(&mut report, &label, &problem, &sol);
    let mut fields = Vec::new();
    for s in &sol.snapshots {
        let tl = format!("t={}", s.t);
        report.record(&tl, "mass", s.u.integral());
        report.record(&tl, "sup_u", s.u.max_abs());
        report.record(&tl, "pressure_max", crate::pme::pressure_field(&s.u, &problem.law).max());
        fields.push(NamedField::new("u", s.t, s.u.clone()));
    }
    report.judge("mass_balance", "mass-balance residual <= 1e-8", &[(&label, "mass_balance_max")], |v| v[0] <= 1e-8);
    report.judge("truncation", "boundary-adjacent |u| <= 1e-8", &[(&label, "boundary_max")], |v| v[0] <= 1e-8);
    if spec.check_monotonicity {
        let mono = monotonicity_check(spec, &problem, &sol)?;
        report.merge("", mono);
    }
    Ok(Outcome { report, fields })
}

/// A single curl run at `schedule[0]`.
pub fn solve_curl(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SolveCurl;
    let grid = spec.grid()?;
    let p = spec.schedule[0];
    let problem = CurlProblem::new(p, spec.h0.field(grid), steady_vector(spec.forcing.field(grid)), spec.horizon)?;
    let sol = curl_solve(&problem, &CurlConfig::new(spec.dt.unwrap_or(grid.h()), spec.snapshot_times.clone()))?;
    let mut report = Report::new(kind, spec);
    let label = p_label(p);
    record_curl_stats(&mut report, &label, &sol);
    let mut fields = Vec::new();
    for s in &sol.snapshots {
        let tl = format!("t={}", s.t);
        report.record(&tl, "l2_h", s.h.l2());
        report.record(&tl, "sup_j", s.j.max());
        fields.push(NamedField::new("h1", s.t, s.h.comp1.clone()));
        fields.push(NamedField::new("h2", s.t, s.h.comp2.clone()));
        fields.push(NamedField::new("omega", s.t, s.omega.clone()));
        fields.push(NamedField::new("j", s.t, s.j.clone()));
    }
    judge_curl_invariants(&mut report, &[label]);
    Ok(Outcome { report, fields })
}

/// Obstacle problem for `q = f + T g - 1`, checked against the radial
/// solver when the data are centred.
pub fn solve_obstacle(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::SolveObstacle;
    let grid = spec.grid()?;
    let q = spec.f.field(grid).axpy(spec.horizon, &spec.g.field(grid)).map(|v| v - 1.0);
    let sol = psor_solve(&ObstacleData::new(q), &spec.psor_options(&grid))?;
    let mut report = Report::new(kind, spec);
    report.record("vi", "complementarity", sol.residuals.complementarity);
    report.record("vi", "feasibility", sol.residuals.feasibility);
    report.record("vi", "free_equation", sol.residuals.free_equation);
    report.record("vi", "w_min", sol.w.min());
    report.record("vi", "w_max", sol.w.max());
    report.record("vi", "sweeps", sol.iterations as f64);
    report.record("vi", "noncoincidence_area", grid.cell_area() * sol.noncoincidence_cells() as f64);
    report.judge("nonnegative", "w >= 0", &[("vi", "w_min")], |v| v[0] >= 0.0);
    report.judge("complementarity", "complementarity residual <= 1e-10", &[("vi", "complementarity")], |v| v[0] <= 1e-10);
    report.judge("feasibility", "-Lap w - q >= -1e-10 (scaled)", &[("vi", "feasibility")], |v| v[0] <= 1e-10);
    report.judge("free_equation", "|-Lap w - q| <= 1e-9 where w > 0", &[("vi", "free_equation")], |v| v[0] <= 1e-9);
    if spec.f.center == [0.0, 0.0] && spec.g.center == [0.0, 0.0] {
        let (fp, gp, t) = (spec.f.profile, spec.g.profile, spec.horizon);
        let r_max = spec.half_width * std::f64::consts::SQRT_2;
        let prof = radial_obstacle_oracle(|r| fp.eval(r) + t * gp.eval(r) - 1.0, r_max, 4000)?;
        let err = grid
            .cells()
            .map(|(i, j, x, y)| (sol.w.at(i, j) - prof.eval((x * x + y * y).sqrt())).abs())
            .fold(0.0, f64::max);
        report.record("radial", "linf_vs_oracle", err);
        report.record("radial", "tolerance", 5.0 * grid.h());
        report.record("radial", "free_boundary_oracle", prof.free_boundary(1e-12));
        report.judge("radial_oracle", "Linf distance to the radial solution <= 5h", &[("radial", "linf_vs_oracle"), ("radial", "tolerance")], |v| {
            v[0] <= v[1]
        });
    }
    let mask = ScalarField::from_values(grid, sol.noncoincidence_mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())?;
    let fields = vec![NamedField::new("w", spec.horizon, sol.w), NamedField::new("mask", spec.horizon, mask)];
    Ok(Outcome { report, fields })
}

/// Mesa profile at `T` for data `f` and the steady source `g`.
pub fn mesa_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let kind = Experiment::MesaProfile;
    let grid = spec.grid()?;
    let f = spec.f.field(grid);
    let acc = steady(&spec.g.field(grid)).accumulated(spec.horizon);
    let mesa = mesa_profile(&f, &acc, spec.horizon, &spec.psor_options(&grid))?;
    let mut report = Report::new(kind, spec);
    record_mesa(&mut report, &mesa);
    judge_mesa(&mut report);
    let mask = ScalarField::from_values(grid, mesa.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())?;
    let fields = vec![
        NamedField::new("mesa", spec.horizon, mesa.u_limit),
        NamedField::new("mask", spec.horizon, mask),
        NamedField::new("w", spec.horizon, mesa.vi.w),
    ];
    Ok(Outcome { report, fields })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: Experiment) -> ExperimentSpec {
        ExperimentSpec { n: 32, refinements: vec![32], ..ExperimentSpec::preset(kind) }
    }

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(e.to_string(), e.name());
        }
        assert!(matches!("sweep-q".parse::<Experiment>(), Err(Error::Domain(_))));
    }

    #[test]
    fn presets_validate() {
        for e in Experiment::ALL {
            ExperimentSpec::preset(e).validate(e).unwrap();
        }
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let kind = Experiment::SweepM;
        let base = ExperimentSpec::preset(kind);
        let cases = [
            ExperimentSpec { schedule: vec![], ..base.clone() },
            ExperimentSpec { schedule: vec![8.0, 8.0], ..base.clone() },
            ExperimentSpec { schedule: vec![1.0], ..base.clone() },
            ExperimentSpec { schedule: vec![200.0], ..base.clone() },
            ExperimentSpec { horizon: 0.0, ..base.clone() },
            ExperimentSpec { dt: Some(-1.0), ..base.clone() },
            ExperimentSpec { psor_relaxation: Some(2.0), ..base.clone() },
            ExperimentSpec { refinements: vec![64, 32], ..base.clone() },
            ExperimentSpec { n: 0, ..base.clone() },
            ExperimentSpec { name: " ".into(), ..base.clone() },
        ];
        for spec in cases {
            assert!(matches!(spec.validate(kind), Err(Error::Domain(_))), "{spec:?}");
        }
        // p must exceed 2 for curl experiments, m only 1
        let curl = ExperimentSpec { schedule: vec![1.5], ..ExperimentSpec::preset(Experiment::SweepP) };
        assert!(curl.validate(Experiment::SweepP).is_err());
    }

    #[test]
    fn report_table_and_verdicts() {
        let kind = Experiment::SmallData;
        let mut r = Report::new(kind, &ExperimentSpec::preset(kind));
        r.record("a", "x", 1.0);
        r.record("a", "nan", f64::NAN);
        r.record("a", "neg", f64::NEG_INFINITY);
        assert_eq!(r.metric("a", "nan"), Some(f64::MAX));
        assert_eq!(r.metric("a", "neg"), Some(f64::MIN));
        r.judge("ok", "x < 2", &[("a", "x")], |v| v[0] < 2.0);
        assert!(r.all_pass());
        r.judge("missing", "never evaluated", &[("b", "y")], |_| true);
        assert_eq!(r.failed(), vec!["missing"]);
        assert!(matches!(r.validate(), Err(Error::Domain(_))));
    }

    #[test]
    fn slope_of_exact_power() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&h: &f64| (h.ln(), (3.0 * h.powf(1.5)).ln())).collect();
        assert!((fitted_slope(&pts) - 1.5).abs() < 1e-12);
        assert_eq!(fitted_slope(&pts[..1]), 0.0);
    }

    #[test]
    fn small_data_passes_and_is_deterministic() {
        let spec = ExperimentSpec { schedule: vec![8.0, 16.0], ..small(Experiment::SmallData) };
        let a = run_experiment(Experiment::SmallData, &spec).unwrap();
        let b = run_experiment(Experiment::SmallData, &spec).unwrap();
        assert!(a.report.all_pass(), "{:?}", a.report.failed());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_data_sweep_has_no_excess() {
        let spec = ExperimentSpec {
            schedule: vec![4.0, 8.0],
            horizon: 0.05,
            h0: StreamData::zero(),
            forcing: StreamData::zero(),
            snapshot_times: vec![0.025],
            vi_fields: 3,
            ..small(Experiment::SweepP)
        };
        let out = run_experiment(Experiment::SweepP, &spec).unwrap();
        for l in ["p=4", "p=8"] {
            for key in ["mu_0.05", "mu_0.1", "mu_0.2", "sup_omega_final", "divergence_drift"] {
                assert_eq!(out.report.metric(l, key), Some(0.0), "{l} {key}");
            }
            // H stays 0, so r = -(0 - 0).(V - 0) = 0
            assert_eq!(out.report.metric(l, "vi_max"), Some(0.0));
        }
    }

    #[test]
    fn zero_data_equivalence_is_exact() {
        let spec = ExperimentSpec {
            h0: StreamData::zero(),
            horizon: 0.02,
            snapshot_times: vec![0.01],
            ..small(Experiment::Equivalence)
        };
        let out = run_experiment(Experiment::Equivalence, &spec).unwrap();
        assert_eq!(out.report.metric("p=4,n=32", "rel_l2_max"), Some(0.0));
        assert!(out.report.all_pass());
    }

    #[test]
    fn equivalence_refuses_supercritical_data() {
        let mut spec = ExperimentSpec { horizon: 0.02, ..small(Experiment::Equivalence) };
        spec.h0.curl_max = Some(1.5);
        assert!(matches!(run_experiment(Experiment::Equivalence, &spec), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn monotonicity_needs_symmetric_data() {
        let mut spec = ExperimentSpec { horizon: 0.1, snapshot_times: vec![0.05], ..small(Experiment::SolvePme) };
        spec.f.center = [0.3, 0.0];
        assert!(matches!(run_experiment(Experiment::SolvePme, &spec), Err(Error::PreconditionFailed(_))));
        spec.check_monotonicity = false;
        assert!(run_experiment(Experiment::SolvePme, &spec).is_ok());
    }

    #[test]
    fn solve_obstacle_matches_radial_oracle() {
        let spec = ExperimentSpec { n: 48, ..ExperimentSpec::preset(Experiment::SolveObstacle) };
        let out = run_experiment(Experiment::SolveObstacle, &spec).unwrap();
        assert!(out.report.all_pass(), "{:?}", out.report.failed());
    }
}
