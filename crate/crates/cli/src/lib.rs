//! Command-line front end: parses a run configuration, runs one experiment,
//! and writes field dumps, `report.json` and `summary.txt`.

pub mod config;
pub mod dump;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bean_limit_core::lab::{run_experiment, Experiment, ExperimentSpec, Outcome, Report};
use clap::Parser;
use thiserror::Error;

pub use config::{load_spec, ConfigError, RunConfig};
pub use dump::{read_field, write_field, DumpError, FieldDump};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bean-limit", version, about = "Large-exponent limit experiments for p-curl and porous-medium flows")]
struct Cli {
    /// Experiment to run.
    #[arg(value_parser = parse_experiment)]
    experiment: Experiment,
    /// `key = value` file, or a previous report.json to rerun.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
        format!("unknown experiment `{s}`; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error(transparent)]
    Dump(#[from] DumpError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.display().to_string(), source }
}

/// `report.json` text with every object's keys sorted.
pub fn report_json(report: &Report) -> Result<String, serde_json::Error> {
    // serde_json::Value maps are ordered, so a round trip sorts struct fields too
    let value = serde_json::to_value(report)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    Ok(text)
}

pub fn summary_text(report: &Report) -> String {
    let mut s = String::new();
    let c = &report.config;
    writeln!(s, "experiment: {}", report.experiment).unwrap();
    writeln!(s, "grid: [-{0}, {0}]^2, n = {1}", c.half_width, c.n).unwrap();
    writeln!(s, "schedule: {:?}", c.schedule).unwrap();
    writeln!(s, "horizon: {}", c.horizon).unwrap();
    writeln!(s).unwrap();
    for (label, metrics) in &report.metrics {
        writeln!(s, "[{label}]").unwrap();
        for (k, v) in metrics {
            writeln!(s, "  {k:<24} {v:.6e}").unwrap();
        }
    }
    writeln!(s).unwrap();
    for (name, v) in &report.verdicts {
        writeln!(s, "{} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.rule).unwrap();
    }
    let failed = report.failed();
    writeln!(s).unwrap();
    if failed.is_empty() {
        writeln!(s, "all {} verdicts pass", report.verdicts.len()).unwrap();
    } else {
        writeln!(s, "{} of {} verdicts fail: {}", failed.len(), report.verdicts.len(), failed.join(", ")).unwrap();
    }
    s
}

/// Writes every artifact of `outcome` into `dir`; returns the files written.
pub fn write_outputs(dir: &Path, outcome: &Outcome) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for nf in &outcome.fields {
        let k = counts.entry(nf.name.as_str()).or_default();
        let path = dir.join(format!("{}_{:03}.csv", nf.name, k));
        *k += 1;
        write_field(&path, &nf.name, nf.t, &nf.field)?;
        written.push(path);
    }
    let report_path = dir.join("report.json");
    std::fs::write(&report_path, report_json(&outcome.report)?).map_err(io_err(&report_path))?;
    written.push(report_path);
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary_text(&outcome.report)).map_err(io_err(&summary_path))?;
    written.push(summary_path);
    Ok(written)
}

fn output_dir(cli_out: Option<PathBuf>, spec: &ExperimentSpec) -> PathBuf {
    cli_out
        .or_else(|| spec.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&spec.name))
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let kind = cli.experiment;
    let spec = match &cli.config {
        Some(path) => load_spec(path, kind),
        None => Ok(ExperimentSpec::preset(kind)),
    };
    let spec = match spec {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcome = match run_experiment(kind, &spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("solver error: {e}");
            return EXIT_SOLVER;
        }
    };
    let dir = output_dir(cli.out, &spec);
    if let Err(e) = write_outputs(&dir, &outcome) {
        eprintln!("output error: {e}");
        return EXIT_SOLVER;
    }
    print!("{}", summary_text(&outcome.report));
    println!("outputs in {}", dir.display());
    if outcome.report.all_pass() { EXIT_PASS } else { EXIT_VERDICT }
}
