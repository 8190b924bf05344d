use std::fs;
use std::path::Path;

use bean_limit_cli::dump::{format_field, parse_field};
use bean_limit_cli::{read_field, run, EXIT_CONFIG, EXIT_PASS, EXIT_SOLVER, EXIT_VERDICT};
use bean_limit_core::{GridSpec, ScalarField};
use proptest::prelude::*;
use serde_json::Value;

fn run_with(dir: &Path, experiment: &str, config: &str) -> i32 {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    run(["bean-limit", experiment, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/report.json")).unwrap()).unwrap()
}

#[test]
fn unknown_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_with(tmp.path(), "solve-pme", "grid.L = 2\ngrdi.n = 64\n"), EXIT_CONFIG);
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bad_arguments_exit_2() {
    assert_eq!(run(["bean-limit", "solve-everything"]), EXIT_CONFIG);
    assert_eq!(run(["bean-limit"]), EXIT_CONFIG);
    assert_eq!(run(["bean-limit", "collapse", "--config", "/nonexistent/run.cfg"]), EXIT_CONFIG);
    assert_eq!(run(["bean-limit", "--help"]), EXIT_PASS);
}

#[test]
fn zero_data_pme_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "grid.n = 32\nhorizon = 0.2\ndt = 0.05\nsnapshots = 0.1\ndata.f.kind = zero\ndata.g.kind = zero\n";
    assert_eq!(run_with(tmp.path(), "solve-pme", cfg), EXIT_PASS);
    let r = report(tmp.path());
    for t in ["t=0", "t=0.1", "t=0.2"] {
        assert_eq!(r["metrics"][t]["mass"], 0.0, "{t}");
    }
    assert_eq!(r["experiment"], "solve-pme");
    let dumps: Vec<_> = (0..3).map(|k| read_field(&tmp.path().join(format!("out/u_{k:03}.csv"))).unwrap()).collect();
    assert_eq!(dumps.iter().map(|d| d.t).collect::<Vec<_>>(), vec![0.0, 0.1, 0.2]);
    assert!(dumps.iter().all(|d| d.field.max_abs() == 0.0 && d.field.grid().n() == 32));
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("PASS mass_balance"));
}

#[test]
fn report_keys_are_sorted() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run_with(tmp.path(), "mesa-profile", "grid.n = 24\n"), EXIT_PASS);
    let text = fs::read_to_string(tmp.path().join("out/report.json")).unwrap();
    let top: Vec<&str> = text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim()).collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
}

#[test]
fn rerun_from_report_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let cfg = "grid.n = 32\nschedule = 8, 16\nhorizon = 0.3\n";
    assert_eq!(run_with(a.path(), "small-data", cfg), EXIT_PASS);
    let b = tempfile::tempdir().unwrap();
    let out_b = b.path().join("out");
    let code = run([
        "bean-limit",
        "small-data",
        "--config",
        a.path().join("out/report.json").to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    let mut names: Vec<_> = fs::read_dir(a.path().join("out")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 2);
    for name in names {
        let x = fs::read(a.path().join("out").join(&name)).unwrap();
        let y = fs::read(out_b.join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
    // a report for another experiment is refused
    assert_eq!(run(["bean-limit", "sweep-m", "--config", a.path().join("out/report.json").to_str().unwrap()]), EXIT_CONFIG);
}

#[test]
fn solver_precondition_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    // support reaches into the boundary margin
    assert_eq!(run_with(tmp.path(), "solve-pme", "grid.n = 32\ndata.f.radius = 1.9\n"), EXIT_SOLVER);
}

#[test]
fn failing_verdict_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    // a loose relaxation tolerance leaves the complementarity residual too large
    let code = run_with(tmp.path(), "solve-obstacle", "grid.n = 32\nsolver.psor_tol = 0.5\n");
    assert_eq!(code, EXIT_VERDICT);
    let summary = fs::read_to_string(tmp.path().join("out/summary.txt")).unwrap();
    assert!(summary.contains("FAIL"));
}

#[test]
fn barenblatt_convergence_reports_order() {
    let tmp = tempfile::tempdir().unwrap();
    let code = run_with(tmp.path(), "barenblatt-convergence", "grid.refinements = 32, 48, 64\nhorizon = 0.5\n");
    let r = report(tmp.path());
    let errs: Vec<f64> = ["n=32", "n=48", "n=64"].iter().map(|l| r["metrics"][l]["l1_error"].as_f64().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(r["metrics"]["summary"]["order"].as_f64().unwrap() > 0.0);
    assert!(code == EXIT_PASS || code == EXIT_VERDICT);
}

fn grid_values() -> impl Strategy<Value = (usize, Vec<f64>)> {
    (8usize..12).prop_flat_map(|n| (Just(n), prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, n * n)))
}

proptest! {
    #[test]
    fn dumps_round_trip_bitwise((n, vals) in grid_values(), l in 0.1f64..100.0, t in prop::num::f64::POSITIVE | prop::num::f64::ZERO) {
        let f = ScalarField::from_values(GridSpec::new(l, n).unwrap(), vals).unwrap();
        let back = parse_field(&format_field("w_mask", t, &f).unwrap(), "mem").unwrap();
        prop_assert_eq!(back.t.to_bits(), t.to_bits());
        prop_assert_eq!(back.field.grid(), f.grid());
        for (a, b) in back.field.values().iter().zip(f.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
