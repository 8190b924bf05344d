//! Acceptance criteria, one line per criterion.
//!
//! Criteria are evaluated from the experiment reports at the stated
//! tolerances, independently of the verdicts the reports carry. Every
//! criterion is printed as PASS or FAIL. Set `ACCEPTANCE_STRICT=1` to make
//! any failing criterion fail the process.

use std::time::Instant;

use bean_limit_core::data::Radial;
use bean_limit_core::lab::{run_experiment, Experiment, ExperimentSpec, PlacedRadial, Report};
use bean_limit_core::obstacle::unconstrained_poisson;
use bean_limit_core::{psor_solve, GridSpec, ObstacleData, PsorOptions, ScalarField};

type Check = (bool, String);

fn report(kind: Experiment, spec: &ExperimentSpec) -> Report {
    run_experiment(kind, spec).unwrap_or_else(|e| panic!("{kind} failed: {e}")).report
}

fn preset(kind: Experiment) -> Report {
    report(kind, &ExperimentSpec::preset(kind))
}

fn metric(r: &Report, label: &str, key: &str) -> f64 {
    r.metric(label, key).unwrap_or_else(|| panic!("{}: missing {label}/{key}", r.experiment))
}

fn series(r: &Report, labels: &[String], key: &str) -> Vec<f64> {
    labels.iter().map(|l| metric(r, l, key)).collect()
}

fn labels(prefix: &str, xs: &[f64]) -> Vec<String> {
    xs.iter().map(|x| format!("{prefix}={x}")).collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", s.join(", "))
}

fn barenblatt() -> Check {
    let r = preset(Experiment::BarenblattConvergence);
    let ns = [64.0, 128.0, 256.0];
    let ls = labels("n", &ns);
    let errs = series(&r, &ls, "l1_error");
    let mass = series(&r, &ls, "mass_balance_max");
    let order = metric(&r, "summary", "order");
    let m3 = r.config.schedule == [3.0] && r.config.refinements == [64, 128, 256];
    let ok = m3 && strictly_decreasing(&errs) && order >= 0.8 && mass.iter().all(|&x| x <= 1e-8);
    (ok, format!("L1 errors {} order {order:.3}, max mass residual {:.1e}", fmt(&errs), mass.iter().cloned().fold(0.0, f64::max)))
}

fn small_data(r: &Report) -> Check {
    let f = r.config.f.profile.peak();
    let g = r.config.g.profile.peak();
    let bound = f + r.config.horizon * g;
    let d = series(r, &labels("m", &[8.0, 16.0, 32.0, 64.0]), "d");
    let ok = (bound - 0.8).abs() < 1e-12 && strictly_decreasing(&d) && d[3] <= d[0] / 3.0;
    (ok, format!("M = {bound}, d(m) {}, d(64)/d(8) = {:.3}", fmt(&d), d[3] / d[0]))
}

fn pressure(reports: &[&Report]) -> Check {
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for r in reports {
        assert!(r.config.f.profile.peak() <= 1.0 && r.config.f2.profile.peak() <= 1.0);
        for (label, m) in &r.metrics {
            if let (true, Some(p)) = (label.starts_with("m="), m.get("pressure_max")) {
                worst = worst.max(*p);
                runs += 1;
            }
        }
    }
    (runs > 0 && worst <= 2.1, format!("max pressure {worst:.4} over {runs} runs with |f| <= 1"))
}

fn mesa(r: &Report) -> Check {
    let e = series(r, &labels("m", &[8.0, 16.0, 32.0, 64.0]), "e");
    let (lo, hi, comp) = (metric(r, "mesa", "u_min"), metric(r, "mesa", "u_max"), metric(r, "mesa", "complementarity"));
    let ok = strictly_decreasing(&e) && e[3] <= e[0] / 3.0 && lo >= 0.0 && hi <= 1.0 + 1e-12 && comp <= 1e-10;
    (ok, format!("e(m) {}, e(64)/e(8) = {:.3}, mesa in [{lo:.2e}, {hi:.6}], complementarity {comp:.1e}", fmt(&e), e[3] / e[0]))
}

fn collapse() -> Check {
    let r = preset(Experiment::Collapse);
    let ls = labels("m", &[8.0, 16.0, 32.0, 64.0]);
    let forced = series(&r, &ls, "dist_forced");
    let free = series(&r, &ls, "dist_unforced");
    let defect = metric(&r, "collapse", "mass_defect");
    let radial = r.config.f.center == [0.0, 0.0] && r.config.f.profile.peak() == 1.5;
    let ok = radial && strictly_decreasing(&forced) && strictly_decreasing(&free) && defect <= 5e-3;
    (ok, format!("forced {}, unforced {}, mass defect {defect:.1e}", fmt(&forced), fmt(&free)))
}

fn saturation(r: &Report) -> Check {
    let ls = labels("p", &[4.0, 8.0, 16.0, 32.0]);
    let mu = series(r, &ls, "mu_0.1");
    let area = metric(r, "summary", "cell_area");
    let h0 = r.config.h0;
    let ok = h0.curl_max.is_some_and(|c| c <= 1.0)
        && mu.windows(2).all(|w| w[1] <= w[0] + area)
        && mu[3] <= mu[0] / 2.0 + area;
    (ok, format!("mu_0.1(p) {}, h^2 = {area:.2e}", fmt(&mu)))
}

fn equivalence() -> Check {
    let r = preset(Experiment::Equivalence);
    let ls: Vec<String> = [64, 128].iter().map(|n| format!("p=4,n={n}")).collect();
    let err = series(&r, &ls, "rel_l2_max");
    let tol = series(&r, &ls, "tolerance");
    let ok = err.iter().zip(&tol).all(|(e, t)| e <= t) && strictly_decreasing(&err);
    (ok, format!("relative L2 {} against 5h {}", fmt(&err), fmt(&tol)))
}

fn conservation(curl_runs: &[&Report]) -> Check {
    let mut drift: f64 = 0.0;
    for r in curl_runs {
        for (label, m) in &r.metrics {
            if let Some(d) = m.get("divergence_drift") {
                assert!(label.starts_with("p="));
                drift = drift.max(*d);
            }
        }
    }
    let base = ExperimentSpec::preset(Experiment::Contraction);
    let bump = |height, radius, center| PlacedRadial { profile: Radial::Bump { height, radius }, center };
    let pairs = [
        (base.f, base.f2),
        (bump(0.4, 0.7, [0.2, 0.1]), PlacedRadial::centered(Radial::FlatTop { height: 0.7, inner: 1.0, outer: 1.3 })),
        (bump(0.5, 0.8, [-0.3, 0.2]), bump(0.5, 0.8, [-0.3, 0.2])),
    ];
    let mut worst_ratio: f64 = 0.0;
    let mut worst_order: f64 = f64::MIN;
    for (f1, f2) in pairs {
        let spec = ExperimentSpec { f: f1, f2, schedule: vec![8.0, 32.0], ..base.clone() };
        let r = report(Experiment::Contraction, &spec);
        assert_eq!(metric(&r, "summary", "ordered"), 1.0);
        let d0 = metric(&r, "summary", "initial_distance");
        for l in labels("m", &spec.schedule) {
            let d = metric(&r, &l, "distance_max");
            let ratio = if d0 > 0.0 { d / d0 - 1.0 } else if d == 0.0 { -1.0 } else { f64::INFINITY };
            worst_ratio = worst_ratio.max(ratio);
            worst_order = worst_order.max(metric(&r, &l, "order_violation"));
        }
    }
    let ok = drift <= 1e-10 && worst_ratio <= 1e-6 && worst_order <= 1e-6;
    (ok, format!("divergence drift {drift:.1e}; contraction excess {worst_ratio:.1e}, comparison excess {worst_order:.1e} on 3 pairs"))
}

fn obstacle() -> Check {
    let disk = preset(Experiment::SolveObstacle);
    let spec = ExperimentSpec {
        f: PlacedRadial::centered(Radial::Bump { height: 1.8, radius: 1.2 }),
        g: PlacedRadial::centered(Radial::Bump { height: 0.5, radius: 1.0 }),
        ..ExperimentSpec::preset(Experiment::SolveObstacle)
    };
    let bump = report(Experiment::SolveObstacle, &spec);
    let errs = [metric(&disk, "radial", "linf_vs_oracle"), metric(&bump, "radial", "linf_vs_oracle")];
    let tols = [metric(&disk, "radial", "tolerance"), metric(&bump, "radial", "tolerance")];

    let grid = GridSpec::new(2.0, 64).unwrap();
    let opts = PsorOptions::tuned(&grid);
    let negative = Radial::Bump { height: -1.0, radius: 1.0 }.field(grid);
    let w0 = psor_solve(&ObstacleData::new(negative), &opts).unwrap().w;
    let zero_exact = w0.values().iter().all(|&v| v == 0.0);
    let q = ScalarField::from_fn(grid, |x, y| 1.0 + 0.3 * (x * y).cos());
    let w = psor_solve(&ObstacleData::new(q.clone()), &opts).unwrap().w;
    let lin = w.zip_map(&unconstrained_poisson(&q), |a, b| a - b).max_abs();

    let ok = errs.iter().zip(&tols).all(|(e, t)| e <= t) && zero_exact && lin <= 1e-9;
    (ok, format!("Linf vs radial oracle {} (5h = {}), q <= 0 gives w = 0: {zero_exact}, linearity {lin:.1e}", fmt(&errs), fmt(&tols)))
}

fn vi_residual(r: &Report) -> Check {
    let v = series(r, &labels("p", &[4.0, 8.0, 16.0, 32.0]), "vi_max");
    (r.config.vi_fields == 20 && strictly_decreasing(&v), format!("max_t r over 20 test fields {}", fmt(&v)))
}

fn main() {
    let start = Instant::now();
    let sweep_p = preset(Experiment::SweepP);
    let sweep_m = preset(Experiment::SweepM);
    let small = preset(Experiment::SmallData);
    let solve_curl = preset(Experiment::SolveCurl);

    let criteria: Vec<(&str, Box<dyn FnOnce() -> Check>)> = vec![
        ("barenblatt exactness", Box::new(barenblatt)),
        ("small-data limit", Box::new(|| small_data(&small))),
        ("pressure bound", Box::new(|| pressure(&[&small, &sweep_m]))),
        ("mesa convergence", Box::new(|| mesa(&sweep_m))),
        ("initial collapse", Box::new(collapse)),
        ("saturation", Box::new(|| saturation(&sweep_p))),
        ("reduction equivalence", Box::new(equivalence)),
        ("conservation and contraction", Box::new(|| conservation(&[&sweep_p, &solve_curl]))),
        ("obstacle solver", Box::new(obstacle)),
        ("variational-inequality residual", Box::new(|| vi_residual(&sweep_p))),
    ];
    let total = criteria.len();
    let mut failed = Vec::new();
    for (k, (name, check)) in criteria.into_iter().enumerate() {
        let (ok, detail) = check();
        println!("{:>2}. [{}] {name}: {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(name);
        }
    }
    println!("{}/{total} criteria pass ({:.1}s)", total - failed.len(), start.elapsed().as_secs_f64());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
