use bean_limit_core::data::{Radial, Stream};
use bean_limit_core::field::l1_distance;
use bean_limit_core::*;
use proptest::prelude::*;

const L: f64 = 2.0;

fn grid(n: usize) -> GridSpec {
    GridSpec::new(L, n).unwrap()
}

/// (cx, cy, radius, amplitude) with the support inside |x| <= 1.4.
fn lobe(amp: std::ops::Range<f64>) -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-0.5f64..0.5, -0.5f64..0.5, 0.3f64..0.8, amp)
}

fn bumps(g: GridSpec, lobes: &[(f64, f64, f64, f64)]) -> ScalarField {
    ScalarField::from_fn(g, |x, y| {
        lobes
            .iter()
            .map(|&(cx, cy, r, a)| Radial::Bump { height: a, radius: r }.eval(((x - cx).powi(2) + (y - cy).powi(2)).sqrt()))
            .sum()
    })
}

fn streams(g: GridSpec, lobes: &[(f64, f64, f64, f64)]) -> ScalarField {
    ScalarField::from_fn(g, |x, y| {
        lobes
            .iter()
            .map(|&(cx, cy, r, a)| Stream::Bump { amplitude: a, radius: r }.eval(((x - cx).powi(2) + (y - cy).powi(2)).sqrt()))
            .sum()
    })
}

fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>() * a.grid().cell_area()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_symmetric(a in prop::collection::vec(lobe(-1.0..1.0), 1..4),
                              b in prop::collection::vec(lobe(-1.0..1.0), 1..4)) {
        let g = grid(40);
        let (u, v) = (bumps(g, &a), bumps(g, &b));
        let lhs = inner(&v, &laplacian5(&u));
        let rhs = inner(&u, &laplacian5(&v));
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300));
    }

    #[test]
    fn streams_are_divergence_free(vals in prop::collection::vec(-10.0f64..10.0, 24 * 24)) {
        let phi = ScalarField::from_values(grid(24), vals).unwrap();
        prop_assert!(divergence(&from_stream(&phi)).max_abs() <= 1e-12);
    }

    #[test]
    fn psor_output_is_a_complementarity_solution(a in prop::collection::vec(lobe(-1.5..1.5), 1..4)) {
        let q = bumps(grid(24), &a);
        let sol = psor_solve(&ObstacleData::new(q.clone()), &PsorOptions::tuned(q.grid())).unwrap();
        prop_assert!(sol.w.min() >= 0.0);
        prop_assert!(sol.residuals.complementarity <= 1e-10);
        prop_assert!(sol.residuals.free_equation <= 1e-9);
    }

    #[test]
    fn mesa_profile_is_bounded(f in prop::collection::vec(lobe(0.0..0.45), 1..3),
                               g in prop::collection::vec(lobe(0.0..0.5), 0..3)) {
        let grid = grid(24);
        let mp = mesa_profile(&bumps(grid, &f), &bumps(grid, &g), 1.0, &PsorOptions::tuned(&grid)).unwrap();
        prop_assert!(mp.u_limit.min() >= 0.0);
        prop_assert!(mp.u_limit.max() <= 1.0 + 1e-12);
    }

    #[test]
    fn pme_bounds_and_contraction(f1 in prop::collection::vec(lobe(0.0..0.4), 1..3),
                                  f2 in prop::collection::vec(lobe(0.0..0.4), 1..3),
                                  g in prop::collection::vec(lobe(0.0..0.3), 0..2),
                                  m in 2.0f64..12.0) {
        let grid = grid(24);
        let (f1, f2, g) = (bumps(grid, &f1), bumps(grid, &f2), bumps(grid, &g));
        let horizon = 0.2;
        let cfg = PmeConfig::new(0.02, vec![0.1]);
        let run = |f: &ScalarField| {
            let pr = PmeProblem::new(PowerLaw::new(m).unwrap(), f.clone(), Forcing::Steady(g.clone()), horizon).unwrap();
            pme_solve(&pr, &cfg).unwrap()
        };
        let (a, b) = (run(&f1), run(&f2));
        let d0 = l1_distance(&f1, &f2);
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            let bound = f1.max() + x.t * g.max() + 1e-6;
            prop_assert!(x.u.max() <= bound, "{} > {bound}", x.u.max());
            prop_assert!(x.u.min() >= -1e-10);
            prop_assert!(l1_distance(&x.u, &y.u) <= d0 * (1.0 + 1e-6) + 1e-12);
        }
    }

    #[test]
    fn curl_scheme_is_odd_and_conservative(h in prop::collection::vec(lobe(-0.02..0.02), 1..3),
                                           f in prop::collection::vec(lobe(-0.2..0.2), 0..3),
                                           p in 3.0f64..16.0) {
        let grid = grid(24);
        let h0 = from_stream(&streams(grid, &h));
        let forcing = from_stream(&streams(grid, &f));
        let solve = |s: f64| {
            let pr = CurlProblem::new(p, h0.scale(s), Forcing::Steady(forcing.scale(s)), 0.1).unwrap();
            curl_solve(&pr, &CurlConfig::new(grid.h(), vec![0.05])).unwrap()
        };
        let (a, b) = (solve(1.0), solve(-1.0));
        prop_assert!(a.max_divergence_drift() <= 1e-10);
        for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
            prop_assert_eq!(&x.h, &y.h.scale(-1.0));
        }
        prop_assert!(energy_budget(&a).holds(0.05));
    }
}
