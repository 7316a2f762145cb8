//! Property checks for risk functionals, regions, hulls and the portfolio reduction.

use drlp::geometry::{convex_hull, hausdorff_estimate};
use drlp::io::{parse_region_json, region_json};
use drlp::portfolio::{portfolio_solve, PortfolioOptions};
use drlp::region::{region_exact, support_function};
use drlp::risk::{
    check_majorization, eval_risk, expected_shortfall_weights, make_weights, weights_from_generator, DistortionSpec,
    WeightVector,
};
use drlp::solver::Status;
use drlp::Sample;
use proptest::prelude::*;

fn values(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, n)
}

fn coherent(n: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.01..1.0f64, n).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        let s: f64 = v.iter().sum();
        WeightVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn sample_and_weights(d: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = (Sample, WeightVector)> {
    n.prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), n),
            coherent(n),
        )
    })
    .prop_map(|(rows, w)| (Sample::new(rows).unwrap(), w))
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x / len).collect()
}

fn direction(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, d).prop_map(unit)
}

fn es_oracle(y: &[f64], alpha: f64) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let na = y.len() as f64 * alpha;
    let na = if (na - na.round()).abs() < 1e-9 { na.round() } else { na };
    let k = na.floor() as usize;
    let mut tail: f64 = s[..k].iter().sum();
    if k < s.len() {
        tail += (na - k as f64) * s[k];
    }
    -tail / na
}

proptest! {
    #[test]
    fn risk_translation_and_homogeneity(y in values(1..40), g in -5.0..5.0f64, lam in 0.0..10.0f64, seed in any::<u64>()) {
        let w = {
            let mut v: Vec<f64> = (0..y.len()).map(|i| 1.0 + ((seed >> (i % 60)) & 7) as f64).collect();
            v.sort_by(f64::total_cmp);
            let s: f64 = v.iter().sum();
            WeightVector::new(v.into_iter().map(|x| x / s).collect()).unwrap()
        };
        let r = eval_risk(&w, &y).unwrap();
        let shifted: Vec<f64> = y.iter().map(|v| v + g).collect();
        prop_assert!((eval_risk(&w, &shifted).unwrap() - (r - g)).abs() <= 1e-10);
        let scaled: Vec<f64> = y.iter().map(|v| v * lam).collect();
        let rs = eval_risk(&w, &scaled).unwrap();
        prop_assert!((rs - lam * r).abs() <= 1e-10 * (lam * r).abs().max(1.0));
    }

    #[test]
    fn risk_monotone_subadditive_comonotone(
        (y, z, u, w) in (2usize..30).prop_flat_map(|n| (
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-10.0..10.0f64, n),
            prop::collection::vec(-3.0..3.0f64, n),
            coherent(n),
        ))
    ) {
        let up: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b.abs()).collect();
        prop_assert!(eval_risk(&w, &y).unwrap() >= eval_risk(&w, &up).unwrap() - 1e-12);

        let sum: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a + b).collect();
        let lhs = eval_risk(&w, &sum).unwrap();
        prop_assert!(lhs <= eval_risk(&w, &y).unwrap() + eval_risk(&w, &z).unwrap() + 1e-10);

        let f: Vec<f64> = u.iter().map(|t| t.exp()).collect();
        let g: Vec<f64> = u.iter().map(|t| 2.0 * t + t.powi(3)).collect();
        let fg: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + b).collect();
        let sep = eval_risk(&w, &f).unwrap() + eval_risk(&w, &g).unwrap();
        prop_assert!((eval_risk(&w, &fg).unwrap() - sep).abs() <= 1e-10 * sep.abs().max(1.0));
    }

    #[test]
    fn expected_shortfall_matches_tail_average(y in values(1..60), alpha in 0.01..1.0f64) {
        let w = expected_shortfall_weights(alpha, y.len()).unwrap();
        let want = es_oracle(&y, alpha);
        prop_assert!((eval_risk(&w, &y).unwrap() - want).abs() <= 1e-12 * want.abs().max(1.0));
    }

    #[test]
    fn generator_reproduces_named_weights(n in 1usize..80, alpha in 0.01..1.0f64) {
        let es = make_weights(&DistortionSpec::ExpectedShortfall { alpha }, n).unwrap();
        let gen = weights_from_generator(&[(0.0, 0.0), (alpha, 1.0), (1.0, 1.0)], n).unwrap();
        for (a, b) in es.as_slice().iter().zip(gen.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        let mean = weights_from_generator(&[(0.0, 0.0), (1.0, 1.0)], n).unwrap();
        prop_assert!(mean.as_slice().iter().all(|w| (w - 1.0 / n as f64).abs() <= 1e-10));
    }

    #[test]
    fn region_contains_mean((s, w) in sample_and_weights(3, 1..30), p in direction(3)) {
        let m = s.mean();
        let pm: f64 = p.iter().zip(&m).map(|(a, b)| a * b).sum();
        prop_assert!(pm <= support_function(&s, &w, &p).unwrap() + 1e-9 * s.scale().max(1.0));
    }

    #[test]
    fn region_affine_equivariance(
        (s, w) in sample_and_weights(2, 1..25),
        a in prop::collection::vec(-2.0..2.0f64, 4),
        t in prop::collection::vec(-3.0..3.0f64, 2),
        p in direction(2),
    ) {
        let det = a[0] * a[3] - a[1] * a[2];
        prop_assume!(det.abs() > 0.1);
        let moved = s.map_rows(|r| vec![a[0] * r[0] + a[1] * r[1] + t[0], a[2] * r[0] + a[3] * r[1] + t[1]]).unwrap();
        let pt = vec![a[0] * p[0] + a[2] * p[1], a[1] * p[0] + a[3] * p[1]];
        let want = support_function(&s, &w, &pt).unwrap() + p[0] * t[0] + p[1] * t[1];
        let got = support_function(&moved, &w, &p).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0) * 10.0);
    }

    #[test]
    fn region_subadditive_and_monotone(
        (y, w) in sample_and_weights(2, 1..25),
        z in prop::collection::vec(prop::collection::vec(0.0..3.0f64, 2), 25),
        p in direction(2),
    ) {
        let n = y.n();
        let zs = Sample::new(z[..n].to_vec()).unwrap();
        let sum = Sample::new(y.rows().zip(zs.rows()).map(|(a, b)| vec![a[0] + b[0], a[1] + b[1]]).collect()).unwrap();
        let hy = support_function(&y, &w, &p).unwrap();
        let hz = support_function(&zs, &w, &p).unwrap();
        prop_assert!(support_function(&sum, &w, &p).unwrap() <= hy + hz + 1e-9);

        let q: Vec<f64> = p.iter().map(|v| v.abs()).collect();
        let lower = Sample::new(y.rows().zip(zs.rows()).map(|(a, b)| vec![a[0] - b[0], a[1] - b[1]]).collect()).unwrap();
        prop_assert!(support_function(&lower, &w, &q).unwrap() <= support_function(&y, &w, &q).unwrap() + 1e-9);
    }

    #[test]
    fn majorization_nests_regions(
        (s, wa) in sample_and_weights(3, 2..20),
        mix in 0.0..1.0f64,
        p in direction(3),
    ) {
        let n = s.n();
        let wb = WeightVector::new(wa.as_slice().iter().map(|x| mix * x + (1.0 - mix) / n as f64).collect()).unwrap();
        prop_assert!(check_majorization(&wa, &wb).unwrap());
        prop_assert!(support_function(&s, &wb, &p).unwrap() <= support_function(&s, &wa, &p).unwrap() + 1e-9);
    }

    #[test]
    fn hull_invariants(
        pts in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 3), 5..40),
        dirs in prop::collection::vec(direction(3), 100),
    ) {
        let h = convex_hull(&pts).unwrap();
        prop_assume!(!h.is_degenerate());
        let again = convex_hull(&h.vertices).unwrap();
        prop_assert_eq!(&again.vertices, &h.vertices);
        for f in &h.facets {
            prop_assert!(f.vertex_ids.len() >= 3);
        }
        for v in 0..h.vertices.len() {
            prop_assert!(h.facets.iter().filter(|f| f.vertex_ids.contains(&v)).count() >= 3);
        }
        for p in &dirs {
            let direct = pts.iter().map(|v| v.iter().zip(p).map(|(a, b)| a * b).sum::<f64>()).fold(f64::MIN, f64::max);
            prop_assert!((h.support(p) - direct).abs() <= 1e-9);
            prop_assert!((h.facet_support(p) - direct).abs() <= 1e-9);
        }
    }

    #[test]
    fn hausdorff_symmetry_and_triangle(
        a in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 3..15),
        b in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 3..15),
        c in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 2), 3..15),
        dirs in prop::collection::vec(direction(2), 50),
    ) {
        let (ha, hb, hc) = (convex_hull(&a).unwrap(), convex_hull(&b).unwrap(), convex_hull(&c).unwrap());
        let ab = hausdorff_estimate(&ha, &hb, &dirs).unwrap();
        prop_assert!((ab - hausdorff_estimate(&hb, &ha, &dirs).unwrap()).abs() <= 1e-12);
        let ac = hausdorff_estimate(&ha, &hc, &dirs).unwrap();
        let cb = hausdorff_estimate(&hc, &hb, &dirs).unwrap();
        prop_assert!(ab <= ac + cb + 1e-9);
    }

    #[test]
    fn region_json_round_trip((s, w) in sample_and_weights(2, 3..6)) {
        let r = region_exact(&s, &w).unwrap();
        let back = parse_region_json(&region_json(&r, None, None).unwrap()).unwrap();
        prop_assert_eq!(back.vertices, r.polytope.vertices);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn portfolio_budget_and_reported_risk(
        rows in prop::collection::vec(prop::collection::vec(-0.05..0.08f64, 3), 12..40),
        nonneg in any::<bool>(),
    ) {
        let s = Sample::new(rows).unwrap();
        prop_assume!(s.affine_dim() == 3);
        let w = expected_shortfall_weights(0.25, s.n()).unwrap();
        let opts = PortfolioOptions { nonneg, ..PortfolioOptions::default() };
        let res = portfolio_solve(&s, &w, 0.02, &opts).unwrap();
        prop_assert!(res.status != Status::None);
        if let Some(x) = &res.x {
            prop_assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            if nonneg {
                prop_assert!(x.iter().all(|v| *v >= -1e-9));
            }
            let mix: Vec<f64> = s.rows().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
            prop_assert!((res.risk.unwrap() - eval_risk(&w, &mix).unwrap()).abs() <= 1e-12);
        }
    }
}
