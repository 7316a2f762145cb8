mod common;

use common::*;
use drlp::region::region_exact;
use drlp::solver::{feasibility_margin, solve_iterative, solve_ray, RobustLp, Status};
use rand::Rng;

fn to_lp(s: Status) -> LpStatus {
    match s {
        Status::Finite => LpStatus::Finite,
        Status::Infinite => LpStatus::Infinite,
        Status::None => LpStatus::None,
    }
}

/// Goal vector pointing into the sample cloud half of the time, so finite cases are common.
fn goal(r: &mut rand_chacha::ChaCha8Rng, s: &drlp::Sample) -> Vec<f64> {
    let d = s.d();
    if r.gen_bool(0.5) {
        let m = s.mean();
        m.iter().map(|x| x + r.gen_range(-0.3..0.3)).collect()
    } else {
        (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()
    }
}

#[test]
fn ray_and_iterative_agree_with_brute_force() {
    let mut r = rng(2024);
    let mut counts = [0usize; 3];
    for case in 0..150 {
        let d = 2 + case % 2;
        let n = r.gen_range(d + 1..=6);
        let shift = r.gen_range(-0.5..1.5);
        let s = uniform_sample(&mut r, n, d, shift);
        let w = random_weights(&mut r, n);
        let c = goal(&mut r, &s);
        let b = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let nonneg = r.gen_bool(0.3);
        let region = region_exact(&s, &w).unwrap();
        let lp = RobustLp::new(c.clone(), b, s.clone(), w.clone()).unwrap().with_nonneg(nonneg);
        let out = solve_ray(&lp, &region).unwrap();
        let oracle = brute_force_lp(&region.polytope.vertices, &c, b, nonneg);
        assert_eq!(to_lp(out.status), oracle.status, "case {case}: {out:?} vs {oracle:?}");
        counts[out.status as usize] += 1;
        if out.status == Status::Finite {
            let v = out.value.unwrap();
            assert!(rel_close(v, oracle.value, 1e-7), "case {case}: {v} vs {}", oracle.value);
            let x = out.x.as_ref().unwrap();
            assert!(feasibility_margin(&s, &w, x, b).unwrap() >= -1e-8 * lp.scale());
            for a in &region.polytope.vertices {
                let ax: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
                assert!(ax >= b - 1e-8 * lp.scale());
            }
        }
        let it = solve_iterative(&lp, None).unwrap_or_else(|e| panic!("case {case}: {e} {:?} {:?}", s.to_rows(), w.as_slice()));
        assert!(it.certified, "case {case}");
        assert_eq!(it.status, out.status, "case {case}: iterative {:?}", it.trace);
        if let (Some(a), Some(b)) = (out.value, it.value) {
            assert!(rel_close(a, b, 1e-7), "case {case}: {a} vs {b}");
        }
    }
    assert!(counts.iter().all(|&k| k >= 5), "status mix {counts:?}");
}

#[test]
fn robust_value_dominates_every_scenario_lp() {
    let mut r = rng(7);
    let mut checked = 0;
    for _ in 0..60 {
        let s = uniform_sample(&mut r, 6, 2, 0.8);
        let w = random_weights(&mut r, 6);
        let c = goal(&mut r, &s);
        let region = region_exact(&s, &w).unwrap();
        let lp = RobustLp::new(c.clone(), 1.0, s.clone(), w).unwrap();
        let out = solve_ray(&lp, &region).unwrap();
        let Some(v) = out.value else { continue };
        for u in &region.polytope.vertices {
            let single = brute_force_lp(std::slice::from_ref(u), &c, 1.0, false);
            if single.status == LpStatus::Finite {
                assert!(v >= single.value - 1e-9);
            }
        }
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn joint_positive_scaling_keeps_the_solution() {
    let mut r = rng(99);
    for _ in 0..40 {
        let s = uniform_sample(&mut r, 6, 3, 0.7);
        let w = random_weights(&mut r, 6);
        let c = goal(&mut r, &s);
        let t = r.gen_range(0.1..10.0);
        let scaled = s.map_rows(|row| row.iter().map(|x| t * x).collect()).unwrap();
        let a = solve_ray(&RobustLp::new(c.clone(), 1.0, s.clone(), w.clone()).unwrap(), &region_exact(&s, &w).unwrap())
            .unwrap();
        let b = solve_ray(&RobustLp::new(c, t, scaled.clone(), w.clone()).unwrap(), &region_exact(&scaled, &w).unwrap())
            .unwrap();
        assert_eq!(a.status, b.status);
        if let (Some(fa), Some(fb)) = (&a.active_facet, &b.active_facet) {
            assert_eq!(fa.index, fb.index);
            let (xa, xb) = (a.x.unwrap(), b.x.unwrap());
            assert!(xa.iter().zip(&xb).all(|(p, q)| (p - q).abs() <= 1e-9 * p.abs().max(1.0)));
            assert!(rel_close(a.value.unwrap(), b.value.unwrap(), 1e-9));
        }
    }
}

#[test]
fn active_facet_normal_is_a_vertex_of_the_feasible_set() {
    let mut r = rng(5);
    let mut checked = 0;
    for _ in 0..60 {
        let s = uniform_sample(&mut r, 5, 2, 0.9);
        let w = random_weights(&mut r, 5);
        let c = goal(&mut r, &s);
        let region = region_exact(&s, &w).unwrap();
        let out = solve_ray(&RobustLp::new(c, 1.0, s, w).unwrap(), &region).unwrap();
        let (Some(f), Some(x)) = (out.active_facet, out.x) else { continue };
        // x is tight on both endpoints of the facet, which are independent in d = 2.
        let tight = f
            .normal
            .iter()
            .zip(&x)
            .map(|(n, v)| n * v)
            .sum::<f64>();
        assert!(tight > 0.0);
        let ends: Vec<&Vec<f64>> = region
            .polytope
            .vertices
            .iter()
            .filter(|v| (v.iter().zip(&f.normal).map(|(a, n)| a * n).sum::<f64>() - f.intercept).abs() < 1e-9)
            .collect();
        assert_eq!(ends.len(), 2);
        for a in ends {
            let ax: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((ax - 1.0).abs() < 1e-9);
        }
        checked += 1;
    }
    assert!(checked > 10);
}
