//! Shared fixtures and a brute-force LP oracle for the integration tests.
#![allow(dead_code)]

use drlp::risk::{expected_shortfall_weights, weights_from_generator, WeightVector};
use drlp::Sample;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Finite,
    Infinite,
    None,
}

#[derive(Debug, Clone)]
pub struct LpAnswer {
    pub status: LpStatus,
    pub value: f64,
    pub x: Vec<f64>,
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    rec(0, m, k, &mut cur, &mut out);
    out
}

fn det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Solves `a x = r` for a square system; `None` when near-singular.
fn solve_square(a: &[&[f64]], r: &[f64]) -> Option<Vec<f64>> {
    let d = r.len();
    let scale: f64 = a.iter().map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt()).product();
    match d {
        1 => (a[0][0].abs() > 1e-12 * scale).then(|| vec![r[0] / a[0][0]]),
        2 => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            (det.abs() > 1e-10 * scale).then(|| {
                vec![(r[0] * a[1][1] - a[0][1] * r[1]) / det, (a[0][0] * r[1] - r[0] * a[1][0]) / det]
            })
        }
        3 => {
            let det = det3(a[0], a[1], a[2]);
            if det.abs() <= 1e-10 * scale {
                return None;
            }
            let mut x = vec![0.0; 3];
            for (k, xk) in x.iter_mut().enumerate() {
                let mut m = [[0.0; 3]; 3];
                for i in 0..3 {
                    m[i].copy_from_slice(a[i]);
                    m[i][k] = r[i];
                }
                *xk = det3(&m[0], &m[1], &m[2]) / det;
            }
            Some(x)
        }
        _ => {
            let m = DMatrix::from_fn(d, d, |i, j| a[i][j]);
            let sv = m.clone().svd(false, false).singular_values;
            if sv.min() <= 1e-10 * sv.max() {
                return None;
            }
            m.lu().solve(&DVector::from_column_slice(r)).map(|v| v.iter().copied().collect())
        }
    }
}

/// `min c.x` over `{x : a.x >= b for a in points} (and x >= 0)` by vertex
/// and extreme-ray enumeration.
pub fn brute_force_lp(points: &[Vec<f64>], c: &[f64], b: f64, nonneg: bool) -> LpAnswer {
    let d = c.len();
    let mut rows: Vec<(Vec<f64>, f64)> = points.iter().map(|a| (a.clone(), b)).collect();
    if nonneg {
        for k in 0..d {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            rows.push((e, 0.0));
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dotp = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norms: Vec<f64> = rows.iter().map(|(a, _)| norm(a)).collect();
    // Checks the last violated row first; most candidates fail on it.
    let feasible = |x: &[f64], hint: &mut usize| {
        let nx = norm(x);
        let ok = |i: usize| {
            let (a, r) = &rows[i];
            dotp(a, x) >= r - 1e-9 * (norms[i] * nx + r.abs() + 1.0)
        };
        if !ok(*hint) {
            return false;
        }
        for i in 0..rows.len() {
            if !ok(i) {
                *hint = i;
                return false;
            }
        }
        true
    };

    let m = rows.len();
    let best: Option<(f64, Vec<f64>)> = (0..m)
        .into_par_iter()
        .filter_map(|first| {
            let mut local: Option<(f64, Vec<f64>)> = None;
            let mut idx: Vec<usize> = (first..first + d).collect();
            if idx[d - 1] >= m {
                return None;
            }
            let mut a: Vec<&[f64]> = Vec::with_capacity(d);
            let mut r: Vec<f64> = Vec::with_capacity(d);
            let mut hint = 0;
            loop {
                a.clear();
                r.clear();
                for &i in &idx {
                    a.push(&rows[i].0);
                    r.push(rows[i].1);
                }
                if let Some(x) = solve_square(&a, &r) {
                    if feasible(&x, &mut hint) {
                        let v = dotp(c, &x);
                        if local.as_ref().map_or(true, |(bv, _)| v < *bv) {
                            local = Some((v, x));
                        }
                    }
                }
                // Advance positions 1..d, keeping idx[0] = first.
                let mut k = d - 1;
                loop {
                    if k == 0 {
                        return local;
                    }
                    if idx[k] < m - (d - k) {
                        idx[k] += 1;
                        for t in k + 1..d {
                            idx[t] = idx[t - 1] + 1;
                        }
                        break;
                    }
                    k -= 1;
                }
            }
        })
        .reduce_with(|p, q| if q.0 < p.0 { q } else { p });
    let Some((value, x)) = best else {
        return LpAnswer { status: LpStatus::None, value: f64::NAN, x: vec![] };
    };

    let cn = norm(c);
    let mut unbounded = false;
    for sub in subsets(rows.len(), d - 1) {
        let r = if d == 1 {
            vec![1.0]
        } else {
            let m = DMatrix::from_fn(d - 1, d, |i, j| rows[sub[i]].0[j]);
            let svd = m.svd(false, true);
            let vt = svd.v_t.unwrap();
            let sv = &svd.singular_values;
            if sv.min() <= 1e-10 * sv.max() {
                continue;
            }
            // Full SVD of a (d-1) x d matrix has d-1 rows in v_t; complete the basis.
            let mut q = vec![0.0; d];
            let basis: Vec<Vec<f64>> = (0..d - 1).map(|i| vt.row(i).iter().copied().collect()).collect();
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                for bv in &basis {
                    let t = dotp(&e, bv);
                    e.iter_mut().zip(bv).for_each(|(a, b)| *a -= t * b);
                }
                if norm(&e) > norm(&q) {
                    q = e;
                }
            }
            let l = norm(&q);
            q.into_iter().map(|v| v / l).collect()
        };
        for s in [1.0, -1.0] {
            let ray: Vec<f64> = r.iter().map(|v| s * v).collect();
            let in_cone = rows.iter().all(|(a, _)| dotp(a, &ray) >= -1e-9 * norm(a));
            if in_cone && dotp(c, &ray) < -1e-9 * cn {
                unbounded = true;
            }
        }
    }
    if unbounded {
        LpAnswer { status: LpStatus::Infinite, value: f64::NEG_INFINITY, x: vec![] }
    } else {
        LpAnswer { status: LpStatus::Finite, value, x }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_sample(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f64) -> Sample {
    Sample::new(
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0) + shift).collect())
            .collect(),
    )
    .unwrap()
}

pub fn unit_directions(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if l > 1e-3 && l <= 1.0 {
                break v.into_iter().map(|x| x / l).collect();
            }
        })
        .collect()
}

/// A random coherent weight vector: expected shortfall or a random concave generator.
pub fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> WeightVector {
    if rng.gen_bool(0.5) {
        let alpha = rng.gen_range(0.15..0.95);
        expected_shortfall_weights(alpha, n).unwrap()
    } else {
        let mut inc: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        inc.sort_by(|a, b| a.total_cmp(b));
        let total: f64 = inc.iter().sum();
        WeightVector::new(inc.into_iter().map(|x| x / total).collect()).unwrap()
    }
}

pub fn concave_generator_weights(n: usize) -> WeightVector {
    weights_from_generator(&[(0.0, 0.0), (0.3, 0.6), (1.0, 1.0)], n).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
