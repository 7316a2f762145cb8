//! Weighted-mean trimmed regions of an empirical sample.
//!
//! For ascending weights `w` the region is the convex hull of all weighted
//! means `sum_j w[j] a[pi(j)]` over permutations `pi`. Its support function
//! in direction `p` sorts the projections `p . a[i]` ascending and pairs
//! them with `w`; the same pairing applied to the points themselves gives an
//! extreme point. Both constructions below are built on that.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::geometry::{affine_frame, complement, convex_hull, dot, Polytope, REL_TOL};
use crate::risk::WeightVector;

/// Largest sample size accepted by [`region_exact`] (`9! = 362880` permutations).
pub const PERMUTATION_LIMIT: usize = 9;

/// An `n x d` table of observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Sample {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return domain("sample must have at least one row");
        };
        let d = first.len();
        if d == 0 {
            return domain("sample rows must have at least one column");
        }
        let mut data = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return domain(format!("row {i} has {} columns, expected {d}", r.len()));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return domain(format!("row {i} has a non-finite entry"));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            n: rows.len(),
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= self.n as f64);
        m
    }

    /// Largest absolute entry.
    pub fn scale(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// Applies `f` to every row.
    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Sample> {
        Sample::new(self.rows().map(f).collect())
    }

    /// Dimension of the affine hull of the rows.
    pub fn affine_dim(&self) -> usize {
        affine_frame(&self.to_rows(), REL_TOL * self.scale()).1.len()
    }

    /// Projections `p . a[i]` for every row.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(p, r)).collect()
    }
}

fn check_inputs(sample: &Sample, w: &WeightVector, p: Option<&[f64]>) -> Result<()> {
    w.require_coherent()?;
    if w.len() != sample.n() {
        return domain(format!(
            "weight length {} does not match sample size {}",
            w.len(),
            sample.n()
        ));
    }
    if let Some(p) = p {
        if p.len() != sample.d() {
            return domain(format!(
                "direction has dimension {}, sample {}",
                p.len(),
                sample.d()
            ));
        }
    }
    Ok(())
}

/// Row indices ordered by ascending projection (ties by index) for the
/// positions `first..n`; the positions below `first` carry zero weight.
fn ascending_tail(proj: &[f64], first: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| proj[*a].total_cmp(&proj[*b]).then(a.cmp(b));
    let mut idx: Vec<usize> = (0..proj.len()).collect();
    if first > 0 && first < idx.len() {
        idx.select_nth_unstable_by(first, cmp);
    }
    let tail = &mut idx[first.min(proj.len())..];
    tail.sort_unstable_by(cmp);
    idx
}

/// Support value and extreme point in direction `p`, without validation.
pub(crate) fn support_and_point(sample: &Sample, w: &WeightVector, p: &[f64]) -> (f64, Vec<f64>) {
    let proj = sample.project(p);
    let first = w.first_active();
    let idx = ascending_tail(&proj, first);
    let mut point = vec![0.0; sample.d()];
    for j in first..idx.len() {
        let wj = w.as_slice()[j];
        point.iter_mut().zip(sample.row(idx[j])).for_each(|(a, b)| *a += wj * b);
    }
    (weighted_sum(&proj, &idx, w, first), point)
}

/// `sum_j w[j] proj[idx[j]]`, written as an offset from the smallest active
/// projection so that constant projections come out exactly.
fn weighted_sum(proj: &[f64], idx: &[usize], w: &WeightVector, first: usize) -> f64 {
    let Some(&lowest) = idx.get(first) else {
        return 0.0;
    };
    let base = proj[lowest];
    base + (first..idx.len())
        .map(|j| w.as_slice()[j] * (proj[idx[j]] - base))
        .sum::<f64>()
}

pub(crate) fn support_unchecked(sample: &Sample, w: &WeightVector, p: &[f64]) -> f64 {
    let proj = sample.project(p);
    let first = w.first_active();
    let idx = ascending_tail(&proj, first);
    weighted_sum(&proj, &idx, w, first)
}

/// Support function of the region: ascending projections weighted by `w`.
///
/// `p` need not be a unit vector; the value is positively homogeneous in `p`.
pub fn support_function(sample: &Sample, w: &WeightVector, p: &[f64]) -> Result<f64> {
    check_inputs(sample, w, Some(p))?;
    Ok(support_unchecked(sample, w, p))
}

/// The weighted mean attaining the support value in direction `p`.
///
/// When `p` induces ties among projections, the stable order by row index
/// decides; the result is then a boundary point, not necessarily a vertex.
pub fn extreme_point(sample: &Sample, w: &WeightVector, p: &[f64]) -> Result<Vec<f64>> {
    check_inputs(sample, w, Some(p))?;
    Ok(support_and_point(sample, w, p).1)
}

/// A weighted-mean region: the uncertainty set of the risk constraint.
#[derive(Debug, Clone)]
pub struct Region {
    pub polytope: Polytope,
    pub weights: WeightVector,
    /// False when the oracle construction ran out of rounds.
    pub exact: bool,
    pub rounds: usize,
    pub warning: Option<String>,
    /// Largest absolute sample entry.
    pub sample_scale: f64,
}

impl Region {
    pub fn dim(&self) -> usize {
        self.polytope.dim
    }

    pub fn is_degenerate(&self) -> bool {
        self.polytope.is_degenerate()
    }

    pub fn support(&self, p: &[f64]) -> f64 {
        self.polytope.support(p)
    }
}

/// Next permutation in lexicographic order; handles repeated labels.
fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Region as the hull of all permuted weighted means (`n <= 9`).
///
/// Equal weights are enumerated once, so the work is the number of distinct
/// weight assignments rather than `n!`.
pub fn region_exact(sample: &Sample, w: &WeightVector) -> Result<Region> {
    check_inputs(sample, w, None)?;
    let n = sample.n();
    if n > PERMUTATION_LIMIT {
        return Err(Error::Budget {
            n,
            max: PERMUTATION_LIMIT,
        });
    }
    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    for &wj in w.as_slice() {
        match values.last() {
            Some(&last) if (wj - last).abs() <= 1e-15 => {}
            _ => values.push(wj),
        }
        labels.push(values.len() - 1);
    }
    let mut points = Vec::new();
    loop {
        let mut p = vec![0.0; sample.d()];
        for (i, &l) in labels.iter().enumerate() {
            let wl = values[l];
            if wl != 0.0 {
                p.iter_mut().zip(sample.row(i)).for_each(|(a, b)| *a += wl * b);
            }
        }
        points.push(p);
        if !next_permutation(&mut labels) {
            break;
        }
    }
    Ok(Region {
        polytope: convex_hull(&points)?,
        weights: w.clone(),
        exact: true,
        rounds: 0,
        warning: None,
        sample_scale: sample.scale(),
    })
}

/// Queries the oracle along both normals of every direction missing from the
/// affine hull of `points` and appends the answers that leave it. Returns
/// false when none do, in which case the region itself is flat there.
pub(crate) fn widen_flat(sample: &Sample, w: &WeightVector, points: &mut Vec<Vec<f64>>, tol: f64) -> bool {
    let (_, basis) = affine_frame(points, tol);
    let origin = points[0].clone();
    let mut added = false;
    for q in complement(&basis, sample.d()) {
        let level = dot(&q, &origin);
        for sgn in [1.0, -1.0] {
            let p: Vec<f64> = q.iter().map(|x| sgn * x).collect();
            let (h, e) = support_and_point(sample, w, &p);
            if h - sgn * level > tol {
                points.push(e);
                added = true;
            }
        }
    }
    added
}

/// Settings of the support-oracle construction.
#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub max_rounds: usize,
    /// Random seed directions in addition to the `2d` axis directions.
    pub random_dirs: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            max_rounds: 200,
            random_dirs: 16,
            seed: 0x5eed,
        }
    }
}

/// Region by hull refinement against the extreme-point oracle.
pub fn region_support_oracle(sample: &Sample, w: &WeightVector, max_rounds: usize) -> Result<Region> {
    region_support_oracle_with(
        sample,
        w,
        &OracleOptions {
            max_rounds,
            ..OracleOptions::default()
        },
    )
}

fn unit_gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let len = dot(&v, &v).sqrt();
        if len > 1e-12 {
            return v.into_iter().map(|x| x / len).collect();
        }
    }
}

/// Hull refinement: hull the current points, ask the oracle for the extreme
/// point beyond every unverified facet, add those that stick out by more
/// than `1e-9 * scale`, repeat until no facet is violated.
pub fn region_support_oracle_with(sample: &Sample, w: &WeightVector, opts: &OracleOptions) -> Result<Region> {
    check_inputs(sample, w, None)?;
    let d = sample.d();
    let scale = sample.scale();
    let rows = sample.to_rows();
    let (_, basis) = affine_frame(&rows, REL_TOL * scale);
    if basis.len() < d {
        return degenerate_region(sample, w, opts, basis);
    }

    let tol = REL_TOL * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = s;
            dirs.push(e);
        }
    }
    dirs.extend((0..opts.random_dirs).map(|_| unit_gaussian(&mut rng, d)));
    let mut points: Vec<Vec<f64>> = dirs.par_iter().map(|p| support_and_point(sample, w, p).1).collect();

    let mut verified: HashSet<Vec<i64>> = HashSet::new();
    let key = |n: &[f64], c: f64| -> Vec<i64> {
        let mut k: Vec<i64> = n.iter().map(|x| (x * 1e9).round() as i64).collect();
        k.push((c / scale.max(f64::MIN_POSITIVE) * 1e9).round() as i64);
        k
    };

    for round in 1..=opts.max_rounds {
        let poly = convex_hull(&points)?;
        if poly.is_degenerate() {
            if widen_flat(sample, w, &mut points, tol) {
                continue;
            }
            // Uniform weights collapse the region to the mean.
            return Ok(Region {
                polytope: poly,
                weights: w.clone(),
                exact: true,
                rounds: round,
                warning: Some("region is not full-dimensional".into()),
                sample_scale: scale,
            });
        }
        let pending: Vec<(usize, Vec<i64>)> = poly
            .facets
            .iter()
            .enumerate()
            .map(|(i, f)| (i, key(&f.normal, f.intercept)))
            .filter(|(_, k)| !verified.contains(k))
            .collect();
        let answers: Vec<(f64, Vec<f64>)> = pending
            .par_iter()
            .map(|(i, _)| {
                let out: Vec<f64> = poly.facets[*i].normal.iter().map(|x| -x).collect();
                support_and_point(sample, w, &out)
            })
            .collect();
        let mut added = 0;
        for ((i, k), (h, point)) in pending.into_iter().zip(answers) {
            if h > -poly.facets[i].intercept + tol {
                points.push(point);
                added += 1;
            } else {
                verified.insert(k);
            }
        }
        if added == 0 {
            return Ok(Region {
                polytope: poly,
                weights: w.clone(),
                exact: true,
                rounds: round,
                warning: None,
                sample_scale: scale,
            });
        }
    }
    Ok(Region {
        polytope: convex_hull(&points)?,
        weights: w.clone(),
        exact: false,
        rounds: opts.max_rounds,
        warning: Some(format!(
            "round budget of {} exhausted before every facet was verified",
            opts.max_rounds
        )),
        sample_scale: scale,
    })
}

/// Runs the oracle inside the sample's affine hull and lifts the result back.
fn degenerate_region(
    sample: &Sample,
    w: &WeightVector,
    opts: &OracleOptions,
    basis: Vec<Vec<f64>>,
) -> Result<Region> {
    let origin = sample.row(0).to_vec();
    let detail = format!(
        "sample spans an affine subspace of dimension {} in R^{}",
        basis.len(),
        sample.d()
    );
    let (points, exact, rounds) = if basis.is_empty() {
        (vec![origin.clone()], true, 0)
    } else {
        let reduced = sample.map_rows(|r| {
            let rel: Vec<f64> = r.iter().zip(&origin).map(|(x, o)| x - o).collect();
            basis.iter().map(|q| dot(q, &rel)).collect()
        })?;
        let inner = region_support_oracle_with(&reduced, w, opts)?;
        let lifted = inner
            .polytope
            .vertices
            .iter()
            .map(|c| {
                let mut v = origin.clone();
                for (ck, q) in c.iter().zip(&basis) {
                    v.iter_mut().zip(q).for_each(|(a, b)| *a += ck * b);
                }
                v
            })
            .collect();
        (lifted, inner.exact, inner.rounds)
    };
    Ok(Region {
        polytope: convex_hull(&points)?,
        weights: w.clone(),
        exact,
        rounds,
        warning: Some(detail),
        sample_scale: sample.scale(),
    })
}
