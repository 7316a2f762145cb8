//! Simulation experiments: convergence of sample regions as `n` grows, and
//! runtime scaling of the iterative solver.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::geometry::dot;
use crate::region::{region_support_oracle_with, support_unchecked, OracleOptions, Sample};
use crate::risk::{make_weights, DistortionSpec};
use crate::solver::{solve_iterative_with, IterOptions, RobustLp, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionKind {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    Mixture { components: Vec<DistributionKind>, weights: Vec<f64> },
    PointMass { point: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub kind: DistributionKind,
    pub seed: u64,
}

/// A validated distribution ready for sampling.
enum Sampler {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Gauss { mean: Vec<f64>, root: DMatrix<f64> },
    Mix { parts: Vec<Sampler>, cumulative: Vec<f64> },
    Point(Vec<f64>),
}

impl Sampler {
    fn build(kind: &DistributionKind) -> Result<(Self, usize)> {
        match kind {
            DistributionKind::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return domain("box bounds must be nonempty and of equal length");
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u)) {
                    return domain("box bounds must be finite with lower <= upper");
                }
                Ok((
                    Sampler::Box {
                        lower: lower.clone(),
                        upper: upper.clone(),
                    },
                    lower.len(),
                ))
            }
            DistributionKind::Gaussian { mean, covariance } => {
                let d = mean.len();
                if d == 0 || covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
                    return domain("covariance must be a d x d matrix matching the mean");
                }
                let m = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
                let scale = m.amax().max(f64::MIN_POSITIVE);
                if (0..d).any(|i| (0..d).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale)) {
                    return domain("covariance must be symmetric");
                }
                let eig = SymmetricEigen::new(m);
                if eig.eigenvalues.min() < -1e-10 * scale {
                    return domain("covariance must be positive semidefinite");
                }
                let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
                let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt);
                Ok((
                    Sampler::Gauss {
                        mean: mean.clone(),
                        root,
                    },
                    d,
                ))
            }
            DistributionKind::Mixture { components, weights } => {
                if components.is_empty() || components.len() != weights.len() {
                    return domain("mixture needs one weight per component");
                }
                if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return domain("mixture weights must lie on the simplex");
                }
                let mut parts = Vec::new();
                let mut dim = None;
                for c in components {
                    let (s, d) = Sampler::build(c)?;
                    if dim.is_some_and(|x| x != d) {
                        return domain("mixture components have different dimensions");
                    }
                    dim = Some(d);
                    parts.push(s);
                }
                let cumulative = weights
                    .iter()
                    .scan(0.0, |acc, w| {
                        *acc += w;
                        Some(*acc)
                    })
                    .collect();
                Ok((Sampler::Mix { parts, cumulative }, dim.unwrap_or(0)))
            }
            DistributionKind::PointMass { point } => {
                if point.is_empty() || point.iter().any(|x| !x.is_finite()) {
                    return domain("point mass needs a finite, nonempty point");
                }
                Ok((Sampler::Point(point.clone()), point.len()))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Sampler::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..*u) })
                .collect(),
            Sampler::Gauss { mean, root } => {
                let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(rng)).collect();
                (0..mean.len())
                    .map(|i| mean[i] + (0..mean.len()).map(|j| root[(i, j)] * z[j]).sum::<f64>())
                    .collect()
            }
            Sampler::Mix { parts, cumulative } => {
                let u: f64 = rng.gen();
                let k = cumulative.iter().position(|c| u < *c).unwrap_or(parts.len() - 1);
                parts[k].draw(rng)
            }
            Sampler::Point(p) => p.clone(),
        }
    }
}

impl DistributionKind {
    pub fn dim(&self) -> Result<usize> {
        Sampler::build(self).map(|(_, d)| d)
    }
}

/// `n` i.i.d. rows; identical for identical spec and seed.
pub fn draw_sample(dist: &DistributionSpec, n: usize) -> Result<Sample> {
    if n == 0 {
        return domain("sample size must be positive");
    }
    let (sampler, _) = Sampler::build(&dist.kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    Sample::new((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Mixes a base seed with cell coordinates.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `2d` signed axes followed by `count` quasi-uniform unit vectors.
///
/// Sets with the same seed are nested: a smaller count is a prefix.
pub fn direction_set(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * d + count);
    for k in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = s;
            dirs.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if d == 2 {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let start: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        dirs.extend((0..count).map(|k| {
            let t = start + k as f64 * golden;
            vec![t.cos(), t.sin()]
        }));
    } else if d == 1 {
        dirs.extend((0..count).map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }]));
    } else {
        while dirs.len() < 2 * d + count {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let l = dot(&v, &v).sqrt();
            if l > 1e-12 {
                dirs.push(v.into_iter().map(|x| x / l).collect());
            }
        }
    }
    dirs
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// One error per replication.
    pub errors: Vec<f64>,
    /// Replications whose region hit the round budget.
    pub inexact: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub reps: usize,
    pub n_dirs: usize,
    pub rows: Vec<ConvergenceRow>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Distance estimates between sample regions and a large-sample reference.
///
/// The reference support is evaluated straight from a sample of size
/// `10 * max(n_list)`. Each sample region is built with the oracle
/// construction and compared on `2d + n_dirs` directions.
pub fn convergence_experiment(
    dist: &DistributionSpec,
    spec: &DistortionSpec,
    n_list: &[usize],
    reps: usize,
    n_dirs: usize,
) -> Result<ConvergenceReport> {
    if n_list.is_empty() || n_list.windows(2).any(|p| p[0] >= p[1]) || n_list[0] == 0 {
        return domain("n_list must be nonempty, positive and strictly ascending");
    }
    if reps < 3 {
        return domain("at least three replications are required");
    }
    let d = dist.kind.dim()?;
    let n_ref = 10 * n_list[n_list.len() - 1];
    let dirs = direction_set(d, n_dirs, derive_seed(dist.seed, 0xd1, 0));
    let reference = draw_sample(
        &DistributionSpec {
            kind: dist.kind.clone(),
            seed: derive_seed(dist.seed, 0x4ef, 0),
        },
        n_ref,
    )?;
    let w_ref = make_weights(spec, n_ref)?;
    w_ref.require_coherent()?;
    let h_ref: Vec<f64> = dirs.par_iter().map(|p| support_unchecked(&reference, &w_ref, p)).collect();

    let cells: Vec<(usize, usize)> = n_list
        .iter()
        .flat_map(|&n| (0..reps).map(move |r| (n, r)))
        .collect();
    let results: Vec<(f64, bool)> = cells
        .par_iter()
        .map(|&(n, r)| -> Result<(f64, bool)> {
            let cell = DistributionSpec {
                kind: dist.kind.clone(),
                seed: derive_seed(dist.seed, n as u64, r as u64 + 1),
            };
            let s = draw_sample(&cell, n)?;
            let w = make_weights(spec, n)?;
            let region = region_support_oracle_with(&s, &w, &OracleOptions::default())?;
            let err = dirs
                .iter()
                .zip(&h_ref)
                .map(|(p, h)| (region.support(p) - h).abs())
                .fold(0.0_f64, f64::max);
            Ok((err, !region.exact))
        })
        .collect::<Result<_>>()?;

    let rows = n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let chunk = &results[i * reps..(i + 1) * reps];
            let errors: Vec<f64> = chunk.iter().map(|c| c.0).collect();
            ConvergenceRow {
                n,
                median: median(&errors),
                min: errors.iter().copied().fold(f64::INFINITY, f64::min),
                max: errors.iter().copied().fold(0.0, f64::max),
                inexact: chunk.iter().filter(|c| c.1).count(),
                errors,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        n_list: n_list.to_vec(),
        n_ref,
        reps,
        n_dirs: dirs.len(),
        rows,
    })
}

/// Mixture of a uniform box and a Gaussian, placed in the positive orthant
/// well away from the origin.
pub fn benchmark_distribution(d: usize, seed: u64) -> DistributionSpec {
    let mut cov = vec![vec![0.0; d]; d];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 0.04 } else { 0.01 };
        }
    }
    DistributionSpec {
        kind: DistributionKind::Mixture {
            components: vec![
                DistributionKind::UniformBox {
                    lower: vec![1.0; d],
                    upper: vec![2.0; d],
                },
                DistributionKind::Gaussian {
                    mean: vec![1.5; d],
                    covariance: cov,
                },
            ],
            weights: vec![0.5, 0.5],
        },
        seed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchCell {
    pub d: usize,
    pub n: usize,
    pub seconds: Vec<f64>,
    pub median_seconds: f64,
    pub iterations: Vec<usize>,
    pub statuses: Vec<Status>,
    pub timed_out: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub cells: Vec<BenchCell>,
    /// Least-squares slope of `log(median time)` against `log(n)`, per `d`.
    pub slopes: Vec<(usize, f64)>,
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(1e-9).ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Times the iterative solver on mixture data for every `(d, n)`.
///
/// Cells run one after another so timings do not compete for cores. A cell
/// whose replication exceeds `timeout` is marked and its remaining
/// replications skipped.
pub fn benchmark(
    d_list: &[usize],
    n_list: &[usize],
    spec: &DistortionSpec,
    reps: usize,
    seed: u64,
    timeout: Duration,
) -> Result<BenchReport> {
    if reps == 0 {
        return domain("at least one replication is required");
    }
    let mut cells = Vec::new();
    for &d in d_list {
        for &n in n_list {
            let mut cell = BenchCell {
                d,
                n,
                seconds: Vec::new(),
                median_seconds: f64::NAN,
                iterations: Vec::new(),
                statuses: Vec::new(),
                timed_out: false,
            };
            for r in 0..reps {
                let cell_seed = derive_seed(seed, (d * 1_000_003 + n) as u64, r as u64);
                let s = draw_sample(&benchmark_distribution(d, cell_seed), n)?;
                let w = make_weights(spec, n)?;
                let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
                let c: Vec<f64> = (0..d).map(|_| 1.0 + rng.gen_range(-0.2..0.2)).collect();
                let lp = RobustLp::new(c, 1.0, s, w)?;
                let start = Instant::now();
                let out = solve_iterative_with(
                    &lp,
                    &IterOptions {
                        max_rounds: None,
                        deadline: Some(start + timeout),
                    },
                )?;
                let t = start.elapsed();
                cell.seconds.push(t.as_secs_f64());
                cell.iterations.push(out.iterations);
                cell.statuses.push(out.status);
                if t > timeout {
                    cell.timed_out = true;
                    break;
                }
            }
            cell.median_seconds = median(&cell.seconds);
            cells.push(cell);
        }
    }
    let slopes = d_list
        .iter()
        .filter_map(|&d| {
            let row: Vec<&BenchCell> = cells.iter().filter(|c| c.d == d && !c.timed_out).collect();
            (row.len() >= 2).then(|| {
                let x: Vec<f64> = row.iter().map(|c| c.n as f64).collect();
                let y: Vec<f64> = row.iter().map(|c| c.median_seconds).collect();
                (d, log_log_slope(&x, &y))
            })
        })
        .collect();
    Ok(BenchReport { cells, slopes })
}
