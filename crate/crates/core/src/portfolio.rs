//! Mean-risk portfolio selection: maximise expected return subject to a
//! distortion-risk budget, through the robust solver.
//!
//! The risk constraint `rho(r.x) <= rho0` is the robust constraint
//! `l.x <= rho0` over the region of the loss rows `l = -r`. In minimisation
//! form this is `min (-mean).x  s.t.  a.x >= -rho0` over the region of the
//! return rows. The solution is then rescaled to a unit budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::geometry::dot;
use crate::region::Sample;
use crate::risk::{eval_risk, value_at_risk, WeightVector};
use crate::solver::{solve, Mode, RobustLp, SolveOutcome, Status};

/// Size of the seeded perturbation applied to riskless columns on request.
pub const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, Default)]
pub struct PortfolioOptions {
    pub nonneg: bool,
    /// Perturb constant columns with this seed instead of rejecting them.
    pub jitter_seed: Option<u64>,
    /// Asset names used in diagnostics.
    pub names: Option<Vec<String>>,
    /// Defaults to exact mode for `n <= 200`, iterative above.
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PortfolioMetrics {
    pub expected_return: f64,
    pub risk: f64,
    /// Empirical value at risk, reported for expected-shortfall weights.
    pub var_level: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PortfolioResult {
    pub status: Status,
    /// Allocation with unit budget.
    pub x: Option<Vec<f64>>,
    /// Solver output before rescaling.
    pub raw_x: Option<Vec<f64>>,
    pub expected_return: Option<f64>,
    pub risk: Option<f64>,
    pub var_level: Option<f64>,
    /// `rho(r.x) <= rho0` holds for the unscaled solution.
    pub feasible_before_scaling: Option<bool>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub outcome: Option<SolveOutcome>,
}

fn asset_name(opts: &PortfolioOptions, j: usize) -> String {
    opts.names
        .as_ref()
        .and_then(|n| n.get(j).cloned())
        .unwrap_or_else(|| format!("column {}", j + 1))
}

/// Mean, risk and (for expected shortfall) value at risk of the mix `x`.
pub fn portfolio_report(x: &[f64], returns: &Sample, w: &WeightVector) -> Result<PortfolioMetrics> {
    if x.len() != returns.d() {
        return domain(format!("allocation has {} entries, returns {} assets", x.len(), returns.d()));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return domain(format!("allocation sums to {total}, expected 1"));
    }
    let s = returns.project(x);
    let var_level = match w.es_alpha() {
        Some(alpha) => Some(value_at_risk(&s, alpha)?),
        None => None,
    };
    Ok(PortfolioMetrics {
        expected_return: s.iter().sum::<f64>() / s.len() as f64,
        risk: eval_risk(w, &s)?,
        var_level,
    })
}

/// Groups identical columns; returns the first index of each group and the
/// group of every column.
fn column_groups(cols: &[Vec<f64>]) -> (Vec<usize>, Vec<usize>) {
    let mut keep: Vec<usize> = Vec::new();
    let mut group = Vec::with_capacity(cols.len());
    for (j, c) in cols.iter().enumerate() {
        match keep.iter().position(|&k| cols[k] == *c) {
            Some(g) => group.push(g),
            None => {
                group.push(keep.len());
                keep.push(j);
            }
        }
    }
    (keep, group)
}

fn finish(mut res: PortfolioResult, x: Vec<f64>, returns: &Sample, w: &WeightVector) -> Result<PortfolioResult> {
    let m = portfolio_report(&x, returns, w)?;
    res.expected_return = Some(m.expected_return);
    res.risk = Some(m.risk);
    res.var_level = m.var_level;
    res.x = Some(x);
    Ok(res)
}

/// Maximises mean return under `rho(r.x) <= rho0` and rescales to `sum x = 1`.
pub fn portfolio_solve(
    returns: &Sample,
    w: &WeightVector,
    rho0: f64,
    opts: &PortfolioOptions,
) -> Result<PortfolioResult> {
    w.require_coherent()?;
    if w.len() != returns.n() {
        return domain(format!(
            "weight length {} does not match {} scenarios",
            w.len(),
            returns.n()
        ));
    }
    if !rho0.is_finite() {
        return domain("risk bound must be finite");
    }
    let d = returns.d();
    let mut res = PortfolioResult {
        status: Status::Finite,
        x: None,
        raw_x: None,
        expected_return: None,
        risk: None,
        var_level: None,
        feasible_before_scaling: None,
        notes: Vec::new(),
        outcome: None,
    };
    if d == 1 {
        res.notes.push("single asset: the budget fixes the allocation".into());
        return finish(res, vec![1.0], returns, w);
    }

    let mut cols: Vec<Vec<f64>> = (0..d).map(|j| returns.column(j)).collect();
    let scale = returns.scale().max(f64::MIN_POSITIVE);
    for (j, col) in cols.iter_mut().enumerate() {
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        if hi - lo > 1e-12 * scale {
            continue;
        }
        let name = asset_name(opts, j);
        let Some(seed) = opts.jitter_seed else {
            return Err(Error::Degenerate {
                dim: d,
                affine_dim: d - 1,
                detail: format!("{name} is riskless (constant returns); pass a jitter seed to perturb it"),
            });
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ j as u64);
        for v in col.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += JITTER * z;
        }
        res.notes.push(format!("{name} is riskless; perturbed by {JITTER:e}"));
    }

    let (keep, group) = column_groups(&cols);
    if keep.len() < d {
        for (j, g) in group.iter().enumerate() {
            if keep[*g] != j {
                res.notes.push(format!(
                    "{} duplicates {}; its weight is folded into the latter",
                    asset_name(opts, j),
                    asset_name(opts, keep[*g])
                ));
            }
        }
    }
    let expand = |xr: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; d];
        for (g, &j) in keep.iter().enumerate() {
            x[j] = xr[g];
        }
        x
    };
    let work = Sample::new(
        (0..returns.n())
            .map(|i| keep.iter().map(|&j| cols[j][i]).collect())
            .collect(),
    )?;
    let full = Sample::new((0..returns.n()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())?;
    if keep.len() == 1 {
        res.notes.push("all assets identical after merging duplicates".into());
        return finish(res, expand(&[1.0]), &full, w);
    }
    let kd = keep.len();
    let affine = work.affine_dim();
    if affine < kd {
        return Err(Error::Degenerate {
            dim: kd,
            affine_dim: affine,
            detail: "asset returns are affinely dependent across scenarios".into(),
        });
    }

    let mean = work.mean();
    let c: Vec<f64> = mean.iter().map(|m| -m).collect();
    if c.iter().all(|v| *v == 0.0) {
        return domain("all mean returns are zero; the objective is constant");
    }
    let lp = RobustLp::new(c, -rho0, work.clone(), w.clone())?.with_nonneg(opts.nonneg);
    let mode = opts
        .mode
        .unwrap_or(if returns.n() <= 200 { Mode::Exact } else { Mode::Iterative });
    let out = solve(&lp, mode)?;
    res.status = out.status;
    match (out.status, out.x.clone()) {
        (Status::Finite, Some(xr)) => {
            let raw = expand(&xr);
            let total: f64 = raw.iter().sum();
            let risk_raw = eval_risk(w, &full.project(&raw))?;
            res.feasible_before_scaling = Some(risk_raw <= rho0 + 1e-8 * rho0.abs().max(scale));
            res.raw_x = Some(raw.clone());
            res.outcome = Some(out);
            let l1: f64 = raw.iter().map(|v| v.abs()).sum();
            if !(total > 1e-12 * l1.max(f64::MIN_POSITIVE)) {
                res.notes.push(format!(
                    "solver allocation sums to {total:e}; it cannot be rescaled to a unit budget"
                ));
                return Ok(res);
            }
            let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
            finish(res, x, &full, w)
        }
        (status, _) => {
            res.notes.push(match status {
                Status::Infinite => {
                    "unbounded: some allocation with positive mean has risk below the bound at every scale".into()
                }
                _ => "infeasible risk bound".into(),
            });
            res.notes.extend(out.trace.iter().cloned());
            res.outcome = Some(out);
            Ok(res)
        }
    }
}

/// Best grid allocation on the unit simplex with `rho <= rho0 + 1e-12`.
///
/// Ties in mean return keep the lexicographically first allocation. Returns
/// `None` when no grid point is feasible.
pub fn grid_oracle(returns: &Sample, w: &WeightVector, rho0: f64, step: f64) -> Result<Option<Vec<f64>>> {
    let d = returns.d();
    if d > 3 {
        return domain("grid search supports at most three assets");
    }
    if !(step > 0.0 && step <= 0.005) {
        return domain("grid step must lie in (0, 0.005]");
    }
    w.require_coherent()?;
    let m = (1.0 / step).round() as usize;
    let mean = returns.mean();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |x: Vec<f64>| -> Result<()> {
        let risk = eval_risk(w, &returns.project(&x))?;
        if risk <= rho0 + 1e-12 {
            let v = dot(&mean, &x);
            if best.as_ref().map_or(true, |(bv, _)| v > *bv) {
                best = Some((v, x));
            }
        }
        Ok(())
    };
    match d {
        1 => consider(vec![1.0])?,
        2 => {
            for i in 0..=m {
                let a = i as f64 / m as f64;
                consider(vec![a, 1.0 - a])?;
            }
        }
        _ => {
            for i in 0..=m {
                for j in 0..=m - i {
                    let (a, b) = (i as f64 / m as f64, j as f64 / m as f64);
                    consider(vec![a, b, (m - i - j) as f64 / m as f64])?;
                }
            }
        }
    }
    Ok(best.map(|(_, x)| x))
}
