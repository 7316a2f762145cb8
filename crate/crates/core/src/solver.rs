//! Robust linear program `min c.x  s.t.  a.x >= b  for all a in U`.
//!
//! `U` is the weighted-mean region of a sample. The solver shoots the goal
//! ray `{lambda c : lambda > 0}` against the facets of `U` (or of
//! `U + R^d_+` when `x >= 0` is required): for `b > 0` the entry facet is
//! optimal, for `b < 0` the exit facet, and the optimum is the facet normal
//! rescaled to `b / intercept`. A miss means the program is unbounded; an
//! origin inside `U` with `b > 0` means it is infeasible.
//!
//! [`solve_iterative`] never builds `U`. It grows a working set of extreme
//! points by cutting planes until the ray solution on their hull is feasible
//! for the whole region.

use std::time::Instant;

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::geometry::{convex_hull, dot, Facet, Polytope, REL_TOL};
use crate::region::{
    region_exact, region_support_oracle_with, support_and_point, widen_flat, support_unchecked, OracleOptions, Region, Sample,
    PERMUTATION_LIMIT,
};
use crate::risk::WeightVector;

/// Parallel-facet cutoff for `|c . n| / |c|`.
const PARALLEL_TOL: f64 = 1e-12;
/// Sign cutoff for intercepts when selecting the efficient set.
const INTERCEPT_TOL: f64 = 1e-12;
/// Relative gap under which two ray parameters count as tied.
const TIE_TOL: f64 = 1e-12;
/// Feasibility tolerance on margins, relative to the problem scale.
pub const MARGIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Finite,
    Infinite,
    None,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Finite => "finite",
            Status::Infinite => "infinite",
            Status::None => "none",
        }
    }
}

/// A robust program with one risk constraint.
///
/// Stored in minimisation form. `maximize` records that the problem came
/// through [`transform_max`], so reported values are negated back.
#[derive(Debug, Clone)]
pub struct RobustLp {
    pub c: Vec<f64>,
    pub b: f64,
    pub sample: Sample,
    pub weights: WeightVector,
    pub nonneg: bool,
    pub maximize: bool,
}

impl RobustLp {
    /// `min c.x  s.t.  a.x >= b` for every `a` in the region of `sample`.
    pub fn new(c: Vec<f64>, b: f64, sample: Sample, weights: WeightVector) -> Result<Self> {
        if c.len() != sample.d() {
            return domain(format!("goal vector has dimension {}, sample {}", c.len(), sample.d()));
        }
        if c.iter().any(|x| !x.is_finite()) || !b.is_finite() {
            return domain("goal vector and right-hand side must be finite");
        }
        if c.iter().all(|x| *x == 0.0) {
            return domain("goal vector must be nonzero");
        }
        weights.require_coherent()?;
        if weights.len() != sample.n() {
            return domain(format!(
                "weight length {} does not match sample size {}",
                weights.len(),
                sample.n()
            ));
        }
        Ok(Self {
            c,
            b,
            sample,
            weights,
            nonneg: false,
            maximize: false,
        })
    }

    pub fn with_nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    /// Tolerance scale: `max(|b|, largest absolute sample entry)`.
    pub fn scale(&self) -> f64 {
        self.b.abs().max(self.sample.scale()).max(f64::MIN_POSITIVE)
    }

    fn reported(&self, value: f64) -> f64 {
        if self.maximize {
            -value
        } else {
            value
        }
    }
}

/// Rewrites `max c.x  s.t.  a.x <= b` as `min (-c).x  s.t.  (-a).x >= -b`.
///
/// Applying it twice gives back the original program.
pub fn transform_max(lp: RobustLp) -> RobustLp {
    let sample = lp
        .sample
        .map_rows(|r| r.iter().map(|x| -x).collect())
        .expect("negating a valid sample keeps it valid");
    RobustLp {
        c: lp.c.iter().map(|x| -x).collect(),
        b: -lp.b,
        sample,
        weights: lp.weights,
        nonneg: lp.nonneg,
        maximize: !lp.maximize,
    }
}

/// `min_{a in U} a.x - b`; nonnegative iff `x` satisfies every constraint.
pub fn feasibility_margin(sample: &Sample, w: &WeightVector, x: &[f64], b: f64) -> Result<f64> {
    let neg: Vec<f64> = x.iter().map(|v| -v).collect();
    Ok(-crate::region::support_function(sample, w, &neg)? - b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveFacet {
    pub normal: Vec<f64>,
    pub intercept: f64,
    /// Position in the candidate facet list.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionSummary {
    pub n_vertices: usize,
    pub n_facets: usize,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutcome {
    pub status: Status,
    /// Optimal point, present when finite.
    pub x: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub active_facet: Option<ActiveFacet>,
    pub lambda: Option<f64>,
    /// False when built from an inexact region or the iteration cap was hit.
    pub certified: bool,
    pub iterations: usize,
    pub region: RegionSummary,
    pub trace: Vec<String>,
}

/// Facets of `U` whose intercept sign matches `b` (`b = 0` counts as positive).
pub fn efficient_set(region: &Region, b: f64) -> Result<Vec<Facet>> {
    require_full(&region.polytope)?;
    Ok(region
        .polytope
        .facets
        .iter()
        .filter(|f| {
            if b >= 0.0 {
                f.intercept >= -INTERCEPT_TOL
            } else {
                f.intercept <= INTERCEPT_TOL
            }
        })
        .cloned()
        .collect())
}

fn require_full(p: &Polytope) -> Result<()> {
    if p.is_degenerate() {
        return Err(Error::Degenerate {
            dim: p.dim,
            affine_dim: p.affine_dim,
            detail: format!(
                "the region is flat in {} direction(s); the solver needs facets",
                p.dim - p.affine_dim
            ),
        });
    }
    Ok(())
}

/// Facets of `U` or, with `nonneg`, of `U + R^d_+`.
///
/// The orthant sum shares its facets with `U + M * simplex` for any `M > 0`,
/// namely those with a nonnegative normal.
fn candidate_facets(poly: &Polytope, nonneg: bool) -> Result<Vec<Facet>> {
    if !nonneg {
        require_full(poly)?;
        return Ok(poly.facets.clone());
    }
    let d = poly.dim;
    let extent = (0..d)
        .map(|k| {
            let (lo, hi) = poly
                .vertices
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v[k]), h.max(v[k])));
            hi - lo
        })
        .fold(0.0_f64, f64::max);
    let extent = if extent > 0.0 { extent } else { poly.scale.max(1.0) };
    let mut pts = poly.vertices.clone();
    for v in &poly.vertices {
        for k in 0..d {
            let mut p = v.clone();
            p[k] += extent;
            pts.push(p);
        }
    }
    let lifted = convex_hull(&pts)?;
    Ok(lifted
        .facets
        .into_iter()
        .filter(|f| f.normal.iter().all(|x| *x >= -REL_TOL))
        .collect())
}

/// Result of one ray shot against a facet list.
#[derive(Debug)]
enum Shot {
    Finite { j: usize, lambda: f64, x: Vec<f64> },
    /// `b < 0` with the ray never leaving the set, or `b = 0` with a hit.
    Zero,
    Miss { retried: bool },
    OriginInside,
}

fn contains(facets: &[Facet], u: &[f64], tol: f64) -> bool {
    facets.iter().all(|f| f.slack(u) >= -tol)
}

fn shoot(c: &[f64], b: f64, facets: &[Facet], tol: f64) -> Shot {
    let cn = dot(c, c).sqrt();
    let along = |f: &Facet| dot(c, &f.normal);
    if b > 0.0 && facets.iter().all(|f| f.intercept <= tol) {
        return Shot::OriginInside;
    }
    if b == 0.0 {
        return if meets(c, facets, tol) { Shot::Zero } else { Shot::Miss { retried: false } };
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, f) in facets.iter().enumerate() {
        let keep = if b > 0.0 {
            f.intercept >= -INTERCEPT_TOL
        } else {
            f.intercept <= INTERCEPT_TOL
        };
        let s = along(f);
        if !keep || s.abs() <= PARALLEL_TOL * cn {
            continue;
        }
        let lambda = f.intercept / s;
        if lambda <= 0.0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, l)) if b > 0.0 => lambda > l + TIE_TOL * l,
            Some((_, l)) => lambda < l - TIE_TOL * l,
        };
        if better {
            best = Some((j, lambda));
        }
    }
    match best {
        Some((j, lambda)) => {
            let u: Vec<f64> = c.iter().map(|x| lambda * x).collect();
            if contains(facets, &u, tol) {
                let f = &facets[j];
                let x = f.normal.iter().map(|n| b / f.intercept * n).collect();
                Shot::Finite { j, lambda, x }
            } else {
                Shot::Miss { retried: b > 0.0 }
            }
        }
        None if b < 0.0 && unbounded_inside(c, facets, tol) => Shot::Zero,
        None => Shot::Miss { retried: b > 0.0 },
    }
}

/// Toleranced interval of `lambda > 0` with `lambda c` in the set.
fn ray_interval(c: &[f64], facets: &[Facet], tol: f64) -> (f64, Option<usize>, f64, Option<usize>, Option<usize>) {
    let cn = dot(c, c).sqrt();
    let (mut lo, mut j_lo, mut hi, mut j_hi, mut par) = (0.0_f64, None, f64::INFINITY, None, None);
    for (j, f) in facets.iter().enumerate() {
        let s = dot(c, &f.normal);
        let d = f.intercept - tol;
        if s.abs() <= PARALLEL_TOL * cn {
            if d > 0.0 && par.is_none() {
                par = Some(j);
            }
        } else if s > 0.0 {
            if d / s > lo {
                lo = d / s;
                j_lo = Some(j);
            }
        } else if d / s < hi {
            hi = d / s;
            j_hi = Some(j);
        }
    }
    (lo, j_lo, hi, j_hi, par)
}

fn meets(c: &[f64], facets: &[Facet], tol: f64) -> bool {
    let (lo, _, hi, _, par) = ray_interval(c, facets, tol);
    par.is_none() && hi > 0.0 && lo <= hi
}

fn unbounded_inside(c: &[f64], facets: &[Facet], tol: f64) -> bool {
    let (_, _, hi, _, par) = ray_interval(c, facets, tol);
    par.is_none() && hi == f64::INFINITY
}

/// Facets whose halfspaces alone already miss the ray.
fn blocking_facets(c: &[f64], facets: &[Facet], tol: f64) -> Vec<usize> {
    let (_, j_lo, hi, j_hi, par) = ray_interval(c, facets, tol);
    if let Some(j) = par {
        return vec![j];
    }
    if hi <= 0.0 {
        return j_hi.into_iter().collect();
    }
    j_lo.into_iter().chain(j_hi).collect()
}

fn summary(poly: &Polytope, n_facets: usize, exact: bool) -> RegionSummary {
    RegionSummary {
        n_vertices: poly.vertices.len(),
        n_facets,
        exact,
    }
}

fn outcome_from_shot(
    lp: &RobustLp,
    shot: Shot,
    facets: &[Facet],
    region: RegionSummary,
    certified: bool,
    iterations: usize,
    mut trace: Vec<String>,
) -> SolveOutcome {
    let mut out = SolveOutcome {
        status: Status::Infinite,
        x: None,
        value: None,
        active_facet: None,
        lambda: None,
        certified,
        iterations,
        region,
        trace: Vec::new(),
    };
    match shot {
        Shot::Finite { j, lambda, x } => {
            let f = &facets[j];
            out.status = Status::Finite;
            out.value = Some(lp.reported(dot(&lp.c, &x)));
            out.x = Some(x);
            out.lambda = Some(lambda);
            out.active_facet = Some(ActiveFacet {
                normal: f.normal.clone(),
                intercept: f.intercept,
                index: j,
            });
            trace.push(format!("ray meets facet {j} at lambda = {lambda:e}"));
        }
        Shot::Zero => {
            out.status = Status::Finite;
            out.x = Some(vec![0.0; lp.c.len()]);
            out.value = Some(0.0);
            trace.push("ray stays inside the set; x = 0 is optimal".into());
        }
        Shot::Miss { retried } => {
            if retried {
                trace.push("no entry facet on the goal ray; retried along -c".into());
            }
            trace.push("ray misses the set; objective unbounded".into());
        }
        Shot::OriginInside => {
            out.status = Status::None;
            trace.push("origin lies in the set; constraint infeasible".into());
        }
    }
    out.trace = trace;
    out
}

/// A one-point region `{a}` is the single halfspace `a.x >= b`.
fn point_outcome(lp: &RobustLp, a: &[f64], iterations: usize) -> SolveOutcome {
    let aa = dot(a, a);
    let cc = dot(&lp.c, &lp.c);
    let region = RegionSummary {
        n_vertices: 1,
        n_facets: 0,
        exact: true,
    };
    let parallel = aa > 0.0 && {
        let t = dot(&lp.c, a) / aa;
        t > 0.0 && lp.c.iter().zip(a).all(|(ci, ai)| (ci - t * ai).abs() <= REL_TOL * cc.sqrt())
    };
    let mut out = SolveOutcome {
        status: Status::Infinite,
        x: None,
        value: None,
        active_facet: None,
        lambda: None,
        certified: true,
        iterations,
        region,
        trace: vec!["region is a single point".into()],
    };
    if aa == 0.0 && lp.b > 0.0 {
        out.status = Status::None;
    } else if parallel {
        let x: Vec<f64> = a.iter().map(|v| lp.b * v / aa).collect();
        let norm = aa.sqrt();
        out.status = Status::Finite;
        out.value = Some(lp.reported(dot(&lp.c, &x)));
        out.lambda = Some(norm / cc.sqrt());
        out.active_facet = Some(ActiveFacet {
            normal: a.iter().map(|v| v / norm).collect(),
            intercept: norm,
            index: 0,
        });
        out.x = Some(x);
    }
    out
}

/// Ray solve against a materialised region of `lp.sample`.
pub fn solve_ray(lp: &RobustLp, region: &Region) -> Result<SolveOutcome> {
    if region.dim() != lp.c.len() {
        return domain("region dimension does not match the goal vector");
    }
    if region.polytope.affine_dim == 0 && !lp.nonneg {
        return Ok(point_outcome(lp, &region.polytope.vertices[0], 1));
    }
    let facets = candidate_facets(&region.polytope, lp.nonneg)?;
    let tol = REL_TOL * lp.scale();
    let shot = shoot(&lp.c, lp.b, &facets, tol);
    let mut trace = vec![format!("{} candidate facets", facets.len())];
    if !region.exact {
        trace.push("region is inexact; outcome not certified".into());
    }
    Ok(outcome_from_shot(
        lp,
        shot,
        &facets,
        summary(&region.polytope, facets.len(), region.exact),
        region.exact,
        1,
        trace,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Build the full region, then shoot the ray.
    Exact,
    /// Cutting planes on a growing set of extreme points.
    Iterative,
}

/// Region used by [`Mode::Exact`]: permutation hull for small samples,
/// support-oracle refinement otherwise.
pub fn build_region(sample: &Sample, w: &WeightVector) -> Result<Region> {
    if sample.n() <= 6.min(PERMUTATION_LIMIT) {
        region_exact(sample, w)
    } else {
        region_support_oracle_with(sample, w, &OracleOptions::default())
    }
}

pub fn solve(lp: &RobustLp, mode: Mode) -> Result<SolveOutcome> {
    match mode {
        Mode::Exact => solve_ray(lp, &build_region(&lp.sample, &lp.weights)?),
        Mode::Iterative => solve_iterative(lp, None),
    }
}

/// Default cap on cutting-plane rounds: `10 d sqrt(n)`.
pub fn default_round_cap(d: usize, n: usize) -> usize {
    ((10 * d) as f64 * (n as f64).sqrt()).ceil().max(20.0) as usize
}

#[derive(Debug, Clone, Default)]
pub struct IterOptions {
    /// Defaults to [`default_round_cap`].
    pub max_rounds: Option<usize>,
    /// Stop early, uncertified, once this instant has passed.
    pub deadline: Option<Instant>,
}

/// Cutting-plane solve that only queries the extreme-point oracle.
///
/// Finite answers are certified by the feasibility margin; `none` follows
/// from the working set alone; `infinite` is certified once the facets that
/// block the ray are shown to be valid for the whole region.
pub fn solve_iterative(lp: &RobustLp, max_rounds: Option<usize>) -> Result<SolveOutcome> {
    solve_iterative_with(
        lp,
        &IterOptions {
            max_rounds,
            deadline: None,
        },
    )
}

pub fn solve_iterative_with(lp: &RobustLp, opts: &IterOptions) -> Result<SolveOutcome> {
    let d = lp.sample.d();
    let n = lp.sample.n();
    let cap = opts.max_rounds.unwrap_or_else(|| default_round_cap(d, n));
    let scale = lp.scale();
    let tol = REL_TOL * scale;
    let margin_tol = MARGIN_TOL * scale;
    let (s, w) = (&lp.sample, &lp.weights);

    let mut dirs: Vec<Vec<f64>> = vec![lp.c.clone(), lp.c.iter().map(|x| -x).collect()];
    for k in 0..d {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[k] = sgn;
            dirs.push(e);
        }
    }
    let mut points: Vec<Vec<f64>> = dirs.iter().map(|p| support_and_point(s, w, p).1).collect();
    let mut trace = Vec::new();
    let mut poly = convex_hull(&points)?;
    while poly.is_degenerate() && widen_flat(s, w, &mut points, tol) {
        poly = convex_hull(&points)?;
        trace.push("seed hull was flat; widened along its normals".into());
    }
    if poly.affine_dim == 0 && !lp.nonneg {
        return Ok(point_outcome(lp, &poly.vertices[0], 1));
    }
    if !lp.nonneg {
        require_full(&poly)?;
    }

    let mut rounds = 0;
    for round in 1..=cap {
        if opts.deadline.is_some_and(|t| Instant::now() > t) {
            trace.push(format!("deadline passed after {} rounds", round - 1));
            break;
        }
        rounds = round;
        let facets = candidate_facets(&poly, lp.nonneg)?;
        let shot = shoot(&lp.c, lp.b, &facets, tol);
        let region = summary(&poly, facets.len(), false);
        match shot {
            Shot::Finite { ref x, .. } => {
                let neg: Vec<f64> = x.iter().map(|v| -v).collect();
                let (h, a) = support_and_point(s, w, &neg);
                let margin = -h - lp.b;
                if margin >= -margin_tol {
                    trace.push(format!("round {round}: {} points, margin {margin:e}, done", points.len()));
                    return Ok(outcome_from_shot(lp, shot, &facets, region, true, round, trace));
                }
                trace.push(format!("round {round}: {} points, margin {margin:e}, cut added", points.len()));
                points.push(a);
            }
            Shot::Zero | Shot::OriginInside => {
                trace.push(format!("round {round}: {} points, decided on the working set", points.len()));
                return Ok(outcome_from_shot(lp, shot, &facets, region, true, round, trace));
            }
            Shot::Miss { .. } => {
                let block = blocking_facets(&lp.c, &facets, tol);
                let mut added = 0;
                for j in block.iter().copied() {
                    let f = &facets[j];
                    let out: Vec<f64> = f.normal.iter().map(|x| -x).collect();
                    let (h, a) = support_and_point(s, w, &out);
                    if -h < f.intercept - tol {
                        points.push(a);
                        added += 1;
                    }
                }
                if added == 0 && !block.is_empty() {
                    trace.push(format!(
                        "round {round}: {} points, blocking facets {:?} valid for the region",
                        points.len(),
                        block
                    ));
                    return Ok(outcome_from_shot(lp, shot, &facets, region, true, round, trace));
                }
                trace.push(format!("round {round}: {} points, {added} blocking cut(s) added", points.len()));
            }
        }
        poly = convex_hull(&points)?;
    }
    let facets = candidate_facets(&poly, lp.nonneg)?;
    let shot = shoot(&lp.c, lp.b, &facets, tol);
    if rounds == cap {
        trace.push(format!("round cap {cap} reached; outcome not certified"));
    }
    let region = summary(&poly, facets.len(), false);
    Ok(outcome_from_shot(lp, shot, &facets, region, false, rounds, trace))
}

/// Support value of the region of `lp` in direction `p`.
pub fn region_support(lp: &RobustLp, p: &[f64]) -> f64 {
    support_unchecked(&lp.sample, &lp.weights, p)
}
