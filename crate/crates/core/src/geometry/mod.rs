//! Convex polytopes in `R^d`: hull construction, membership and
//! support-function distances.
//!
//! Facets use the inward convention: the polytope lies in
//! `{a : normal . a >= intercept}`. Facets are listed in descending
//! lexicographic order of their normals and vertices in ascending
//! lexicographic order, so output is stable across runs.

mod hull;

use std::cmp::Ordering;

pub(crate) use hull::{affine_frame, complement, dot};

use crate::error::{domain, Error, Result};

/// Relative tolerance; multiplied by the coordinate scale of the input.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Inward unit normal.
    pub normal: Vec<f64>,
    pub intercept: f64,
    pub vertex_ids: Vec<usize>,
    pub neighbor_ids: Vec<usize>,
}

impl Facet {
    /// Signed slack `normal . x - intercept`; negative means `x` is outside.
    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.normal, x) - self.intercept
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub dim: usize,
    pub affine_dim: usize,
    pub vertices: Vec<Vec<f64>>,
    /// Empty when `affine_dim < dim`.
    pub facets: Vec<Facet>,
    /// Largest absolute input coordinate; tolerances are relative to it.
    pub scale: f64,
}

impl Polytope {
    pub fn is_degenerate(&self) -> bool {
        self.affine_dim < self.dim
    }

    /// Absolute tolerance used for this polytope.
    pub fn tol(&self) -> f64 {
        REL_TOL * self.scale
    }

    /// Support function `max_v p . v` over the vertices.
    pub fn support(&self, p: &[f64]) -> f64 {
        self.vertices.iter().map(|v| dot(p, v)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Support function evaluated only on vertices referenced by facets.
    pub fn facet_support(&self, p: &[f64]) -> f64 {
        self.facets
            .iter()
            .flat_map(|f| f.vertex_ids.iter())
            .map(|&v| dot(p, &self.vertices[v]))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True iff `normal . x >= intercept - tol` for every facet.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        if self.is_degenerate() {
            return Err(Error::Degenerate {
                dim: self.dim,
                affine_dim: self.affine_dim,
                detail: "membership needs a facet representation".into(),
            });
        }
        if x.len() != self.dim {
            return domain(format!("point has dimension {}, polytope {}", x.len(), self.dim));
        }
        Ok(self.facets.iter().all(|f| f.slack(x) >= -tol))
    }

    pub fn centroid(&self) -> Vec<f64> {
        let m = self.vertices.len() as f64;
        (0..self.dim)
            .map(|k| self.vertices.iter().map(|v| v[k]).sum::<f64>() / m)
            .collect()
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn max_abs(points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Convex hull with facet normals, intercepts and adjacency.
///
/// Duplicates and non-extreme points are removed. Inputs whose affine hull
/// has dimension below `d` give a vertex-only polytope with
/// `affine_dim < dim` and no facets.
pub fn convex_hull(points: &[Vec<f64>]) -> Result<Polytope> {
    let Some(first) = points.first() else {
        return domain("convex hull of an empty point set");
    };
    let dim = first.len();
    if dim == 0 {
        return domain("points must have at least one coordinate");
    }
    for (i, p) in points.iter().enumerate() {
        if p.len() != dim {
            return domain(format!("point {i} has dimension {}, expected {dim}", p.len()));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return domain(format!("point {i} has a non-finite coordinate"));
        }
    }
    let scale = max_abs(points);
    let eps = REL_TOL * scale;

    let mut pts: Vec<Vec<f64>> = points.to_vec();
    pts.sort_by(|a, b| lex(a, b));
    pts.dedup_by(|b, a| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= eps));

    let (vertex_idx, facets, affine_dim) = hull_indices(&pts, eps);
    let mut order: Vec<usize> = (0..vertex_idx.len()).collect();
    order.sort_by(|&a, &b| lex(&pts[vertex_idx[a]], &pts[vertex_idx[b]]));
    let mut new_id = vec![usize::MAX; pts.len()];
    for (pos, &o) in order.iter().enumerate() {
        new_id[vertex_idx[o]] = pos;
    }
    let vertices: Vec<Vec<f64>> = order.iter().map(|&o| pts[vertex_idx[o]].clone()).collect();

    let mut fo: Vec<usize> = (0..facets.len()).collect();
    fo.sort_by(|&a, &b| lex(&facets[b].0, &facets[a].0).then(facets[a].1.partial_cmp(&facets[b].1).unwrap_or(Ordering::Equal)));
    let mut new_f = vec![0; facets.len()];
    for (pos, &o) in fo.iter().enumerate() {
        new_f[o] = pos;
    }
    let facets = fo
        .iter()
        .map(|&o| {
            let (normal, intercept, verts, adj) = &facets[o];
            let mut vertex_ids: Vec<usize> = verts.iter().map(|&v| new_id[v]).collect();
            vertex_ids.sort_unstable();
            let mut neighbor_ids: Vec<usize> = adj.iter().map(|&g| new_f[g]).collect();
            neighbor_ids.sort_unstable();
            Facet {
                normal: normal.clone(),
                intercept: *intercept,
                vertex_ids,
                neighbor_ids,
            }
        })
        .collect();

    Ok(Polytope {
        dim,
        affine_dim,
        vertices,
        facets,
        scale,
    })
}

type RawFacet = (Vec<f64>, f64, Vec<usize>, Vec<usize>);

/// Extreme-point indices into `pts` (deduplicated), facets when full-dimensional,
/// and the affine dimension.
fn hull_indices(pts: &[Vec<f64>], eps: f64) -> (Vec<usize>, Vec<RawFacet>, usize) {
    let dim = pts[0].len();
    let (simplex, basis) = affine_frame(pts, eps);
    let k = basis.len();
    if k < dim {
        if k == 0 {
            return (vec![0], Vec::new(), 0);
        }
        let origin = &pts[0];
        let projected: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let rel: Vec<f64> = p.iter().zip(origin).map(|(x, o)| x - o).collect();
                basis.iter().map(|q| dot(q, &rel)).collect()
            })
            .collect();
        let (verts, _, _) = hull_indices(&projected, eps);
        return (verts, Vec::new(), k);
    }
    if dim == 1 {
        let lo = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap_or(simplex[0]);
        let hi = (0..pts.len()).max_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0])).unwrap_or(simplex[1]);
        let facets = vec![
            (vec![1.0], pts[lo][0], vec![lo], vec![1]),
            (vec![-1.0], -pts[hi][0], vec![hi], vec![0]),
        ];
        return (vec![lo, hi], facets, 1);
    }
    let raw = hull::quickhull(pts, &simplex, eps);
    (raw.vertices, raw.facets, dim)
}

/// Lower bound on the Hausdorff distance of two convex bodies:
/// `max_p |h_A(p) - h_B(p)|` over the supplied unit directions.
pub fn hausdorff_estimate(a: &Polytope, b: &Polytope, directions: &[Vec<f64>]) -> Result<f64> {
    if a.dim != b.dim {
        return domain(format!("dimension mismatch: {} vs {}", a.dim, b.dim));
    }
    if directions.is_empty() {
        return domain("at least one direction is required");
    }
    if let Some(p) = directions.iter().find(|p| p.len() != a.dim) {
        return domain(format!("direction has dimension {}, expected {}", p.len(), a.dim));
    }
    Ok(directions
        .iter()
        .map(|p| (a.support(p) - b.support(p)).abs())
        .fold(0.0, f64::max))
}
