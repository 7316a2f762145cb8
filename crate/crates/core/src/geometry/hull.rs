//! Incremental (beneath-beyond) convex hull in arbitrary dimension.
//!
//! The hull is first built as a simplicial complex: every facet has exactly
//! `d` vertices and `d` neighbours, `neighbors[k]` sharing the ridge opposite
//! `verts[k]`. Each step takes the farthest outside point of some facet,
//! removes every facet that sees it (points on a facet plane count as
//! seeing it, so new facets are never flat) and cones the horizon to it.
//! Coplanar simplices are merged afterwards and points that are not extreme
//! are dropped.

use std::collections::HashMap;

/// Simplicial facet during construction. Outward normal, `normal . x <= offset` inside.
struct Simplex {
    verts: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    neighbors: Vec<usize>,
    outside: Vec<usize>,
    alive: bool,
}

impl Simplex {
    fn dist(&self, p: &[f64]) -> f64 {
        dot(&self.normal, p) - self.offset
    }
}

/// Hull of a full-dimensional point set, indices refer to the input slice.
pub(crate) struct RawHull {
    pub vertices: Vec<usize>,
    /// (inward unit normal, intercept, vertex indices, neighbour facet positions)
    pub facets: Vec<(Vec<f64>, f64, Vec<usize>, Vec<usize>)>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `v` along the orthonormal `basis`, twice for stability.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(v, q);
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
        }
    }
}

/// Orthonormal basis of the orthogonal complement of the orthonormal `basis` in `R^d`.
pub(crate) fn complement(basis: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut span = basis.to_vec();
    let mut out = Vec::new();
    for k in 0..d {
        if span.len() == d {
            break;
        }
        let mut e = vec![0.0; d];
        e[k] = 1.0;
        orthogonalize(&mut e, &span);
        let l = norm(&e);
        if l > 1e-6 {
            e.iter_mut().for_each(|x| *x /= l);
            span.push(e.clone());
            out.push(e);
        }
    }
    out
}

/// Greedy affinely independent subset: starts at `pts[0]`, then repeatedly
/// the point farthest from the current affine hull. Returns the chosen
/// indices and an orthonormal basis of the affine hull's direction space.
pub(crate) fn affine_frame(pts: &[Vec<f64>], eps: f64) -> (Vec<usize>, Vec<Vec<f64>>) {
    let d = pts[0].len();
    let origin = &pts[0];
    let mut chosen = vec![0];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (i, p) in pts.iter().enumerate() {
            let mut r = sub(p, origin);
            orthogonalize(&mut r, &basis);
            let len = norm(&r);
            if best.as_ref().map_or(true, |b| len > b.1) {
                best = Some((i, len, r));
            }
        }
        match best {
            Some((i, len, mut r)) if len > eps => {
                r.iter_mut().for_each(|x| *x /= len);
                orthogonalize(&mut r, &basis);
                let l2 = norm(&r);
                r.iter_mut().for_each(|x| *x /= l2);
                basis.push(r);
                chosen.push(i);
            }
            _ => break,
        }
    }
    (chosen, basis)
}

/// Hyperplane through `d` points, oriented so `interior` lies strictly inside.
fn plane(pts: &[Vec<f64>], verts: &[usize], interior: &[f64]) -> (Vec<f64>, f64) {
    let d = interior.len();
    let base = &pts[verts[0]];
    let mut span: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for &v in &verts[1..] {
        let mut r = sub(&pts[v], base);
        orthogonalize(&mut r, &span);
        let len = norm(&r);
        if len > 0.0 {
            r.iter_mut().for_each(|x| *x /= len);
            span.push(r);
        }
    }
    let mut normal = vec![0.0; d];
    let mut best = -1.0;
    for axis in 0..d {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        orthogonalize(&mut e, &span);
        let len = norm(&e);
        if len > best {
            best = len;
            normal = e.into_iter().map(|x| x / len).collect();
        }
    }
    orthogonalize(&mut normal, &span);
    let len = norm(&normal);
    normal.iter_mut().for_each(|x| *x /= len);
    let rel: Vec<f64> = sub(interior, base);
    if dot(&normal, &rel) > 0.0 {
        normal.iter_mut().for_each(|x| *x = -*x);
    }
    let offset = verts.iter().map(|&v| dot(&normal, &pts[v])).sum::<f64>() / verts.len() as f64;
    (normal, offset)
}

/// Full-dimensional hull of `pts` (`d >= 2`), seeded with the affinely
/// independent `simplex` of `d + 1` indices.
pub(crate) fn quickhull(pts: &[Vec<f64>], simplex: &[usize], eps: f64) -> RawHull {
    let d = pts[0].len();
    let interior: Vec<f64> = (0..d)
        .map(|k| simplex.iter().map(|&i| pts[i][k]).sum::<f64>() / (d + 1) as f64)
        .collect();

    let mut facets: Vec<Simplex> = Vec::new();
    for skip in 0..=d {
        let verts: Vec<usize> = (0..=d).filter(|&i| i != skip).map(|i| simplex[i]).collect();
        let neighbors: Vec<usize> = (0..=d).filter(|&i| i != skip).collect();
        let (normal, offset) = plane(pts, &verts, &interior);
        facets.push(Simplex {
            verts,
            normal,
            offset,
            neighbors,
            outside: Vec::new(),
            alive: true,
        });
    }

    let mut in_simplex = vec![false; pts.len()];
    simplex.iter().for_each(|&i| in_simplex[i] = true);
    for (i, p) in pts.iter().enumerate() {
        if in_simplex[i] {
            continue;
        }
        if let Some(f) = facets.iter_mut().find(|f| f.dist(p) > eps) {
            f.outside.push(i);
        }
    }

    let mut stack: Vec<usize> = (0..facets.len()).filter(|&f| !facets[f].outside.is_empty()).collect();
    // 0 = unseen, stamp = visible, stamp + 1 = not visible
    let mut mark: Vec<u64> = vec![0; facets.len()];
    let mut stamp: u64 = 0;

    while let Some(fi) = stack.pop() {
        if !facets[fi].alive || facets[fi].outside.is_empty() {
            continue;
        }
        let eye = {
            let f = &facets[fi];
            let mut best = f.outside[0];
            let mut best_d = f.dist(&pts[best]);
            for &i in &f.outside[1..] {
                let di = f.dist(&pts[i]);
                if di > best_d || (di == best_d && i < best) {
                    best = i;
                    best_d = di;
                }
            }
            best
        };
        let p = &pts[eye];

        stamp += 2;
        mark.resize(facets.len(), 0);
        let mut visible = vec![fi];
        mark[fi] = stamp;
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        let mut head = 0;
        while head < visible.len() {
            let v = visible[head];
            head += 1;
            for k in 0..d {
                let nb = facets[v].neighbors[k];
                if mark[nb] == stamp {
                    continue;
                }
                if mark[nb] != stamp + 1 {
                    if facets[nb].dist(p) > -eps {
                        mark[nb] = stamp;
                        visible.push(nb);
                        continue;
                    }
                    mark[nb] = stamp + 1;
                }
                horizon.push((v, k));
            }
        }

        let first_new = facets.len();
        let mut ridges: HashMap<Vec<usize>, (usize, usize)> = HashMap::new();
        for &(v, k) in &horizon {
            let nb = facets[v].neighbors[k];
            let mut verts = facets[v].verts.clone();
            verts[k] = eye;
            let (normal, offset) = plane(pts, &verts, &interior);
            let id = facets.len();
            let mut neighbors = vec![usize::MAX; d];
            neighbors[k] = nb;
            if let Some(slot) = facets[nb].neighbors.iter().position(|&x| x == v) {
                facets[nb].neighbors[slot] = id;
            }
            for j in 0..d {
                if j == k {
                    continue;
                }
                let mut key: Vec<usize> = verts.iter().enumerate().filter(|&(i, _)| i != j).map(|(_, &x)| x).collect();
                key.sort_unstable();
                if let Some((other, slot)) = ridges.remove(&key) {
                    neighbors[j] = other;
                    facets[other].neighbors[slot] = id;
                } else {
                    ridges.insert(key, (id, j));
                }
            }
            facets.push(Simplex {
                verts,
                normal,
                offset,
                neighbors,
                outside: Vec::new(),
                alive: true,
            });
        }
        debug_assert!(ridges.is_empty(), "horizon is not a closed ridge cycle");

        let mut orphans: Vec<usize> = Vec::new();
        for &v in &visible {
            facets[v].alive = false;
            orphans.append(&mut facets[v].outside);
        }
        for i in orphans {
            if i == eye {
                continue;
            }
            let q = &pts[i];
            if let Some(f) = facets[first_new..].iter_mut().find(|f| f.dist(q) > eps) {
                f.outside.push(i);
            }
        }
        for id in first_new..facets.len() {
            if !facets[id].outside.is_empty() {
                stack.push(id);
            }
        }
    }

    finalize(pts, facets, eps)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Merges coplanar simplices and drops vertices that are not extreme.
fn finalize(pts: &[Vec<f64>], facets: Vec<Simplex>, eps: f64) -> RawHull {
    let d = pts[0].len();
    let alive: Vec<usize> = (0..facets.len()).filter(|&f| facets[f].alive).collect();
    let mut parent: Vec<usize> = (0..facets.len()).collect();

    for &f in &alive {
        for &g in &facets[f].neighbors {
            if g <= f {
                continue;
            }
            let opp_g = facets[g].verts.iter().find(|v| !facets[f].verts.contains(v));
            let opp_f = facets[f].verts.iter().find(|v| !facets[g].verts.contains(v));
            let (Some(&og), Some(&of)) = (opp_g, opp_f) else { continue };
            if facets[f].dist(&pts[og]) > -eps && facets[g].dist(&pts[of]) > -eps {
                let (a, b) = (find(&mut parent, f), find(&mut parent, g));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut group_of: HashMap<usize, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for &f in &alive {
        let root = find(&mut parent, f);
        let g = *group_of.entry(root).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[g].push(f);
    }
    let group = |f: usize, parent: &mut [usize]| group_of[&find(parent, f)];

    // Group plane: averaged outward normal, intercept from the group's points.
    let mut planes: Vec<(Vec<f64>, f64, Vec<usize>)> = Vec::with_capacity(members.len());
    for mem in &members {
        let mut n = vec![0.0; d];
        for &f in mem {
            n.iter_mut().zip(&facets[f].normal).for_each(|(a, b)| *a -= b);
        }
        let len = norm(&n);
        n.iter_mut().for_each(|x| *x /= len);
        let mut verts: Vec<usize> = mem.iter().flat_map(|&f| facets[f].verts.iter().copied()).collect();
        verts.sort_unstable();
        verts.dedup();
        let intercept = verts.iter().map(|&v| dot(&n, &pts[v])).fold(f64::INFINITY, f64::min);
        planes.push((n, intercept, verts));
    }

    // A point is a vertex iff the normals of the facets through it span R^d.
    let mut through: HashMap<usize, Vec<usize>> = HashMap::new();
    for (g, (_, _, verts)) in planes.iter().enumerate() {
        for &v in verts {
            through.entry(v).or_default().push(g);
        }
    }
    let mut extreme: Vec<usize> = through
        .iter()
        .filter(|(_, gs)| {
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for &g in gs.iter() {
                let mut r = planes[g].0.clone();
                orthogonalize(&mut r, &basis);
                let len = norm(&r);
                if len > 1e-7 {
                    r.iter_mut().for_each(|x| *x /= len);
                    basis.push(r);
                    if basis.len() == d {
                        return true;
                    }
                }
            }
            false
        })
        .map(|(&v, _)| v)
        .collect();
    extreme.sort_unstable();

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
    for &f in &alive {
        let gf = group(f, &mut parent);
        for &nb in &facets[f].neighbors {
            let gn = group(nb, &mut parent);
            if gn != gf {
                adjacency[gf].push(gn);
            }
        }
    }
    let out_facets = planes
        .into_iter()
        .zip(adjacency)
        .map(|((n, c, verts), mut adj)| {
            adj.sort_unstable();
            adj.dedup();
            let verts: Vec<usize> = verts.into_iter().filter(|v| extreme.binary_search(v).is_ok()).collect();
            (n, c, verts, adj)
        })
        .collect();

    RawHull {
        vertices: extreme,
        facets: out_facets,
    }
}
