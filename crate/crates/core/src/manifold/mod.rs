//! Intersection manifolds of two gridded CDFs and the identification checks
//! built on them.

mod checks;
mod rank;

pub use checks::{
    assumption_report, check_domination_coverage, check_epigraph_convexity, check_side_condition, AssumptionReport,
    CommonSupportCheck, DimensionCheck, DominationReport, LevelConvexity, ManifoldVerdict, RegularityCheck,
    RelevanceCheck, Side, SideReport, SideWitness, ATOM_MASS, DEFAULT_CONVEXITY_LEVELS, RELEVANCE_THRESHOLD,
    SIDE_PAIR_CAP, SUPPORT_FLOOR,
};
pub use rank::{rank_condition_continuous_z, RankReport, RANK_REL_TOL};

use alloc::vec;
use alloc::vec::Vec;

use crate::measure::level::chain_segments;
use crate::measure::{Grid, GriddedCdf, BAND_DELTA, CONTOUR_TOL, MAX_DIM};
use crate::{Error, Result};

/// Smallest angle between CDF gradients (radians) that counts as a
/// transversal intersection.
pub const THETA_MIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeClass {
    Transversal,
    Coincide,
    Tangent,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Transversal => "Transversal",
            NodeClass::Coincide => "Coincide",
            NodeClass::Tangent => "Tangent",
        }
    }
}

/// One connected component of `{x : δ < F_z(x) = F_z'(x) < 1 − δ}`.
///
/// Points come from exact linear roots of `F_z − F_z'` on grid edges, plus
/// grid nodes where the two tables agree within the contour tolerance. In
/// 2-D the roots are chained into polylines (`paths` index into `points`).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IntersectionManifold {
    pub points: Vec<Vec<f64>>,
    pub classification: Vec<NodeClass>,
    /// Common CDF value `½(F_z + F_z')` at each point.
    pub common_value: Vec<f64>,
    pub paths: Vec<Vec<usize>>,
}

impl IntersectionManifold {
    /// Builds a manifold from explicit points and paths, classifying every
    /// point against the two CDFs (points off the intersection set are
    /// labelled `Tangent`). Used for hand-made fixtures.
    pub fn from_parts(points: Vec<Vec<f64>>, paths: Vec<Vec<usize>>, fz: &GriddedCdf, fzp: &GriddedCdf) -> Self {
        let classification =
            points.iter().map(|p| check_transversality(fz, fzp, p).unwrap_or(NodeClass::Tangent)).collect();
        let common_value = points.iter().map(|p| 0.5 * (fz.at(p) + fzp.at(p))).collect();
        IntersectionManifold { points, classification, common_value, paths }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let d = self.dim();
        let mut c = vec![0.0; d];
        for p in &self.points {
            for k in 0..d {
                c[k] += p[k];
            }
        }
        let n = self.points.len().max(1) as f64;
        c.iter().map(|v| v / n).collect()
    }

    pub fn count(&self, class: NodeClass) -> usize {
        self.classification.iter().filter(|&&c| c == class).count()
    }

    /// Consecutive point pairs along every path.
    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.paths
            .iter()
            .flat_map(|p| p.windows(2))
            .map(|w| (self.points[w[0]].as_slice(), self.points[w[1]].as_slice()))
    }

    /// Points that are not part of any path segment.
    pub(crate) fn isolated(&self) -> Vec<usize> {
        let mut on_path = vec![false; self.points.len()];
        for p in self.paths.iter().filter(|p| p.len() > 1) {
            for &i in p {
                on_path[i] = true;
            }
        }
        (0..self.points.len()).filter(|&i| !on_path[i]).collect()
    }

    /// Symmetric Hausdorff distance between the point sets.
    pub fn hausdorff(&self, other: &IntersectionManifold) -> f64 {
        fn one_way(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
            a.iter()
                .map(|p| b.iter().map(|q| crate::transport::cost::sq_dist(p, q)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max)
        }
        if self.is_empty() || other.is_empty() {
            return f64::INFINITY;
        }
        libm::sqrt(one_way(&self.points, &other.points).max(one_way(&other.points, &self.points)))
    }
}

fn in_band(v: f64) -> bool {
    v > BAND_DELTA && v < 1.0 - BAND_DELTA
}

/// Zero set of `D = F_z − F_z'` inside the strict-interior band, split into
/// components connected under grid adjacency (8-neighbourhood in 2-D,
/// 26 in 3-D). Components are ordered by their first point in grid scan
/// order.
pub fn intersection_set(fz: &GriddedCdf, fzp: &GriddedCdf) -> Result<Vec<IntersectionManifold>> {
    if fz.grid() != fzp.grid() {
        return Err(Error::GridsDiffer);
    }
    let grid = fz.grid();
    let d = grid.dim();
    let diff: Vec<f64> = fz.values().iter().zip(fzp.values()).map(|(a, b)| a - b).collect();
    let zero = |f: usize| libm::fabs(diff[f]) <= CONTOUR_TOL;

    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut owner: Vec<usize> = Vec::new();
    let mut edge_point = vec![usize::MAX; grid.len() * d];
    for f in 0..grid.len() {
        let idx = grid.multi_index(f);
        if zero(f) && in_band(fz.value_at_node(f)) {
            points.push(grid.node(f));
            owner.push(f);
        }
        for k in 0..d {
            if idx[k] + 1 >= grid.axis(k).nodes {
                continue;
            }
            let g = f + grid.stride(k);
            if zero(f) || zero(g) || (diff[f] > 0.0) == (diff[g] > 0.0) {
                continue;
            }
            let t = diff[f] / (diff[f] - diff[g]);
            let mut p = grid.node(f);
            p[k] += t * grid.axis(k).step();
            if !in_band(fz.at(&p)) {
                continue;
            }
            edge_point[f * d + k] = points.len();
            points.push(p);
            owner.push(f);
        }
    }

    let mut segments = Vec::new();
    if d == 2 {
        let s1 = grid.stride(0);
        for f in 0..grid.len() {
            let idx = grid.multi_index(f);
            if idx[0] + 1 >= grid.axis(0).nodes || idx[1] + 1 >= grid.axis(1).nodes {
                continue;
            }
            let c = [f, f + s1, f + s1 + 1, f + 1];
            let e = [edge_point[c[0] * 2], edge_point[c[1] * 2 + 1], edge_point[c[3] * 2], edge_point[c[0] * 2 + 1]];
            let hits: Vec<usize> = e.iter().copied().filter(|&p| p != usize::MAX).collect();
            match hits.len() {
                2 => segments.push((hits[0], hits[1])),
                4 => {
                    let centre = 0.25 * c.iter().map(|&n| diff[n]).sum::<f64>();
                    if (centre > 0.0) == (diff[c[0]] > 0.0) {
                        segments.push((e[0], e[1]));
                        segments.push((e[2], e[3]));
                    } else {
                        segments.push((e[0], e[3]));
                        segments.push((e[1], e[2]));
                    }
                }
                _ => {}
            }
        }
    }

    let comp = components(grid, &owner);
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut local = vec![usize::MAX; points.len()];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
    for (i, &c) in comp.iter().enumerate() {
        local[i] = members[c].len();
        members[c].push(i);
    }
    let mut comp_segments: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_comp];
    for &(a, b) in &segments {
        comp_segments[comp[a]].push((local[a], local[b]));
    }
    let mut out = Vec::with_capacity(n_comp);
    for (c, idx) in members.iter().enumerate() {
        let pts: Vec<Vec<f64>> = idx.iter().map(|&i| points[i].clone()).collect();
        let paths = match d {
            2 => chain_segments(pts.len(), &comp_segments[c]).into_iter().filter(|p| p.len() > 1).collect(),
            1 => (0..pts.len()).map(|i| vec![i]).collect(),
            _ => Vec::new(),
        };
        let classification =
            pts.iter().map(|p| check_transversality(fz, fzp, p).unwrap_or(NodeClass::Tangent)).collect();
        let common_value = pts.iter().map(|p| 0.5 * (fz.at(p) + fzp.at(p))).collect();
        out.push(IntersectionManifold { points: pts, classification, common_value, paths });
    }
    Ok(out)
}

/// Component label per point: points are linked when their owning grid
/// nodes coincide or are grid neighbours. Labels follow first appearance.
fn components(grid: &Grid, owner: &[usize]) -> Vec<usize> {
    let n = owner.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut rep = vec![usize::MAX; grid.len()];
    for (i, &o) in owner.iter().enumerate() {
        if rep[o] == usize::MAX {
            rep[o] = i;
        } else {
            let (a, b) = (find(&mut parent, rep[o]), find(&mut parent, i));
            parent[a.max(b)] = a.min(b);
        }
    }
    for (o, &r) in rep.iter().enumerate() {
        if r == usize::MAX {
            continue;
        }
        for nb in grid.neighbours(o) {
            if rep[nb] != usize::MAX {
                let (a, b) = (find(&mut parent, r), find(&mut parent, rep[nb]));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    out
}

/// Classifies an intersection point. `Coincide` when `|F_z − F_z'|` stays
/// within the contour tolerance on the nodes around `x` (the containing
/// cell and one ring beyond); otherwise `Transversal` when the gradients
/// make an angle above [`THETA_MIN`], `Tangent` when they do not. In 1-D
/// the angle is taken between the graph normals `(F', −1)`.
pub fn check_transversality(fz: &GriddedCdf, fzp: &GriddedCdf, x: &[f64]) -> Result<NodeClass> {
    if fz.grid() != fzp.grid() {
        return Err(Error::GridsDiffer);
    }
    let gap = libm::fabs(fz.at(x) - fzp.at(x));
    if gap > CONTOUR_TOL {
        return Err(Error::NotOnIntersection(gap));
    }
    let grid = fz.grid();
    let d = grid.dim();
    let mut lo = [0usize; MAX_DIM];
    let mut hi = [0usize; MAX_DIM];
    for k in 0..d {
        let i = grid.axis(k).locate(x[k]).0;
        lo[k] = i.saturating_sub(1);
        hi[k] = (i + 2).min(grid.axis(k).nodes - 1);
    }
    let mut coincide = true;
    let mut idx = lo;
    'scan: loop {
        let f = grid.flat_index(&idx[..d]);
        if libm::fabs(fz.value_at_node(f) - fzp.value_at_node(f)) > CONTOUR_TOL {
            coincide = false;
            break;
        }
        let mut k = d;
        loop {
            if k == 0 {
                break 'scan;
            }
            k -= 1;
            if idx[k] < hi[k] {
                idx[k] += 1;
                break;
            }
            idx[k] = lo[k];
        }
    }
    if coincide {
        return Ok(NodeClass::Coincide);
    }
    let g = fz.gradient(x);
    let h = fzp.gradient(x);
    let angle = if d == 1 { line_angle(&[g[0], -1.0], &[h[0], -1.0]) } else { line_angle(&g, &h) };
    if angle > THETA_MIN || isoquants_cross(fz, fzp, x, &g) {
        Ok(NodeClass::Transversal)
    } else {
        Ok(NodeClass::Tangent)
    }
}

/// Sub-threshold angles: walks one to three cells along the `F_z` isoquant
/// through `x` in opposite tangent directions and reports whether
/// `F_z − F_z'` takes both signs (beyond the contour tolerance). Level sets
/// that cross at a small angle pass; level sets that touch do not. Where
/// the box face cuts one direction off, the remaining side must show the
/// linear growth of a crossing (doubling the walk less than triples the
/// gap) rather than the quadratic growth of a touching. In 1-D the walk is
/// along the axis.
fn isoquants_cross(fz: &GriddedCdf, fzp: &GriddedCdf, x: &[f64], g: &[f64]) -> bool {
    let d = x.len();
    let cell = fz.grid().max_step();
    let alpha = fz.at(x);
    let gn = libm::sqrt(g.iter().map(|v| v * v).sum::<f64>());
    // Directions come in opposite pairs: `dirs[i]` and `dirs[i + n / 2]`.
    let dirs: Vec<Vec<f64>> = match d {
        1 => vec![vec![1.0], vec![-1.0]],
        _ if gn == 0.0 => return false,
        2 => {
            let t = [-g[1] / gn, g[0] / gn];
            vec![t.to_vec(), vec![-t[0], -t[1]]]
        }
        _ => {
            let n: Vec<f64> = g.iter().map(|v| v / gn).collect();
            let mut basis: Vec<Vec<f64>> = Vec::new();
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                for b in basis.iter().chain(core::iter::once(&n)) {
                    let c: f64 = e.iter().zip(b).map(|(u, v)| u * v).sum();
                    for (ei, bi) in e.iter_mut().zip(b) {
                        *ei -= c * bi;
                    }
                }
                let en = libm::sqrt(e.iter().map(|v| v * v).sum::<f64>());
                if en > 1e-6 && basis.len() < d - 1 {
                    basis.push(e.iter().map(|v| v / en).collect());
                }
            }
            (0..8)
                .map(|i| {
                    let phi = i as f64 * core::f64::consts::FRAC_PI_4;
                    let (c, s) = (libm::cos(phi), libm::sin(phi));
                    (0..d).map(|k| c * basis[0][k] + s * basis[1][k]).collect()
                })
                .collect()
        }
    };
    let walk = |t: &[f64], reach: f64| -> Option<f64> {
        let mut y: Vec<f64> = x.iter().zip(t).map(|(a, b)| a + reach * cell * b).collect();
        if d > 1 {
            // Newton steps back onto {F_z = α} along the gradient.
            for _ in 0..4 {
                let gy = fz.gradient(&y);
                let g2: f64 = gy.iter().map(|v| v * v).sum();
                if g2 == 0.0 {
                    break;
                }
                let r = fz.at(&y) - alpha;
                for (yi, gi) in y.iter_mut().zip(&gy) {
                    *yi -= r * gi / g2;
                }
            }
        }
        if fz.grid().contains(&y) {
            Some(fz.at(&y) - fzp.at(&y))
        } else {
            None
        }
    };
    let gaps: Vec<[Option<f64>; 3]> = dirs.iter().map(|t| [walk(t, 1.0), walk(t, 2.0), walk(t, 3.0)]).collect();
    let (mut pos, mut neg) = (false, false);
    for v in gaps.iter().flat_map(|r| r.iter().rev().flatten().take(1)) {
        pos |= *v > CONTOUR_TOL;
        neg |= *v < -CONTOUR_TOL;
    }
    if pos && neg {
        return true;
    }
    let half = dirs.len() / 2;
    (0..dirs.len()).any(|i| {
        let opposite_missing = gaps[(i + half) % dirs.len()][0].is_none();
        match (opposite_missing, gaps[i][0], gaps[i][1]) {
            (true, Some(a), Some(b)) => {
                libm::fabs(a) > CONTOUR_TOL && a * b > 0.0 && libm::fabs(b) < 3.0 * libm::fabs(a)
            }
            _ => false,
        }
    })
}

/// Angle in `[0, π/2]` between the lines spanned by `a` and `b` (zero if
/// either vector vanishes).
pub(crate) fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let cross = libm::sqrt((na * nb - dot * dot).max(0.0));
    libm::atan2(cross, libm::fabs(dot))
}

#[cfg(test)]
mod tests;
