use alloc::vec;
use alloc::vec::Vec;

use super::{intersection_set, IntersectionManifold, NodeClass};
use crate::measure::order::dominance_unchecked;
use crate::measure::{Grid, GriddedCdf, BAND_DELTA, MAX_DIM};
use crate::quasi;
use crate::transport::cost::sq_dist;
use crate::{Error, Result};

/// Minimum `max |F_z − F_z'|` for the instrument to count as relevant.
pub const RELEVANCE_THRESHOLD: f64 = 1e-2;

/// Cap on the node pairs examined per side by the side condition.
pub const SIDE_PAIR_CAP: usize = 10_000;

/// A node belongs to the support when its CDF value lies strictly inside
/// `(SUPPORT_FLOOR, 1 − SUPPORT_FLOOR)`; a cell when its mass exceeds it.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// Largest single-cell mass accepted by the absolute-continuity proxy.
pub const ATOM_MASS: f64 = 0.02;

pub const DEFAULT_CONVEXITY_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Cap on the stored counterexample points of a report.
const MAX_LISTED: usize = 1000;

fn positive_support(cdf: &GriddedCdf) -> Vec<bool> {
    cdf.values().iter().map(|&v| v > SUPPORT_FLOOR && v < 1.0 - SUPPORT_FLOOR).collect()
}

/// Mass of every grid cell, indexed by its lower-corner node (`None` for
/// nodes on an upper face).
fn cell_masses(cdf: &GriddedCdf) -> Vec<Option<f64>> {
    let grid = cdf.grid();
    let d = grid.dim();
    (0..grid.len())
        .map(|f| {
            let idx = grid.multi_index(f);
            if (0..d).any(|k| idx[k] + 1 >= grid.axis(k).nodes) {
                return None;
            }
            let mut m = 0.0;
            for corner in 0..(1usize << d) {
                let mut g = f;
                let mut lower = 0;
                for k in 0..d {
                    if (corner >> k) & 1 == 1 {
                        g += grid.stride(k);
                    } else {
                        lower += 1;
                    }
                }
                let v = cdf.value_at_node(g);
                m += if lower % 2 == 0 { v } else { -v };
            }
            Some(m)
        })
        .collect()
}

fn cell_centre(grid: &Grid, f: usize) -> Vec<f64> {
    let mut p = grid.node(f);
    for (k, v) in p.iter_mut().enumerate() {
        *v += 0.5 * grid.axis(k).step();
    }
    p
}

/// Convexity of a finite point set `inside` relative to the candidate
/// points `outside`: a violation is an outside point lying deeper than
/// `slack` inside the convex hull of `inside`. Returns the violating points
/// and the largest depth. Exact hull in 1-D and 2-D; in 3-D a sampled
/// segment test (an outside point within `slack` of a segment between two
/// inside points, and farther than `slack` from every inside point).
fn convexity_violations(inside: &[Vec<f64>], outside: &[Vec<f64>], slack: f64) -> (Vec<Vec<f64>>, f64) {
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    if inside.len() < 2 || outside.is_empty() {
        return (bad, worst);
    }
    match inside[0].len() {
        1 => {
            let lo = inside.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = inside.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            for p in outside {
                let depth = (p[0] - lo).min(hi - p[0]);
                if depth > slack {
                    worst = worst.max(depth);
                    bad.push(p.clone());
                }
            }
        }
        2 => {
            let hull = convex_hull_2d(inside);
            if hull.len() < 3 {
                return (bad, worst);
            }
            for p in outside {
                let depth = hull_depth(&hull, p);
                if depth > slack {
                    worst = worst.max(depth);
                    bad.push(p.clone());
                }
            }
        }
        _ => {
            let n = inside.len();
            let pairs = (n * (n - 1) / 2).min(SIDE_PAIR_CAP);
            let mut flagged = vec![false; outside.len()];
            for i in 0..pairs {
                let u = quasi::halton(i, 2);
                let (a, b) = ((u[0] * n as f64) as usize, (u[1] * n as f64) as usize);
                if a == b {
                    continue;
                }
                for (o, p) in outside.iter().enumerate() {
                    if flagged[o] || segment_point_distance(&inside[a], &inside[b], p) > slack {
                        continue;
                    }
                    let near = inside.iter().map(|q| sq_dist(p, q)).fold(f64::INFINITY, f64::min);
                    let depth = libm::sqrt(near);
                    if depth > slack {
                        flagged[o] = true;
                        worst = worst.max(depth);
                        bad.push(p.clone());
                    }
                }
            }
        }
    }
    (bad, worst)
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
fn convex_hull_2d(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Signed distance from `p` to the boundary of a counter-clockwise hull,
/// positive inside.
fn hull_depth(hull: &[[f64; 2]], p: &[f64]) -> f64 {
    let mut depth = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len = libm::sqrt(ex * ex + ey * ey);
        if len == 0.0 {
            continue;
        }
        let s = (ex * (p[1] - a[1]) - ey * (p[0] - a[0])) / len;
        depth = depth.min(s);
    }
    depth
}

fn segment_point_distance(a: &[f64], b: &[f64], p: &[f64]) -> f64 {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
    let t = if ab == 0.0 {
        0.0
    } else {
        let ap: f64 = a.iter().zip(b).zip(p).map(|((x, y), q)| (y - x) * (q - x)).sum();
        (ap / ab).clamp(0.0, 1.0)
    };
    let d2: f64 = a
        .iter()
        .zip(b)
        .zip(p)
        .map(|((x, y), q)| {
            let c = x + t * (y - x) - q;
            c * c
        })
        .sum();
    libm::sqrt(d2)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LevelConvexity {
    pub level: f64,
    pub nodes: usize,
    pub violations: usize,
    /// Deepest violation, in grid cells.
    pub worst_depth_cells: f64,
    pub pass: bool,
}

/// For every level `α`, checks that the nodes with `F ≥ α` form a convex
/// set up to a one-cell slack.
pub fn check_epigraph_convexity(cdf: &GriddedCdf, levels: &[f64]) -> Result<Vec<LevelConvexity>> {
    let grid = cdf.grid();
    let slack = grid.max_step() * (1.0 + 1e-9);
    let mut out = Vec::with_capacity(levels.len());
    for &alpha in levels {
        if !(alpha > BAND_DELTA && alpha < 1.0 - BAND_DELTA) {
            return Err(Error::LevelOutOfRange(alpha));
        }
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for f in 0..grid.len() {
            if cdf.value_at_node(f) >= alpha {
                inside.push(grid.node(f));
            } else {
                outside.push(grid.node(f));
            }
        }
        let (bad, worst) = convexity_violations(&inside, &outside, slack);
        out.push(LevelConvexity {
            level: alpha,
            nodes: inside.len(),
            violations: bad.len(),
            worst_depth_cells: grid.in_cells(worst),
            pass: bad.is_empty(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DominationReport {
    pub checked: usize,
    pub uncovered_count: usize,
    /// Up to 1000 support nodes comparable with no manifold point.
    pub uncovered: Vec<Vec<f64>>,
    pub pass: bool,
}

/// Every support node of `fz` must dominate or be dominated by some
/// manifold point with common value in `(0, 1)`.
pub fn check_domination_coverage(manifold: &IntersectionManifold, grid: &Grid, fz: &GriddedCdf) -> DominationReport {
    let anchors: Vec<&[f64]> = manifold
        .points
        .iter()
        .zip(&manifold.common_value)
        .filter(|(_, &v)| v > 0.0 && v < 1.0)
        .map(|(p, _)| p.as_slice())
        .collect();
    let support = positive_support(fz);
    let mut checked = 0;
    let mut uncovered_count = 0;
    let mut uncovered = Vec::new();
    for f in 0..grid.len() {
        if !support[f] {
            continue;
        }
        checked += 1;
        let x = grid.node(f);
        if !anchors.iter().any(|m| dominance_unchecked(m, &x).comparable()) {
            uncovered_count += 1;
            if uncovered.len() < MAX_LISTED {
                uncovered.push(x);
            }
        }
    }
    DominationReport { checked, uncovered_count, uncovered, pass: uncovered_count == 0 && !anchors.is_empty() }
}

/// Which CDF and which end of `[0, 1]` a side-condition witness refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub enum Side {
    /// `F_z ≤ δ`
    ZLow,
    /// `F_z ≥ 1 − δ`
    ZHigh,
    /// `F_z' ≤ δ`
    ZPrimeLow,
    /// `F_z' ≥ 1 − δ`
    ZPrimeHigh,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SideWitness {
    pub side: Side,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SideReport {
    pub pairs_checked: usize,
    pub witness: Option<SideWitness>,
    pub pass: bool,
}

/// No segment joining two nodes with `F ≈ 0` (or two with `F ≈ 1`), for
/// either CDF, may cross the manifold. `F ≈ 0` means `F ≤ δ`. All pairs are
/// examined when there are at most [`SIDE_PAIR_CAP`]; otherwise that many
/// quasi-random pairs.
pub fn check_side_condition(manifold: &IntersectionManifold, fz: &GriddedCdf, fzp: &GriddedCdf) -> SideReport {
    let grid = fz.grid();
    let reach = 0.5 * grid.min_step();
    let crossing = Crossing::new(manifold, reach);
    let mut pairs_checked = 0;
    let sides = [
        (Side::ZLow, fz, true),
        (Side::ZHigh, fz, false),
        (Side::ZPrimeLow, fzp, true),
        (Side::ZPrimeHigh, fzp, false),
    ];
    for (side, cdf, low) in sides {
        let nodes: Vec<usize> = (0..grid.len())
            .filter(|&f| {
                let v = cdf.value_at_node(f);
                if low {
                    v <= BAND_DELTA
                } else {
                    v >= 1.0 - BAND_DELTA
                }
            })
            .collect();
        let n = nodes.len();
        if n < 2 {
            continue;
        }
        let test = |a: usize, b: usize| -> Option<SideWitness> {
            let (x1, x2) = (grid.node(nodes[a]), grid.node(nodes[b]));
            if crossing.hits(&x1, &x2) {
                Some(SideWitness { side, x1, x2 })
            } else {
                None
            }
        };
        if n * (n - 1) / 2 <= SIDE_PAIR_CAP {
            for a in 0..n {
                for b in a + 1..n {
                    pairs_checked += 1;
                    if let Some(w) = test(a, b) {
                        return SideReport { pairs_checked, witness: Some(w), pass: false };
                    }
                }
            }
        } else {
            let mut i = 0;
            let mut done = 0;
            while done < SIDE_PAIR_CAP {
                let u = quasi::halton(i, 2);
                i += 1;
                let (a, b) = ((u[0] * n as f64) as usize, (u[1] * n as f64) as usize);
                if a == b {
                    continue;
                }
                done += 1;
                pairs_checked += 1;
                if let Some(w) = test(a, b) {
                    return SideReport { pairs_checked, witness: Some(w), pass: false };
                }
            }
        }
    }
    SideReport { pairs_checked, witness: None, pass: true }
}

/// Segment–manifold intersection test.
struct Crossing<'a> {
    manifold: &'a IntersectionManifold,
    isolated: Vec<usize>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    reach: f64,
}

impl<'a> Crossing<'a> {
    fn new(manifold: &'a IntersectionManifold, reach: f64) -> Self {
        let d = manifold.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in &manifold.points {
            for k in 0..d {
                lo[k] = lo[k].min(p[k] - reach);
                hi[k] = hi[k].max(p[k] + reach);
            }
        }
        let isolated = if d == 2 { manifold.isolated() } else { (0..manifold.len()).collect() };
        Crossing { manifold, isolated, lo, hi, reach }
    }

    /// Whether `(1 − t)x1 + t x2`, `t ∈ [0, 1)`, meets the manifold.
    fn hits(&self, x1: &[f64], x2: &[f64]) -> bool {
        let d = x1.len();
        if self.manifold.is_empty() {
            return false;
        }
        for k in 0..d {
            if x1[k].max(x2[k]) < self.lo[k] || x1[k].min(x2[k]) > self.hi[k] {
                return false;
            }
        }
        if d == 1 {
            let (a, b) = (x1[0].min(x2[0]), x1[0].max(x2[0]));
            return self.manifold.points.iter().any(|p| p[0] >= a && p[0] <= b && p[0] != x2[0]);
        }
        if d == 2 && self.manifold.segments().any(|(p, q)| segments_intersect(x1, x2, p, q)) {
            return true;
        }
        self.isolated.iter().any(|&i| segment_point_distance(x1, x2, &self.manifold.points[i]) <= self.reach)
    }
}

fn segments_intersect(a: &[f64], b: &[f64], p: &[f64], q: &[f64]) -> bool {
    let orient = |o: &[f64], u: &[f64], v: &[f64]| (u[0] - o[0]) * (v[1] - o[1]) - (u[1] - o[1]) * (v[0] - o[0]);
    let d1 = orient(p, q, a);
    let d2 = orient(p, q, b);
    let d3 = orient(a, b, p);
    let d4 = orient(a, b, q);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |o: &[f64], u: &[f64], v: &[f64], s: f64| {
        s == 0.0 && v[0] >= o[0].min(u[0]) && v[0] <= o[0].max(u[0]) && v[1] >= o[1].min(u[1]) && v[1] <= o[1].max(u[1])
    };
    // Touching cases; `b` resting on the manifold does not count.
    on(p, q, a, d1) || on(a, b, p, d3) || on(a, b, q, d4)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DimensionCheck {
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub grid_dim: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RegularityCheck {
    pub max_cell_mass: f64,
    pub atom_free: bool,
    pub monotone: bool,
    /// Cells inside the band that gain no mass along the main diagonal.
    pub flat_cells: usize,
    pub strictly_increasing: bool,
    pub support_cells: usize,
    pub support_convex: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CommonSupportCheck {
    /// Nodes in the support of exactly one of the two CDFs.
    pub symmetric_difference: usize,
    pub examples: Vec<Vec<f64>>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RelevanceCheck {
    pub max_abs_difference: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ManifoldVerdict {
    pub index: usize,
    pub nodes: usize,
    pub centroid: Vec<f64>,
    pub transversal: usize,
    pub coincide: usize,
    pub tangent: usize,
    pub part2: bool,
    pub domination: DominationReport,
    pub side: SideReport,
    pub part3: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct AssumptionReport {
    pub dimensions: DimensionCheck,
    pub regularity_z: RegularityCheck,
    pub regularity_zprime: RegularityCheck,
    pub relevance: RelevanceCheck,
    pub common_support: CommonSupportCheck,
    pub epigraph_z: Vec<LevelConvexity>,
    pub epigraph_zprime: Vec<LevelConvexity>,
    pub manifolds: Vec<IntersectionManifold>,
    pub verdicts: Vec<ManifoldVerdict>,
    pub pass: bool,
}

impl AssumptionReport {
    /// Index of the first manifold that passes parts 2 and 3.
    pub fn qualifying_manifold(&self) -> Option<usize> {
        self.verdicts.iter().find(|v| v.pass).map(|v| v.index)
    }

    /// Short machine-readable reasons for a failing verdict.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.dimensions.pass {
            out.push("dimensions");
        }
        if !self.regularity_z.pass || !self.regularity_zprime.pass {
            out.push("regularity");
        }
        if !self.relevance.pass {
            out.push("relevance");
        }
        if !self.common_support.pass {
            out.push("common_support");
        }
        if self.manifolds.is_empty() {
            out.push("no_intersection");
        } else if self.qualifying_manifold().is_none() {
            out.push("no_qualifying_manifold");
        }
        out
    }
}

fn regularity(cdf: &GriddedCdf) -> RegularityCheck {
    let grid = cdf.grid();
    let d = grid.dim();
    let masses = cell_masses(cdf);
    let max_cell_mass = masses.iter().flatten().copied().fold(0.0, f64::max);
    let monotone = cdf.monotonicity_violations(crate::measure::VALUE_TOL).is_empty();
    let diag: usize = (0..d).map(|k| grid.stride(k)).sum();
    let mut flat_cells = 0;
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    for (f, m) in masses.iter().enumerate() {
        let Some(m) = *m else { continue };
        let v = cdf.value_at_node(f);
        let w = cdf.value_at_node(f + diag);
        if v > BAND_DELTA && w < 1.0 - BAND_DELTA && w <= v {
            flat_cells += 1;
        }
        if m > SUPPORT_FLOOR {
            inside.push(cell_centre(grid, f));
        } else {
            outside.push(cell_centre(grid, f));
        }
    }
    let (bad, _) = convexity_violations(&inside, &outside, grid.max_step() * (1.0 + 1e-9));
    let atom_free = max_cell_mass <= ATOM_MASS;
    let support_convex = bad.is_empty();
    RegularityCheck {
        max_cell_mass,
        atom_free,
        monotone,
        flat_cells,
        strictly_increasing: flat_cells == 0,
        support_cells: inside.len(),
        support_convex,
        pass: atom_free && monotone && flat_cells == 0 && support_convex,
    }
}

/// Runs every check on the pair `(F_z, F_z')`. `dims = (d, k, m)` are the
/// dimensions of `Y` (and `ε`), `X` (and `U`) and `Z`.
pub fn assumption_report(fz: &GriddedCdf, fzp: &GriddedCdf, dims: (usize, usize, usize)) -> Result<AssumptionReport> {
    if fz.grid() != fzp.grid() {
        return Err(Error::GridsDiffer);
    }
    let grid = fz.grid();
    let (d, k, m) = dims;
    let dimensions =
        DimensionCheck { d, k, m, grid_dim: grid.dim(), pass: d >= 1 && m >= 1 && k == grid.dim() && k <= MAX_DIM };
    let regularity_z = regularity(fz);
    let regularity_zprime = regularity(fzp);

    let max_abs_difference = fz.values().iter().zip(fzp.values()).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max);
    let relevance = RelevanceCheck {
        max_abs_difference,
        threshold: RELEVANCE_THRESHOLD,
        pass: max_abs_difference > RELEVANCE_THRESHOLD,
    };

    let (sa, sb) = (positive_support(fz), positive_support(fzp));
    let mut symmetric_difference = 0;
    let mut examples = Vec::new();
    for f in 0..grid.len() {
        if sa[f] != sb[f] {
            symmetric_difference += 1;
            if examples.len() < 16 {
                examples.push(grid.node(f));
            }
        }
    }
    let common_support = CommonSupportCheck { symmetric_difference, examples, pass: symmetric_difference == 0 };

    let epigraph_z = check_epigraph_convexity(fz, &DEFAULT_CONVEXITY_LEVELS)?;
    let epigraph_zprime = check_epigraph_convexity(fzp, &DEFAULT_CONVEXITY_LEVELS)?;
    let convex = epigraph_z.iter().chain(&epigraph_zprime).all(|l| l.pass);

    let manifolds = intersection_set(fz, fzp)?;
    let verdicts: Vec<ManifoldVerdict> = manifolds
        .iter()
        .enumerate()
        .map(|(index, man)| {
            let tangent = man.count(NodeClass::Tangent);
            let part2 = convex && !man.is_empty() && tangent == 0;
            let domination = check_domination_coverage(man, grid, fz);
            let side = check_side_condition(man, fz, fzp);
            let part3 = domination.pass && side.pass;
            ManifoldVerdict {
                index,
                nodes: man.len(),
                centroid: man.centroid(),
                transversal: man.count(NodeClass::Transversal),
                coincide: man.count(NodeClass::Coincide),
                tangent,
                part2,
                domination,
                side,
                part3,
                pass: part2 && part3,
            }
        })
        .collect();

    let pass = dimensions.pass
        && regularity_z.pass
        && regularity_zprime.pass
        && relevance.pass
        && common_support.pass
        && verdicts.iter().any(|v| v.pass);
    Ok(AssumptionReport {
        dimensions,
        regularity_z,
        regularity_zprime,
        relevance,
        common_support,
        epigraph_z,
        epigraph_zprime,
        manifolds,
        verdicts,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_depth_of_square() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0], vec![1.0, 1.0]];
        let hull = convex_hull_2d(&pts);
        assert_eq!(hull.len(), 4);
        assert!((hull_depth(&hull, &[1.0, 1.0]) - 1.0).abs() < 1e-12);
        assert!(hull_depth(&hull, &[3.0, 1.0]) < 0.0);
    }

    #[test]
    fn segment_crossings() {
        let s = |a: [f64; 2], b: [f64; 2], p: [f64; 2], q: [f64; 2]| segments_intersect(&a, &b, &p, &q);
        assert!(s([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]));
        assert!(!s([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]));
        assert!(s([0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [1.0, 1.0]));
    }

    #[test]
    fn l_shape_is_not_convex() {
        let mut inside = Vec::new();
        let mut outside = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let p = vec![i as f64, j as f64];
                if i < 3 || j < 3 {
                    inside.push(p);
                } else {
                    outside.push(p);
                }
            }
        }
        let (bad, worst) = convexity_violations(&inside, &outside, 1.0);
        assert!(!bad.is_empty());
        assert!(worst > 2.0);
    }
}
