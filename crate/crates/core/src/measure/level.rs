use alloc::vec;
use alloc::vec::Vec;

use super::cdf::GriddedCdf;
use super::grid::Grid;
use crate::{Error, Result};

/// Strict-interior margin: level sets and intersection sets live in the
/// band `δ < F < 1 − δ`.
pub const BAND_DELTA: f64 = 1e-3;

/// Acceptable `|F(x) − α|` for a returned contour node.
pub const CONTOUR_TOL: f64 = 1e-6;

/// `{x : F(x) = α}` of a gridded CDF.
///
/// In 2-D the nodes are chained into polylines (`paths` hold indices into
/// `points`; a closed loop repeats its first index). In 1-D every root is
/// its own path; in 3-D `paths` is empty and `points` is a point cloud.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct IsoLevelSet {
    pub level: f64,
    /// Fingerprint of the CDF the set was computed from.
    pub owner: u64,
    pub points: Vec<Vec<f64>>,
    pub paths: Vec<Vec<usize>>,
}

impl IsoLevelSet {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Consecutive point pairs along every path.
    pub fn segments(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.paths
            .iter()
            .flat_map(|p| p.windows(2))
            .map(|w| (self.points[w[0]].as_slice(), self.points[w[1]].as_slice()))
    }
}

/// Level set of the interpolated CDF at `alpha`.
pub fn level_set(cdf: &GriddedCdf, alpha: f64) -> Result<IsoLevelSet> {
    if !(alpha > BAND_DELTA && alpha < 1.0 - BAND_DELTA) {
        return Err(Error::LevelOutOfRange(alpha));
    }
    let field: Vec<f64> = cdf.values().iter().map(|v| v - alpha).collect();
    let c = zero_crossings(cdf.grid(), &field);
    let paths = match cdf.dim() {
        1 => (0..c.points.len()).map(|i| vec![i]).collect(),
        2 => chain_segments(c.points.len(), &c.segments),
        _ => Vec::new(),
    };
    Ok(IsoLevelSet { level: alpha, owner: cdf.fingerprint(), points: c.points, paths })
}

/// Sign changes of a nodal field along grid edges.
#[derive(Debug, Clone, Default)]
pub(crate) struct Crossings {
    pub points: Vec<Vec<f64>>,
    /// Grid node at the lower end of the edge carrying each point.
    pub owner: Vec<usize>,
    /// In 2-D, pairs of points joined inside one cell.
    pub segments: Vec<(usize, usize)>,
}

/// Locates every zero of the multilinear interpolant of `field` on grid
/// edges (the interpolant is linear on an edge, so the root is exact) and,
/// in 2-D, joins them cell by cell with marching squares. A node value of
/// exactly zero counts as positive.
pub(crate) fn zero_crossings(grid: &Grid, field: &[f64]) -> Crossings {
    let d = grid.dim();
    let mut out = Crossings::default();
    let mut edge_point = vec![usize::MAX; grid.len() * d];
    for f in 0..grid.len() {
        let idx = grid.multi_index(f);
        for k in 0..d {
            if idx[k] + 1 >= grid.axis(k).nodes {
                continue;
            }
            let g = f + grid.stride(k);
            let (v0, v1) = (field[f], field[g]);
            if (v0 >= 0.0) == (v1 >= 0.0) {
                continue;
            }
            let t = v0 / (v0 - v1);
            let mut p = grid.node(f);
            p[k] += t * grid.axis(k).step();
            edge_point[f * d + k] = out.points.len();
            out.points.push(p);
            out.owner.push(f);
        }
    }
    if d == 2 {
        let s1 = grid.stride(0);
        for f in 0..grid.len() {
            let idx = grid.multi_index(f);
            if idx[0] + 1 >= grid.axis(0).nodes || idx[1] + 1 >= grid.axis(1).nodes {
                continue;
            }
            // Corners counter-clockwise from the lower-left one.
            let c = [f, f + s1, f + s1 + 1, f + 1];
            let e = [edge_point[c[0] * 2], edge_point[c[1] * 2 + 1], edge_point[c[3] * 2], edge_point[c[0] * 2 + 1]];
            let hits: Vec<usize> = e.iter().copied().filter(|&p| p != usize::MAX).collect();
            match hits.len() {
                2 => out.segments.push((hits[0], hits[1])),
                4 => {
                    let centre = 0.25 * c.iter().map(|&n| field[n]).sum::<f64>();
                    if (centre >= 0.0) == (field[c[0]] >= 0.0) {
                        out.segments.push((e[0], e[1]));
                        out.segments.push((e[2], e[3]));
                    } else {
                        out.segments.push((e[0], e[3]));
                        out.segments.push((e[1], e[2]));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Chains undirected segments (every point has degree ≤ 2) into polylines.
pub(crate) fn chain_segments(n: usize, segments: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![[usize::MAX; 2]; n];
    for &(a, b) in segments {
        for (x, y) in [(a, b), (b, a)] {
            if adj[x][0] == usize::MAX {
                adj[x][0] = y;
            } else {
                adj[x][1] = y;
            }
        }
    }
    let degree = |i: usize| adj[i].iter().filter(|&&v| v != usize::MAX).count();
    let mut seen = vec![false; n];
    let mut paths = Vec::new();
    let walk = |start: usize, seen: &mut Vec<bool>| {
        let mut path = vec![start];
        seen[start] = true;
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adj[cur].iter().copied().find(|&v| v != usize::MAX && v != prev);
            match next {
                Some(v) if v == start && path.len() > 2 => {
                    path.push(start);
                    break;
                }
                Some(v) if !seen[v] => {
                    seen[v] = true;
                    path.push(v);
                    prev = cur;
                    cur = v;
                }
                _ => break,
            }
        }
        path
    };
    // Open chains first, from their endpoints, then the remaining loops.
    for i in 0..n {
        if !seen[i] && degree(i) <= 1 {
            paths.push(walk(i, &mut seen));
        }
    }
    for i in 0..n {
        if !seen[i] {
            paths.push(walk(i, &mut seen));
        }
    }
    paths
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::cdf::build_cdf_from_density;
    use crate::measure::density::AnalyticDensity;
    use crate::measure::grid::Axis;

    #[test]
    fn uniform_quarter_level() {
        let u = AnalyticDensity::uniform(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let grid = Grid::uniform(2, 0.0, 1.0, 41).unwrap();
        let cdf = build_cdf_from_density(&u, &grid).unwrap();
        let ls = level_set(&cdf, 0.25).unwrap();
        assert_eq!(ls.paths.len(), 1);
        let h = grid.max_step();
        let near = ls.points.iter().any(|p| (p[0] - 0.5).abs() <= h && (p[1] - 0.5).abs() <= h);
        assert!(near);
        for p in &ls.points {
            assert!((p[0] * p[1] - 0.25).abs() < 2e-3, "{p:?}");
        }
    }

    #[test]
    fn gaussian_level_nodes_are_on_level() {
        let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 4.0]]).unwrap();
        let grid = Grid::new(vec![Axis::new(-5.0, 5.0, 81), Axis::new(-10.0, 10.0, 81)]).unwrap();
        let cdf = build_cdf_from_density(&g, &grid).unwrap();
        let ls = level_set(&cdf, 0.3).unwrap();
        assert!(!ls.is_empty());
        for p in &ls.points {
            assert!((cdf.at(p) - 0.3).abs() <= CONTOUR_TOL);
        }
    }

    #[test]
    fn boundary_levels_rejected() {
        let u = AnalyticDensity::uniform(vec![0.0], vec![1.0]).unwrap();
        let cdf = build_cdf_from_density(&u, &Grid::uniform(1, 0.0, 1.0, 11).unwrap()).unwrap();
        assert_eq!(level_set(&cdf, 0.0), Err(Error::LevelOutOfRange(0.0)));
        assert!(level_set(&cdf, 1.0).is_err());
        let ls = level_set(&cdf, 0.35).unwrap();
        assert_eq!(ls.points.len(), 1);
        assert!((ls.points[0][0] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn chaining_closes_loops() {
        let paths = chain_segments(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(paths, vec![vec![0, 1, 2, 3, 0]]);
        let open = chain_segments(3, &[(1, 2), (0, 1)]);
        assert_eq!(open, vec![vec![0, 1, 2]]);
    }
}
