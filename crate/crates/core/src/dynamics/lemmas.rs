use alloc::vec;
use alloc::vec::Vec;

use super::distance;
use crate::manifold::{IntersectionManifold, SUPPORT_FLOOR};
use crate::measure::{level_set, GriddedCdf, BAND_DELTA};
use crate::quasi::halton_in_box;
use crate::transport::TransportMap;
use crate::{Error, Result};

/// Discretization slack for the fixed-set check, in grid cells.
pub const DEFAULT_FIXED_SET_CELLS: f64 = 2.0;

/// Allowed shortfall `F_z(Tx₀) − F_z'(Tx₀) ≥ −ORDER_SLACK`.
pub const ORDER_SLACK: f64 = 1e-3;

/// Median distance between `T(x)` and the metric projection that passes.
pub const DEFAULT_PROJECTION_CELLS: f64 = 3.0;

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct FixedSetReport {
    pub nodes: usize,
    /// Cell width the displacements are measured in.
    pub cell: f64,
    /// `‖T(x*) − x*‖` per manifold node, in cells.
    pub displacements: Vec<f64>,
    pub max_cells: f64,
    pub median_cells: f64,
    pub worst_node: Vec<f64>,
    pub tol_cells: f64,
    pub pass: bool,
}

/// Displacement of every manifold node under `T`, in cells of the map's
/// source grid. An empty manifold does not pass.
pub fn check_fixed_set(t: &TransportMap, manifold: &IntersectionManifold, tol_cells: f64) -> FixedSetReport {
    let cell = t.cell_size();
    let displacements: Vec<f64> = manifold.points.iter().map(|p| distance(&t.apply(p), p) / cell).collect();
    let (mut max_cells, mut worst) = (0.0, 0);
    for (i, &d) in displacements.iter().enumerate() {
        if d > max_cells {
            max_cells = d;
            worst = i;
        }
    }
    let nodes = manifold.len();
    FixedSetReport {
        nodes,
        cell,
        median_cells: median(&displacements),
        displacements,
        max_cells,
        worst_node: manifold.points.get(worst).cloned().unwrap_or_default(),
        tol_cells,
        pass: nodes > 0 && max_cells <= tol_cells,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrderViolation {
    pub index: usize,
    pub start: Vec<f64>,
    pub image: Vec<f64>,
    /// `F_z(Tx₀) − F_z'(Tx₀)`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrderPreservationReport {
    pub checked: usize,
    /// Starts violating `F_z(x₀) > F_z'(x₀) > 0`.
    pub skipped: Vec<usize>,
    pub violations: Vec<OrderViolation>,
    pub worst_margin: f64,
    pub slack: f64,
    pub pass: bool,
}

/// For every start with `F_z(x₀) > F_z'(x₀) > 0`, checks
/// `F_z(Tx₀) ≥ F_z'(Tx₀)` up to [`ORDER_SLACK`].
pub fn check_order_preservation(
    t: &TransportMap,
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
    starts: &[Vec<f64>],
) -> OrderPreservationReport {
    let mut skipped = Vec::new();
    let mut violations = Vec::new();
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for (i, x) in starts.iter().enumerate() {
        let (a, b) = (fz.at(x), fzp.at(x));
        if !(a > b && b > 0.0) {
            skipped.push(i);
            continue;
        }
        checked += 1;
        let y = t.apply(x);
        let margin = fz.at(&y) - fzp.at(&y);
        worst = worst.min(margin);
        if margin < -ORDER_SLACK {
            violations.push(OrderViolation { index: i, start: x.clone(), image: y, margin });
        }
    }
    OrderPreservationReport {
        checked,
        skipped,
        pass: violations.is_empty(),
        violations,
        worst_margin: if checked > 0 { worst } else { 0.0 },
        slack: ORDER_SLACK,
    }
}

/// Every grid node with `F_z > F_z' > 0`.
pub fn order_preservation_starts(fz: &GriddedCdf, fzp: &GriddedCdf) -> Vec<Vec<f64>> {
    (0..fz.grid().len())
        .filter(|&f| {
            let (a, b) = (fz.value_at_node(f), fzp.value_at_node(f));
            a > b && b > SUPPORT_FLOOR
        })
        .map(|f| fz.grid().node(f))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProjectionReport {
    pub point: Vec<f64>,
    /// `F_z(x)`, the level of the target isoquant.
    pub alpha: f64,
    pub projection: Vec<f64>,
    pub image: Vec<f64>,
    /// `x` already lies in `{F_z' ≥ α}`.
    pub trivial: bool,
    /// `‖T(x) − projection‖` in cells of the `F_z'` grid.
    pub distance_cells: f64,
}

/// Nearest point to `p` on segment `[a, b]`.
fn closest_on_segment(a: &[f64], b: &[f64], p: &[f64]) -> Vec<f64> {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum();
    let t = if ab == 0.0 {
        0.0
    } else {
        let ap: f64 = a.iter().zip(b).zip(p).map(|((x, y), q)| (y - x) * (q - x)).sum();
        (ap / ab).clamp(0.0, 1.0)
    };
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

/// Metric projection of `x` onto the epigraph `{F_z' ≥ F_z(x)}` compared
/// with `T(x)`. The boundary is the `F_z'` isoquant at `α = F_z(x)`; the
/// projection is the nearest point on its polylines (on its points in 1-D
/// and 3-D).
pub fn check_metric_projection(
    t: &TransportMap,
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
    x: &[f64],
) -> Result<ProjectionReport> {
    let alpha = fz.at(x);
    let image = t.apply(x);
    let cell = fzp.grid().max_step();
    if fzp.at(x) >= alpha {
        return Ok(ProjectionReport {
            point: x.to_vec(),
            alpha,
            projection: x.to_vec(),
            distance_cells: distance(&image, x) / cell,
            image,
            trivial: true,
        });
    }
    let iso = level_set(fzp, alpha)?;
    if iso.is_empty() {
        return Err(Error::EmptyIsoquant(alpha));
    }
    let mut best = (f64::INFINITY, Vec::new());
    let mut consider = |q: Vec<f64>| {
        let d = distance(&q, x);
        if d < best.0 {
            best = (d, q);
        }
    };
    for p in &iso.points {
        consider(p.clone());
    }
    for (a, b) in iso.segments() {
        consider(closest_on_segment(a, b, x));
    }
    let projection = best.1;
    Ok(ProjectionReport {
        point: x.to_vec(),
        alpha,
        distance_cells: distance(&image, &projection) / cell,
        projection,
        image,
        trivial: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProjectionSummary {
    pub reports: Vec<ProjectionReport>,
    pub median_cells: f64,
    pub tol_cells: f64,
    pub pass: bool,
}

/// [`check_metric_projection`] at every point; passes when the median
/// distance is at most `tol_cells`.
pub fn check_metric_projections(
    t: &TransportMap,
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
    points: &[Vec<f64>],
    tol_cells: f64,
) -> Result<ProjectionSummary> {
    let reports = points.iter().map(|x| check_metric_projection(t, fz, fzp, x)).collect::<Result<Vec<_>>>()?;
    let d: Vec<f64> = reports.iter().map(|r| r.distance_cells).collect();
    let median_cells = median(&d);
    Ok(ProjectionSummary { reports, median_cells, tol_cells, pass: median_cells <= tol_cells })
}

/// The first `n` Halton points of the box with `F_z > F_z'` and both CDFs
/// inside the strict-interior band.
pub fn projection_samples(fz: &GriddedCdf, fzp: &GriddedCdf, n: usize) -> Vec<Vec<f64>> {
    let g = fz.grid();
    let (lo, hi) = (g.lower_corner(), g.upper_corner());
    let band = |v: f64| v > BAND_DELTA && v < 1.0 - BAND_DELTA;
    let mut out = vec![];
    let mut batch = 4 * n.max(1);
    while out.len() < n && batch <= 1000 * n.max(1) {
        out = halton_in_box(batch, &lo, &hi)
            .into_iter()
            .filter(|x| {
                let (a, b) = (fz.at(x), fzp.at(x));
                band(a) && band(b) && a > b
            })
            .take(n)
            .collect();
        batch *= 4;
    }
    out
}
