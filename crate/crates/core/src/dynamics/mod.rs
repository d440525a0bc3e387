//! The `T` / `T⁻¹` orbit iteration between two conditional laws and the
//! checks of the lemmas it rests on.
//!
//! `T` is the Brenier map pushing the law of `F_z` to the law of `F_z'`.
//! An orbit moves greedily: each step applies whichever of `T` and `T⁻¹`
//! lowers `|F_z − F_z'|`, so on a single-manifold configuration it walks
//! toward the intersection manifold.

mod lemmas;
mod stability;

pub use lemmas::{
    check_fixed_set, check_metric_projection, check_metric_projections, check_order_preservation,
    order_preservation_starts, projection_samples, FixedSetReport, OrderPreservationReport, OrderViolation,
    ProjectionReport, ProjectionSummary, DEFAULT_FIXED_SET_CELLS, DEFAULT_PROJECTION_CELLS, ORDER_SLACK,
};
pub use stability::{
    check_stability_in_measure, Perturbation, StabilityReport, StabilityRung, DEVIATION_FRACTION, FINAL_MASS_TOL,
};

use alloc::vec;
use alloc::vec::Vec;

use crate::manifold::SUPPORT_FLOOR;
use crate::measure::{GriddedCdf, BAND_DELTA};
use crate::transport::{
    grid_transport_inverse_map, grid_transport_map, monotone_rearrangement_1d, solve_entropic_grid, TransportMap,
};
use crate::{Error, Result};

/// Engineering cap on the orbit length.
pub const DEFAULT_MAX_STEPS: usize = 200;

/// Default `|F_z − F_z'|` below which an iterate is on the manifold.
pub const DEFAULT_ORBIT_TOL: f64 = 1e-4;

/// Non-reducing steps after which an orbit is declared divergent.
pub const DIVERGENCE_STRIKES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OrbitStatus {
    ConvergedToManifold,
    FixedPoint,
    MaxIterations,
    Diverged,
}

impl OrbitStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OrbitStatus::ConvergedToManifold => "converged_to_manifold",
            OrbitStatus::FixedPoint => "fixed_point",
            OrbitStatus::MaxIterations => "max_iterations",
            OrbitStatus::Diverged => "diverged",
        }
    }
}

/// `x₀, x₁, …, x_N` with the map applied at each step and both CDF values
/// at every iterate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct OrbitTrace {
    pub iterates: Vec<Vec<f64>>,
    /// `directions[n]` takes `x_n` to `x_{n+1}`.
    pub directions: Vec<Direction>,
    /// `(F_z(x_n), F_z'(x_n))`.
    pub values: Vec<(f64, f64)>,
    /// Steps `n` where neither direction lowered the gap.
    pub strikes: Vec<usize>,
    pub status: OrbitStatus,
}

impl OrbitTrace {
    pub fn steps(&self) -> usize {
        self.directions.len()
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("an orbit holds its start")
    }

    /// `|F_z(x_n) − F_z'(x_n)|` along the orbit.
    pub fn gaps(&self) -> Vec<f64> {
        self.values.iter().map(|(a, b)| libm::fabs(a - b)).collect()
    }

    pub fn final_gap(&self) -> f64 {
        let (a, b) = *self.values.last().expect("an orbit holds its start");
        libm::fabs(a - b)
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn in_support(fz: &GriddedCdf, fzp: &GriddedCdf, x: &[f64]) -> bool {
    fz.grid().contains(x) && fz.at(x) > SUPPORT_FLOOR && fzp.at(x) > SUPPORT_FLOOR
}

/// Iterates `T` / `T⁻¹` from `x0`, each step taking the direction with the
/// smaller resulting `|F_z − F_z'|`.
///
/// * `ConvergedToManifold`: the gap dropped below `tol` (at `x0` itself when
///   neither map fixes it).
/// * `FixedPoint`: no direction lowers the gap and the shorter candidate
///   step is under one grid cell of `F_z`.
/// * `Diverged`: [`DIVERGENCE_STRIKES`] steps without reduction. Strikes
///   are not forgiven by later reductions (a tail start can otherwise cycle
///   between one reducing and one non-reducing step forever); between
///   strikes the orbit keeps moving the less bad way.
///
/// Candidates that leave the support are not taken.
pub fn iterate_orbit(
    t: &TransportMap,
    t_inv: &TransportMap,
    fz: &GriddedCdf,
    fzp: &GriddedCdf,
    x0: &[f64],
    max_n: usize,
    tol: f64,
) -> Result<OrbitTrace> {
    if fz.grid() != fzp.grid() {
        return Err(Error::GridsDiffer);
    }
    if x0.len() != fz.dim() {
        return Err(Error::DimensionMismatch { expected: fz.dim(), found: x0.len() });
    }
    if !in_support(fz, fzp, x0) {
        return Err(Error::OutsideSupport);
    }
    let cell = fz.grid().max_step();
    let gap = |x: &[f64]| libm::fabs(fz.at(x) - fzp.at(x));
    let mut trace = OrbitTrace {
        iterates: vec![x0.to_vec()],
        directions: Vec::new(),
        values: vec![(fz.at(x0), fzp.at(x0))],
        strikes: Vec::new(),
        status: OrbitStatus::MaxIterations,
    };
    let mut x = x0.to_vec();
    let mut cur = gap(&x);
    for n in 0..max_n {
        let cands = [(Direction::Forward, t.apply(&x)), (Direction::Inverse, t_inv.apply(&x))];
        let shortest = cands.iter().map(|(_, y)| distance(y, &x)).fold(f64::INFINITY, f64::min);
        if n == 0 && cur < tol {
            trace.status = if shortest < cell { OrbitStatus::FixedPoint } else { OrbitStatus::ConvergedToManifold };
            return Ok(trace);
        }
        let best = cands
            .iter()
            .filter(|(_, y)| in_support(fz, fzp, y))
            .map(|(d, y)| (*d, y, gap(y)))
            .min_by(|a, b| a.2.total_cmp(&b.2));
        let reduces = best.as_ref().is_some_and(|b| b.2 < cur);
        if !reduces {
            if shortest < cell {
                trace.status = OrbitStatus::FixedPoint;
                return Ok(trace);
            }
            trace.strikes.push(n);
            if trace.strikes.len() >= DIVERGENCE_STRIKES || best.is_none() {
                trace.status = OrbitStatus::Diverged;
                return Ok(trace);
            }
        }
        let (dir, y, g) = best.expect("checked above");
        x = y.clone();
        cur = g;
        trace.iterates.push(x.clone());
        trace.directions.push(dir);
        trace.values.push((fz.at(&x), fzp.at(&x)));
        if reduces && cur < tol {
            trace.status = OrbitStatus::ConvergedToManifold;
            return Ok(trace);
        }
    }
    Ok(trace)
}

/// The first `n` Halton points of the grid box where both CDFs lie strictly
/// inside the band `δ < F < 1 − δ`.
pub fn orbit_starts(fz: &GriddedCdf, fzp: &GriddedCdf, n: usize) -> Vec<Vec<f64>> {
    let grid = fz.grid();
    let (lo, hi) = (grid.lower_corner(), grid.upper_corner());
    let d = grid.dim();
    let band = |v: f64| v > BAND_DELTA && v < 1.0 - BAND_DELTA;
    let mut out = Vec::new();
    let mut i = 0;
    // Give up after a generous budget when the band is tiny.
    while out.len() < n && i < 1000 * n.max(1) {
        let h = crate::quasi::halton(i, d);
        let x: Vec<f64> = (0..d).map(|k| lo[k] + h[k] * (hi[k] - lo[k])).collect();
        if band(fz.at(&x)) && band(fzp.at(&x)) {
            out.push(x);
        }
        i += 1;
    }
    out
}

/// Brenier map `T` between the laws of two CDFs on one grid, and `T⁻¹`.
///
/// 1-D uses the monotone rearrangement both ways. Otherwise the node masses
/// (renormalized on the box) are coupled by grid Sinkhorn at `epsilon`
/// (default `h²`), and `T⁻¹` is the barycentric map of the same plan read
/// column-wise.
pub fn brenier_maps(fz: &GriddedCdf, fzp: &GriddedCdf, epsilon: Option<f64>) -> Result<(TransportMap, TransportMap)> {
    if fz.grid() != fzp.grid() {
        return Err(Error::GridsDiffer);
    }
    if fz.dim() == 1 {
        return Ok((monotone_rearrangement_1d(fz, fzp)?, monotone_rearrangement_1d(fzp, fz)?));
    }
    let normalize = |m: Vec<f64>| -> Result<Vec<f64>> {
        let s: f64 = m.iter().sum();
        if !(s > 0.0) {
            return Err(Error::NotNormalized(s));
        }
        Ok(m.into_iter().map(|v| v / s).collect())
    };
    let a = normalize(fz.node_masses())?;
    let b = normalize(fzp.node_masses())?;
    let grid = fz.grid();
    let h = grid.max_step();
    let sol = solve_entropic_grid(grid, &a, grid, &b, epsilon.unwrap_or(h * h))?;
    Ok((grid_transport_map(&sol)?, grid_transport_inverse_map(&sol)?))
}

#[cfg(test)]
mod tests;
