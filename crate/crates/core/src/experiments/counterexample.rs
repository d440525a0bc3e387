use alloc::vec;

use crate::manifold::{assumption_report, AssumptionReport};
use crate::measure::{build_cdf_from_density, AnalyticDensity, Axis, Grid};
use crate::Result;

/// Nodes per axis of the counterexample grid.
pub const COUNTEREXAMPLE_RESOLUTION: usize = 64;

/// `X = βZ + U` with `U` uniform on `[0, 1]²`, compared at `Z = 0` and
/// `Z = 1`. The grid box covers both supports with a margin of 0.25.
pub fn linear_counterexample(beta: f64) -> Result<AssumptionReport> {
    if !beta.is_finite() {
        return Err(crate::error::invalid("beta must be finite"));
    }
    let lo = beta.min(0.0) - 0.25;
    let hi = 1.0 + beta.max(0.0) + 0.25;
    let axis = Axis::new(lo, hi, COUNTEREXAMPLE_RESOLUTION);
    let grid = Grid::new(vec![axis, axis])?;
    let u0 = AnalyticDensity::uniform(vec![0.0, 0.0], vec![1.0, 1.0])?;
    let u1 = AnalyticDensity::uniform(vec![beta, beta], vec![1.0 + beta, 1.0 + beta])?;
    let f0 = build_cdf_from_density(&u0, &grid)?;
    let f1 = build_cdf_from_density(&u1, &grid)?;
    assumption_report(&f0, &f1, (2, 2, 1))
}
