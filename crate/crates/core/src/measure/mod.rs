//! Probability measures on rectangular grids: analytic densities, gridded
//! distribution functions, level sets and the componentwise order.

pub mod cdf;
pub mod density;
pub mod discrete;
pub mod grid;
pub mod level;
pub mod order;

pub use cdf::{
    build_cdf_from_density, build_cdf_from_density_with, build_cdf_from_samples, CdfMethod, CdfValue,
    DensityCdfOptions, GriddedCdf, VALUE_TOL,
};
pub use density::{AnalyticDensity, DensityFamily};
pub use discrete::DiscreteMeasure;
pub use grid::{Axis, Grid, DEFAULT_NODE_CAP, MAX_DIM};
pub use level::{level_set, IsoLevelSet, BAND_DELTA, CONTOUR_TOL};
pub use order::{dominates, Dominance};

/// Probability of `(a, b]` under a gridded CDF; see
/// [`GriddedCdf::rectangle_probability`].
pub fn rectangle_probability(cdf: &GriddedCdf, a: &[f64], b: &[f64]) -> crate::Result<f64> {
    cdf.rectangle_probability(a, b)
}

/// Interpolated CDF value with the clamping flag; see [`GriddedCdf::eval`].
pub fn eval_cdf(cdf: &GriddedCdf, x: &[f64]) -> CdfValue {
    cdf.eval(x)
}
