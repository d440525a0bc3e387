use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::manifold::{assumption_report, AssumptionReport, IntersectionManifold};
use crate::measure::{
    build_cdf_from_density_with, level_set, AnalyticDensity, Axis, DensityCdfOptions, Grid, GriddedCdf, IsoLevelSet,
};
use crate::Result;

/// Half-width of the square box `[-6, 6]²` the example pair is tabulated on.
pub const EXAMPLE_BOX: f64 = 6.0;

/// The heavy-tailed `t` law keeps only about 94% of its mass inside the box.
pub const EXAMPLE_MIN_COVERAGE: f64 = 0.9;

/// `(t₂(0, Σ), N(0, Σ'))` with `Σ = [[2, 0.8], [0.8, 0.5]]` and
/// `Σ' = [[1, 0.8], [0.8, 4]]`.
pub fn example_densities() -> (AnalyticDensity, AnalyticDensity) {
    let t = AnalyticDensity::student_t(2.0, vec![vec![2.0, 0.8], vec![0.8, 0.5]]).expect("valid scale");
    let g = AnalyticDensity::gaussian(vec![0.0, 0.0], vec![vec![1.0, 0.8], vec![0.8, 4.0]]).expect("valid covariance");
    (t, g)
}

/// Both CDFs of the example pair on a `resolution × resolution` grid.
pub fn example_pair(resolution: usize) -> Result<(GriddedCdf, GriddedCdf)> {
    let axis = Axis::new(-EXAMPLE_BOX, EXAMPLE_BOX, resolution);
    let grid = Grid::new(vec![axis, axis])?;
    let opts = DensityCdfOptions { min_coverage: EXAMPLE_MIN_COVERAGE, ..Default::default() };
    let (t, g) = example_densities();
    Ok((build_cdf_from_density_with(&t, &grid, opts)?, build_cdf_from_density_with(&g, &grid, opts)?))
}

/// Smallest and largest accepted figure resolutions.
pub const FIGURE_RESOLUTIONS: (usize, usize) = (64, 512);

/// Contour levels drawn for both CDFs.
pub const FIGURE_LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// Everything the figure is drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureData {
    pub resolution: usize,
    pub fz: GriddedCdf,
    pub fzp: GriddedCdf,
    pub contours_z: Vec<IsoLevelSet>,
    pub contours_zprime: Vec<IsoLevelSet>,
    pub report: AssumptionReport,
    /// Index of the component with the larger centroid `x₂`.
    pub upper: Option<usize>,
    pub lower: Option<usize>,
}

impl FigureData {
    pub fn manifolds(&self) -> &[IntersectionManifold] {
        &self.report.manifolds
    }

    /// Two components, the upper one passing and the lower one failing
    /// part 3.
    pub fn matches_example(&self) -> bool {
        let v = &self.report.verdicts;
        match (self.upper, self.lower) {
            (Some(u), Some(l)) if v.len() == 2 => v[u].pass && !v[l].part3,
            _ => false,
        }
    }
}

/// Tabulates the example pair, its contour families, the intersection
/// components and the full assumption report.
pub fn reproduce_cdf_intersection_figure(resolution: usize) -> Result<FigureData> {
    let (lo, hi) = FIGURE_RESOLUTIONS;
    if resolution < lo || resolution > hi {
        return Err(crate::error::invalid(format!("resolution {resolution} outside [{lo}, {hi}]")));
    }
    let (fz, fzp) = example_pair(resolution)?;
    let contours_z = FIGURE_LEVELS.iter().map(|&a| level_set(&fz, a)).collect::<Result<_>>()?;
    let contours_zprime = FIGURE_LEVELS.iter().map(|&a| level_set(&fzp, a)).collect::<Result<_>>()?;
    let report = assumption_report(&fz, &fzp, (2, 2, 1))?;
    let by_height: Vec<(usize, f64)> = report.manifolds.iter().enumerate().map(|(i, m)| (i, m.centroid()[1])).collect();
    let upper = by_height.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0);
    let lower = by_height.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0);
    let lower = if lower == upper { None } else { lower };
    Ok(FigureData { resolution, fz, fzp, contours_z, contours_zprime, report, upper, lower })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RefinementReport {
    pub coarse: usize,
    pub fine: usize,
    pub coarse_components: usize,
    pub fine_components: usize,
    /// Hausdorff distance of each coarse component to the nearest fine
    /// component, in coarse cells.
    pub drift_cells: Vec<f64>,
    pub tolerance_cells: f64,
    pub pass: bool,
}

/// Largest accepted manifold drift under refinement.
pub const REFINEMENT_TOL_CELLS: f64 = 2.0;

/// Compares the intersection components of two figure resolutions.
pub fn compare_refinement(coarse: &FigureData, fine: &FigureData) -> RefinementReport {
    let cell = coarse.fz.grid().max_step();
    let (a, b) = (coarse.manifolds(), fine.manifolds());
    let drift_cells: Vec<f64> =
        a.iter().map(|m| b.iter().map(|n| m.hausdorff(n)).fold(f64::INFINITY, f64::min) / cell).collect();
    let pass = a.len() == b.len() && drift_cells.iter().all(|d| *d <= REFINEMENT_TOL_CELLS);
    RefinementReport {
        coarse: coarse.resolution,
        fine: fine.resolution,
        coarse_components: a.len(),
        fine_components: b.len(),
        drift_cells,
        tolerance_cells: REFINEMENT_TOL_CELLS,
        pass,
    }
}
