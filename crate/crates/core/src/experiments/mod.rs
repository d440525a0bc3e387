//! Synthetic triangular and hedonic models and end-to-end verdicts.

pub mod counterexample;
pub mod figure;
pub mod hedonic;
pub mod triangular;

pub use counterexample::{linear_counterexample, COUNTEREXAMPLE_RESOLUTION};
pub use figure::{
    compare_refinement, example_densities, example_pair, reproduce_cdf_intersection_figure, FigureData,
    RefinementReport, EXAMPLE_BOX, EXAMPLE_MIN_COVERAGE, FIGURE_LEVELS, FIGURE_RESOLUTIONS, REFINEMENT_TOL_CELLS,
};
pub use hedonic::{
    hedonic_assumptions, hedonic_recover_utility, recover_from_data, simulate_hedonic, GradientSample,
    HedonicModelSpec, HedonicOptions, HedonicRecovery, Surplus, HEDONIC_RMS_TOL, MIN_BIN,
};
pub use triangular::{
    conditional_cdfs, independence_audit, pushforward_audit, simulate_triangular, triangular_assumptions,
    verify_q_constancy, BinCheck, Dataset, Distortion, FirstStage, IndependenceAudit, InstrumentDesign, Latent, OrbitQ,
    PushforwardAudit, QConstancyOptions, QConstancyReport, QDiagnosis, SecondStage, ShiftTerm, TriangularModelSpec,
    Q_VARIATION_TOL,
};

#[cfg(test)]
mod tests;
