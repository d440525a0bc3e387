//! Discrete optimal transport: exact and entropic plans, maps and checks.

pub mod cost;
pub mod entropic;
pub mod exact;
pub mod map;
pub mod plan;
pub mod verify;

pub use cost::CostFunction;
pub use entropic::{
    epsilon_ladder, median_pairwise_cost, solve_entropic, solve_entropic_grid, GridTransport, DENSE_ENTRIES_CAP,
    MARGINAL_TOL,
};
pub use exact::{brute_force_oracle, solve_exact, solve_monotone_1d, EXACT_SIZE_CAP, ORACLE_SIZE_CAP};
pub use map::{
    composition_residual, entropic_map_at, extract_map, grid_transport_inverse_map, grid_transport_map,
    gridded_quantile, invert_map, monotone_rearrangement_1d, MapOrigin, TransportMap, INVERSE_MASS_FRACTION,
};
pub use plan::{Coupling, TransportPlan};
pub use verify::{
    check_brenier_properties, check_cyclical_monotonicity, check_measure_preserving, default_rectangles, BrenierReport,
    CyclicalMonotonicityReport, MeasurePreservingReport, Rectangle, RectangleDiscrepancy, DEFAULT_RECTANGLES,
    MEASURE_PRESERVING_TOL,
};
