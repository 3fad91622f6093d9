//! Regularity indicators: Voronoi deviation (exact linear program and a
//! greedy upper bound), regularity reports and the consistency functionals
//! `J_alpha`, `J~_{alpha,2}`, `K_{n+1}`.

mod deviation;
mod functionals;
mod regularity;
pub mod simplex;

pub use deviation::{
    local_deviation, voronoi_deviation, voronoi_deviation_bound, voronoi_deviation_exact,
    voronoi_deviation_exact_capped, DeviationKind, DeviationResult, TransportPlan, DEFAULT_LP_CAP, PLAN_TOL,
};
pub use functionals::{
    continuum_moment, error_functionals, multi_indices, second_moment_identity, ErrorFunctionals, FunctionalEvaluator,
};
pub use regularity::{
    regularity_report, sequence_report, write_indicator_csv, IndicatorRow, RegularityReport, SequenceReport,
    DEFAULT_BAND_FACTOR,
};
