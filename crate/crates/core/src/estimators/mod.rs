//! Monte Carlo estimators and closed-form bounds.

pub mod blocks;
pub mod bounds;
pub mod convergence;
pub mod correlation;
pub mod report;
pub mod survival;
pub mod sweep;

pub use report::{config_hash, EstimateReport, Replicates, Tally};
pub use survival::{estimate_survival, survival_curve, SurvivalMode};
pub use blocks::{estimate_block_conditions, estimate_occupation_events, BlockEstimates, BlockSpec};
pub use correlation::{check_positive_correlations, CorrelationReport, CylinderEvent, Requirement};
pub use sweep::{bisect_pseudo_critical, monotonicity_sweep, Axis, BisectionOptions, BisectionResult, SweepResult};
pub use bounds::{branching_bound_delta_p, extinction_threshold_beta, BoundsInput, DeltaBound};
pub use convergence::{convergence_diagnostic, ConvergenceOptions, ConvergenceReport, Cylinders};
