//! The multilevel estimator: hierarchies, allocation, adaptive control,
//! reports and level studies.

pub mod adaptive;
pub mod allocation;
pub mod hierarchy;
pub mod report;
pub mod sampler;
pub mod study;

pub use adaptive::{run_adaptive, run_fixed, MlmcConfig, DEFAULT_COST_CEILING};
pub use allocation::{allocate_samples, bias_estimate, estimator_variance, BiasEstimate, WARMUP_SAMPLES};
pub use hierarchy::{build_hierarchy, cost_model, steps_for, LevelHierarchy, LevelSpec, Strategy};
pub use report::{
    classical_equivalent, classical_equivalent_from, telescopic_combine, ClassicalComparison, LevelRow,
    LevelTable, MlmcReport, Summary,
};
pub use sampler::{worker_pool, LevelSampler};
pub use study::{level_study, log_log_slope, LevelStudyConfig, StudyRow};
