//! Asymptotic-preserving particle schemes for the two-velocity
//! Goldstein-Taylor model in the diffusive scaling, with a coupled
//! multilevel Monte Carlo estimator, analytic reference moments and an
//! experiment CLI.

pub mod cli;
pub mod coupling;
pub mod error;
pub mod mlmc;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use coupling::{
    coarsen_alpha, coarsen_xi, coupled_coarse_window, coupled_path_pair, coupled_trajectory, CoupledPair,
    CoupledStepRecord, CoupledStepper, TrajectoryRow,
};
pub use error::{Error, Result};
pub use mlmc::{
    allocate_samples, build_hierarchy, classical_equivalent, level_study, run_adaptive, LevelHierarchy, LevelSpec,
    LevelStudyConfig, MlmcConfig, MlmcReport, Strategy,
};
pub use model::{
    ap_collision_step, ap_step, ap_transport_diffusion_step, classical_step, make_params, simulate_classical_path,
    simulate_path, InitialCondition, ParticleState, Qoi, SchemeParams, Sign,
};
pub use oracle::{exact_second_moment, heat_limit_moment, sign_autocorrelation, MomentQuery};
pub use rng::{stream_for, Draws, RngStream, StreamKey};
pub use stats::{LevelStats, RunningStats};
