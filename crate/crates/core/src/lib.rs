//! Heavy-tailed branching processes with immigration.
//!
//! Simulation of the integer-valued recursion `X_t = θ_t ∘ X_{t-1} + B_t`
//! (and its max variant), exact generating-function oracles for the
//! stationary law, and extreme-value diagnostics that compare simulated
//! paths with closed-form tail constants, extremal index, cluster-size law,
//! Fréchet maxima and stable partial-sum limits.

pub mod cli;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod extremes;
pub mod numeric;
pub mod oracle;
pub mod process;
pub mod rng;
pub mod stats;
pub mod sums;
pub mod tail;

pub use dist::{DistributionSpec, Moments};
pub use error::{Error, Result};
pub use process::{
    check_ergodicity, sample_iterated_thinning, sample_stationary_backward, simulate_path, step, thin, Depth,
    ErgodicityReport, ModelConfig, PathSample, Regime, StationarySampler, Variant,
};
pub use rng::{seed_streams, RandomStream};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentKind, RunOutcome, Sizes};
pub use extremes::{ExtremesParams, ExtremesReport};
pub use oracle::{StationaryMoments, StationaryOracle};
pub use sums::{SumsRegime, SumsReport};
pub use tail::{HillEstimate, TailReport};
