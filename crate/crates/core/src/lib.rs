//! Structure learning for sparse Gaussian Markov random fields with
//! forward-backward greedy algorithms, ℓ1 baselines, synthetic models and
//! a recovery-experiment harness.

pub mod baselines;
pub mod conditions;
pub mod error;
pub mod greedy;
pub mod harness;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
pub use greedy::global::{fit_global_greedy, gaussian_loss, single_pair_min, GlobalFit, PrecisionState};
pub use greedy::neighborhood::{
    combine_neighborhoods, fit_all_neighborhoods, fit_neighborhood, GraphEstimate, NeighborhoodState, Rule,
};
pub use greedy::{stopping_threshold, GreedyConfig};
pub use harness::{run_sweep, ExperimentSpec, Method, SweepResult, SweepRow};
pub use linalg::SymmetricMatrix;
pub use models::{EdgeSet, Family, Model, ModelSpec, SampleSet};
