//! Fitting forgetting Q-learning models to multi-armed bandit behavior.
//!
//! The main entry point is [`surrogate::solve_surrogate`], which fits a
//! convex relaxation of the maximum-likelihood problem and returns a lower
//! bound on the best achievable negative log-likelihood. Native parameters
//! can then be recovered with [`recovery::recover_all`]. A direct multistart
//! baseline lives in [`dloc`], synthetic data in [`sim`], and the benchmark
//! harness in [`bench`].

pub mod bench;
pub mod boxmin;
pub mod cli;
pub mod dataset;
pub mod dloc;
pub mod error;
pub mod features;
pub mod isotonic;
pub mod metrics;
pub mod model;
pub mod recovery;
pub mod rng;
pub mod sim;
pub mod surrogate;

pub use error::{FitError, Result};
pub use features::{build_lagged, kernel_from_params, kernel_values, KernelMatrix, LaggedRewards};
pub use isotonic::project_monotone_nonneg;
pub use model::{log_likelihood, policy, value_recursion, ModelConfig, RLParams, RewardSeries, ValueTrace};
pub use surrogate::{nll_and_gradient, solve_surrogate, SolveStatus, SolverOptions, SurrogateProblem, SurrogateSolution};

pub use dataset::{Dataset, Episode};
pub use dloc::{dloc_gradient, dloc_objective, fit_dloc, DlocFit, DlocOptions};
pub use metrics::{mean_kl, param_errors};
pub use recovery::{recover_all, recover_row, RecoveryMethod, RecoveryOptions, RecoveryResult, RowFit};
pub use sim::{make_dataset, run_episode, sample_params, Bandit, EnvSpec, Setup};
pub use bench::{run_benchmark, BenchOptions, BenchReport, FitReport, Method};
