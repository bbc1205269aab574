//! Gaussian process regression with uncertain training inputs.
//!
//! Some training inputs are only known through independent Gaussian priors.
//! Their posterior is sampled with random-walk Metropolis under the GP joint
//! likelihood, and the GP predictive distribution is then marginalized over
//! those samples (or over prior draws, as a baseline).
//!
//! The pipeline is:
//!
//! 1. [`gp::optimize_hyperparameters`] fits kernel hyperparameters once, with
//!    every uncertain input replaced by its prior mean, and freezes them.
//! 2. [`mcmc::log_unnormalized_posterior`] + [`mcmc::run_metropolis`] sample
//!    the uncertain locations.
//! 3. [`prediction::marginal_predict`] averages per-sample GP predictions
//!    into a marginal mean and variance (law of total variance).
//! 4. [`analysis`] scores the result; [`harness`] drives the experiments.

pub mod analysis;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod mcmc;
pub mod prediction;
pub mod prior;
pub mod rng;

pub use error::{Error, Result};
pub use gp::{FittedGP, TrainingData};
pub use kernel::KernelHyperparams;
pub use mcmc::{MetropolisConfig, PosteriorChain};
pub use prediction::{PredictiveSummary, SampleSource};
pub use prior::InputPrior;
