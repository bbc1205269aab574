//! Synthetic experiments: latent test functions, data generation, the
//! fit → sample → predict → report pipeline and its file formats.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod io;
pub mod latent;
pub mod sobol;

pub use config::ExperimentConfig;
pub use dataset::{generate_dataset, GeneratedDataset};
pub use experiment::{run_experiment, run_pipeline, PipelineResult};
pub use latent::{latent, FunctionId};
pub use sobol::sobol_sequence;
