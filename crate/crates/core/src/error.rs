use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel matrix is not positive definite (jitter {jitter:e})")]
    IllConditioned { jitter: f64 },

    #[error("hyperparameter optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("initial state has non-finite log target ({0})")]
    InvalidInit(f64),

    #[error("prediction failed: {failed} of {total} samples could not be fitted")]
    PredictionFailed { failed: usize, total: usize },

    #[error("all samples identical; an explicit bandwidth is required")]
    DegenerateBandwidth,

    #[error("unknown latent function `{0}`")]
    UnknownFunction(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
