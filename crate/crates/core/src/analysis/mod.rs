//! Error metrics for inferred locations and marginal predictions, plus KDE of
//! posterior marginals.

pub mod kde;

pub use kde::{kde_density, silverman_bandwidth};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prediction::PredictiveSummary;
use crate::prior::InputPrior;

/// A distribution over the uncertain input locations.
#[derive(Clone, Copy, Debug)]
pub enum InputDistribution<'a> {
    /// Gaussian prior; expectations are taken in closed form.
    Prior(&'a InputPrior),
    /// Equally weighted draws, e.g. a posterior chain.
    Samples(&'a [DMatrix<f64>]),
}

/// `(1/N_u) E‖X_u - X̂_u‖²` under the given distribution.
///
/// Zero when there are no uncertain points.
pub fn input_mse(dist: InputDistribution<'_>, truth: &DMatrix<f64>) -> Result<f64> {
    let n_u = truth.nrows();
    match dist {
        InputDistribution::Prior(prior) => {
            check_shape(prior.means(), truth)?;
            if n_u == 0 {
                return Ok(0.0);
            }
            let total: f64 = prior
                .means()
                .iter()
                .zip(prior.std_devs().iter())
                .zip(truth.iter())
                .map(|((mu, s), x)| (mu - x).powi(2) + s * s)
                .sum();
            Ok(total / n_u as f64)
        }
        InputDistribution::Samples(samples) => {
            if samples.is_empty() {
                return Err(Error::invalid("no samples to average over"));
            }
            for s in samples {
                check_shape(s, truth)?;
            }
            if n_u == 0 {
                return Ok(0.0);
            }
            let total: f64 = samples.iter().map(|s| (s - truth).norm_squared()).sum();
            Ok(total / (samples.len() * n_u) as f64)
        }
    }
}

/// Prior-mean displacement only, `(1/N_u) ‖μ - X̂_u‖²`, without the variance term.
pub fn input_mse_bias_only(prior: &InputPrior, truth: &DMatrix<f64>) -> Result<f64> {
    check_shape(prior.means(), truth)?;
    if truth.nrows() == 0 {
        return Ok(0.0);
    }
    Ok((prior.means() - truth).norm_squared() / truth.nrows() as f64)
}

fn check_shape(a: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<()> {
    if a.shape() != truth.shape() {
        return Err(Error::invalid(format!(
            "shape {:?} does not match ground truth {:?}",
            a.shape(),
            truth.shape()
        )));
    }
    Ok(())
}

/// Mean squared prediction error against ground-truth values, with the inner
/// expectation over `f* | X_u` taken analytically: `(m_s - f̂)² + v_s`.
pub fn mspe(summary: &PredictiveSummary, truth: &DVector<f64>) -> Result<f64> {
    let (s, m) = summary.per_sample_means.shape();
    if truth.len() != m {
        return Err(Error::invalid(format!("{} truth values for {m} test points", truth.len())));
    }
    if s == 0 || m == 0 {
        return Err(Error::invalid("summary has no samples or no test points"));
    }
    let mut total = 0.0;
    for i in 0..s {
        for t in 0..m {
            let e = summary.per_sample_means[(i, t)] - truth[t];
            total += e * e + summary.per_sample_variances[(i, t)];
        }
    }
    Ok(total / (s * m) as f64)
}

/// MSPE from marginal moments alone: `(1/m) Σ_t [(mean_t - f̂_t)² + var_t]`.
///
/// Equal to [`mspe`] when the marginal variance uses the population
/// between-sample convention, so it also works on prediction CSVs that no
/// longer carry per-sample moments.
pub fn mspe_from_marginals(mean: &DVector<f64>, variance: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    if mean.len() != truth.len() || variance.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("marginal moments and truth differ in length"));
    }
    let total: f64 = (0..truth.len())
        .map(|t| (mean[t] - truth[t]).powi(2) + variance[t])
        .sum();
    Ok(total / truth.len() as f64)
}

/// `100 (prior - posterior) / prior`.
pub fn relative_reduction(prior_err: f64, post_err: f64) -> Result<f64> {
    if prior_err.is_nan() || prior_err <= 0.0 {
        return Err(Error::invalid(format!(
            "reference error must be positive, got {prior_err}"
        )));
    }
    Ok(100.0 * (prior_err - post_err) / prior_err)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub input_mse_prior: f64,
    pub input_mse_posterior: f64,
    pub mspe_prior: f64,
    pub mspe_posterior: f64,
    pub relative_reduction_inputs: f64,
    pub relative_reduction_mspe: f64,
}

impl ErrorReport {
    /// Builds the report; a reduction is 0 when both errors are exactly 0
    /// (no uncertain inputs).
    pub fn new(input_mse_prior: f64, input_mse_posterior: f64, mspe_prior: f64, mspe_posterior: f64) -> Result<Self> {
        let reduce = |a: f64, b: f64| {
            if a == 0.0 && b == 0.0 {
                Ok(0.0)
            } else {
                relative_reduction(a, b)
            }
        };
        Ok(ErrorReport {
            input_mse_prior,
            input_mse_posterior,
            mspe_prior,
            mspe_posterior,
            relative_reduction_inputs: reduce(input_mse_prior, input_mse_posterior)?,
            relative_reduction_mspe: reduce(mspe_prior, mspe_posterior)?,
        })
    }
}
