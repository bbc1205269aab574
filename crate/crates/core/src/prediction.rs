//! GP predictions marginalized over draws of the uncertain inputs.
//!
//! For draws `X_u^(1..S)` the marginal moments at each test point are
//!
//! ```text
//! mean = (1/S) Σ_s m_s(x*)
//! var  = (1/S) Σ_s v_s(x*) + (1/S) Σ_s (m_s(x*) - mean)²
//! ```
//!
//! i.e. the law of total variance with the population (divisor `S`)
//! convention for the between-sample term.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{gp_fit, GpPrediction, TrainingData};
use crate::kernel::KernelHyperparams;
use crate::prior::InputPrior;
use crate::rng;

/// Largest fraction of samples that may fail to fit before prediction errors out.
pub const MAX_DROPPED_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Prior,
    Posterior,
}

impl SampleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleSource::Prior => "prior",
            SampleSource::Posterior => "posterior",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PredictiveSummary {
    pub test_inputs: DMatrix<f64>,
    pub marginal_mean: DVector<f64>,
    pub marginal_variance: DVector<f64>,
    /// `S × m`, one row per retained sample.
    pub per_sample_means: DMatrix<f64>,
    pub per_sample_variances: DMatrix<f64>,
    pub source: SampleSource,
    /// Samples whose GP fit failed and were left out.
    pub dropped: usize,
    /// Negative per-sample variances clamped to zero.
    pub clamped: usize,
}

impl PredictiveSummary {
    /// Combines per-sample moments into marginal moments.
    pub fn from_per_sample(
        test_inputs: DMatrix<f64>,
        per_sample_means: DMatrix<f64>,
        per_sample_variances: DMatrix<f64>,
        source: SampleSource,
    ) -> Result<Self> {
        let (s, m) = per_sample_means.shape();
        if s == 0 {
            return Err(Error::invalid("at least one sample is required"));
        }
        if per_sample_variances.shape() != (s, m) || test_inputs.nrows() != m {
            return Err(Error::invalid("per-sample moment shapes do not match the test inputs"));
        }
        let sf = s as f64;
        let mut mean = DVector::zeros(m);
        let mut var = DVector::zeros(m);
        for t in 0..m {
            let col = per_sample_means.column(t);
            // fixed index order keeps the reduction bitwise reproducible
            let mu = col.iter().sum::<f64>() / sf;
            let within = per_sample_variances.column(t).iter().sum::<f64>() / sf;
            let between = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / sf;
            mean[t] = mu;
            var[t] = (within + between).max(0.0);
        }
        Ok(PredictiveSummary {
            test_inputs,
            marginal_mean: mean,
            marginal_variance: var,
            per_sample_means,
            per_sample_variances,
            source,
            dropped: 0,
            clamped: 0,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.per_sample_means.nrows()
    }

    pub fn n_test(&self) -> usize {
        self.marginal_mean.len()
    }

    /// `(mean - 2σ, mean + 2σ)` per test point.
    pub fn band(&self) -> (DVector<f64>, DVector<f64>) {
        let sd = self.marginal_variance.map(f64::sqrt);
        (&self.marginal_mean - &sd * 2.0, &self.marginal_mean + &sd * 2.0)
    }
}

fn predict_one(
    sample: &DMatrix<f64>,
    data: &TrainingData,
    outputs: &DVector<f64>,
    hp: &KernelHyperparams,
    test_inputs: &DMatrix<f64>,
) -> Result<GpPrediction> {
    let inputs = data.stacked_inputs(sample)?;
    gp_fit(&inputs, outputs, hp)?.predict(test_inputs)
}

fn marginalize(
    samples: &[DMatrix<f64>],
    data: &TrainingData,
    hp: &KernelHyperparams,
    test_inputs: &DMatrix<f64>,
    source: SampleSource,
) -> Result<PredictiveSummary> {
    if samples.is_empty() {
        return Err(Error::invalid("at least one sample is required"));
    }
    if test_inputs.ncols() != data.dim() {
        return Err(Error::invalid(format!(
            "test inputs have dimension {}, data has {}",
            test_inputs.ncols(),
            data.dim()
        )));
    }
    let outputs = data.stacked_outputs();
    let fits: Vec<Result<GpPrediction>> = samples
        .par_iter()
        .map(|s| predict_one(s, data, &outputs, hp, test_inputs))
        .collect();

    let mut kept = Vec::with_capacity(fits.len());
    let mut dropped = 0;
    for fit in fits {
        match fit {
            Ok(p) => kept.push(p),
            Err(e @ Error::InvalidArgument(_)) => return Err(e),
            Err(e) => {
                log::warn!("dropping sample from marginal prediction: {e}");
                dropped += 1;
            }
        }
    }
    let total = samples.len();
    if kept.is_empty() || dropped as f64 > MAX_DROPPED_FRACTION * total as f64 {
        return Err(Error::PredictionFailed { failed: dropped, total });
    }

    let m = test_inputs.nrows();
    let s = kept.len();
    let means = DMatrix::from_fn(s, m, |i, t| kept[i].mean[t]);
    let vars = DMatrix::from_fn(s, m, |i, t| kept[i].variance[t]);
    let clamped = kept.iter().map(|p| p.clamped).sum();
    let mut summary = PredictiveSummary::from_per_sample(test_inputs.clone(), means, vars, source)?;
    summary.dropped = dropped;
    summary.clamped = clamped;
    Ok(summary)
}

/// Marginal prediction over posterior samples of the uncertain inputs.
pub fn marginal_predict(
    samples: &[DMatrix<f64>],
    data: &TrainingData,
    hp: &KernelHyperparams,
    test_inputs: &DMatrix<f64>,
) -> Result<PredictiveSummary> {
    marginalize(samples, data, hp, test_inputs, SampleSource::Posterior)
}

/// Marginal prediction over `count` i.i.d. draws from the input prior.
pub fn prior_marginal_predict(
    prior: &InputPrior,
    count: usize,
    data: &TrainingData,
    hp: &KernelHyperparams,
    test_inputs: &DMatrix<f64>,
    seed: u64,
) -> Result<PredictiveSummary> {
    let mut r = rng::stream(seed, rng::STREAM_PRIOR_DRAWS);
    let draws: Vec<DMatrix<f64>> = (0..count).map(|_| prior.sample(&mut r)).collect();
    marginalize(&draws, data, hp, test_inputs, SampleSource::Prior)
}
