use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::latent::FunctionId;
use crate::error::{Error, Result};
use crate::mcmc::MetropolisConfig;

/// Grid used to measure the spread of a latent function for default noise.
const NOISE_REFERENCE_GRID: usize = 1000;

/// One experiment. Serialized as a JSON document with these field names;
/// missing fields take the `demo8` defaults.
///
/// `prior_std` is a standard deviation (not a variance), so `μ ± 2·prior_std`
/// is the 95% prior interval. The experiment's master `seed` drives every
/// random stage, including MCMC; `mcmc.seed` is overwritten with it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function_id: FunctionId,
    pub domain: [f64; 2],
    pub n_fixed: usize,
    pub n_uncertain: usize,
    pub n_test: usize,
    /// Interval of the uniform perturbation added to true uncertain locations.
    pub perturbation: [f64; 2],
    pub prior_std: f64,
    /// Std of the output noise; `None` picks the per-function default.
    pub output_noise_std: Option<f64>,
    pub mcmc: MetropolisConfig,
    pub optimizer_restarts: usize,
    /// Cap on the number of chain samples used for prediction.
    pub prediction_samples: usize,
    pub seed: u64,
    /// Seed for the perturbation draws only, to share them across experiments.
    pub shared_perturbation_seed: Option<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::demo8()
    }
}

impl ExperimentConfig {
    /// Four fixed and four uncertain noise-free points of `-x sin(x/3)`, s² = 4.
    pub fn demo8() -> Self {
        ExperimentConfig {
            function_id: FunctionId::Demo8,
            domain: [0.0, 8.0 * PI],
            n_fixed: 4,
            n_uncertain: 4,
            n_test: 100,
            perturbation: [0.0, 2.0],
            prior_std: 2.0,
            output_noise_std: Some(0.0),
            mcmc: MetropolisConfig::default(),
            optimizer_restarts: 8,
            prediction_samples: 1000,
            seed: 0,
            shared_perturbation_seed: None,
        }
    }

    /// 30 fixed and 30 uncertain noisy points, s = 1.
    pub fn benchmark(function_id: FunctionId) -> Self {
        ExperimentConfig {
            function_id,
            n_fixed: 30,
            n_uncertain: 30,
            prior_std: 1.0,
            output_noise_std: None,
            ..Self::demo8()
        }
    }

    /// Preset for a function: `demo8` for the illustration, benchmark otherwise.
    pub fn preset(function_id: FunctionId) -> Self {
        match function_id {
            FunctionId::Demo8 => Self::demo8(),
            f => Self::benchmark(f),
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!("empty domain [{lo}, {hi}]")));
        }
        if self.n_test < 2 {
            return Err(Error::invalid("at least two test points are required"));
        }
        if self.n_fixed + self.n_uncertain == 0 {
            return Err(Error::invalid("at least one training point is required"));
        }
        let [plo, phi] = self.perturbation;
        if !(plo.is_finite() && phi.is_finite() && plo <= phi) {
            return Err(Error::invalid(format!("invalid perturbation interval [{plo}, {phi}]")));
        }
        if !(self.prior_std > 0.0 && self.prior_std.is_finite()) {
            return Err(Error::invalid(format!(
                "prior std must be positive, got {}; put exactly known points in the fixed set",
                self.prior_std
            )));
        }
        if let Some(s) = self.output_noise_std {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("output noise std must be nonnegative, got {s}")));
            }
        }
        if self.prediction_samples == 0 {
            return Err(Error::invalid("prediction_samples must be positive"));
        }
        self.mcmc.validate()
    }

    /// Output noise std, defaulting to 0 for `demo8` and to 0.1 × the spread
    /// of the latent function over the domain otherwise.
    pub fn noise_std(&self) -> f64 {
        match (self.output_noise_std, self.function_id) {
            (Some(s), _) => s,
            (None, FunctionId::Demo8) => 0.0,
            (None, f) => 0.1 * latent_std(f, self.domain),
        }
    }

    /// MCMC settings with the master seed applied.
    pub fn effective_mcmc(&self) -> MetropolisConfig {
        MetropolisConfig {
            seed: self.seed,
            ..self.mcmc.clone()
        }
    }

    /// Evenly spaced test locations including both domain ends.
    pub fn test_locations(&self) -> Vec<f64> {
        let [lo, hi] = self.domain;
        let step = (hi - lo) / (self.n_test - 1) as f64;
        (0..self.n_test).map(|k| lo + k as f64 * step).collect()
    }
}

/// Standard deviation of `f` over an even grid on `domain`.
pub fn latent_std(f: FunctionId, domain: [f64; 2]) -> f64 {
    let n = NOISE_REFERENCE_GRID;
    let step = (domain[1] - domain[0]) / (n - 1) as f64;
    let ys: Vec<f64> = (0..n).map(|k| f.eval(domain[0] + k as f64 * step)).collect();
    let mean = ys.iter().sum::<f64>() / n as f64;
    (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
}
