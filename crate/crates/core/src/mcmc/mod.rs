//! Random-walk Metropolis over the uncertain input locations.

pub mod diagnostics;

pub use diagnostics::{chain_diagnostics, effective_sample_size, ChainDiagnostics};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{log_marginal_likelihood, TrainingData};
use crate::kernel::KernelHyperparams;
use crate::rng;

/// Consecutive post-burn-in rejections after which a chain is flagged as stuck.
pub const STUCK_CHAIN_THRESHOLD: usize = 1000;
/// Burn-in adaptation window and target acceptance band.
const ADAPT_WINDOW: usize = 100;
const ADAPT_LOW: f64 = 0.2;
const ADAPT_HIGH: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetropolisConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Proposal std as a multiple of each coordinate's prior std.
    pub step_scale: f64,
    pub adapt_during_burn_in: bool,
    /// Independent chains pooled in chain order.
    pub chains: usize,
    pub seed: u64,
}

impl Default for MetropolisConfig {
    fn default() -> Self {
        MetropolisConfig {
            iterations: 20_000,
            burn_in: 5_000,
            thinning: 15,
            step_scale: 0.25,
            adapt_during_burn_in: true,
            chains: 1,
            seed: 0,
        }
    }
}

impl MetropolisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning must be positive"));
        }
        if !(self.step_scale > 0.0 && self.step_scale.is_finite()) {
            return Err(Error::invalid("step scale must be positive"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("at least one chain is required"));
        }
        Ok(())
    }

    /// Samples kept per chain.
    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in) / self.thinning
    }

    /// Warnings for configurations that run but are too short to trust.
    pub fn warnings(&self) -> Vec<String> {
        let kept = self.retained_per_chain() * self.chains;
        if kept < 100 {
            vec![format!("only {kept} retained samples; at least 100 are recommended")]
        } else {
            Vec::new()
        }
    }
}

/// Retained draws of the uncertain inputs.
#[derive(Clone, Debug)]
pub struct PosteriorChain {
    pub samples: Vec<DMatrix<f64>>,
    pub log_posterior_values: Vec<f64>,
    /// Accepted over total proposals after burn-in, pooled across chains.
    pub acceptance_rate: f64,
    /// Proposal scale multiplier at the end of burn-in, per chain.
    pub final_step_scales: Vec<f64>,
    pub warnings: Vec<String>,
    pub config: MetropolisConfig,
}

impl PosteriorChain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Every `stride`-th sample such that at most `max` remain.
    pub fn stride_subsample(&self, max: usize) -> Vec<DMatrix<f64>> {
        if self.samples.len() <= max || max == 0 {
            return self.samples.clone();
        }
        let stride = self.samples.len().div_ceil(max);
        self.samples.iter().step_by(stride).cloned().collect()
    }
}

/// `log p(x_u | φ) + log p(y | [X^f; x_u], θ)`, up to the evidence.
pub fn log_unnormalized_posterior(
    candidate: &DMatrix<f64>,
    data: &TrainingData,
    hp: &KernelHyperparams,
) -> Result<f64> {
    let prior = data.input_prior().log_density(candidate)?;
    let inputs = data.stacked_inputs(candidate)?;
    let lml = log_marginal_likelihood(&inputs, &data.stacked_outputs(), hp)?;
    Ok(prior + lml)
}

/// The posterior target as a closure for [`run_metropolis`]; factorization
/// failures become `-inf` so the proposal is rejected.
pub fn posterior_target<'a>(
    data: &'a TrainingData,
    hp: &'a KernelHyperparams,
) -> impl Fn(&DMatrix<f64>) -> f64 + Sync + 'a {
    move |x| log_unnormalized_posterior(x, data, hp).unwrap_or(f64::NEG_INFINITY)
}

/// Metropolis rule `u < min(1, exp(Δ))` for `u ∈ [0, 1)`; never accepts a
/// non-finite proposal.
fn accepts(current_lp: f64, proposed_lp: f64, u: f64) -> bool {
    proposed_lp.is_finite() && u < (proposed_lp - current_lp).exp()
}

struct SingleChain {
    samples: Vec<DMatrix<f64>>,
    log_values: Vec<f64>,
    accepted: usize,
    proposed: usize,
    step_scale: f64,
    warnings: Vec<String>,
}

fn run_single<F, R>(
    target: &F,
    init: &DMatrix<f64>,
    proposal_std: &DMatrix<f64>,
    cfg: &MetropolisConfig,
    rng: &mut R,
) -> Result<SingleChain>
where
    F: Fn(&DMatrix<f64>) -> f64,
    R: Rng,
{
    let mut current = init.clone();
    let mut current_lp = target(&current);
    if !current_lp.is_finite() {
        return Err(Error::InvalidInit(current_lp));
    }
    let mut scale = cfg.step_scale;
    let mut window_accepted = 0;
    let mut accepted = 0;
    let mut proposed = 0;
    let mut rejection_run = 0;
    let mut stuck = false;
    let mut samples = Vec::with_capacity(cfg.retained_per_chain());
    let mut log_values = Vec::with_capacity(cfg.retained_per_chain());
    let mut proposal = current.clone();

    for it in 0..cfg.iterations {
        for ((p, c), s) in proposal.iter_mut().zip(current.iter()).zip(proposal_std.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *p = c + scale * s * z;
        }
        let lp = target(&proposal);
        let accept = accepts(current_lp, lp, rng.random());
        if accept {
            std::mem::swap(&mut current, &mut proposal);
            current_lp = lp;
        }

        let burning = it < cfg.burn_in;
        if burning {
            if accept {
                window_accepted += 1;
            }
            if cfg.adapt_during_burn_in && (it + 1) % ADAPT_WINDOW == 0 {
                let rate = window_accepted as f64 / ADAPT_WINDOW as f64;
                if rate < ADAPT_LOW {
                    scale *= 0.9;
                } else if rate > ADAPT_HIGH {
                    scale *= 1.1;
                }
                window_accepted = 0;
            }
        } else {
            proposed += 1;
            if accept {
                accepted += 1;
                rejection_run = 0;
            } else {
                rejection_run += 1;
                if rejection_run >= STUCK_CHAIN_THRESHOLD {
                    stuck = true;
                }
            }
            if (it + 1 - cfg.burn_in).is_multiple_of(cfg.thinning) {
                samples.push(current.clone());
                log_values.push(current_lp);
            }
        }
    }

    let mut warnings = Vec::new();
    if stuck {
        warnings.push(format!(
            "chain rejected {STUCK_CHAIN_THRESHOLD} or more consecutive proposals after burn-in"
        ));
    }
    Ok(SingleChain {
        samples,
        log_values,
        accepted,
        proposed,
        step_scale: scale,
        warnings,
    })
}

/// Random-walk Metropolis with Gaussian proposals of per-coordinate std
/// `step_scale · proposal_std[i,j]`.
///
/// With `cfg.chains > 1` the chains run on independent RNG streams and their
/// retained samples are concatenated in chain order.
pub fn run_metropolis<F>(
    target: F,
    init: &DMatrix<f64>,
    proposal_std: &DMatrix<f64>,
    cfg: &MetropolisConfig,
) -> Result<PosteriorChain>
where
    F: Fn(&DMatrix<f64>) -> f64 + Sync,
{
    cfg.validate()?;
    if init.shape() != proposal_std.shape() {
        return Err(Error::invalid(format!(
            "initial state {:?} and proposal scales {:?} differ in shape",
            init.shape(),
            proposal_std.shape()
        )));
    }
    let runs: Vec<Result<SingleChain>> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(cfg.seed, rng::STREAM_CHAIN_BASE + c as u64);
            run_single(&target, init, proposal_std, cfg, &mut r)
        })
        .collect();

    let mut chain = PosteriorChain {
        samples: Vec::new(),
        log_posterior_values: Vec::new(),
        acceptance_rate: 0.0,
        final_step_scales: Vec::new(),
        warnings: cfg.warnings(),
        config: cfg.clone(),
    };
    let (mut accepted, mut proposed) = (0usize, 0usize);
    for (c, run) in runs.into_iter().enumerate() {
        let run = run?;
        accepted += run.accepted;
        proposed += run.proposed;
        chain.samples.extend(run.samples);
        chain.log_posterior_values.extend(run.log_values);
        chain.final_step_scales.push(run.step_scale);
        chain
            .warnings
            .extend(run.warnings.into_iter().map(|w| format!("chain {c}: {w}")));
    }
    chain.acceptance_rate = if proposed > 0 {
        accepted as f64 / proposed as f64
    } else {
        0.0
    };
    for w in &chain.warnings {
        log::warn!("{w}");
    }
    Ok(chain)
}

/// Samples the uncertain-input posterior starting from the prior means.
pub fn sample_posterior(
    data: &TrainingData,
    hp: &KernelHyperparams,
    cfg: &MetropolisConfig,
) -> Result<PosteriorChain> {
    let prior = data.input_prior();
    run_metropolis(posterior_target(data, hp), prior.means(), prior.std_devs(), cfg)
}
