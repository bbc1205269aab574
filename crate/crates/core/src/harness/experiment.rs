use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::dataset::{generate_dataset, GeneratedDataset};
use super::io::{self, DatasetRows, Manifest};
use crate::analysis::kde::kde_density;
use crate::analysis::{input_mse, ErrorReport, InputDistribution};
use crate::error::{Error, Result};
use crate::gp::optimize::{optimize_hyperparameters_detailed, OptimizationOutcome, OptimizerConfig};
use crate::gp::TrainingData;
use crate::kernel::KernelHyperparams;
use crate::mcmc::diagnostics::chain_diagnostics;
use crate::mcmc::{sample_posterior, PosteriorChain};
use crate::prediction::{marginal_predict, prior_marginal_predict, PredictiveSummary};
use crate::prior::InputPrior;

pub const CONFIG_FILE: &str = "config.json";
pub const DATASET_FILE: &str = "dataset.csv";
pub const HYPERPARAMS_FILE: &str = "hyperparams.json";
pub const CHAIN_FILE: &str = "chain.csv";
pub const PRIOR_PREDICTION_FILE: &str = "prediction_prior.csv";
pub const POSTERIOR_PREDICTION_FILE: &str = "prediction_posterior.csv";
pub const REPORT_FILE: &str = "error_report.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "MANIFEST";

/// Points in each KDE grid.
pub const KDE_GRID_POINTS: usize = 512;

pub fn kde_file(i: usize, j: usize) -> String {
    format!("kde_u{i}_{j}.csv")
}

/// Everything an experiment computes, kept in memory.
#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub dataset: GeneratedDataset,
    pub optimization: OptimizationOutcome,
    pub chain: PosteriorChain,
    pub prior_prediction: PredictiveSummary,
    pub posterior_prediction: PredictiveSummary,
    pub report: ErrorReport,
}

/// Rebuilds a dataset from its CSV rows; test points come from the config.
pub fn dataset_from_rows(rows: DatasetRows, cfg: &ExperimentConfig) -> Result<GeneratedDataset> {
    let prior = if rows.prior_means.nrows() == 0 {
        InputPrior::empty(rows.fixed_inputs.ncols())
    } else {
        InputPrior::new(rows.prior_means, rows.prior_stds)?
    };
    let data = TrainingData::new(rows.fixed_inputs, rows.fixed_outputs, rows.uncertain_outputs, prior)?;
    let test = cfg.test_locations();
    Ok(GeneratedDataset {
        data,
        truth_locations: rows.uncertain_truth,
        truth_fn: cfg.function_id,
        test_truth: nalgebra::DVector::from_iterator(test.len(), test.iter().map(|x| cfg.function_id.eval(*x))),
        test_inputs: DMatrix::from_column_slice(test.len(), 1, &test),
    })
}

pub fn dataset_rows(ds: &GeneratedDataset) -> DatasetRows {
    let prior = ds.data.input_prior();
    DatasetRows {
        fixed_inputs: ds.data.fixed_inputs().clone(),
        fixed_outputs: ds.data.fixed_outputs().clone(),
        uncertain_truth: ds.truth_locations.clone(),
        uncertain_outputs: ds.data.uncertain_outputs().clone(),
        prior_means: prior.means().clone(),
        prior_stds: prior.std_devs().clone(),
    }
}

pub fn fit(ds: &GeneratedDataset, cfg: &ExperimentConfig) -> Result<OptimizationOutcome> {
    let opt = OptimizerConfig {
        restarts: cfg.optimizer_restarts,
        seed: cfg.seed,
        ..OptimizerConfig::default()
    };
    optimize_hyperparameters_detailed(&ds.data, &opt)
}

pub fn sample(ds: &GeneratedDataset, hp: &KernelHyperparams, cfg: &ExperimentConfig) -> Result<PosteriorChain> {
    sample_posterior(&ds.data, hp, &cfg.effective_mcmc())
}

/// Prior and posterior marginal predictions. Both use the same number of
/// input draws: the chain thinned to at most `prediction_samples`.
pub fn predict(
    ds: &GeneratedDataset,
    hp: &KernelHyperparams,
    chain_samples: &[DMatrix<f64>],
    cfg: &ExperimentConfig,
) -> Result<(PredictiveSummary, PredictiveSummary)> {
    let used = thin(chain_samples, cfg.prediction_samples);
    let posterior = marginal_predict(&used, &ds.data, hp, &ds.test_inputs)?;
    let prior = prior_marginal_predict(
        ds.data.input_prior(),
        used.len(),
        &ds.data,
        hp,
        &ds.test_inputs,
        cfg.seed,
    )?;
    Ok((prior, posterior))
}

fn thin(samples: &[DMatrix<f64>], max: usize) -> Vec<DMatrix<f64>> {
    if samples.len() <= max {
        return samples.to_vec();
    }
    let stride = samples.len().div_ceil(max);
    samples.iter().step_by(stride).cloned().collect()
}

/// Input MSE over the full chain, MSPE over the two marginal predictions.
pub fn report(
    ds: &GeneratedDataset,
    chain_samples: &[DMatrix<f64>],
    prior: &PredictiveSummary,
    posterior: &PredictiveSummary,
) -> Result<ErrorReport> {
    let mse_prior = input_mse(InputDistribution::Prior(ds.data.input_prior()), &ds.truth_locations)?;
    let mse_post = input_mse(InputDistribution::Samples(chain_samples), &ds.truth_locations)?;
    ErrorReport::new(
        mse_prior,
        mse_post,
        crate::analysis::mspe(prior, &ds.test_truth)?,
        crate::analysis::mspe(posterior, &ds.test_truth)?,
    )
}

/// One KDE table for uncertain coordinate `(i, j)`.
#[derive(Clone, Debug)]
pub struct KdeTable {
    pub point: usize,
    pub coord: usize,
    pub grid: Vec<f64>,
    pub prior_density: Vec<f64>,
    pub posterior_density: Vec<f64>,
}

/// Analytic prior density and posterior KDE on a grid spanning `μ ± 4s`.
///
/// A coordinate whose samples never moved gets a bandwidth of `s/100`.
pub fn kde_tables(prior: &InputPrior, chain_samples: &[DMatrix<f64>]) -> Result<Vec<KdeTable>> {
    let mut out = Vec::new();
    for i in 0..prior.n_points() {
        for j in 0..prior.dim() {
            let mu = prior.means()[(i, j)];
            let s = prior.std_devs()[(i, j)];
            let step = 8.0 * s / (KDE_GRID_POINTS - 1) as f64;
            let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|k| mu - 4.0 * s + k as f64 * step).collect();
            let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
            let prior_density = grid
                .iter()
                .map(|g| {
                    let z = (g - mu) / s;
                    norm * (-0.5 * z * z).exp()
                })
                .collect();
            let trace: Vec<f64> = chain_samples.iter().map(|x| x[(i, j)]).collect();
            let posterior_density = match kde_density(&trace, &grid, None) {
                Err(Error::DegenerateBandwidth) | Err(Error::InvalidArgument(_)) if !trace.is_empty() => {
                    log::warn!("posterior samples of x_u[{i}][{j}] are degenerate; using bandwidth s/100");
                    kde_density(&trace, &grid, Some(0.01 * s))?
                }
                other => other?,
            };
            out.push(KdeTable {
                point: i,
                coord: j,
                grid,
                prior_density,
                posterior_density,
            });
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary<'a> {
    function_id: &'a str,
    seed: u64,
    noise_std: f64,
    hyperparams: &'a KernelHyperparams,
    log_marginal_likelihood: f64,
    best_restart: usize,
    acceptance_rate: f64,
    final_step_scales: &'a [f64],
    retained_samples: usize,
    prediction_samples: usize,
    posterior_mean: Vec<Vec<f64>>,
    posterior_std: Vec<Vec<f64>>,
    effective_sample_size: Vec<Vec<f64>>,
    dropped_prior: usize,
    dropped_posterior: usize,
    clamped_variances: usize,
    warnings: &'a [String],
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Stage bookkeeping: writes artifacts when an output directory is set and
/// keeps the MANIFEST up to date, including on failure.
struct Stages {
    dir: Option<PathBuf>,
    manifest: Manifest,
}

impl Stages {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce(Option<&Path>) -> Result<(T, Vec<String>)>) -> Result<T> {
        match f(self.dir.as_deref()) {
            Ok((value, files)) => {
                self.manifest.record(name, "ok", files);
                Ok(value)
            }
            Err(e) => {
                self.manifest.record(name, "failed", vec![]);
                if let Some(dir) = &self.dir {
                    // the stage error matters more than a manifest write failure
                    let _ = self.manifest.write(&dir.join(MANIFEST_FILE));
                }
                Err(e.in_stage(name))
            }
        }
    }
}

fn execute(cfg: &ExperimentConfig, dir: Option<&Path>) -> Result<PipelineResult> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    let mut st = Stages {
        dir: dir.map(Path::to_path_buf),
        manifest: Manifest::default(),
    };

    let dataset = st.run("generate", |dir| {
        cfg.validate()?;
        let ds = generate_dataset(cfg)?;
        let mut files = vec![];
        if let Some(dir) = dir {
            io::write_json(&dir.join(CONFIG_FILE), cfg)?;
            io::write_dataset(&dir.join(DATASET_FILE), &dataset_rows(&ds))?;
            files = vec![CONFIG_FILE.into(), DATASET_FILE.into()];
        }
        Ok((ds, files))
    })?;

    let optimization = st.run("fit", |dir| {
        let out = fit(&dataset, cfg)?;
        let mut files = vec![];
        if let Some(dir) = dir {
            io::write_json(&dir.join(HYPERPARAMS_FILE), &out.hyperparams)?;
            files.push(HYPERPARAMS_FILE.into());
        }
        Ok((out, files))
    })?;
    let hp = &optimization.hyperparams;

    let chain = st.run("sample", |dir| {
        let chain = sample(&dataset, hp, cfg)?;
        let mut files = vec![];
        if let Some(dir) = dir {
            io::write_chain(&dir.join(CHAIN_FILE), &chain)?;
            files.push(CHAIN_FILE.into());
        }
        Ok((chain, files))
    })?;

    let (prior_prediction, posterior_prediction) = st.run("predict", |dir| {
        let (prior, post) = predict(&dataset, hp, &chain.samples, cfg)?;
        let mut files = vec![];
        if let Some(dir) = dir {
            io::write_prediction(&dir.join(PRIOR_PREDICTION_FILE), &prior)?;
            io::write_prediction(&dir.join(POSTERIOR_PREDICTION_FILE), &post)?;
            files = vec![PRIOR_PREDICTION_FILE.into(), POSTERIOR_PREDICTION_FILE.into()];
        }
        Ok(((prior, post), files))
    })?;

    let report = st.run("report", |dir| {
        let rep = report(&dataset, &chain.samples, &prior_prediction, &posterior_prediction)?;
        let mut files = vec![];
        if let Some(dir) = dir {
            for t in kde_tables(dataset.data.input_prior(), &chain.samples)? {
                let name = kde_file(t.point, t.coord);
                io::write_kde(&dir.join(&name), &t.grid, &t.prior_density, &t.posterior_density)?;
                files.push(name);
            }
            let diag = chain_diagnostics(&chain);
            let summary = RunSummary {
                function_id: cfg.function_id.as_str(),
                seed: cfg.seed,
                noise_std: cfg.noise_std(),
                hyperparams: hp,
                log_marginal_likelihood: optimization.lml,
                best_restart: optimization.best_restart,
                acceptance_rate: chain.acceptance_rate,
                final_step_scales: &chain.final_step_scales,
                retained_samples: chain.len(),
                prediction_samples: posterior_prediction.n_samples(),
                posterior_mean: rows_of(&diag.mean),
                posterior_std: rows_of(&diag.std),
                effective_sample_size: rows_of(&diag.ess),
                dropped_prior: prior_prediction.dropped,
                dropped_posterior: posterior_prediction.dropped,
                clamped_variances: prior_prediction.clamped + posterior_prediction.clamped,
                warnings: &chain.warnings,
            };
            io::write_json(&dir.join(SUMMARY_FILE), &summary)?;
            io::write_json(&dir.join(REPORT_FILE), &rep)?;
            files.push(SUMMARY_FILE.into());
            files.push(REPORT_FILE.into());
        }
        Ok((rep, files))
    })?;

    if let Some(dir) = dir {
        st.manifest.write(&dir.join(MANIFEST_FILE))?;
    }
    Ok(PipelineResult {
        dataset,
        optimization,
        chain,
        prior_prediction,
        posterior_prediction,
        report,
    })
}

/// Runs all stages in memory without writing anything.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineResult> {
    execute(cfg, None)
}

/// Runs all stages, writing every artifact and a MANIFEST into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ErrorReport> {
    Ok(execute(cfg, Some(out_dir))?.report)
}
