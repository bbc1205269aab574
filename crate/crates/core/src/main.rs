use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uigp::analysis::{input_mse, mspe_from_marginals, ErrorReport, InputDistribution};
use uigp::harness::experiment::{self, dataset_from_rows, dataset_rows, kde_file, kde_tables};
use uigp::harness::{io, ExperimentConfig, FunctionId, GeneratedDataset};
use uigp::{KernelHyperparams, Result};

#[derive(Parser)]
#[command(name = "uigp", version, about = "GP regression with uncertain training inputs")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; fields not given keep their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory holding the run's artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; 1 gives bitwise-reproducible output
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Latent function: demo8, a, b, c or d (selects its preset when no config is given)
    #[arg(long, global = true)]
    function: Option<FunctionId>,

    #[arg(long, global = true)]
    n_fixed: Option<usize>,

    #[arg(long, global = true)]
    n_uncertain: Option<usize>,

    #[arg(long, global = true)]
    n_test: Option<usize>,

    /// Prior standard deviation of every uncertain coordinate
    #[arg(long, global = true)]
    prior_std: Option<f64>,

    /// Output noise standard deviation used when generating data
    #[arg(long, global = true)]
    noise_std: Option<f64>,

    /// Seed for the prior-mean perturbations only
    #[arg(long, global = true)]
    shared_perturbation_seed: Option<u64>,

    /// Metropolis iterations per chain, burn-in included
    #[arg(long, global = true)]
    iterations: Option<usize>,

    #[arg(long, global = true)]
    burn_in: Option<usize>,

    #[arg(long, global = true)]
    thinning: Option<usize>,

    #[arg(long, global = true)]
    chains: Option<usize>,

    /// Maximum number of input samples used for prediction
    #[arg(long, global = true)]
    prediction_samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    Generate,
    /// Fit kernel hyperparameters on the prior-mean surrogate
    Fit,
    /// Sample the posterior over uncertain input locations
    Sample,
    /// Prior- and posterior-marginalized predictions at the test points
    Predict,
    /// Error metrics and KDE tables from earlier stages
    Report,
    /// All stages end to end
    Experiment,
}

impl Common {
    /// Config from `--config`, else from the run directory (for later stages),
    /// else the preset for `--function`; flags override individual fields.
    fn resolve(&self, from_run_dir: bool) -> Result<ExperimentConfig> {
        let saved = self.out.join(experiment::CONFIG_FILE);
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None if from_run_dir && saved.exists() => ExperimentConfig::from_json_file(&saved)?,
            None => ExperimentConfig::preset(self.function.unwrap_or(FunctionId::Demo8)),
        };
        if let Some(f) = self.function {
            cfg.function_id = f;
        }
        macro_rules! set {
            ($flag:ident => $($field:tt)+) => {
                if let Some(v) = self.$flag {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(n_fixed => n_fixed);
        set!(n_uncertain => n_uncertain);
        set!(n_test => n_test);
        set!(prior_std => prior_std);
        set!(iterations => mcmc.iterations);
        set!(burn_in => mcmc.burn_in);
        set!(thinning => mcmc.thinning);
        set!(chains => mcmc.chains);
        set!(prediction_samples => prediction_samples);
        if self.noise_std.is_some() {
            cfg.output_noise_std = self.noise_std;
        }
        if self.shared_perturbation_seed.is_some() {
            cfg.shared_perturbation_seed = self.shared_perturbation_seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load_dataset(dir: &Path, cfg: &ExperimentConfig) -> Result<GeneratedDataset> {
    dataset_from_rows(io::read_dataset(&dir.join(experiment::DATASET_FILE))?, cfg)
}

fn load_hyperparams(dir: &Path) -> Result<KernelHyperparams> {
    let text = std::fs::read_to_string(dir.join(experiment::HYPERPARAMS_FILE))?;
    let hp: KernelHyperparams = serde_json::from_str(&text)?;
    hp.validate()?;
    Ok(hp)
}

fn load_chain(dir: &Path, ds: &GeneratedDataset) -> Result<Vec<nalgebra::DMatrix<f64>>> {
    let (n_u, d) = (ds.data.n_uncertain(), ds.data.dim());
    Ok(io::read_chain(&dir.join(experiment::CHAIN_FILE), n_u, d)?.0)
}

fn print_report(report: &ErrorReport) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    let dir = c.out.as_path();
    std::fs::create_dir_all(dir)?;
    match cli.command {
        Command::Generate => {
            let cfg = c.resolve(false)?;
            let ds = uigp::harness::generate_dataset(&cfg)?;
            io::write_json(&dir.join(experiment::CONFIG_FILE), &cfg)?;
            io::write_dataset(&dir.join(experiment::DATASET_FILE), &dataset_rows(&ds))?;
            log::info!("wrote {} training points", ds.data.n_fixed() + ds.data.n_uncertain());
        }
        Command::Fit => {
            let cfg = c.resolve(true)?;
            let ds = load_dataset(dir, &cfg)?;
            let out = experiment::fit(&ds, &cfg).map_err(|e| e.in_stage("fit"))?;
            io::write_json(&dir.join(experiment::HYPERPARAMS_FILE), &out.hyperparams)?;
            log::info!("log marginal likelihood {} (restart {})", out.lml, out.best_restart);
        }
        Command::Sample => {
            let cfg = c.resolve(true)?;
            let ds = load_dataset(dir, &cfg)?;
            let hp = load_hyperparams(dir)?;
            let chain = experiment::sample(&ds, &hp, &cfg).map_err(|e| e.in_stage("sample"))?;
            io::write_chain(&dir.join(experiment::CHAIN_FILE), &chain)?;
            log::info!("{} samples, acceptance rate {:.3}", chain.len(), chain.acceptance_rate);
        }
        Command::Predict => {
            let cfg = c.resolve(true)?;
            let ds = load_dataset(dir, &cfg)?;
            let hp = load_hyperparams(dir)?;
            let samples = load_chain(dir, &ds)?;
            let (prior, post) = experiment::predict(&ds, &hp, &samples, &cfg).map_err(|e| e.in_stage("predict"))?;
            io::write_prediction(&dir.join(experiment::PRIOR_PREDICTION_FILE), &prior)?;
            io::write_prediction(&dir.join(experiment::POSTERIOR_PREDICTION_FILE), &post)?;
        }
        Command::Report => {
            let cfg = c.resolve(true)?;
            let ds = load_dataset(dir, &cfg)?;
            let samples = load_chain(dir, &ds)?;
            let prior = io::read_prediction(&dir.join(experiment::PRIOR_PREDICTION_FILE))?;
            let post = io::read_prediction(&dir.join(experiment::POSTERIOR_PREDICTION_FILE))?;
            let report = ErrorReport::new(
                input_mse(InputDistribution::Prior(ds.data.input_prior()), &ds.truth_locations)?,
                input_mse(InputDistribution::Samples(&samples), &ds.truth_locations)?,
                mspe_from_marginals(&prior.mean, &prior.variance, &ds.test_truth)?,
                mspe_from_marginals(&post.mean, &post.variance, &ds.test_truth)?,
            )?;
            for t in kde_tables(ds.data.input_prior(), &samples)? {
                let path = dir.join(kde_file(t.point, t.coord));
                io::write_kde(&path, &t.grid, &t.prior_density, &t.posterior_density)?;
            }
            io::write_json(&dir.join(experiment::REPORT_FILE), &report)?;
            print_report(&report)?;
        }
        Command::Experiment => {
            let cfg = c.resolve(false)?;
            let report = uigp::harness::run_experiment(&cfg, dir)?;
            print_report(&report)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.common.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::FAILURE;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
