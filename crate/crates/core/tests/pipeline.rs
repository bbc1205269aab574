use uigp::harness::experiment::{self, run_experiment, run_pipeline};
use uigp::harness::{io, ExperimentConfig, FunctionId};
use uigp::mcmc::chain_diagnostics;
use uigp::MetropolisConfig;

fn short(cfg: ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig {
        mcmc: MetropolisConfig {
            iterations: 6000,
            burn_in: 2000,
            thinning: 4,
            ..MetropolisConfig::default()
        },
        prediction_samples: 300,
        ..cfg
    }
}

#[test]
fn demo8_posterior_beats_prior() {
    let result = run_pipeline(&ExperimentConfig {
        seed: 2,
        ..ExperimentConfig::demo8()
    })
    .unwrap();
    let r = &result.report;
    assert!(r.mspe_posterior < r.mspe_prior, "{r:?}");
    assert!(r.input_mse_posterior < r.input_mse_prior, "{r:?}");

    // posterior spread shrinks below the prior std on most coordinates
    let diag = chain_diagnostics(&result.chain);
    let shrunk = diag.std.iter().filter(|s| **s <= 2.0).count();
    assert!(shrunk >= 3, "posterior stds {:?}", diag.std);
}

#[test]
fn experiment_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(ExperimentConfig {
        seed: 8,
        ..ExperimentConfig::demo8()
    });
    let report = run_experiment(&cfg, dir.path()).unwrap();
    let p = dir.path();

    let manifest = std::fs::read_to_string(p.join(experiment::MANIFEST_FILE)).unwrap();
    assert!(manifest.starts_with("status complete\n"));
    for stage in ["generate", "fit", "sample", "predict", "report"] {
        assert!(manifest.contains(&format!("stage {stage} ok")), "{manifest}");
    }

    let saved: uigp::analysis::ErrorReport =
        serde_json::from_str(&std::fs::read_to_string(p.join(experiment::REPORT_FILE)).unwrap()).unwrap();
    assert_eq!(saved, report);

    for file in [experiment::PRIOR_PREDICTION_FILE, experiment::POSTERIOR_PREDICTION_FILE] {
        let mut r = csv::Reader::from_path(p.join(file)).unwrap();
        let mut rows = 0;
        for rec in r.records() {
            let v: Vec<f64> = rec.unwrap().iter().map(|s| s.parse().unwrap()).collect();
            let (mean, lo, hi) = (v[1], v[3], v[4]);
            assert!(lo <= mean && mean <= hi);
            rows += 1;
        }
        assert_eq!(rows, 100);
    }

    let rows = io::read_dataset(&p.join(experiment::DATASET_FILE)).unwrap();
    assert_eq!(rows.fixed_inputs.nrows(), 4);
    assert_eq!(rows.uncertain_truth.nrows(), 4);
    let (samples, _) = io::read_chain(&p.join(experiment::CHAIN_FILE), 4, 1).unwrap();
    assert_eq!(samples.len(), cfg.mcmc.retained_per_chain());

    for i in 0..4 {
        let mut r = csv::Reader::from_path(p.join(experiment::kde_file(i, 0))).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["grid", "prior_density", "posterior_density"]);
        assert_eq!(r.records().count(), experiment::KDE_GRID_POINTS);
    }
}

#[test]
fn identical_runs_give_identical_reports() {
    let cfg = short(ExperimentConfig {
        seed: 31,
        ..ExperimentConfig::benchmark(FunctionId::C)
    });
    let a = serde_json::to_string(&run_pipeline(&cfg).unwrap().report).unwrap();
    let b = serde_json::to_string(&run_pipeline(&cfg).unwrap().report).unwrap();
    assert_eq!(a, b);
}

#[test]
fn no_uncertain_points_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(ExperimentConfig {
        n_fixed: 10,
        n_uncertain: 0,
        ..ExperimentConfig::benchmark(FunctionId::A)
    });
    let r = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(r.mspe_prior, r.mspe_posterior);
    assert_eq!(r.input_mse_prior, 0.0);
    assert_eq!(r.relative_reduction_mspe, 0.0);
    assert_eq!(r.relative_reduction_inputs, 0.0);
}

#[test]
fn benchmark_reduces_input_error() {
    let r = run_pipeline(&short(ExperimentConfig {
        seed: 1,
        ..ExperimentConfig::benchmark(FunctionId::C)
    }))
    .unwrap()
    .report;
    assert!(r.relative_reduction_inputs > 0.0, "{r:?}");
    assert!(r.relative_reduction_mspe > 0.0, "{r:?}");
}
