use std::path::Path;
use std::process::{Command, Output};

use uigp::analysis::ErrorReport;
use uigp::harness::experiment;

fn uigp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uigp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read_report(dir: &Path) -> ErrorReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join(experiment::REPORT_FILE)).unwrap()).unwrap()
}

const SHORT: [&str; 6] = ["--iterations", "6000", "--burn-in", "2000", "--prediction-samples", "300"];

#[test]
fn staged_run_matches_end_to_end_run() {
    let staged = tempfile::tempdir().unwrap();
    let mut generate = vec!["generate", "--seed", "5"];
    generate.extend(SHORT);
    ok(uigp(&generate, staged.path()));
    for stage in ["fit", "sample", "predict", "report"] {
        ok(uigp(&[stage], staged.path()));
    }

    let whole = tempfile::tempdir().unwrap();
    let mut exp = vec!["experiment", "--seed", "5"];
    exp.extend(SHORT);
    let out = ok(uigp(&exp, whole.path()));
    let printed: ErrorReport = serde_json::from_slice(&out.stdout).unwrap();

    for file in [
        experiment::DATASET_FILE,
        experiment::HYPERPARAMS_FILE,
        experiment::CHAIN_FILE,
        experiment::PRIOR_PREDICTION_FILE,
        experiment::POSTERIOR_PREDICTION_FILE,
        &experiment::kde_file(0, 0),
    ] {
        let a = std::fs::read(staged.path().join(file)).unwrap();
        let b = std::fs::read(whole.path().join(file)).unwrap();
        assert!(a == b, "{file} differs");
    }

    // the staged report works from the saved marginal moments
    let a = read_report(staged.path());
    let b = read_report(whole.path());
    assert_eq!(b, printed);
    assert_eq!(a.input_mse_prior, b.input_mse_prior);
    assert_eq!(a.input_mse_posterior, b.input_mse_posterior);
    for (x, y) in [(a.mspe_prior, b.mspe_prior), (a.mspe_posterior, b.mspe_posterior)] {
        assert!((x - y).abs() <= 1e-9 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn config_file_and_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("in.json");
    std::fs::write(&cfg_path, r#"{"function_id": "d", "n_fixed": 6, "n_uncertain": 5, "prior_std": 1.0}"#).unwrap();
    let out = dir.path().join("run");
    ok(uigp(
        &["generate", "--config", cfg_path.to_str().unwrap(), "--n-uncertain", "3", "--seed", "9"],
        &out,
    ));
    let saved: uigp::harness::ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(out.join(experiment::CONFIG_FILE)).unwrap()).unwrap();
    assert_eq!(saved.function_id, uigp::harness::FunctionId::D);
    assert_eq!(saved.n_fixed, 6);
    assert_eq!(saved.n_uncertain, 3);
    assert_eq!(saved.seed, 9);
    let text = std::fs::read_to_string(out.join(experiment::DATASET_FILE)).unwrap();
    assert!(text.starts_with("role,x_0,y,prior_mean_0,prior_std_0\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("uncertain,")).count(), 3);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let o = uigp(&["experiment", "--function", "zeta"], dir.path());
    assert!(!o.status.success());
    let o = uigp(&["experiment", "--prior-std", "0"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("prior std"));
    // later stages need the earlier artifacts
    let o = uigp(&["sample"], &dir.path().join("empty"));
    assert!(!o.status.success());
}
