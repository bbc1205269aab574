use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ExperimentConfig;
use super::latent::FunctionId;
use super::sobol::sobol_sequence;
use crate::error::Result;
use crate::gp::TrainingData;
use crate::prior::InputPrior;
use crate::rng;

/// Synthetic training data together with the ground truth it was drawn from.
#[derive(Clone, Debug)]
pub struct GeneratedDataset {
    pub data: TrainingData,
    /// True uncertain locations `x̂_u`.
    pub truth_locations: DMatrix<f64>,
    pub truth_fn: FunctionId,
    pub test_inputs: DMatrix<f64>,
    pub test_truth: DVector<f64>,
}

/// Sobol points over the domain: the first `n_fixed` become fixed inputs,
/// the next `n_uncertain` the true uncertain locations. Outputs are the
/// latent function plus optional Gaussian noise; prior means are the true
/// locations shifted by a uniform perturbation.
pub fn generate_dataset(cfg: &ExperimentConfig) -> Result<GeneratedDataset> {
    cfg.validate()?;
    let [lo, hi] = cfg.domain;
    let (nf, nu) = (cfg.n_fixed, cfg.n_uncertain);
    let unit = sobol_sequence(nf + nu, 1)?;
    let xs: Vec<f64> = unit.iter().map(|u| lo + (hi - lo) * u).collect();

    let noise_std = cfg.noise_std();
    let mut noise_rng = rng::stream(cfg.seed, rng::STREAM_OUTPUT_NOISE);
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| {
            let f = cfg.function_id.eval(*x);
            if noise_std > 0.0 {
                let z: f64 = noise_rng.sample(StandardNormal);
                f + noise_std * z
            } else {
                f
            }
        })
        .collect();

    let perturb_seed = cfg.shared_perturbation_seed.unwrap_or(cfg.seed);
    let mut perturb_rng = rng::stream(perturb_seed, rng::STREAM_PERTURBATION);
    let [plo, phi] = cfg.perturbation;
    let truth = DMatrix::from_column_slice(nu, 1, &xs[nf..]);
    let means = truth.map(|x| {
        let u: f64 = perturb_rng.random();
        x + plo + (phi - plo) * u
    });
    let prior = InputPrior::with_shared_std(means, cfg.prior_std)?;

    let data = TrainingData::new(
        DMatrix::from_column_slice(nf, 1, &xs[..nf]),
        DVector::from_column_slice(&ys[..nf]),
        DVector::from_column_slice(&ys[nf..]),
        prior,
    )?;
    let test = cfg.test_locations();
    Ok(GeneratedDataset {
        data,
        truth_locations: truth,
        truth_fn: cfg.function_id,
        test_truth: DVector::from_iterator(test.len(), test.iter().map(|x| cfg.function_id.eval(*x))),
        test_inputs: DMatrix::from_column_slice(test.len(), 1, &test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_outputs_are_exact() {
        let ds = generate_dataset(&ExperimentConfig::demo8()).unwrap();
        for i in 0..ds.data.n_fixed() {
            let x = ds.data.fixed_inputs()[(i, 0)];
            assert_eq!(ds.data.fixed_outputs()[i], FunctionId::Demo8.eval(x));
        }
        for i in 0..ds.data.n_uncertain() {
            assert_eq!(ds.data.uncertain_outputs()[i], FunctionId::Demo8.eval(ds.truth_locations[(i, 0)]));
        }
    }

    #[test]
    fn zero_perturbation_keeps_truth() {
        let cfg = ExperimentConfig {
            perturbation: [0.0, 0.0],
            ..ExperimentConfig::demo8()
        };
        let ds = generate_dataset(&cfg).unwrap();
        assert_eq!(ds.data.input_prior().means(), &ds.truth_locations);
    }

    #[test]
    fn demo8_structure() {
        let ds = generate_dataset(&ExperimentConfig { seed: 3, ..ExperimentConfig::demo8() }).unwrap();
        assert_eq!(ds.data.n_fixed(), 4);
        assert_eq!(ds.data.n_uncertain(), 4);
        let shift = ds.data.input_prior().means() - &ds.truth_locations;
        assert!(shift.iter().all(|e| (0.0..2.0).contains(e)));
        assert!(shift.iter().any(|e| *e > 0.0));
        assert!(ds.data.input_prior().std_devs().iter().all(|s| *s == 2.0));
        // first Sobol points scaled to [0, 8π]
        let span = 8.0 * std::f64::consts::PI;
        assert_eq!(ds.data.fixed_inputs().as_slice(), &[0.5 * span, 0.75 * span, 0.25 * span, 0.375 * span]);
        assert_eq!(ds.test_inputs.nrows(), 100);
    }

    #[test]
    fn benchmark_noise_and_seeding() {
        let cfg = ExperimentConfig { seed: 5, ..ExperimentConfig::benchmark(FunctionId::A) };
        let a = generate_dataset(&cfg).unwrap();
        let b = generate_dataset(&cfg).unwrap();
        assert_eq!(a.data.stacked_outputs(), b.data.stacked_outputs());
        let x0 = a.data.fixed_inputs()[(0, 0)];
        assert_ne!(a.data.fixed_outputs()[0], FunctionId::A.eval(x0));
        let c = generate_dataset(&ExperimentConfig { seed: 6, ..cfg.clone() }).unwrap();
        assert_ne!(a.data.input_prior().means(), c.data.input_prior().means());
    }

    #[test]
    fn shared_perturbation_seed() {
        let base = ExperimentConfig {
            shared_perturbation_seed: Some(77),
            ..ExperimentConfig::benchmark(FunctionId::B)
        };
        let a = generate_dataset(&ExperimentConfig { seed: 1, ..base.clone() }).unwrap();
        let b = generate_dataset(&ExperimentConfig { seed: 2, function_id: FunctionId::D, ..base }).unwrap();
        assert_eq!(a.data.input_prior().means(), b.data.input_prior().means());
    }
}
