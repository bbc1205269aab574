//! Exact zero-mean GP regression: likelihood, gradient, fitting and prediction.

pub mod optimize;

pub use optimize::{
    maximize_lml, optimize_hyperparameters, optimize_hyperparameters_detailed, OptimizationOutcome,
    OptimizerConfig, RestartRecord,
};

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::kernel::{gram_matrix, noisy_gram, KernelHyperparams};
use crate::prior::InputPrior;

/// Fixed-input observations plus outputs observed at uncertain locations.
#[derive(Clone, Debug)]
pub struct TrainingData {
    fixed_inputs: DMatrix<f64>,
    fixed_outputs: DVector<f64>,
    uncertain_outputs: DVector<f64>,
    input_prior: InputPrior,
}

impl TrainingData {
    pub fn new(
        fixed_inputs: DMatrix<f64>,
        fixed_outputs: DVector<f64>,
        uncertain_outputs: DVector<f64>,
        input_prior: InputPrior,
    ) -> Result<Self> {
        if fixed_inputs.nrows() != fixed_outputs.len() {
            return Err(Error::invalid(format!(
                "{} fixed inputs but {} fixed outputs",
                fixed_inputs.nrows(),
                fixed_outputs.len()
            )));
        }
        if input_prior.n_points() != uncertain_outputs.len() {
            return Err(Error::invalid(format!(
                "{} uncertain priors but {} uncertain outputs",
                input_prior.n_points(),
                uncertain_outputs.len()
            )));
        }
        if fixed_inputs.ncols() != input_prior.dim() {
            return Err(Error::invalid(format!(
                "fixed inputs have dimension {} but priors have dimension {}",
                fixed_inputs.ncols(),
                input_prior.dim()
            )));
        }
        if fixed_inputs.ncols() == 0 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if fixed_outputs.len() + uncertain_outputs.len() == 0 {
            return Err(Error::invalid("training data is empty"));
        }
        if fixed_inputs
            .iter()
            .chain(fixed_outputs.iter())
            .chain(uncertain_outputs.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("training data contains non-finite values"));
        }
        Ok(TrainingData {
            fixed_inputs,
            fixed_outputs,
            uncertain_outputs,
            input_prior,
        })
    }

    /// Plain GP data with no uncertain inputs.
    pub fn fixed_only(inputs: DMatrix<f64>, outputs: DVector<f64>) -> Result<Self> {
        let d = inputs.ncols();
        Self::new(inputs, outputs, DVector::zeros(0), InputPrior::empty(d))
    }

    pub fn fixed_inputs(&self) -> &DMatrix<f64> {
        &self.fixed_inputs
    }

    pub fn fixed_outputs(&self) -> &DVector<f64> {
        &self.fixed_outputs
    }

    pub fn uncertain_outputs(&self) -> &DVector<f64> {
        &self.uncertain_outputs
    }

    pub fn input_prior(&self) -> &InputPrior {
        &self.input_prior
    }

    pub fn dim(&self) -> usize {
        self.fixed_inputs.ncols()
    }

    pub fn n_fixed(&self) -> usize {
        self.fixed_outputs.len()
    }

    pub fn n_uncertain(&self) -> usize {
        self.uncertain_outputs.len()
    }

    /// `[X^f; x_u]`, fixed rows first.
    pub fn stacked_inputs(&self, uncertain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if uncertain.shape() != (self.n_uncertain(), self.dim()) {
            return Err(Error::invalid(format!(
                "uncertain locations have shape {:?}, expected {:?}",
                uncertain.shape(),
                (self.n_uncertain(), self.dim())
            )));
        }
        let (nf, nu, d) = (self.n_fixed(), self.n_uncertain(), self.dim());
        Ok(DMatrix::from_fn(nf + nu, d, |i, j| {
            if i < nf {
                self.fixed_inputs[(i, j)]
            } else {
                uncertain[(i - nf, j)]
            }
        }))
    }

    /// `[y^f; y^u]`.
    pub fn stacked_outputs(&self) -> DVector<f64> {
        let nf = self.n_fixed();
        DVector::from_fn(nf + self.n_uncertain(), |i, _| {
            if i < nf {
                self.fixed_outputs[i]
            } else {
                self.uncertain_outputs[i - nf]
            }
        })
    }

    /// Inputs with every uncertain location replaced by its prior mean.
    pub fn prior_mean_inputs(&self) -> DMatrix<f64> {
        self.stacked_inputs(self.input_prior.means())
            .expect("prior shape is validated at construction")
    }
}

/// A GP conditioned on one concrete set of training inputs.
#[derive(Clone, Debug)]
pub struct FittedGP {
    training_inputs: DMatrix<f64>,
    training_outputs: DVector<f64>,
    hyperparams: KernelHyperparams,
    cholesky: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

/// Per-point predictive moments of the latent function.
#[derive(Clone, Debug, PartialEq)]
pub struct GpPrediction {
    pub mean: DVector<f64>,
    pub variance: DVector<f64>,
    /// Number of variances that came out negative and were clamped to zero.
    pub clamped: usize,
}

fn check_training(inputs: &DMatrix<f64>, outputs: &DVector<f64>, hp: &KernelHyperparams) -> Result<()> {
    if inputs.nrows() == 0 {
        return Err(Error::invalid("at least one training point is required"));
    }
    if inputs.nrows() != outputs.len() {
        return Err(Error::invalid(format!(
            "{} inputs but {} outputs",
            inputs.nrows(),
            outputs.len()
        )));
    }
    hp.validate()?;
    if inputs.ncols() != hp.dim() {
        return Err(Error::invalid(format!(
            "input dimension {} does not match {} lengthscales",
            inputs.ncols(),
            hp.dim()
        )));
    }
    Ok(())
}

fn factorize(k: DMatrix<f64>, hp: &KernelHyperparams) -> Result<Cholesky<f64, Dyn>> {
    k.cholesky().ok_or(Error::IllConditioned { jitter: hp.jitter() })
}

/// Conditions the GP on `(inputs, outputs)`.
pub fn gp_fit(inputs: &DMatrix<f64>, outputs: &DVector<f64>, hp: &KernelHyperparams) -> Result<FittedGP> {
    check_training(inputs, outputs, hp)?;
    let cholesky = factorize(noisy_gram(inputs, hp)?, hp)?;
    let alpha = cholesky.solve(outputs);
    Ok(FittedGP {
        training_inputs: inputs.clone(),
        training_outputs: outputs.clone(),
        hyperparams: hp.clone(),
        cholesky,
        alpha,
    })
}

impl FittedGP {
    pub fn training_inputs(&self) -> &DMatrix<f64> {
        &self.training_inputs
    }

    pub fn training_outputs(&self) -> &DVector<f64> {
        &self.training_outputs
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    /// Lower-triangular `L` with `L Lᵀ = K + σ_n² I + jitter`.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.cholesky.l()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// `log p(y | X, θ)` for the conditioning data.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.training_outputs.len() as f64;
        let fit = self.training_outputs.dot(&self.alpha);
        let log_det: f64 = self.cholesky.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * fit - 0.5 * log_det - 0.5 * n * (2.0 * PI).ln()
    }

    /// Predictive mean and variance of the noise-free latent `f*`.
    pub fn predict(&self, test_inputs: &DMatrix<f64>) -> Result<GpPrediction> {
        if test_inputs.ncols() != self.training_inputs.ncols() {
            return Err(Error::invalid(format!(
                "test inputs have dimension {}, model has {}",
                test_inputs.ncols(),
                self.training_inputs.ncols()
            )));
        }
        // K(X, X*), one column per test point
        let k_star = gram_matrix(&self.training_inputs, test_inputs, &self.hyperparams, false)?;
        let mean = k_star.tr_mul(&self.alpha);
        let mut v = k_star;
        self.cholesky.l_dirty().solve_lower_triangular_mut(&mut v);
        let mut clamped = 0;
        let sf2 = self.hyperparams.signal_variance;
        let variance = DVector::from_iterator(
            v.ncols(),
            v.column_iter().map(|c| {
                let var = sf2 - c.norm_squared();
                if var < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    var
                }
            }),
        );
        if clamped > 0 {
            log::debug!("clamped {clamped} negative predictive variances");
        }
        Ok(GpPrediction {
            mean,
            variance,
            clamped,
        })
    }
}

/// Free-function form of [`FittedGP::predict`].
pub fn gp_predict(model: &FittedGP, test_inputs: &DMatrix<f64>) -> Result<GpPrediction> {
    model.predict(test_inputs)
}

/// `-½ yᵀ(K+σ_n²I)⁻¹y - ½ log|K+σ_n²I| - (n/2) log 2π`, through the Cholesky factor.
pub fn log_marginal_likelihood(
    inputs: &DMatrix<f64>,
    outputs: &DVector<f64>,
    hp: &KernelHyperparams,
) -> Result<f64> {
    Ok(gp_fit(inputs, outputs, hp)?.log_marginal_likelihood())
}

/// Gradient of the log marginal likelihood with respect to
/// `(log σ_f², log ℓ_1..d, log σ_n²)`.
pub fn lml_gradient(inputs: &DMatrix<f64>, outputs: &DVector<f64>, hp: &KernelHyperparams) -> Result<DVector<f64>> {
    Ok(lml_with_gradient(inputs, outputs, hp)?.1)
}

/// Log marginal likelihood and its log-space gradient from one factorization.
pub fn lml_with_gradient(
    inputs: &DMatrix<f64>,
    outputs: &DVector<f64>,
    hp: &KernelHyperparams,
) -> Result<(f64, DVector<f64>)> {
    let fitted = gp_fit(inputs, outputs, hp)?;
    let lml = fitted.log_marginal_likelihood();
    let n = inputs.nrows();
    let d = hp.dim();

    // W = ααᵀ - K⁻¹, so ∂L/∂p = ½ tr(W ∂K/∂p)
    let mut w = fitted.cholesky.inverse();
    w.neg_mut();
    w.ger(1.0, &fitted.alpha, &fitted.alpha, 1.0);

    // the jitter scales with σ_f² + σ_n² once that exceeds 1
    let jitter_active = hp.signal_variance + hp.noise_variance > 1.0;
    let jitter_coef = if jitter_active { crate::kernel::JITTER_SCALE } else { 0.0 };
    let trace_w = w.trace();

    let mut grad = DVector::zeros(d + 2);
    let k = gram_matrix(inputs, inputs, hp, false)?;
    let mut g_sf = 0.0;
    let mut g_len = vec![0.0; d];
    for a in 0..n {
        for b in 0..n {
            let wk = w[(a, b)] * k[(a, b)];
            g_sf += wk;
            if a != b {
                for (j, l) in hp.lengthscales.iter().enumerate() {
                    let z = (inputs[(a, j)] - inputs[(b, j)]) / l;
                    g_len[j] += wk * z * z;
                }
            }
        }
    }
    grad[0] = 0.5 * (g_sf + jitter_coef * hp.signal_variance * trace_w);
    for j in 0..d {
        grad[1 + j] = 0.5 * g_len[j];
    }
    grad[d + 1] = 0.5 * (hp.noise_variance + jitter_coef * hp.noise_variance) * trace_w;
    Ok((lml, grad))
}
