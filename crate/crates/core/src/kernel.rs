//! Squared-exponential ARD covariance and Gram-matrix assembly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative diagonal jitter added to every square Gram matrix that gets factorized.
pub const JITTER_SCALE: f64 = 1e-8;

/// Kernel hyperparameters: signal variance, per-dimension lengthscales and
/// the white-noise variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(signal_variance: f64, lengthscales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        let hp = KernelHyperparams {
            signal_variance,
            lengthscales,
            noise_variance,
        };
        hp.validate()?;
        Ok(hp)
    }

    /// Isotropic convenience constructor.
    pub fn isotropic(signal_variance: f64, lengthscale: f64, dim: usize, noise_variance: f64) -> Result<Self> {
        Self::new(signal_variance, vec![lengthscale; dim], noise_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "signal variance must be positive, got {}",
                self.signal_variance
            )));
        }
        if self.lengthscales.is_empty() {
            return Err(Error::invalid("at least one lengthscale is required"));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::invalid(format!("lengthscales must be positive, got {l}")));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be nonnegative, got {}",
                self.noise_variance
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Log-space parameter vector `(log σ_f², log ℓ_1..d, log σ_n²)`.
    pub fn to_log_params(&self) -> DVector<f64> {
        let d = self.dim();
        let mut p = DVector::zeros(d + 2);
        p[0] = self.signal_variance.ln();
        for (j, l) in self.lengthscales.iter().enumerate() {
            p[1 + j] = l.ln();
        }
        p[d + 1] = self.noise_variance.ln();
        p
    }

    pub fn from_log_params(p: &DVector<f64>) -> Self {
        let d = p.len() - 2;
        KernelHyperparams {
            signal_variance: p[0].exp(),
            lengthscales: (0..d).map(|j| p[1 + j].exp()).collect(),
            noise_variance: p[d + 1].exp(),
        }
    }

    /// Diagonal jitter used when factorizing the noise-augmented Gram matrix.
    pub fn jitter(&self) -> f64 {
        JITTER_SCALE * (self.signal_variance + self.noise_variance).max(1.0)
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(Error::invalid(format!(
                "input dimension {d} does not match {} lengthscales",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// `σ_f² exp(-½ Σ_j ((x1_j - x2_j)/ℓ_j)²)`.
pub fn se_ard_covariance(x1: &[f64], x2: &[f64], hp: &KernelHyperparams) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::invalid(format!(
            "points have different dimensions ({} vs {})",
            x1.len(),
            x2.len()
        )));
    }
    hp.check_dim(x1.len())?;
    Ok(se_unchecked(x1.iter().copied(), x2.iter().copied(), hp))
}

#[inline]
fn se_unchecked<I, J>(x1: I, x2: J, hp: &KernelHyperparams) -> f64
where
    I: Iterator<Item = f64>,
    J: Iterator<Item = f64>,
{
    let r2: f64 = x1
        .zip(x2)
        .zip(&hp.lengthscales)
        .map(|((a, b), l)| {
            let z = (a - b) / l;
            z * z
        })
        .sum();
    hp.signal_variance * (-0.5 * r2).exp()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Cross-covariance matrix between the rows of `a` and the rows of `b`.
///
/// With `add_noise`, `a` and `b` must have the same number of rows and
/// `σ_n² + jitter` is added on the diagonal; this is only meaningful when they
/// are the same point set.
pub fn gram_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    hp: &KernelHyperparams,
    add_noise: bool,
) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "input sets have different dimensions ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    hp.check_dim(a.ncols())?;
    if add_noise && a.nrows() != b.nrows() {
        return Err(Error::invalid("noise can only be added to a square Gram matrix"));
    }
    let b_rows = rows(b);
    let mut k = DMatrix::zeros(a.nrows(), b.nrows());
    for (i, ai) in rows(a).iter().enumerate() {
        for (j, bj) in b_rows.iter().enumerate() {
            k[(i, j)] = se_unchecked(ai.iter().copied(), bj.iter().copied(), hp);
        }
    }
    if add_noise {
        let extra = hp.noise_variance + hp.jitter();
        for i in 0..k.nrows() {
            k[(i, i)] += extra;
        }
    }
    Ok(k)
}

/// Symmetric noise-augmented Gram matrix of one point set, filling only one
/// triangle of kernel evaluations.
pub fn noisy_gram(x: &DMatrix<f64>, hp: &KernelHyperparams) -> Result<DMatrix<f64>> {
    hp.check_dim(x.ncols())?;
    let n = x.nrows();
    let rows = rows(x);
    let extra = hp.noise_variance + hp.jitter();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hp.signal_variance + extra;
        for j in 0..i {
            let v = se_unchecked(rows[i].iter().copied(), rows[j].iter().copied(), hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
