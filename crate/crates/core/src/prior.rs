//! Independent Gaussian priors over the uncertain input locations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Per-point, per-coordinate independent Gaussian prior `N(μ_ij, s_ij²)`.
///
/// Rows index uncertain points, columns index input coordinates. Priors are
/// parameterized by standard deviation, so `μ ± 2s` is the 95% interval.
#[derive(Clone, Debug, PartialEq)]
pub struct InputPrior {
    means: DMatrix<f64>,
    std_devs: DMatrix<f64>,
}

impl InputPrior {
    pub fn new(means: DMatrix<f64>, std_devs: DMatrix<f64>) -> Result<Self> {
        if means.shape() != std_devs.shape() {
            return Err(Error::invalid(format!(
                "prior means {:?} and std devs {:?} differ in shape",
                means.shape(),
                std_devs.shape()
            )));
        }
        if let Some(s) = std_devs.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::invalid(format!("prior std devs must be positive, got {s}")));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("prior means must be finite"));
        }
        Ok(InputPrior { means, std_devs })
    }

    /// Same standard deviation for every point and coordinate.
    pub fn with_shared_std(means: DMatrix<f64>, std_dev: f64) -> Result<Self> {
        let std_devs = DMatrix::from_element(means.nrows(), means.ncols(), std_dev);
        Self::new(means, std_devs)
    }

    /// Prior over zero uncertain points in `dim` dimensions.
    pub fn empty(dim: usize) -> Self {
        InputPrior {
            means: DMatrix::zeros(0, dim),
            std_devs: DMatrix::zeros(0, dim),
        }
    }

    pub fn means(&self) -> &DMatrix<f64> {
        &self.means
    }

    pub fn std_devs(&self) -> &DMatrix<f64> {
        &self.std_devs
    }

    pub fn n_points(&self) -> usize {
        self.means.nrows()
    }

    pub fn dim(&self) -> usize {
        self.means.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.n_points() == 0
    }

    /// Joint log density `Σ_ij log N(x_ij; μ_ij, s_ij²)`.
    pub fn log_density(&self, candidate: &DMatrix<f64>) -> Result<f64> {
        if candidate.shape() != self.means.shape() {
            return Err(Error::invalid(format!(
                "candidate shape {:?} does not match prior shape {:?}",
                candidate.shape(),
                self.means.shape()
            )));
        }
        Ok(candidate
            .iter()
            .zip(self.means.iter())
            .zip(self.std_devs.iter())
            .map(|((x, mu), s)| {
                let z = (x - mu) / s;
                -0.5 * (2.0 * PI * s * s).ln() - 0.5 * z * z
            })
            .sum())
    }

    /// One joint draw from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut out = self.means.clone();
        // column-major fill keeps the draw order fixed
        for (x, s) in out.iter_mut().zip(self.std_devs.iter()) {
            let z: f64 = rng.sample(StandardNormal);
            *x += s * z;
        }
        out
    }
}

/// Free-function form of [`InputPrior::log_density`].
pub fn log_prior_density(candidate: &DMatrix<f64>, prior: &InputPrior) -> Result<f64> {
    prior.log_density(candidate)
}

/// Free-function form of [`InputPrior::sample`].
pub fn sample_prior<R: Rng + ?Sized>(prior: &InputPrior, rng: &mut R) -> DMatrix<f64> {
    prior.sample(rng)
}
