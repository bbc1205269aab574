//! Multi-start BFGS maximization of the log marginal likelihood in log space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use super::{lml_with_gradient, TrainingData};
use crate::error::{Error, Result};
use crate::kernel::KernelHyperparams;
use crate::rng;

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when the projected log-space gradient norm drops below this.
    pub gradient_tolerance: f64,
    /// Absolute lower bound on the noise variance.
    pub noise_floor: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 8,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
            noise_floor: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RestartRecord {
    pub initial: KernelHyperparams,
    pub initial_lml: f64,
    pub result: KernelHyperparams,
    pub lml: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct OptimizationOutcome {
    pub hyperparams: KernelHyperparams,
    pub lml: f64,
    /// Index of the winning restart.
    pub best_restart: usize,
    /// One entry per restart; `None` where the starting point was unusable.
    pub restarts: Vec<Option<RestartRecord>>,
}

/// Box constraints in log space, one pair per parameter.
#[derive(Clone, Debug)]
struct Bounds {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl Bounds {
    fn for_data(inputs: &DMatrix<f64>, outputs: &DVector<f64>, noise_floor: f64) -> Self {
        let d = inputs.ncols();
        let var_y = output_scale(outputs);
        let ranges = input_ranges(inputs);
        let mut lower = DVector::zeros(d + 2);
        let mut upper = DVector::zeros(d + 2);
        lower[0] = (1e-6 * var_y).ln();
        upper[0] = (1e6 * var_y).ln();
        for j in 0..d {
            lower[1 + j] = (1e-3 * ranges[j]).ln();
            upper[1 + j] = (1e3 * ranges[j]).ln();
        }
        lower[d + 1] = noise_floor.ln();
        upper[d + 1] = (1e2 * var_y).ln().max(lower[d + 1]);
        Bounds { lower, upper }
    }

    fn project(&self, p: &mut DVector<f64>) {
        for k in 0..p.len() {
            p[k] = p[k].clamp(self.lower[k], self.upper[k]);
        }
    }

    /// Zeroes gradient components that point out of the box at an active bound.
    fn projected_gradient(&self, p: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
        // g is the gradient of the minimized objective; descent moves along -g
        DVector::from_fn(p.len(), |k, _| {
            let at_lower = p[k] <= self.lower[k] && g[k] > 0.0;
            let at_upper = p[k] >= self.upper[k] && g[k] < 0.0;
            if at_lower || at_upper {
                0.0
            } else {
                g[k]
            }
        })
    }
}

fn output_scale(outputs: &DVector<f64>) -> f64 {
    let n = outputs.len() as f64;
    if outputs.len() < 2 {
        return outputs.iter().map(|v| v * v).sum::<f64>().max(1.0);
    }
    let mean = outputs.mean();
    let var = outputs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        var
    } else {
        1.0
    }
}

fn input_ranges(inputs: &DMatrix<f64>) -> Vec<f64> {
    (0..inputs.ncols())
        .map(|j| {
            let c = inputs.column(j);
            let r = c.max() - c.min();
            if r > 0.0 && r.is_finite() {
                r
            } else {
                1.0
            }
        })
        .collect()
}

/// Objective for the minimizer: `-LML` and its gradient, `None` when the
/// factorization fails.
fn negative_lml(inputs: &DMatrix<f64>, outputs: &DVector<f64>, p: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let hp = KernelHyperparams::from_log_params(p);
    match lml_with_gradient(inputs, outputs, &hp) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|x| x.is_finite()) => Some((-v, -g)),
        _ => None,
    }
}

/// Local BFGS ascent of the LML from `init`, within the default log-space box.
pub fn maximize_lml(
    inputs: &DMatrix<f64>,
    outputs: &DVector<f64>,
    init: &KernelHyperparams,
    cfg: &OptimizerConfig,
) -> Result<RestartRecord> {
    let bounds = Bounds::for_data(inputs, outputs, cfg.noise_floor);
    let mut start = init.clone();
    start.noise_variance = start.noise_variance.max(cfg.noise_floor);
    bfgs(inputs, outputs, &start, &bounds, cfg)
}

fn bfgs(
    inputs: &DMatrix<f64>,
    outputs: &DVector<f64>,
    init: &KernelHyperparams,
    bounds: &Bounds,
    cfg: &OptimizerConfig,
) -> Result<RestartRecord> {
    let mut p = init.to_log_params();
    bounds.project(&mut p);
    let initial = KernelHyperparams::from_log_params(&p);
    let (mut f, mut g) = negative_lml(inputs, outputs, &p).ok_or_else(|| {
        Error::OptimizationFailed(format!("non-finite likelihood at starting point {initial:?}"))
    })?;
    let initial_lml = -f;
    let n = p.len();
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut pg = bounds.projected_gradient(&p, &g);
    let mut converged = pg.norm() < cfg.gradient_tolerance;

    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        for k in 0..n {
            if pg[k] == 0.0 && g[k] != 0.0 {
                dir[k] = 0.0;
            }
        }
        if dir.dot(&pg) >= 0.0 {
            h_inv.fill_with_identity();
            dir = -pg.clone();
        }
        // keep a single step within a factor of e^4 per parameter
        let max_step = dir.amax();
        if max_step > 4.0 {
            dir *= 4.0 / max_step;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial = &p + &dir * t;
            bounds.project(&mut trial);
            let step = &trial - &p;
            if step.amax() == 0.0 {
                break;
            }
            if let Some((ft, gt)) = negative_lml(inputs, outputs, &trial) {
                if ft <= f + 1e-4 * g.dot(&step) {
                    accepted = Some((trial, ft, gt, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, ft, gt, step)) = accepted else {
            break;
        };

        let y = &gt - &g;
        let sy = step.dot(&y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            // H ← H - ρ(s yᵀH + H y sᵀ) + (ρ² yᵀHy + ρ) s sᵀ
            h_inv.ger(-rho, &step, &hy, 1.0);
            h_inv.ger(-rho, &hy, &step, 1.0);
            h_inv.ger(rho * rho * yhy + rho, &step, &step, 1.0);
        }
        p = trial;
        f = ft;
        g = gt;
        pg = bounds.projected_gradient(&p, &g);
        converged = pg.norm() < cfg.gradient_tolerance;
    }

    Ok(RestartRecord {
        initial,
        initial_lml,
        result: KernelHyperparams::from_log_params(&p),
        lml: -f,
        iterations,
        gradient_norm: pg.norm(),
        converged,
    })
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp()
}

/// Starting points drawn log-uniformly from data-scaled ranges.
fn restart_points(inputs: &DMatrix<f64>, outputs: &DVector<f64>, cfg: &OptimizerConfig) -> Vec<KernelHyperparams> {
    let mut r = rng::stream(cfg.seed, rng::STREAM_OPTIMIZER);
    let var_y = output_scale(outputs);
    let ranges = input_ranges(inputs);
    (0..cfg.restarts.max(1))
        .map(|_| KernelHyperparams {
            signal_variance: log_uniform(&mut r, 1e-2 * var_y, 1e2 * var_y),
            lengthscales: ranges.iter().map(|rg| log_uniform(&mut r, 1e-2 * rg, 1e1 * rg)).collect(),
            noise_variance: log_uniform(&mut r, 1e-6 * var_y, var_y).max(cfg.noise_floor),
        })
        .collect()
}

/// Fits hyperparameters on the surrogate dataset where each uncertain input
/// sits at its prior mean.
pub fn optimize_hyperparameters(data: &TrainingData, cfg: &OptimizerConfig) -> Result<KernelHyperparams> {
    Ok(optimize_hyperparameters_detailed(data, cfg)?.hyperparams)
}

pub fn optimize_hyperparameters_detailed(data: &TrainingData, cfg: &OptimizerConfig) -> Result<OptimizationOutcome> {
    let inputs = data.prior_mean_inputs();
    let outputs = data.stacked_outputs();
    let bounds = Bounds::for_data(&inputs, &outputs, cfg.noise_floor);
    let starts = restart_points(&inputs, &outputs, cfg);

    let restarts: Vec<Option<RestartRecord>> = starts
        .par_iter()
        .map(|s| bfgs(&inputs, &outputs, s, &bounds, cfg).ok())
        .collect();

    let mut best: Option<(usize, &RestartRecord)> = None;
    for (i, r) in restarts.iter().enumerate() {
        if let Some(r) = r {
            if r.lml.is_finite() && best.is_none_or(|(_, b)| r.lml > b.lml) {
                best = Some((i, r));
            }
        }
    }
    let Some((best_restart, rec)) = best else {
        return Err(Error::OptimizationFailed(format!(
            "all {} restarts failed to produce a finite likelihood",
            restarts.len()
        )));
    };
    log::debug!(
        "hyperparameters: restart {best_restart} lml {:.6} converged {} |g| {:.2e}",
        rec.lml,
        rec.converged,
        rec.gradient_norm
    );
    Ok(OptimizationOutcome {
        hyperparams: rec.result.clone(),
        lml: rec.lml,
        best_restart,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{lml_gradient, log_marginal_likelihood};
    use crate::kernel::gram_matrix;
    use rand_distr::StandardNormal;

    fn draw_from_gp(seed: u64, n: usize, hp: &KernelHyperparams) -> (DMatrix<f64>, DVector<f64>) {
        let mut r = rng::stream(seed, 0);
        let x = DMatrix::from_fn(n, 1, |_, _| r.random_range(0.0..20.0));
        let k = gram_matrix(&x, &x, hp, true).unwrap();
        let l = k.cholesky().unwrap().l();
        let z = DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal));
        (x, l * z)
    }

    #[test]
    fn every_restart_ascends() {
        let truth = KernelHyperparams::isotropic(1.0, 1.0, 1, 0.01).unwrap();
        let (x, y) = draw_from_gp(1, 40, &truth);
        let data = TrainingData::fixed_only(x, y).unwrap();
        let out = optimize_hyperparameters_detailed(&data, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.restarts.len(), 8);
        for r in out.restarts.iter().flatten() {
            assert!(r.lml >= r.initial_lml);
            assert!(out.lml >= r.lml);
        }
    }

    #[test]
    fn recovers_generating_lengthscale() {
        let truth = KernelHyperparams::isotropic(1.0, 1.0, 1, 0.01).unwrap();
        let (x, y) = draw_from_gp(7, 60, &truth);
        let data = TrainingData::fixed_only(x, y).unwrap();
        let hp = optimize_hyperparameters(&data, &OptimizerConfig::default()).unwrap();
        let l = hp.lengthscales[0];
        assert!((0.5..=2.0).contains(&l), "lengthscale {l}");
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let truth = KernelHyperparams::isotropic(1.0, 1.0, 1, 0.01).unwrap();
        let (x, y) = draw_from_gp(3, 50, &truth);
        let data = TrainingData::fixed_only(x.clone(), y.clone()).unwrap();
        let cfg = OptimizerConfig {
            max_iterations: 500,
            ..OptimizerConfig::default()
        };
        let hp = optimize_hyperparameters(&data, &cfg).unwrap();
        let g = lml_gradient(&x, &y, &hp).unwrap();
        assert!(g.norm() < 1e-5, "gradient {g}");
    }

    #[test]
    fn noise_free_data_gets_tiny_noise() {
        // 8 noise-free points of a smooth function over [0, 8π]
        let xs: [f64; 8] = [3.1, 4.7, 6.3, 9.4, 12.6, 15.7, 18.8, 22.0];
        let x = DMatrix::from_column_slice(8, 1, &xs);
        let y = DVector::from_fn(8, |i, _| -xs[i] * (xs[i] / 3.0).sin());
        let data = TrainingData::fixed_only(x, y).unwrap();
        let hp = optimize_hyperparameters(&data, &OptimizerConfig::default()).unwrap();
        assert!(hp.noise_variance < 1e-4 * hp.signal_variance, "{hp:?}");
    }

    #[test]
    fn deterministic_given_seed() {
        let truth = KernelHyperparams::isotropic(2.0, 3.0, 1, 0.1).unwrap();
        let (x, y) = draw_from_gp(5, 25, &truth);
        let data = TrainingData::fixed_only(x, y).unwrap();
        let cfg = OptimizerConfig {
            seed: 42,
            ..OptimizerConfig::default()
        };
        assert_eq!(
            optimize_hyperparameters(&data, &cfg).unwrap(),
            optimize_hyperparameters(&data, &cfg).unwrap()
        );
    }

    #[test]
    fn uses_prior_means_for_uncertain_inputs() {
        let truth = KernelHyperparams::isotropic(1.0, 2.0, 1, 0.05).unwrap();
        let (x, y) = draw_from_gp(9, 20, &truth);
        let fixed = x.rows(0, 12).into_owned();
        let yf = y.rows(0, 12).into_owned();
        let prior = crate::InputPrior::with_shared_std(x.rows(12, 8).into_owned(), 1.0).unwrap();
        let data = TrainingData::new(fixed, yf, y.rows(12, 8).into_owned(), prior).unwrap();
        let all = TrainingData::fixed_only(x.clone(), y.clone()).unwrap();
        let cfg = OptimizerConfig::default();
        assert_eq!(
            optimize_hyperparameters(&data, &cfg).unwrap(),
            optimize_hyperparameters(&all, &cfg).unwrap()
        );
    }

    #[test]
    fn local_ascent_from_given_start() {
        let truth = KernelHyperparams::isotropic(1.0, 1.0, 1, 0.01).unwrap();
        let (x, y) = draw_from_gp(11, 30, &truth);
        let start = KernelHyperparams::isotropic(0.2, 5.0, 1, 0.3).unwrap();
        let rec = maximize_lml(&x, &y, &start, &OptimizerConfig::default()).unwrap();
        assert!(rec.lml > log_marginal_likelihood(&x, &y, &start).unwrap());
    }
}
