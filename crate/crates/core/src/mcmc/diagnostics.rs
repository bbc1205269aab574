use nalgebra::DMatrix;

use super::PosteriorChain;

/// Per-coordinate summary of a chain. Matrices have the shape of one sample.
#[derive(Clone, Debug)]
pub struct ChainDiagnostics {
    pub acceptance_rate: f64,
    pub mean: DMatrix<f64>,
    /// Sample standard deviation (divisor n).
    pub std: DMatrix<f64>,
    pub ess: DMatrix<f64>,
}

pub fn chain_diagnostics(chain: &PosteriorChain) -> ChainDiagnostics {
    let shape = chain
        .samples
        .first()
        .map(|s| s.shape())
        .unwrap_or((0, 0));
    let mut mean = DMatrix::zeros(shape.0, shape.1);
    let mut std = DMatrix::zeros(shape.0, shape.1);
    let mut ess = DMatrix::zeros(shape.0, shape.1);
    for i in 0..shape.0 {
        for j in 0..shape.1 {
            let trace: Vec<f64> = chain.samples.iter().map(|s| s[(i, j)]).collect();
            let (m, v) = mean_var(&trace);
            mean[(i, j)] = m;
            std[(i, j)] = v.sqrt();
            ess[(i, j)] = effective_sample_size(&trace);
        }
    }
    ChainDiagnostics {
        acceptance_rate: chain.acceptance_rate.clamp(0.0, 1.0),
        mean,
        std,
        ess,
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v)
}

/// Effective sample size with Geyer's initial positive sequence truncation.
///
/// Constant traces and traces shorter than two samples report 1.
pub fn effective_sample_size(trace: &[f64]) -> f64 {
    let n = trace.len();
    if n < 2 {
        return 1.0;
    }
    let (m, var) = mean_var(trace);
    if var <= 0.0 || !var.is_finite() {
        return 1.0;
    }
    let autocorr = |lag: usize| -> f64 {
        let s: f64 = (0..n - lag).map(|t| (trace[t] - m) * (trace[t + lag] - m)).sum();
        s / (n as f64 * var)
    };
    // τ = -1 + 2 Σ_k Γ_k with Γ_k = ρ_{2k} + ρ_{2k+1}, stopped at the first non-positive pair
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let gamma = autocorr(2 * k) + autocorr(2 * k + 1);
        if gamma <= 0.0 {
            break;
        }
        tau += 2.0 * gamma;
        k += 1;
    }
    if tau <= 0.0 {
        return n as f64;
    }
    (n as f64 / tau).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcmc::MetropolisConfig;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn fake_chain(values: Vec<f64>) -> PosteriorChain {
        PosteriorChain {
            samples: values.iter().map(|v| DMatrix::from_element(1, 1, *v)).collect(),
            log_posterior_values: vec![0.0; values.len()],
            acceptance_rate: 0.3,
            final_step_scales: vec![0.25],
            warnings: vec![],
            config: MetropolisConfig::default(),
        }
    }

    #[test]
    fn constant_chain() {
        let d = chain_diagnostics(&fake_chain(vec![2.5; 200]));
        assert_eq!(d.ess[(0, 0)], 1.0);
        assert_eq!(d.std[(0, 0)], 0.0);
        assert_eq!(d.mean[(0, 0)], 2.5);
    }

    #[test]
    fn iid_draws_have_full_ess() {
        let mut r = rng::stream(4, 0);
        let n = 5000;
        let xs: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let ess = effective_sample_size(&xs);
        assert!((ess - n as f64).abs() < 0.2 * n as f64, "ess {ess}");
    }

    #[test]
    fn autocorrelated_draws_have_reduced_ess() {
        // AR(1) with φ = 0.9 has τ = (1+φ)/(1-φ) = 19
        let mut r = rng::stream(5, 0);
        let n = 50_000;
        let mut x = 0.0;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = r.sample(StandardNormal);
                x = 0.9 * x + z;
                x
            })
            .collect();
        let ess = effective_sample_size(&xs);
        let expected = n as f64 / 19.0;
        assert!((ess - expected).abs() < 0.25 * expected, "ess {ess} vs {expected}");
    }

    #[test]
    fn acceptance_rate_bounded() {
        let mut c = fake_chain(vec![0.0, 1.0]);
        c.acceptance_rate = 1.0;
        let d = chain_diagnostics(&c);
        assert!((0.0..=1.0).contains(&d.acceptance_rate));
    }
}
