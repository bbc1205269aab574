use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule `1.06 · min(σ, IQR/1.34) · n^(-1/5)`.
///
/// Falls back to σ alone when the IQR is zero but the spread is not.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid("automatic bandwidth needs at least two samples"));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if std.is_nan() || std <= 0.0 {
        return Err(Error::DegenerateBandwidth);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel density estimate of `samples` evaluated on `grid`.
pub fn kde_density(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(samples)?,
    };
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    Ok(grid
        .iter()
        .map(|g| {
            let s: f64 = samples
                .iter()
                .map(|x| {
                    let u = (g - x) / h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * norm
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_draws(seed: u64, n: usize) -> Vec<f64> {
        let mut r = rng::stream(seed, 0);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn single_kernel_peak() {
        let h = 0.3;
        let d = kde_density(&[0.0], &[0.0], Some(h)).unwrap();
        assert!((d[0] - 1.0 / (h * (2.0 * PI).sqrt())).abs() < 1e-14);
    }

    #[test]
    fn integrates_to_one() {
        let xs = normal_draws(1, 10_000);
        let grid: Vec<f64> = (0..=1600).map(|k| -8.0 + k as f64 * 0.01).collect();
        let d = kde_density(&xs, &grid, None).unwrap();
        let integral: f64 = d.windows(2).map(|w| 0.5 * (w[0] + w[1]) * 0.01).sum();
        assert!((integral - 1.0).abs() < 1e-3, "{integral}");
        assert!(d.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn matches_standard_normal_at_zero() {
        let xs = normal_draws(2, 10_000);
        let d = kde_density(&xs, &[0.0], None).unwrap();
        let target = 1.0 / (2.0 * PI).sqrt();
        assert!((d[0] - target).abs() < 0.1 * target);
    }

    #[test]
    fn degenerate_samples() {
        assert!(matches!(kde_density(&[1.0; 5], &[0.0], None), Err(Error::DegenerateBandwidth)));
        assert!(kde_density(&[1.0; 5], &[1.0], Some(0.5)).is_ok());
        assert!(kde_density(&[1.0], &[1.0], None).is_err());
        assert!(kde_density(&[1.0, 2.0], &[1.0], Some(0.0)).is_err());
    }

    #[test]
    fn silverman_on_known_data() {
        // std of 1..=5 is sqrt(2.5); IQR (type 7) is 2
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let expected = 1.06 * (2.5f64.sqrt()).min(2.0 / 1.34) * 5f64.powf(-0.2);
        assert!((silverman_bandwidth(&xs).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn scaling_and_permutation() {
        let xs = normal_draws(3, 500);
        let grid: Vec<f64> = (0..50).map(|k| -3.0 + k as f64 * 0.12).collect();
        let h = 0.4;
        let a = 2.5;
        let base = kde_density(&xs, &grid, Some(h)).unwrap();
        let xs_a: Vec<f64> = xs.iter().map(|x| a * x).collect();
        let grid_a: Vec<f64> = grid.iter().map(|g| a * g).collect();
        let scaled = kde_density(&xs_a, &grid_a, Some(a * h)).unwrap();
        let mut rev = xs.clone();
        rev.reverse();
        let permuted = kde_density(&rev, &grid, Some(h)).unwrap();
        for k in 0..grid.len() {
            assert!((scaled[k] - base[k] / a).abs() < 1e-10);
            assert!((permuted[k] - base[k]).abs() < 1e-10);
        }
    }
}
