use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SpdFactor};

const MIN_SAMPLES: usize = 10;

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// `(mu_hat - mu_n)' Sigma^{-1} (mu_hat - mu_n)`.
pub fn quadratic_loss(mu_hat: &DenseVector, mu_n: &DenseVector, sigma_factor: &SpdFactor) -> Result<f64> {
    for v in [mu_hat, mu_n] {
        if v.len() != sigma_factor.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma_factor.dim(),
                actual: v.len(),
            });
        }
    }
    Ok(sigma_factor.whiten(&(mu_hat - mu_n)).norm_squared())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("samples contain NaN".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    Ok(xs)
}

/// Sorted samples paired with standard normal quantiles at `(i - 0.5) / N`,
/// as `(theoretical, empirical)`.
pub fn qq_data(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let xs = sorted(samples)?;
    let normal = standard_normal();
    let n = xs.len() as f64;
    Ok(xs
        .into_iter()
        .enumerate()
        .map(|(i, x)| (normal.inverse_cdf((i as f64 + 0.5) / n), x))
        .collect())
}

/// Kolmogorov-Smirnov distance between the empirical CDF and `N(0, 1)`.
pub fn ks_statistic(samples: &[f64]) -> Result<f64> {
    let xs = sorted(samples)?;
    let normal = standard_normal();
    let n = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal.cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Asymptotic Kolmogorov critical value `k_level / sqrt(n)` for levels
/// 0.10, 0.05 and 0.01.
pub fn ks_critical_value(n: usize, level: f64) -> Result<f64> {
    let k = if (level - 0.10).abs() < 1e-12 {
        1.22
    } else if (level - 0.05).abs() < 1e-12 {
        1.36
    } else if (level - 0.01).abs() < 1e-12 {
        1.63
    } else {
        return Err(Error::InvalidArgument(format!(
            "no tabulated Kolmogorov quantile for level {level}"
        )));
    };
    Ok(k / (n as f64).sqrt())
}

/// Mean and standard error of the mean; the error is 0 for one value.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}
