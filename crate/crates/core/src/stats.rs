//! Sample statistics used by the Monte Carlo tests.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::rng::replica_rng;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0)
}

pub fn variance(x: &[f64]) -> f64 {
    covariance(x, x)
}

/// Central moment of order `p` (biased, `1/M`).
pub fn central_moment(x: &[f64], p: i32) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(p)).sum::<f64>() / x.len() as f64
}

/// Sample skewness `g_1 = m_3 / m_2^{3/2}`.
pub fn skewness(x: &[f64]) -> f64 {
    central_moment(x, 3) / central_moment(x, 2).powf(1.5)
}

/// Sample excess kurtosis `g_2 = m_4 / m_2^2 - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    central_moment(x, 4) / central_moment(x, 2).powi(2) - 3.0
}

/// Standard error of the mean.
pub fn mean_se(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

/// Bootstrap standard error of the sample covariance of paired data.
pub fn bootstrap_covariance_se(x: &[f64], y: &[f64], resamples: usize, seed: u64) -> f64 {
    let m = x.len();
    let mut rng = replica_rng(seed, 0);
    let mut bx = vec![0.0; m];
    let mut by = vec![0.0; m];
    let stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for r in 0..m {
                let k = rng.random_range(0..m);
                bx[r] = x[k];
                by[r] = y[k];
            }
            covariance(&bx, &by)
        })
        .collect();
    variance(&stats).sqrt()
}

/// Kolmogorov-Smirnov distance between the sample and the normal law
/// with the sample mean and variance.
pub fn ks_normal_distance(x: &[f64]) -> f64 {
    let m = x.len() as f64;
    let normal = Normal::new(mean(x), variance(x).sqrt()).expect("positive variance");
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let f = normal.cdf(v);
            (f - k as f64 / m).max((k + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the KS distance with estimated mean and variance
/// (Stephens' modified statistic).
pub fn ks_critical_1pct(m: usize) -> f64 {
    let r = (m as f64).sqrt();
    1.035 / (r - 0.01 + 0.85 / r)
}

/// Asymptotic Kolmogorov tail `P(K > sqrt(M) d)` for a fully specified
/// law; conservative when parameters are estimated.
pub fn ks_p_value(d: f64, m: usize) -> f64 {
    let lambda = ((m as f64).sqrt() + 0.12 + 0.11 / (m as f64).sqrt()) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let sum: f64 = (1..=100)
        .map(|k| {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp()
        })
        .sum();
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sided normal p-value of a z-score.
pub fn normal_p_value(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    2.0 * (1.0 - n.cdf(z.abs()))
}
