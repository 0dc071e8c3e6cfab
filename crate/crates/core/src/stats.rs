//! Sample statistics used by the experiment harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance; NaN for fewer than two points.
pub fn variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sd(x: &[f64]) -> f64 {
    variance(x).sqrt()
}

fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Moment skewness `m₃ / m₂^{3/2}`.
pub fn skewness(x: &[f64]) -> f64 {
    let (m2, m3, _) = central_moments(x);
    m3 / m2.powf(1.5)
}

/// `m₄ / m₂² - 3`.
pub fn excess_kurtosis(x: &[f64]) -> f64 {
    let (m2, _, m4) = central_moments(x);
    m4 / (m2 * m2) - 3.0
}

/// Jackknife standard error of [`skewness`].
pub fn skewness_se(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 3 {
        return f64::NAN;
    }
    // leave-one-out power sums
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let s3: f64 = x.iter().map(|v| v * v * v).sum();
    let k = (n - 1) as f64;
    let loo: Vec<f64> = x
        .iter()
        .map(|v| {
            let a1 = (s1 - v) / k;
            let a2 = (s2 - v * v) / k;
            let a3 = (s3 - v * v * v) / k;
            let m2 = a2 - a1 * a1;
            let m3 = a3 - 3.0 * a1 * a2 + 2.0 * a1 * a1 * a1;
            m3 / m2.powf(1.5)
        })
        .collect();
    let m = mean(&loo);
    (k / n as f64 * loo.iter().map(|g| (g - m) * (g - m)).sum::<f64>()).sqrt()
}

/// Pearson correlation; NaN if either sample is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical CDF of `x` and `Φ`.
pub fn ks_statistic_normal(x: &[f64]) -> f64 {
    let phi = Normal::standard();
    let mut s: Vec<f64> = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, v)| {
            let c = phi.cdf(*v);
            (c - i as f64 / n).max((i + 1) as f64 / n - c)
        })
        .fold(0.0, f64::max)
}

/// Summary moments of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of(x: &[f64]) -> Self {
        Self {
            n: x.len(),
            mean: mean(x),
            sd: sd(x),
            skewness: skewness(x),
            excess_kurtosis: excess_kurtosis(x),
        }
    }
}

/// Least-squares line through `(ln T, ln sd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Classical OLS standard error of the slope; zero for two points.
    pub slope_se: f64,
}

pub fn loglog_fit(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(Error::param("log-log fit needs at least two points"));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::param(format!("log-log fit needs positive coordinates, got {p:?}")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    linear_fit(&xs, &ys)
}

/// Ordinary least squares `y = intercept + slope x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    let n = xs.len();
    let (mx, my) = (mean(xs), mean(ys));
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::param("fit abscissae are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if n > 2 { (sse / (n - 2) as f64 / sxx).sqrt() } else { 0.0 };
    Ok(LogLogFit { slope, intercept, r2, slope_se })
}
