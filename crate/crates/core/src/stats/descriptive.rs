//! Per-condition descriptive statistics: moments, Z-scores, kurtosis and
//! boxplot fences.

use super::{Result, StatsError};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard deviation with the n - 1 divisor. Requires n >= 2.
pub fn sample_std(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(StatsError::TooFew { n: xs.len(), needed: 2 });
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Ok((ss / (xs.len() - 1) as f64).sqrt())
}

/// `(u - mean) / sample_std` for every score. Errors when all scores are equal.
pub fn zscores(xs: &[f64]) -> Result<Vec<f64>> {
    let s = sample_std(xs)?;
    if s == 0.0 {
        return Err(StatsError::Degenerate);
    }
    let m = mean(xs);
    Ok(xs.iter().map(|x| (x - m) / s).collect())
}

/// Population (non-excess) kurtosis m4 / m2^2; 3 for a normal distribution.
pub fn kurtosis(xs: &[f64]) -> Result<f64> {
    if xs.len() < 4 {
        return Err(StatsError::TooFew { n: xs.len(), needed: 4 });
    }
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    if m2 == 0.0 {
        return Err(StatsError::Degenerate);
    }
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    Ok(m4 / (m2 * m2))
}

/// True when the kurtosis lies outside the [2, 4] screening window.
pub fn kurtosis_flag(k: f64) -> bool {
    !(2.0..=4.0).contains(&k)
}

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

/// Tukey hinges: medians of the lower and upper halves, each half including
/// the overall median when n is odd.
pub fn tukey_hinges(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(StatsError::TooFew { n: 0, needed: 1 });
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let half = v.len().div_ceil(2);
    Ok((median_sorted(&v[..half]), median_sorted(&v[v.len() - half..])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierPolicy {
    /// Whisker length in interquartile ranges.
    pub w: f64,
}

impl Default for OutlierPolicy {
    fn default() -> Self {
        OutlierPolicy { w: 1.5 }
    }
}

impl OutlierPolicy {
    pub fn new(w: f64) -> Result<Self> {
        if w > 0.0 && !w.is_nan() {
            Ok(OutlierPolicy { w })
        } else {
            Err(StatsError::InvalidPolicy(w))
        }
    }

    /// Lower and upper fences `Q1 - w IQR`, `Q3 + w IQR`.
    pub fn fences(&self, xs: &[f64]) -> Result<(f64, f64)> {
        let (q1, q3) = tukey_hinges(xs)?;
        let iqr = q3 - q1;
        if self.w.is_infinite() {
            return Ok((f64::NEG_INFINITY, f64::INFINITY));
        }
        Ok((q1 - self.w * iqr, q3 + self.w * iqr))
    }
}

/// Flags scores outside the fences. Needs at least 4 scores.
pub fn outlier_flags(xs: &[f64], policy: OutlierPolicy) -> Result<Vec<bool>> {
    if xs.len() < 4 {
        return Err(StatsError::TooFew { n: xs.len(), needed: 4 });
    }
    let (lo, hi) = policy.fences(xs)?;
    Ok(xs.iter().map(|&u| u < lo || u > hi).collect())
}

/// Survivors and flags.
pub fn remove_outliers(xs: &[f64], policy: OutlierPolicy) -> Result<(Vec<f64>, Vec<bool>)> {
    let flags = outlier_flags(xs, policy)?;
    let kept = xs.iter().zip(&flags).filter(|(_, &f)| !f).map(|(&x, _)| x).collect();
    Ok((kept, flags))
}

/// Normal-approximation 95% interval `mean ± 1.96 s / sqrt(n)`.
pub fn ci95(xs: &[f64]) -> Result<(f64, f64)> {
    let m = mean(xs);
    let half = 1.96 * sample_std(xs)? / (xs.len() as f64).sqrt();
    Ok((m - half, m + half))
}
