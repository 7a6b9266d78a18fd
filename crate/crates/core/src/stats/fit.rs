//! Least-squares quartic mapping between setups, with Pearson and Spearman
//! correlation before and after the mapping.

use super::{Result, StatsError};
use nalgebra::{DMatrix, DVector};

/// `p1 x^4 + p2 x^3 + p3 x^2 + p4 x + p5`, coefficients highest power first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polynomial(pub [f64; 5]);

impl Polynomial {
    pub fn eval(&self, x: f64) -> f64 {
        self.0.iter().fold(0.0, |acc, &c| acc * x + c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuarticFit {
    pub poly: Polynomial,
    /// Correlations of (x, y); `None` when either side is constant.
    pub pearson_before: Option<f64>,
    pub spearman_before: Option<f64>,
    /// Correlations of (p(x), y).
    pub pearson_after: Option<f64>,
    pub spearman_after: Option<f64>,
    pub residual_ss: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Fits `y ≈ p(x)` with p of degree exactly 4. x is centered and scaled
/// before solving by QR, then the coefficients are mapped back.
pub fn fit_quartic(x: &[f64], y: &[f64]) -> Result<QuarticFit> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(StatsError::RankDeficient(distinct.len()));
    }
    let center = 0.5 * (distinct[0] + distinct[distinct.len() - 1]);
    let scale = 0.5 * (distinct[distinct.len() - 1] - distinct[0]);
    let t: Vec<f64> = x.iter().map(|v| (v - center) / scale).collect();
    let design = DMatrix::from_fn(x.len(), 5, |r, c| t[r].powi(c as i32));
    let qr = design.qr();
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let a = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or(StatsError::RankDeficient(distinct.len()))?;

    // sum_k a_k ((x - c)/s)^k expanded in powers of x
    let mut ascending = [0.0; 5];
    for k in 0..5 {
        let ak = a[k] / scale.powi(k as i32);
        for (j, slot) in ascending.iter_mut().enumerate().take(k + 1) {
            *slot += ak * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }
    let mut coeffs = ascending;
    coeffs.reverse();
    let poly = Polynomial(coeffs);
    let fitted: Vec<f64> = x.iter().map(|&v| poly.eval(v)).collect();
    let residual_ss = fitted.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
    Ok(QuarticFit {
        poly,
        pearson_before: pearson(x, y),
        spearman_before: spearman(x, y),
        pearson_after: pearson(&fitted, y),
        spearman_after: spearman(&fitted, y),
        residual_ss,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties share their average rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&ranks(x), &ranks(y))
}
