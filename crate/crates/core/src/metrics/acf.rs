//! Generalized autocorrelations `ρ(g₁(X_t), g₂(X_{t+τ}))` and the
//! volatility-clustering / leverage scores built on them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::stats::pearson;

/// Pointwise transform applied before correlating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Abs,
    Square,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Abs => x.abs(),
            Transform::Square => x * x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcfSpec {
    pub g1: Transform,
    pub g2: Transform,
    pub max_lag: usize,
}

impl AcfSpec {
    pub const LINEAR: AcfSpec = AcfSpec { g1: Transform::Identity, g2: Transform::Identity, max_lag: 63 };
    pub const VOLATILITY: AcfSpec = AcfSpec { g1: Transform::Square, g2: Transform::Square, max_lag: 63 };
    pub const LEVERAGE: AcfSpec = AcfSpec { g1: Transform::Identity, g2: Transform::Square, max_lag: 63 };
}

/// Pearson correlation of `g1(x_t)` and `g2(x_{t+lag})` over the `n − lag`
/// aligned pairs. Returns NaN when either side has zero variance or fewer
/// than two pairs remain.
pub fn acf(series: &[f64], g1: Transform, g2: Transform, lag: usize) -> f64 {
    if lag >= series.len() || series.len() - lag < 2 {
        return f64::NAN;
    }
    let m = series.len() - lag;
    let a: Vec<f64> = series[..m].iter().map(|&x| g1.apply(x)).collect();
    let b: Vec<f64> = series[lag..].iter().map(|&x| g2.apply(x)).collect();
    pearson(&a, &b).unwrap_or(f64::NAN)
}

/// `ρ(τ)` for `τ = 1..=spec.max_lag`.
pub fn acf_curve(series: &[f64], spec: &AcfSpec) -> Vec<f64> {
    (1..=spec.max_lag).map(|lag| acf(series, spec.g1, spec.g2, lag)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    /// `(g₁, g₂) = (x², x²)`.
    VolatilityClustering,
    /// `(g₁, g₂) = (x, x²)`.
    Leverage,
}

impl ScoreKind {
    pub fn transforms(self) -> (Transform, Transform) {
        match self {
            ScoreKind::VolatilityClustering => (Transform::Square, Transform::Square),
            ScoreKind::Leverage => (Transform::Identity, Transform::Square),
        }
    }
}

/// Lags over which the mean autocorrelation fixes the sign of a score.
pub const SIGN_WINDOW: usize = 10;

/// `± Σ_{τ=1}^{max_lag} ρ(τ)²`, signed by the mean of `ρ(τ)` over
/// `τ = 1..=min(10, max_lag)` (non-negative mean gives a positive score).
/// NaN when the series is too short or any lag is degenerate.
pub fn clustering_score(series: &[f64], kind: ScoreKind, max_lag: usize) -> f64 {
    clustering_score_with_window(series, kind, max_lag, SIGN_WINDOW)
}

pub fn clustering_score_with_window(series: &[f64], kind: ScoreKind, max_lag: usize, sign_window: usize) -> f64 {
    if max_lag == 0 || series.len() <= max_lag + 1 {
        return f64::NAN;
    }
    let (g1, g2) = kind.transforms();
    let curve = acf_curve(series, &AcfSpec { g1, g2, max_lag });
    score_from_curve(&curve, sign_window)
}

/// Signed sum of squares of an autocorrelation curve starting at lag 1.
pub fn score_from_curve(curve: &[f64], sign_window: usize) -> f64 {
    if curve.iter().any(|r| r.is_nan()) {
        return f64::NAN;
    }
    let total: f64 = curve.iter().map(|r| r * r).sum();
    let w = sign_window.clamp(1, curve.len());
    let slope_mean = curve[..w].iter().sum::<f64>() / w as f64;
    if slope_mean < 0.0 {
        -total
    } else {
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternating_series_has_lag_one_minus_one() {
        let s: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert!((acf(&s, Transform::Identity, Transform::Identity, 1) + 1.0).abs() < 1e-12);
        assert!((acf(&s, Transform::Identity, Transform::Identity, 2) - 1.0).abs() < 1e-12);
        // Squares are constant: degenerate.
        assert!(acf(&s, Transform::Square, Transform::Square, 1).is_nan());
    }

    #[test]
    fn short_series_score_is_degenerate() {
        let s = [0.1, -0.2, 0.3];
        assert!(clustering_score(&s, ScoreKind::VolatilityClustering, 63).is_nan());
    }

    #[test]
    fn score_sign_follows_short_lag_mean() {
        let curve = [-0.2, -0.1, 0.05];
        assert!((score_from_curve(&curve, 10) + (0.04 + 0.01 + 0.0025)).abs() < 1e-15);
        let curve = [0.2, -0.1, 0.05];
        assert!(score_from_curve(&curve, 10) > 0.0);
    }
}
