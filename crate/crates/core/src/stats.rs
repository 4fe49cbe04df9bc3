//! Elementary sample statistics.
//!
//! Moments use the population convention (divisor n) throughout, which is the
//! convention of the correlation matrix `(1/n) XᵀX` the factor split relies on.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance (divisor n), two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Population skewness `m3 / m2^1.5`.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let (m2, m3) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d = x - m;
        (a + d * d, b + d * d * d)
    });
    (m3 / n) / (m2 / n).powf(1.5)
}

/// Population excess kurtosis `m4 / m2² - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d2 = (x - m) * (x - m);
        (a + d2, b + d2 * d2)
    });
    (m4 / n) / ((m2 / n) * (m2 / n)) - 3.0
}

/// Pearson correlation of two equal-length slices; `None` when either side
/// has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if negligible_spread(sxx, xs) || negligible_spread(syy, ys) {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// True when a centered sum of squares `ss` over `xs` is zero up to the
/// round-off left by subtracting the mean (constant series).
pub fn negligible_spread(ss: f64, xs: &[f64]) -> bool {
    let scale = xs.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let rms = (ss / xs.len().max(1) as f64).sqrt();
    !(rms > 1e-13 * scale)
}

/// Nearest-rank percentile: the `ceil(q·N)`-th smallest value (1-based),
/// with `q = 0` mapping to the minimum.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "nearest_rank of an empty sample");
    let n = sorted.len();
    let rank = ceil_count(q * n as f64).clamp(1, n);
    sorted[rank - 1]
}

/// Sorts a copy ascending (NaNs are dropped).
pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Median with the nearest-rank convention.
pub fn median(xs: &[f64]) -> f64 {
    let s = sorted(xs);
    if s.is_empty() {
        return f64::NAN;
    }
    nearest_rank(&s, 0.5)
}

/// `ceil(x)` as a count, ignoring round-off just above an integer
/// (e.g. `0.95 * 20 = 19.000000000000004`).
pub fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// Annualized Sharpe ratio with zero risk-free rate; `None` on zero volatility.
pub fn sharpe_ratio(returns: &[f64], periods_per_year: usize) -> Option<f64> {
    if returns.len() < 2 {
        return None;
    }
    let sd = std_dev(returns);
    if negligible_spread(sd * sd * returns.len() as f64, returns) {
        return None;
    }
    Some(mean(returns) / sd * (periods_per_year as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_samples() {
        let xs = [1.0, 3.0];
        assert_eq!(mean(&xs), 2.0);
        assert_eq!(variance(&xs), 1.0);
        assert!(skewness(&[1.0, 2.0, 3.0]).abs() < 1e-15);
        // Two-point symmetric law: kurtosis 1, excess -2.
        assert!((excess_kurtosis(&[-1.0, 1.0, -1.0, 1.0]) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_degenerate_and_perfect() {
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(pearson(&[0.1, 0.1, 0.1], &[1.0, 2.0, 0.0]), None);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn nearest_rank_convention() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(nearest_rank(&s, 0.0), 1.0);
        assert_eq!(nearest_rank(&s, 0.5), 3.0);
        assert_eq!(nearest_rank(&s, 0.025), 1.0);
        assert_eq!(nearest_rank(&s, 0.975), 5.0);
        assert_eq!(nearest_rank(&s, 0.4), 2.0);
        assert_eq!(ceil_count(0.95 * 20.0), 19);
        assert_eq!(ceil_count(0.2 * 5.0), 1);
    }

    #[test]
    fn sharpe_of_constant_is_degenerate() {
        assert_eq!(sharpe_ratio(&[0.01; 10], 252), None);
        let s = sharpe_ratio(&[0.01, -0.01, 0.02, 0.0], 252).unwrap();
        assert!((s - 0.005 / variance(&[0.01, -0.01, 0.02, 0.0]).sqrt() * 252f64.sqrt()).abs() < 1e-12);
    }
}
