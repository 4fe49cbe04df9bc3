//! Summary statistics of a single return series (typically the equally
//! weighted portfolio).

use alloc::format;
use alloc::vec::Vec;

use super::acf::{clustering_score, ScoreKind};
use super::tail::var_es;
use super::MetricReport;
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

/// Business days per week and per month for aggregated risk measures.
pub const WEEK: usize = 5;
pub const MONTH: usize = 21;

/// Compounded returns of consecutive non-overlapping blocks of `len` days;
/// an incomplete trailing block is dropped.
pub fn aggregate(returns: &[f64], len: usize) -> Vec<f64> {
    returns.chunks_exact(len).map(|c| c.iter().fold(1.0, |w, r| w * (1.0 + r)) - 1.0).collect()
}

/// Largest peak-to-trough loss of the compounded wealth path starting at 1,
/// as a positive fraction of the running peak.
pub fn max_drawdown(returns: &[f64]) -> f64 {
    let mut wealth = 1.0;
    let mut peak = 1.0f64;
    let mut worst = 0.0f64;
    for r in returns {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        worst = worst.max((peak - wealth) / peak);
    }
    worst
}

/// Annualized return and volatility, Sharpe ratio (zero risk-free rate),
/// skewness, excess kurtosis, maximum drawdown, VaR/ES at 95% and 99% on
/// daily, weekly and monthly horizons, and the clustering/leverage scores.
///
/// Keys: `ann_return`, `ann_volatility`, `sharpe`, `skewness`,
/// `excess_kurtosis`, `max_drawdown`, `var95_daily` ... `es99_monthly`,
/// `vol_clustering_score`, `leverage_score`.
pub fn portfolio_stats(returns: &[f64], periods_per_year: usize) -> MetricReport {
    let mut rep = MetricReport::default();
    let ppy = periods_per_year as f64;
    let mean = stats::mean(returns);
    let sd = stats::std_dev(returns);
    rep.insert("ann_return", mean * ppy);
    rep.insert("ann_volatility", sd * ppy.sqrt());
    rep.insert_opt("sharpe", stats::sharpe_ratio(returns, periods_per_year));
    let flat = returns.len() < 2 || stats::negligible_spread(sd * sd * returns.len() as f64, returns);
    rep.insert("skewness", if flat { f64::NAN } else { stats::skewness(returns) });
    rep.insert("excess_kurtosis", if flat { f64::NAN } else { stats::excess_kurtosis(returns) });
    rep.insert("max_drawdown", max_drawdown(returns));
    for (label, len) in [("daily", 1), ("weekly", WEEK), ("monthly", MONTH)] {
        let agg = if len == 1 { returns.to_vec() } else { aggregate(returns, len) };
        for (tag, alpha) in [("95", 0.95), ("99", 0.99)] {
            let (v, e) = var_es(&agg, alpha).unwrap_or((f64::NAN, f64::NAN));
            rep.insert(&format!("var{tag}_{label}"), v);
            rep.insert(&format!("es{tag}_{label}"), e);
        }
    }
    rep.insert("vol_clustering_score", clustering_score(returns, ScoreKind::VolatilityClustering, 63));
    rep.insert("leverage_score", clustering_score(returns, ScoreKind::Leverage, 63));
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drawdown_hand_path() {
        // Wealth 1 → 1.2 → 0.9 → 1.0.
        let r = [0.2, -0.25, 1.0 / 9.0];
        assert!((max_drawdown(&r) - 0.25).abs() < 1e-15);
        assert_eq!(max_drawdown(&[0.01, 0.02]), 0.0);
    }

    #[test]
    fn constant_returns() {
        let rep = portfolio_stats(&[0.001; 300], 252);
        assert!((rep.get("ann_return").unwrap() - 0.252).abs() < 1e-12);
        assert!(rep.get("ann_volatility").unwrap() < 1e-12);
        assert!(rep.is_degenerate("sharpe"));
        assert!(rep.is_degenerate("vol_clustering_score"));
    }

    #[test]
    fn aggregation_compounds_full_blocks() {
        let agg = aggregate(&[0.1, 0.1, -0.5, 0.0, 0.0], 2);
        assert_eq!(agg.len(), 2);
        assert!((agg[0] - 0.21).abs() < 1e-15);
        assert!((agg[1] + 0.5).abs() < 1e-15);
    }
}
