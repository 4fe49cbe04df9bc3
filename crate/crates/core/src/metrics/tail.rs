//! Left-tail measures: Hill estimator, empirical VaR and expected shortfall.
//!
//! VaR follows the order-statistic infimum definition on the empirical law,
//! without interpolation.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::stats::ceil_count;
#[allow(unused_imports)]
use num_traits::Float;

/// `ξ̂(k) = (1/k) Σ_{i≤k} log(−r₍ᵢ₎) − log(−r₍ₖ₎)` with returns sorted
/// ascending. Needs at least `k + 1` strictly negative returns.
pub fn hill_xi(returns: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("hill_xi needs k >= 1"));
    }
    let mut neg: Vec<f64> = returns.iter().copied().filter(|r| *r < 0.0).collect();
    if neg.len() < k + 1 {
        return Err(Error::InsufficientData { required: k + 1, actual: neg.len() });
    }
    neg.sort_by(|a, b| a.total_cmp(b));
    let mean_log = neg[..k].iter().map(|r| (-r).ln()).sum::<f64>() / k as f64;
    Ok(mean_log - (-neg[k - 1]).ln())
}

/// Tail index `γ̂ = 1/ξ̂`; `None` when `ξ̂ = 0` (all selected losses equal).
pub fn hill_gamma(returns: &[f64], k: usize) -> Result<Option<f64>> {
    let xi = hill_xi(returns, k)?;
    Ok(if xi > 0.0 { Some(1.0 / xi) } else { None })
}

/// Smallest sample admissible for level `alpha`: `⌈1/(1−α)⌉`.
pub fn min_sample_for_level(alpha: f64) -> usize {
    ceil_count(1.0 / (1.0 - alpha))
}

/// `(VaR_α, ES_α)` as positive loss magnitudes. VaR is the `⌈αn⌉`-th
/// smallest loss, ES the mean of the `⌈(1−α)n⌉` largest losses.
pub fn var_es(returns: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("var_es level must lie in (0,1)"));
    }
    let n = returns.len();
    let need = min_sample_for_level(alpha);
    if n < need {
        return Err(Error::InsufficientData { required: need, actual: n });
    }
    let mut losses: Vec<f64> = returns.iter().map(|r| -r).collect();
    losses.sort_by(|a, b| a.total_cmp(b));
    let var_rank = ceil_count(alpha * n as f64).clamp(1, n);
    let tail = ceil_count((1.0 - alpha) * n as f64).clamp(1, n);
    let var = losses[var_rank - 1];
    let es = losses[n - tail..].iter().sum::<f64>() / tail as f64;
    Ok((var, es))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hill_hand_example() {
        let e = core::f64::consts::E;
        let r = vec![-e.powi(3), -e.powi(2), -e, 0.5, 1.0];
        let xi = hill_xi(&r, 2).unwrap();
        assert!((xi - 0.5).abs() < 1e-12);
        assert!((hill_gamma(&r, 2).unwrap().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hill_degenerate_and_insufficient() {
        let r = vec![-0.02, -0.02, -0.02, 0.01];
        assert_eq!(hill_xi(&r, 2).unwrap(), 0.0);
        assert_eq!(hill_gamma(&r, 2).unwrap(), None);
        assert!(hill_xi(&r, 3).is_err());
    }

    #[test]
    fn var_es_hand_example() {
        let r = [-0.10, -0.05, 0.0, 0.05, 0.10];
        let (v, e) = var_es(&r, 0.8).unwrap();
        assert_eq!(v, 0.05);
        assert_eq!(e, 0.10);
        let (v, e) = var_es(&[-0.03; 100], 0.99).unwrap();
        assert_eq!((v, e), (0.03, 0.03));
        assert!(var_es(&r, 0.9).is_err());
    }
}
