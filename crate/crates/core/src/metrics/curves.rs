//! Cross-sectional autocorrelation curves: the median curve across assets,
//! least-squares decay fits and an i.i.d. Student-t(3) null band.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use super::acf::{acf_curve, AcfSpec};
use crate::error::{invalid, Result};
use crate::rng;
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

/// Per-lag median (nearest-rank) of the autocorrelation curves of every
/// column; degenerate columns are skipped lag by lag.
pub fn median_acf(x: &DMatrix<f64>, spec: &AcfSpec) -> Vec<f64> {
    let curves: Vec<Vec<f64>> = x
        .column_iter()
        .map(|c| {
            let s: Vec<f64> = c.iter().copied().collect();
            acf_curve(&s, spec)
        })
        .collect();
    (0..spec.max_lag)
        .map(|l| {
            let vals: Vec<f64> = curves.iter().map(|c| c[l]).collect();
            stats::median(&vals)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayLaw {
    /// `a·e^{−γτ}`.
    Exponential,
    /// `a·τ^{−γ}`.
    PowerLaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub law: DecayLaw,
    pub a: f64,
    pub gamma: f64,
    /// Residual sum of squares.
    pub rss: f64,
}

fn basis(law: DecayLaw, lag: f64, gamma: f64) -> f64 {
    match law {
        DecayLaw::Exponential => (-gamma * lag).exp(),
        DecayLaw::PowerLaw => lag.powf(-gamma),
    }
}

/// Least-squares fit of `curve[τ−1] ≈ a·f_γ(τ)` over `γ ∈ [0, 10]`. For a
/// fixed `γ` the optimal `a` is closed form, so only `γ` is searched: a
/// coarse grid followed by golden-section refinement. NaN lags are skipped.
pub fn fit_decay(curve: &[f64], law: DecayLaw) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> =
        curve.iter().enumerate().filter(|(_, y)| y.is_finite()).map(|(i, &y)| ((i + 1) as f64, y)).collect();
    if pts.len() < 2 {
        return Err(invalid("decay fit needs at least two finite lags"));
    }
    let eval = |gamma: f64| -> (f64, f64) {
        let (mut sff, mut syf, mut syy) = (0.0, 0.0, 0.0);
        for &(t, y) in &pts {
            let f = basis(law, t, gamma);
            sff += f * f;
            syf += y * f;
            syy += y * y;
        }
        let a = syf / sff;
        ((syy - a * syf).max(0.0), a)
    };
    const HI: f64 = 10.0;
    const GRID: usize = 1000;
    let mut best = (f64::INFINITY, 0usize);
    for i in 0..=GRID {
        let g = HI * i as f64 / GRID as f64;
        let (rss, _) = eval(g);
        if rss < best.0 {
            best = (rss, i);
        }
    }
    let step = HI / GRID as f64;
    let mut lo = (best.1 as f64 * step - step).max(0.0);
    let mut hi = (best.1 as f64 * step + step).min(HI);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if eval(m1).0 <= eval(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let (rss, a) = eval(gamma);
    Ok(DecayFit { law, a, gamma, rss })
}

/// Per-lag `[2.5%, 97.5%]` nearest-rank band of the autocorrelation of
/// i.i.d. standard Student-t(3) samples of length `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullBand {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub draws: usize,
}

pub const DEFAULT_NULL_DRAWS: usize = 1000;

pub fn student_t_null_band(n: usize, spec: &AcfSpec, draws: usize, seed: u64) -> Result<NullBand> {
    if draws == 0 || n <= spec.max_lag + 1 {
        return Err(invalid("null band needs draws >= 1 and n > max_lag + 1"));
    }
    let t3 = StudentT::new(3.0).map_err(|_| invalid("student-t"))?;
    let mut per_lag: Vec<Vec<f64>> = (0..spec.max_lag).map(|_| Vec::with_capacity(draws)).collect();
    for b in 0..draws {
        let mut r = rng::stream(rng::derive_seed(seed, b as u64), 0);
        let s: Vec<f64> = (0..n).map(|_| t3.sample(&mut r)).collect();
        for (l, v) in acf_curve(&s, spec).into_iter().enumerate() {
            if v.is_finite() {
                per_lag[l].push(v);
            }
        }
    }
    let mut lo = Vec::with_capacity(spec.max_lag);
    let mut hi = Vec::with_capacity(spec.max_lag);
    for vals in per_lag {
        let s = stats::sorted(&vals);
        lo.push(stats::nearest_rank(&s, 0.025));
        hi.push(stats::nearest_rank(&s, 0.975));
    }
    Ok(NullBand { lo, hi, draws })
}
