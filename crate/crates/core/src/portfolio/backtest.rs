//! Cross-sectional mean-reversion backtests, Sharpe profiles over the
//! look-back grid, and the moving-block bootstrap.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::panel::ReturnsPanel;
use crate::rng;
use crate::stats;

const PERIODS_PER_YEAR: usize = 252;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Legs {
    /// Equal weight on the bottom quintile.
    LongOnly,
    /// Long the bottom quintile, short the top one.
    LongShort,
}

impl Legs {
    pub const ALL: [Legs; 2] = [Legs::LongOnly, Legs::LongShort];

    pub fn name(self) -> &'static str {
        match self {
            Legs::LongOnly => "long_only",
            Legs::LongShort => "long_short",
        }
    }
}

/// Rank on the trailing `h`-day compounded return, observed `lag` days late,
/// rebalance daily at zero cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategySpec {
    pub h: usize,
    pub legs: Legs,
}

impl StrategySpec {
    pub fn new(h: usize, legs: Legs) -> Result<Self> {
        if h == 0 {
            return Err(invalid("look-back h must be at least 1"));
        }
        Ok(Self { h, legs })
    }

    /// `max(⌊h/10⌋, 1)`.
    pub fn lag(&self) -> usize {
        (self.h / 10).max(1)
    }

    /// Index of the first day a position can be formed.
    pub fn first_day(&self) -> usize {
        self.h + self.lag() - 1
    }
}

/// `h ∈ {1, 3, 5, …, 65}`.
pub fn default_h_grid() -> Vec<usize> {
    (1..=65).step_by(2).collect()
}

/// Quintile size `⌈d/5⌉`.
fn quintile(d: usize) -> usize {
    d.div_ceil(5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Backtest {
    /// `pnl[i]` is earned on day `first_day + i + 1`.
    pub pnl: Vec<f64>,
    pub first_day: usize,
    pub sharpe: Option<f64>,
}

pub fn backtest_mean_reversion(panel: &ReturnsPanel, spec: StrategySpec) -> Result<Backtest> {
    let (n, d) = (panel.n(), panel.d());
    if spec.h == 0 {
        return Err(invalid("look-back h must be at least 1"));
    }
    if d < 5 {
        return Err(invalid(format!("mean-reversion backtest needs at least 5 assets, got {d}")));
    }
    let t0 = spec.first_day();
    if n <= t0 + 2 {
        return Err(Error::InsufficientData { required: t0 + 3, actual: n });
    }
    let r = panel.values();
    let q = quintile(d);
    let w = 1.0 / q as f64;
    let mut order: Vec<usize> = (0..d).collect();
    let mut signal = vec![0.0; d];
    let mut pnl = Vec::with_capacity(n - 1 - t0);
    for t in t0..n - 1 {
        let end = t + 1 - spec.lag();
        for (j, s) in signal.iter_mut().enumerate() {
            let mut g = 1.0;
            for i in end - spec.h..end {
                g *= 1.0 + r[(i, j)];
            }
            *s = g - 1.0;
        }
        // Descending by signal, ties in ticker order.
        order.sort_by(|&a, &b| signal[b].total_cmp(&signal[a]).then(a.cmp(&b)));
        // Legs are summed in ticker order.
        let leg = |idx: &[usize]| {
            let mut sel = idx.to_vec();
            sel.sort_unstable();
            sel.iter().map(|&j| r[(t + 1, j)]).sum::<f64>()
        };
        let long = leg(&order[d - q..]);
        let p = match spec.legs {
            Legs::LongOnly => w * long,
            Legs::LongShort => w * long - w * leg(&order[..q]),
        };
        pnl.push(p);
    }
    let sharpe = stats::sharpe_ratio(&pnl, PERIODS_PER_YEAR);
    Ok(Backtest { pnl, first_day: t0, sharpe })
}

/// Sharpe ratio at every `h` of the grid for one panel.
pub fn sharpe_curve(panel: &ReturnsPanel, h_grid: &[usize], legs: Legs) -> Result<Vec<Option<f64>>> {
    h_grid.iter().map(|&h| Ok(backtest_mean_reversion(panel, StrategySpec::new(h, legs)?)?.sharpe)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeBand {
    pub h: usize,
    pub median: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub in_sample: Option<f64>,
    pub out_of_sample: Option<f64>,
}

/// Nearest-rank median and 2.5 % / 97.5 % band of the Sharpe ratio per `h`.
/// Scenarios with zero PnL volatility are left out of a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpeProfile {
    pub legs: Legs,
    pub rows: Vec<SharpeBand>,
}

impl SharpeProfile {
    /// `curves[s][i]` is the Sharpe ratio of scenario `s` at `h_grid[i]`.
    pub fn from_curves(legs: Legs, h_grid: &[usize], curves: &[Vec<Option<f64>>]) -> Result<Self> {
        if curves.is_empty() {
            return Err(invalid("sharpe profile needs at least one scenario"));
        }
        if h_grid.is_empty() || h_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("h grid must be nonempty and strictly increasing"));
        }
        let mut rows = Vec::with_capacity(h_grid.len());
        for (i, &h) in h_grid.iter().enumerate() {
            let mut vals = Vec::with_capacity(curves.len());
            for c in curves {
                if c.len() != h_grid.len() {
                    return Err(Error::DimensionMismatch { expected: h_grid.len(), actual: c.len() });
                }
                vals.extend(c[i]);
            }
            let sorted = stats::sorted(&vals);
            let pick = |q: f64| (!sorted.is_empty()).then(|| stats::nearest_rank(&sorted, q));
            rows.push(SharpeBand {
                h,
                median: pick(0.5),
                lo: pick(0.025),
                hi: pick(0.975),
                in_sample: None,
                out_of_sample: None,
            });
        }
        Ok(Self { legs, rows })
    }

    pub fn h_grid(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.h).collect()
    }

    /// Adds single-panel overlay curves (e.g. in-sample and out-of-sample).
    pub fn with_overlays(
        mut self,
        in_sample: Option<&ReturnsPanel>,
        out_of_sample: Option<&ReturnsPanel>,
    ) -> Result<Self> {
        let grid = self.h_grid();
        if let Some(p) = in_sample {
            for (row, v) in self.rows.iter_mut().zip(sharpe_curve(p, &grid, self.legs)?) {
                row.in_sample = v;
            }
        }
        if let Some(p) = out_of_sample {
            for (row, v) in self.rows.iter_mut().zip(sharpe_curve(p, &grid, self.legs)?) {
                row.out_of_sample = v;
            }
        }
        Ok(self)
    }

    /// Whether `truth[i]` lies in `[lo, hi]` at every `h`.
    pub fn covers(&self, truth: &[Option<f64>]) -> bool {
        self.rows.len() == truth.len()
            && self.rows.iter().zip(truth).all(|(r, t)| match (r.lo, r.hi, t) {
                (Some(lo), Some(hi), Some(t)) => lo <= *t && *t <= hi,
                _ => false,
            })
    }
}

pub fn sharpe_profile(scenarios: &[ReturnsPanel], h_grid: &[usize], legs: Legs) -> Result<SharpeProfile> {
    let curves = scenarios.iter().map(|p| sharpe_curve(p, h_grid, legs)).collect::<Result<Vec<_>>>()?;
    SharpeProfile::from_curves(legs, h_grid, &curves)
}

/// Moving-block bootstrap: whole rows in blocks of `block_len`, starts
/// uniform over the `n − block_len + 1` possibilities, truncated to
/// `target_len`. Dates restart from the panel's first date.
pub fn block_bootstrap(panel: &ReturnsPanel, block_len: usize, target_len: usize, seed: u64) -> Result<ReturnsPanel> {
    let (n, d) = (panel.n(), panel.d());
    if block_len == 0 || target_len == 0 {
        return Err(invalid("block length and target length must be positive"));
    }
    if block_len > n {
        return Err(Error::InsufficientData { required: block_len, actual: n });
    }
    let starts = n - block_len + 1;
    let mut r = rng::stream(seed, 0);
    let src = panel.values();
    let mut out = DMatrix::zeros(target_len, d);
    let mut row = 0;
    while row < target_len {
        let s = r.random_range(0..starts);
        for i in s..(s + block_len).min(s + target_len - row) {
            out.set_row(row, &src.row(i));
            row += 1;
        }
    }
    ReturnsPanel::new(panel.dates()[0].business_days(target_len), panel.tickers().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;

    fn panel(values: DMatrix<f64>) -> ReturnsPanel {
        ReturnsPanel::with_synthetic_labels(values, Date::new(2020, 1, 2).unwrap()).unwrap()
    }

    #[test]
    fn lag_rule() {
        let lags: Vec<usize> =
            [1, 9, 10, 19, 20, 65].iter().map(|&h| StrategySpec::new(h, Legs::LongShort).unwrap().lag()).collect();
        assert_eq!(lags, vec![1, 1, 1, 1, 2, 6]);
        assert!(StrategySpec::new(0, Legs::LongOnly).is_err());
        assert_eq!(default_h_grid().len(), 33);
    }

    #[test]
    fn identical_columns_give_flat_long_short() {
        let col: Vec<f64> = (0..40).map(|i| ((i * 13 % 7) as f64 - 3.0) * 0.01).collect();
        let p = panel(DMatrix::from_fn(40, 6, |i, _| col[i]));
        let bt = backtest_mean_reversion(&p, StrategySpec::new(3, Legs::LongShort).unwrap()).unwrap();
        assert!(bt.pnl.iter().all(|x| *x == 0.0));
        assert_eq!(bt.sharpe, None);
    }

    #[test]
    fn single_scenario_collapses_band() {
        let p = panel(DMatrix::from_fn(80, 5, |i, j| (((i * 31 + j * 17) % 11) as f64 - 5.0) * 0.003));
        let prof = sharpe_profile(&[p], &[1, 3], Legs::LongShort).unwrap();
        for r in prof.rows {
            assert_eq!(r.lo, r.median);
            assert_eq!(r.hi, r.median);
        }
    }

    #[test]
    fn bootstrap_with_full_block_copies_prefix() {
        let p = panel(DMatrix::from_fn(30, 3, |i, j| (i * 3 + j) as f64));
        let b = block_bootstrap(&p, 30, 20, 1).unwrap();
        assert_eq!(b.values(), &p.values().rows(0, 20).into_owned());
        assert!(block_bootstrap(&p, 31, 20, 1).is_err());
    }
}
