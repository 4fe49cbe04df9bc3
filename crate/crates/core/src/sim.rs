//! Seeded return simulators: a factor model with GJR-GARCH volatility and
//! Student-t shocks (the desk dataset), and a panel with planted
//! short-horizon mean reversion.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::date::Date;
use crate::error::{invalid, Result};
use crate::panel::ReturnsPanel;
use crate::rng;
#[allow(unused_imports)]
use num_traits::Float;

/// GJR-GARCH(1,1) with unit unconditional variance and Student-t shocks
/// rescaled to unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Garch {
    pub alpha: f64,
    /// Extra weight on negative shocks.
    pub gamma: f64,
    pub beta: f64,
    pub nu: f64,
}

impl Default for Garch {
    fn default() -> Self {
        Self { alpha: 0.04, gamma: 0.08, beta: 0.89, nu: 5.0 }
    }
}

impl Garch {
    fn validate(&self) -> Result<()> {
        let persistence = self.alpha + self.gamma / 2.0 + self.beta;
        if self.alpha < 0.0 || self.gamma < 0.0 || self.beta < 0.0 || persistence >= 1.0 || !(self.nu > 2.0) {
            return Err(invalid("GARCH parameters must be non-negative, stationary, with nu > 2"));
        }
        Ok(())
    }

    /// Unit-variance path of length `n` after a burn-in.
    pub fn path<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let omega = 1.0 - self.alpha - self.gamma / 2.0 - self.beta;
        let t = StudentT::new(self.nu).expect("validated nu");
        let unit = ((self.nu - 2.0) / self.nu).sqrt();
        let burn = 250;
        let mut var = 1.0;
        let mut out = Vec::with_capacity(n);
        for i in 0..burn + n {
            let e = var.sqrt() * unit * t.sample(rng);
            if i >= burn {
                out.push(e);
            }
            let neg = if e < 0.0 { self.gamma } else { 0.0 };
            var = omega + (self.alpha + neg) * e * e + self.beta * var;
        }
        out
    }
}

/// Factor model for the desk dataset: a market factor loading on every
/// asset, then `sectors − 1` further factors each loading on one block of
/// assets, idiosyncratic GARCH noise, daily vol about 1.5 %.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskSim {
    pub n: usize,
    pub d: usize,
    pub sectors: usize,
    pub market_loading: f64,
    pub sector_loading: f64,
    pub daily_vol: f64,
    pub drift: f64,
    pub garch: Garch,
    pub start: Date,
    pub seed: u64,
}

impl Default for DeskSim {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 20,
            sectors: 3,
            market_loading: 1.0,
            sector_loading: 0.9,
            daily_vol: 0.015,
            drift: 2e-4,
            garch: Garch::default(),
            start: Date::new(2010, 1, 4).expect("valid date"),
            seed: 20_100_104,
        }
    }
}

impl DeskSim {
    pub fn simulate(&self) -> Result<ReturnsPanel> {
        self.garch.validate()?;
        if self.sectors == 0 || self.sectors > self.d || self.n < 2 {
            return Err(invalid(format!(
                "bad simulator shape n = {}, d = {}, sectors = {}",
                self.n, self.d, self.sectors
            )));
        }
        let mut r = rng::stream(self.seed, 0);
        let factors: Vec<Vec<f64>> = (0..self.sectors).map(|_| self.garch.path(self.n, &mut r)).collect();
        let idio: Vec<Vec<f64>> = (0..self.d).map(|_| self.garch.path(self.n, &mut r)).collect();
        let mut load = DMatrix::zeros(self.d, self.sectors);
        for j in 0..self.d {
            load[(j, 0)] = self.market_loading * (0.7 + 0.6 * r.random::<f64>());
            // Sector factors split the assets into contiguous blocks.
            if self.sectors > 1 {
                let block = 1 + j * (self.sectors - 1) / self.d;
                load[(j, block)] = self.sector_loading * (0.7 + 0.6 * r.random::<f64>());
            }
        }
        let mut x = DMatrix::zeros(self.n, self.d);
        for j in 0..self.d {
            let common: f64 = load.row(j).iter().map(|b| b * b).sum();
            let scale = self.daily_vol / (common + 1.0).sqrt();
            for i in 0..self.n {
                let f: f64 = (0..self.sectors).map(|k| load[(j, k)] * factors[k][i]).sum();
                x[(i, j)] = self.drift + scale * (f + idio[j][i]);
            }
        }
        ReturnsPanel::with_synthetic_labels(x, self.start)
    }
}

/// Returns whose idiosyncratic part gives back `phi` of each shock over the
/// following `horizon` days: `uₜ = εₜ − (phi/horizon) Σ_{l=1..horizon} εₜ₋ₗ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedReversion {
    pub n: usize,
    pub d: usize,
    pub phi: f64,
    pub horizon: usize,
    pub market_weight: f64,
    pub daily_vol: f64,
    pub seed: u64,
}

impl Default for PlantedReversion {
    fn default() -> Self {
        Self { n: 1500, d: 25, phi: 0.5, horizon: 5, market_weight: 0.5, daily_vol: 0.01, seed: 0 }
    }
}

impl PlantedReversion {
    pub fn simulate(&self) -> Result<ReturnsPanel> {
        if self.horizon == 0 || self.n < 2 || self.d == 0 {
            return Err(invalid("planted reversion needs horizon >= 1, n >= 2, d >= 1"));
        }
        let mut r = rng::stream(self.seed, 0);
        let total = self.n + self.horizon;
        let mut eps = vec![vec![0.0; total]; self.d];
        for col in eps.iter_mut() {
            for e in col.iter_mut() {
                *e = StandardNormal.sample(&mut r);
            }
        }
        let market: Vec<f64> = (0..self.n).map(|_| StandardNormal.sample(&mut r)).collect();
        let w = self.phi / self.horizon as f64;
        let x = DMatrix::from_fn(self.n, self.d, |i, j| {
            let t = i + self.horizon;
            let back: f64 = (1..=self.horizon).map(|l| eps[j][t - l]).sum();
            self.daily_vol * (self.market_weight * market[i] + eps[j][t] - w * back)
        });
        ReturnsPanel::with_synthetic_labels(x, Date::new(2000, 1, 3).expect("valid date"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    #[test]
    fn garch_path_has_unit_variance() {
        let mut r = rng::stream(3, 0);
        let p = Garch::default().path(100_000, &mut r);
        assert!((stats::variance(&p) - 1.0).abs() < 0.1);
    }

    #[test]
    fn desk_panel_is_deterministic() {
        let sim = DeskSim { n: 300, ..DeskSim::default() };
        let a = sim.simulate().unwrap();
        assert_eq!(a, sim.simulate().unwrap());
        assert_eq!(a.d(), 20);
        assert_eq!(a.dates()[0], Date::new(2010, 1, 4).unwrap());
    }
}
