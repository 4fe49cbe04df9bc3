//! Stylized-fact metrics, risk measures and distances between samples.

pub mod acf;
pub mod correlation;
pub mod curves;
pub mod portfolio;
pub mod tail;
pub mod wasserstein;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use acf::{acf, clustering_score, AcfSpec, ScoreKind, Transform};
pub use correlation::{corr_distance, ledoit_wolf, one_factor_corr, rolling_mean_corr};
pub use portfolio::portfolio_stats;
pub use tail::{hill_xi, var_es};
pub use wasserstein::wasserstein1;

/// Named scalar metrics plus optional vectors (per-lag curves, per-quantile
/// values). Non-finite scalars are never stored as values: they are listed
/// in `degenerate` instead.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub values: BTreeMap<String, f64>,
    pub degenerate: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl MetricReport {
    pub fn insert(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.values.insert(name.into(), value);
        } else {
            self.values.remove(name);
            if !self.degenerate.iter().any(|d| d == name) {
                self.degenerate.push(name.into());
            }
        }
    }

    pub fn insert_opt(&mut self, name: &str, value: Option<f64>) {
        self.insert(name, value.unwrap_or(f64::NAN));
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn is_degenerate(&self, name: &str) -> bool {
        self.degenerate.iter().any(|d| d == name)
    }
}
