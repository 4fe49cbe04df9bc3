//! JSON pipeline configuration.
//!
//! Relative paths are resolved against the directory holding the config
//! file. A command manifest can be passed in place of a config: its embedded
//! effective config is used, which reproduces the run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use synthmarket_core::bias::{Kernel, Law};
use synthmarket_core::clusters::Scaling;
use synthmarket_core::gan::{TcnSpec, TrainConfig};
use synthmarket_core::generator::{FitConfig, GeneratorKind};
use synthmarket_core::mixture::FitMode;
use synthmarket_core::portfolio::default_h_grid;
use synthmarket_core::rng::derive_seed;
use synthmarket_core::spectral::FactorCount;
use synthmarket_core::{Date, ReturnsPanel, PERIODS_PER_YEAR};

use crate::error::{CliError, Result, StageExt};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Desk,
    Full,
}

/// Factor generator family. `gaussian` replaces each cluster GAN with an
/// i.i.d. normal law, which is identifiable and cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum GeneratorConfig {
    Tcn {
        #[serde(default)]
        profile: Profile,
        /// Overrides the profile's channel width.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hidden: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        iterations: Option<usize>,
        /// Replaces the profile's training settings entirely.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train: Option<TrainConfig>,
    },
    Gaussian,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Tcn { profile: Profile::Desk, hidden: None, iterations: None, train: None }
    }
}

impl GeneratorConfig {
    pub fn kind(&self) -> GeneratorKind {
        match self {
            GeneratorConfig::Tcn { profile, hidden, iterations, train } => {
                let (mut spec, mut tc) = match profile {
                    Profile::Desk => (TcnSpec::desk(), TrainConfig::desk()),
                    Profile::Full => (TcnSpec::full(), TrainConfig::full()),
                };
                if let Some(h) = hidden {
                    spec.hidden = *h;
                }
                if let Some(t) = train {
                    tc = t.clone();
                }
                if let Some(it) = iterations {
                    tc.iterations = *it;
                }
                GeneratorKind::Tcn { spec, train: tc }
            }
            GeneratorConfig::Gaussian => GeneratorKind::Gaussian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub count: usize,
    /// Rows per scenario; the training length when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    /// Warn once `count · length` exceeds this multiple of the training rows.
    pub guardrail_multiple: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self { count: 100, length: None, guardrail_multiple: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    pub h_grid: Vec<usize>,
    pub block_len: usize,
    pub bootstrap_count: usize,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { h_grid: default_h_grid(), block_len: 63, bootstrap_count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub rolling_window: usize,
    pub score_max_lag: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { rolling_window: PERIODS_PER_YEAR, score_max_lag: 63 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegurgitateConfig {
    /// Rows of each truth scenario; 120 years of business days by default.
    pub truth_len: usize,
    pub truth_count: usize,
    pub bootstrap_count: usize,
    pub scenario_count: usize,
}

impl Default for RegurgitateConfig {
    fn default() -> Self {
        Self { truth_len: 120 * PERIODS_PER_YEAR, truth_count: 1, bootstrap_count: 100, scenario_count: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasLabConfig {
    pub kernel: Kernel,
    pub truth: Law,
    pub learned: Law,
    pub b: f64,
    pub n_tilde: Vec<usize>,
    pub trials: usize,
    /// Envelope shape parameters.
    pub beta: f64,
    pub c_hat: f64,
}

impl Default for BiasLabConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Mean,
            truth: Law::Normal { mean: 0.0, sd: 1.0 },
            learned: Law::Normal { mean: 0.1, sd: 1.0 },
            b: 0.05,
            n_tilde: vec![100, 300, 1_000, 3_000, 10_000],
            trials: 10_000,
            beta: 3.0,
            c_hat: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: PathBuf,
    /// Last in-sample date; later rows are the out-of-sample set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Date>,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_clusters")]
    pub n_clusters: usize,
    #[serde(default)]
    pub factor_count: FactorCount,
    #[serde(default)]
    pub scaling: Scaling,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_residual_mode")]
    pub residual_mode: FitMode,
    #[serde(default)]
    pub scenarios: ScenarioConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    #[serde(default)]
    pub backtest: BacktestConfig,
    #[serde(default)]
    pub regurgitate: RegurgitateConfig,
    #[serde(default)]
    pub biaslab: BiasLabConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_window() -> usize {
    63
}

fn default_clusters() -> usize {
    2
}

fn default_residual_mode() -> FitMode {
    FitMode::TwoT
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Per-command seeds, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub fit: u64,
    pub generate: u64,
    pub evaluate: u64,
    pub bootstrap: u64,
    pub regurgitate: u64,
    pub biaslab: u64,
}

impl PipelineConfig {
    /// Reads a config, or the config embedded in a command manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let raw: serde_json::Value = io::read_json(path)?;
        let embedded = raw.get("command").is_some() && raw.get("config").is_some();
        let body = if embedded { raw["config"].clone() } else { raw };
        let mut cfg: PipelineConfig = serde_json::from_value(body).map_err(|e| CliError::parse(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data = resolve(base, &cfg.data);
        cfg.output = resolve(base, &cfg.output);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk defaults for a data file.
    pub fn desk(data: impl Into<PathBuf>) -> Self {
        serde_json::from_value(serde_json::json!({ "data": data.into() })).expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if self.window < 2 {
            return bad("window must be at least 2");
        }
        if self.n_clusters == 0 {
            return bad("n_clusters must be at least 1");
        }
        if self.scenarios.count == 0 || self.scenarios.length == Some(0) {
            return bad("scenario count and length must be positive");
        }
        if !(self.scenarios.guardrail_multiple > 0.0) {
            return bad("guardrail_multiple must be positive");
        }
        let g = &self.backtest.h_grid;
        if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
            return bad("h_grid must be nonempty, positive and strictly increasing");
        }
        if self.backtest.block_len == 0 || self.backtest.bootstrap_count == 0 {
            return bad("block_len and bootstrap_count must be positive");
        }
        let r = &self.regurgitate;
        if r.truth_len == 0 || r.truth_count == 0 || r.bootstrap_count == 0 || r.scenario_count == 0 {
            return bad("regurgitate sizes must be positive");
        }
        if self.evaluate.rolling_window < 2 {
            return bad("rolling_window must be at least 2");
        }
        if self.biaslab.n_tilde.is_empty() {
            return bad("biaslab n_tilde grid is empty");
        }
        if let GeneratorKind::Tcn { spec, train } = self.generator.kind() {
            spec.validate().stage("config")?;
            train.validate().stage("config")?;
            if spec.window_len() != self.window {
                return Err(CliError::Config(format!(
                    "window {} differs from the discriminator window {} of the generator",
                    self.window,
                    spec.window_len()
                )));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }

    pub fn seeds(&self) -> StageSeeds {
        let d = |i| derive_seed(self.seed, i);
        StageSeeds {
            master: self.seed,
            fit: d(0),
            generate: d(1),
            evaluate: d(2),
            bootstrap: d(3),
            regurgitate: d(4),
            biaslab: d(5),
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            factor_count: self.factor_count,
            n_clusters: self.n_clusters,
            scaling: self.scaling,
            window: self.window,
            generator: self.generator.kind(),
            residual_mode: self.residual_mode,
            seed: self.seeds().fit,
        }
    }

    /// SHA-256 of the canonical JSON of the effective config.
    pub fn hash(&self) -> String {
        io::sha256_hex(&serde_json::to_vec(self).expect("serializable config"))
    }

    /// The full data panel, then its in-sample and optional out-of-sample parts.
    pub fn load_panels(&self) -> Result<(ReturnsPanel, Option<ReturnsPanel>)> {
        if !self.data.is_file() {
            return Err(CliError::Config(format!("data file not found: {}", self.data.display())));
        }
        let panel = io::read_panel(&self.data)?;
        match self.split {
            None => Ok((panel, None)),
            Some(b) => {
                let (a, c) = panel.split(b).map_err(|e| CliError::parse(&self.data, e))?;
                Ok((a, Some(c)))
            }
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_desk_profile() {
        let c = PipelineConfig::desk("x.csv");
        assert_eq!(c.window, 63);
        assert_eq!(c.backtest.h_grid.len(), 33);
        assert_eq!(c.regurgitate.truth_len, 30_240);
        assert!(matches!(c.fit_config().generator, GeneratorKind::Tcn { .. }));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_and_bad_windows_are_rejected() {
        let r: std::result::Result<PipelineConfig, _> = serde_json::from_str(r#"{"data":"a","windw":63}"#);
        assert!(r.is_err());
        let c: PipelineConfig = serde_json::from_str(r#"{"data":"a","window":40}"#).unwrap();
        assert!(c.validate().is_err());
        let c: PipelineConfig =
            serde_json::from_str(r#"{"data":"a","window":40,"generator":{"kind":"gaussian"}}"#).unwrap();
        c.validate().unwrap();
    }

    #[test]
    fn seed_override_changes_every_stage_seed() {
        let a = PipelineConfig::desk("x.csv");
        let b = a.clone().with_seed(Some(7));
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.seeds().fit, b.seeds().fit);
        assert_ne!(a.seeds().fit, a.seeds().generate);
    }
}
