//! Pipeline commands. Each reads its predecessors from the run directory,
//! writes its outputs under a subdirectory of it and finishes with a
//! manifest there.
//!
//! ```text
//! <out>/fit/          bundle.json, clustering.json, residuals.json, gan_log_cluster<k>.csv
//! <out>/scenarios/    scenario_0000.csv ...
//! <out>/evaluate/     report.json and CSV tables
//! <out>/backtest/     sharpe_<source>_<legs>.csv
//! <out>/regurgitate/  sample.csv, bundle.json, profile_<source>_<legs>.csv, report.json
//! <out>/biaslab/      coverage.csv
//! ```

mod backtest;
mod biaslab;
mod evaluate;
mod fit;
mod generate;
mod regurgitate;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use synthmarket_core::portfolio::{sharpe_curve, Legs, SharpeProfile};
use synthmarket_core::{stats, ReturnsPanel};

pub use backtest::backtest;
pub use biaslab::{biaslab, parallel_coverage};
pub use evaluate::{evaluate, EvaluateReport, Summary};
pub use fit::{fit, fit_panel};
pub use generate::{generate, guardrail_message, scenario_file};
pub use regurgitate::{regurgitate, RegurgitateReport};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

pub const BUNDLE: &str = "fit/bundle.json";
pub const SCENARIO_MANIFEST: &str = "scenarios/manifest.json";

/// Effective config, run directory and worker pool of one invocation.
pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pool: rayon::ThreadPool,
}

impl Context {
    /// `out` overrides the config's output directory; `workers` defaults to
    /// the available parallelism.
    pub fn new(config: PipelineConfig, out: Option<PathBuf>, workers: Option<usize>) -> Result<Self> {
        if workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
        let out = out.unwrap_or_else(|| config.output.clone());
        Ok(Self { config, out, pool })
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }
}

/// Runs fit, generate, evaluate, backtest and regurgitate in order.
pub fn run_all(ctx: &Context) -> Result<Vec<Manifest>> {
    Ok(vec![fit(ctx)?, generate(ctx)?, evaluate(ctx)?, backtest(ctx)?, regurgitate(ctx)?])
}

/// Scenarios listed in the generate manifest, checked against their digests.
pub fn read_scenarios(ctx: &Context) -> Result<(Manifest, Vec<ReturnsPanel>)> {
    let mpath = ctx.path(SCENARIO_MANIFEST);
    let manifest: Manifest = io::read_json(&mpath)?;
    let files: Vec<_> = manifest.outputs.iter().filter(|f| f.path.starts_with("scenarios/scenario_")).collect();
    if files.is_empty() {
        return Err(CliError::parse(&mpath, "manifest lists no scenarios"));
    }
    let panels = ctx.install(|| {
        files
            .par_iter()
            .map(|f| {
                let path = ctx.path(&f.path);
                let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
                if io::sha256_hex(&bytes) != f.sha256 {
                    return Err(CliError::parse(&path, "content differs from the digest in the scenario manifest"));
                }
                io::parse_panel(&bytes).map_err(|m| CliError::parse(&path, m))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((manifest, panels))
}

/// Sharpe curves of every panel for both legs, `[legs][panel][h]`.
pub(crate) fn curves(
    ctx: &Context,
    panels: &[ReturnsPanel],
    grid: &[usize],
    stage: &str,
) -> Result<[Vec<Vec<Option<f64>>>; 2]> {
    let per_panel = ctx
        .install(|| {
            panels
                .par_iter()
                .map(|p| Ok([sharpe_curve(p, grid, Legs::ALL[0])?, sharpe_curve(p, grid, Legs::ALL[1])?]))
                .collect::<synthmarket_core::Result<Vec<_>>>()
        })
        .stage(stage)?;
    let mut out = [Vec::with_capacity(panels.len()), Vec::with_capacity(panels.len())];
    for [a, b] in per_panel {
        out[0].push(a);
        out[1].push(b);
    }
    Ok(out)
}

pub(crate) fn profile_csv(p: &SharpeProfile) -> Vec<u8> {
    let rows: Vec<Vec<Option<f64>>> =
        p.rows.iter().map(|r| vec![Some(r.h as f64), r.median, r.lo, r.hi, r.in_sample, r.out_of_sample]).collect();
    io::table_to_csv(&["h", "median", "lo", "hi", "in_sample", "out_of_sample"], &rows)
}

/// Median and 2.5 % / 97.5 % nearest-rank band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub median: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Band {
    pub fn of(values: &[f64]) -> Self {
        let s = stats::sorted(values);
        let pick = |q| (!s.is_empty()).then(|| stats::nearest_rank(&s, q));
        Self { median: pick(0.5), lo: pick(0.025), hi: pick(0.975) }
    }

    pub fn contains(&self, x: Option<f64>) -> bool {
        matches!((self.lo, self.hi, x), (Some(lo), Some(hi), Some(x)) if lo <= x && x <= hi)
    }
}

pub(crate) fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} not found ({what})", path.display())))
    }
}
