//! Identifiability check: refit the pipeline on a sample drawn from the
//! fitted bundle and compare both resampling schemes against the bundle's
//! own long-run Sharpe profile.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use synthmarket_core::generator::{scenario_seed, synthesize, GeneratorBundle};
use synthmarket_core::portfolio::{block_bootstrap, Legs};
use synthmarket_core::rng::derive_seed;
use synthmarket_core::{stats, ReturnsPanel};

use super::{curves, fit_panel, require, Band, Context, BUNDLE};
use crate::error::{Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegurgitateRow {
    pub h: usize,
    /// Mean Sharpe ratio of the reference bundle over the truth scenarios.
    pub truth: Option<f64>,
    /// Sharpe ratio on the regurgitation sample itself.
    pub in_sample: Option<f64>,
    pub bootstrap: Band,
    pub regurgitative: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegsReport {
    pub legs: Legs,
    pub rows: Vec<RegurgitateRow>,
    /// Fraction of `h` whose band holds the truth.
    pub bootstrap_coverage: f64,
    pub regurgitative_coverage: f64,
    pub bootstrap_covers_truth: bool,
    pub regurgitative_covers_truth: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegurgitateReport {
    pub format_version: u32,
    pub train_rows: usize,
    pub truth_rows: usize,
    pub truth_count: usize,
    pub bootstrap_count: usize,
    pub scenario_count: usize,
    pub legs: Vec<LegsReport>,
}

/// Seeds of the four random stages, derived from the command seed.
struct Seeds {
    sample: u64,
    truth: u64,
    bootstrap: u64,
    scenarios: u64,
}

impl Seeds {
    fn new(seed: u64) -> Self {
        Self {
            sample: derive_seed(seed, 0),
            truth: derive_seed(seed, 1),
            bootstrap: derive_seed(seed, 2),
            scenarios: derive_seed(seed, 3),
        }
    }
}

fn synth_set(
    ctx: &Context,
    bundle: &GeneratorBundle,
    len: usize,
    seeds: &[u64],
    stage: &str,
) -> Result<Vec<ReturnsPanel>> {
    ctx.install(|| seeds.par_iter().map(|&s| synthesize(bundle, len, s)).collect::<synthmarket_core::Result<Vec<_>>>())
        .stage(stage)
}

pub fn regurgitate(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let rc = &cfg.regurgitate;
    let grid = &cfg.backtest.h_grid;
    let bundle_path = ctx.path(BUNDLE);
    require(&bundle_path, "run `fit` first")?;
    let reference: GeneratorBundle = io::read_json(&bundle_path)?;
    reference.validate().stage("regurgitate: load bundle")?;
    let n = reference.factor_model.n_train();
    let seeds = Seeds::new(cfg.seeds().regurgitate);

    // (1) one training-length sample, (2) a second bundle fitted on it.
    let sample = synthesize(&reference, n, seeds.sample).stage("regurgitate: synthesize sample")?;
    let second = fit_panel(ctx, &sample, &cfg.fit_config())?;

    // (3) long-run truth of the reference bundle.
    let truth_seeds: Vec<u64> = (0..rc.truth_count).map(|i| scenario_seed(seeds.truth, i)).collect();
    let truth_panels = synth_set(ctx, &reference, rc.truth_len, &truth_seeds, "regurgitate: truth scenarios")?;
    let truth_curves = curves(ctx, &truth_panels, grid, "regurgitate: truth backtest")?;
    drop(truth_panels);

    // (4) bootstrap and regurgitative bands.
    let boot_seeds: Vec<u64> = (0..rc.bootstrap_count).map(|i| derive_seed(seeds.bootstrap, i as u64)).collect();
    let boot = ctx
        .install(|| {
            boot_seeds
                .par_iter()
                .map(|&s| block_bootstrap(&sample, cfg.backtest.block_len, n, s))
                .collect::<synthmarket_core::Result<Vec<_>>>()
        })
        .stage("regurgitate: block bootstrap")?;
    let boot_curves = curves(ctx, &boot, grid, "regurgitate: bootstrap backtest")?;
    drop(boot);
    let scen_seeds: Vec<u64> = (0..rc.scenario_count).map(|i| scenario_seed(seeds.scenarios, i)).collect();
    let scen = synth_set(ctx, &second, n, &scen_seeds, "regurgitate: regurgitative scenarios")?;
    let scen_curves = curves(ctx, &scen, grid, "regurgitate: regurgitative backtest")?;
    drop(scen);
    let sample_curves = curves(ctx, std::slice::from_ref(&sample), grid, "regurgitate: sample backtest")?;

    let root = &ctx.out;
    let mut m = Manifest::new("regurgitate", cfg);
    m.input(root, &bundle_path)?;
    m.derived_seeds.insert("sample".into(), vec![seeds.sample]);
    m.derived_seeds.insert("truth".into(), truth_seeds);
    m.derived_seeds.insert("bootstrap".into(), boot_seeds);
    m.derived_seeds.insert("regurgitative".into(), scen_seeds);
    m.emit(root, "regurgitate/sample.csv", &io::panel_to_csv(&sample))?;
    m.emit(root, "regurgitate/bundle.json", &io::to_json(&second))?;

    let mut legs_reports = Vec::new();
    for (li, legs) in Legs::ALL.into_iter().enumerate() {
        let truth: Vec<Option<f64>> = (0..grid.len())
            .map(|i| {
                let vals: Vec<f64> = truth_curves[li].iter().filter_map(|c| c[i]).collect();
                (!vals.is_empty()).then(|| stats::mean(&vals))
            })
            .collect();
        let in_sample = &sample_curves[li][0];
        let rows: Vec<RegurgitateRow> = (0..grid.len())
            .map(|i| {
                let band = |cs: &[Vec<Option<f64>>]| Band::of(&cs.iter().filter_map(|c| c[i]).collect::<Vec<_>>());
                RegurgitateRow {
                    h: grid[i],
                    truth: truth[i],
                    in_sample: in_sample[i],
                    bootstrap: band(&boot_curves[li]),
                    regurgitative: band(&scen_curves[li]),
                }
            })
            .collect();
        type Pick = fn(&RegurgitateRow) -> Band;
        let sources: [(&str, Pick); 2] = [("bootstrap", |r| r.bootstrap), ("regurgitative", |r| r.regurgitative)];
        for (source, band) in sources {
            let csv_rows: Vec<Vec<Option<f64>>> = rows
                .iter()
                .map(|r| {
                    let b = band(r);
                    vec![Some(r.h as f64), b.median, b.lo, b.hi, r.in_sample, r.truth]
                })
                .collect();
            let csv = io::table_to_csv(&["h", "median", "lo", "hi", "in_sample", "truth"], &csv_rows);
            m.emit(root, &format!("regurgitate/profile_{source}_{}.csv", legs.name()), &csv)?;
        }
        let frac =
            |f: &dyn Fn(&RegurgitateRow) -> bool| rows.iter().filter(|r| f(r)).count() as f64 / rows.len() as f64;
        let bootstrap_coverage = frac(&|r| r.bootstrap.contains(r.truth));
        let regurgitative_coverage = frac(&|r| r.regurgitative.contains(r.truth));
        legs_reports.push(LegsReport {
            legs,
            rows,
            bootstrap_coverage,
            regurgitative_coverage,
            bootstrap_covers_truth: bootstrap_coverage == 1.0,
            regurgitative_covers_truth: regurgitative_coverage == 1.0,
        });
    }
    let report = RegurgitateReport {
        format_version: REPORT_VERSION,
        train_rows: n,
        truth_rows: rc.truth_len,
        truth_count: rc.truth_count,
        bootstrap_count: rc.bootstrap_count,
        scenario_count: rc.scenario_count,
        legs: legs_reports,
    };
    debug_assert!({
        let value = serde_json::to_value(&report).expect("serializable report");
        crate::schema::validate_str(crate::schema::REGURGITATE_REPORT, &value).is_empty()
    });
    m.emit(root, "regurgitate/report.json", &io::to_json(&report))?;
    m.write(root, "regurgitate/manifest.json")?;
    Ok(m)
}
