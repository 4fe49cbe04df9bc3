//! Marginal, temporal, tail, correlation and portfolio comparisons between
//! the scenarios and the historical panels.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use synthmarket_core::metrics::correlation::{correlation, cov_to_corr};
use synthmarket_core::metrics::{
    clustering_score, corr_distance, ledoit_wolf, one_factor_corr, portfolio_stats, rolling_mean_corr, var_es,
    wasserstein1, MetricReport, ScoreKind,
};
use synthmarket_core::mixture::{fit_em, FitMode, FitOptions, MixtureParams};
use synthmarket_core::rng::{derive_seed, stream};
use synthmarket_core::{stats, ReturnsPanel, PERIODS_PER_YEAR};

use super::{read_scenarios, Context, SCENARIO_MANIFEST};
use crate::error::{CliError, Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

pub const REPORT_VERSION: u32 = 1;
const PUBLISHED: &str = include_str!("../../reference/published.json");

/// Median with the nearest-rank interval holding 95 % of the values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Summary {
    /// Non-finite values are ignored; `None` when nothing is left.
    pub fn of(values: &[f64]) -> Option<Self> {
        let finite: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if finite.is_empty() {
            return None;
        }
        let s = stats::sorted(&finite);
        Some(Self {
            median: stats::nearest_rank(&s, 0.5),
            lo: stats::nearest_rank(&s, 0.025),
            hi: stats::nearest_rank(&s, 0.975),
            count: s.len(),
        })
    }

    fn cells(s: Option<Self>) -> [Option<f64>; 3] {
        match s {
            Some(s) => [Some(s.median), Some(s.lo), Some(s.hi)],
            None => [None; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub model: String,
    pub in_sample: Option<Summary>,
    pub out_of_sample: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylizedRow {
    pub metric: String,
    pub in_sample: Option<Summary>,
    pub out_of_sample: Option<Summary>,
    pub generated: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRow {
    pub window: usize,
    pub in_sample: Option<Summary>,
    pub out_of_sample: Option<Summary>,
    pub generated: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRow {
    pub metric: String,
    pub generated: Option<Summary>,
    pub in_sample: Option<f64>,
    pub out_of_sample: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub format_version: u32,
    pub assets: usize,
    pub train_rows: usize,
    pub test_rows: Option<usize>,
    pub scenario_count: usize,
    pub scenario_rows: usize,
    /// Per-asset Wasserstein-1 distance to the historical marginal.
    pub wasserstein: Vec<DistanceRow>,
    /// Per-asset scores and tail statistics.
    pub stylized: Vec<StylizedRow>,
    /// Distance to the historical correlation matrix.
    pub correlation: Vec<DistanceRow>,
    pub rolling_correlation: RollingRow,
    /// Equal-weight portfolio statistics.
    pub portfolio: Vec<PortfolioRow>,
    /// Values published for a proprietary 433-stock universe. Reported for
    /// orientation only, never compared against.
    pub published_reference: serde_json::Value,
}

const STYLIZED: [&str; 7] = ["vol_clustering", "leverage", "var95", "var99", "es95", "es99", "excess_kurtosis"];

/// The `STYLIZED` metrics of one return series; NaN where undefined.
fn stylized(col: &[f64], max_lag: usize) -> [f64; 7] {
    let tail = |a| var_es(col, a).unwrap_or((f64::NAN, f64::NAN));
    let (v95, e95) = tail(0.95);
    let (v99, e99) = tail(0.99);
    let flat = stats::negligible_spread(stats::variance(col) * col.len() as f64, col);
    [
        clustering_score(col, ScoreKind::VolatilityClustering, max_lag),
        clustering_score(col, ScoreKind::Leverage, max_lag),
        v95,
        v99,
        e95,
        e99,
        if flat { f64::NAN } else { stats::excess_kurtosis(col) },
    ]
}

/// `out[metric]` holds the metric of every column.
fn stylized_columns(p: &ReturnsPanel, max_lag: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(p.d()); STYLIZED.len()];
    for j in 0..p.d() {
        for (k, v) in stylized(&p.column(j), max_lag).into_iter().enumerate() {
            out[k].push(v);
        }
    }
    out
}

enum FittedLaw {
    Normal(f64, f64),
    Mixture(MixtureParams),
}

fn sample_law(law: &FittedLaw, n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 0);
    match law {
        FittedLaw::Normal(mu, sd) => {
            let d = Normal::new(*mu, *sd).expect("finite positive sd");
            (0..n).map(|_| d.sample(&mut r)).collect()
        }
        FittedLaw::Mixture(p) => (0..n).map(|_| p.sample(&mut r)).collect(),
    }
}

fn corr_of(p: &ReturnsPanel) -> synthmarket_core::Result<DMatrix<f64>> {
    correlation(p.values())
}

pub fn evaluate(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let (train, test) = cfg.load_panels()?;
    let (_, scenarios) = read_scenarios(ctx)?;
    let test = test.as_ref();
    for (i, s) in scenarios.iter().enumerate() {
        if s.tickers() != train.tickers() {
            return Err(CliError::Config(format!("scenario {i} tickers differ from the reference panel")));
        }
    }
    let (report, per_asset) = ctx.install(|| build_report(ctx, &train, test, &scenarios))?;
    debug_assert!({
        let value = serde_json::to_value(&report).expect("serializable report");
        crate::schema::validate_str(crate::schema::EVALUATE_REPORT, &value).is_empty()
    });

    let root = &ctx.out;
    let mut m = Manifest::new("evaluate", cfg);
    m.input(root, &cfg.data)?;
    m.input(root, &ctx.path(SCENARIO_MANIFEST))?;
    m.emit(root, "evaluate/report.json", &io::to_json(&report))?;
    m.emit(root, "evaluate/wasserstein.csv", &distance_csv(&report.wasserstein))?;
    m.emit(root, "evaluate/correlation.csv", &distance_csv(&report.correlation))?;
    m.emit(root, "evaluate/stylized.csv", &stylized_csv(&report.stylized))?;
    m.emit(root, "evaluate/portfolio.csv", &portfolio_csv(&report.portfolio))?;
    m.emit(root, "evaluate/per_asset.csv", &per_asset)?;
    m.emit(root, "evaluate/rolling_correlation.csv", &rolling_csv(&train, &scenarios, cfg.evaluate.rolling_window))?;
    m.write(root, "evaluate/manifest.json")?;
    Ok(m)
}

/// The report and the per-asset CSV table.
fn build_report(
    ctx: &Context,
    train: &ReturnsPanel,
    test: Option<&ReturnsPanel>,
    scen: &[ReturnsPanel],
) -> Result<(EvaluateReport, Vec<u8>)> {
    let cfg = &ctx.config;
    let d = train.d();
    let seed = cfg.seeds().evaluate;
    let max_lag = cfg.evaluate.score_max_lag;

    // Marginals: scenarios pooled per asset, baselines fitted per asset in-sample.
    let pooled_len: usize = scen.iter().map(|s| s.n()).sum();
    let per_asset = (0..d)
        .into_par_iter()
        .map(|j| {
            let hist = train.column(j);
            let mut pooled = Vec::with_capacity(pooled_len);
            for s in scen {
                pooled.extend(s.values().column(j).iter());
            }
            let t_fit = fit_em(
                &hist,
                &FitOptions { mode: FitMode::SingleT, seed: derive_seed(seed, j as u64), ..FitOptions::default() },
            )?;
            let laws = [FittedLaw::Normal(stats::mean(&hist), stats::std_dev(&hist)), FittedLaw::Mixture(t_fit.params)];
            let mut samples: Vec<Vec<f64>> = laws
                .iter()
                .enumerate()
                .map(|(k, l)| sample_law(l, pooled_len, derive_seed(seed, (d * (k + 1) + j) as u64)))
                .collect();
            samples.push(pooled);
            let ins = samples.iter().map(|x| wasserstein1(x, &hist)).collect::<synthmarket_core::Result<Vec<_>>>()?;
            let oos = match test {
                Some(t) => {
                    let col = t.column(j);
                    Some(samples.iter().map(|x| wasserstein1(x, &col)).collect::<synthmarket_core::Result<Vec<_>>>()?)
                }
                None => None,
            };
            Ok((ins, oos))
        })
        .collect::<synthmarket_core::Result<Vec<_>>>()
        .stage("evaluate: wasserstein")?;
    let wasserstein = ["Gaussian", "Student-t", "Market generator"]
        .iter()
        .enumerate()
        .map(|(k, name)| DistanceRow {
            model: name.to_string(),
            in_sample: Summary::of(&per_asset.iter().map(|(i, _)| i[k]).collect::<Vec<_>>()),
            out_of_sample: test.and_then(|_| {
                Summary::of(&per_asset.iter().filter_map(|(_, o)| o.as_ref().map(|o| o[k])).collect::<Vec<_>>())
            }),
        })
        .collect();

    // Per-asset stylized facts, generated values pooled over scenarios and assets.
    let hist_sty = stylized_columns(train, max_lag);
    let test_sty = test.map(|t| stylized_columns(t, max_lag));
    let gen_sty: Vec<Vec<Vec<f64>>> = scen.par_iter().map(|s| stylized_columns(s, max_lag)).collect();
    let stylized = STYLIZED
        .iter()
        .enumerate()
        .map(|(k, name)| StylizedRow {
            metric: name.to_string(),
            in_sample: Summary::of(&hist_sty[k]),
            out_of_sample: test_sty.as_ref().and_then(|t| Summary::of(&t[k])),
            generated: Summary::of(&gen_sty.iter().flat_map(|g| g[k].iter().copied()).collect::<Vec<_>>()),
        })
        .collect();

    // Correlation structure.
    let c_in = corr_of(train).stage("evaluate: in-sample correlation")?;
    let c_out = test.map(corr_of).transpose().stage("evaluate: out-of-sample correlation")?;
    let one = one_factor_corr(train.values()).stage("evaluate: one-factor correlation")?;
    let lw = ledoit_wolf(train.values()).and_then(|(cov, _)| cov_to_corr(&cov)).stage("evaluate: ledoit-wolf")?;
    let dist_pair = |c: &DMatrix<f64>| -> synthmarket_core::Result<(f64, Option<f64>)> {
        Ok((corr_distance(c, &c_in)?, c_out.as_ref().map(|o| corr_distance(c, o)).transpose()?))
    };
    let gen_d = scen
        .par_iter()
        .map(|s| dist_pair(&corr_of(s)?))
        .collect::<synthmarket_core::Result<Vec<_>>>()
        .stage("evaluate: scenario correlation")?;
    let fixed = |name: &str, c: &DMatrix<f64>| -> Result<DistanceRow> {
        let (i, o) = dist_pair(c).stage("evaluate: correlation distance")?;
        Ok(DistanceRow {
            model: name.into(),
            in_sample: Summary::of(&[i]),
            out_of_sample: o.and_then(|o| Summary::of(&[o])),
        })
    };
    let correlation = vec![
        fixed("One-factor", &one)?,
        fixed("Ledoit-Wolf", &lw)?,
        DistanceRow {
            model: "Market generator".into(),
            in_sample: Summary::of(&gen_d.iter().map(|g| g.0).collect::<Vec<_>>()),
            out_of_sample: Summary::of(&gen_d.iter().filter_map(|g| g.1).collect::<Vec<_>>()),
        },
    ];

    // Rolling mean correlation.
    let w = cfg.evaluate.rolling_window;
    let rolling = |p: &ReturnsPanel| if p.n() >= w { rolling_mean_corr(p.values(), w).ok() } else { None };
    let gen_roll: Vec<f64> = scen.par_iter().filter_map(rolling).flatten().collect();
    let rolling_correlation = RollingRow {
        window: w,
        in_sample: rolling(train).and_then(|v| Summary::of(&v)),
        out_of_sample: test.and_then(rolling).and_then(|v| Summary::of(&v)),
        generated: Summary::of(&gen_roll),
    };

    // Equal-weight portfolio.
    let stats_of = |p: &ReturnsPanel| portfolio_stats(&p.equal_weight_returns(), PERIODS_PER_YEAR);
    let ins = stats_of(train);
    let oos = test.map(stats_of);
    let gen: Vec<MetricReport> = scen.par_iter().map(stats_of).collect();
    let mut keys: BTreeSet<&String> = ins.values.keys().collect();
    keys.extend(ins.degenerate.iter());
    let portfolio = keys
        .into_iter()
        .map(|k| PortfolioRow {
            metric: k.clone(),
            generated: Summary::of(&gen.iter().filter_map(|g| g.get(k)).collect::<Vec<_>>()),
            in_sample: ins.get(k),
            out_of_sample: oos.as_ref().and_then(|o| o.get(k)),
        })
        .collect();

    let per_asset = per_asset_csv(train.tickers(), &hist_sty, &gen_sty);
    let report = EvaluateReport {
        format_version: REPORT_VERSION,
        assets: d,
        train_rows: train.n(),
        test_rows: test.map(|t| t.n()),
        scenario_count: scen.len(),
        scenario_rows: scen.first().map_or(0, |s| s.n()),
        wasserstein,
        stylized,
        correlation,
        rolling_correlation,
        portfolio,
        published_reference: serde_json::from_str(PUBLISHED).expect("bundled reference values parse"),
    };
    Ok((report, per_asset))
}

fn distance_csv(rows: &[DistanceRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "in_sample_median",
        "in_sample_lo",
        "in_sample_hi",
        "out_of_sample_median",
        "out_of_sample_lo",
        "out_of_sample_hi",
    ])
    .expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.model.clone()];
        rec.extend(Summary::cells(r.in_sample).into_iter().chain(Summary::cells(r.out_of_sample)).map(cell));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn stylized_csv(rows: &[StylizedRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_string()];
    for part in ["in_sample", "out_of_sample", "generated"] {
        header.extend(["median", "lo", "hi"].map(|s| format!("{part}_{s}")));
    }
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.metric.clone()];
        for s in [r.in_sample, r.out_of_sample, r.generated] {
            rec.extend(Summary::cells(s).map(cell));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn portfolio_csv(rows: &[PortfolioRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "generated_median", "generated_lo", "generated_hi", "in_sample", "out_of_sample"])
        .expect("in-memory write");
    for r in rows {
        let mut rec = vec![r.metric.clone()];
        rec.extend(Summary::cells(r.generated).map(cell));
        rec.push(cell(r.in_sample));
        rec.push(cell(r.out_of_sample));
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// One row per ticker: historical in-sample metric and the median over scenarios.
fn per_asset_csv(tickers: &[String], hist: &[Vec<f64>], gen: &[Vec<Vec<f64>>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ticker".to_string()];
    for name in STYLIZED {
        header.push(format!("{name}_in_sample"));
        header.push(format!("{name}_generated_median"));
    }
    w.write_record(&header).expect("in-memory write");
    for (j, t) in tickers.iter().enumerate() {
        let mut rec = vec![t.clone()];
        for k in 0..STYLIZED.len() {
            rec.push(cell(Some(hist[k][j]).filter(|x| x.is_finite())));
            rec.push(cell(Summary::of(&gen.iter().map(|g| g[k][j]).collect::<Vec<_>>()).map(|s| s.median)));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Rolling mean correlation of the in-sample panel next to the scenario band
/// at the same row offset.
fn rolling_csv(train: &ReturnsPanel, scen: &[ReturnsPanel], window: usize) -> Vec<u8> {
    let series = |p: &ReturnsPanel| {
        if p.n() >= window {
            rolling_mean_corr(p.values(), window).unwrap_or_default()
        } else {
            Vec::new()
        }
    };
    let hist = series(train);
    let gen: Vec<Vec<f64>> = scen.iter().map(series).collect();
    let len = gen.iter().map(Vec::len).chain([hist.len()]).max().unwrap_or(0);
    let rows: Vec<Vec<Option<f64>>> = (0..len)
        .map(|i| {
            let at: Vec<f64> = gen.iter().filter_map(|g| g.get(i).copied()).collect();
            let s = Summary::of(&at);
            vec![
                Some((i + window - 1) as f64),
                hist.get(i).copied().filter(|x| x.is_finite()),
                s.map(|s| s.median),
                s.map(|s| s.lo),
                s.map(|s| s.hi),
            ]
        })
        .collect();
    io::table_to_csv(&["row", "in_sample", "generated_median", "generated_lo", "generated_hi"], &rows)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}
