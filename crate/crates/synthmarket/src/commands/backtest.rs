use rayon::prelude::*;
use synthmarket_core::portfolio::{block_bootstrap, Legs, SharpeProfile};
use synthmarket_core::rng::derive_seed;

use super::{curves, profile_csv, read_scenarios, Context, SCENARIO_MANIFEST};
use crate::error::{Result, StageExt};
use crate::manifest::Manifest;

/// Sharpe profiles of the mean-reversion strategies on block-bootstrap
/// resamples of the training panel and on the generated scenarios.
pub fn backtest(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let bc = &cfg.backtest;
    let (train, test) = cfg.load_panels()?;
    let (_, scenarios) = read_scenarios(ctx)?;
    let seeds: Vec<u64> = (0..bc.bootstrap_count).map(|i| derive_seed(cfg.seeds().bootstrap, i as u64)).collect();
    let boot = ctx
        .install(|| {
            seeds
                .par_iter()
                .map(|&s| block_bootstrap(&train, bc.block_len, train.n(), s))
                .collect::<synthmarket_core::Result<Vec<_>>>()
        })
        .stage("backtest: block bootstrap")?;

    let root = &ctx.out;
    let mut m = Manifest::new("backtest", cfg);
    m.input(root, &cfg.data)?;
    m.input(root, &ctx.path(SCENARIO_MANIFEST))?;
    m.derived_seeds.insert("bootstrap".into(), seeds);
    for (source, panels) in [("bootstrap", &boot), ("generator", &scenarios)] {
        let by_legs = curves(ctx, panels, &bc.h_grid, &format!("backtest: {source} samples"))?;
        for (legs, c) in Legs::ALL.into_iter().zip(by_legs) {
            let profile = SharpeProfile::from_curves(legs, &bc.h_grid, &c)
                .and_then(|p| p.with_overlays(Some(&train), test.as_ref()))
                .stage(format!("backtest: {source} {} profile", legs.name()))?;
            m.emit(root, &format!("backtest/sharpe_{source}_{}.csv", legs.name()), &profile_csv(&profile))?;
        }
    }
    m.write(root, "backtest/manifest.json")?;
    Ok(m)
}
