use rayon::prelude::*;
use serde::Serialize;
use synthmarket_core::generator::{self, FactorGenerator, FitConfig, GeneratorBundle, ResidualModel};
use synthmarket_core::ReturnsPanel;

use super::{Context, BUNDLE};
use crate::error::{Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

/// Full fit with cluster generators and residual laws fitted in parallel.
/// Results are identical to the sequential core fit.
pub fn fit_panel(ctx: &Context, panel: &ReturnsPanel, cfg: &FitConfig) -> Result<GeneratorBundle> {
    let prep = generator::prepare(panel, cfg).stage("fit: spectral factors and clustering")?;
    let (generators, residuals) = ctx.install(|| {
        let generators = (0..prep.windows.len())
            .into_par_iter()
            .map(|i| {
                generator::fit_cluster_generator(&prep, i, cfg)
                    .stage(format!("fit: generator of cluster {}", prep.windows[i].cluster_id))
            })
            .collect::<Result<Vec<_>>>()?;
        let tickers = prep.factor_model.tickers();
        let residuals = prep
            .residuals
            .par_iter()
            .enumerate()
            .map(|(j, col)| generator::fit_residual(col, j, cfg).stage(format!("fit: residual law of {}", tickers[j])))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, crate::error::CliError>((generators, residuals))
    })?;
    generator::assemble(prep, generators, residuals, cfg.scaling).stage("fit: assemble bundle")
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    ticker: &'a str,
    model: &'a ResidualModel,
}

pub fn fit(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let (train, _) = cfg.load_panels()?;
    let fc = cfg.fit_config();
    let bundle = fit_panel(ctx, &train, &fc)?;

    let root = &ctx.out;
    let mut m = Manifest::new("fit", cfg);
    m.input(root, &cfg.data)?;
    let n_c = bundle.clustering.n_clusters();
    m.derived_seeds.insert("cluster".into(), (1..=n_c).map(|id| fc.cluster_seed(id)).collect());
    m.derived_seeds.insert("residual".into(), (0..bundle.d()).map(|j| fc.residual_seed(j)).collect());

    m.emit(root, BUNDLE, &io::to_json(&bundle))?;
    m.emit(root, "fit/clustering.json", &io::to_json(&bundle.clustering))?;
    let rows: Vec<ResidualRow> = bundle
        .factor_model
        .tickers()
        .iter()
        .zip(&bundle.residuals)
        .map(|(t, r)| ResidualRow { ticker: t, model: r })
        .collect();
    m.emit(root, "fit/residuals.json", &io::to_json(&rows))?;
    for (k, g) in bundle.generators.iter().enumerate() {
        if let FactorGenerator::Tcn(model) = g {
            let rows: Vec<Vec<Option<f64>>> =
                model.log.iter().map(|e| vec![Some(e.iteration as f64), Some(e.g_loss), Some(e.d_loss)]).collect();
            let csv = io::table_to_csv(&["iteration", "g_loss", "d_loss"], &rows);
            m.emit(root, &format!("fit/gan_log_cluster{}.csv", k + 1), &csv)?;
        }
    }
    m.write(root, "fit/manifest.json")?;
    Ok(m)
}
