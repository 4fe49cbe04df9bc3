use rayon::prelude::*;
use synthmarket_core::generator::{scenario_seed, synthesize, GeneratorBundle};

use super::{require, Context, BUNDLE, SCENARIO_MANIFEST};
use crate::error::{Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

pub fn scenario_file(i: usize) -> String {
    format!("scenarios/scenario_{i:04}.csv")
}

/// Warning issued when the synthetic sample dwarfs the training sample.
pub fn guardrail_message(count: usize, len: usize, n_train: usize, multiple: f64) -> String {
    format!(
        "{count} scenarios of {len} rows give {} synthetic rows, more than {multiple} times the {n_train} training rows. \
         Statistics computed on synthetic data converge to the values of the learned model, not to the true ones: \
         past a few multiples of the training size, extra synthetic data only narrows the spread of an estimate \
         around a biased value, so generating too much of it moves estimated statistics away from their true values.",
        count * len
    )
}

pub fn generate(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let bundle_path = ctx.path(BUNDLE);
    require(&bundle_path, "run `fit` first")?;
    let bundle: GeneratorBundle = io::read_json(&bundle_path)?;
    bundle.validate().stage("generate: load bundle")?;
    let n_train = bundle.factor_model.n_train();
    let len = cfg.scenarios.length.unwrap_or(n_train);
    let count = cfg.scenarios.count;

    let root = &ctx.out;
    let mut m = Manifest::new("generate", cfg);
    m.input(root, &bundle_path)?;
    if (count * len) as f64 > cfg.scenarios.guardrail_multiple * n_train as f64 {
        m.warn(guardrail_message(count, len, n_train, cfg.scenarios.guardrail_multiple));
    }
    let seeds: Vec<u64> = (0..count).map(|i| scenario_seed(cfg.seeds().generate, i)).collect();
    let files = ctx
        .install(|| {
            seeds
                .par_iter()
                .map(|&s| synthesize(&bundle, len, s).map(|p| io::panel_to_csv(&p)))
                .collect::<synthmarket_core::Result<Vec<_>>>()
        })
        .stage("generate: synthesize")?;
    for (i, bytes) in files.iter().enumerate() {
        m.emit(root, &scenario_file(i), bytes)?;
    }
    m.derived_seeds.insert("scenario".into(), seeds);
    m.write(root, SCENARIO_MANIFEST)?;
    Ok(m)
}
