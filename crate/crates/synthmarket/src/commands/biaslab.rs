use rayon::prelude::*;
use synthmarket_core::bias::{
    coverage_trial, jackknife_sigma1, probability_bracket, BiasScenario, Coverage, Kernel, Law, UStatSpec, MIN_TRIALS,
};
use synthmarket_core::rng::{derive_seed, stream};
use synthmarket_core::special::normal_cdf;

use super::Context;
use crate::config::BiasLabConfig;
use crate::error::{CliError, Result, StageExt};
use crate::io;
use crate::manifest::Manifest;

const PILOT: usize = 2_000;

/// `σ̂₁` in closed form for a normal learned law, by jackknife on a pilot
/// sample otherwise.
fn ustat_spec(bc: &BiasLabConfig, seed: u64) -> synthmarket_core::Result<UStatSpec> {
    let sigma1 = match bc.learned {
        Law::Normal { sd, .. } => UStatSpec::normal(bc.kernel, sd)?.sigma1,
        Law::StudentT { .. } => {
            let mut xs = vec![0.0; PILOT];
            bc.learned.sample_into(&mut stream(seed, 1), &mut xs);
            jackknife_sigma1(bc.kernel, &xs)?
        }
    };
    UStatSpec::new(bc.kernel, sigma1, bc.beta, bc.c_hat)
}

/// Monte Carlo coverage with trials spread over the worker pool; equal to
/// the sequential estimate for the same seed.
pub fn parallel_coverage(bc: &BiasLabConfig, n_tilde: usize, seed: u64) -> synthmarket_core::Result<Coverage> {
    let theta = bc.truth.theta(bc.kernel);
    let hits = (0..bc.trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| coverage_trial(&bc.learned, bc.kernel, theta, bc.b, n_tilde, seed, i, buf))
        .map(|hit| hit.map(usize::from))
        .sum::<synthmarket_core::Result<usize>>()?;
    Ok(Coverage::from_hits(n_tilde, bc.trials, hits))
}

/// Coverage of `θ` within `b` for every `ñ` of the grid, with the bracket
/// center, the envelope and (normal mean only) the exact probability.
pub fn biaslab(ctx: &Context) -> Result<Manifest> {
    let cfg = &ctx.config;
    let bc = &cfg.biaslab;
    bc.truth.validate().and_then(|_| bc.learned.validate()).map_err(|e| CliError::Config(format!("biaslab: {e}")))?;
    if bc.trials < MIN_TRIALS || !(bc.b > 0.0) {
        return Err(CliError::Config(format!("biaslab needs at least {MIN_TRIALS} trials and b > 0")));
    }
    let seed = cfg.seeds().biaslab;
    let spec = ustat_spec(bc, seed).stage("biaslab: sigma1")?;
    let a_n = bc.learned.theta(bc.kernel) - bc.truth.theta(bc.kernel);
    let seeds: Vec<u64> = bc.n_tilde.iter().map(|&n| derive_seed(seed, n as u64)).collect();

    let mut rows = Vec::with_capacity(bc.n_tilde.len());
    for (&n, &s) in bc.n_tilde.iter().zip(&seeds) {
        let cov = ctx.install(|| parallel_coverage(bc, n, s)).stage(format!("biaslab: coverage at n_tilde {n}"))?;
        let br = probability_bracket(&BiasScenario { a_n, b: bc.b, n_tilde: n }, &spec).stage("biaslab: bracket")?;
        let exact = match (bc.kernel, bc.learned) {
            (Kernel::Mean, Law::Normal { sd, .. }) => {
                let k = (n as f64).sqrt() / sd;
                Some(normal_cdf((bc.b - a_n) * k) - normal_cdf((-bc.b - a_n) * k))
            }
            _ => None,
        };
        rows.push(vec![
            Some(n as f64),
            Some(cov.estimate),
            Some(cov.std_error),
            Some(br.center),
            Some(br.envelope),
            exact,
        ]);
    }

    let root = &ctx.out;
    let mut m = Manifest::new("biaslab", cfg);
    m.derived_seeds.insert("n_tilde".into(), seeds);
    let csv = io::table_to_csv(&["n_tilde", "coverage", "std_error", "center", "envelope", "exact"], &rows);
    m.emit(root, "biaslab/coverage.csv", &csv)?;
    m.write(root, "biaslab/manifest.json")?;
    Ok(m)
}
