//! The market generator: factor paths from per-cluster generators, mapped
//! through the eigenvectors, plus mixture residuals, mapped back to returns.
//!
//! ```text
//! X̃ᵢⱼ = μ̂ⱼ + σ̂ⱼ · ( Σ_k Pⱼₖ λₖ^e g_c(k)(z_k)ᵢ + F⁻¹(uᵢⱼ | θ̂ⱼ) )
//! ```
//!
//! Seeds: factor `k` draws from `derive_seed(seed, k)`; the residual
//! uniforms come from stream 0 of `seed` itself, one per cell in row-major
//! order. Scenario `i` of a set uses `derive_seed(master, i)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clusters::{self, Clustering, Scaling, WindowSet};
use crate::date::Date;
use crate::error::{invalid, Error, Result};
use crate::gan::{self, GanModel, TcnSpec, TrainConfig};
use crate::mixture::{self, FitMode, FitOptions, MixtureParams};
use crate::panel::ReturnsPanel;
use crate::rng;
use crate::spectral::{FactorCount, FactorModel};
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

/// Source of scaled factor paths for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FactorGenerator {
    Tcn(GanModel),
    /// i.i.d. normal draws.
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// Replays a recorded path from its start; fails when asked for more.
    Replay {
        path: Vec<f64>,
    },
}

impl FactorGenerator {
    /// One scaled path of length `n`.
    pub fn path(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            FactorGenerator::Tcn(m) => Ok(m.generate(n, 1, seed)?.row(0).iter().copied().collect()),
            FactorGenerator::Gaussian { mean, sd } => {
                let dist = Normal::new(*mean, *sd).map_err(|_| invalid("gaussian generator needs finite sd >= 0"))?;
                let mut r = rng::stream(seed, 0);
                Ok((0..n).map(|_| dist.sample(&mut r)).collect())
            }
            FactorGenerator::Replay { path } => {
                if path.len() < n {
                    return Err(Error::InsufficientData { required: n, actual: path.len() });
                }
                Ok(path[..n].to_vec())
            }
        }
    }
}

/// Per-asset law of the standardized residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ResidualModel {
    Mixture(MixtureParams),
    PointMass { at: f64 },
}

impl ResidualModel {
    pub fn quantile(&self, u: f64) -> Result<f64> {
        match self {
            ResidualModel::Mixture(p) => p.inverse_cdf(u),
            ResidualModel::PointMass { at } => Ok(*at),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ResidualModel::Mixture(p) => p.validate(),
            ResidualModel::PointMass { at } if at.is_finite() => Ok(()),
            ResidualModel::PointMass { .. } => Err(invalid("point-mass residual must be finite")),
        }
    }
}

/// Everything needed to synthesize panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorBundle {
    pub factor_model: FactorModel,
    pub clustering: Clustering,
    /// Indexed by cluster id − 1.
    pub generators: Vec<FactorGenerator>,
    /// One per asset, in ticker order.
    pub residuals: Vec<ResidualModel>,
    pub scaling: Scaling,
    /// First date stamped on synthetic panels.
    pub start: Date,
}

impl GeneratorBundle {
    pub fn validate(&self) -> Result<()> {
        let fm = &self.factor_model;
        if self.clustering.m() != fm.m() {
            return Err(invalid(format!("clustering covers {} factors, model has {}", self.clustering.m(), fm.m())));
        }
        if self.generators.len() != self.clustering.n_clusters() {
            return Err(invalid(format!(
                "{} generators for {} clusters",
                self.generators.len(),
                self.clustering.n_clusters()
            )));
        }
        if self.residuals.len() != fm.d() {
            return Err(Error::DimensionMismatch { expected: fm.d(), actual: self.residuals.len() });
        }
        for r in &self.residuals {
            r.validate()?;
        }
        if fm.eigvals().rows(0, fm.m()).iter().any(|l| !(*l > 0.0)) {
            return Err(invalid("factor eigenvalues must be positive"));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.factor_model.d()
    }

    /// `n × m` factor paths in factor units (scaling undone).
    pub fn factor_paths(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let fm = &self.factor_model;
        let mut f = DMatrix::zeros(n, fm.m());
        for k in 0..fm.m() {
            let g = &self.generators[self.clustering.cluster_of(k) - 1];
            let path = g.path(n, rng::derive_seed(seed, k as u64))?;
            let unscale = self.scaling.unscale_factor(fm.eigvals()[k]);
            for (i, v) in path.iter().enumerate() {
                f[(i, k)] = v * unscale;
            }
        }
        Ok(f)
    }

    /// `n × d` standardized residual draws.
    pub fn residual_draws(&self, n: usize, seed: u64) -> Result<DMatrix<f64>> {
        let d = self.d();
        let mut r = rng::stream(seed, 0);
        let mut z = DMatrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                z[(i, j)] = self.residuals[j].quantile(rng::open_unit(&mut r))?;
            }
        }
        Ok(z)
    }
}

/// One synthetic panel of `n_tilde` days.
pub fn synthesize(bundle: &GeneratorBundle, n_tilde: usize, seed: u64) -> Result<ReturnsPanel> {
    if n_tilde == 0 {
        return Err(invalid("synthetic length must be positive"));
    }
    bundle.validate()?;
    let fm = &bundle.factor_model;
    let f = bundle.factor_paths(n_tilde, seed)?;
    let p = fm.beta();
    let mut x = &f * p.transpose();
    x += bundle.residual_draws(n_tilde, seed)?;
    let (mu, sigma) = (fm.mu_hat(), fm.sigma_hat());
    for j in 0..fm.d() {
        for i in 0..n_tilde {
            x[(i, j)] = mu[j] + sigma[j] * x[(i, j)];
        }
    }
    let dates = bundle.start.business_days(n_tilde);
    ReturnsPanel::new(dates, fm.tickers().to_vec(), x)
}

/// Seed of scenario `index` under `master`.
pub fn scenario_seed(master: u64, index: usize) -> u64 {
    rng::derive_seed(master, index as u64)
}

/// Synthetic panels of a common shape plus their seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub scenarios: Vec<ReturnsPanel>,
    pub master_seed: u64,
    pub seeds: Vec<u64>,
    /// Identifies the bundle the panels came from.
    pub provenance: String,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

pub fn scenario_set(
    bundle: &GeneratorBundle,
    n_tilde: usize,
    count: usize,
    master_seed: u64,
    provenance: String,
) -> Result<ScenarioSet> {
    if count == 0 {
        return Err(invalid("scenario count must be positive"));
    }
    let seeds: Vec<u64> = (0..count).map(|i| scenario_seed(master_seed, i)).collect();
    let scenarios = seeds.iter().map(|&s| synthesize(bundle, n_tilde, s)).collect::<Result<Vec<_>>>()?;
    Ok(ScenarioSet { scenarios, master_seed, seeds, provenance })
}

/// How cluster generators are obtained during a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GeneratorKind {
    Tcn {
        spec: TcnSpec,
        train: TrainConfig,
    },
    /// Mean and sd of the cluster's stacked scaled series.
    Gaussian,
}

/// Settings of a full fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub factor_count: FactorCount,
    pub n_clusters: usize,
    pub scaling: Scaling,
    pub window: usize,
    pub generator: GeneratorKind,
    pub residual_mode: FitMode,
    pub seed: u64,
}

impl FitConfig {
    pub fn desk() -> Self {
        Self {
            factor_count: FactorCount::default(),
            n_clusters: 2,
            scaling: Scaling::default(),
            window: 63,
            generator: GeneratorKind::Tcn { spec: TcnSpec::desk(), train: TrainConfig::desk() },
            residual_mode: FitMode::TwoT,
            seed: 0,
        }
    }

    /// Seed of the generator trained for cluster `id`.
    pub fn cluster_seed(&self, id: usize) -> u64 {
        rng::derive_seed(self.seed, id as u64)
    }

    /// Seed of the residual fit for asset `j`.
    pub fn residual_seed(&self, j: usize) -> u64 {
        rng::derive_seed(rng::mix64(self.seed ^ 0x5245_5349_4455_414C), j as u64)
    }
}

/// Everything computed before the per-cluster and per-asset fits.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub factor_model: FactorModel,
    pub scaled: DMatrix<f64>,
    pub clustering: Clustering,
    pub windows: Vec<WindowSet>,
    /// Standardized residual columns.
    pub residuals: Vec<Vec<f64>>,
    pub start: Date,
}

/// Standardize, extract factors, scale, cluster and cut windows.
pub fn prepare(panel: &ReturnsPanel, cfg: &FitConfig) -> Result<Prepared> {
    let std_panel = panel.standardize()?;
    let factor_model = FactorModel::fit(&std_panel, cfg.factor_count)?;
    let m = factor_model.m();
    if cfg.n_clusters == 0 || cfg.n_clusters > m {
        return Err(invalid(format!("n_clusters {} outside 1..={m} (factors found: {m})", cfg.n_clusters)));
    }
    let decomp = factor_model.decompose(&std_panel)?;
    let eig: Vec<f64> = factor_model.eigvals().rows(0, m).iter().copied().collect();
    let scaled = clusters::scale_factors(&decomp.factors, &eig, cfg.scaling)?;
    let feats = clusters::features_all(&scaled, &eig)?;
    let clustering = clusters::cluster(&feats, cfg.n_clusters)?;
    let windows = clusters::build_training_sets(&scaled, &clustering, cfg.window)?;
    let residuals = decomp.residuals.column_iter().map(|c| c.iter().copied().collect()).collect();
    Ok(Prepared { factor_model, scaled, clustering, windows, residuals, start: panel.dates()[0] })
}

/// Train (or estimate) the generator of cluster `prep.windows[index]`.
pub fn fit_cluster_generator(prep: &Prepared, index: usize, cfg: &FitConfig) -> Result<FactorGenerator> {
    let windows = prep.windows.get(index).ok_or_else(|| invalid(format!("no cluster at index {index}")))?;
    match &cfg.generator {
        GeneratorKind::Tcn { spec, train } => {
            if spec.window_len() != windows.s {
                return Err(invalid(format!(
                    "window length {} differs from the discriminator window {}",
                    windows.s,
                    spec.window_len()
                )));
            }
            let tc = TrainConfig { seed: cfg.cluster_seed(windows.cluster_id), ..train.clone() };
            Ok(FactorGenerator::Tcn(gan::train(&windows.data, spec.clone(), &tc)?))
        }
        GeneratorKind::Gaussian => {
            // Full scaled columns, not the windows, which drop the tail rows.
            let mut xs = Vec::with_capacity(prep.scaled.nrows() * windows.factors.len());
            for &k in &windows.factors {
                xs.extend(prep.scaled.column(k).iter());
            }
            Ok(FactorGenerator::Gaussian { mean: stats::mean(&xs), sd: stats::std_dev(&xs) })
        }
    }
}

/// Fit the residual law of asset `j`.
pub fn fit_residual(column: &[f64], j: usize, cfg: &FitConfig) -> Result<ResidualModel> {
    let opts = FitOptions { mode: cfg.residual_mode, seed: cfg.residual_seed(j), ..FitOptions::default() };
    Ok(ResidualModel::Mixture(mixture::fit_em(column, &opts)?.params))
}

pub fn assemble(
    prep: Prepared,
    generators: Vec<FactorGenerator>,
    residuals: Vec<ResidualModel>,
    scaling: Scaling,
) -> Result<GeneratorBundle> {
    let b = GeneratorBundle {
        factor_model: prep.factor_model,
        clustering: prep.clustering,
        generators,
        residuals,
        scaling,
        start: prep.start,
    };
    b.validate()?;
    Ok(b)
}

/// Sequential end-to-end fit.
pub fn fit_bundle(panel: &ReturnsPanel, cfg: &FitConfig) -> Result<GeneratorBundle> {
    let prep = prepare(panel, cfg)?;
    let generators =
        (0..prep.windows.len()).map(|c| fit_cluster_generator(&prep, c, cfg)).collect::<Result<Vec<_>>>()?;
    let residuals =
        prep.residuals.iter().enumerate().map(|(j, c)| fit_residual(c, j, cfg)).collect::<Result<Vec<_>>>()?;
    assemble(prep, generators, residuals, cfg.scaling)
}
