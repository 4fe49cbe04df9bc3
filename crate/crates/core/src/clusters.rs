//! Factor scaling, per-factor clustering features, Ward clustering and the
//! stacked sliding-window training sets fed to the per-cluster GANs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::acf::{clustering_score, ScoreKind};
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

/// Lag horizon of the clustering and leverage features.
pub const FEATURE_MAX_LAG: usize = 63;

/// Column scaling applied before clustering and GAN training: `F̄ᵢ = λᵢ^(−e)·Fᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `e = 1/2`, unit-variance columns.
    #[default]
    InverseSqrt,
    /// `e = 1`.
    Inverse,
}

impl Scaling {
    pub fn exponent(self) -> f64 {
        match self {
            Scaling::InverseSqrt => 0.5,
            Scaling::Inverse => 1.0,
        }
    }

    /// Multiplier taking a scaled column back to factor units.
    pub fn unscale_factor(self, eigenvalue: f64) -> f64 {
        match self {
            Scaling::InverseSqrt => eigenvalue.sqrt(),
            Scaling::Inverse => eigenvalue,
        }
    }
}

fn check_eigvals(eigvals: &[f64], m: usize) -> Result<()> {
    if eigvals.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: eigvals.len() });
    }
    if let Some(i) = eigvals.iter().position(|l| !(*l > 0.0)) {
        return Err(invalid(format!("factor {i} has non-positive eigenvalue {}", eigvals[i])));
    }
    Ok(())
}

pub fn scale_factors(factors: &DMatrix<f64>, eigvals: &[f64], scaling: Scaling) -> Result<DMatrix<f64>> {
    check_eigvals(eigvals, factors.ncols())?;
    let mut out = factors.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col /= scaling.unscale_factor(eigvals[j]);
    }
    Ok(out)
}

/// Inverse of [`scale_factors`].
pub fn unscale_factors(scaled: &DMatrix<f64>, eigvals: &[f64], scaling: Scaling) -> Result<DMatrix<f64>> {
    check_eigvals(eigvals, scaled.ncols())?;
    let mut out = scaled.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= scaling.unscale_factor(eigvals[j]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorFeatures {
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub eigenvalue: f64,
    pub vol_clustering: f64,
    pub leverage: f64,
}

impl FactorFeatures {
    pub fn to_array(&self) -> [f64; 5] {
        [self.skewness, self.excess_kurtosis, self.eigenvalue, self.vol_clustering, self.leverage]
    }
}

pub fn features(scaled_col: &[f64], eigenvalue: f64) -> Result<FactorFeatures> {
    let n = scaled_col.len();
    if n <= FEATURE_MAX_LAG + 1 {
        return Err(Error::InsufficientData { required: FEATURE_MAX_LAG + 2, actual: n });
    }
    let f = FactorFeatures {
        skewness: stats::skewness(scaled_col),
        excess_kurtosis: stats::excess_kurtosis(scaled_col),
        eigenvalue,
        vol_clustering: clustering_score(scaled_col, ScoreKind::VolatilityClustering, FEATURE_MAX_LAG),
        leverage: clustering_score(scaled_col, ScoreKind::Leverage, FEATURE_MAX_LAG),
    };
    if f.to_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite clustering feature {f:?}")));
    }
    Ok(f)
}

/// Features of every column of a scaled factor matrix.
pub fn features_all(scaled: &DMatrix<f64>, eigvals: &[f64]) -> Result<Vec<FactorFeatures>> {
    check_eigvals(eigvals, scaled.ncols())?;
    scaled
        .column_iter()
        .zip(eigvals)
        .map(|(c, &l)| {
            let col: Vec<f64> = c.iter().copied().collect();
            features(&col, l)
        })
        .collect()
}

/// Partition of factor indices `0..m` into clusters numbered `1..=n_c`.
/// Cluster ids follow the order of each cluster's lowest factor index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<usize, Vec<usize>>", into = "BTreeMap<usize, Vec<usize>>")]
pub struct Clustering {
    assignment: Vec<usize>,
    n_clusters: usize,
}

impl Clustering {
    /// Build from a per-factor cluster id in `1..=n_c`.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let n_clusters = assignment.iter().copied().max().unwrap_or(0);
        if assignment.is_empty() {
            return Err(Error::EmptyPanel("clustering has no factors"));
        }
        let mut seen = vec![false; n_clusters];
        for &c in &assignment {
            if c == 0 {
                return Err(invalid("cluster ids start at 1"));
            }
            seen[c - 1] = true;
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("cluster {} is empty", c + 1)));
        }
        Ok(Self { assignment, n_clusters })
    }

    /// Everything in one cluster.
    pub fn single(m: usize) -> Result<Self> {
        Self::from_assignment(vec![1; m])
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn m(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, factor: usize) -> usize {
        self.assignment[factor]
    }

    /// Factor indices of cluster `id`, ascending.
    pub fn members(&self, id: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&k| self.assignment[k] == id).collect()
    }

    pub fn sets(&self) -> Vec<Vec<usize>> {
        (1..=self.n_clusters).map(|c| self.members(c)).collect()
    }
}

impl TryFrom<BTreeMap<usize, Vec<usize>>> for Clustering {
    type Error = Error;

    fn try_from(map: BTreeMap<usize, Vec<usize>>) -> Result<Self> {
        let m: usize = map.values().map(Vec::len).sum();
        let mut assignment = vec![0usize; m];
        for (&id, members) in &map {
            for &k in members {
                if k >= m || assignment[k] != 0 {
                    return Err(invalid(format!("factor index {k} is out of range or assigned twice")));
                }
                assignment[k] = id;
            }
        }
        let c = Self::from_assignment(assignment)?;
        if c.n_clusters != map.len() {
            return Err(invalid("cluster ids must be 1..=n_c"));
        }
        Ok(c)
    }
}

impl From<Clustering> for BTreeMap<usize, Vec<usize>> {
    fn from(c: Clustering) -> Self {
        (1..=c.n_clusters).map(|id| (id, c.members(id))).collect()
    }
}

/// Per-column z-scores (population sd); constant columns become zero.
fn zscore(rows: &[[f64; 5]]) -> Vec<[f64; 5]> {
    let mut out = rows.to_vec();
    for j in 0..5 {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mu = stats::mean(&col);
        let ss: f64 = col.iter().map(|x| (x - mu) * (x - mu)).sum();
        let flat = stats::negligible_spread(ss, &col);
        let sd = (ss / col.len() as f64).sqrt();
        for r in out.iter_mut() {
            r[j] = if flat { 0.0 } else { (r[j] - mu) / sd };
        }
    }
    out
}

/// Ward-linkage agglomeration of the z-scored feature rows, cut at `n_c`.
///
/// The merge cost of clusters `A`, `B` is `|A||B|/(|A|+|B|)·‖c_A − c_B‖²`,
/// computed from centroids at every step. Equal costs resolve to the pair
/// whose lowest member indices are smallest.
pub fn cluster(features: &[FactorFeatures], n_c: usize) -> Result<Clustering> {
    let m = features.len();
    if n_c == 0 || n_c > m {
        return Err(invalid(format!("cluster count {n_c} outside 1..={m}")));
    }
    let rows: Vec<[f64; 5]> = features.iter().map(FactorFeatures::to_array).collect();
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite clustering feature".into()));
    }
    let z = zscore(&rows);
    // Each active cluster: (members ascending, centroid).
    let mut groups: Vec<(Vec<usize>, [f64; 5])> = z.iter().enumerate().map(|(i, r)| (vec![i], *r)).collect();
    while groups.len() > n_c {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                let (na, nb) = (groups[a].0.len() as f64, groups[b].0.len() as f64);
                let d2: f64 = (0..5).map(|k| (groups[a].1[k] - groups[b].1[k]).powi(2)).sum();
                let cost = na * nb / (na + nb) * d2;
                // Groups stay sorted by lowest member, so strict `<` keeps
                // the lexicographically first pair on ties.
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, a, b));
                }
            }
        }
        let (_, a, b) = best.expect("at least two groups remain");
        let (mb, cb) = groups.remove(b);
        let (ma, ca) = &mut groups[a];
        let (na, nb) = (ma.len() as f64, mb.len() as f64);
        for k in 0..5 {
            ca[k] = (na * ca[k] + nb * cb[k]) / (na + nb);
        }
        ma.extend(mb);
        ma.sort_unstable();
    }
    let mut assignment = vec![0; m];
    for (id, (members, _)) in groups.iter().enumerate() {
        for &k in members {
            assignment[k] = id + 1;
        }
    }
    Clustering::from_assignment(assignment)
}

/// Stacked sliding windows of one cluster, row-major `rows × s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub cluster_id: usize,
    pub factors: Vec<usize>,
    pub s: usize,
    pub data: Vec<f64>,
}

impl WindowSet {
    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.s).unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.s..(i + 1) * self.s]
    }
}

/// Every overlapping length-`s` window of every factor, concatenated per
/// cluster in ascending factor order.
pub fn build_training_sets(scaled: &DMatrix<f64>, clustering: &Clustering, s: usize) -> Result<Vec<WindowSet>> {
    let n = scaled.nrows();
    if s == 0 {
        return Err(invalid("window length must be positive"));
    }
    if n < s {
        return Err(Error::InsufficientData { required: s, actual: n });
    }
    if clustering.m() != scaled.ncols() {
        return Err(Error::DimensionMismatch { expected: scaled.ncols(), actual: clustering.m() });
    }
    let per_factor = n - s + 1;
    Ok((1..=clustering.n_clusters())
        .map(|id| {
            let factors = clustering.members(id);
            let mut data = Vec::with_capacity(factors.len() * per_factor * s);
            for &k in &factors {
                let col = scaled.column(k);
                for t in 0..per_factor {
                    data.extend(col.rows(t, s).iter());
                }
            }
            WindowSet { cluster_id: id, factors, s, data }
        })
        .collect())
}
