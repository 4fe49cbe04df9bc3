//! Spectral factor model on the correlation matrix of a standardized panel.
//!
//! Eigenvalues above the Marchenko-Pastur upper edge are treated as factors;
//! the rest of the spectrum is the idiosyncratic residual.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::sym_eigen;
use crate::panel::StandardizedPanel;
#[allow(unused_imports)]
use num_traits::Float;

/// `Σ̂ = (1/n) X̄ᵀX̄`, symmetrized.
pub fn correlation_matrix(std_panel: &StandardizedPanel) -> DMatrix<f64> {
    let x = std_panel.values();
    let n = x.nrows() as f64;
    let c = x.tr_mul(x) / n;
    (&c + c.transpose()) * 0.5
}

/// Upper edge `λ₊ = σ²(1 + √(d/n))²`; requires `n ≥ d`.
pub fn mp_edge(n: usize, d: usize, sigma2: f64) -> Result<f64> {
    if d == 0 || n < d {
        return Err(invalid(alloc::format!("mp_edge needs n >= d >= 1, got n={n}, d={d}")));
    }
    if !(sigma2 > 0.0) {
        return Err(invalid("mp_edge needs sigma2 > 0"));
    }
    let r = (d as f64 / n as f64).sqrt();
    Ok(sigma2 * (1.0 + r) * (1.0 + r))
}

/// Marchenko-Pastur density at `x` for aspect ratio `q = n/d ≥ 1`; zero
/// outside `[λ₋, λ₊]`.
pub fn mp_density(x: f64, q: f64, sigma2: f64) -> f64 {
    let r = (1.0 / q).sqrt();
    let lo = sigma2 * (1.0 - r) * (1.0 - r);
    let hi = sigma2 * (1.0 + r) * (1.0 + r);
    if x <= lo || x >= hi || x <= 0.0 {
        return 0.0;
    }
    q / (2.0 * core::f64::consts::PI * sigma2) * ((hi - x) * (x - lo)).sqrt() / x
}

/// Number of eigenvalues strictly above `lambda_plus` (input sorted descending).
pub fn select_m(eigvals: &[f64], lambda_plus: f64) -> Result<usize> {
    let m = eigvals.iter().take_while(|&&l| l > lambda_plus).count();
    if m == 0 {
        return Err(Error::NoFactorAboveEdge { lambda_plus });
    }
    Ok(m)
}

/// How the factor count is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum FactorCount {
    /// Eigenvalues above the MP edge for the given noise variance.
    MarchenkoPastur {
        sigma2: f64,
    },
    Fixed {
        m: usize,
    },
}

impl Default for FactorCount {
    fn default() -> Self {
        FactorCount::MarchenkoPastur { sigma2: 1.0 }
    }
}

/// Eigenstructure of the training correlation matrix plus the per-asset
/// moments needed to map back to returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "FactorModelRepr", try_from = "FactorModelRepr")]
pub struct FactorModel {
    tickers: Vec<String>,
    /// Columns are eigenvectors sorted by descending eigenvalue.
    eigvecs: DMatrix<f64>,
    eigvals: DVector<f64>,
    m: usize,
    mu_hat: DVector<f64>,
    sigma_hat: DVector<f64>,
    lambda_plus: Option<f64>,
    n_train: usize,
}

impl FactorModel {
    pub fn fit(std_panel: &StandardizedPanel, count: FactorCount) -> Result<Self> {
        let c = correlation_matrix(std_panel);
        let eig = sym_eigen(&c)?;
        let n = std_panel.values().nrows();
        let d = std_panel.values().ncols();
        let vals: Vec<f64> = eig.values.iter().copied().collect();
        let (m, lambda_plus) = match count {
            FactorCount::MarchenkoPastur { sigma2 } => {
                let lp = mp_edge(n, d, sigma2)?;
                (select_m(&vals, lp)?, Some(lp))
            }
            FactorCount::Fixed { m } => {
                if m == 0 || m > d {
                    return Err(invalid(alloc::format!("factor count {m} outside 1..={d}")));
                }
                (m, mp_edge(n, d, 1.0).ok())
            }
        };
        Ok(Self {
            tickers: std_panel.base().tickers().to_vec(),
            eigvecs: eig.vectors,
            eigvals: eig.values,
            m,
            mu_hat: std_panel.mu_hat().clone(),
            sigma_hat: std_panel.sigma_hat().clone(),
            lambda_plus,
            n_train: n,
        })
    }

    /// Assembles a model from its parts (used by tests and deserialization).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tickers: Vec<String>,
        eigvecs: DMatrix<f64>,
        eigvals: DVector<f64>,
        m: usize,
        mu_hat: DVector<f64>,
        sigma_hat: DVector<f64>,
        lambda_plus: Option<f64>,
        n_train: usize,
    ) -> Result<Self> {
        let d = tickers.len();
        if eigvecs.nrows() != d || eigvecs.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: eigvecs.nrows() });
        }
        for len in [eigvals.len(), mu_hat.len(), sigma_hat.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, actual: len });
            }
        }
        if m == 0 || m > d {
            return Err(invalid(alloc::format!("factor count {m} outside 1..={d}")));
        }
        Ok(Self { tickers, eigvecs, eigvals, m, mu_hat, sigma_hat, lambda_plus, n_train })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn d(&self) -> usize {
        self.tickers.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Factor loadings `β̂ = P₁:ₘ` (d×m).
    pub fn beta(&self) -> DMatrix<f64> {
        self.eigvecs.columns(0, self.m).into_owned()
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn sigma_hat(&self) -> &DVector<f64> {
        &self.sigma_hat
    }

    pub fn lambda_plus(&self) -> Option<f64> {
        self.lambda_plus
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    /// Share of total variance carried by the factors, `Σᵢ≤ₘ λᵢ / Σλᵢ`.
    pub fn explained_variance(&self) -> f64 {
        self.eigvals.rows(0, self.m).sum() / self.eigvals.sum()
    }

    /// `F = X̄P₁:ₘ`, `Z = X̄ − FP₁:ₘᵀ`.
    pub fn decompose(&self, std_panel: &StandardizedPanel) -> Result<Decomposition> {
        let x = std_panel.values();
        if x.ncols() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), actual: x.ncols() });
        }
        let beta = self.beta();
        let factors = x * &beta;
        let residuals = x - &factors * beta.transpose();
        Ok(Decomposition { factors, residuals })
    }
}

/// Factor returns `F` (n×m) and residuals `Z` (n×d).
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub factors: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
}

const FACTOR_MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FactorModelRepr {
    version: u32,
    tickers: Vec<String>,
    n_train: usize,
    m: usize,
    lambda_plus: Option<f64>,
    eigvals: Vec<f64>,
    /// Row-major d×d.
    eigvecs: Vec<f64>,
    mu_hat: Vec<f64>,
    sigma_hat: Vec<f64>,
}

impl From<FactorModel> for FactorModelRepr {
    fn from(f: FactorModel) -> Self {
        let d = f.d();
        let mut eigvecs = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                eigvecs.push(f.eigvecs[(i, j)]);
            }
        }
        Self {
            version: FACTOR_MODEL_VERSION,
            tickers: f.tickers,
            n_train: f.n_train,
            m: f.m,
            lambda_plus: f.lambda_plus,
            eigvals: f.eigvals.iter().copied().collect(),
            eigvecs,
            mu_hat: f.mu_hat.iter().copied().collect(),
            sigma_hat: f.sigma_hat.iter().copied().collect(),
        }
    }
}

impl TryFrom<FactorModelRepr> for FactorModel {
    type Error = Error;

    fn try_from(r: FactorModelRepr) -> Result<Self> {
        if r.version != FACTOR_MODEL_VERSION {
            return Err(invalid(alloc::format!("unsupported factor model version {}", r.version)));
        }
        let d = r.tickers.len();
        if r.eigvecs.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: r.eigvecs.len() });
        }
        FactorModel::from_parts(
            r.tickers,
            DMatrix::from_row_slice(d, d, &r.eigvecs),
            DVector::from_vec(r.eigvals),
            r.m,
            DVector::from_vec(r.mu_hat),
            DVector::from_vec(r.sigma_hat),
            r.lambda_plus,
            r.n_train,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::Date;
    use crate::panel::ReturnsPanel;
    use alloc::vec;

    fn std_panel(cols: &[Vec<f64>]) -> StandardizedPanel {
        let n = cols[0].len();
        let tickers = (0..cols.len()).map(|j| alloc::format!("T{j}")).collect();
        let values = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
        let dates = Date::new(2020, 1, 1).unwrap().business_days(n);
        ReturnsPanel::new(dates, tickers, values).unwrap().standardize().unwrap()
    }

    #[test]
    fn mp_edge_values() {
        assert!((mp_edge(3020, 433, 1.0).unwrap() - 1.9010).abs() < 5e-4);
        assert_eq!(mp_edge(10, 10, 1.0).unwrap(), 4.0);
        assert_eq!(mp_edge(40, 10, 1.0).unwrap(), 2.25);
        assert!(mp_edge(9, 10, 1.0).is_err());
    }

    #[test]
    fn select_m_counts_strictly_above() {
        assert_eq!(select_m(&[5.0, 2.0, 0.5], 1.9), Ok(2));
        assert_eq!(select_m(&[1.9, 0.1], 1.9), Err(Error::NoFactorAboveEdge { lambda_plus: 1.9 }));
    }

    #[test]
    fn correlation_signs() {
        let a = vec![0.1, -0.2, 0.3, 0.05];
        let neg: Vec<f64> = a.iter().map(|x| -3.0 * x).collect();
        let c = correlation_matrix(&std_panel(&[a.clone(), a.clone(), neg]));
        assert!((c[(0, 1)] - 1.0).abs() < 1e-12);
        assert!((c[(0, 2)] + 1.0).abs() < 1e-12);
        assert!((c[(2, 2)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn full_rank_decomposition_has_zero_residual() {
        let cols = vec![
            vec![0.1, -0.2, 0.3, 0.05, 0.0, -0.1],
            vec![0.2, 0.1, -0.3, 0.15, 0.02, -0.2],
            vec![-0.1, 0.0, 0.1, 0.2, -0.3, 0.05],
        ];
        let sp = std_panel(&cols);
        let model = FactorModel::fit(&sp, FactorCount::Fixed { m: 3 }).unwrap();
        let dec = model.decompose(&sp).unwrap();
        assert!(dec.residuals.amax() < 1e-10);
        for i in 0..3 {
            let col: Vec<f64> = dec.factors.column(i).iter().copied().collect();
            assert!((crate::stats::variance(&col) - model.eigvals()[i]).abs() < 1e-8);
        }
    }
}
