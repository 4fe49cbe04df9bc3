//! Return panels and their standardized view.
//!
//! Returns are simple daily returns. Standard deviations use the population
//! convention (divisor n) so that `(1/n) X̄ᵀX̄` is exactly the correlation
//! matrix of the panel.

use alloc::string::String;
use alloc::vec::Vec;

use crate::date::Date;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A dated n×d matrix of simple daily returns with ticker labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<Date>,
    tickers: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnsPanel {
    /// Validates and builds a panel. `values` is n×d with rows aligned to
    /// `dates` and columns aligned to `tickers`.
    pub fn new(dates: Vec<Date>, tickers: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if dates.len() < 2 {
            return Err(Error::EmptyPanel("need at least two rows"));
        }
        if tickers.is_empty() {
            return Err(Error::EmptyPanel("need at least one ticker"));
        }
        if values.nrows() != dates.len() {
            return Err(Error::DimensionMismatch { expected: dates.len(), actual: values.nrows() });
        }
        if values.ncols() != tickers.len() {
            return Err(Error::DimensionMismatch { expected: tickers.len(), actual: values.ncols() });
        }
        for row in 1..dates.len() {
            if dates[row] <= dates[row - 1] {
                return Err(Error::DatesNotIncreasing { row });
            }
        }
        for row in 0..values.nrows() {
            for col in 0..values.ncols() {
                if !values[(row, col)].is_finite() {
                    return Err(Error::MissingValue { row, col });
                }
            }
        }
        Ok(Self { dates, tickers, values })
    }

    /// Builds a panel from row-major values.
    pub fn from_rows(dates: Vec<Date>, tickers: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let d = tickers.len();
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: r.len() });
            }
        }
        let values = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(dates, tickers, values)
    }

    /// A panel labelled with consecutive business days from `start` and
    /// tickers `A00, A01, ...`; used for synthetic output.
    pub fn with_synthetic_labels(values: DMatrix<f64>, start: Date) -> Result<Self> {
        let dates = start.business_days(values.nrows());
        let tickers = (0..values.ncols()).map(|j| alloc::format!("A{j:02}")).collect();
        Self::new(dates, tickers, values)
    }

    pub fn dates(&self) -> &[Date] {
        &self.dates
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Same labels, new values of identical shape.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::new(self.dates.clone(), self.tickers.clone(), values)
    }

    /// Rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::EmptyPanel("row range"));
        }
        let values = self.values.rows(start, end - start).into_owned();
        Self::new(self.dates[start..end].to_vec(), self.tickers.clone(), values)
    }

    /// Splits into rows dated `<= boundary` and the remainder.
    pub fn split(&self, boundary: Date) -> Result<(Self, Self)> {
        let cut = self.dates.partition_point(|d| *d <= boundary);
        if cut == 0 || cut == self.n() {
            return Err(Error::EmptyPanel("split boundary leaves one side empty"));
        }
        if cut < 2 || self.n() - cut < 2 {
            return Err(Error::EmptyPanel("split side shorter than two rows"));
        }
        Ok((self.slice_rows(0, cut)?, self.slice_rows(cut, self.n())?))
    }

    /// Daily returns of the equally weighted, daily rebalanced portfolio.
    pub fn equal_weight_returns(&self) -> Vec<f64> {
        let d = self.d() as f64;
        self.values.row_iter().map(|r| r.sum() / d).collect()
    }

    pub fn standardize(&self) -> Result<StandardizedPanel> {
        let n = self.n() as f64;
        let d = self.d();
        let mut mu = DVector::zeros(d);
        let mut sigma = DVector::zeros(d);
        let mut out = self.values.clone();
        for j in 0..d {
            let col = self.values.column(j);
            let m = col.sum() / n;
            let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
            let sd = num_traits::Float::sqrt(var);
            // Relative test: a constant column can leave round-off-sized variance.
            let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if !(sd > 1e-14 * scale) {
                return Err(Error::ZeroVariance { ticker: self.tickers[j].clone() });
            }
            mu[j] = m;
            sigma[j] = sd;
            for i in 0..self.n() {
                out[(i, j)] = (self.values[(i, j)] - m) / sd;
            }
        }
        Ok(StandardizedPanel { base: self.clone(), mu_hat: mu, sigma_hat: sigma, values: out })
    }
}

/// Column-standardized view of a panel, carrying `μ̂` and `σ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    base: ReturnsPanel,
    mu_hat: DVector<f64>,
    sigma_hat: DVector<f64>,
    values: DMatrix<f64>,
}

impl StandardizedPanel {
    pub fn base(&self) -> &ReturnsPanel {
        &self.base
    }

    pub fn mu_hat(&self) -> &DVector<f64> {
        &self.mu_hat
    }

    pub fn sigma_hat(&self) -> &DVector<f64> {
        &self.sigma_hat
    }

    /// The standardized matrix `X̄`.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Maps standardized values back to returns: `x·σ̂ + μ̂` column-wise.
    pub fn destandardize(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        destandardize(values, &self.mu_hat, &self.sigma_hat)
    }
}

pub fn destandardize(values: &DMatrix<f64>, mu: &DVector<f64>, sigma: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| values[(i, j)] * sigma[j] + mu[j])
}
