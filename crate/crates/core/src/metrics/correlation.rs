//! Cross-sectional dependence: sample correlations, distances between
//! correlation matrices, shrinkage and one-factor baselines, and rolling
//! average correlation.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Column-centered copy of `x`.
fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut c = x.clone();
    for mut col in c.column_iter_mut() {
        let m = col.sum() / n;
        col.add_scalar_mut(-m);
    }
    c
}

/// Sample covariance with divisor n.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let c = centered(x);
    let s = c.tr_mul(&c) / x.nrows() as f64;
    (&s + s.transpose()) * 0.5
}

/// Correlation matrix of a covariance matrix; errors on a zero variance.
pub fn cov_to_corr(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    let sd: Vec<f64> = (0..d).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Degenerate(alloc::format!("zero variance in column {i}")));
    }
    let mut c = DMatrix::from_fn(d, d, |i, j| (cov[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0));
    c.fill_diagonal(1.0);
    Ok(c)
}

/// Pearson correlation matrix of the columns of `x`.
pub fn correlation(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov_to_corr(&covariance(x))
}

/// `Σ_{i>j} (A_ij − B_ij)²` over the full strict lower triangle.
pub fn corr_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.nrows() });
    }
    let mut s = 0.0;
    for i in 1..a.nrows() {
        for j in 0..i {
            let diff = a[(i, j)] - b[(i, j)];
            s += diff * diff;
        }
    }
    Ok(s)
}

/// Mean of the strict lower triangle of a correlation matrix.
pub fn mean_offdiag(c: &DMatrix<f64>) -> f64 {
    let d = c.nrows();
    let mut s = 0.0;
    for i in 1..d {
        for j in 0..i {
            s += c[(i, j)];
        }
    }
    s / (d * (d - 1) / 2) as f64
}

/// Equicorrelation matrix at the in-sample mean pairwise correlation.
pub fn one_factor_corr(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() < 2 {
        return Err(invalid("one_factor_corr needs at least two assets"));
    }
    let rho = mean_offdiag(&correlation(x)?);
    Ok(equicorrelation(x.ncols(), rho))
}

pub fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    let mut c = DMatrix::from_element(d, d, rho);
    c.fill_diagonal(1.0);
    c
}

/// Ledoit-Wolf shrinkage toward `(tr S / d)·I` with the optimal intensity
/// estimator of Ledoit and Wolf (2004), using divisor n throughout.
/// Returns the shrunk covariance and the intensity `γ ∈ [0,1]`.
pub fn ledoit_wolf(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let (n, d) = x.shape();
    if n < 2 || d == 0 {
        return Err(Error::InsufficientData { required: 2, actual: n });
    }
    let xc = centered(x);
    let s = xc.tr_mul(&xc) / n as f64;
    let mu = s.trace() / d as f64;
    let mut target_gap = s.clone();
    for i in 0..d {
        target_gap[(i, i)] -= mu;
    }
    let delta2 = target_gap.norm_squared() / d as f64;
    // Σ_k ‖x_k x_kᵀ − S‖²_F = Σ_k (‖x_k‖⁴ − 2 x_kᵀ S x_k) + n‖S‖²_F.
    let s_norm2 = s.norm_squared();
    let xs = &xc * &s;
    let mut acc = 0.0;
    for k in 0..n {
        let r = xc.row(k);
        let sq = r.norm_squared();
        acc += sq * sq - 2.0 * r.dot(&xs.row(k)) + s_norm2;
    }
    let beta_bar2 = acc / (n as f64 * n as f64) / d as f64;
    let gamma = if delta2 > 0.0 { (beta_bar2.min(delta2) / delta2).clamp(0.0, 1.0) } else { 1.0 };
    Ok((shrink(&s, gamma), gamma))
}

/// `(1−γ)S + γ (tr S/d) I` for a given intensity.
pub fn shrink(s: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let d = s.nrows();
    let mu = s.trace() / d as f64;
    let mut out = s * (1.0 - gamma);
    for i in 0..d {
        out[(i, i)] += gamma * mu;
    }
    out
}

/// For every end row `t ≥ window − 1`, the mean pairwise correlation over
/// rows `t − window + 1 ..= t`. Windows with a constant column yield NaN.
pub fn rolling_mean_corr(x: &DMatrix<f64>, window: usize) -> Result<Vec<f64>> {
    let n = x.nrows();
    if window < 2 || window > n {
        return Err(invalid(alloc::format!("rolling window {window} must lie in 2..={n}")));
    }
    if x.ncols() < 2 {
        return Err(invalid("rolling_mean_corr needs at least two assets"));
    }
    let out = (window - 1..n)
        .map(|t| {
            let w = x.rows(t + 1 - window, window).into_owned();
            correlation(&w).map(|c| mean_offdiag(&c)).unwrap_or(f64::NAN)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let a = DMatrix::<f64>::identity(3, 3);
        let mut b = a.clone();
        b[(2, 0)] = 0.5;
        b[(0, 2)] = 0.5;
        assert_eq!(corr_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(corr_distance(&a, &b).unwrap(), 0.25);
        assert!(corr_distance(&a, &DMatrix::identity(2, 2)).is_err());
    }

    #[test]
    fn forced_shrinkage_endpoints() {
        let x = DMatrix::from_row_slice(4, 2, &[0.1, 0.2, -0.1, 0.0, 0.3, -0.2, 0.0, 0.1]);
        let s = covariance(&x);
        assert_eq!(shrink(&s, 0.0), s);
        let full = shrink(&s, 1.0);
        let mu = s.trace() / 2.0;
        assert!((full[(0, 0)] - mu).abs() < 1e-15 && full[(0, 1)] == 0.0);
    }

    #[test]
    fn equicorrelation_mean() {
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.4, 0.2, 1.0, 0.6, 0.4, 0.6, 1.0]);
        assert!((mean_offdiag(&c) - 0.4).abs() < 1e-15);
    }
}
