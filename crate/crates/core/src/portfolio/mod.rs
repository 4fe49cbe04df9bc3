//! Portfolio construction in the principal space, eigenvector perturbation,
//! rank-k Gaussian approximations, and the mean-reversion backtester.

mod backtest;

pub use backtest::{
    backtest_mean_reversion, block_bootstrap, default_h_grid, sharpe_curve, sharpe_profile, Backtest, Legs, SharpeBand,
    SharpeProfile, StrategySpec,
};

use alloc::format;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;
#[allow(unused_imports)]
use num_traits::Float;

const ORTHO_TOL: f64 = 1e-8;

/// `Σ = P Δ Pᵀ + λ_c Q Qᵀ`: `m` retained eigenpairs plus a flat remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedRiskModel {
    p: DMatrix<f64>,
    delta: DVector<f64>,
    q: DMatrix<f64>,
    lambda_c: f64,
}

impl ClippedRiskModel {
    pub fn new(p: DMatrix<f64>, delta: DVector<f64>, q: DMatrix<f64>, lambda_c: f64) -> Result<Self> {
        let d = p.nrows();
        let m = p.ncols();
        if m == 0 || m >= d {
            return Err(invalid(format!("need 1 <= m < d, got m = {m}, d = {d}")));
        }
        if delta.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: delta.len() });
        }
        if q.nrows() != d || q.ncols() != d - m {
            return Err(Error::DimensionMismatch { expected: d - m, actual: q.ncols() });
        }
        if !(lambda_c > 0.0) || !lambda_c.is_finite() {
            return Err(invalid("clipped level must be positive"));
        }
        if delta.iter().any(|l| !(*l > lambda_c) || !l.is_finite()) {
            return Err(invalid("retained eigenvalues must exceed the clipped level"));
        }
        let mut basis = DMatrix::zeros(d, d);
        basis.columns_mut(0, m).copy_from(&p);
        basis.columns_mut(m, d - m).copy_from(&q);
        let gram = basis.transpose() * &basis;
        if linalg::max_abs_diff(&gram, &DMatrix::identity(d, d)) > ORTHO_TOL {
            return Err(invalid("[P, Q] is not orthogonal"));
        }
        Ok(Self { p, delta, q, lambda_c })
    }

    /// Eigenvalue clipping of `sigma`: keep the top `m` eigenpairs and
    /// replace the rest by their mean, which preserves the trace.
    pub fn from_covariance(sigma: &DMatrix<f64>, m: usize) -> Result<Self> {
        let d = sigma.nrows();
        if m == 0 || m >= d {
            return Err(invalid(format!("need 1 <= m < d, got m = {m}, d = {d}")));
        }
        let e = linalg::sym_eigen(sigma)?;
        let kept: f64 = e.values.rows(0, m).sum();
        let lambda_c = (sigma.trace() - kept) / (d - m) as f64;
        Self::new(
            e.vectors.columns(0, m).into_owned(),
            e.values.rows(0, m).into_owned(),
            e.vectors.columns(m, d - m).into_owned(),
            lambda_c,
        )
    }

    pub fn d(&self) -> usize {
        self.p.nrows()
    }

    pub fn m(&self) -> usize {
        self.p.ncols()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn lambda_c(&self) -> f64 {
        self.lambda_c
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let pd = &self.p * DMatrix::from_diagonal(&self.delta);
        &pd * self.p.transpose() + &self.q * self.q.transpose() * self.lambda_c
    }

    /// Coordinates `(y_P, y_Q)` of `x` in the eigenbasis.
    pub fn coordinates(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (self.p.tr_mul(x), self.q.tr_mul(x))
    }

    /// Weights from principal-space coordinates.
    pub fn weights(&self, v_p: &DVector<f64>, v_q: &DVector<f64>) -> DVector<f64> {
        &self.p * v_p + &self.q * v_q
    }

    /// `Σ⁻¹ z` through the eigenbasis, without forming a dense inverse.
    pub fn inverse_apply(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), actual: z.len() });
        }
        let (mut yp, yq) = self.coordinates(z);
        for (y, l) in yp.iter_mut().zip(self.delta.iter()) {
            *y *= self.lambda_c / l;
        }
        Ok((&self.p * yp + &self.q * yq) / self.lambda_c)
    }

    /// Weights maximizing `μᵀw` subject to `wᵀΣw ≤ s²`.
    pub fn markowitz(&self, mu: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
        if mu.len() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), actual: mu.len() });
        }
        let (yp, yq) = self.coordinates(mu);
        let sol = markowitz_principal(&yp, &yq, &self.delta, self.lambda_c, s)?;
        Ok(self.weights(&sol.v_p, &sol.v_q))
    }
}

/// Output of [`markowitz_principal`].
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalSolution {
    pub v_p: DVector<f64>,
    pub v_q: DVector<f64>,
    pub gamma: f64,
}

impl PrincipalSolution {
    /// `v_Pᵀ Δ v_P + λ_c ‖v_Q‖²`.
    pub fn risk(&self, delta: &DVector<f64>, lambda_c: f64) -> f64 {
        let rp: f64 = self.v_p.iter().zip(delta.iter()).map(|(v, l)| l * v * v).sum();
        rp + lambda_c * self.v_q.norm_squared()
    }
}

/// Closed-form Markowitz solution in principal coordinates.
pub fn markowitz_principal(
    y_p: &DVector<f64>,
    y_q: &DVector<f64>,
    delta: &DVector<f64>,
    lambda_c: f64,
    s: f64,
) -> Result<PrincipalSolution> {
    if !(s > 0.0) {
        return Err(invalid("target volatility must be positive"));
    }
    if !(lambda_c > 0.0) || delta.iter().any(|l| !(*l > 0.0)) {
        return Err(invalid("eigenvalues must be positive"));
    }
    if delta.len() != y_p.len() {
        return Err(Error::DimensionMismatch { expected: delta.len(), actual: y_p.len() });
    }
    let quad: f64 = y_p.iter().zip(delta.iter()).map(|(y, l)| y * y / l).sum::<f64>() + y_q.norm_squared() / lambda_c;
    if !(quad > 0.0) {
        return Err(invalid("expected returns are zero"));
    }
    let gamma = quad.sqrt() / s;
    let v_p = y_p.zip_map(delta, |y, l| y / l / gamma);
    let v_q = y_q / (gamma * lambda_c);
    Ok(PrincipalSolution { v_p, v_q, gamma })
}

fn check_perturbation(model: &ClippedRiskModel, k: usize) -> Result<()> {
    if k == 0 || k >= model.m() {
        return Err(invalid(format!(
            "perturbed eigenvector index must be in 1..{} (0 is the rotation partner), got {k}",
            model.m()
        )));
    }
    Ok(())
}

/// `Σ̃₍ₖ₎`: eigenvector `k` rotated by `ε` towards the leading eigenvector,
/// which is counter-rotated to stay orthogonal. `k` is 0-based and must
/// satisfy `1 <= k < m`.
pub fn perturbed_covariance(model: &ClippedRiskModel, k: usize, epsilon: f64) -> Result<DMatrix<f64>> {
    check_perturbation(model, k)?;
    let (s, c) = epsilon.sin_cos();
    let p1 = model.p.column(0).into_owned();
    let pk = model.p.column(k).into_owned();
    let mut p = model.p.clone();
    p.set_column(0, &(&p1 * c - &pk * s));
    p.set_column(k, &(&pk * c + &p1 * s));
    let rotated = ClippedRiskModel { p, ..model.clone() };
    Ok(rotated.covariance())
}

/// `‖Σ̃₍ₖ₎⁻¹z − Σ⁻¹z‖²` in closed form.
pub fn perturbation_error(model: &ClippedRiskModel, k: usize, epsilon: f64, z: &DVector<f64>) -> Result<f64> {
    check_perturbation(model, k)?;
    if z.len() != model.d() {
        return Err(Error::DimensionMismatch { expected: model.d(), actual: z.len() });
    }
    let zk = model.p.column(k).dot(z);
    let z1 = model.p.column(0).dot(z);
    let coef = 1.0 / model.delta[0] - 1.0 / model.delta[k];
    let s = epsilon.sin();
    Ok(coef * coef * s * s * (zk * zk + z1 * z1))
}

/// Same quantity by building both covariances and inverting them densely.
pub fn perturbation_error_dense(model: &ClippedRiskModel, k: usize, epsilon: f64, z: &DVector<f64>) -> Result<f64> {
    let tilde = linalg::inverse(&perturbed_covariance(model, k, epsilon)?)?;
    let base = linalg::inverse(&model.covariance())?;
    Ok((tilde * z - base * z).norm_squared())
}

/// Keeps the top `k` eigenpairs of `sigma` and zeroes the rest: the
/// covariance of the best linear rank-`k` Gaussian generator in W2.
pub fn w2_optimal_rank_k(sigma: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let d = sigma.nrows();
    if k == 0 || k > d {
        return Err(invalid(format!("rank must be in 1..={d}, got {k}")));
    }
    if k == d {
        return Ok(sigma.clone());
    }
    let e = linalg::sym_eigen(sigma)?;
    let v = e.vectors.columns(0, k);
    let l = DMatrix::from_diagonal(&e.values.rows(0, k).into_owned());
    Ok(v * l * v.transpose())
}

/// `W2²(N(0, A), N(0, B)) = tr A + tr B − 2 tr (A^½ B A^½)^½`.
pub fn gaussian_w2_squared(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), actual: b.nrows() });
    }
    let ra = linalg::psd_sqrt(a)?;
    let cross = linalg::psd_sqrt(&(&ra * b * &ra))?;
    Ok((a.trace() + b.trace() - 2.0 * cross.trace()).max(0.0))
}

/// Example where errors on a low-variance factor dominate: returns
/// `(model, μ)` with `λ₂ = 10 λ_m` and equal principal coordinates.
pub fn low_variance_demo() -> (ClippedRiskModel, DVector<f64>) {
    let d = 8;
    let m = 5;
    let basis = DMatrix::<f64>::identity(d, d);
    let delta = DVector::from_vec(alloc::vec![20.0, 10.0, 4.0, 2.0, 1.0]);
    let model =
        ClippedRiskModel::new(basis.columns(0, m).into_owned(), delta, basis.columns(m, d - m).into_owned(), 0.5)
            .expect("demo model is valid");
    let mu = DVector::from_element(d, 1.0);
    (model, mu)
}
