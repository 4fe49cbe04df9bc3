//! Two-component Student-t mixtures for residual returns.
//!
//! Component density (location `μ`, scale `s`, degrees of freedom `ν`):
//! `Γ((ν+1)/2) / (Γ(ν/2) √(νπ) s) · (1 + ((x−μ)/s)²/ν)^(−(ν+1)/2)`.
//! `ν = ∞` is the Gaussian limit and serializes as `null`.
//!
//! Fitting uses EM on the scale-mixture representation of the t law. The
//! degrees of freedom are updated inside the M-step by solving the usual
//! score equation, restricted to `[NU_MIN, NU_MAX]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
use crate::special::{digamma, student_t_cdf, student_t_ln_pdf};
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

/// Smallest admissible degrees of freedom (the law needs `ν > 1`).
pub const NU_MIN: f64 = 1.001;
/// Largest finite degrees of freedom; beyond it a component is Gaussian for
/// all practical purposes.
pub const NU_MAX: f64 = 200.0;

/// One Student-t component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mu: f64,
    pub s: f64,
    #[serde(with = "nu_serde")]
    pub nu: f64,
}

mod nu_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(nu: &f64, s: S) -> Result<S::Ok, S::Error> {
        if nu.is_infinite() {
            s.serialize_none()
        } else {
            s.serialize_some(nu)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Component {
    pub fn new(mu: f64, s: f64, nu: f64) -> Self {
        Self { mu, s, nu }
    }

    pub fn gaussian(mu: f64, s: f64) -> Self {
        Self { mu, s, nu: f64::INFINITY }
    }

    fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || !(self.s > 0.0) || !self.s.is_finite() || !(self.nu > 1.0) {
            return Err(invalid(alloc::format!("invalid t component (mu={}, s={}, nu={})", self.mu, self.s, self.nu)));
        }
        Ok(())
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        student_t_ln_pdf((x - self.mu) / self.s, self.nu) - self.s.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        student_t_cdf((x - self.mu) / self.s, self.nu)
    }
}

/// `θ = (p, μ₁, s₁, ν₁, μ₂, s₂, ν₂)`: density `p·f(x|θ₁) + (1−p)·f(x|θ₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub p: f64,
    pub c1: Component,
    pub c2: Component,
}

impl MixtureParams {
    pub fn new(p: f64, c1: Component, c2: Component) -> Result<Self> {
        let m = Self { p, c1, c2 };
        m.validate()?;
        Ok(m)
    }

    /// A single component (`p = 1`; the second slot mirrors the first).
    pub fn single(c: Component) -> Result<Self> {
        Self::new(1.0, c, c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(alloc::format!("mixture weight {} outside [0,1]", self.p)));
        }
        self.c1.validate()?;
        self.c2.validate()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let a = if self.p > 0.0 { self.p.ln() + self.c1.ln_pdf(x) } else { f64::NEG_INFINITY };
        let b = if self.p < 1.0 { (1.0 - self.p).ln() + self.c2.ln_pdf(x) } else { f64::NEG_INFINITY };
        log_add(a, b)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let mut f = 0.0;
        if self.p > 0.0 {
            f += self.p * self.c1.cdf(x);
        }
        if self.p < 1.0 {
            f += (1.0 - self.p) * self.c2.cdf(x);
        }
        f
    }

    pub fn mean_log_likelihood(&self, xs: &[f64]) -> f64 {
        xs.iter().map(|&x| self.ln_pdf(x)).sum::<f64>() / xs.len() as f64
    }

    /// Quantile function: the root of `F(x) = u`, by bracket expansion and
    /// Newton steps safeguarded with bisection. Stops once
    /// `|F(x) − u| ≤ 1e-12` or the bracket reaches machine resolution.
    pub fn inverse_cdf(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(invalid(alloc::format!("inverse_cdf needs u in (0,1), got {u}")));
        }
        const TOL: f64 = 1e-12;
        let comps: &[Component] = if self.p >= 1.0 {
            core::slice::from_ref(&self.c1)
        } else if self.p <= 0.0 {
            core::slice::from_ref(&self.c2)
        } else {
            &[self.c1, self.c2][..]
        };
        if comps.len() == 1 && (u - 0.5).abs() < f64::EPSILON / 4.0 {
            return Ok(comps[0].mu);
        }
        let scale = comps.iter().map(|c| c.s).fold(0.0, f64::max);
        let mut lo = comps.iter().map(|c| c.mu - c.s).fold(f64::INFINITY, f64::min);
        let mut hi = comps.iter().map(|c| c.mu + c.s).fold(f64::NEG_INFINITY, f64::max);
        let mut step = scale;
        while self.cdf(lo) > u {
            lo -= step;
            step *= 2.0;
            if !lo.is_finite() {
                return Err(Error::Degenerate("inverse_cdf bracket diverged".into()));
            }
        }
        step = scale;
        while self.cdf(hi) < u {
            hi += step;
            step *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Degenerate("inverse_cdf bracket diverged".into()));
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..400 {
            let f = self.cdf(x) - u;
            if f.abs() <= TOL {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Ok(x);
            }
            let dens = self.pdf(x);
            let newton = x - f / dens;
            x = if dens > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        Ok(x)
    }

    /// One draw through the quantile function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng::open_unit(rng);
        self.inverse_cdf(u).expect("open-interval uniform")
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    TwoT,
    SingleT,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub mode: FitMode,
    pub max_iter: usize,
    /// Stop when the mean log-likelihood per observation gains less.
    pub tol: f64,
    /// Extra random starts for the two-component fit.
    pub restarts: usize,
    pub seed: u64,
    pub min_n: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { mode: FitMode::SingleT, max_iter: 500, tol: 1e-8, restarts: 5, seed: 0, min_n: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: MixtureParams,
    /// Mean log-likelihood per observation at every iterate, starting with
    /// the initial parameters.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace is never empty")
    }
}

/// Fits a mixture to one column of residuals.
pub fn fit_em(xs: &[f64], opts: &FitOptions) -> Result<FitReport> {
    if xs.len() < opts.min_n.max(2) {
        return Err(Error::InsufficientData { required: opts.min_n.max(2), actual: xs.len() });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite residual".into()));
    }
    let sd = stats::std_dev(xs);
    if stats::negligible_spread(sd * sd * xs.len() as f64, xs) {
        return Err(Error::Degenerate("zero-variance residual column".into()));
    }
    let mean = stats::mean(xs);
    match opts.mode {
        FitMode::Gaussian => {
            let params = MixtureParams::single(Component::gaussian(mean, sd))?;
            let ll = params.mean_log_likelihood(xs);
            Ok(FitReport { params, loglik_trace: vec![ll], iterations: 0, converged: true })
        }
        FitMode::SingleT => {
            let kurt = stats::excess_kurtosis(xs);
            let nu = if kurt > 0.0 { (4.0 + 6.0 / kurt).clamp(2.5, NU_MAX) } else { 30.0 };
            let s = sd * ((nu - 2.0) / nu).sqrt();
            let init = Component::new(stats::median(xs), s, nu);
            Ok(run_em(xs, [1.0, 0.0], [init, init], 1, opts, sd))
        }
        FitMode::TwoT => {
            let (w0, c0) = kmeans_init(xs, sd);
            let mut best = run_em(xs, w0, c0, 2, opts, sd);
            let sorted = stats::sorted(xs);
            let mut r = rng::stream(opts.seed, 0x6d69_7874);
            for _ in 0..opts.restarts {
                let p = 0.2 + 0.6 * rng::open_unit(&mut r);
                let q1 = stats::nearest_rank(&sorted, rng::open_unit(&mut r));
                let q2 = stats::nearest_rank(&sorted, rng::open_unit(&mut r));
                let s1 = sd * (0.3 + 0.7 * rng::open_unit(&mut r));
                let s2 = sd * (0.3 + 0.7 * rng::open_unit(&mut r));
                let nu1 = 3.0 + 27.0 * rng::open_unit(&mut r);
                let nu2 = 3.0 + 27.0 * rng::open_unit(&mut r);
                let cand =
                    run_em(xs, [p, 1.0 - p], [Component::new(q1, s1, nu1), Component::new(q2, s2, nu2)], 2, opts, sd);
                if cand.final_loglik() > best.final_loglik() {
                    best = cand;
                }
            }
            Ok(best)
        }
    }
}

/// Best two-group split of the sorted sample (exact 1-D 2-means), turned
/// into starting components with `ν = 10`.
fn kmeans_init(xs: &[f64], sd: f64) -> ([f64; 2], [Component; 2]) {
    let s = stats::sorted(xs);
    let n = s.len();
    let total: f64 = s.iter().sum();
    let total2: f64 = s.iter().map(|x| x * x).sum();
    let (mut left, mut left2) = (0.0, 0.0);
    let mut best = (f64::INFINITY, 1);
    for k in 1..n {
        left += s[k - 1];
        left2 += s[k - 1] * s[k - 1];
        let (nl, nr) = (k as f64, (n - k) as f64);
        let right = total - left;
        let right2 = total2 - left2;
        let sse = (left2 - left * left / nl) + (right2 - right * right / nr);
        if sse < best.0 {
            best = (sse, k);
        }
    }
    let k = best.1;
    let floor = 1e-3 * sd;
    let (a, b) = s.split_at(k);
    let ca = Component::new(stats::mean(a), stats::std_dev(a).max(floor), 10.0);
    let cb = Component::new(stats::mean(b), stats::std_dev(b).max(floor), 10.0);
    let p = k as f64 / n as f64;
    ([p, 1.0 - p], [ca, cb])
}

/// Solves `ln(ν/2) − ψ(ν/2) = target` on `[NU_MIN, NU_MAX]`; the left side
/// is decreasing in `ν`, so out-of-range targets clamp to an endpoint.
fn solve_nu(target: f64) -> f64 {
    let h = |nu: f64| (0.5 * nu).ln() - digamma(0.5 * nu);
    if target >= h(NU_MIN) {
        return NU_MIN;
    }
    if target <= h(NU_MAX) {
        return NU_MAX;
    }
    let (mut lo, mut hi) = (NU_MIN.ln(), NU_MAX.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    (0.5 * (lo + hi)).exp()
}

fn run_em(xs: &[f64], w0: [f64; 2], c0: [Component; 2], k: usize, opts: &FitOptions, sd: f64) -> FitReport {
    let n = xs.len();
    let nf = n as f64;
    let s_floor = 1e-6 * sd;
    const W_FLOOR: f64 = 1e-6;
    let mut w = w0;
    let mut c = c0;
    let mut resp = vec![[0.0f64; 2]; n];
    let estep = |w: &[f64; 2], c: &[Component; 2], resp: &mut [[f64; 2]]| -> f64 {
        let mut ll = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            if k == 1 {
                resp[i] = [1.0, 0.0];
                ll += c[0].ln_pdf(x);
                continue;
            }
            let a = w[0].ln() + c[0].ln_pdf(x);
            let b = w[1].ln() + c[1].ln_pdf(x);
            let t = log_add(a, b);
            resp[i] = [(a - t).exp(), (b - t).exp()];
            ll += t;
        }
        ll / nf
    };
    let mut trace = vec![estep(&w, &c, &mut resp)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut new_c = c;
        let mut new_w = w;
        for j in 0..k {
            let cj = c[j];
            let mut nj = 0.0;
            let (mut swu, mut swux) = (0.0, 0.0);
            let mut slog = 0.0;
            let mut us = Vec::with_capacity(n);
            for (i, &x) in xs.iter().enumerate() {
                let t = resp[i][j];
                let z = (x - cj.mu) / cj.s;
                let u = if cj.nu.is_infinite() { 1.0 } else { (cj.nu + 1.0) / (cj.nu + z * z) };
                us.push(u);
                nj += t;
                swu += t * u;
                swux += t * u * x;
                if cj.nu.is_finite() {
                    slog += t * (u.ln() - u);
                }
            }
            if !(nj > 0.0) || !(swu > 0.0) {
                continue;
            }
            let mu = swux / swu;
            let ss: f64 =
                xs.iter().zip(&us).enumerate().map(|(i, (&x, &u))| resp[i][j] * u * (x - mu) * (x - mu)).sum();
            let s = (ss / nj).sqrt().max(s_floor);
            let nu = if cj.nu.is_finite() {
                let half = 0.5 * (cj.nu + 1.0);
                let cst = 1.0 + slog / nj + digamma(half) - half.ln();
                solve_nu(-cst)
            } else {
                f64::INFINITY
            };
            new_c[j] = Component::new(mu, s, nu);
            if k == 2 {
                new_w[j] = (nj / nf).clamp(W_FLOOR, 1.0 - W_FLOOR);
            }
        }
        if k == 2 {
            let tot = new_w[0] + new_w[1];
            new_w = [new_w[0] / tot, new_w[1] / tot];
        }
        w = new_w;
        c = new_c;
        let ll = estep(&w, &c, &mut resp);
        let gain = ll - trace[trace.len() - 1];
        trace.push(ll);
        if gain.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let params = if k == 1 {
        MixtureParams { p: 1.0, c1: c[0], c2: c[0] }
    } else {
        MixtureParams { p: w[0], c1: c[0], c2: c[1] }
    };
    FitReport { params, loglik_trace: trace, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_at_zero() {
        let m = MixtureParams::single(Component::new(0.0, 1.0, 1.0 + 1e-12)).unwrap();
        assert!((m.pdf(0.0) - 1.0 / core::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn median_is_location() {
        let m = MixtureParams::single(Component::new(3.0, 2.0, 4.0)).unwrap();
        assert_eq!(m.inverse_cdf(0.5).unwrap(), 3.0);
        assert!(m.inverse_cdf(0.0).is_err());
        assert!(m.inverse_cdf(1.0).is_err());
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(MixtureParams::new(1.2, Component::new(0.0, 1.0, 3.0), Component::new(0.0, 1.0, 3.0)).is_err());
        assert!(MixtureParams::single(Component::new(0.0, 0.0, 3.0)).is_err());
        assert!(MixtureParams::single(Component::new(0.0, 1.0, 0.5)).is_err());
    }

    #[test]
    fn nu_solver_inverts_score_function() {
        for &nu in &[1.5, 4.0, 17.0, 150.0] {
            let target = (0.5 * nu).ln() - digamma(0.5 * nu);
            assert!((solve_nu(target) - nu).abs() < 1e-9 * nu);
        }
        assert_eq!(solve_nu(1e-9), NU_MAX);
    }

    #[test]
    fn gaussian_nu_serializes_as_null() {
        let c = Component::gaussian(0.0, 1.0);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(json, r#"{"mu":0.0,"s":1.0,"nu":null}"#);
        let back: Component = serde_json::from_str(&json).unwrap();
        assert!(back.nu.is_infinite());
    }
}
