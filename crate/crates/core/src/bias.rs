//! Coverage of a true statistic by U-statistics computed on synthetic
//! samples: the normal bracket with its Berry-Esseen style envelope, and a
//! Monte Carlo estimate under explicit laws.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng;
use crate::special::normal_cdf;
use crate::stats;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `f(x) = x`.
    Mean,
    /// `f(x₁, x₂) = (x₁ − x₂)²/2`.
    Variance,
}

impl Kernel {
    pub fn order(self) -> usize {
        match self {
            Kernel::Mean => 1,
            Kernel::Variance => 2,
        }
    }

    /// The kernel on one tuple of length `order()`.
    pub fn eval(self, tuple: &[f64]) -> f64 {
        match self {
            Kernel::Mean => tuple[0],
            Kernel::Variance => 0.5 * (tuple[0] - tuple[1]) * (tuple[0] - tuple[1]),
        }
    }
}

/// The U-statistic of `kernel` on `xs`, in closed form. Needs more than
/// `order()` points.
pub fn u_statistic(kernel: Kernel, xs: &[f64]) -> Result<f64> {
    if xs.len() <= kernel.order() {
        return Err(invalid(format!("U-statistic of order {} needs more points", kernel.order())));
    }
    let n = xs.len() as f64;
    Ok(match kernel {
        Kernel::Mean => stats::mean(xs),
        Kernel::Variance => stats::variance(xs) * n / (n - 1.0),
    })
}

/// Jackknife estimate of the first-projection sd `σ₁`, from
/// `Var(U) ≈ r²σ₁²/n`.
pub fn jackknife_sigma1(kernel: Kernel, xs: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n <= kernel.order() + 1 {
        return Err(invalid("jackknife needs at least order + 2 points"));
    }
    let mut buf = Vec::with_capacity(n - 1);
    let mut leave_out = Vec::with_capacity(n);
    for i in 0..n {
        buf.clear();
        buf.extend(xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x));
        leave_out.push(u_statistic(kernel, &buf)?);
    }
    let var_u = stats::variance(&leave_out) * (n - 1) as f64;
    Ok((var_u * n as f64).sqrt() / kernel.order() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UStatSpec {
    pub kernel: Kernel,
    pub sigma1: f64,
    /// Moment order in (2, 3].
    pub beta: f64,
    /// Envelope constant; not calibrated.
    pub c_hat: f64,
}

impl UStatSpec {
    pub fn new(kernel: Kernel, sigma1: f64, beta: f64, c_hat: f64) -> Result<Self> {
        let s = Self { kernel, sigma1, beta, c_hat };
        s.validate()?;
        Ok(s)
    }

    /// `σ₁` in closed form for a normal law with standard deviation `sd`,
    /// `β = 3`, `ĉ = 1`.
    pub fn normal(kernel: Kernel, sd: f64) -> Result<Self> {
        let sigma1 = match kernel {
            Kernel::Mean => sd,
            Kernel::Variance => sd * sd / 2f64.sqrt(),
        };
        Self::new(kernel, sigma1, 3.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 0.0) || !self.sigma1.is_finite() {
            return Err(invalid("sigma1 must be positive"));
        }
        if !(self.beta > 2.0 && self.beta <= 3.0) {
            return Err(invalid("beta must lie in (2, 3]"));
        }
        if !(self.c_hat > 0.0) {
            return Err(invalid("c_hat must be positive"));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.kernel.order() as f64 * self.sigma1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasScenario {
    /// Learning accuracy `θ̃ₙ − θ`.
    pub a_n: f64,
    pub b: f64,
    pub n_tilde: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub center: f64,
    pub envelope: f64,
}

/// `c̃(x, y, z) = ĉ / ((1 + |(y − x)√z / (rσ₁)|)^β √(z − r + 1))`.
fn c_tilde(spec: &UStatSpec, x: f64, y: f64, z: usize) -> f64 {
    let zf = z as f64;
    let arg = ((y - x) * zf.sqrt() / spec.scale()).abs();
    spec.c_hat / ((1.0 + arg).powf(spec.beta) * (zf - spec.kernel.order() as f64 + 1.0).sqrt())
}

/// Normal approximation of `P(|U_ñ − θ| ≤ b)` and the width of its envelope.
pub fn probability_bracket(scenario: &BiasScenario, spec: &UStatSpec) -> Result<Bracket> {
    spec.validate()?;
    if !(scenario.b > 0.0) {
        return Err(invalid("tolerance b must be positive"));
    }
    if scenario.n_tilde <= spec.kernel.order() {
        return Err(invalid("n_tilde must exceed the kernel order"));
    }
    let k = (scenario.n_tilde as f64).sqrt() / spec.scale();
    let (a, b) = (scenario.a_n, scenario.b);
    let center = normal_cdf((a + b) * k) - normal_cdf((a - b) * k);
    let envelope = c_tilde(spec, a, b, scenario.n_tilde) + c_tilde(spec, a, -b, scenario.n_tilde);
    Ok(Bracket { center, envelope })
}

/// Location-scale laws the Monte Carlo draws from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum Law {
    Normal { mean: f64, sd: f64 },
    StudentT { loc: f64, scale: f64, nu: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Law::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Law::StudentT { loc, scale, nu } => loc.is_finite() && scale > 0.0 && nu > 2.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("law parameters out of range (Student-t needs nu > 2)"))
        }
    }

    /// Population value of the kernel's statistic.
    pub fn theta(&self, kernel: Kernel) -> f64 {
        match (*self, kernel) {
            (Law::Normal { mean, .. }, Kernel::Mean) => mean,
            (Law::Normal { sd, .. }, Kernel::Variance) => sd * sd,
            (Law::StudentT { loc, .. }, Kernel::Mean) => loc,
            (Law::StudentT { scale, nu, .. }, Kernel::Variance) => scale * scale * nu / (nu - 2.0),
        }
    }

    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match *self {
            Law::Normal { mean, sd } => {
                let dist = Normal::new(mean, sd).expect("validated normal law");
                out.iter_mut().for_each(|x| *x = dist.sample(rng));
            }
            Law::StudentT { loc, scale, nu } => {
                let dist = StudentT::new(nu).expect("validated t law");
                out.iter_mut().for_each(|x| *x = loc + scale * dist.sample(rng));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub n_tilde: usize,
    pub trials: usize,
    pub hits: usize,
    pub estimate: f64,
    /// Binomial standard error `√(p(1−p)/trials)`.
    pub std_error: f64,
}

impl Coverage {
    pub fn from_hits(n_tilde: usize, trials: usize, hits: usize) -> Self {
        let p = hits as f64 / trials as f64;
        Self { n_tilde, trials, hits, estimate: p, std_error: (p * (1.0 - p) / trials as f64).sqrt() }
    }
}

/// Minimum number of Monte Carlo trials.
pub const MIN_TRIALS: usize = 100;

/// Whether trial `index` lands within `b` of `θ`. Trial `i` draws from
/// `stream(derive_seed(seed, i), 0)`.
#[allow(clippy::too_many_arguments)]
pub fn coverage_trial(
    learned: &Law,
    kernel: Kernel,
    theta: f64,
    b: f64,
    n_tilde: usize,
    seed: u64,
    index: usize,
    buf: &mut Vec<f64>,
) -> Result<bool> {
    buf.resize(n_tilde, 0.0);
    let mut r = rng::stream(rng::derive_seed(seed, index as u64), 0);
    learned.sample_into(&mut r, buf);
    Ok((u_statistic(kernel, buf)? - theta).abs() <= b)
}

/// Monte Carlo estimate of `P(|U_ñ − θ| ≤ b)` with samples from `learned`
/// and `θ` taken from `truth`.
pub fn monte_carlo_coverage(
    truth: &Law,
    learned: &Law,
    kernel: Kernel,
    b: f64,
    n_tilde: usize,
    trials: usize,
    seed: u64,
) -> Result<Coverage> {
    truth.validate()?;
    learned.validate()?;
    if trials < MIN_TRIALS {
        return Err(invalid(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    if !(b > 0.0) {
        return Err(invalid("tolerance b must be positive"));
    }
    let theta = truth.theta(kernel);
    let mut buf = Vec::new();
    let mut hits = 0;
    for i in 0..trials {
        hits += usize::from(coverage_trial(learned, kernel, theta, b, n_tilde, seed, i, &mut buf)?);
    }
    Ok(Coverage::from_hits(n_tilde, trials, hits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_sigma1() {
        let s = UStatSpec::normal(Kernel::Variance, 2.0).unwrap();
        assert!((s.sigma1 - 4.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(UStatSpec::new(Kernel::Mean, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn bracket_limits() {
        let spec = UStatSpec::normal(Kernel::Mean, 1.0).unwrap();
        let c = probability_bracket(&BiasScenario { a_n: 0.0, b: 0.05, n_tilde: 1_000_000 }, &spec).unwrap();
        assert!(c.center > 0.999);
        let c = probability_bracket(&BiasScenario { a_n: 0.1, b: 0.05, n_tilde: 1_000_000 }, &spec).unwrap();
        assert!(c.center < 1e-6);
    }

    #[test]
    fn rejects_few_trials() {
        let law = Law::Normal { mean: 0.0, sd: 1.0 };
        assert!(monte_carlo_coverage(&law, &law, Kernel::Mean, 0.1, 10, 99, 0).is_err());
    }
}
