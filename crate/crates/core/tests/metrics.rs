use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use synthmarket_core::linalg::sym_eigen;
use synthmarket_core::metrics::acf::{acf, clustering_score, ScoreKind, Transform};
use synthmarket_core::metrics::correlation::{
    corr_distance, correlation, ledoit_wolf, one_factor_corr, rolling_mean_corr,
};
use synthmarket_core::metrics::portfolio::portfolio_stats;
use synthmarket_core::metrics::tail::{hill_gamma, hill_xi, var_es};
use synthmarket_core::metrics::wasserstein::wasserstein1;
use synthmarket_core::rng::stream;
use synthmarket_core::sim::Garch;

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 0);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Pearson correlation written as explicit double sums.
fn loop_corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (mut sa, mut sb) = (0.0, 0.0);
    for i in 0..a.len() {
        sa += a[i];
        sb += b[i];
    }
    let (ma, mb) = (sa / n, sb / n);
    let (mut cab, mut caa, mut cbb) = (0.0, 0.0, 0.0);
    for i in 0..a.len() {
        cab += (a[i] - ma) * (b[i] - mb);
        caa += (a[i] - ma) * (a[i] - ma);
        cbb += (b[i] - mb) * (b[i] - mb);
    }
    cab / (caa.sqrt() * cbb.sqrt())
}

fn loop_acf(x: &[f64], sq1: bool, sq2: bool, lag: usize) -> f64 {
    let m = x.len() - lag;
    let a: Vec<f64> = (0..m).map(|t| if sq1 { x[t] * x[t] } else { x[t] }).collect();
    let b: Vec<f64> = (0..m).map(|t| if sq2 { x[t + lag] * x[t + lag] } else { x[t + lag] }).collect();
    loop_corr(&a, &b)
}

fn loop_score(x: &[f64], sq1: bool) -> f64 {
    let rho: Vec<f64> = (1..=63).map(|l| loop_acf(x, sq1, true, l)).collect();
    let total: f64 = rho.iter().map(|r| r * r).sum();
    if rho[..10].iter().sum::<f64>() / 10.0 < 0.0 {
        -total
    } else {
        total
    }
}

#[test]
fn acf_matches_double_loop_on_garch() {
    let mut r = stream(1, 0);
    let x = Garch::default().path(3_000, &mut r);
    for lag in [1, 5, 63] {
        let fast = acf(&x, Transform::Square, Transform::Square, lag);
        assert!((fast - loop_acf(&x, true, true, lag)).abs() < 1e-12);
        assert!(lag > 1 || fast > 0.0);
    }
    assert!((acf(&x, Transform::Identity, Transform::Square, 2) - loop_acf(&x, false, true, 2)).abs() < 1e-12);
}

#[test]
fn white_noise_acf_is_small() {
    for seed in 0..100 {
        let x = normals(2_000, seed);
        assert!(acf(&x, Transform::Identity, Transform::Identity, 1).abs() <= 3.0 / (2_000f64).sqrt());
        let s = clustering_score(&x, ScoreKind::VolatilityClustering, 63);
        assert!(s.abs() <= 63.0 * 9.0 / 2_000.0);
    }
}

#[test]
fn regime_switch_gives_positive_volatility_score() {
    let z = normals(2_000, 7);
    let x: Vec<f64> = z.iter().enumerate().map(|(t, v)| if t < 1_000 { *v } else { 5.0 * v }).collect();
    let s = clustering_score(&x, ScoreKind::VolatilityClustering, 63);
    assert!(s > 0.0);
    assert!((s - loop_score(&x, true)).abs() < 1e-12);
    let mut r = stream(8, 0);
    let g = Garch::default().path(5_000, &mut r);
    assert!((clustering_score(&g, ScoreKind::Leverage, 63) - loop_score(&g, false)).abs() < 1e-12);
}

#[test]
fn pareto_tail_index() {
    let n = 100_000;
    for seed in 0..50 {
        let mut r = stream(seed, 3);
        let returns: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = 1.0 - r.random::<f64>();
                -u.powf(-1.0 / 3.0)
            })
            .collect();
        let g = hill_gamma(&returns, n / 20).unwrap().unwrap();
        assert!((2.7..=3.3).contains(&g), "seed {seed}: {g}");
    }
}

#[test]
fn hill_rejects_zero_losses() {
    let xs = [-1.0, -0.5, 0.0, 0.0, 0.2];
    assert!(hill_xi(&xs, 2).is_err());
}

/// Best assignment over every permutation of `b`.
fn permutation_w1(a: &[f64], b: &[f64]) -> f64 {
    fn rec(a: &[f64], rest: &mut Vec<f64>, acc: f64, best: &mut f64) {
        if rest.is_empty() {
            *best = best.min(acc);
            return;
        }
        let i = a.len() - rest.len();
        for k in 0..rest.len() {
            let v = rest.remove(k);
            rec(a, rest, acc + (a[i] - v).abs(), best);
            rest.insert(k, v);
        }
    }
    let mut best = f64::INFINITY;
    rec(a, &mut b.to_vec(), 0.0, &mut best);
    best / a.len() as f64
}

/// `∫ |F(x) − G(x)| dx` over the merged support.
fn cdf_w1(a: &[f64], b: &[f64]) -> f64 {
    let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
    pts.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], x: f64| s.iter().filter(|v| **v <= x).count() as f64 / s.len() as f64;
    pts.windows(2).map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0])).sum()
}

#[test]
fn wasserstein_oracles() {
    assert_eq!(wasserstein1(&[0.0, 0.0, 0.0], &[0.0, 0.0, 3.0]).unwrap(), 1.0);
    assert_eq!(permutation_w1(&[0.0, 0.0, 0.0], &[0.0, 0.0, 3.0]), 1.0);
    let mut r = stream(4, 0);
    for _ in 0..20 {
        let a: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
        assert!((wasserstein1(&a, &b).unwrap() - permutation_w1(&a, &b)).abs() < 1e-12);
        let c: Vec<f64> = (0..4).map(|_| r.random_range(-2.0..2.0)).collect();
        assert!((wasserstein1(&a, &c).unwrap() - cdf_w1(&a, &c)).abs() < 1e-12);
    }
}

#[test]
fn var_es_examples() {
    let (v, e) = var_es(&[-0.10, -0.05, 0.0, 0.05, 0.10], 0.8).unwrap();
    assert_eq!((v, e), (0.05, 0.10));
    assert_eq!(var_es(&[-0.02; 40], 0.95).unwrap(), (0.02, 0.02));
    assert!(var_es(&[0.0; 10], 0.95).is_err());
    let x = normals(1_000_000, 5);
    let (v, e) = var_es(&x, 0.99).unwrap();
    assert!((v - 2.326).abs() < 0.02 && (e - 2.665).abs() < 0.03, "{v} {e}");
}

#[test]
fn corr_distance_matches_double_loop() {
    let mut r = stream(6, 0);
    let x = DMatrix::from_fn(200, 10, |_, _| StandardNormal.sample(&mut r));
    let y = DMatrix::from_fn(200, 10, |_, _| StandardNormal.sample(&mut r));
    let (a, b) = (correlation(&x).unwrap(), correlation(&y).unwrap());
    let mut want = 0.0;
    for i in 0..10 {
        for j in 0..10 {
            if j < i {
                want += (a[(i, j)] - b[(i, j)]).powi(2);
            }
        }
    }
    assert!((corr_distance(&a, &b).unwrap() - want).abs() < 1e-14);
}

#[test]
fn rolling_correlation_spot_check() {
    let mut r = stream(7, 0);
    let x = DMatrix::from_fn(400, 5, |_, _| StandardNormal.sample(&mut r));
    let series = rolling_mean_corr(&x, 252).unwrap();
    let c = correlation(&x.rows(100, 252).into_owned()).unwrap();
    let mut s = 0.0;
    for i in 1..5 {
        for j in 0..i {
            s += c[(i, j)];
        }
    }
    assert!((series[100] - s / 10.0).abs() < 1e-12);
    assert!(series.iter().all(|v| v.abs() <= 3.0 / 252f64.sqrt()));
}

#[test]
fn spherical_panel_is_shrunk_hard() {
    for seed in 0..20 {
        let mut r = stream(seed, 2);
        let x = DMatrix::from_fn(50, 40, |_, _| StandardNormal.sample(&mut r));
        let (_, gamma) = ledoit_wolf(&x).unwrap();
        assert!(gamma >= 0.5, "seed {seed}: {gamma}");
    }
}

#[test]
fn one_factor_matrix_is_psd() {
    let mut r = stream(10, 0);
    let f: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut r)).collect();
    let x = DMatrix::from_fn(300, 6, |i, _| {
        let e: f64 = StandardNormal.sample(&mut r);
        0.7 * f[i] + e
    });
    let c = one_factor_corr(&x).unwrap();
    let rho = c[(1, 0)];
    assert!(rho > -1.0 / 5.0 && rho <= 1.0);
    let e = sym_eigen(&c).unwrap();
    assert!((e.values[0] - (1.0 + 5.0 * rho)).abs() < 1e-12);
    assert!((e.values[5] - (1.0 - rho)).abs() < 1e-12);
}

#[test]
fn normal_moments_in_report() {
    let x: Vec<f64> = normals(200_000, 9).iter().map(|v| v * 0.01).collect();
    let rep = portfolio_stats(&x, 252);
    assert!(rep.get("skewness").unwrap().abs() < 0.05);
    assert!(rep.get("excess_kurtosis").unwrap().abs() < 0.05);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wasserstein_is_a_metric(seed in any::<u64>()) {
        let mut r = stream(seed, 0);
        let mut draw = || (0..50).map(|_| r.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (a, b, c) = (draw(), draw(), draw());
        let ab = wasserstein1(&a, &b).unwrap();
        prop_assert!((ab - wasserstein1(&b, &a).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(wasserstein1(&a, &a).unwrap(), 0.0);
        prop_assert!(ab <= wasserstein1(&a, &c).unwrap() + wasserstein1(&c, &b).unwrap() + 1e-12);
        let shift: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        prop_assert!((wasserstein1(&a, &shift).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn es_dominates_var(xs in prop::collection::vec(-1.0f64..1.0, 20..200), alpha in 0.5f64..0.95) {
        let (v, e) = var_es(&xs, alpha).unwrap();
        prop_assert!(e >= v);
    }

    #[test]
    fn hill_is_scale_invariant(xs in prop::collection::vec(-5.0f64..-0.01, 30..100), c in 0.01f64..100.0) {
        let scaled: Vec<f64> = xs.iter().map(|v| v * c).collect();
        let a = hill_xi(&xs, 10).unwrap();
        let b = hill_xi(&scaled, 10).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn corr_distance_is_symmetric(seed in any::<u64>()) {
        let mut r = stream(seed, 1);
        let x = DMatrix::from_fn(30, 4, |_, _| StandardNormal.sample(&mut r));
        let y = DMatrix::from_fn(30, 4, |_, _| StandardNormal.sample(&mut r));
        let (a, b) = (correlation(&x).unwrap(), correlation(&y).unwrap());
        prop_assert_eq!(corr_distance(&a, &b).unwrap(), corr_distance(&b, &a).unwrap());
    }
}
