use nalgebra::DMatrix;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};
use synthmarket_core::clusters::{cluster, features, scale_factors, unscale_factors, FactorFeatures, Scaling};
use synthmarket_core::date::Date;
use synthmarket_core::metrics::acf::{clustering_score, ScoreKind};
use synthmarket_core::panel::ReturnsPanel;
use synthmarket_core::rng::stream;
use synthmarket_core::sim::{DeskSim, Garch};
use synthmarket_core::spectral::{mp_edge, FactorCount, FactorModel};
use synthmarket_core::stats;

fn gaussian_panel(n: usize, d: usize, seed: u64) -> ReturnsPanel {
    let mut r = stream(seed, 0);
    let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut r));
    ReturnsPanel::with_synthetic_labels(x, Date::new(2015, 6, 1).unwrap()).unwrap()
}

#[test]
fn marchenko_pastur_edge_is_a_null_threshold() {
    for seed in 0..20 {
        let p = gaussian_panel(2_000, 200, seed).standardize().unwrap();
        let fm = FactorModel::fit(&p, FactorCount::Fixed { m: 1 }).unwrap();
        let edge = mp_edge(2_000, 200, 1.0).unwrap();
        let above = fm.eigvals().iter().filter(|l| **l > edge).count();
        assert!(above as f64 <= 0.02 * 200.0, "seed {seed}: {above} above {edge}");
    }
}

#[test]
fn decomposition_identities() {
    let panel = DeskSim { n: 1_000, ..DeskSim::default() }.simulate().unwrap();
    let sp = panel.standardize().unwrap();
    let fm = FactorModel::fit(&sp, FactorCount::default()).unwrap();
    let m = fm.m();
    assert!(m >= 2, "desk simulator should carry at least two factors, got {m}");
    let p = fm.eigvecs();
    assert!((p.transpose() * p - DMatrix::identity(20, 20)).amax() < 1e-8);
    assert!((fm.eigvals().sum() - 20.0).abs() < 1e-6);
    assert!(fm.eigvals().as_slice().windows(2).all(|w| w[0] >= w[1]));
    assert!(fm.eigvals()[m - 1] > fm.lambda_plus().unwrap() && fm.lambda_plus().unwrap() >= fm.eigvals()[m]);

    let dec = fm.decompose(&sp).unwrap();
    let recon = &dec.factors * fm.beta().transpose() + &dec.residuals;
    assert!((recon - sp.values()).amax() < 1e-10);
    let mut split = 0.0;
    for k in 0..m {
        let col: Vec<f64> = dec.factors.column(k).iter().copied().collect();
        assert!((stats::variance(&col) - fm.eigvals()[k]).abs() < 1e-8);
        split += fm.eigvals()[k];
        for l in 0..k {
            let other: Vec<f64> = dec.factors.column(l).iter().copied().collect();
            assert!(stats::pearson(&col, &other).unwrap().abs() < 1e-8);
        }
    }
    for j in 0..20 {
        let col: Vec<f64> = dec.residuals.column(j).iter().copied().collect();
        split += stats::variance(&col);
    }
    assert!((split - 20.0).abs() < 1e-6);
}

#[test]
fn rank_one_panel_has_no_residual() {
    let mut r = stream(2, 0);
    let f: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut r)).collect();
    let load = [0.5, -1.0, 2.0, 3.0];
    let x = DMatrix::from_fn(300, 4, |i, j| load[j] * f[i]);
    let p = ReturnsPanel::with_synthetic_labels(x, Date::new(2015, 6, 1).unwrap()).unwrap().standardize().unwrap();
    let fm = FactorModel::fit(&p, FactorCount::Fixed { m: 1 }).unwrap();
    assert!(fm.decompose(&p).unwrap().residuals.amax() < 1e-8);
}

#[test]
fn scaling_round_trip_and_variance() {
    let mut r = stream(3, 0);
    let f = DMatrix::from_fn(5_000, 2, |_, j| {
        let z: f64 = StandardNormal.sample(&mut r);
        2.0 * (j + 1) as f64 * z
    });
    let eig = [4.0, 16.0];
    for s in [Scaling::InverseSqrt, Scaling::Inverse] {
        let scaled = scale_factors(&f, &eig, s).unwrap();
        assert!((unscale_factors(&scaled, &eig, s).unwrap() - &f).amax() < 1e-10);
    }
    let scaled = scale_factors(&f, &eig, Scaling::Inverse).unwrap();
    let col: Vec<f64> = scaled.column(0).iter().copied().collect();
    assert!((stats::variance(&col) - 0.25).abs() < 0.02);
}

#[test]
fn cluster_features_match_direct_computation() {
    let mut r = stream(4, 0);
    let x = Garch::default().path(3_000, &mut r);
    let feat = features(&x, 7.3).unwrap();
    assert_eq!(feat.eigenvalue, 7.3);
    assert!(feat.vol_clustering > 0.0);
    assert!((feat.vol_clustering - clustering_score(&x, ScoreKind::VolatilityClustering, 63)).abs() < 1e-12);
    assert!((feat.leverage - clustering_score(&x, ScoreKind::Leverage, 63)).abs() < 1e-12);
}

fn feature_row(v: [f64; 5]) -> FactorFeatures {
    FactorFeatures { skewness: v[0], excess_kurtosis: v[1], eigenvalue: v[2], vol_clustering: v[3], leverage: v[4] }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardize_round_trips_and_commutes_with_permutation(seed in any::<u64>()) {
        let p = gaussian_panel(40, 5, seed);
        let sp = p.standardize().unwrap();
        prop_assert!((sp.destandardize(sp.values()) - p.values()).amax() < 1e-12);
        let perm = [3usize, 0, 4, 1, 2];
        let permuted = DMatrix::from_fn(40, 5, |i, j| p.values()[(i, perm[j])]);
        let q = p.with_values(permuted).unwrap().standardize().unwrap();
        for (j, &pj) in perm.iter().enumerate() {
            prop_assert_eq!(q.values().column(j), sp.values().column(pj));
        }
    }

    #[test]
    fn clustering_is_permutation_equivariant(rows in prop::collection::vec(prop::array::uniform5(-3.0f64..3.0), 4..8)) {
        let feats: Vec<FactorFeatures> = rows.iter().map(|r| feature_row(*r)).collect();
        let base = cluster(&feats, 2).unwrap();
        let mut order: Vec<usize> = (0..feats.len()).collect();
        order.reverse();
        let permuted: Vec<FactorFeatures> = order.iter().map(|&i| feats[i]).collect();
        let other = cluster(&permuted, 2).unwrap();
        // Same partition, possibly relabeled.
        for a in 0..feats.len() {
            for b in 0..feats.len() {
                let same = base.cluster_of(order[a]) == base.cluster_of(order[b]);
                prop_assert_eq!(same, other.cluster_of(a) == other.cluster_of(b));
            }
        }
    }
}
