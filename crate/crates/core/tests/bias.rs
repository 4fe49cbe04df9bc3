use proptest::prelude::*;
use synthmarket_core::bias::{
    jackknife_sigma1, monte_carlo_coverage, probability_bracket, u_statistic, BiasScenario, Kernel, Law, UStatSpec,
};
use synthmarket_core::special::normal_cdf;

/// Average of the kernel over every increasing tuple.
fn naive_u(kernel: Kernel, xs: &[f64]) -> f64 {
    let n = xs.len();
    match kernel {
        Kernel::Mean => xs.iter().sum::<f64>() / n as f64,
        Kernel::Variance => {
            let mut total = 0.0;
            let mut count = 0usize;
            for i in 0..n {
                for j in i + 1..n {
                    total += kernel.eval(&[xs[i], xs[j]]);
                    count += 1;
                }
            }
            total / count as f64
        }
    }
}

fn normal(mean: f64, sd: f64) -> Law {
    Law::Normal { mean, sd }
}

#[test]
fn envelope_decreases_with_sample_size() {
    let spec = UStatSpec::normal(Kernel::Mean, 1.0).unwrap();
    let grid = [100, 300, 1_000, 3_000, 10_000, 100_000, 1_000_000];
    let env: Vec<f64> = grid
        .iter()
        .map(|&n| probability_bracket(&BiasScenario { a_n: 0.1, b: 0.05, n_tilde: n }, &spec).unwrap().envelope)
        .collect();
    assert!(env.windows(2).all(|w| w[1] < w[0]), "{env:?}");
}

#[test]
fn unbiased_mean_is_covered() {
    let law = normal(0.0, 1.0);
    let c = monte_carlo_coverage(&law, &law, Kernel::Mean, 0.05, 10_000, 1_000, 1).unwrap();
    assert!(c.estimate >= 0.99, "{c:?}");
}

#[test]
fn biased_mean_matches_closed_form() {
    let (a, b) = (0.1, 0.05);
    for n in [100usize, 400] {
        let c = monte_carlo_coverage(&normal(0.0, 1.0), &normal(a, 1.0), Kernel::Mean, b, n, 4_000, 2).unwrap();
        let k = (n as f64).sqrt();
        let exact = normal_cdf((b - a) * k) - normal_cdf((-b - a) * k);
        let se = (exact * (1.0 - exact) / c.trials as f64).sqrt();
        assert!((c.estimate - exact).abs() <= 3.0 * se, "n = {n}: {} vs {exact}", c.estimate);
    }
}

#[test]
fn biased_variance_coverage_vanishes() {
    let truth = normal(0.0, 1.0);
    let learned = normal(0.0, 1.1);
    let cov: Vec<f64> = [100usize, 1_000, 10_000]
        .iter()
        .map(|&n| monte_carlo_coverage(&truth, &learned, Kernel::Variance, 0.1, n, 400, 3).unwrap().estimate)
        .collect();
    // Coverage can only fall, up to Monte Carlo noise.
    assert!(cov[1] <= cov[0] + 0.05 && cov[2] <= cov[1] + 0.05, "{cov:?}");
    assert!(cov[2] < 0.01, "{cov:?}");
}

#[test]
fn jackknife_recovers_normal_sigma1() {
    let mut r = synthmarket_core::rng::stream(4, 0);
    let mut xs = vec![0.0; 3_000];
    normal(0.0, 2.0).sample_into(&mut r, &mut xs);
    let analytic = UStatSpec::normal(Kernel::Variance, 2.0).unwrap().sigma1;
    let jack = jackknife_sigma1(Kernel::Variance, &xs).unwrap();
    assert!((jack / analytic - 1.0).abs() < 0.1, "{jack} vs {analytic}");
    let jack = jackknife_sigma1(Kernel::Mean, &xs).unwrap();
    assert!((jack / 2.0 - 1.0).abs() < 0.05);
}

#[test]
fn bad_inputs_are_rejected() {
    let law = normal(0.0, 1.0);
    assert!(monte_carlo_coverage(&law, &law, Kernel::Mean, 0.0, 10, 100, 0).is_err());
    assert!(monte_carlo_coverage(
        &Law::StudentT { loc: 0.0, scale: 1.0, nu: 2.0 },
        &law,
        Kernel::Mean,
        0.1,
        10,
        100,
        0
    )
    .is_err());
    let spec = UStatSpec::normal(Kernel::Variance, 1.0).unwrap();
    assert!(probability_bracket(&BiasScenario { a_n: 0.0, b: 0.1, n_tilde: 2 }, &spec).is_err());
    assert!(u_statistic(Kernel::Variance, &[1.0, 2.0]).is_err());
}

proptest! {
    #[test]
    fn closed_form_matches_enumeration(xs in prop::collection::vec(-5.0f64..5.0, 3..=30)) {
        for k in [Kernel::Mean, Kernel::Variance] {
            let fast = u_statistic(k, &xs).unwrap();
            let slow = naive_u(k, &xs);
            prop_assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0), "{k:?}: {fast} vs {slow}");
        }
    }

    #[test]
    fn bracket_is_a_probability(a in -0.5f64..0.5, b in 0.01f64..0.5, n in 3usize..100_000) {
        let spec = UStatSpec::normal(Kernel::Variance, 1.3).unwrap();
        let br = probability_bracket(&BiasScenario { a_n: a, b, n_tilde: n }, &spec).unwrap();
        prop_assert!((0.0..=1.0).contains(&br.center));
        prop_assert!(br.envelope > 0.0);
    }
}
