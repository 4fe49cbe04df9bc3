use rand_distr::{Distribution, StandardNormal};
use synthmarket_core::gan::{
    discriminator_loss_grad, generator_loss_grad, train, BlockSpec, GanModel, TcnSpec, TrainConfig,
};
use synthmarket_core::rng::stream;

fn mini_spec() -> TcnSpec {
    TcnSpec {
        hidden: 8,
        noise_channels: 3,
        blocks: vec![BlockSpec { kernel: 2, dilation: 1 }, BlockSpec { kernel: 2, dilation: 2 }],
        generator_batch_norm: true,
        discriminator_batch_norm: false,
    }
}

fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 0);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

/// Worst relative error between analytic and central-difference gradients.
fn worst_rel_err(params: &mut [f64], analytic: &[f64], loss: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let orig = params[i];
        params[i] = orig + h;
        let up = loss(params);
        params[i] = orig - h;
        let down = loss(params);
        params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

#[test]
fn gradients_match_central_differences() {
    let model = GanModel::init(mini_spec(), 3).unwrap();
    let w = model.spec.window_len();
    let bsz = 4;
    let real = normals(w * bsz, 1);
    let fake = normals(w * bsz, 2);

    let (_, gd) = discriminator_loss_grad(&model.discriminator, &real, &fake, w, bsz);
    let mut d = model.discriminator.clone();
    let mut params = d.params.clone();
    let err_d = worst_rel_err(&mut params, &gd, &mut |p| {
        d.params.copy_from_slice(p);
        discriminator_loss_grad(&d, &real, &fake, w, bsz).0
    });
    assert!(err_d <= 1e-4, "discriminator gradient relative error {err_d}");

    let noise = normals(model.spec.noise_len(w) * bsz * 3, 4);
    let (_, gg, _) = generator_loss_grad(&model.generator, &model.discriminator, &noise, None, w, bsz);
    let mut g = model.generator.clone();
    let mut params = g.params.clone();
    let err_g = worst_rel_err(&mut params, &gg, &mut |p| {
        g.params.copy_from_slice(p);
        generator_loss_grad(&g, &model.discriminator, &noise, None, w, bsz).0
    });
    assert!(err_g <= 1e-4, "generator gradient relative error {err_g}");
}

#[test]
fn output_ignores_noise_beyond_receptive_field() {
    let model = GanModel::init(TcnSpec::with_hidden(8), 9).unwrap();
    let s = 20;
    let l_in = model.spec.noise_len(s);
    let base = normals(l_in * 3, 5);
    let y0 = model.generate_from_noise(&base, s).unwrap();
    for probe in [0usize, 7, 30, l_in - 1] {
        let mut z = base.clone();
        z[probe * 3 + 1] += 3.0;
        let y = model.generate_from_noise(&z, s).unwrap();
        for t in 0..s {
            let in_window = probe >= t && probe <= t + 62;
            if in_window {
                continue;
            }
            assert_eq!(y[t], y0[t], "output {t} moved after perturbing noise {probe}");
        }
        // The perturbed step sits inside at least one window.
        assert!((0..s).any(|t| probe >= t && probe <= t + 62 && y[t] != y0[t]));
    }
}

#[test]
fn generation_is_deterministic() {
    let model = GanModel::init(TcnSpec::with_hidden(8), 2).unwrap();
    assert_eq!(model.generate(40, 3, 17).unwrap(), model.generate(40, 3, 17).unwrap());
    assert_ne!(model.generate(40, 3, 17).unwrap(), model.generate(40, 3, 18).unwrap());
    let w = normals(63, 8);
    assert_eq!(model.discriminate(&w).unwrap(), model.discriminate(&w).unwrap());
}

#[test]
fn training_is_deterministic_and_logged() {
    let data = normals(63 * 64, 12);
    let cfg = TrainConfig { batch_size: 16, iterations: 150, seed: 4, ..TrainConfig::desk() };
    let a = train(&data, TcnSpec::with_hidden(6), &cfg).unwrap();
    let b = train(&data, TcnSpec::with_hidden(6), &cfg).unwrap();
    assert_eq!(a, b);
    let its: Vec<usize> = a.log.iter().map(|e| e.iteration).collect();
    assert_eq!(its, vec![100, 150]);
    let json = serde_json::to_string(&a).unwrap();
    let back: GanModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, a);
}

#[test]
fn training_rejects_bad_datasets() {
    let cfg = TrainConfig { batch_size: 8, iterations: 1, ..TrainConfig::desk() };
    assert!(train(&[0.0; 62], TcnSpec::with_hidden(4), &cfg).is_err());
    assert!(train(&[0.0; 63 * 4], TcnSpec::with_hidden(4), &cfg).is_err());
}

#[test]
fn single_batch_smoke_run() {
    let data = normals(63 * 8, 3);
    let cfg =
        TrainConfig { iterations: 200, seed: 1, lr_generator: 1e-3, lr_discriminator: 1e-3, ..TrainConfig::desk() };
    let model = train(&data, TcnSpec::desk(), &cfg).unwrap();
    assert!(model.log.iter().all(|e| e.g_loss.is_finite() && e.d_loss.is_finite()));
    let fake = model.generate(63, 100, 99).unwrap();
    let held_out = normals(63 * 100, 4);
    let mut correct = 0;
    for i in 0..100 {
        correct += usize::from(model.discriminate(&held_out[i * 63..(i + 1) * 63]).unwrap() > 0.5);
        let f: Vec<f64> = fake.row(i).iter().copied().collect();
        correct += usize::from(model.discriminate(&f).unwrap() <= 0.5);
    }
    let acc = correct as f64 / 200.0;
    assert!((acc - 0.5).abs() <= 0.2, "held-out discriminator accuracy {acc}");
}
