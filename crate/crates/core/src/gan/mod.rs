//! Adversarially trained TCN generator and discriminator for scaled factor
//! windows.
//!
//! The generator maps Gaussian noise of length `s + rf − 1` (three channels)
//! to a path of length `s`; the discriminator maps a window of length `rf`
//! to one logit. Both use valid convolutions, so `rf` (63 for the default
//! blocks) is exactly the receptive field.

mod net;

pub use net::{BlockSpec, Mode, NetSpec, Tcn, Trace, BN_EPS, BN_MOMENTUM, PRELU_INIT};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng;
#[allow(unused_imports)]
use num_traits::Float;

const CHECKPOINT_VERSION: u32 = 1;

/// Paths generated per forward pass at inference.
const INFER_CHUNK: usize = 16;

/// Architecture shared by the generator and the discriminator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcnSpec {
    pub hidden: usize,
    pub noise_channels: usize,
    pub blocks: Vec<BlockSpec>,
    pub generator_batch_norm: bool,
    pub discriminator_batch_norm: bool,
}

impl TcnSpec {
    pub fn default_blocks() -> Vec<BlockSpec> {
        [(1, 1), (2, 1), (2, 2), (2, 4), (2, 8), (2, 16)]
            .into_iter()
            .map(|(kernel, dilation)| BlockSpec { kernel, dilation })
            .collect()
    }

    /// Width 100, six blocks, receptive field 63.
    pub fn full() -> Self {
        Self::with_hidden(100)
    }

    /// Width 32 with the full block stack.
    pub fn desk() -> Self {
        Self::with_hidden(32)
    }

    pub fn with_hidden(hidden: usize) -> Self {
        Self {
            hidden,
            noise_channels: 3,
            blocks: Self::default_blocks(),
            generator_batch_norm: true,
            discriminator_batch_norm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.noise_channels == 0 || self.blocks.is_empty() {
            return Err(invalid("tcn spec needs positive width, noise channels and at least one block"));
        }
        if self.blocks.iter().any(|b| b.kernel == 0 || b.dilation == 0) {
            return Err(invalid("tcn kernel sizes and dilations must be positive"));
        }
        Ok(())
    }

    pub fn generator_net(&self) -> NetSpec {
        NetSpec {
            in_channels: self.noise_channels,
            hidden: self.hidden,
            blocks: self.blocks.clone(),
            batch_norm: self.generator_batch_norm,
        }
    }

    pub fn discriminator_net(&self) -> NetSpec {
        NetSpec {
            in_channels: 1,
            hidden: self.hidden,
            blocks: self.blocks.clone(),
            batch_norm: self.discriminator_batch_norm,
        }
    }

    pub fn receptive_field(&self) -> usize {
        self.generator_net().receptive_field()
    }

    /// Length of the windows the discriminator scores.
    pub fn window_len(&self) -> usize {
        self.receptive_field()
    }

    /// Noise length needed for an output path of length `s`.
    pub fn noise_len(&self, s: usize) -> usize {
        s + self.receptive_field() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_generator: f64,
    pub lr_discriminator: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub log_every: usize,
    /// Standard deviation of Gaussian noise added to every discriminator
    /// input, real and generated; zero disables it.
    #[serde(default)]
    pub instance_noise: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Batch 128, rates 5e-6 / 5e-5, 50 000 iterations.
    pub fn full() -> Self {
        Self {
            batch_size: 128,
            lr_generator: 5e-6,
            lr_discriminator: 5e-5,
            adam_beta1: 0.0,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            iterations: 50_000,
            d_steps: 1,
            log_every: 100,
            instance_noise: 0.0,
            seed: 0,
        }
    }

    /// Single-core profile used with [`TcnSpec::desk`]: small batches, larger
    /// rates and instance noise so a few thousand iterations settle.
    pub fn desk() -> Self {
        Self {
            batch_size: 8,
            lr_generator: 1e-4,
            lr_discriminator: 3e-4,
            iterations: 5_000,
            instance_noise: 0.3,
            ..Self::full()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [self.lr_generator, self.lr_discriminator, self.adam_eps];
        if rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(invalid("learning rates and adam eps must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(invalid("adam betas must lie in [0,1)"));
        }
        if !(self.instance_noise >= 0.0 && self.instance_noise.is_finite()) {
            return Err(invalid("instance noise must be a finite non-negative scale"));
        }
        if self.iterations == 0 || self.batch_size == 0 || self.d_steps == 0 || self.log_every == 0 {
            return Err(invalid("iterations, batch size, d_steps and log_every must be positive"));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::full()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    pub g_loss: f64,
    pub d_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GanModelRepr", into = "GanModelRepr")]
pub struct GanModel {
    pub spec: TcnSpec,
    pub generator: Tcn,
    pub discriminator: Tcn,
    pub log: Vec<LogEntry>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct GanModelRepr {
    version: u32,
    spec: TcnSpec,
    seed: u64,
    generator: Tcn,
    discriminator: Tcn,
    log: Vec<LogEntry>,
}

impl From<GanModel> for GanModelRepr {
    fn from(m: GanModel) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            spec: m.spec,
            seed: m.seed,
            generator: m.generator,
            discriminator: m.discriminator,
            log: m.log,
        }
    }
}

impl TryFrom<GanModelRepr> for GanModel {
    type Error = Error;

    fn try_from(r: GanModelRepr) -> Result<Self> {
        if r.version != CHECKPOINT_VERSION {
            return Err(invalid(format!("unsupported gan checkpoint version {}", r.version)));
        }
        r.spec.validate()?;
        let ok = r.generator.spec == r.spec.generator_net()
            && r.discriminator.spec == r.spec.discriminator_net()
            && r.generator.is_consistent()
            && r.discriminator.is_consistent();
        if !ok {
            return Err(invalid("gan checkpoint weights do not match its spec"));
        }
        Ok(GanModel { spec: r.spec, generator: r.generator, discriminator: r.discriminator, log: r.log, seed: r.seed })
    }
}

impl GanModel {
    /// Freshly initialized networks.
    pub fn init(spec: TcnSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let generator = Tcn::init(spec.generator_net(), &mut rng::stream(seed, 0));
        let discriminator = Tcn::init(spec.discriminator_net(), &mut rng::stream(seed, 1));
        Ok(Self { spec, generator, discriminator, log: Vec::new(), seed })
    }

    /// `count × s` paths from standard Gaussian noise, batch norm in
    /// inference mode. Each path's noise is drawn in turn from one stream,
    /// so results do not depend on how paths are batched.
    pub fn generate(&self, s: usize, count: usize, seed: u64) -> Result<DMatrix<f64>> {
        if s == 0 {
            return Err(invalid("generated path length must be positive"));
        }
        let l_in = self.spec.noise_len(s);
        let ch = self.spec.noise_channels;
        let mut r = rng::stream(seed, 0);
        let mut out = DMatrix::zeros(count, s);
        let mut done = 0;
        while done < count {
            let b = INFER_CHUNK.min(count - done);
            let mut noise = vec![0.0; l_in * b * ch];
            for p in 0..b {
                for t in 0..l_in {
                    for c in 0..ch {
                        noise[(t * b + p) * ch + c] = StandardNormal.sample(&mut r);
                    }
                }
            }
            let y = self.generator.infer(&noise, l_in, b);
            for p in 0..b {
                for t in 0..s {
                    out[(done + p, t)] = y[t * b + p];
                }
            }
            done += b;
        }
        Ok(out)
    }

    /// Generator output for caller-supplied noise (`noise_len(s) × 3`,
    /// time-major), used by causality probes.
    pub fn generate_from_noise(&self, noise: &[f64], s: usize) -> Result<Vec<f64>> {
        let l_in = self.spec.noise_len(s);
        if noise.len() != l_in * self.spec.noise_channels {
            return Err(Error::DimensionMismatch { expected: l_in * self.spec.noise_channels, actual: noise.len() });
        }
        Ok(self.generator.infer(noise, l_in, 1))
    }

    /// Probability that `window` is real.
    pub fn discriminate(&self, window: &[f64]) -> Result<f64> {
        let w = self.spec.window_len();
        if window.len() != w {
            return Err(Error::DimensionMismatch { expected: w, actual: window.len() });
        }
        let y = self.discriminator.infer(window, w, 1);
        Ok(sigmoid(mean_logits(&y, 1)[0]))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p((-x).exp())
    } else {
        libm::log1p(x.exp())
    }
}

/// Per-sample logit: mean of the discriminator output over time.
fn mean_logits(y: &[f64], bsz: usize) -> Vec<f64> {
    let l = y.len() / bsz;
    let mut out = vec![0.0; bsz];
    for row in y.chunks_exact(bsz) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= l as f64);
    out
}

/// Spread per-sample logit gradients back over the time axis.
fn spread(dlogit: &[f64], l: usize) -> Vec<f64> {
    let mut d = Vec::with_capacity(l * dlogit.len());
    for _ in 0..l {
        d.extend(dlogit.iter().map(|g| g / l as f64));
    }
    d
}

/// Discriminator BCE `mean softplus(−d(x)) + mean softplus(d(x̃))` and its
/// gradient. `real` and `fake` are time-major `len × bsz` batches.
pub fn discriminator_loss_grad(d: &Tcn, real: &[f64], fake: &[f64], len: usize, bsz: usize) -> (f64, Vec<f64>) {
    let (yr, tr) = d.forward(real, len, bsz, Mode::Train);
    let (yf, tf) = d.forward(fake, len, bsz, Mode::Train);
    let l_out = yr.len() / bsz;
    let lr = mean_logits(&yr, bsz);
    let lf = mean_logits(&yf, bsz);
    let b = bsz as f64;
    let loss = lr.iter().map(|&x| softplus(-x)).sum::<f64>() / b + lf.iter().map(|&x| softplus(x)).sum::<f64>() / b;
    let dr: Vec<f64> = lr.iter().map(|&x| (sigmoid(x) - 1.0) / b).collect();
    let df: Vec<f64> = lf.iter().map(|&x| sigmoid(x) / b).collect();
    let (mut g, _) = d.backward(&tr, &spread(&dr, l_out), false);
    let (gf, _) = d.backward(&tf, &spread(&df, l_out), false);
    g.iter_mut().zip(&gf).for_each(|(a, b)| *a += b);
    (loss, g)
}

/// Non-saturating generator loss `mean softplus(−d(g(z)))`, its gradient in
/// the generator parameters and the batch-norm statistics observed.
/// `d_noise`, when given, is added to the generated batch before it reaches
/// the discriminator.
pub fn generator_loss_grad(
    g: &Tcn,
    d: &Tcn,
    noise: &[f64],
    d_noise: Option<&[f64]>,
    s: usize,
    bsz: usize,
) -> (f64, Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>) {
    let l_in = noise.len() / (bsz * g.spec.in_channels);
    let (mut fake, tg) = g.forward(noise, l_in, bsz, Mode::Train);
    if let Some(e) = d_noise {
        fake.iter_mut().zip(e).for_each(|(f, e)| *f += e);
    }
    let (yf, tf) = d.forward(&fake, s, bsz, Mode::Train);
    let l_out = yf.len() / bsz;
    let lf = mean_logits(&yf, bsz);
    let b = bsz as f64;
    let loss = lf.iter().map(|&x| softplus(-x)).sum::<f64>() / b;
    let dl: Vec<f64> = lf.iter().map(|&x| (sigmoid(x) - 1.0) / b).collect();
    let (_, dfake) = d.backward(&tf, &spread(&dl, l_out), true);
    let (grad, _) = g.backward(&tg, &dfake.expect("input gradient"), false);
    let Trace { batch_stats, .. } = tg;
    (loss, grad, batch_stats)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, lr: f64, cfg: &TrainConfig) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr, b1: cfg.adam_beta1, b2: cfg.adam_beta2, eps: cfg.adam_eps }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.b1.powi(self.t);
        let c2 = 1.0 - self.b2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * grad[i];
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

fn gaussian_noise<R: Rng + ?Sized>(len: usize, r: &mut R) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(r)).collect()
}

/// Train on the rows of a row-major `rows × window_len` dataset.
///
/// Each iteration performs `d_steps` discriminator updates on a batch of
/// rows drawn with replacement, then one generator update. Losses are
/// logged every `log_every` iterations and at the last one.
pub fn train(dataset: &[f64], spec: TcnSpec, config: &TrainConfig) -> Result<GanModel> {
    train_with(dataset, spec, config, &mut |_, _| {})
}

/// [`train`] calling `observer(iteration, model)` after every iteration.
pub fn train_with(
    dataset: &[f64],
    spec: TcnSpec,
    config: &TrainConfig,
    observer: &mut dyn FnMut(usize, &GanModel),
) -> Result<GanModel> {
    config.validate()?;
    let mut model = GanModel::init(spec, config.seed)?;
    let w = model.spec.window_len();
    if dataset.is_empty() || dataset.len() % w != 0 {
        return Err(invalid(format!("dataset length {} is not a positive multiple of the window {w}", dataset.len())));
    }
    let rows = dataset.len() / w;
    let bsz = config.batch_size;
    if rows < bsz {
        return Err(Error::InsufficientData { required: bsz, actual: rows });
    }
    let l_noise = model.spec.noise_len(w);
    let noise_len = l_noise * bsz * model.spec.noise_channels;
    let mut opt_g = Adam::new(model.generator.param_count(), config.lr_generator, config);
    let mut opt_d = Adam::new(model.discriminator.param_count(), config.lr_discriminator, config);
    let mut r = rng::stream(config.seed, 2);
    let mut real = vec![0.0; w * bsz];
    for it in 1..=config.iterations {
        let mut d_loss = 0.0;
        for _ in 0..config.d_steps {
            for b in 0..bsz {
                let row = r.random_range(0..rows);
                for t in 0..w {
                    real[t * bsz + b] = dataset[row * w + t];
                }
            }
            let noise = gaussian_noise(noise_len, &mut r);
            let (mut fake, _) = model.generator.forward(&noise, l_noise, bsz, Mode::Train);
            if config.instance_noise > 0.0 {
                for v in real.iter_mut().chain(fake.iter_mut()) {
                    let e: f64 = StandardNormal.sample(&mut r);
                    *v += config.instance_noise * e;
                }
            }
            let (loss, grad) = discriminator_loss_grad(&model.discriminator, &real, &fake, w, bsz);
            d_loss = loss;
            opt_d.step(&mut model.discriminator.params, &grad);
        }
        let noise = gaussian_noise(noise_len, &mut r);
        let d_noise = (config.instance_noise > 0.0).then(|| {
            let e = gaussian_noise(w * bsz, &mut r);
            e.into_iter().map(|v| v * config.instance_noise).collect::<Vec<f64>>()
        });
        let (g_loss, grad, stats) =
            generator_loss_grad(&model.generator, &model.discriminator, &noise, d_noise.as_deref(), w, bsz);
        if !g_loss.is_finite() || !d_loss.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: it, g_loss, d_loss });
        }
        opt_g.step(&mut model.generator.params, &grad);
        model.generator.update_running(&stats);
        if it % config.log_every == 0 || it == config.iterations {
            model.log.push(LogEntry { iteration: it, g_loss, d_loss });
        }
        observer(it, &model);
    }
    Ok(model)
}
