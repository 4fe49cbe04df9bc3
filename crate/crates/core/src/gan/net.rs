//! Temporal convolutional network with valid (unpadded) dilated causal
//! convolutions, PReLU, optional batch norm, residual and skip paths.
//!
//! Activations are time-major `[t][batch][channel]`, so the tap `j` of a
//! convolution over the whole batch is a single GEMM on a contiguous slice.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::gemm;
#[allow(unused_imports)]
use num_traits::Float;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kernel: usize,
    pub dilation: usize,
}

/// One network: `in_channels → hidden` through the blocks, then a 1×1
/// convolution to one output channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub in_channels: usize,
    pub hidden: usize,
    pub blocks: Vec<BlockSpec>,
    pub batch_norm: bool,
}

impl NetSpec {
    /// `1 + 2·Σ dᵢ(kᵢ − 1)`.
    pub fn receptive_field(&self) -> usize {
        1 + 2 * self.blocks.iter().map(|b| b.dilation * (b.kernel - 1)).sum::<usize>()
    }

    pub fn output_len(&self, input_len: usize) -> Option<usize> {
        (input_len + 1).checked_sub(self.receptive_field()).filter(|&l| l > 0)
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).total
    }

    pub fn bn_layers(&self) -> usize {
        if self.batch_norm {
            2 * self.blocks.len()
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvAt {
    w: usize,
    b: Option<usize>,
    cin: usize,
    cout: usize,
    k: usize,
    d: usize,
}

impl ConvAt {
    fn wlen(&self) -> usize {
        self.k * self.cin * self.cout
    }
}

#[derive(Debug, Clone, Copy)]
struct BlockAt {
    c1: ConvAt,
    bn1: Option<usize>,
    a1: usize,
    c2: ConvAt,
    bn2: Option<usize>,
    a2: usize,
    res: Option<ConvAt>,
}

/// Offsets of every parameter group inside the flat parameter vector.
#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<BlockAt>,
    out: ConvAt,
    total: usize,
}

impl Layout {
    fn new(spec: &NetSpec) -> Self {
        let h = spec.hidden;
        let mut at = 0usize;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let mut blocks = Vec::with_capacity(spec.blocks.len());
        let mut cin = spec.in_channels;
        for b in &spec.blocks {
            let conv = |cin: usize, take: &mut dyn FnMut(usize) -> usize| {
                let w = take(b.kernel * cin * h);
                let bias = if spec.batch_norm { None } else { Some(take(h)) };
                ConvAt { w, b: bias, cin, cout: h, k: b.kernel, d: b.dilation }
            };
            let c1 = conv(cin, &mut take);
            let bn1 = spec.batch_norm.then(|| take(2 * h));
            let a1 = take(1);
            let c2 = conv(h, &mut take);
            let bn2 = spec.batch_norm.then(|| take(2 * h));
            let a2 = take(1);
            let res = (cin != h).then(|| {
                let w = take(cin * h);
                let bias = take(h);
                ConvAt { w, b: Some(bias), cin, cout: h, k: 1, d: 1 }
            });
            blocks.push(BlockAt { c1, bn1, a1, c2, bn2, a2, res });
            cin = h;
        }
        let w = take(h);
        let b = take(1);
        let out = ConvAt { w, b: Some(b), cin: h, cout: 1, k: 1, d: 1 };
        Layout { blocks, out, total: at }
    }
}

/// Gathers the `k` dilated taps side by side: row `(t, b)` of the result is
/// `[x[t][b], x[t+d][b], …]`, so a convolution is one GEMM against the
/// `(k·cin) × cout` weight block.
fn unfold(c: &ConvAt, x: &[f64], l_out: usize, bsz: usize) -> Vec<f64> {
    let row = c.k * c.cin;
    let mut u = vec![0.0; l_out * bsz * row];
    for (r, dst) in u.chunks_exact_mut(row).enumerate() {
        for j in 0..c.k {
            let src = (r + j * c.d * bsz) * c.cin;
            dst[j * c.cin..(j + 1) * c.cin].copy_from_slice(&x[src..src + c.cin]);
        }
    }
    u
}

/// Valid dilated convolution; returns `(y, l_out)`.
fn conv_fwd(p: &[f64], c: &ConvAt, x: &[f64], l_in: usize, bsz: usize) -> (Vec<f64>, usize) {
    let l_out = l_in - (c.k - 1) * c.d;
    let rows = l_out * bsz;
    let mut y = vec![0.0; rows * c.cout];
    let w = &p[c.w..c.w + c.wlen()];
    let kc = c.k * c.cin;
    if c.k == 1 {
        gemm(false, false, rows, c.cout, kc, 1.0, &x[..rows * kc], kc, w, c.cout, 0.0, &mut y, c.cout);
    } else {
        let u = unfold(c, x, l_out, bsz);
        gemm(false, false, rows, c.cout, kc, 1.0, &u, kc, w, c.cout, 0.0, &mut y, c.cout);
    }
    if let Some(b) = c.b {
        let bias = &p[b..b + c.cout];
        for row in y.chunks_exact_mut(c.cout) {
            for (v, bb) in row.iter_mut().zip(bias) {
                *v += bb;
            }
        }
    }
    (y, l_out)
}

/// Accumulates parameter gradients into `g` and returns `dx` when asked.
#[allow(clippy::too_many_arguments)]
fn conv_bwd(
    p: &[f64],
    g: &mut [f64],
    c: &ConvAt,
    x: &[f64],
    l_in: usize,
    bsz: usize,
    dy: &[f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    let l_out = l_in - (c.k - 1) * c.d;
    let rows = l_out * bsz;
    let w = &p[c.w..c.w + c.wlen()];
    let kc = c.k * c.cin;
    let gw = &mut g[c.w..c.w + c.wlen()];
    if c.k == 1 {
        gemm(true, false, kc, c.cout, rows, 1.0, &x[..rows * kc], kc, dy, c.cout, 1.0, gw, c.cout);
    } else {
        let u = unfold(c, x, l_out, bsz);
        gemm(true, false, kc, c.cout, rows, 1.0, &u, kc, dy, c.cout, 1.0, gw, c.cout);
    }
    if let Some(b) = c.b {
        let gb = &mut g[b..b + c.cout];
        for row in dy.chunks_exact(c.cout) {
            for (acc, v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; l_in * bsz * c.cin];
        if c.k == 1 {
            gemm(false, true, rows, kc, c.cout, 1.0, dy, c.cout, w, c.cout, 0.0, &mut dx[..rows * kc], kc);
        } else {
            let mut du = vec![0.0; rows * kc];
            gemm(false, true, rows, kc, c.cout, 1.0, dy, c.cout, w, c.cout, 0.0, &mut du, kc);
            for (r, src) in du.chunks_exact(kc).enumerate() {
                for j in 0..c.k {
                    let dst = (r + j * c.d * bsz) * c.cin;
                    for (a, b) in dx[dst..dst + c.cin].iter_mut().zip(&src[j * c.cin..(j + 1) * c.cin]) {
                        *a += b;
                    }
                }
            }
        }
        dx
    })
}

struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Per-channel statistics over all `rows = l·batch` positions.
fn bn_stats(x: &[f64], ch: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = x.len() / ch;
    let mut mean = vec![0.0; ch];
    for row in x.chunks_exact(ch) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);
    let mut var = vec![0.0; ch];
    for row in x.chunks_exact(ch) {
        for c in 0..ch {
            let e = row[c] - mean[c];
            var[c] += e * e;
        }
    }
    var.iter_mut().for_each(|v| *v /= rows as f64);
    (mean, var)
}

fn bn_apply(p: &[f64], at: usize, x: &[f64], ch: usize, mean: &[f64], var: &[f64]) -> (Vec<f64>, BnCache) {
    let gamma = &p[at..at + ch];
    let beta = &p[at + ch..at + 2 * ch];
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = vec![0.0; x.len()];
    let mut y = vec![0.0; x.len()];
    for ((row, xh), yr) in x.chunks_exact(ch).zip(xhat.chunks_exact_mut(ch)).zip(y.chunks_exact_mut(ch)) {
        for c in 0..ch {
            xh[c] = (row[c] - mean[c]) * inv_std[c];
            yr[c] = gamma[c] * xh[c] + beta[c];
        }
    }
    (y, BnCache { xhat, inv_std })
}

fn bn_bwd(p: &[f64], g: &mut [f64], at: usize, ch: usize, cache: &BnCache, dy: &[f64]) -> Vec<f64> {
    let rows = (dy.len() / ch) as f64;
    let gamma = &p[at..at + ch];
    let mut sum_dy = vec![0.0; ch];
    let mut sum_dy_xhat = vec![0.0; ch];
    for (d, xh) in dy.chunks_exact(ch).zip(cache.xhat.chunks_exact(ch)) {
        for c in 0..ch {
            sum_dy[c] += d[c];
            sum_dy_xhat[c] += d[c] * xh[c];
        }
    }
    for c in 0..ch {
        g[at + c] += sum_dy_xhat[c];
        g[at + ch + c] += sum_dy[c];
    }
    let mut dx = vec![0.0; dy.len()];
    for ((d, xh), o) in dy.chunks_exact(ch).zip(cache.xhat.chunks_exact(ch)).zip(dx.chunks_exact_mut(ch)) {
        for c in 0..ch {
            o[c] = gamma[c] * cache.inv_std[c] / rows * (rows * d[c] - sum_dy[c] - xh[c] * sum_dy_xhat[c]);
        }
    }
    dx
}

fn prelu(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| if v >= 0.0 { v } else { a * v }).collect()
}

fn prelu_bwd(a: f64, x: &[f64], dy: &[f64], ga: &mut f64) -> Vec<f64> {
    let mut dx = vec![0.0; x.len()];
    for ((o, &v), &d) in dx.iter_mut().zip(x).zip(dy) {
        if v >= 0.0 {
            *o = d;
        } else {
            *o = a * d;
            *ga += v * d;
        }
    }
    dx
}

/// Last `l_keep` time steps of a `[t][batch][ch]` buffer.
fn crop(x: &[f64], l: usize, l_keep: usize, row: usize) -> &[f64] {
    &x[(l - l_keep) * row..]
}

/// Batch-norm mode for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; the observed statistics are returned for the
    /// running averages.
    Train,
    /// Running statistics.
    Eval,
}

struct BlockCache {
    x: Vec<f64>,
    l_in: usize,
    bn1: Option<BnCache>,
    u1: Vec<f64>,
    p1: Vec<f64>,
    l_mid: usize,
    bn2: Option<BnCache>,
    u2: Vec<f64>,
    l_out: usize,
}

/// Everything kept from a training-mode forward pass.
pub struct Trace {
    blocks: Vec<BlockCache>,
    skip: Vec<f64>,
    l_final: usize,
    bsz: usize,
    /// `(mean, var)` per batch-norm layer, in layer order.
    pub batch_stats: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Parameters and batch-norm running statistics of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tcn {
    pub spec: NetSpec,
    pub params: Vec<f64>,
    /// Per batch-norm layer `[mean (hidden), var (hidden)]`.
    pub running: Vec<Vec<f64>>,
}

impl Tcn {
    /// He fan-in initialization; biases and batch-norm shifts zero, scales
    /// one, PReLU slopes 0.25.
    pub fn init<R: Rng + ?Sized>(spec: NetSpec, rng: &mut R) -> Self {
        let lay = Layout::new(&spec);
        let h = spec.hidden;
        let mut params = vec![0.0; lay.total];
        let mut he = |c: &ConvAt, params: &mut [f64]| {
            let std = (2.0 / (c.k * c.cin) as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("finite std");
            for v in &mut params[c.w..c.w + c.wlen()] {
                *v = dist.sample(rng);
            }
        };
        for b in &lay.blocks {
            he(&b.c1, &mut params);
            he(&b.c2, &mut params);
            if let Some(r) = &b.res {
                he(r, &mut params);
            }
            for bn in [b.bn1, b.bn2].into_iter().flatten() {
                params[bn..bn + h].fill(1.0);
            }
            params[b.a1] = PRELU_INIT;
            params[b.a2] = PRELU_INIT;
        }
        he(&lay.out, &mut params);
        let running = (0..spec.bn_layers()).map(|_| [vec![0.0; h], vec![1.0; h]].concat()).collect();
        Tcn { spec, params, running }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Offsets `(weights, bias)` of the final 1×1 output layer.
    pub fn output_layer(&self) -> (core::ops::Range<usize>, usize) {
        let lay = Layout::new(&self.spec);
        (lay.out.w..lay.out.w + lay.out.wlen(), lay.out.b.expect("output bias"))
    }

    /// Shape sanity for deserialized networks.
    pub fn is_consistent(&self) -> bool {
        self.params.len() == self.spec.param_count()
            && self.running.len() == self.spec.bn_layers()
            && self.running.iter().all(|r| r.len() == 2 * self.spec.hidden)
            && self.spec.blocks.iter().all(|b| b.kernel >= 1 && b.dilation >= 1)
            && self.spec.hidden >= 1
            && self.spec.in_channels >= 1
    }

    /// Forward pass over `x` (`l_in × bsz × in_channels`, time-major);
    /// returns the output (`l_out × bsz`) and the trace for backprop.
    pub fn forward(&self, x: &[f64], l_in: usize, bsz: usize, mode: Mode) -> (Vec<f64>, Trace) {
        let lay = Layout::new(&self.spec);
        let p = &self.params;
        let h = self.spec.hidden;
        let l_final = self.spec.output_len(l_in).expect("input shorter than receptive field");
        assert_eq!(x.len(), l_in * bsz * self.spec.in_channels, "input buffer shape");
        let mut blocks = Vec::with_capacity(lay.blocks.len());
        let mut batch_stats = Vec::new();
        let mut skip = vec![0.0; l_final * bsz * h];
        let mut cur = x.to_vec();
        let mut l = l_in;
        let mut bn_idx = 0;
        let norm = |at: Option<usize>, z: &[f64], bn_idx: &mut usize, stats: &mut Vec<(Vec<f64>, Vec<f64>)>| match at {
            None => (z.to_vec(), None),
            Some(at) => {
                let (mean, var) = match mode {
                    Mode::Train => bn_stats(z, h),
                    Mode::Eval => {
                        let r = &self.running[*bn_idx];
                        (r[..h].to_vec(), r[h..].to_vec())
                    }
                };
                let (u, cache) = bn_apply(p, at, z, h, &mean, &var);
                stats.push((mean, var));
                *bn_idx += 1;
                (u, Some(cache))
            }
        };
        for b in &lay.blocks {
            let (z1, l_mid) = conv_fwd(p, &b.c1, &cur, l, bsz);
            let (u1, bn1) = norm(b.bn1, &z1, &mut bn_idx, &mut batch_stats);
            let p1 = prelu(p[b.a1], &u1);
            let (z2, l_out) = conv_fwd(p, &b.c2, &p1, l_mid, bsz);
            let (u2, bn2) = norm(b.bn2, &z2, &mut bn_idx, &mut batch_stats);
            let y = prelu(p[b.a2], &u2);
            let row = bsz * h;
            for (s, v) in skip.iter_mut().zip(crop(&y, l_out, l_final, row)) {
                *s += v;
            }
            let cin = b.c1.cin;
            let res_in = crop(&cur, l, l_out, bsz * cin);
            let mut next = match &b.res {
                Some(r) => conv_fwd(p, r, res_in, l_out, bsz).0,
                None => res_in.to_vec(),
            };
            for (n, v) in next.iter_mut().zip(&y) {
                *n += v;
            }
            blocks.push(BlockCache { x: cur, l_in: l, bn1, u1, p1, l_mid, bn2, u2, l_out });
            cur = next;
            l = l_out;
        }
        let (out, _) = conv_fwd(p, &lay.out, &skip, l_final, bsz);
        if mode == Mode::Eval {
            batch_stats.clear();
        }
        (out, Trace { blocks, skip, l_final, bsz, batch_stats })
    }

    /// Inference without keeping a trace.
    pub fn infer(&self, x: &[f64], l_in: usize, bsz: usize) -> Vec<f64> {
        self.forward(x, l_in, bsz, Mode::Eval).0
    }

    /// Backprop of `dout` (`l_final × bsz`) through a trace; returns the
    /// parameter gradient and, optionally, the input gradient.
    pub fn backward(&self, trace: &Trace, dout: &[f64], want_dx: bool) -> (Vec<f64>, Option<Vec<f64>>) {
        let lay = Layout::new(&self.spec);
        let p = &self.params;
        let h = self.spec.hidden;
        let bsz = trace.bsz;
        let mut g = vec![0.0; p.len()];
        let dskip = conv_bwd(p, &mut g, &lay.out, &trace.skip, trace.l_final, bsz, dout, true).expect("dx requested");
        // Gradient flowing into the current block output along the residual chain.
        let mut dnext: Option<Vec<f64>> = None;
        let row = bsz * h;
        for (b, c) in lay.blocks.iter().zip(&trace.blocks).rev() {
            // The block output `h = y + res(x)` feeds the next block; `y` also
            // feeds the skip sum (aligned at the end of the block output).
            let dh = dnext.take().unwrap_or_else(|| vec![0.0; c.l_out * row]);
            let mut dy = dh.clone();
            let off = (c.l_out - trace.l_final) * row;
            for (d, s) in dy[off..].iter_mut().zip(&dskip) {
                *d += s;
            }
            let cin = b.c1.cin;
            let rin = bsz * cin;
            let mut dx = vec![0.0; c.l_in * rin];
            // Residual path.
            let res_off = (c.l_in - c.l_out) * rin;
            match &b.res {
                Some(r) => {
                    let res_in = crop(&c.x, c.l_in, c.l_out, rin);
                    let dres = conv_bwd(p, &mut g, r, res_in, c.l_out, bsz, &dh, true).expect("dx requested");
                    for (d, v) in dx[res_off..].iter_mut().zip(&dres) {
                        *d += v;
                    }
                }
                None => {
                    for (d, v) in dx[res_off..].iter_mut().zip(&dh) {
                        *d += v;
                    }
                }
            }
            // Main path.
            let mut ga = 0.0;
            let du2 = prelu_bwd(p[b.a2], &c.u2, &dy, &mut ga);
            g[b.a2] += ga;
            let dz2 = match (b.bn2, &c.bn2) {
                (Some(at), Some(cache)) => bn_bwd(p, &mut g, at, h, cache, &du2),
                _ => du2,
            };
            let dp1 = conv_bwd(p, &mut g, &b.c2, &c.p1, c.l_mid, bsz, &dz2, true).expect("dx requested");
            let mut ga = 0.0;
            let du1 = prelu_bwd(p[b.a1], &c.u1, &dp1, &mut ga);
            g[b.a1] += ga;
            let dz1 = match (b.bn1, &c.bn1) {
                (Some(at), Some(cache)) => bn_bwd(p, &mut g, at, h, cache, &du1),
                _ => du1,
            };
            let dmain = conv_bwd(p, &mut g, &b.c1, &c.x, c.l_in, bsz, &dz1, true).expect("dx requested");
            for (d, v) in dx.iter_mut().zip(&dmain) {
                *d += v;
            }
            dnext = Some(dx);
        }
        let dx = if want_dx { dnext } else { None };
        (g, dx)
    }

    /// Blend observed batch statistics into the running averages.
    pub fn update_running(&mut self, batch_stats: &[(Vec<f64>, Vec<f64>)]) {
        let h = self.spec.hidden;
        for (r, (mean, var)) in self.running.iter_mut().zip(batch_stats) {
            for c in 0..h {
                r[c] = BN_MOMENTUM * r[c] + (1.0 - BN_MOMENTUM) * mean[c];
                r[h + c] = BN_MOMENTUM * r[h + c] + (1.0 - BN_MOMENTUM) * var[c];
            }
        }
    }
}
