//! Multi-scale MLP-mixer forecaster with explicit reverse-mode gradients.
//!
//! Data flow for one window `x` of shape `N x T x D`:
//!
//! 1. indicator mixing, per (stock, step): `u = x + W2 φ(W1 x + b1) + b2`
//! 2. time mixing, per scale `k` with `P = T / k` patches averaged over the
//!    first `P k` steps, per (stock, feature):
//!    `e = u[T-1] + Σ_k (c_k · φ(A_k z_k + a_k) + β_k)`
//! 3. stock mixing, per feature, through an `M`-dimensional market state:
//!    `f = e + S2 φ(S1 e + s1) + s2`
//! 4. head: `score_i = w · f_i + b (+ x[i, T-1, anchor])`
//!
//! `φ` is leaky-rectified with slope 0.01. The optional anchor adds the last
//! observed value of one input column (the normalized close) to the score, so
//! the head learns a correction to "no change".

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTensor;

pub const LEAKY_SLOPE: f64 = 0.01;

#[inline]
fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

#[inline]
fn leaky_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixerError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("input shape {got:?} does not match model shape {expected:?}")]
    Shape { expected: (usize, usize, usize), got: (usize, usize, usize) },
    #[error("non-finite input")]
    NonFinite,
    #[error("forward state is stale (recorded at version {tape}, model is at {model})")]
    StaleTape { tape: u64, model: u64 },
    #[error("upstream gradient has length {got}, expected {expected}")]
    Upstream { expected: usize, got: usize },
    #[error("last close must be positive, got {0}")]
    NonPositiveClose(f64),
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamCount { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixerConfig {
    pub n_stocks: usize,
    pub lookback: usize,
    pub features: usize,
    pub hidden: usize,
    pub scales: Vec<usize>,
    pub market_dim: usize,
    /// Input column added to the score as a residual; `None` disables it.
    pub anchor: Option<usize>,
}

impl MixerConfig {
    pub fn new(n_stocks: usize, lookback: usize, features: usize) -> Self {
        MixerConfig {
            n_stocks,
            lookback,
            features,
            hidden: 16,
            scales: vec![1, 2, 4],
            market_dim: 8,
            anchor: Some(crate::features::CLOSE_INDEX),
        }
    }

    pub fn validate(&self) -> Result<(), MixerError> {
        let bad = |m: &str| Err(MixerError::Config(m.into()));
        if self.n_stocks == 0 || self.lookback == 0 || self.features == 0 {
            return bad("N, T and D must be at least 1");
        }
        if self.hidden == 0 {
            return bad("hidden width must be at least 1");
        }
        if self.market_dim == 0 {
            return bad("market dimension must be at least 1");
        }
        if self.scales.is_empty() {
            return bad("at least one time scale is required");
        }
        for (k, s) in self.scales.iter().enumerate() {
            if *s == 0 || *s > self.lookback {
                return Err(MixerError::Config(format!("scale {s} must lie in 1..={}", self.lookback)));
            }
            if self.scales[..k].contains(s) {
                return Err(MixerError::Config(format!("scale {s} listed twice")));
            }
        }
        if let Some(a) = self.anchor {
            if a >= self.features {
                return Err(MixerError::Config(format!("anchor column {a} outside 0..{}", self.features)));
            }
        }
        Ok(())
    }

    /// Patches seen by a scale: the largest multiple of `scale` not above T.
    pub fn patches(&self, scale: usize) -> usize {
        self.lookback / scale
    }
}

/// Named slice of the flat parameter vector; `rows x cols`, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    /// Inputs feeding each output; zero marks a bias.
    pub fan_in: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
struct ScaleOffsets {
    scale: usize,
    patches: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Clone, Debug)]
struct Offsets {
    ind_w1: usize,
    ind_b1: usize,
    ind_w2: usize,
    ind_b2: usize,
    scales: Vec<ScaleOffsets>,
    st_w1: usize,
    st_b1: usize,
    st_w2: usize,
    st_b2: usize,
    head_w: usize,
    head_b: usize,
}

fn layout(config: &MixerConfig) -> (Vec<ParamBlock>, Offsets) {
    let (n, d, h, m) = (config.n_stocks, config.features, config.hidden, config.market_dim);
    let mut blocks: Vec<ParamBlock> = Vec::new();
    let mut push = |name: String, rows: usize, cols: usize, fan_in: usize| -> usize {
        let offset = blocks.last().map_or(0, |b| b.offset + b.len());
        blocks.push(ParamBlock { name, rows, cols, offset, fan_in });
        offset
    };
    let ind_w1 = push("indicator.w1".into(), h, d, d);
    let ind_b1 = push("indicator.b1".into(), h, 1, 0);
    let ind_w2 = push("indicator.w2".into(), d, h, h);
    let ind_b2 = push("indicator.b2".into(), d, 1, 0);
    let mut scales = Vec::new();
    for &scale in &config.scales {
        let p = config.patches(scale);
        let w1 = push(format!("time{scale}.w1"), h, p, p);
        let b1 = push(format!("time{scale}.b1"), h, 1, 0);
        let w2 = push(format!("time{scale}.w2"), 1, h, h);
        let b2 = push(format!("time{scale}.b2"), 1, 1, 0);
        scales.push(ScaleOffsets { scale, patches: p, w1, b1, w2, b2 });
    }
    let st_w1 = push("stock.w1".into(), m, n, n);
    let st_b1 = push("stock.b1".into(), m, 1, 0);
    let st_w2 = push("stock.w2".into(), n, m, m);
    let st_b2 = push("stock.b2".into(), n, 1, 0);
    let head_w = push("head.w".into(), 1, d, d);
    let head_b = push("head.b".into(), 1, 1, 0);
    let offsets = Offsets { ind_w1, ind_b1, ind_w2, ind_b2, scales, st_w1, st_b1, st_w2, st_b2, head_w, head_b };
    (blocks, offsets)
}

/// Gradient (or any other parameter-shaped quantity), one flat array that
/// splits into the model's blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub blocks: Vec<ParamBlock>,
    pub values: Vec<f64>,
}

impl GradientSet {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|b| b.name == name).map(|b| &self.values[b.range()])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Intermediate values of one forward pass, needed by `backward`.
#[derive(Clone, Debug)]
pub struct Tape {
    version: u64,
    x: Vec<f64>,
    ind_pre: Vec<f64>,
    /// per scale, `[i][d][p]`
    z: Vec<Vec<f64>>,
    /// per scale, `[i][d][h]`
    time_pre: Vec<Vec<f64>>,
    /// `[i][d]`
    e: Vec<f64>,
    /// `[m][d]`
    st_pre: Vec<f64>,
    f: Vec<f64>,
    pub scores: Vec<f64>,
}

impl Tape {
    /// Signs of every pre-activation; a change between two passes means a
    /// nonlinearity kink was crossed.
    pub fn activation_pattern(&self) -> Vec<bool> {
        let mut out: Vec<bool> = self.ind_pre.iter().map(|v| *v > 0.0).collect();
        for t in &self.time_pre {
            out.extend(t.iter().map(|v| *v > 0.0));
        }
        out.extend(self.st_pre.iter().map(|v| *v > 0.0));
        out
    }
}

#[derive(Clone, Debug)]
pub struct MixerModel {
    config: MixerConfig,
    blocks: Vec<ParamBlock>,
    offsets: Offsets,
    params: Vec<f64>,
    version: u64,
    pub seed: u64,
    /// Optimizer steps applied so far.
    pub step: u64,
}

impl PartialEq for MixerModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

/// Closed-form parameter count of a config.
pub fn parameter_count(config: &MixerConfig) -> usize {
    let (n, d, h, m) = (config.n_stocks, config.features, config.hidden, config.market_dim);
    let indicator = 2 * h * d + h + d;
    let time: usize = config.scales.iter().map(|s| h * config.patches(*s) + 2 * h + 1).sum();
    let stock = 2 * m * n + m + n;
    indicator + time + stock + d + 1
}

impl MixerModel {
    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(config: MixerConfig, seed: u64) -> Result<Self, MixerError> {
        config.validate()?;
        let (blocks, offsets) = layout(&config);
        let total = blocks.last().map_or(0, |b| b.offset + b.len());
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for b in &blocks {
            if b.fan_in > 0 {
                let bound = 1.0 / libm::sqrt(b.fan_in as f64);
                for p in &mut params[b.range()] {
                    *p = rng.random_range(-bound..bound);
                }
            }
        }
        Ok(MixerModel { config, blocks, offsets, params, version: 0, seed, step: 0 })
    }

    /// Rebuild from stored parameters.
    pub fn from_params(config: MixerConfig, params: Vec<f64>, seed: u64, step: u64) -> Result<Self, MixerError> {
        config.validate()?;
        let (blocks, offsets) = layout(&config);
        let expected = blocks.last().map_or(0, |b| b.offset + b.len());
        if params.len() != expected {
            return Err(MixerError::ParamCount { expected, got: params.len() });
        }
        Ok(MixerModel { config, blocks, offsets, params, version: 0, seed, step })
    }

    pub fn config(&self) -> &MixerConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|b| b.name == name).map(|b| &self.params[b.range()])
    }

    /// Mutable access; invalidates outstanding tapes.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    pub fn block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let range = self.blocks.iter().find(|b| b.name == name)?.range();
        self.version += 1;
        Some(&mut self.params[range])
    }

    pub fn zero_gradients(&self) -> GradientSet {
        GradientSet { blocks: self.blocks.clone(), values: vec![0.0; self.params.len()] }
    }

    pub fn forward(&self, x: &FeatureTensor) -> Result<Vec<f64>, MixerError> {
        self.forward_with_tape(x).map(|t| t.scores)
    }

    pub fn forward_with_tape(&self, x: &FeatureTensor) -> Result<Tape, MixerError> {
        let c = &self.config;
        let (n, t_len, d, h, m) = (c.n_stocks, c.lookback, c.features, c.hidden, c.market_dim);
        if (x.n, x.t, x.d) != (n, t_len, d) || x.values.len() != n * t_len * d {
            return Err(MixerError::Shape { expected: (n, t_len, d), got: (x.n, x.t, x.d) });
        }
        if x.values.iter().any(|v| !v.is_finite()) {
            return Err(MixerError::NonFinite);
        }
        let o = &self.offsets;
        let p = &self.params;

        // indicator mixing
        let w1 = &p[o.ind_w1..o.ind_w1 + h * d];
        let b1 = &p[o.ind_b1..o.ind_b1 + h];
        let w2 = &p[o.ind_w2..o.ind_w2 + d * h];
        let b2 = &p[o.ind_b2..o.ind_b2 + d];
        let rows = n * t_len;
        let mut ind_pre = vec![0.0; rows * h];
        let mut u = vec![0.0; rows * d];
        let mut act = vec![0.0; h];
        for r in 0..rows {
            let xr = &x.values[r * d..(r + 1) * d];
            let pre = &mut ind_pre[r * h..(r + 1) * h];
            for j in 0..h {
                let wj = &w1[j * d..(j + 1) * d];
                pre[j] = b1[j] + wj.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>();
                act[j] = leaky(pre[j]);
            }
            let ur = &mut u[r * d..(r + 1) * d];
            for k in 0..d {
                let wk = &w2[k * h..(k + 1) * h];
                ur[k] = xr[k] + b2[k] + wk.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>();
            }
        }

        // time mixing
        let mut e = vec![0.0; n * d];
        for i in 0..n {
            let last = (i * t_len + t_len - 1) * d;
            e[i * d..(i + 1) * d].copy_from_slice(&u[last..last + d]);
        }
        let mut zs = Vec::with_capacity(o.scales.len());
        let mut time_pres = Vec::with_capacity(o.scales.len());
        for so in &o.scales {
            let (k, pn) = (so.scale, so.patches);
            let a = &p[so.w1..so.w1 + h * pn];
            let ab = &p[so.b1..so.b1 + h];
            let cw = &p[so.w2..so.w2 + h];
            let beta = p[so.b2];
            let inv = 1.0 / k as f64;
            let mut z = vec![0.0; n * d * pn];
            let mut pre = vec![0.0; n * d * h];
            for i in 0..n {
                for q in 0..pn {
                    for s in 0..k {
                        let row = (i * t_len + q * k + s) * d;
                        for f in 0..d {
                            z[(i * d + f) * pn + q] += u[row + f] * inv;
                        }
                    }
                }
                for f in 0..d {
                    let zr = &z[(i * d + f) * pn..(i * d + f + 1) * pn];
                    let pr = &mut pre[(i * d + f) * h..(i * d + f + 1) * h];
                    let mut out = beta;
                    for j in 0..h {
                        let aj = &a[j * pn..(j + 1) * pn];
                        pr[j] = ab[j] + aj.iter().zip(zr).map(|(a, b)| a * b).sum::<f64>();
                        out += cw[j] * leaky(pr[j]);
                    }
                    e[i * d + f] += out;
                }
            }
            zs.push(z);
            time_pres.push(pre);
        }

        // stock mixing
        let s1 = &p[o.st_w1..o.st_w1 + m * n];
        let s1b = &p[o.st_b1..o.st_b1 + m];
        let s2 = &p[o.st_w2..o.st_w2 + n * m];
        let s2b = &p[o.st_b2..o.st_b2 + n];
        let mut st_pre = vec![0.0; m * d];
        for mm in 0..m {
            for f in 0..d {
                let mut acc = s1b[mm];
                for i in 0..n {
                    acc += s1[mm * n + i] * e[i * d + f];
                }
                st_pre[mm * d + f] = acc;
            }
        }
        let mut fm = e.clone();
        for i in 0..n {
            for f in 0..d {
                let mut acc = s2b[i];
                for mm in 0..m {
                    acc += s2[i * m + mm] * leaky(st_pre[mm * d + f]);
                }
                fm[i * d + f] += acc;
            }
        }

        // head
        let hw = &p[o.head_w..o.head_w + d];
        let hb = p[o.head_b];
        let scores = (0..n)
            .map(|i| {
                let mut s = hb + hw.iter().zip(&fm[i * d..(i + 1) * d]).map(|(a, b)| a * b).sum::<f64>();
                if let Some(a) = c.anchor {
                    s += x.get(i, t_len - 1, a);
                }
                s
            })
            .collect();

        Ok(Tape {
            version: self.version,
            x: x.values.clone(),
            ind_pre,
            z: zs,
            time_pre: time_pres,
            e,
            st_pre,
            f: fm,
            scores,
        })
    }

    /// Gradient of `Σ_i upstream_i · score_i` with respect to every parameter.
    pub fn backward(&self, tape: &Tape, upstream: &[f64]) -> Result<GradientSet, MixerError> {
        let mut grads = self.zero_gradients();
        self.backward_into(tape, upstream, &mut grads)?;
        Ok(grads)
    }

    /// As `backward`, accumulating into `grads`.
    pub fn backward_into(&self, tape: &Tape, upstream: &[f64], grads: &mut GradientSet) -> Result<(), MixerError> {
        if tape.version != self.version {
            return Err(MixerError::StaleTape { tape: tape.version, model: self.version });
        }
        let c = &self.config;
        let (n, t_len, d, h, m) = (c.n_stocks, c.lookback, c.features, c.hidden, c.market_dim);
        if upstream.len() != n {
            return Err(MixerError::Upstream { expected: n, got: upstream.len() });
        }
        if grads.values.len() != self.params.len() {
            return Err(MixerError::ParamCount { expected: self.params.len(), got: grads.values.len() });
        }
        let o = &self.offsets;
        let p = &self.params;
        let g = &mut grads.values;

        // head
        let hw = &p[o.head_w..o.head_w + d];
        let mut df = vec![0.0; n * d];
        for i in 0..n {
            let ds = upstream[i];
            g[o.head_b] += ds;
            for f in 0..d {
                g[o.head_w + f] += ds * tape.f[i * d + f];
                df[i * d + f] = ds * hw[f];
            }
        }

        // stock mixing; f = e + S2 φ(S1 e + s1) + s2
        let s1 = &p[o.st_w1..o.st_w1 + m * n];
        let s2 = &p[o.st_w2..o.st_w2 + n * m];
        let mut de = df.clone();
        let mut dpre = vec![0.0; m * d];
        for i in 0..n {
            for f in 0..d {
                let dg = df[i * d + f];
                g[o.st_b2 + i] += dg;
                for mm in 0..m {
                    let pre = tape.st_pre[mm * d + f];
                    g[o.st_w2 + i * m + mm] += dg * leaky(pre);
                    dpre[mm * d + f] += s2[i * m + mm] * dg;
                }
            }
        }
        for mm in 0..m {
            for f in 0..d {
                let dp = dpre[mm * d + f] * leaky_grad(tape.st_pre[mm * d + f]);
                g[o.st_b1 + mm] += dp;
                for i in 0..n {
                    g[o.st_w1 + mm * n + i] += dp * tape.e[i * d + f];
                    de[i * d + f] += s1[mm * n + i] * dp;
                }
            }
        }

        // time mixing
        let mut du = vec![0.0; n * t_len * d];
        for i in 0..n {
            let last = (i * t_len + t_len - 1) * d;
            for f in 0..d {
                du[last + f] += de[i * d + f];
            }
        }
        let mut dz_row = Vec::new();
        for (sk, so) in o.scales.iter().enumerate() {
            let (k, pn) = (so.scale, so.patches);
            let a = &p[so.w1..so.w1 + h * pn];
            let cw = &p[so.w2..so.w2 + h];
            let z = &tape.z[sk];
            let pre = &tape.time_pre[sk];
            let inv = 1.0 / k as f64;
            dz_row.clear();
            dz_row.resize(pn, 0.0);
            for i in 0..n {
                for f in 0..d {
                    let dout = de[i * d + f];
                    g[so.b2] += dout;
                    let zr = &z[(i * d + f) * pn..(i * d + f + 1) * pn];
                    let pr = &pre[(i * d + f) * h..(i * d + f + 1) * h];
                    dz_row.iter_mut().for_each(|v| *v = 0.0);
                    for j in 0..h {
                        g[so.w2 + j] += dout * leaky(pr[j]);
                        let dp = dout * cw[j] * leaky_grad(pr[j]);
                        g[so.b1 + j] += dp;
                        let aj = &a[j * pn..(j + 1) * pn];
                        for q in 0..pn {
                            g[so.w1 + j * pn + q] += dp * zr[q];
                            dz_row[q] += aj[q] * dp;
                        }
                    }
                    for q in 0..pn {
                        let share = dz_row[q] * inv;
                        for s in 0..k {
                            du[(i * t_len + q * k + s) * d + f] += share;
                        }
                    }
                }
            }
        }

        // indicator mixing; u = x + W2 φ(W1 x + b1) + b2
        let w2 = &p[o.ind_w2..o.ind_w2 + d * h];
        let mut dact = vec![0.0; h];
        for r in 0..n * t_len {
            let dur = &du[r * d..(r + 1) * d];
            let pre = &tape.ind_pre[r * h..(r + 1) * h];
            let xr = &tape.x[r * d..(r + 1) * d];
            dact.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..d {
                let dk = dur[k];
                g[o.ind_b2 + k] += dk;
                let row = o.ind_w2 + k * h;
                for j in 0..h {
                    g[row + j] += dk * leaky(pre[j]);
                    dact[j] += w2[k * h + j] * dk;
                }
            }
            for j in 0..h {
                let dp = dact[j] * leaky_grad(pre[j]);
                g[o.ind_b1 + j] += dp;
                let row = o.ind_w1 + j * d;
                for k in 0..d {
                    g[row + k] += dp * xr[k];
                }
            }
        }
        Ok(())
    }
}

/// One-step return `(p_hat - p_prev) / p_prev` after mapping a normalized score back
/// to price units with the stock's close statistics.
pub fn score_to_return(score: f64, last_close: f64, close_mean: f64, close_std: f64) -> Result<f64, MixerError> {
    if !(last_close > 0.0) {
        return Err(MixerError::NonPositiveClose(last_close));
    }
    let predicted = close_std * score + close_mean;
    Ok((predicted - last_close) / last_close)
}

/// Per-stock price context needed to turn scores into returns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReturnScale {
    pub last_close: Vec<f64>,
    pub close_mean: Vec<f64>,
    pub close_std: Vec<f64>,
}

impl ReturnScale {
    /// Identity mapping (`return == score`) for `n` stocks.
    pub fn identity(n: usize) -> Self {
        ReturnScale { last_close: vec![1.0; n], close_mean: vec![1.0; n], close_std: vec![1.0; n] }
    }

    pub fn returns(&self, scores: &[f64]) -> Result<Vec<f64>, MixerError> {
        scores
            .iter()
            .enumerate()
            .map(|(i, s)| score_to_return(*s, self.last_close[i], self.close_mean[i], self.close_std[i]))
            .collect()
    }

    /// `d return_i / d score_i`.
    pub fn slopes(&self) -> Vec<f64> {
        self.close_std.iter().zip(&self.last_close).map(|(s, p)| s / p).collect()
    }
}

pub fn predict_returns(model: &MixerModel, x: &FeatureTensor, scale: &ReturnScale) -> Result<Vec<f64>, MixerError> {
    let scores = model.forward(x)?;
    scale.returns(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_input(n: usize, t: usize, d: usize, seed: u64) -> FeatureTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FeatureTensor { n, t, d, values: (0..n * t * d).map(|_| rng.random_range(-1.0..1.0)).collect() }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = MixerConfig::new(5, 8, 11);
        assert_eq!(MixerModel::init(cfg.clone(), 3).unwrap().params(), MixerModel::init(cfg, 3).unwrap().params());
    }

    #[test]
    fn zero_hidden_rejected() {
        let mut cfg = MixerConfig::new(5, 8, 11);
        cfg.hidden = 0;
        assert!(matches!(MixerModel::init(cfg, 1), Err(MixerError::Config(_))));
        let mut cfg = MixerConfig::new(5, 8, 11);
        cfg.scales = vec![16];
        assert!(MixerModel::init(cfg, 1).is_err());
    }

    #[test]
    fn biases_start_at_zero() {
        let model = MixerModel::init(MixerConfig::new(3, 4, 5), 9).unwrap();
        for b in model.blocks().iter().filter(|b| b.fan_in == 0) {
            assert!(model.params()[b.range()].iter().all(|v| *v == 0.0), "{}", b.name);
        }
    }

    #[test]
    fn zero_input_zero_head_gives_zero_scores() {
        let mut model = MixerModel::init(MixerConfig::new(4, 6, 5), 1).unwrap();
        model.block_mut("head.w").unwrap().fill(0.0);
        let scores = model.forward(&FeatureTensor::zeros(4, 6, 5)).unwrap();
        assert_eq!(scores, vec![0.0; 4]);
    }

    #[test]
    fn one_score_per_stock() {
        let model = MixerModel::init(MixerConfig::new(5, 16, 11), 2).unwrap();
        assert_eq!(model.forward(&random_input(5, 16, 11, 4)).unwrap().len(), 5);
    }

    #[test]
    fn shape_and_finiteness_checked() {
        let model = MixerModel::init(MixerConfig::new(5, 8, 11), 2).unwrap();
        assert!(matches!(model.forward(&random_input(4, 8, 11, 1)), Err(MixerError::Shape { .. })));
        let mut x = random_input(5, 8, 11, 1);
        x.values[3] = f64::NAN;
        assert_eq!(model.forward(&x).unwrap_err(), MixerError::NonFinite);
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let model = MixerModel::init(MixerConfig::new(4, 6, 5), 1).unwrap();
        let tape = model.forward_with_tape(&random_input(4, 6, 5, 2)).unwrap();
        let g = model.backward(&tape, &[0.0; 4]).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn head_weight_gradient_is_activation_times_upstream() {
        let model = MixerModel::init(MixerConfig::new(4, 6, 5), 1).unwrap();
        let tape = model.forward_with_tape(&random_input(4, 6, 5, 2)).unwrap();
        let mut up = [0.0; 4];
        up[2] = 0.7;
        let g = model.backward(&tape, &up).unwrap();
        let hw = g.block("head.w").unwrap();
        for f in 0..5 {
            assert_eq!(hw[f], 0.7 * tape.f[2 * 5 + f]);
        }
        assert_eq!(g.block("head.b").unwrap(), &[0.7]);
    }

    #[test]
    fn stale_tape_rejected() {
        let mut model = MixerModel::init(MixerConfig::new(2, 4, 3), 1).unwrap();
        let tape = model.forward_with_tape(&random_input(2, 4, 3, 2)).unwrap();
        model.params_mut()[0] += 1.0;
        assert!(matches!(model.backward(&tape, &[1.0, 1.0]), Err(MixerError::StaleTape { .. })));
    }

    #[test]
    fn return_conversion() {
        // std 1, mean 0 so the score is the price itself
        assert!((score_to_return(101.0, 100.0, 0.0, 1.0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(score_to_return(100.0, 100.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(score_to_return(1.0, 0.0, 0.0, 1.0).unwrap_err(), MixerError::NonPositiveClose(0.0));
    }

    #[test]
    fn parameter_count_formula() {
        let mut cfg = MixerConfig::new(5, 8, 11);
        cfg.hidden = 16;
        cfg.market_dim = 4;
        let model = MixerModel::init(cfg.clone(), 0).unwrap();
        assert_eq!(model.params().len(), parameter_count(&cfg));
        assert_eq!(parameter_count(&cfg), 763);
    }
}
