//! Neural building blocks on top of the autodiff tensors: linear layers,
//! layer norm, multi-head self-attention, feed-forward blocks, and AdamW.
//!
//! Layers hold their parameters as [`Tensor`] leaves and expose them through
//! [`Params`] for optimizers and checkpointing. Forward passes take and return
//! 2-D tensors shaped `[sequence, features]`.

use crate::autodiff::{Data, Tensor};
use crate::rng::randn;
use ndarray::{ArrayD, IxDyn};
use rand::RngCore;

/// Anything exposing an ordered, named parameter list.
pub trait Params {
    fn named_params(&self) -> Vec<(String, Tensor)>;

    fn params(&self) -> Vec<Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn zero_grad(&self) {
        for p in self.params() {
            p.zero_grad();
        }
    }

    /// Loads values by name; errors on missing or shape-mismatched entries.
    fn load_named(&self, values: &std::collections::HashMap<String, Data>) -> Result<(), String> {
        for (name, p) in self.named_params() {
            let v = values
                .get(&name)
                .ok_or_else(|| format!("missing parameter `{name}`"))?;
            if v.shape() != p.shape().as_slice() {
                return Err(format!(
                    "parameter `{name}`: shape {:?} does not match checkpoint {:?}",
                    p.shape(),
                    v.shape()
                ));
            }
            p.set_data(v.clone());
        }
        Ok(())
    }
}

/// Prefixes every name of `inner`'s parameters, for nesting.
pub fn prefixed(prefix: &str, inner: Vec<(String, Tensor)>) -> Vec<(String, Tensor)> {
    inner
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t))
        .collect()
}

fn xavier(rng: &mut impl RngCore, rows: usize, cols: usize) -> Data {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let n = rows * cols;
    let v: Vec<f64> = (0..n)
        .map(|_| {
            let u = rng.next_u64() as f64 / u64::MAX as f64;
            (2.0 * u - 1.0) * limit
        })
        .collect();
    ArrayD::from_shape_vec(IxDyn(&[rows, cols]), v).unwrap()
}

/// Affine map `x W + b` where `W: [in, out]`, `b: [1, out]`.
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new(rng: &mut impl RngCore, d_in: usize, d_out: usize) -> Linear {
        Linear {
            weight: Tensor::param(xavier(rng, d_in, d_out)),
            bias: Tensor::param(ArrayD::zeros(IxDyn(&[1, d_out]))),
        }
    }

    /// Zero-weight, zero-bias layer (LoRA B factors, output heads).
    pub fn zeros(d_in: usize, d_out: usize) -> Linear {
        Linear {
            weight: Tensor::param(ArrayD::zeros(IxDyn(&[d_in, d_out]))),
            bias: Tensor::param(ArrayD::zeros(IxDyn(&[1, d_out]))),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.shape()[0];
        x.matmul(&self.weight).add(&self.bias.broadcast0(n))
    }
}

impl Params for Linear {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        vec![("w".into(), self.weight.clone()), ("b".into(), self.bias.clone())]
    }
}

/// Row-wise layer normalization with learned scale and shift.
pub struct LayerNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(dim: usize) -> LayerNorm {
        LayerNorm {
            gamma: Tensor::param(ArrayD::ones(IxDyn(&[1, dim]))),
            beta: Tensor::param(ArrayD::zeros(IxDyn(&[1, dim]))),
            eps: 1e-5,
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        let (n, d) = (x.shape()[0], x.shape()[1]);
        let mu = x.sum_axis1().mul_scalar(1.0 / d as f64);
        let centered = x.sub(&mu.broadcast1(d));
        let var = centered.square().sum_axis1().mul_scalar(1.0 / d as f64);
        let denom = var.add_scalar(self.eps).sqrt().broadcast1(d);
        let normed = centered.div(&denom);
        normed.mul(&self.gamma.broadcast0(n)).add(&self.beta.broadcast0(n))
    }
}

impl Params for LayerNorm {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        vec![("g".into(), self.gamma.clone()), ("b".into(), self.beta.clone())]
    }
}

/// Multi-head scaled dot-product self-attention.
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub n_heads: usize,
    pub d_k: usize,
}

impl MultiHeadAttention {
    pub fn new(rng: &mut impl RngCore, dim: usize, n_heads: usize) -> MultiHeadAttention {
        assert!(dim % n_heads == 0, "dim must divide into heads");
        MultiHeadAttention {
            wq: Linear::new(rng, dim, dim),
            wk: Linear::new(rng, dim, dim),
            wv: Linear::new(rng, dim, dim),
            wo: Linear::new(rng, dim, dim),
            n_heads,
            d_k: dim / n_heads,
        }
    }

    /// Self-attention over `x: [n, dim]`. When `trace` is given, the softmax
    /// weight matrix of every head is appended to it.
    pub fn forward(&self, x: &Tensor, trace: Option<&mut Vec<Data>>) -> Tensor {
        self.forward_kv(x, x, trace)
    }

    /// Attention with distinct query and key/value sources.
    pub fn forward_kv(&self, q_src: &Tensor, kv_src: &Tensor, mut trace: Option<&mut Vec<Data>>) -> Tensor {
        let q = self.wq.forward(q_src);
        let k = self.wk.forward(kv_src);
        let v = self.wv.forward(kv_src);
        let scale = 1.0 / (self.d_k as f64).sqrt();
        let mut head_outs = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let (c0, c1) = (h * self.d_k, (h + 1) * self.d_k);
            let qh = q.slice_cols(c0, c1);
            let kh = k.slice_cols(c0, c1);
            let vh = v.slice_cols(c0, c1);
            let weights = qh.matmul(&kh.t()).mul_scalar(scale).softmax_rows();
            if let Some(t) = trace.as_deref_mut() {
                t.push(weights.to_data());
            }
            head_outs.push(weights.matmul(&vh));
        }
        let merged = concat_cols(&head_outs);
        self.wo.forward(&merged)
    }
}

impl Params for MultiHeadAttention {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = prefixed("q", self.wq.named_params());
        out.extend(prefixed("k", self.wk.named_params()));
        out.extend(prefixed("v", self.wv.named_params()));
        out.extend(prefixed("o", self.wo.named_params()));
        out
    }
}

/// Concatenate 2-D tensors along columns.
pub fn concat_cols(parts: &[Tensor]) -> Tensor {
    if parts.len() == 1 {
        return parts[0].clone();
    }
    let transposed: Vec<Tensor> = parts.iter().map(|p| p.t()).collect();
    Tensor::concat_rows(&transposed).t()
}

/// Two-layer MLP with GELU (tanh approximation).
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(rng: &mut impl RngCore, dim: usize, hidden: usize) -> FeedForward {
        FeedForward {
            up: Linear::new(rng, dim, hidden),
            down: Linear::new(rng, hidden, dim),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Tensor {
        self.down.forward(&gelu(&self.up.forward(x)))
    }
}

impl Params for FeedForward {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = prefixed("up", self.up.named_params());
        out.extend(prefixed("down", self.down.named_params()));
        out
    }
}

/// GELU via the tanh approximation.
pub fn gelu(x: &Tensor) -> Tensor {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let inner = x.add(&x.mul(x).mul(x).mul_scalar(0.044715)).mul_scalar(c);
    x.mul(&inner.tanh().add_scalar(1.0)).mul_scalar(0.5)
}

/// Pre-norm transformer block: `x + attn(ln(x))`, then `x + ff(ln(x))`.
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: MultiHeadAttention,
    pub ln2: LayerNorm,
    pub ff: FeedForward,
}

impl TransformerBlock {
    pub fn new(rng: &mut impl RngCore, dim: usize, n_heads: usize, ff_hidden: usize) -> TransformerBlock {
        TransformerBlock {
            ln1: LayerNorm::new(dim),
            attn: MultiHeadAttention::new(rng, dim, n_heads),
            ln2: LayerNorm::new(dim),
            ff: FeedForward::new(rng, dim, ff_hidden),
        }
    }

    pub fn forward(&self, x: &Tensor, trace: Option<&mut Vec<Data>>) -> Tensor {
        let x = x.add(&self.attn.forward(&self.ln1.forward(x), trace));
        x.add(&self.ff.forward(&self.ln2.forward(&x)))
    }
}

impl Params for TransformerBlock {
    fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = prefixed("ln1", self.ln1.named_params());
        out.extend(prefixed("attn", self.attn.named_params()));
        out.extend(prefixed("ln2", self.ln2.named_params()));
        out.extend(prefixed("ff", self.ff.named_params()));
        out
    }
}

/// Sinusoidal position table `[n, dim]`.
pub fn sinusoidal_positions(n: usize, dim: usize) -> Data {
    let mut pe = ArrayD::zeros(IxDyn(&[n, dim]));
    for p in 0..n {
        for i in 0..dim {
            let rate = 1.0 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            let angle = p as f64 * rate;
            pe[[p, i]] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

/// Sinusoidal embedding of a continuous scalar (diffusion timestep, angles).
pub fn sinusoidal_scalar(value: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let rate = 1.0 / 10000f64.powf(i as f64 / half.max(1) as f64);
        out[2 * i] = (value * rate).sin();
        out[2 * i + 1] = (value * rate).cos();
    }
    out
}

/// Small random vector, used to initialize record and mask tokens.
pub fn token_init(rng: &mut impl RngCore, dim: usize, scale: f64) -> Data {
    let v: Vec<f64> = (0..dim).map(|_| randn(rng) * scale).collect();
    ArrayD::from_shape_vec(IxDyn(&[1, dim]), v).unwrap()
}

// ---------------------------------------------------------------------------
// AdamW
// ---------------------------------------------------------------------------

/// AdamW with decoupled weight decay. A parameter with no accumulated
/// gradient is treated as having a zero gradient (weight decay still applies).
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    m: Vec<Data>,
    v: Vec<Data>,
}

impl AdamW {
    pub fn new(lr: f64, weight_decay: f64, params: &[Tensor]) -> AdamW {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            m: params.iter().map(|p| ArrayD::zeros(p.data().raw_dim())).collect(),
            v: params.iter().map(|p| ArrayD::zeros(p.data().raw_dim())).collect(),
        }
    }

    pub fn step(&mut self, params: &[Tensor]) {
        assert_eq!(params.len(), self.m.len(), "optimizer/param count mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in params.iter().enumerate() {
            let zero = ArrayD::zeros(p.data().raw_dim());
            let g = p.grad().unwrap_or(zero);
            self.m[i] = &self.m[i] * self.beta1 + &(&g * (1.0 - self.beta1));
            self.v[i] = &self.v[i] * self.beta2 + &(&g * &g * (1.0 - self.beta2));
            let m_hat = &self.m[i] / bc1;
            let v_hat = &self.v[i] / bc2;
            let update = &m_hat / &(v_hat.mapv(f64::sqrt) + self.eps);
            let current = p.to_data();
            let next = &current - &(update * self.lr) - &(&current * (self.lr * self.weight_decay));
            p.set_data(next);
        }
    }
}
