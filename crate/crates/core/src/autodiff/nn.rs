//! Layers built from graph primitives.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::{AutodiffError, Graph, ParamId, ParamStore, Tensor, Var};
use crate::math::sqrt;
use crate::rng::ChaCha8Rng;

/// Fan-in scaled uniform initialization: weights in `[-1/√fan_in, 1/√fan_in]`.
pub fn init_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let bound = 1.0 / sqrt(rows as f64);
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(rows, cols, data).expect("sized")
}

/// `x W + b` with `W: in×out`, `b: 1×out`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        let weight = store.add(format!("{name}.weight"), init_uniform(input, output, rng));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, output));
        Self {
            weight,
            bias,
            input,
            output,
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, AutodiffError> {
        let w = g.param(self.weight)?;
        let b = g.param(self.bias)?;
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }

    /// Multiply-accumulate count for `rows` input rows.
    pub fn macs(&self, rows: usize) -> u64 {
        (rows * self.input * self.output) as u64
    }
}

/// Shared per-point MLP with ReLU after every layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, widths: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut prev = input;
        for (i, &w) in widths.iter().enumerate() {
            layers.push(Linear::new(store, &format!("{name}.{i}"), prev, w, rng));
            prev = w;
        }
        Self { layers }
    }

    pub fn output(&self) -> usize {
        self.layers.last().map_or(0, |l| l.output)
    }

    pub fn forward(&self, g: &mut Graph<'_>, mut x: Var) -> Result<Var, AutodiffError> {
        for layer in &self.layers {
            let y = layer.forward(g, x)?;
            x = g.relu(y);
        }
        Ok(x)
    }

    pub fn macs(&self, rows: usize) -> u64 {
        self.layers.iter().map(|l| l.macs(rows)).sum()
    }
}

/// Multi-head scaled-dot-product attention with input and output projections.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub out: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            query: Linear::new(store, &format!("{name}.q"), dim, dim, rng),
            key: Linear::new(store, &format!("{name}.k"), dim, dim, rng),
            value: Linear::new(store, &format!("{name}.v"), dim, dim, rng),
            out: Linear::new(store, &format!("{name}.o"), dim, dim, rng),
            heads,
        }
    }

    /// Rows of `queries` attend over rows of `context`.
    pub fn forward(&self, g: &mut Graph<'_>, queries: Var, context: Var) -> Result<Var, AutodiffError> {
        let q = self.query.forward(g, queries)?;
        let k = self.key.forward(g, context)?;
        let v = self.value.forward(g, context)?;
        let dim = self.query.output;
        let width = dim / self.heads;
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (s, e) = (h * width, (h + 1) * width);
            let (qh, kh, vh) = if self.heads == 1 {
                (q, k, v)
            } else {
                (g.slice_cols(q, s, e)?, g.slice_cols(k, s, e)?, g.slice_cols(v, s, e)?)
            };
            outs.push(g.scaled_dot_attention(qh, kh, vh)?);
        }
        let joined = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs)? };
        self.out.forward(g, joined)
    }

    pub fn macs(&self, n_queries: usize, n_context: usize) -> u64 {
        let d = self.query.output as u64;
        self.query.macs(n_queries)
            + self.key.macs(n_context)
            + self.value.macs(n_context)
            + self.out.macs(n_queries)
            // logits and weighted sum over all heads
            + 2 * n_queries as u64 * n_context as u64 * d
    }
}

/// Two-layer feed-forward block `d → 4d → d` with a ReLU in between.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub expand: Linear,
    pub project: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            expand: Linear::new(store, &format!("{name}.expand"), dim, 4 * dim, rng),
            project: Linear::new(store, &format!("{name}.project"), 4 * dim, dim, rng),
        }
    }

    pub fn forward(&self, g: &mut Graph<'_>, x: Var) -> Result<Var, AutodiffError> {
        let h = self.expand.forward(g, x)?;
        let h = g.relu(h);
        self.project.forward(g, h)
    }

    pub fn macs(&self, rows: usize) -> u64 {
        self.expand.macs(rows) + self.project.macs(rows)
    }
}
