//! The hybrid training objective: Smooth L1 + (1 − PLCC) + soft-rank SROCC.
//!
//! Every term is built on an autodiff [`Graph`] from a `1 × n` row of
//! predictions and a slice of labels, so the same code gives values and
//! gradients.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Graph, Tensor, Var};

/// Prediction variance below which the PLCC denominator is regularized.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("predictions ({0}) and labels ({1}) differ in length")]
    Length(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("labels are constant; correlation is undefined")]
    ConstantLabels,
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Weights of the three terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub smooth: f64,
    pub plcc: f64,
    pub srocc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            smooth: 1.0,
            plcc: 0.2,
            srocc: 0.2,
        }
    }
}

impl LossWeights {
    pub fn uses_correlation(&self) -> bool {
        self.plcc != 0.0 || self.srocc != 0.0
    }
}

fn row_len(g: &Graph<'_>, pred: Var, label: &[f64], needed: usize) -> Result<usize, LossError> {
    let (rows, n) = g.shape(pred);
    if rows != 1 || n != label.len() {
        return Err(LossError::Length(rows * n, label.len()));
    }
    if n < needed {
        return Err(LossError::TooFew { needed, got: n });
    }
    Ok(n)
}

/// Mean Huber loss with threshold 1.
pub fn smooth_l1(g: &mut Graph<'_>, pred: Var, label: &[f64]) -> Result<Var, LossError> {
    row_len(g, pred, label, 1)?;
    let target = g.constant(Tensor::row(label));
    let d = g.sub(pred, target)?;
    let h = g.smooth_l1(d);
    Ok(g.mean(h))
}

fn centered(g: &mut Graph<'_>, x: Var, n: usize) -> Result<Var, LossError> {
    let m = g.mean(x);
    let m = g.broadcast(m, 1, n)?;
    Ok(g.sub(x, m)?)
}

/// `1 − r` with `r` the batch Pearson correlation. Labels go through the
/// same operations as predictions so that `pred == label` gives exactly 0.
pub fn plcc_loss(g: &mut Graph<'_>, pred: Var, label: &[f64]) -> Result<Var, LossError> {
    let n = row_len(g, pred, label, 3)?;
    if label.iter().all(|&v| v == label[0]) {
        return Err(LossError::ConstantLabels);
    }
    let target = g.constant(Tensor::row(label));
    let pc = centered(g, pred, n)?;
    let lc = centered(g, target, n)?;
    let cross = g.mul(pc, lc)?;
    let num = g.sum(cross);
    let pp = g.mul(pc, pc)?;
    let mut spp = g.sum(pp);
    if g.value(spp).item() / (n as f64) < VARIANCE_FLOOR {
        spp = g.add_scalar(spp, VARIANCE_FLOOR * n as f64);
    }
    let ll = g.mul(lc, lc)?;
    let sll = g.sum(ll);
    let prod = g.mul(spp, sll)?;
    let den = g.sqrt(prod);
    let r = g.div(num, den)?;
    let neg = g.scale(r, -1.0);
    Ok(g.add_scalar(neg, 1.0))
}

/// Soft ranks `1 + Σ_{j≠i} σ((v_i − v_j) / temperature)` of a `1 × n` row.
pub fn soft_rank(g: &mut Graph<'_>, values: Var, temperature: f64) -> Result<Var, LossError> {
    if !(temperature > 0.0) {
        return Err(LossError::Temperature(temperature));
    }
    let (rows, n) = g.shape(values);
    if rows != 1 || n < 2 {
        return Err(LossError::TooFew { needed: 2, got: n });
    }
    let ones_row = g.constant(Tensor::full(1, n, 1.0));
    let column = g.transpose(values);
    // diff[i][j] = v_i − v_j
    let vi = g.matmul(column, ones_row)?;
    let ones_col = g.constant(Tensor::full(n, 1, 1.0));
    let vj = g.matmul(ones_col, values)?;
    let diff = g.sub(vi, vj)?;
    let scaled = g.scale(diff, 1.0 / temperature);
    let s = g.sigmoid(scaled);
    let mut mask = Tensor::full(n, n, 1.0);
    for i in 0..n {
        mask.data_mut()[i * n + i] = 0.0;
    }
    let mask = g.constant(mask);
    let off = g.mul(s, mask)?;
    let sums = g.row_sum(off);
    let ranks = g.add_scalar(sums, 1.0);
    Ok(g.transpose(ranks))
}

/// `1 − ρ` with `ρ = 1 − 6Σ(R(pred) − R(label))² / (n(n² − 1))`, both ranked
/// with [`soft_rank`] at `temperature`.
pub fn srocc_loss(g: &mut Graph<'_>, pred: Var, label: &[f64], temperature: f64) -> Result<Var, LossError> {
    let n = row_len(g, pred, label, 3)?;
    let target = g.constant(Tensor::row(label));
    let rp = soft_rank(g, pred, temperature)?;
    let rl = soft_rank(g, target, temperature)?;
    let d = g.sub(rp, rl)?;
    let d2 = g.mul(d, d)?;
    let s = g.sum(d2);
    let nf = n as f64;
    let rho = g.scale(s, -6.0 / (nf * (nf * nf - 1.0)));
    let rho = g.add_scalar(rho, 1.0);
    let neg = g.scale(rho, -1.0);
    Ok(g.add_scalar(neg, 1.0))
}

/// Total loss plus the value of each term that was included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridLoss {
    pub total: Var,
    pub smooth: f64,
    /// `None` when the term was skipped (zero weight, fewer than 3 samples,
    /// or constant labels).
    pub plcc: Option<f64>,
    pub srocc: Option<f64>,
}

/// `λ_smooth·L_smooth + λ_plcc·L_plcc + λ_srocc·L_srocc`.
///
/// Correlation terms need at least 3 samples and non-constant labels; when
/// that fails they are left out of the total rather than erroring, so the
/// trailing partial batch of an epoch still trains the regression term.
pub fn hybrid_loss(
    g: &mut Graph<'_>,
    pred: Var,
    label: &[f64],
    weights: &LossWeights,
    temperature: f64,
) -> Result<HybridLoss, LossError> {
    let smooth = smooth_l1(g, pred, label)?;
    let smooth_value = g.value(smooth).item();
    let mut total = g.scale(smooth, weights.smooth);
    let correlated = label.len() >= 3 && label.iter().any(|&v| v != label[0]);
    let mut plcc = None;
    if weights.plcc != 0.0 && correlated {
        let term = plcc_loss(g, pred, label)?;
        plcc = Some(g.value(term).item());
        let w = g.scale(term, weights.plcc);
        total = g.add(total, w)?;
    }
    let mut srocc = None;
    if weights.srocc != 0.0 && correlated {
        let term = srocc_loss(g, pred, label, temperature)?;
        srocc = Some(g.value(term).item());
        let w = g.scale(term, weights.srocc);
        total = g.add(total, w)?;
    }
    Ok(HybridLoss {
        total,
        smooth: smooth_value,
        plcc,
        srocc,
    })
}

/// Evaluates a loss builder on plain values.
pub fn evaluate<F>(pred: &[f64], f: F) -> Result<f64, LossError>
where
    F: FnOnce(&mut Graph<'_>, Var) -> Result<Var, LossError>,
{
    let mut g = Graph::new();
    let p = g.constant(Tensor::row(pred));
    let out = f(&mut g, p)?;
    Ok(g.value(out).item())
}

/// Soft ranks on plain values.
pub fn soft_rank_values(values: &[f64], temperature: f64) -> Result<Vec<f64>, LossError> {
    let mut g = Graph::new();
    let v = g.constant(Tensor::row(values));
    let r = soft_rank(&mut g, v, temperature)?;
    Ok(g.value(r).data().to_vec())
}
