//! Correlation coefficients, the object-level cross-validation harness and
//! FLOP estimation.
//!
//! SROCC here is Pearson correlation of average ranks, exact under ties. The
//! training loss uses the `6Σd²` form instead; the two agree only without
//! ties.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::sqrt;
use crate::metrics::Orientation;
use crate::model::{mac_count, ModelError, TgeConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("every value is tied")]
    AllTied,
    #[error("non-finite value")]
    NonFinite,
}

fn check(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Length(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

fn pearson_unchecked(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson linear correlation.
pub fn plcc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    pearson_unchecked(x, y).ok_or(StatsError::ZeroVariance)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap_or(Ordering::Equal));
    let mut ranks = alloc::vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson of average ranks).
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    pearson_unchecked(&average_ranks(x), &average_ranks(y)).ok_or(StatsError::AllTied)
}

/// Kendall tau-b.
pub fn krocc(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check(x, y)?;
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                tied_x += 1;
            }
            if dy == 0.0 {
                tied_y += 1;
            }
            if dx != 0.0 && dy != 0.0 {
                if (dx > 0.0) == (dy > 0.0) {
                    concordant += 1;
                } else {
                    discordant += 1;
                }
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as u64;
    let denom = ((n0 - tied_x) as f64) * ((n0 - tied_y) as f64);
    if denom == 0.0 {
        return Err(StatsError::AllTied);
    }
    Ok(((concordant as f64 - discordant as f64) / sqrt(denom)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Correlations {
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
}

impl Correlations {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self, StatsError> {
        Ok(Self {
            plcc: plcc(x, y)?,
            srocc: srocc(x, y)?,
            krocc: krocc(x, y)?,
        })
    }
}

/// Correlations on one held-out object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub object: String,
    pub plcc: f64,
    pub srocc: f64,
    pub krocc: f64,
    pub n: usize,
}

/// A fold left out of the aggregate, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub object: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub folds: Vec<FoldResult>,
    pub mean: Correlations,
    /// Sample standard deviation over folds (0 for a single fold).
    pub std: Correlations,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<SkippedFold>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, sqrt(var))
}

impl EvalReport {
    /// Builds the aggregate from per-fold results.
    pub fn from_folds(metric: impl Into<String>, folds: Vec<FoldResult>, skipped: Vec<SkippedFold>) -> Self {
        let column = |f: fn(&FoldResult) -> f64| mean_std(&folds.iter().map(f).collect::<Vec<_>>());
        let (p, s, k) = (column(|f| f.plcc), column(|f| f.srocc), column(|f| f.krocc));
        Self {
            metric: metric.into(),
            mean: Correlations {
                plcc: p.0,
                srocc: s.0,
                krocc: k.0,
            },
            std: Correlations {
                plcc: p.1,
                srocc: s.1,
                krocc: k.1,
            },
            folds,
            skipped,
        }
    }
}

#[derive(Debug, Error)]
pub enum CrossValidationError<E> {
    #[error("cross-validation needs at least 2 objects, got {0}")]
    TooFewObjects(usize),
    #[error("no fold produced valid correlations")]
    NoFolds(Vec<SkippedFold>),
    #[error("fold {object}: {source}")]
    Fold { object: String, source: E },
}

/// Leave-one-object-out evaluation.
///
/// `fold(i)` evaluates held-out object `i` (training on the others first if
/// the metric is learned) and returns `(prediction, label)` pairs. Predictions
/// of lower-better metrics are negated so every correlation reads
/// higher-is-better. Folds with fewer than 3 pairs or undefined correlations
/// are skipped and listed in the report.
pub fn cross_validate<E>(
    metric: &str,
    objects: &[String],
    orientation: Orientation,
    mut fold: impl FnMut(usize) -> Result<Vec<(f64, f64)>, E>,
) -> Result<EvalReport, CrossValidationError<E>> {
    if objects.len() < 2 {
        return Err(CrossValidationError::TooFewObjects(objects.len()));
    }
    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    for (i, object) in objects.iter().enumerate() {
        let pairs = fold(i).map_err(|source| CrossValidationError::Fold {
            object: object.clone(),
            source,
        })?;
        let pred: Vec<f64> = pairs.iter().map(|p| orientation.sign() * p.0).collect();
        let label: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        match Correlations::compute(&pred, &label) {
            Ok(c) => folds.push(FoldResult {
                object: object.clone(),
                plcc: c.plcc,
                srocc: c.srocc,
                krocc: c.krocc,
                n: pairs.len(),
            }),
            Err(e) => skipped.push(SkippedFold {
                object: object.clone(),
                reason: alloc::format!("{e}"),
            }),
        }
    }
    if folds.is_empty() {
        return Err(CrossValidationError::NoFolds(skipped));
    }
    Ok(EvalReport::from_folds(metric, folds, skipped))
}

/// Analytic cost of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlopEstimate {
    pub n_points: usize,
    pub gflops: f64,
    /// Share spent in per-neighbor PointNet layers.
    pub grouped_gflops: f64,
    pub centroid_gflops: f64,
    pub global_gflops: f64,
    pub head_gflops: f64,
}

/// FLOPs (two per multiply-accumulate) of one mesh-pair prediction at
/// `n_points`, with centroid counts scaled in proportion.
pub fn estimate_flops(config: &TgeConfig, n_points: usize) -> Result<FlopEstimate, ModelError> {
    let macs = mac_count(&config.with_points(n_points))?;
    let g = |m: u64| 2.0 * m as f64 / 1e9;
    Ok(FlopEstimate {
        n_points,
        gflops: g(macs.total()),
        grouped_gflops: g(macs.grouped),
        centroid_gflops: g(macs.centroid),
        global_gflops: g(macs.global),
        head_gflops: g(macs.head),
    })
}
