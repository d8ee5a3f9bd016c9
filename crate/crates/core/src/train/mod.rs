//! Mini-batch training of the fidelity network with the hybrid loss and
//! AdamW.
//!
//! Training is single-threaded and deterministic: the same data, parameters
//! and seed give bit-identical results.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamW, AutodiffError, Graph, Tensor, Var};
use crate::loss::{plcc_loss, smooth_l1, srocc_loss, LossError, LossWeights};
use crate::mesh::{sample_points, ColoredMesh, NormalizationTransform};
use crate::model::{prepare, ModelError, PreparedCloud, TgeConfig, TgeParams};
use crate::rng::{derive_seed, seeded};
use crate::stats;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(&'static str),
    #[error("training set is empty")]
    Empty,
    #[error("training set has {got} samples, fewer than the batch size {batch}")]
    TooFewSamples { got: usize, batch: usize },
    #[error("reference index {0} out of range")]
    Reference(usize),
    #[error("non-finite loss at epoch {epoch} in batch {samples:?}")]
    NonFinite { epoch: usize, samples: Vec<String> },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub weights: LossWeights,
    pub seed: u64,
    /// Initial soft-rank temperature.
    pub temperature: f64,
    /// The temperature is multiplied by `anneal_factor` every
    /// `anneal_every` epochs.
    pub anneal_every: usize,
    pub anneal_factor: f64,
    /// Stop when train SROCC has not improved for this many epochs.
    pub patience: Option<usize>,
    /// Epoch cadence at which the driver should write checkpoints.
    pub checkpoint_every: Option<usize>,
    /// Number of batches whose predictions enter the correlation terms
    /// (1 = the current batch only).
    pub correlation_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 3,
            lr: 1e-3,
            weight_decay: 1e-4,
            weights: LossWeights::default(),
            seed: 0,
            temperature: 0.1,
            anneal_every: 100,
            anneal_factor: 0.5,
            patience: Some(50),
            checkpoint_every: None,
            correlation_window: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1"));
        }
        if self.weights.uses_correlation() && self.batch_size < 3 {
            return Err(TrainError::Config("correlation losses need batch_size >= 3"));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(TrainError::Config("lr and weight_decay must be finite and non-negative"));
        }
        let w = self.weights;
        if [w.smooth, w.plcc, w.srocc].iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(TrainError::Config("loss weights must be finite and non-negative"));
        }
        if !(self.temperature > 0.0) || !(self.anneal_factor > 0.0) || self.anneal_every == 0 {
            return Err(TrainError::Config("temperature schedule must be positive"));
        }
        if self.correlation_window == 0 {
            return Err(TrainError::Config("correlation_window must be at least 1"));
        }
        Ok(())
    }

    /// Soft-rank temperature during `epoch` (0-based).
    pub fn temperature_at(&self, epoch: usize) -> f64 {
        let mut t = self.temperature;
        for _ in 0..epoch / self.anneal_every {
            t *= self.anneal_factor;
        }
        t
    }

    /// Whether a checkpoint is due after `epoch` (0-based).
    pub fn is_checkpoint_epoch(&self, epoch: usize) -> bool {
        self.checkpoint_every.is_some_and(|k| k > 0 && (epoch + 1) % k == 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub id: String,
    pub input: PreparedCloud,
    /// Index into [`TrainSet::references`].
    pub reference: usize,
    pub label: f64,
}

/// Prepared clouds for training: each reference once, each distorted input
/// normalized with its reference's transform.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainSet {
    pub references: Vec<PreparedCloud>,
    transforms: Vec<NormalizationTransform>,
    pub samples: Vec<TrainSample>,
}

impl TrainSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Samples and groups a reference; returns its index.
    pub fn add_reference(&mut self, reference: &ColoredMesh, config: &TgeConfig) -> Result<usize, TrainError> {
        let transform = NormalizationTransform::fit(reference).map_err(ModelError::from)?;
        let cloud = sample_points(&reference.transformed(&transform), config.n_points, config.seed, false)
            .map_err(ModelError::from)?;
        self.references.push(prepare(&cloud, config)?);
        self.transforms.push(transform);
        Ok(self.references.len() - 1)
    }

    pub fn add_sample(
        &mut self,
        id: impl Into<String>,
        input: &ColoredMesh,
        reference: usize,
        label: f64,
        config: &TgeConfig,
    ) -> Result<(), TrainError> {
        let transform = self.transforms.get(reference).ok_or(TrainError::Reference(reference))?;
        let cloud = sample_points(&input.transformed(transform), config.n_points, config.seed, false)
            .map_err(ModelError::from)?;
        self.samples.push(TrainSample {
            id: id.into(),
            input: prepare(&cloud, config)?,
            reference,
            label,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label).collect()
    }
}

/// Per-epoch summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean total loss over batches.
    pub loss: f64,
    pub smooth: f64,
    /// Mean correlation terms over the batches where they were computed.
    pub plcc_loss: Option<f64>,
    pub srocc_loss: Option<f64>,
    /// Correlations of the in-epoch predictions (made before each batch's
    /// update) with the labels.
    /// Running estimates over the epoch: each batch's predictions are taken
    /// before that batch's update. Use [`predict_set`] for exact values.
    pub train_plcc: Option<f64>,
    pub train_srocc: Option<f64>,
    pub temperature: f64,
    pub batches: usize,
}

/// What the epoch callback asks the loop to do next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub logs: Vec<EpochLog>,
    pub early_stopped: bool,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Scores of `samples` as a `1 × n` row on `g`; each distinct reference is
/// encoded once.
pub fn score_batch(
    g: &mut Graph<'_>,
    params: &TgeParams,
    set: &TrainSet,
    samples: &[usize],
) -> Result<Var, TrainError> {
    let mut encoded: BTreeMap<usize, Var> = BTreeMap::new();
    let mut scores = Vec::with_capacity(samples.len());
    for &i in samples {
        let s = &set.samples[i];
        let reference = set.references.get(s.reference).ok_or(TrainError::Reference(s.reference))?;
        let fr = match encoded.get(&s.reference) {
            Some(&v) => v,
            None => {
                let v = params.encode_graph(g, reference)?;
                encoded.insert(s.reference, v);
                v
            }
        };
        let fi = params.encode_graph(g, &s.input)?;
        scores.push(params.compare_graph(g, fi, fr)?);
    }
    Ok(if scores.len() == 1 { scores[0] } else { g.concat_cols(&scores)? })
}

/// Scores every sample of `set` without recording gradients.
pub fn predict_set(params: &TgeParams, set: &TrainSet) -> Result<Vec<f64>, TrainError> {
    (0..set.len())
        .map(|i| {
            let mut g = Graph::with_params(params.store());
            let s = score_batch(&mut g, params, set, &[i])?;
            Ok(g.value(s).item())
        })
        .collect()
}

struct BatchTerms {
    total: Var,
    smooth: f64,
    plcc: Option<f64>,
    srocc: Option<f64>,
}

/// Smooth L1 on the current batch; correlation terms over the current batch
/// plus `history` (earlier predictions, held constant).
fn batch_loss(
    g: &mut Graph<'_>,
    pred: Var,
    labels: &[f64],
    history: &[(f64, f64)],
    config: &TrainConfig,
    temperature: f64,
) -> Result<BatchTerms, TrainError> {
    let w = config.weights;
    let smooth = smooth_l1(g, pred, labels)?;
    let smooth_value = g.value(smooth).item();
    let mut total = g.scale(smooth, w.smooth);
    let (corr_pred, corr_labels) = if history.is_empty() {
        (pred, labels.to_vec())
    } else {
        let past = g.constant(Tensor::row(&history.iter().map(|h| h.0).collect::<Vec<_>>()));
        let joined = g.concat_cols(&[past, pred])?;
        let mut l: Vec<f64> = history.iter().map(|h| h.1).collect();
        l.extend_from_slice(labels);
        (joined, l)
    };
    let usable = corr_labels.len() >= 3 && corr_labels.iter().any(|&v| v != corr_labels[0]);
    let (mut plcc, mut srocc) = (None, None);
    if usable && w.plcc != 0.0 {
        let t = plcc_loss(g, corr_pred, &corr_labels)?;
        plcc = Some(g.value(t).item());
        let t = g.scale(t, w.plcc);
        total = g.add(total, t)?;
    }
    if usable && w.srocc != 0.0 {
        let t = srocc_loss(g, corr_pred, &corr_labels, temperature)?;
        srocc = Some(g.value(t).item());
        let t = g.scale(t, w.srocc);
        total = g.add(total, t)?;
    }
    Ok(BatchTerms {
        total,
        smooth: smooth_value,
        plcc,
        srocc,
    })
}

/// Trains `params` in place. `on_epoch` sees every epoch's log and the
/// current parameters (for logging and checkpoints) and may stop the run.
pub fn train(
    set: &TrainSet,
    params: &mut TgeParams,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog, &TgeParams) -> Control,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if set.is_empty() {
        return Err(TrainError::Empty);
    }
    if set.len() < config.batch_size {
        return Err(TrainError::TooFewSamples {
            got: set.len(),
            batch: config.batch_size,
        });
    }
    let optimizer = AdamW {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamW::default()
    };
    let labels = set.labels();
    let mut logs = Vec::new();
    let mut step = 0u64;
    let mut best = f64::NEG_INFINITY;
    let mut since_best = 0usize;
    let mut early_stopped = false;
    let mut history: Vec<Vec<(f64, f64)>> = Vec::new();
    for epoch in 0..config.epochs {
        let temperature = config.temperature_at(epoch);
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut r = seeded(derive_seed(config.seed, SHUFFLE_STREAM ^ epoch as u64));
        for i in (1..order.len()).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        let mut predictions = alloc::vec![0.0; set.len()];
        let (mut losses, mut smooths, mut plccs, mut sroccs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for batch in order.chunks(config.batch_size) {
            let batch_labels: Vec<f64> = batch.iter().map(|&i| labels[i]).collect();
            let past: Vec<(f64, f64)> = history.iter().flatten().copied().collect();
            let grads = {
                let mut g = Graph::with_params(params.store());
                let pred = score_batch(&mut g, params, set, batch)?;
                let terms = batch_loss(&mut g, pred, &batch_labels, &past, config, temperature)?;
                let value = g.value(terms.total).item();
                if !value.is_finite() {
                    return Err(TrainError::NonFinite {
                        epoch,
                        samples: batch.iter().map(|&i| set.samples[i].id.clone()).collect(),
                    });
                }
                for (k, &i) in batch.iter().enumerate() {
                    predictions[i] = g.value(pred).data()[k];
                }
                losses.push(value);
                smooths.push(terms.smooth);
                plccs.extend(terms.plcc);
                sroccs.extend(terms.srocc);
                g.backward(terms.total)?
            };
            step += 1;
            optimizer.step(params.store_mut(), &grads, step)?;
            if config.correlation_window > 1 {
                history.push(batch.iter().map(|&i| (predictions[i], labels[i])).collect());
                if history.len() >= config.correlation_window {
                    history.remove(0);
                }
            }
        }
        let log = EpochLog {
            epoch,
            loss: mean(&losses).unwrap_or(0.0),
            smooth: mean(&smooths).unwrap_or(0.0),
            plcc_loss: mean(&plccs),
            srocc_loss: mean(&sroccs),
            train_plcc: stats::plcc(&predictions, &labels).ok(),
            train_srocc: stats::srocc(&predictions, &labels).ok(),
            temperature,
            batches: losses.len(),
        };
        let control = on_epoch(&log, params);
        let srocc = log.train_srocc.unwrap_or(f64::NEG_INFINITY);
        logs.push(log);
        if control == Control::Stop {
            break;
        }
        if srocc > best + 1e-4 {
            best = srocc;
            since_best = 0;
        } else {
            since_best += 1;
        }
        if config.patience.is_some_and(|p| since_best >= p) {
            early_stopped = true;
            break;
        }
    }
    Ok(TrainOutcome { logs, early_stopped })
}
