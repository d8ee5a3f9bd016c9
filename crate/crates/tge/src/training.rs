//! Training from a manifest: builds the prepared train set, runs the core
//! loop, writes a JSON-lines log and checkpoints.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tge_core::model::{init_params, ModelError, TgeConfig, TgeParams};
use tge_core::train::{predict_set, train, Control, EpochLog, TrainConfig, TrainError, TrainSet};

use crate::checkpoint::{save_checkpoint, CheckpointError};
use crate::manifest::LoadedObject;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("manifest has {got} scored pairs; training needs at least {needed}")]
    TooFewPairs { got: usize, needed: usize },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("training log: {0}")]
    Log(#[from] std::io::Error),
}

/// Every scored distorted mesh of `objects`, paired with its reference.
pub fn build_train_set(objects: &[&LoadedObject], config: &TgeConfig) -> Result<TrainSet, TrainError> {
    let mut set = TrainSet::new();
    for o in objects {
        let r = set.add_reference(&o.reference, config)?;
        for (item, mesh, score) in o.scored() {
            set.add_sample(format!("{}:{}", o.id, item.path), mesh, r, score, config)?;
        }
    }
    Ok(set)
}

/// Deterministic summary of a run (no wall-clock values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub samples: usize,
    pub epochs: usize,
    pub early_stopped: bool,
    pub seed: u64,
    pub fingerprint: String,
    pub final_epoch: Option<EpochLog>,
    /// Correlations of the final parameters on the training set.
    pub train_plcc: Option<f64>,
    pub train_srocc: Option<f64>,
}

pub struct TrainOptions<'a> {
    pub model: TgeConfig,
    pub train: TrainConfig,
    /// Initialization seed.
    pub seed: u64,
    /// JSON-lines log sink (one record per epoch, with wall time).
    pub log: Option<&'a mut dyn Write>,
    /// Checkpoint path written at the configured cadence and at the end.
    pub checkpoint: Option<&'a Path>,
}

pub fn run_training(
    objects: &[&LoadedObject],
    options: TrainOptions<'_>,
) -> Result<(TgeParams, TrainSummary), DriverError> {
    let set = build_train_set(objects, &options.model)?;
    if set.len() < options.train.batch_size {
        return Err(DriverError::TooFewPairs {
            got: set.len(),
            needed: options.train.batch_size,
        });
    }
    let mut params = init_params(&options.model, options.seed)?;
    let started = Instant::now();
    let mut log = options.log;
    let mut failure: Option<DriverError> = None;
    let outcome = train(&set, &mut params, &options.train, |epoch, p| {
        if let Some(w) = log.as_deref_mut() {
            let mut record = serde_json::to_value(epoch).expect("epoch log serializes");
            record["wall_time_s"] = started.elapsed().as_secs_f64().into();
            if let Err(e) = writeln!(w, "{record}") {
                failure = Some(e.into());
                return Control::Stop;
            }
        }
        if let Some(path) = options.checkpoint {
            if options.train.is_checkpoint_epoch(epoch.epoch) {
                let meta = serde_json::json!({ "epoch": epoch.epoch, "train_srocc": epoch.train_srocc });
                if let Err(e) = save_checkpoint(path, p, Some(meta)) {
                    failure = Some(e.into());
                    return Control::Stop;
                }
            }
        }
        Control::Continue
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let pred = predict_set(&params, &set)?;
    let labels = set.labels();
    let summary = TrainSummary {
        samples: set.len(),
        epochs: outcome.logs.len(),
        early_stopped: outcome.early_stopped,
        seed: options.seed,
        fingerprint: params.fingerprint().to_string(),
        final_epoch: outcome.logs.last().cloned(),
        train_plcc: tge_core::stats::plcc(&pred, &labels).ok(),
        train_srocc: tge_core::stats::srocc(&pred, &labels).ok(),
    };
    if let Some(path) = options.checkpoint {
        let meta = serde_json::to_value(&summary).expect("summary serializes");
        save_checkpoint(path, &params, Some(meta))?;
    }
    Ok((params, summary))
}
