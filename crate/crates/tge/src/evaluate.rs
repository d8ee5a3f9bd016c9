//! Leave-one-object-out evaluation of a baseline metric or a TGE model.

use thiserror::Error;
use tge_core::metrics::{run_all, MetricConfig, MetricError, MetricKind, Orientation};
use tge_core::model::{predict, ModelError, TgeConfig, TgeParams};
use tge_core::stats::{cross_validate, CrossValidationError, EvalReport};
use tge_core::train::TrainConfig;

use crate::manifest::LoadedObject;
use crate::training::{run_training, DriverError, TrainOptions};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric: {0}")]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// What is being evaluated.
pub enum EvalTarget<'a> {
    /// A fixed baseline; folds need no training.
    Baseline { kind: MetricKind, config: MetricConfig },
    /// A trained model applied to every object as is.
    Model(&'a TgeParams),
    /// Train a fresh model on the other objects for every fold.
    CrossTrain {
        model: TgeConfig,
        train: TrainConfig,
        seed: u64,
    },
}

impl EvalTarget<'_> {
    pub fn name(&self) -> String {
        match self {
            EvalTarget::Baseline { kind, .. } => kind.name().to_string(),
            EvalTarget::Model(_) => "tge".into(),
            EvalTarget::CrossTrain { .. } => "tge-cv".into(),
        }
    }

    fn orientation(&self) -> Orientation {
        match self {
            EvalTarget::Baseline { kind, .. } => kind.orientation(),
            _ => Orientation::HigherBetter,
        }
    }
}

fn predict_object(o: &LoadedObject, params: &TgeParams) -> Result<Vec<(f64, f64)>, EvalError> {
    o.scored()
        .map(|(_, mesh, label)| Ok((predict(mesh, &o.reference, params.config(), params)?, label)))
        .collect()
}

/// Cross-validates over `objects` in the given order.
pub fn evaluate(objects: &[LoadedObject], target: &EvalTarget<'_>) -> Result<EvalReport, CrossValidationError<EvalError>> {
    let ids: Vec<String> = objects.iter().map(|o| o.id.clone()).collect();
    cross_validate(&target.name(), &ids, target.orientation(), |i| {
        let o = &objects[i];
        match target {
            EvalTarget::Baseline { kind, config } => {
                let config = MetricConfig {
                    metrics: vec![*kind],
                    ..config.clone()
                };
                o.scored()
                    .map(|(_, mesh, label)| Ok((run_all(mesh, &o.reference, &config)?[0].value, label)))
                    .collect()
            }
            EvalTarget::Model(params) => predict_object(o, params),
            EvalTarget::CrossTrain { model, train, seed } => {
                let others: Vec<&LoadedObject> = objects.iter().enumerate().filter(|(j, _)| *j != i).map(|p| p.1).collect();
                let (params, _) = run_training(
                    &others,
                    TrainOptions {
                        model: model.clone(),
                        train: train.clone(),
                        seed: *seed,
                        log: None,
                        checkpoint: None,
                    },
                )?;
                predict_object(o, &params)
            }
        }
    })
}

/// Rows `metric, correlation, <object…>, average, std`: one row per
/// correlation per report, objects in the first report's fold order.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let objects: Vec<String> = reports
        .first()
        .map(|r| r.folds.iter().map(|f| f.object.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["metric".to_string(), "correlation".to_string()];
    header.extend(objects.iter().cloned());
    header.extend(["average".to_string(), "std".to_string()]);
    w.write_record(&header).expect("in-memory write");
    for r in reports {
        for (name, pick, mean, std) in [
            ("plcc", (|f: &tge_core::stats::FoldResult| f.plcc) as fn(&_) -> f64, r.mean.plcc, r.std.plcc),
            ("srocc", |f| f.srocc, r.mean.srocc, r.std.srocc),
            ("krocc", |f| f.krocc, r.mean.krocc, r.std.krocc),
        ] {
            let mut row = vec![r.metric.clone(), name.to_string()];
            for o in &objects {
                row.push(
                    r.folds
                        .iter()
                        .find(|f| &f.object == o)
                        .map(|f| format!("{:.4}", pick(f)))
                        .unwrap_or_default(),
                );
            }
            row.push(format!("{mean:.4}"));
            row.push(format!("{std:.4}"));
            w.write_record(&row).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
