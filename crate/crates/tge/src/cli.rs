//! Command-line front end.
//!
//! Settings resolve as flag > environment (`TGE_*`) > config file (TOML,
//! `--config` or `TGE_CONFIG`) > built-in default. Every run logs the
//! resolved settings to stderr; `--json` output goes to stdout (or to the
//! given file) and contains no timing, so identical invocations produce
//! identical bytes.
//!
//! Exit codes: 0 success, 1 other failure, 2 load failure (or bad usage),
//! 3 metric failure, 4 checkpoint/config fingerprint mismatch.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tge_core::annotation::DEFAULT_ROUNDS;
use tge_core::loss::LossWeights;
use tge_core::metrics::{run_all, MetricConfig, MetricKind};
use tge_core::model::{predict, TgeConfig, TgeParams};
use tge_core::shapes::catalog;
use tge_core::stats::estimate_flops;
use tge_core::synth::{make_synthetic_dataset, Amplitudes};
use tge_core::train::TrainConfig;
use tge_core::ColoredMesh;

use crate::checkpoint::{load_checkpoint, CheckpointError, CheckpointHeader};
use crate::evaluate::{evaluate, reports_csv, EvalTarget};
use crate::io::{load_mesh, save_mesh, MeshFormat};
use crate::manifest::{LoadedObject, Manifest, ManifestError, ManifestItem, ManifestObject};
use crate::service::{serve, ServeConfig};
use crate::store::dataset_stats;
use crate::training::{run_training, TrainOptions};

/// GFLOPs figure quoted for the full model at 10,000 points, printed next
/// to the estimate for context.
pub const REFERENCE_GFLOPS: f64 = 14.7;

#[derive(Debug)]
pub enum CliError {
    Load(String),
    Metric(String),
    Fingerprint(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Load(_) => 2,
            CliError::Metric(_) => 3,
            CliError::Fingerprint(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Load(m) | CliError::Metric(m) | CliError::Fingerprint(m) | CliError::Other(m) => m,
        }
    }
}

fn other(e: impl std::fmt::Display) -> CliError {
    CliError::Other(e.to_string())
}

fn load_err(e: impl std::fmt::Display) -> CliError {
    CliError::Load(e.to_string())
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Fingerprint { .. } | CheckpointError::Layout(_) => CliError::Fingerprint(e.to_string()),
            _ => CliError::Load(e.to_string()),
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        CliError::Load(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tge", version, about = "Rendering-free fidelity evaluation for colored meshes")]
pub struct Cli {
    /// TOML file with default settings (keys as in the long flag names,
    /// with underscores).
    #[arg(long, global = true, env = "TGE_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for sampling, initialization and shuffling.
    #[arg(long, env = "TGE_SEED")]
    pub seed: Option<u64>,
    /// Machine-readable output to stdout, or to PATH when given.
    #[arg(long, num_args = 0..=1, default_missing_value = "-", value_name = "PATH")]
    pub json: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    /// Model architecture: `default`, `toy` or a JSON config file.
    #[arg(long, env = "TGE_MODEL")]
    pub model: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct TrainArgs {
    #[arg(long, env = "TGE_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "TGE_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "TGE_LR")]
    pub lr: Option<f64>,
    #[arg(long, env = "TGE_WEIGHT_DECAY")]
    pub weight_decay: Option<f64>,
    /// Smooth-L1, PLCC and SROCC weights, e.g. `1,0.2,0.2`.
    #[arg(long, env = "TGE_LOSS_WEIGHTS")]
    pub loss_weights: Option<String>,
    #[arg(long, env = "TGE_TEMPERATURE")]
    pub temperature: Option<f64>,
    /// Early-stop patience in epochs; 0 disables early stopping.
    #[arg(long, env = "TGE_PATIENCE")]
    pub patience: Option<usize>,
    /// Batches whose predictions enter the correlation terms.
    #[arg(long, env = "TGE_WINDOW")]
    pub window: Option<usize>,
    #[arg(long, env = "TGE_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical metrics between an input mesh and its reference.
    Metric {
        input: PathBuf,
        reference: PathBuf,
        /// Comma-separated subset of cd,iou,fscore,p2s,nd,uhd.
        #[arg(long, env = "TGE_METRICS")]
        metrics: Option<String>,
        /// Points sampled per mesh.
        #[arg(long, env = "TGE_POINTS")]
        points: Option<usize>,
        #[arg(long)]
        iou_resolution: Option<usize>,
        /// F-score threshold in normalized units.
        #[arg(long)]
        fscore_tau: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Predicted fidelity of an input mesh (or every mesh of a manifest).
    Score {
        input: Option<PathBuf>,
        reference: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on the scored pairs of a manifest.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines training log.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Leave-one-object-out correlations of a metric or model.
    Eval {
        manifest: PathBuf,
        /// Baseline metric name.
        #[arg(long, conflicts_with_all = ["checkpoint", "cross_train"])]
        metric: Option<String>,
        /// Trained model applied to every object.
        #[arg(long, conflicts_with = "cross_train")]
        checkpoint: Option<PathBuf>,
        /// Train a fresh model per fold on the other objects.
        #[arg(long)]
        cross_train: bool,
        #[arg(long, env = "TGE_POINTS")]
        points: Option<usize>,
        /// Also write the correlation table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Graded synthetic distortions of reference meshes, with a manifest.
    Synth {
        references: Vec<PathBuf>,
        /// Use this many built-in shapes instead of reference files.
        #[arg(long)]
        shapes: Option<usize>,
        /// Comma-separated distortion levels.
        #[arg(long, default_value = "0,1,2,3")]
        levels: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        position: Option<f64>,
        #[arg(long)]
        color: Option<f64>,
        #[arg(long)]
        cluster: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate scores and confidence intervals of an annotation store.
    DatasetStats {
        store: PathBuf,
        #[arg(long)]
        group: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the annotation service.
    Serve {
        root: PathBuf,
        #[arg(long, env = "TGE_ADDR")]
        addr: Option<SocketAddr>,
        /// Annotation store directory (default: ROOT/.annotations).
        #[arg(long, env = "TGE_STORE")]
        store: Option<PathBuf>,
        #[arg(long, env = "TGE_ROUNDS")]
        rounds: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Analytic FLOPs of one pair prediction.
    Flops {
        #[arg(long, env = "TGE_POINTS")]
        points: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
}

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub metrics: Option<String>,
    pub iou_resolution: Option<usize>,
    pub fscore_tau: Option<f64>,
    pub model: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub weight_decay: Option<f64>,
    pub loss_weights: Option<String>,
    pub temperature: Option<f64>,
    pub patience: Option<usize>,
    pub window: Option<usize>,
    pub checkpoint_every: Option<usize>,
    pub addr: Option<SocketAddr>,
    pub store: Option<PathBuf>,
    pub rounds: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| load_err(format!("config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| load_err(format!("config {}: {e}", path.display())))
    }
}

fn resolve_model(spec: Option<&str>, seed: u64) -> Result<TgeConfig, CliError> {
    let mut config = match spec.unwrap_or("default") {
        "default" => TgeConfig::default(),
        "toy" => TgeConfig::toy(),
        path => {
            let text = fs::read_to_string(path).map_err(|e| load_err(format!("model config {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| load_err(format!("model config {path}: {e}")))?
        }
    };
    config.seed = seed;
    config.validate().map_err(other)?;
    Ok(config)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<T>().map_err(|e| other(format!("{what} `{t}`: {e}"))))
        .collect()
}

fn resolve_train(a: &TrainArgs, file: &FileConfig, seed: u64) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let weights = match a.loss_weights.as_ref().or(file.loss_weights.as_ref()) {
        Some(s) => match parse_list::<f64>(s, "loss weight")?.as_slice() {
            &[smooth, plcc, srocc] => LossWeights { smooth, plcc, srocc },
            _ => return Err(other("--loss-weights needs three values")),
        },
        None => d.weights,
    };
    let patience = a.patience.or(file.patience).map_or(d.patience, |p| (p > 0).then_some(p));
    let config = TrainConfig {
        epochs: a.epochs.or(file.epochs).unwrap_or(d.epochs),
        batch_size: a.batch_size.or(file.batch_size).unwrap_or(d.batch_size),
        lr: a.lr.or(file.lr).unwrap_or(d.lr),
        weight_decay: a.weight_decay.or(file.weight_decay).unwrap_or(d.weight_decay),
        weights,
        seed,
        temperature: a.temperature.or(file.temperature).unwrap_or(d.temperature),
        patience,
        checkpoint_every: a.checkpoint_every.or(file.checkpoint_every).or(d.checkpoint_every),
        correlation_window: a.window.or(file.window).unwrap_or(d.correlation_window),
        ..d
    };
    config.validate().map_err(other)?;
    Ok(config)
}

fn emit(common: &Common, value: &Value, text: impl FnOnce() -> String) -> Result<(), CliError> {
    let rendered = serde_json::to_string_pretty(value).expect("json") + "\n";
    match common.json.as_deref() {
        Some("-") => std::io::stdout().write_all(rendered.as_bytes()).map_err(other),
        Some(path) => {
            fs::write(path, rendered).map_err(|e| other(format!("write {path}: {e}")))?;
            print!("{}", text());
            Ok(())
        }
        None => {
            print!("{}", text());
            Ok(())
        }
    }
}

fn log_resolved(command: &str, settings: &Value) {
    log::info!("{command}: resolved settings {settings}");
}

fn load_objects(manifest: &Manifest) -> Result<Vec<LoadedObject>, CliError> {
    Ok(manifest.load_all()?)
}

fn load_model(
    path: &Path,
    spec: Option<&str>,
    seed: Option<u64>,
) -> Result<(TgeParams, CheckpointHeader), CliError> {
    let expected = spec.map(|s| resolve_model(Some(s), 0)).transpose()?;
    let (mut params, header) = load_checkpoint(path, expected.as_ref())?;
    if let Some(s) = seed {
        params.set_seed(s);
    }
    Ok((params, header))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Metric {
            input,
            reference,
            metrics,
            points,
            iou_resolution,
            fscore_tau,
            common,
        } => {
            let d = MetricConfig::default();
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let kinds = match metrics.or(file.metrics.clone()) {
                Some(s) => parse_list::<MetricKind>(&s, "metric").map_err(|e| CliError::Metric(e.message().into()))?,
                None => d.metrics.clone(),
            };
            let config = MetricConfig {
                points: points.or(file.points).unwrap_or(d.points),
                seed,
                iou_resolution: iou_resolution.or(file.iou_resolution).unwrap_or(d.iou_resolution),
                fscore_tau: fscore_tau.or(file.fscore_tau),
                metrics: kinds,
            };
            log_resolved("metric", &serde_json::to_value(&config).expect("json"));
            let a = load_mesh(&input, None).map_err(load_err)?;
            let b = load_mesh(&reference, None).map_err(load_err)?;
            let results = run_all(&a, &b, &config).map_err(|e| CliError::Metric(e.to_string()))?;
            let value = json!({ "input": input, "reference": reference, "results": results });
            emit(&common, &value, || {
                results
                    .iter()
                    .map(|r| format!("{}\t{}\n", r.metric, r.value))
                    .collect()
            })
        }
        Command::Score {
            input,
            reference,
            manifest,
            checkpoint,
            model,
            common,
        } => {
            let seed = common.seed.or(file.seed);
            let spec = model.model.or(file.model.clone());
            let (params, _) = load_model(&checkpoint, spec.as_deref(), seed)?;
            log_resolved(
                "score",
                &json!({ "checkpoint": checkpoint, "seed": params.config().seed, "model": params.config() }),
            );
            let score = |a: &ColoredMesh, b: &ColoredMesh| {
                predict(a, b, params.config(), &params).map_err(other)
            };
            let rows: Vec<(String, String, f64)> = match (input, reference, manifest) {
                (Some(i), Some(r), None) => {
                    let a = load_mesh(&i, None).map_err(load_err)?;
                    let b = load_mesh(&r, None).map_err(load_err)?;
                    vec![(String::new(), i.display().to_string(), score(&a, &b)?)]
                }
                (None, None, Some(m)) => {
                    let m = Manifest::load(&m)?;
                    let mut rows = Vec::new();
                    for i in 0..m.objects.len() {
                        let o = m.load_object(i)?;
                        for (item, mesh) in &o.distorted {
                            rows.push((o.id.clone(), item.path.clone(), score(mesh, &o.reference)?));
                        }
                    }
                    rows
                }
                _ => return Err(other("give INPUT and REFERENCE, or --manifest")),
            };
            let value = json!({
                "seed": params.config().seed,
                "scores": rows.iter().map(|(o, p, s)| json!({ "object": o, "path": p, "score": s })).collect::<Vec<_>>(),
            });
            emit(&common, &value, || {
                rows.iter()
                    .map(|(o, p, s)| if o.is_empty() { format!("{s}\n") } else { format!("{o}\t{p}\t{s}\n") })
                    .collect()
            })
        }
        Command::Train {
            manifest,
            out,
            log,
            model,
            train,
            common,
        } => {
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let model = resolve_model(model.model.or(file.model.clone()).as_deref(), seed)?;
            let train = resolve_train(&train, &file, seed)?;
            log_resolved("train", &json!({ "seed": seed, "model": model, "train": train }));
            let m = Manifest::load(&manifest)?;
            let objects = load_objects(&m)?;
            let refs: Vec<&LoadedObject> = objects.iter().collect();
            let mut sink = match &log {
                Some(p) => Some(fs::File::create(p).map_err(|e| other(format!("log {}: {e}", p.display())))?),
                None => None,
            };
            let (_, summary) = run_training(
                &refs,
                TrainOptions {
                    model,
                    train,
                    seed,
                    log: sink.as_mut().map(|f| f as &mut dyn Write),
                    checkpoint: Some(&out),
                },
            )
            .map_err(other)?;
            let value = serde_json::to_value(&summary).expect("json");
            emit(&common, &value, || {
                format!(
                    "trained {} epochs on {} pairs; train SROCC {:?}, PLCC {:?}; checkpoint {}\n",
                    summary.epochs,
                    summary.samples,
                    summary.train_srocc,
                    summary.train_plcc,
                    out.display()
                )
            })
        }
        Command::Eval {
            manifest,
            metric,
            checkpoint,
            cross_train,
            points,
            csv,
            model,
            train,
            common,
        } => {
            let seed = common.seed.or(file.seed);
            let m = Manifest::load(&manifest)?;
            let objects = load_objects(&m)?;
            let loaded;
            let target = if let Some(name) = metric {
                let kind: MetricKind = name.parse().map_err(|e: tge_core::metrics::MetricError| CliError::Metric(e.to_string()))?;
                let config = MetricConfig {
                    points: points.or(file.points).unwrap_or(MetricConfig::default().points),
                    seed: seed.unwrap_or(0),
                    ..MetricConfig::default()
                };
                log_resolved("eval", &json!({ "metric": kind, "config": config }));
                EvalTarget::Baseline { kind, config }
            } else if let Some(path) = checkpoint {
                loaded = load_model(&path, model.model.or(file.model.clone()).as_deref(), seed)?;
                log_resolved("eval", &json!({ "checkpoint": path, "model": loaded.0.config() }));
                EvalTarget::Model(&loaded.0)
            } else if cross_train {
                let seed = seed.unwrap_or(0);
                let model = resolve_model(model.model.or(file.model.clone()).as_deref(), seed)?;
                let train = resolve_train(&train, &file, seed)?;
                log_resolved("eval", &json!({ "cross_train": true, "model": model, "train": train }));
                EvalTarget::CrossTrain { model, train, seed }
            } else {
                return Err(other("choose --metric, --checkpoint or --cross-train"));
            };
            let report = evaluate(&objects, &target).map_err(|e| match &e {
                tge_core::stats::CrossValidationError::Fold {
                    source: crate::evaluate::EvalError::Metric(_),
                    ..
                } => CliError::Metric(e.to_string()),
                _ => other(e),
            })?;
            if let Some(path) = csv {
                fs::write(&path, reports_csv(std::slice::from_ref(&report)))
                    .map_err(|e| other(format!("csv {}: {e}", path.display())))?;
            }
            let value = serde_json::to_value(&report).expect("json");
            emit(&common, &value, || {
                let mut s = String::new();
                for f in &report.folds {
                    s += &format!("{}\tplcc {:.4}\tsrocc {:.4}\tkrocc {:.4}\tn {}\n", f.object, f.plcc, f.srocc, f.krocc, f.n);
                }
                s += &format!(
                    "mean\tplcc {:.4}\tsrocc {:.4}\tkrocc {:.4}\n",
                    report.mean.plcc, report.mean.srocc, report.mean.krocc
                );
                s
            })
        }
        Command::Synth {
            references,
            shapes,
            levels,
            out,
            position,
            color,
            cluster,
            common,
        } => {
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let levels = parse_list::<f64>(&levels, "level")?;
            let d = Amplitudes::default();
            let amps = Amplitudes {
                position: position.unwrap_or(d.position),
                color: color.unwrap_or(d.color),
                cluster: cluster.unwrap_or(d.cluster),
            };
            log_resolved("synth", &json!({ "seed": seed, "levels": levels, "amplitudes": amps }));
            let meshes: Vec<ColoredMesh> = match shapes {
                Some(n) => (0..n).map(catalog).collect(),
                None => references
                    .iter()
                    .map(|p| load_mesh(p, None).map_err(load_err))
                    .collect::<Result<_, _>>()?,
            };
            let data = make_synthetic_dataset(&meshes, &levels, &amps, seed).map_err(other)?;
            let mut objects = Vec::new();
            for (i, o) in data.iter().enumerate() {
                let id = format!("{:02}-{}", i, o.id);
                let dir = out.join(&id);
                fs::create_dir_all(&dir).map_err(other)?;
                let save = |mesh: &ColoredMesh, name: &str| -> Result<String, CliError> {
                    save_mesh(mesh, &dir.join(name), Some(MeshFormat::PlyBinary)).map_err(other)?;
                    Ok(format!("{id}/{name}"))
                };
                let reference = save(&o.reference, "reference.ply")?;
                let distorted = o
                    .distorted
                    .iter()
                    .enumerate()
                    .map(|(k, item)| {
                        Ok(ManifestItem {
                            path: save(&item.mesh, &format!("level{k}.ply"))?,
                            method: format!("{}@{}", item.method, item.level),
                            score: Some(item.label),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                objects.push(ManifestObject { id, reference, distorted });
            }
            let manifest = Manifest::new(objects, &out);
            manifest.save(&out.join("manifest.json")).map_err(other)?;
            let value = serde_json::to_value(&manifest).expect("json");
            emit(&common, &value, || {
                format!(
                    "wrote {} objects x {} levels to {}\n",
                    manifest.objects.len(),
                    levels.len(),
                    out.join("manifest.json").display()
                )
            })
        }
        Command::DatasetStats { store, group, common } => {
            log_resolved("dataset-stats", &json!({ "store": store, "group": group }));
            if !store.join(crate::store::EVENTS_FILE).exists() {
                return Err(load_err(format!("no annotation store at {}", store.display())));
            }
            let agg = dataset_stats(&store, group.as_deref()).map_err(other)?;
            let value = serde_json::to_value(&agg).expect("json");
            emit(&common, &value, || {
                format!(
                    "meshes {}\nmean CI before outlier removal {}\nmean CI after outlier removal {}\nremoved {:.1}% of scores ({} quartiles)\n",
                    agg.meshes.len(),
                    agg.mean_ci_before.map_or("undefined".into(), |v| format!("{v:.4}")),
                    agg.mean_ci_after.map_or("undefined".into(), |v| format!("{v:.4}")),
                    100.0 * agg.removal_fraction,
                    agg.quartile_method
                )
            })
        }
        Command::Serve {
            root,
            addr,
            store,
            rounds,
            common: _,
        } => {
            let addr = addr
                .or(file.addr)
                .unwrap_or_else(|| "127.0.0.1:8080".parse().expect("literal address"));
            let mut config = ServeConfig::new(root, addr);
            if let Some(s) = store.or(file.store.clone()) {
                config.store = s;
            }
            config.rounds_total = rounds.or(file.rounds).unwrap_or(DEFAULT_ROUNDS);
            log_resolved(
                "serve",
                &json!({ "root": config.root, "store": config.store, "addr": config.addr.to_string(), "rounds": config.rounds_total }),
            );
            let rt = tokio::runtime::Runtime::new().map_err(other)?;
            rt.block_on(serve(config)).map_err(load_err)
        }
        Command::Flops { points, model, common } => {
            let seed = common.seed.or(file.seed).unwrap_or(0);
            let config = resolve_model(model.model.or(file.model.clone()).as_deref(), seed)?;
            let n = points.or(file.points).unwrap_or(10_000);
            log_resolved("flops", &json!({ "points": n, "model": config }));
            let est = estimate_flops(&config, n).map_err(other)?;
            let doubled = estimate_flops(&config, 2 * n).map_err(other)?;
            let value = json!({
                "estimate": est,
                "grouped_scaling_at_2x_points": doubled.grouped_gflops / est.grouped_gflops,
                "reference_gflops": REFERENCE_GFLOPS,
            });
            emit(&common, &value, || {
                format!(
                    "{:.3} GFLOPs per pair at {} points (grouped {:.3}, centroid {:.3}, global {:.3}, head {:.3}); reference figure {} GFLOPs\n",
                    est.gflops, n, est.grouped_gflops, est.centroid_gflops, est.global_gflops, est.head_gflops, REFERENCE_GFLOPS
                )
            })
        }
    }
}
