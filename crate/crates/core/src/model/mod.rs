//! The fidelity network: a weight-shared encoder built from two
//! latent-geometry set-abstraction levels and a global set-abstraction level,
//! followed by a comparison head that maps two global features to a score in
//! `(0, 1)`.
//!
//! Within one level and grouping scale, a geometry stream encodes neighbor
//! offsets and a latent stream encodes neighbor features (colors at the first
//! level). Both are max-pooled per group and projected to `d_emb`, refined by
//! self-attention over the centroids, and fused with cross-attention in which
//! geometry queries appearance, plus a feed-forward branch on the latent
//! stream. The fused feature, concatenated with the geometry feature, passes a
//! per-centroid MLP.

mod config;
mod network;
mod prepare;

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use config::{Ablation, ComparisonMode, LgsaConfig, TgeConfig, COLOR_CHANNELS, HEAD_DIMS};
pub use prepare::{canonical_order, level_geometry, prepare, LevelGeometry, PreparedCloud};

use crate::autodiff::{AutodiffError, Graph, ParamStore, Tensor, Var};
use crate::geometry::GeometryError;
use crate::mesh::{sample_points, ColoredMesh, ColoredPointCloud, MeshError, NormalizationTransform};
use crate::rng;
use crate::Vec3;
use network::Network;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("feature width mismatch: expected {expected}, found {found}")]
    Width { expected: usize, found: usize },
    #[error("parameters were built for architecture {found}, config is {expected}")]
    Fingerprint { expected: String, found: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Learnable parameters together with the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct TgeParams {
    config: TgeConfig,
    store: ParamStore,
    net: Network,
    fingerprint: String,
}

/// Builds the network for `config` with fan-in scaled uniform weights and
/// zero biases drawn from `seed`.
pub fn init_params(config: &TgeConfig, seed: u64) -> Result<TgeParams, ModelError> {
    config.validate()?;
    let mut store = ParamStore::new();
    let mut r = rng::seeded(seed);
    let net = Network::new(&mut store, config, &mut r);
    Ok(TgeParams {
        config: config.clone(),
        store,
        net,
        fingerprint: config.fingerprint(),
    })
}

impl TgeParams {
    pub fn config(&self) -> &TgeConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Replaces the run-time seed (sampling and FPS), keeping the weights.
    pub fn set_seed(&mut self, seed: u64) {
        self.config.seed = seed;
    }

    /// Errors unless `config` describes this architecture.
    pub fn check(&self, config: &TgeConfig) -> Result<(), ModelError> {
        let expected = config.fingerprint();
        if expected != self.fingerprint {
            return Err(ModelError::Fingerprint {
                expected,
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    /// One latent-geometry level on the tape; `latent` has one row per point
    /// of the level input.
    pub fn lgsa_graph(
        &self,
        g: &mut Graph<'_>,
        level: usize,
        geometry: &LevelGeometry,
        latent: Var,
    ) -> Result<Var, ModelError> {
        self.net.level(g, &self.config, level, geometry, latent)
    }

    /// Global feature (`1 × final_dim`) of a prepared cloud.
    pub fn encode_graph(&self, g: &mut Graph<'_>, cloud: &PreparedCloud) -> Result<Var, ModelError> {
        let colors = g.constant(cloud.colors.clone());
        let f1 = self.lgsa_graph(g, 0, &cloud.level1, colors)?;
        let f2 = self.lgsa_graph(g, 1, &cloud.level2, f1)?;
        let xyz = g.constant(Tensor::from_rows(&cloud.level2.centroid_points)?);
        let x = g.concat_cols(&[xyz, f2])?;
        let h = self.net.global.forward(g, x)?;
        Ok(g.max_pool_points(h)?)
    }

    /// Fidelity score (`1 × 1`) from two global features.
    pub fn compare_graph(&self, g: &mut Graph<'_>, f_input: Var, f_ref: Var) -> Result<Var, ModelError> {
        let (a, b) = (g.shape(f_input), g.shape(f_ref));
        if a != b {
            return Err(ModelError::Width {
                expected: a.1,
                found: b.1,
            });
        }
        self.net.compare(g, self.config.comparison_mode, f_input, f_ref)
    }

    /// Score of a prepared pair; both clouds share every weight.
    pub fn score_graph(
        &self,
        g: &mut Graph<'_>,
        input: &PreparedCloud,
        reference: &PreparedCloud,
    ) -> Result<Var, ModelError> {
        let fi = self.encode_graph(g, input)?;
        let fr = self.encode_graph(g, reference)?;
        self.compare_graph(g, fi, fr)
    }

    pub(crate) fn network(&self) -> &Network {
        &self.net
    }
}

/// Runs one level on plain values. Returns the centroid positions and their
/// fused features (`centroids × output_width`).
pub fn lgsa_forward(
    points: &[Vec3],
    latent: &Tensor,
    level: usize,
    params: &TgeParams,
) -> Result<(Vec<Vec3>, Tensor), ModelError> {
    let config = params.config();
    if latent.rows() != points.len() {
        return Err(ModelError::Width {
            expected: points.len(),
            found: latent.rows(),
        });
    }
    let (points, latent) = if config.canonical_order {
        let order = canonical_order(points, latent);
        (order.iter().map(|&i| points[i]).collect(), prepare::permute_rows(latent, &order))
    } else {
        (points.to_vec(), latent.clone())
    };
    let geometry = level_geometry(&points, config, level)?;
    let mut g = Graph::with_params(params.store());
    let lat = g.constant(latent);
    let out = params.lgsa_graph(&mut g, level, &geometry, lat)?;
    Ok((geometry.centroid_points, g.value(out).clone()))
}

/// Global feature vector of a cloud.
pub fn encode(cloud: &ColoredPointCloud, config: &TgeConfig, params: &TgeParams) -> Result<Vec<f64>, ModelError> {
    params.check(config)?;
    let prepared = prepare(cloud, config)?;
    let mut g = Graph::with_params(params.store());
    let f = params.encode_graph(&mut g, &prepared)?;
    Ok(g.value(f).data().to_vec())
}

/// Fidelity score from two global features.
pub fn compare(f_input: &[f64], f_ref: &[f64], params: &TgeParams) -> Result<f64, ModelError> {
    let expected = params.config().final_dim();
    for f in [f_input, f_ref] {
        if f.len() != expected {
            return Err(ModelError::Width {
                expected,
                found: f.len(),
            });
        }
    }
    let mut g = Graph::with_params(params.store());
    let a = g.constant(Tensor::row(f_input));
    let b = g.constant(Tensor::row(f_ref));
    let s = params.compare_graph(&mut g, a, b)?;
    Ok(g.value(s).item())
}

/// Normalizes both meshes with the reference transform and samples
/// `n_points` from each with the config seed.
pub fn sample_pair(
    input: &ColoredMesh,
    reference: &ColoredMesh,
    config: &TgeConfig,
) -> Result<(ColoredPointCloud, ColoredPointCloud), ModelError> {
    let transform = NormalizationTransform::fit(reference)?;
    let a = sample_points(&input.transformed(&transform), config.n_points, config.seed, false)?;
    let b = sample_points(&reference.transformed(&transform), config.n_points, config.seed, false)?;
    Ok((a, b))
}

/// Samples and groups both meshes of a pair.
pub fn prepare_pair(
    input: &ColoredMesh,
    reference: &ColoredMesh,
    config: &TgeConfig,
) -> Result<(PreparedCloud, PreparedCloud), ModelError> {
    let (a, b) = sample_pair(input, reference, config)?;
    Ok((prepare(&a, config)?, prepare(&b, config)?))
}

/// Predicted fidelity of `input` to `reference`.
pub fn predict(
    input: &ColoredMesh,
    reference: &ColoredMesh,
    config: &TgeConfig,
    params: &TgeParams,
) -> Result<f64, ModelError> {
    params.check(config)?;
    let (a, b) = prepare_pair(input, reference, config)?;
    let mut g = Graph::with_params(params.store());
    let s = params.score_graph(&mut g, &a, &b)?;
    Ok(g.value(s).item())
}

/// Multiply-accumulate counts of one pair prediction, split by where they
/// occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MacCount {
    /// Per-neighbor PointNet layers inside the groups.
    pub grouped: u64,
    /// Projections, attention, feed-forward and output MLPs per centroid.
    pub centroid: u64,
    /// Global set-abstraction MLP.
    pub global: u64,
    /// Comparison head.
    pub head: u64,
}

impl MacCount {
    pub fn total(&self) -> u64 {
        self.grouped + self.centroid + self.global + self.head
    }
}

/// Analytic multiply-accumulate count of one prediction at `config`.
pub fn mac_count(config: &TgeConfig) -> Result<MacCount, ModelError> {
    let params = init_params(config, 0)?;
    let net = params.network();
    let mut count = MacCount::default();
    for level in 0..2 {
        let cfg = config.level(level);
        for (s, layers) in net.levels[level].iter().enumerate() {
            count.grouped += layers.grouped_macs(cfg.centroids * cfg.max_samples[s]);
            count.centroid += layers.centroid_macs(cfg.centroids);
        }
    }
    count.global = net.global.macs(config.level2.centroids);
    // both meshes are encoded
    count.grouped *= 2;
    count.centroid *= 2;
    count.global *= 2;
    count.head = net.head.macs(1) + net.score.macs(1);
    Ok(count)
}
