//! Classical full-reference baselines: Chamfer distance, voxel IoU, F-score,
//! point-to-surface distance, normal difference and unidirectional Hausdorff
//! distance.
//!
//! Conventions:
//! - CD is `0.5 * (mean_a d²(a, B) + mean_b d²(b, A))` with squared distances.
//! - IoU uses surface (shell) occupancy on a shared cubic grid.
//! - F-score counts a point as matched when its nearest neighbor lies within
//!   `tau` (inclusive).
//! - ND averages `1 - |cos θ|` to the nearest neighbor's normal, in both
//!   directions.
//! - UHD is the maximum distance from the input to the reference.
//!
//! Every reduction runs in index order, so results do not depend on
//! scheduling.

mod triangle;
mod voxel;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::SpatialIndex;
use crate::math::{dot, sqrt};
use crate::mesh::{normalize, sample_points, ColoredMesh, ColoredPointCloud, MeshError, NormalizationTransform};

pub use triangle::{closest_point_on_triangle, point_triangle_dist2, TriangleBvh};
pub use voxel::{lattice_samples, lattice_steps, occupied, surface_samples, VoxelGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("normal difference needs normals on both clouds")]
    MissingNormals,
    #[error("reference mesh has no non-degenerate triangle")]
    DegenerateReference,
    #[error("threshold must be positive, got {0}")]
    Threshold(f64),
    #[error("voxel resolution must be at least 8, got {0}")]
    Resolution(usize),
    #[error("both voxel grids are empty")]
    EmptyUnion,
    #[error("unknown metric `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Whether larger values mean better fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    HigherBetter,
    LowerBetter,
}

impl Orientation {
    /// Sign that maps the metric onto a higher-is-better scale.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::HigherBetter => 1.0,
            Orientation::LowerBetter => -1.0,
        }
    }
}

/// The six baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Cd,
    Iou,
    Fscore,
    P2s,
    Nd,
    Uhd,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Cd,
        MetricKind::Iou,
        MetricKind::Fscore,
        MetricKind::P2s,
        MetricKind::Nd,
        MetricKind::Uhd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cd => "cd",
            MetricKind::Iou => "iou",
            MetricKind::Fscore => "fscore",
            MetricKind::P2s => "p2s",
            MetricKind::Nd => "nd",
            MetricKind::Uhd => "uhd",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            MetricKind::Iou | MetricKind::Fscore => Orientation::HigherBetter,
            _ => Orientation::LowerBetter,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        MetricKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || (lower == "f-score" && *k == MetricKind::Fscore))
            .ok_or_else(|| MetricError::Unknown(s.to_string()))
    }
}

/// One evaluated metric, serialized as `{metric, value, orientation, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric: MetricKind,
    pub value: f64,
    pub orientation: Orientation,
    pub params: BTreeMap<String, Value>,
}

fn nonempty(c: &ColoredPointCloud) -> Result<(), MetricError> {
    if c.is_empty() {
        Err(MetricError::EmptyCloud)
    } else {
        Ok(())
    }
}

fn index_of(c: &ColoredPointCloud) -> Result<SpatialIndex, MetricError> {
    nonempty(c)?;
    SpatialIndex::build(c.points()).map_err(|_| MetricError::EmptyCloud)
}

/// Squared nearest-neighbor distances from every point of `from` into `to`.
fn nn_dist2(from: &ColoredPointCloud, to: &SpatialIndex) -> Vec<f64> {
    from.points().iter().map(|&p| to.nearest_one(p).1).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Symmetric squared Chamfer distance.
pub fn chamfer(a: &ColoredPointCloud, b: &ColoredPointCloud) -> Result<f64, MetricError> {
    let ia = index_of(a)?;
    let ib = index_of(b)?;
    Ok(0.5 * (mean(&nn_dist2(a, &ib)) + mean(&nn_dist2(b, &ia))))
}

/// Harmonic mean of precision (a matched in b) and recall (b matched in a)
/// at distance threshold `tau`.
pub fn fscore(a: &ColoredPointCloud, b: &ColoredPointCloud, tau: f64) -> Result<f64, MetricError> {
    if !(tau > 0.0) {
        return Err(MetricError::Threshold(tau));
    }
    let ia = index_of(a)?;
    let ib = index_of(b)?;
    let t2 = tau * tau;
    let within = |d: Vec<f64>| d.iter().filter(|&&d2| d2 <= t2).count() as f64 / d.len() as f64;
    let precision = within(nn_dist2(a, &ib));
    let recall = within(nn_dist2(b, &ia));
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Mean exact distance from each point to the reference surface.
pub fn p2s(points: &ColoredPointCloud, reference: &ColoredMesh) -> Result<f64, MetricError> {
    nonempty(points)?;
    let tris: Vec<_> = (0..reference.faces().len())
        .filter(|&f| reference.face_area(f) > 0.0)
        .map(|f| reference.triangle(f))
        .collect();
    if tris.is_empty() {
        return Err(MetricError::DegenerateReference);
    }
    let bvh = TriangleBvh::new(tris);
    let d: Vec<f64> = points.points().iter().map(|&p| sqrt(bvh.dist2(p))).collect();
    Ok(mean(&d))
}

fn one_way_nd(a: &ColoredPointCloud, b: &ColoredPointCloud, ib: &SpatialIndex) -> Result<f64, MetricError> {
    let na = a.normals().ok_or(MetricError::MissingNormals)?;
    let nb = b.normals().ok_or(MetricError::MissingNormals)?;
    let terms: Vec<f64> = a
        .points()
        .iter()
        .zip(na)
        .map(|(&p, &n)| {
            let (j, _) = ib.nearest_one(p);
            1.0 - dot(n, nb[j]).abs().min(1.0)
        })
        .collect();
    Ok(mean(&terms))
}

/// Orientation-agnostic normal difference in `[0, 1]`.
pub fn normal_difference(a: &ColoredPointCloud, b: &ColoredPointCloud) -> Result<f64, MetricError> {
    if a.normals().is_none() || b.normals().is_none() {
        return Err(MetricError::MissingNormals);
    }
    let ia = index_of(a)?;
    let ib = index_of(b)?;
    Ok(0.5 * (one_way_nd(a, b, &ib)? + one_way_nd(b, a, &ia)?))
}

/// Largest nearest-neighbor distance from `a` into `b`.
pub fn uhd(a: &ColoredPointCloud, b: &ColoredPointCloud) -> Result<f64, MetricError> {
    nonempty(a)?;
    let ib = index_of(b)?;
    Ok(sqrt(nn_dist2(a, &ib).into_iter().fold(0.0, f64::max)))
}

/// Surface-occupancy IoU of two meshes on a shared `resolution`³ grid.
pub fn iou_voxel(a: &ColoredMesh, b: &ColoredMesh, resolution: usize) -> Result<f64, MetricError> {
    if resolution < 8 {
        return Err(MetricError::Resolution(resolution));
    }
    let grid = VoxelGrid::enclosing(a, b, resolution);
    if !(grid.side > 0.0) {
        return Err(MetricError::EmptyUnion);
    }
    let oa = occupied(a, &grid);
    let ob = occupied(b, &grid);
    let inter = oa.intersection(&ob).count();
    let union = oa.len() + ob.len() - inter;
    if union == 0 {
        return Err(MetricError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// Default F-score threshold as a fraction of the bounding diagonal.
pub const DEFAULT_FSCORE_FRACTION: f64 = 0.01;

/// Diagonal of `[-1, 1]³`, the box that bounds every normalized reference in
/// any orientation.
pub const NORMALIZED_DIAGONAL: f64 = 3.464_101_615_137_754_6;

/// Settings for [`run_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub points: usize,
    pub seed: u64,
    pub iou_resolution: usize,
    /// F-score threshold in normalized units; `None` uses
    /// [`DEFAULT_FSCORE_FRACTION`] of the normalized frame's bounding-cube
    /// diagonal.
    pub fscore_tau: Option<f64>,
    pub metrics: Vec<MetricKind>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            points: 2048,
            seed: 0,
            iou_resolution: 64,
            fscore_tau: None,
            metrics: MetricKind::ALL.to_vec(),
        }
    }
}

/// Normalizes both meshes with the reference's transform, samples them and
/// evaluates the configured metrics in the configured order.
pub fn run_all(
    input: &ColoredMesh,
    reference: &ColoredMesh,
    config: &MetricConfig,
) -> Result<Vec<MetricResult>, MetricError> {
    let (reference, transform) = normalize(reference)?;
    let input = input.transformed(&transform);
    let ci = sample_points(&input, config.points, config.seed, true)?;
    let cr = sample_points(&reference, config.points, config.seed, true)?;
    let tau = config
        .fscore_tau
        .unwrap_or(DEFAULT_FSCORE_FRACTION * NORMALIZED_DIAGONAL);

    let base = |t: &NormalizationTransform| {
        let mut p = BTreeMap::new();
        p.insert("points".to_string(), Value::from(config.points));
        p.insert("seed".to_string(), Value::from(config.seed));
        p.insert("normalization_scale".to_string(), Value::from(t.scale));
        p
    };
    let mut out = Vec::with_capacity(config.metrics.len());
    for &kind in &config.metrics {
        let mut params = base(&transform);
        let value = match kind {
            MetricKind::Cd => {
                params.insert("convention".into(), "0.5*(mean sq nn a->b + mean sq nn b->a)".into());
                chamfer(&ci, &cr)?
            }
            MetricKind::Iou => {
                params.insert("resolution".into(), Value::from(config.iou_resolution));
                params.insert("occupancy".into(), "surface".into());
                iou_voxel(&input, &reference, config.iou_resolution)?
            }
            MetricKind::Fscore => {
                params.insert("tau".into(), Value::from(tau));
                fscore(&ci, &cr, tau)?
            }
            MetricKind::P2s => p2s(&ci, &reference)?,
            MetricKind::Nd => {
                params.insert("convention".into(), "symmetric mean of 1-|cos|".into());
                normal_difference(&ci, &cr)?
            }
            MetricKind::Uhd => {
                params.insert("direction".into(), "input->reference".into());
                uhd(&ci, &cr)?
            }
        };
        out.push(MetricResult {
            metric: kind,
            value,
            orientation: kind.orientation(),
            params,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
