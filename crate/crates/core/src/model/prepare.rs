//! Geometry-only preprocessing: canonical ordering, FPS and ball-query
//! grouping for both levels. None of it depends on learned weights, so a
//! cloud is prepared once and reused across training epochs.

use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{ModelError, TgeConfig};
use crate::autodiff::Tensor;
use crate::geometry::{sample_and_group, SpatialIndex};
use crate::math::{scale, sub};
use crate::mesh::ColoredPointCloud;
use crate::rng::derive_seed;
use crate::Vec3;

const FPS_STREAM: u64 = 0x4C47_5341;

/// Centroids and padded neighbor groups of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelGeometry {
    /// Indices of the centroids into the level's input points.
    pub centroids: Vec<usize>,
    pub centroid_points: Vec<Vec3>,
    /// Per scale, `centroids × max_samples` neighbor indices, group by group.
    pub groups: Vec<Vec<usize>>,
    /// Per scale, neighbor offsets from their centroid divided by the radius.
    pub relative: Vec<Tensor>,
}

/// A point cloud with both levels of grouping precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCloud {
    pub points: Vec<Vec3>,
    /// `n × 3` RGB.
    pub colors: Tensor,
    pub level1: LevelGeometry,
    pub level2: LevelGeometry,
}

impl PreparedCloud {
    pub fn level(&self, level: usize) -> &LevelGeometry {
        if level == 0 {
            &self.level1
        } else {
            &self.level2
        }
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Permutation sorting points (then their latent rows) lexicographically.
pub fn canonical_order(points: &[Vec3], latent: &Tensor) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        lexicographic(&points[i], &points[j]).then_with(|| lexicographic(latent.row_slice(i), latent.row_slice(j)))
    });
    order
}

pub(crate) fn permute_rows(t: &Tensor, order: &[usize]) -> Tensor {
    let cols = t.cols();
    let mut data = Vec::with_capacity(order.len() * cols);
    for &i in order {
        data.extend_from_slice(t.row_slice(i));
    }
    Tensor::new(order.len(), cols, data).expect("sized")
}

/// Groups `points` for `level` of `config`.
pub fn level_geometry(points: &[Vec3], config: &TgeConfig, level: usize) -> Result<LevelGeometry, ModelError> {
    let cfg = config.level(level);
    if points.len() < cfg.centroids {
        return Err(ModelError::TooFewPoints {
            needed: cfg.centroids,
            got: points.len(),
        });
    }
    let index = SpatialIndex::build(points)?;
    let grouping = sample_and_group(&index, &cfg.grouping_spec(), derive_seed(config.seed, FPS_STREAM + level as u64))?;
    let centroid_points: Vec<Vec3> = grouping.centroids.iter().map(|&c| points[c]).collect();
    let mut groups = Vec::with_capacity(cfg.scales());
    let mut relative = Vec::with_capacity(cfg.scales());
    for (s, per_centroid) in grouping.groups.iter().enumerate() {
        let k = cfg.max_samples[s];
        let inv_r = 1.0 / cfg.radii[s];
        let mut flat = Vec::with_capacity(per_centroid.len() * k);
        let mut rel = Vec::with_capacity(per_centroid.len() * k * 3);
        for (c, members) in per_centroid.iter().enumerate() {
            // pad short groups by repeating the nearest member
            for j in 0..k {
                let idx = *members.get(j).unwrap_or(&members[0]);
                flat.push(idx);
                rel.extend_from_slice(&scale(sub(points[idx], centroid_points[c]), inv_r));
            }
        }
        relative.push(Tensor::new(flat.len(), 3, rel).expect("sized"));
        groups.push(flat);
    }
    Ok(LevelGeometry {
        centroids: grouping.centroids,
        centroid_points,
        groups,
        relative,
    })
}

/// Canonically orders (when configured) and groups a sampled cloud.
pub fn prepare(cloud: &ColoredPointCloud, config: &TgeConfig) -> Result<PreparedCloud, ModelError> {
    let colors = Tensor::from_rows(cloud.colors()).map_err(ModelError::Autodiff)?;
    let (points, colors) = if config.canonical_order {
        let order = canonical_order(cloud.points(), &colors);
        (order.iter().map(|&i| cloud.points()[i]).collect(), permute_rows(&colors, &order))
    } else {
        (cloud.points().to_vec(), colors)
    };
    let level1 = level_geometry(&points, config, 0)?;
    let level2 = level_geometry(&level1.centroid_points, config, 1)?;
    Ok(PreparedCloud {
        points,
        colors,
        level1,
        level2,
    })
}
