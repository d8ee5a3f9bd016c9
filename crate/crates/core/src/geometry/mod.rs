//! Point-set machinery: exact KD-tree queries, farthest point sampling and
//! ball-query grouping.
//!
//! All distance comparisons use squared Euclidean distance computed in one
//! fixed operation order, and ties are broken by the lower point index, so
//! every query agrees exactly with a brute-force scan.

mod fps;
mod kdtree;

use alloc::vec::Vec;

use thiserror::Error;

pub use fps::{farthest_point_sample, farthest_point_sample_traced};
pub use kdtree::{Neighbor, SpatialIndex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point set is empty")]
    Empty,
    #[error("requested {requested} points from a set of {available}")]
    TooMany { requested: usize, available: usize },
    #[error("requested zero points")]
    Zero,
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("grouping spec: {0}")]
    Spec(&'static str),
}

/// Multi-scale grouping parameters for one set-abstraction level.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingSpec {
    pub radii: Vec<f64>,
    pub max_samples: Vec<usize>,
    pub centroids: usize,
}

impl GroupingSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.radii.len() != self.max_samples.len() {
            return Err(GeometryError::Spec("radii and max_samples differ in length"));
        }
        if self.radii.is_empty() {
            return Err(GeometryError::Spec("at least one scale is required"));
        }
        if let Some(&r) = self.radii.iter().find(|&&r| !(r > 0.0)) {
            return Err(GeometryError::Radius(r));
        }
        if self.max_samples.contains(&0) {
            return Err(GeometryError::Spec("max_samples must be at least 1"));
        }
        if self.centroids == 0 {
            return Err(GeometryError::Spec("centroids must be at least 1"));
        }
        Ok(())
    }
}

/// Result of sampling and grouping one point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    /// Indices of the FPS centroids into the input set.
    pub centroids: Vec<usize>,
    /// `groups[scale][centroid]` holds neighbor indices, nearest first.
    pub groups: Vec<Vec<Vec<usize>>>,
}

/// FPS followed by a ball query per scale around every centroid.
pub fn sample_and_group(
    index: &SpatialIndex,
    spec: &GroupingSpec,
    seed: u64,
) -> Result<Grouping, GeometryError> {
    spec.validate()?;
    let centroids = farthest_point_sample(index.points(), spec.centroids, seed)?;
    let groups = spec
        .radii
        .iter()
        .zip(&spec.max_samples)
        .map(|(&radius, &max_k)| {
            centroids
                .iter()
                .map(|&c| index.ball_query(index.points()[c], radius, max_k))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Grouping { centroids, groups })
}
