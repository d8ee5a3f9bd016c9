//! Graded synthetic distortions of reference meshes with proxy fidelity
//! labels, a stand-in for human-annotated data.
//!
//! One distortion pattern (per-vertex offsets and color shifts) is drawn per
//! reference and scaled by the level, so distortion grows monotonically with
//! the level for every object.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{add, floor, scale};
use crate::mesh::{ColoredMesh, MeshError, NormalizationTransform};
use crate::rng::{derive_seed, seeded};
use crate::Vec3;

pub const METHOD: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("at least one reference mesh is required")]
    NoReferences,
    #[error("noise levels must be finite and non-negative, got {0}")]
    Level(f64),
    #[error("at least one noise level is required")]
    NoLevels,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Distortion magnitudes at level 1, in normalized units (the reference
/// scaled to unit radius).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    /// Maximum per-axis vertex offset.
    pub position: f64,
    /// Maximum per-channel color shift.
    pub color: f64,
    /// Vertex-clustering cell size.
    pub cluster: f64,
}

impl Default for Amplitudes {
    fn default() -> Self {
        Self {
            position: 0.04,
            color: 0.3,
            cluster: 0.08,
        }
    }
}

impl Amplitudes {
    pub fn position_only(position: f64) -> Self {
        Self {
            position,
            color: 0.0,
            cluster: 0.0,
        }
    }
}

/// Applies the distortion pattern drawn from `seed` at strength `level`.
pub fn distort(mesh: &ColoredMesh, level: f64, amplitudes: &Amplitudes, seed: u64) -> Result<ColoredMesh, SynthError> {
    if !(level.is_finite() && level >= 0.0) {
        return Err(SynthError::Level(level));
    }
    if level == 0.0 {
        return Ok(mesh.clone());
    }
    let unit = 1.0 / NormalizationTransform::fit(mesh)?.scale;
    let mut r = seeded(seed);
    let mut offset = || -> Vec3 { [0, 1, 2].map(|_| r.random_range(-1.0..=1.0)) };
    let pattern: Vec<(Vec3, Vec3)> = (0..mesh.vertices().len()).map(|_| (offset(), offset())).collect();
    let vertices: Vec<Vec3> = mesh
        .vertices()
        .iter()
        .zip(&pattern)
        .map(|(&p, (dp, _))| add(p, scale(*dp, level * amplitudes.position * unit)))
        .collect();
    let colors: Vec<Vec3> = mesh
        .colors()
        .iter()
        .zip(&pattern)
        .map(|(&c, (_, dc))| [0, 1, 2].map(|k| (c[k] + level * amplitudes.color * dc[k]).clamp(0.0, 1.0)))
        .collect();
    let jittered = ColoredMesh::new(mesh.name(), vertices, colors, mesh.faces().to_vec())?;
    let cell = level * amplitudes.cluster * unit;
    Ok(if cell > 0.0 {
        cluster_vertices(&jittered, cell).unwrap_or(jittered)
    } else {
        jittered
    })
}

/// Vertex-clustering decimation: vertices sharing a grid cell merge into
/// their mean position and color; collapsed faces are dropped. Returns `None`
/// if no face survives.
pub fn cluster_vertices(mesh: &ColoredMesh, cell: f64) -> Option<ColoredMesh> {
    let (lo, _) = mesh.bounds();
    let mut cells: BTreeMap<[i64; 3], usize> = BTreeMap::new();
    let mut sums: Vec<(Vec3, Vec3, f64)> = Vec::new();
    let remap: Vec<usize> = mesh
        .vertices()
        .iter()
        .zip(mesh.colors())
        .map(|(p, c)| {
            let key = [0, 1, 2].map(|k| floor((p[k] - lo[k]) / cell) as i64);
            let id = *cells.entry(key).or_insert_with(|| {
                sums.push(([0.0; 3], [0.0; 3], 0.0));
                sums.len() - 1
            });
            let s = &mut sums[id];
            s.0 = add(s.0, *p);
            s.1 = add(s.1, *c);
            s.2 += 1.0;
            id
        })
        .collect();
    let faces: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .map(|f| f.map(|i| remap[i]))
        .filter(|[a, b, c]| a != b && b != c && a != c)
        .collect();
    if faces.is_empty() {
        return None;
    }
    let vertices = sums.iter().map(|s| scale(s.0, 1.0 / s.2)).collect();
    let colors = sums.iter().map(|s| scale(s.1, 1.0 / s.2).map(|v| v.clamp(0.0, 1.0))).collect();
    let out = ColoredMesh::new(mesh.name(), vertices, colors, faces).ok()?;
    (out.surface_area() > 0.0).then_some(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticItem {
    pub mesh: ColoredMesh,
    pub method: String,
    pub level: f64,
    /// `1 − level / max_level`, clamped to `[0, 1]`.
    pub label: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticObject {
    pub id: String,
    pub reference: ColoredMesh,
    pub distorted: Vec<SyntheticItem>,
}

/// One distorted copy per (reference, level).
pub fn make_synthetic_dataset(
    references: &[ColoredMesh],
    levels: &[f64],
    amplitudes: &Amplitudes,
    seed: u64,
) -> Result<Vec<SyntheticObject>, SynthError> {
    if references.is_empty() {
        return Err(SynthError::NoReferences);
    }
    if levels.is_empty() {
        return Err(SynthError::NoLevels);
    }
    if let Some(&bad) = levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(SynthError::Level(bad));
    }
    let max = levels.iter().copied().fold(0.0, f64::max);
    references
        .iter()
        .enumerate()
        .map(|(i, reference)| {
            let pattern_seed = derive_seed(seed, i as u64);
            let distorted = levels
                .iter()
                .map(|&level| {
                    let label = if max > 0.0 { (1.0 - level / max).clamp(0.0, 1.0) } else { 1.0 };
                    Ok(SyntheticItem {
                        mesh: distort(reference, level, amplitudes, pattern_seed)?,
                        method: METHOD.into(),
                        level,
                        label,
                    })
                })
                .collect::<Result<Vec<_>, SynthError>>()?;
            Ok(SyntheticObject {
                id: reference.name().into(),
                reference: reference.clone(),
                distorted,
            })
        })
        .collect()
}
