//! Dataset manifests: `{objects: [{id, reference, distorted: [{path, method, score}]}]}`.
//!
//! Paths are stored as written and resolved against the manifest's
//! directory when meshes are loaded.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tge_core::ColoredMesh;

use crate::io::{load_mesh, IoError};

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read manifest {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("manifest {path} is not valid JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("object id `{0}` appears twice")]
    DuplicateObject(String),
    #[error("object `{object}`: score {score} outside [0, 1]")]
    Score { object: String, score: f64 },
    #[error("object `{object}`, mesh {path}: {source}")]
    Mesh {
        object: String,
        path: String,
        source: IoError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub path: String,
    #[serde(default)]
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestObject {
    pub id: String,
    pub reference: String,
    pub distorted: Vec<ManifestItem>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub objects: Vec<ManifestObject>,
    #[serde(skip)]
    base: PathBuf,
}

/// An object with its meshes in memory.
#[derive(Debug, Clone)]
pub struct LoadedObject {
    pub id: String,
    pub reference: ColoredMesh,
    pub distorted: Vec<(ManifestItem, ColoredMesh)>,
}

impl LoadedObject {
    /// `(item, mesh)` pairs that carry a score.
    pub fn scored(&self) -> impl Iterator<Item = (&ManifestItem, &ColoredMesh, f64)> {
        self.distorted.iter().filter_map(|(i, m)| i.score.map(|s| (i, m, s)))
    }
}

impl Manifest {
    pub fn new(objects: Vec<ManifestObject>, base: impl Into<PathBuf>) -> Self {
        Self {
            objects,
            base: base.into(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = fs::read_to_string(path).map_err(|source| ManifestError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|source| ManifestError::Json {
            path: path.display().to_string(),
            source,
        })?;
        m.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ManifestError> {
        let mut ids = BTreeSet::new();
        for o in &self.objects {
            if !ids.insert(o.id.as_str()) {
                return Err(ManifestError::DuplicateObject(o.id.clone()));
            }
            if let Some(score) = o
                .distorted
                .iter()
                .filter_map(|d| d.score)
                .find(|s| !(0.0..=1.0).contains(s))
            {
                return Err(ManifestError::Score {
                    object: o.id.clone(),
                    score,
                });
            }
        }
        Ok(())
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        fs::write(path, self.to_json() + "\n")
    }

    /// Number of distorted meshes with a score.
    pub fn scored_pairs(&self) -> usize {
        self.objects
            .iter()
            .flat_map(|o| &o.distorted)
            .filter(|d| d.score.is_some())
            .count()
    }

    pub fn load_object(&self, index: usize) -> Result<LoadedObject, ManifestError> {
        let o = &self.objects[index];
        let load = |path: &str| {
            load_mesh(&self.resolve(path), None).map_err(|source| ManifestError::Mesh {
                object: o.id.clone(),
                path: path.to_string(),
                source,
            })
        };
        let reference = load(&o.reference)?;
        let distorted = o
            .distorted
            .iter()
            .map(|d| Ok((d.clone(), load(&d.path)?)))
            .collect::<Result<Vec<_>, ManifestError>>()?;
        Ok(LoadedObject {
            id: o.id.clone(),
            reference,
            distorted,
        })
    }

    pub fn load_all(&self) -> Result<Vec<LoadedObject>, ManifestError> {
        (0..self.objects.len()).map(|i| self.load_object(i)).collect()
    }
}
