//! Mesh files: OBJ with per-vertex RGB (`v x y z r g b`) and PLY (ascii or
//! binary little-endian) with `red/green/blue` vertex properties.

mod obj;
mod ply;

use std::fs;
use std::path::Path;

use thiserror::Error;
use tge_core::mesh::MeshError;
use tge_core::ColoredMesh;

pub use obj::{parse_obj, write_obj};
pub use ply::{parse_ply, write_ply};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("unsupported mesh format `{0}` (expected .obj or .ply)")]
    Unsupported(String),
    #[error("missing vertex colors; bake colors into the mesh or supply a default color")]
    MissingColors,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl IoError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        IoError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// On-disk mesh encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    PlyAscii,
    PlyBinary,
}

impl MeshFormat {
    /// Format from a file extension; `.ply` maps to binary for writing.
    pub fn from_path(path: &Path) -> Result<Self, IoError> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "ply" => Ok(MeshFormat::PlyBinary),
            _ => Err(IoError::Unsupported(path.display().to_string())),
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string()
}

/// Reads a mesh; the format comes from `hint` or the extension. PLY files
/// declare ascii or binary themselves.
pub fn load_mesh(path: &Path, hint: Option<MeshFormat>) -> Result<ColoredMesh, IoError> {
    let format = match hint {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let bytes = fs::read(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let name = stem(path);
    match format {
        MeshFormat::Obj => parse_obj(&String::from_utf8_lossy(&bytes), &name),
        MeshFormat::PlyAscii | MeshFormat::PlyBinary => parse_ply(&bytes, &name),
    }
}

pub fn encode_mesh(mesh: &ColoredMesh, format: MeshFormat) -> Vec<u8> {
    match format {
        MeshFormat::Obj => write_obj(mesh).into_bytes(),
        MeshFormat::PlyAscii => write_ply(mesh, false),
        MeshFormat::PlyBinary => write_ply(mesh, true),
    }
}

pub fn save_mesh(mesh: &ColoredMesh, path: &Path, format: Option<MeshFormat>) -> Result<(), IoError> {
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    fs::write(path, encode_mesh(mesh, format)).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Splits a polygon `[a, b, c, d, …]` into the fan `(a, b, c), (a, c, d), …`.
pub(crate) fn fan(polygon: &[usize], out: &mut Vec<[usize; 3]>) {
    for k in 1..polygon.len().saturating_sub(1) {
        out.push([polygon[0], polygon[k], polygon[k + 1]]);
    }
}
