//! Checkpoint files: an 8-byte magic, a little-endian `u64` header length,
//! a JSON header (config, fingerprint, parameter layout, optional training
//! metadata), then every parameter value as little-endian `f64` in layout
//! order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tge_core::autodiff::Tensor;
use tge_core::model::{init_params, ModelError, TgeConfig, TgeParams};

pub const MAGIC: &[u8; 8] = b"TGECKPT1";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("not a checkpoint file (bad magic)")]
    Magic,
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint fingerprint {found} does not match the model config ({expected})")]
    Fingerprint { expected: String, found: String },
    #[error("checkpoint layout does not match the model: {0}")]
    Layout(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub fingerprint: String,
    pub config: TgeConfig,
    pub params: Vec<ParamEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<serde_json::Value>,
}

pub fn encode_checkpoint(params: &TgeParams, train: Option<serde_json::Value>) -> Vec<u8> {
    let header = CheckpointHeader {
        version: VERSION,
        fingerprint: params.fingerprint().to_string(),
        config: params.config().clone(),
        params: params
            .store()
            .iter()
            .map(|(_, p)| {
                let (rows, cols) = p.value().shape();
                ParamEntry {
                    name: p.name().to_string(),
                    rows,
                    cols,
                }
            })
            .collect(),
        train,
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(16 + json.len() + 8 * params.store().numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in params.store().iter() {
        for v in p.value().data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Rebuilds the parameters. With `expected`, the checkpoint must have been
/// written for that architecture.
pub fn decode_checkpoint(
    bytes: &[u8],
    expected: Option<&TgeConfig>,
) -> Result<(TgeParams, CheckpointHeader), CheckpointError> {
    if bytes.len() < 16 {
        return Err(if bytes.starts_with(&MAGIC[..bytes.len().min(8)]) {
            CheckpointError::Truncated
        } else {
            CheckpointError::Magic
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let json = bytes.get(16..16 + len).ok_or(CheckpointError::Truncated)?;
    let header: CheckpointHeader = serde_json::from_slice(json)?;
    if header.version != VERSION {
        return Err(CheckpointError::Version(header.version));
    }
    let own = header.config.fingerprint();
    if own != header.fingerprint {
        return Err(CheckpointError::Fingerprint {
            expected: own,
            found: header.fingerprint.clone(),
        });
    }
    if let Some(config) = expected {
        let want = config.fingerprint();
        if want != header.fingerprint {
            return Err(CheckpointError::Fingerprint {
                expected: want,
                found: header.fingerprint.clone(),
            });
        }
    }
    let mut params = init_params(&header.config, 0)?;
    let layout: Vec<ParamEntry> = params
        .store()
        .iter()
        .map(|(_, p)| ParamEntry {
            name: p.name().to_string(),
            rows: p.value().rows(),
            cols: p.value().cols(),
        })
        .collect();
    if layout != header.params {
        return Err(CheckpointError::Layout(format!(
            "{} stored tensors vs {} in the model",
            header.params.len(),
            layout.len()
        )));
    }
    let mut data = bytes[16 + len..].chunks_exact(8);
    let mut values = Vec::with_capacity(layout.len());
    for e in &layout {
        let n = e.rows * e.cols;
        let v: Vec<f64> = data
            .by_ref()
            .take(n)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if v.len() != n {
            return Err(CheckpointError::Truncated);
        }
        values.push(Tensor::new(e.rows, e.cols, v).expect("sized"));
    }
    if data.next().is_some() || !data.remainder().is_empty() {
        return Err(CheckpointError::Layout("trailing bytes after parameters".into()));
    }
    params
        .store_mut()
        .load_values(values)
        .map_err(|e| CheckpointError::Layout(e.to_string()))?;
    Ok((params, header))
}

/// Writes through a temporary file and a rename so readers never see a
/// partial checkpoint.
pub fn save_checkpoint(path: &Path, params: &TgeParams, train: Option<serde_json::Value>) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, encode_checkpoint(params, train)).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(
    path: &Path,
    expected: Option<&TgeConfig>,
) -> Result<(TgeParams, CheckpointHeader), CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&bytes, expected)
}
