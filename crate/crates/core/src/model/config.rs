use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::geometry::GroupingSpec;

/// Width of the per-point latent input of the first level (RGB).
pub const COLOR_CHANNELS: usize = 3;

/// Hidden widths of the fidelity comparison MLP.
pub const HEAD_DIMS: [usize; 3] = [1024, 512, 256];

/// How the two global features are combined before the comparison MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonMode {
    /// `[f_input, f_ref, |f_input − f_ref|]`
    #[default]
    ConcatDiff,
    /// `[f_input, f_ref]`
    Concat,
    /// `|f_input − f_ref|`
    Diff,
}

impl ComparisonMode {
    pub fn width(self, feature: usize) -> usize {
        match self {
            Self::ConcatDiff => 3 * feature,
            Self::Concat => 2 * feature,
            Self::Diff => feature,
        }
    }
}

/// Architecture variants for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    Full,
    /// One PointNet stream over `[relative xyz, latent]`, no attention.
    NoAttentionNoLatent,
    /// Both streams kept; fused feature is `g + FFN(l)`.
    NoAttention,
    /// Cross-attention only; streams enter it without self-attention.
    NoSelfAttention,
    /// Output MLP sees the fused feature alone.
    NoGeometryFeature,
}

impl Ablation {
    pub const ALL: [Ablation; 5] = [
        Self::Full,
        Self::NoAttentionNoLatent,
        Self::NoAttention,
        Self::NoSelfAttention,
        Self::NoGeometryFeature,
    ];

    pub(crate) fn has_latent_stream(self) -> bool {
        self != Self::NoAttentionNoLatent
    }

    pub(crate) fn has_self_attention(self) -> bool {
        matches!(self, Self::Full | Self::NoGeometryFeature)
    }

    pub(crate) fn has_cross_attention(self) -> bool {
        matches!(self, Self::Full | Self::NoSelfAttention | Self::NoGeometryFeature)
    }

    pub(crate) fn keeps_geometry_feature(self) -> bool {
        matches!(self, Self::Full | Self::NoAttention | Self::NoSelfAttention)
    }
}

/// One latent-geometry set-abstraction level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgsaConfig {
    pub centroids: usize,
    pub radii: Vec<f64>,
    pub max_samples: Vec<usize>,
    /// Per scale: PointNet widths of the geometry stream.
    pub geom_mlp_dims: Vec<Vec<usize>>,
    /// Per scale: PointNet widths of the latent stream.
    pub latent_mlp_dims: Vec<Vec<usize>>,
    /// Per scale: widths of the per-centroid output MLP.
    pub out_mlp_dims: Vec<Vec<usize>>,
    pub d_emb: usize,
    pub heads: usize,
}

impl LgsaConfig {
    pub fn scales(&self) -> usize {
        self.radii.len()
    }

    /// Channel count of the concatenated multi-scale output.
    pub fn output_width(&self) -> usize {
        self.out_mlp_dims.iter().map(|d| d.last().copied().unwrap_or(0)).sum()
    }

    pub fn grouping_spec(&self) -> GroupingSpec {
        GroupingSpec {
            radii: self.radii.clone(),
            max_samples: self.max_samples.clone(),
            centroids: self.centroids,
        }
    }

    fn validate(&self, level: &str) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::Config(alloc::format!("{level}: {what}")));
        self.grouping_spec()
            .validate()
            .map_err(|e| ModelError::Config(alloc::format!("{level}: {e}")))?;
        let s = self.scales();
        if self.geom_mlp_dims.len() != s || self.latent_mlp_dims.len() != s || self.out_mlp_dims.len() != s {
            return bad("one MLP spec per scale is required");
        }
        for dims in self.geom_mlp_dims.iter().chain(&self.latent_mlp_dims).chain(&self.out_mlp_dims) {
            if dims.is_empty() || dims.contains(&0) {
                return bad("MLP widths must be non-empty and positive");
            }
        }
        if self.d_emb == 0 || self.heads == 0 || self.d_emb % self.heads != 0 {
            return bad("d_emb must be a positive multiple of heads");
        }
        Ok(())
    }

    fn scaled(&self, n_points: usize, base: usize) -> Self {
        let mut c = self.clone();
        c.centroids = (self.centroids * n_points / base).max(1);
        c
    }
}

/// Full network configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgeConfig {
    pub n_points: usize,
    pub level1: LgsaConfig,
    pub level2: LgsaConfig,
    /// Widths of the global set-abstraction MLP; the last is the feature width.
    pub final_mlp_dims: Vec<usize>,
    pub head_dims: Vec<usize>,
    pub comparison_mode: ComparisonMode,
    pub ablation: Ablation,
    /// Sort points lexicographically before sampling so that encoding does not
    /// depend on input order.
    pub canonical_order: bool,
    /// Drives point sampling and the FPS start points.
    pub seed: u64,
}

impl Default for TgeConfig {
    fn default() -> Self {
        Self {
            n_points: 1024,
            level1: LgsaConfig {
                centroids: 512,
                radii: vec![0.1, 0.2, 0.4],
                max_samples: vec![16, 32, 128],
                geom_mlp_dims: vec![vec![32, 32, 64], vec![64, 64, 128], vec![64, 96, 128]],
                latent_mlp_dims: vec![vec![32, 32, 64], vec![64, 64, 128], vec![64, 96, 128]],
                out_mlp_dims: vec![vec![64], vec![96], vec![96]],
                d_emb: 128,
                heads: 4,
            },
            level2: LgsaConfig {
                centroids: 128,
                radii: vec![0.2, 0.4, 0.8],
                max_samples: vec![32, 64, 128],
                geom_mlp_dims: vec![vec![64, 64, 128], vec![128, 128, 256], vec![128, 128, 256]],
                latent_mlp_dims: vec![vec![64, 64, 128], vec![128, 128, 256], vec![128, 128, 256]],
                out_mlp_dims: vec![vec![128], vec![192], vec![192]],
                d_emb: 256,
                heads: 4,
            },
            final_mlp_dims: vec![256, 512, 1024],
            head_dims: HEAD_DIMS.to_vec(),
            comparison_mode: ComparisonMode::default(),
            ablation: Ablation::default(),
            canonical_order: true,
            seed: 0,
        }
    }
}

impl TgeConfig {
    /// Small network for tests and quick training runs: 64 points,
    /// attention width 16.
    pub fn toy() -> Self {
        Self {
            n_points: 64,
            level1: LgsaConfig {
                centroids: 32,
                radii: vec![0.3, 0.6],
                max_samples: vec![8, 16],
                geom_mlp_dims: vec![vec![16], vec![16]],
                latent_mlp_dims: vec![vec![16], vec![16]],
                out_mlp_dims: vec![vec![16], vec![16]],
                d_emb: 16,
                heads: 2,
            },
            level2: LgsaConfig {
                centroids: 16,
                radii: vec![0.6, 1.2],
                max_samples: vec![8, 16],
                geom_mlp_dims: vec![vec![16], vec![16]],
                latent_mlp_dims: vec![vec![16], vec![16]],
                out_mlp_dims: vec![vec![16], vec![16]],
                d_emb: 16,
                heads: 2,
            },
            final_mlp_dims: vec![32, 64],
            ..Self::default()
        }
    }

    pub fn final_dim(&self) -> usize {
        self.final_mlp_dims.last().copied().unwrap_or(0)
    }

    /// Width of the latent features entering `level` (0 or 1).
    pub fn latent_width(&self, level: usize) -> usize {
        if level == 0 {
            COLOR_CHANNELS
        } else {
            self.level1.output_width()
        }
    }

    pub fn level(&self, level: usize) -> &LgsaConfig {
        if level == 0 {
            &self.level1
        } else {
            &self.level2
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.level1.validate("level1")?;
        self.level2.validate("level2")?;
        if self.n_points < self.level1.centroids {
            return Err(ModelError::Config(alloc::format!(
                "n_points {} is below level1 centroids {}",
                self.n_points,
                self.level1.centroids
            )));
        }
        if self.level1.centroids < self.level2.centroids {
            return Err(ModelError::Config("level2 samples more centroids than level1 provides".into()));
        }
        if self.final_mlp_dims.is_empty() || self.final_mlp_dims.contains(&0) {
            return Err(ModelError::Config("final MLP widths must be non-empty and positive".into()));
        }
        if self.head_dims != HEAD_DIMS {
            return Err(ModelError::Config(alloc::format!(
                "head_dims must be {HEAD_DIMS:?}, got {:?}",
                self.head_dims
            )));
        }
        Ok(())
    }

    /// The same architecture at a different point count, with centroid
    /// counts scaled proportionally.
    pub fn with_points(&self, n_points: usize) -> Self {
        let mut c = self.clone();
        c.level1 = self.level1.scaled(n_points, self.n_points);
        c.level2 = self.level2.scaled(n_points, self.n_points);
        c.n_points = n_points;
        c
    }

    /// Hex SHA-256 of the canonical JSON form, ignoring the seed.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.seed = 0;
        let json = serde_json::to_vec(&c).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| alloc::format!("{b:02x}")).collect()
    }
}
