//! Pairwise human annotation: Swiss tournaments over the distorted versions
//! of one object, score normalization, IQR outlier removal and confidence
//! intervals.

mod tournament;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::sqrt;

pub use tournament::{Match, RecordOutcome, Round, Tournament, DEFAULT_ROUNDS};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

/// Name of the quartile rule, recorded next to every outlier decision.
pub const QUARTILE_METHOD: &str = "linear";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("a tournament needs at least 2 participants, got {0}")]
    TooFewParticipants(usize),
    #[error("rounds_total must be at least 1")]
    NoRounds,
    #[error("participant {0} listed twice")]
    DuplicateParticipant(String),
    #[error("tournament already complete")]
    TournamentComplete,
    #[error("tournament incomplete: {completed} of {total} rounds")]
    Incomplete { completed: usize, total: usize },
    #[error("winner {0} is not in the pair")]
    WinnerNotInPair(String),
    #[error("pair ({left}, {right}) is not pending in the current round")]
    NotPending { left: String, right: String },
    #[error("pair ({left}, {right}) was already decided")]
    DuplicateVote { left: String, right: String },
    #[error("need at least {needed} scores, got {got}")]
    TooFewScores { needed: usize, got: usize },
    #[error("no tournament results to aggregate")]
    NoResults,
}

/// One pairwise judgement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub session: String,
    pub subject: String,
    pub round: usize,
    pub left: String,
    pub right: String,
    pub winner: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

/// One subject's normalized score for one mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub mesh: String,
    pub subject: String,
    pub score: f64,
    pub outlier: bool,
}

/// Quantile `p` of sorted data by linear interpolation between order
/// statistics at position `p·(n−1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub kept: Vec<f64>,
    pub removed: Vec<f64>,
    /// `mask[i]` is set when input `i` was removed.
    pub mask: Vec<bool>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub method: String,
    /// Set when fewer than 4 scores were given; nothing is removed then.
    pub insufficient: bool,
}

/// Removes scores outside `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]`.
///
/// Note that a second pass over `kept` can remove more: the quartiles move
/// once the extremes are gone.
pub fn remove_outliers(scores: &[f64]) -> OutlierReport {
    let mut report = OutlierReport {
        kept: scores.to_vec(),
        removed: Vec::new(),
        mask: alloc::vec![false; scores.len()],
        q1: None,
        q3: None,
        lower: None,
        upper: None,
        method: QUARTILE_METHOD.into(),
        insufficient: scores.len() < 4,
    };
    if report.insufficient {
        return report;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile_sorted(&sorted, 0.25), quantile_sorted(&sorted, 0.75));
    let iqr = q3 - q1;
    let (lower, upper) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    report.kept.clear();
    for (i, &s) in scores.iter().enumerate() {
        if s < lower || s > upper {
            report.mask[i] = true;
            report.removed.push(s);
        } else {
            report.kept.push(s);
        }
    }
    report.q1 = Some(q1);
    report.q3 = Some(q3);
    report.lower = Some(lower);
    report.upper = Some(upper);
    report
}

/// Sample standard deviation (`n − 1` denominator), two-pass.
pub fn sample_std(scores: &[f64]) -> Result<f64, AnnotationError> {
    if scores.len() < 2 {
        return Err(AnnotationError::TooFewScores {
            needed: 2,
            got: scores.len(),
        });
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
    Ok(sqrt(ss / (n - 1.0)))
}

/// `z·σ/√n`.
pub fn ci_half_width(sigma: f64, n: usize, z: f64) -> f64 {
    z * sigma / sqrt(n as f64)
}

/// Half-width of the confidence interval of the mean of `scores`.
pub fn confidence_interval(scores: &[f64], z: f64) -> Result<f64, AnnotationError> {
    Ok(ci_half_width(sample_std(scores)?, scores.len(), z))
}

/// Normalized scores of one subject's completed tournament over one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScores {
    pub subject: String,
    pub group: String,
    /// `(mesh id, wins / rounds_total)`.
    pub scores: Vec<(String, f64)>,
}

impl SubjectScores {
    pub fn from_tournament(
        subject: impl Into<String>,
        group: impl Into<String>,
        t: &Tournament,
    ) -> Result<Self, AnnotationError> {
        Ok(Self {
            subject: subject.into(),
            group: group.into(),
            scores: t.final_scores()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshAggregate {
    pub group: String,
    pub mesh: String,
    /// Mean of the kept subject scores.
    pub score: f64,
    /// Subjects who scored the mesh, including removed outliers.
    pub subjects: usize,
    pub removed: usize,
    /// CI half-widths at z = 1.96 over all and over kept scores; `None`
    /// with fewer than 2 scores.
    pub ci_before: Option<f64>,
    pub ci_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAggregate {
    pub meshes: Vec<MeshAggregate>,
    pub records: Vec<AnnotationRecord>,
    /// Mean of the per-mesh CI half-widths where defined.
    pub mean_ci_before: Option<f64>,
    pub mean_ci_after: Option<f64>,
    /// Removed subject scores over all subject scores.
    pub removal_fraction: f64,
    pub quartile_method: String,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Pools subject scores per mesh, removes IQR outliers per mesh and
/// averages the rest. Meshes are ordered by `(group, mesh)`.
pub fn aggregate_dataset(results: &[SubjectScores]) -> Result<DatasetAggregate, AnnotationError> {
    if results.is_empty() {
        return Err(AnnotationError::NoResults);
    }
    let mut pooled: BTreeMap<(String, String), Vec<(String, f64)>> = BTreeMap::new();
    for r in results {
        for (mesh, s) in &r.scores {
            pooled
                .entry((r.group.clone(), mesh.clone()))
                .or_default()
                .push((r.subject.clone(), *s));
        }
    }
    let mut meshes = Vec::with_capacity(pooled.len());
    let mut records = Vec::new();
    let (mut total, mut removed) = (0usize, 0usize);
    for ((group, mesh), entries) in pooled {
        let scores: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let report = remove_outliers(&scores);
        total += scores.len();
        removed += report.removed.len();
        for ((subject, score), &outlier) in entries.into_iter().zip(&report.mask) {
            records.push(AnnotationRecord {
                mesh: mesh.clone(),
                subject,
                score,
                outlier,
            });
        }
        meshes.push(MeshAggregate {
            score: report.kept.iter().sum::<f64>() / report.kept.len() as f64,
            subjects: scores.len(),
            removed: report.removed.len(),
            ci_before: confidence_interval(&scores, Z_95).ok(),
            ci_after: confidence_interval(&report.kept, Z_95).ok(),
            group,
            mesh,
        });
    }
    Ok(DatasetAggregate {
        mean_ci_before: mean_defined(meshes.iter().map(|m| m.ci_before)),
        mean_ci_after: mean_defined(meshes.iter().map(|m| m.ci_after)),
        removal_fraction: removed as f64 / total as f64,
        quartile_method: QUARTILE_METHOD.into(),
        meshes,
        records,
    })
}

#[cfg(test)]
mod tests;
