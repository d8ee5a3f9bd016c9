//! Rendering-free fidelity evaluation for colored triangle meshes.
//!
//! This crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the toolkit:
//!
//! - [`mesh`]: colored meshes, normalization and seeded surface sampling
//! - [`geometry`]: KD-tree queries, farthest point sampling and ball query
//! - [`metrics`]: the classical full-reference baselines (CD, IoU, F-score,
//!   P2S, ND, UHD)
//! - [`autodiff`]: a small reverse-mode tape over dense `f64` matrices
//! - [`model`]: the siamese TGE encoder with latent-geometry set abstraction
//!   and the fidelity comparison head
//! - [`loss`] and [`train`]: the hybrid Smooth-L1 / PLCC / soft-rank SROCC
//!   objective and the training loop
//! - [`stats`]: PLCC/SROCC/KROCC and the object-level cross-validation harness
//! - [`annotation`]: the Swiss-tournament annotation protocol and score
//!   statistics
//!
//! File formats, the CLI and the annotation service live in the `tge` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod annotation;
pub mod autodiff;
pub mod geometry;
pub mod loss;
mod math;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod shapes;
pub mod stats;
pub mod synth;
pub mod train;

pub use mesh::{ColoredMesh, ColoredPointCloud, NormalizationTransform};

/// A point or direction in model space.
pub type Vec3 = [f64; 3];
