//! Surface-shell voxel occupancy.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::math::{ceil, floor, norm, sub};
use crate::mesh::ColoredMesh;
use crate::Vec3;

/// A cubic grid of `resolution`³ voxels with corner `origin` and edge `side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub side: f64,
    pub resolution: usize,
}

impl VoxelGrid {
    /// Smallest cube (anchored at the joint minimum corner) enclosing both meshes.
    pub fn enclosing(a: &ColoredMesh, b: &ColoredMesh, resolution: usize) -> Self {
        let (alo, ahi) = a.bounds();
        let (blo, bhi) = b.bounds();
        let mut origin = [0.0; 3];
        let mut side: f64 = 0.0;
        for k in 0..3 {
            origin[k] = alo[k].min(blo[k]);
            side = side.max(ahi[k].max(bhi[k]) - origin[k]);
        }
        Self {
            origin,
            side,
            resolution,
        }
    }

    /// Continuous grid coordinate of `p` along axis `k` (voxel `i` spans `[i, i+1)`).
    pub fn coordinate(&self, p: Vec3, k: usize) -> f64 {
        (p[k] - self.origin[k]) / self.side * self.resolution as f64
    }

    /// Voxel containing `p`; points on the far boundary fall in the last voxel.
    pub fn voxel_of(&self, p: Vec3) -> [usize; 3] {
        let last = (self.resolution - 1) as f64;
        let mut out = [0; 3];
        for k in 0..3 {
            out[k] = floor(self.coordinate(p, k)).clamp(0.0, last) as usize;
        }
        out
    }

    pub fn voxel_size(&self) -> f64 {
        self.side / self.resolution as f64
    }
}

/// Number of lattice steps per edge used to sample a triangle so that sample
/// spacing stays below half a voxel; the per-mesh sample count therefore grows
/// with the square of the resolution.
pub fn lattice_steps(tri: [Vec3; 3], voxel: f64) -> usize {
    let longest = norm(sub(tri[1], tri[0]))
        .max(norm(sub(tri[2], tri[1])))
        .max(norm(sub(tri[0], tri[2])));
    (ceil(2.0 * longest / voxel) as usize).max(1)
}

/// Deterministic barycentric lattice samples on one triangle.
pub fn lattice_samples(tri: [Vec3; 3], steps: usize, out: &mut Vec<Vec3>) {
    let s = steps as f64;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let u = i as f64 / s;
            let v = j as f64 / s;
            let w = 1.0 - u - v;
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = w * tri[0][k] + u * tri[1][k] + v * tri[2][k];
            }
            out.push(p);
        }
    }
}

/// Dense surface samples of every triangle of `mesh` for `grid`.
pub fn surface_samples(mesh: &ColoredMesh, grid: &VoxelGrid) -> Vec<Vec3> {
    let mut out = Vec::new();
    for f in 0..mesh.faces().len() {
        let tri = mesh.triangle(f);
        lattice_samples(tri, lattice_steps(tri, grid.voxel_size()), &mut out);
    }
    out
}

/// Voxels (as linear indices) hit by at least one surface sample.
pub fn occupied(mesh: &ColoredMesh, grid: &VoxelGrid) -> BTreeSet<usize> {
    let r = grid.resolution;
    surface_samples(mesh, grid)
        .into_iter()
        .map(|p| {
            let [i, j, k] = grid.voxel_of(p);
            (i * r + j) * r + k
        })
        .collect()
}
