//! Colored triangle meshes and their sampled point-cloud form.
//!
//! Appearance is carried by per-vertex RGB colors in `[0, 1]`; textured meshes
//! must be baked to vertex colors before they enter the toolkit.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::math::{self, add, cross, norm, scale, sub};
use crate::{rng, Vec3};

/// Normals are accepted as unit length within this tolerance.
pub const UNIT_NORMAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh has no vertices")]
    NoVertices,
    #[error("mesh has no faces")]
    NoFaces,
    #[error("{colors} colors for {vertices} vertices")]
    ColorCount { vertices: usize, colors: usize },
    #[error("vertex {index} has color channel {value} outside [0, 1]")]
    ColorRange { index: usize, value: f64 },
    #[error("vertex {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("face {face} references vertex {index} but the mesh has {vertices} vertices")]
    FaceIndex {
        face: usize,
        index: usize,
        vertices: usize,
    },
    #[error("all vertices coincide; the mesh has zero extent")]
    ZeroExtent,
    #[error("every face is degenerate (total surface area is zero)")]
    DegenerateSurface,
    #[error("at least one sample is required")]
    NoSamples,
    #[error("point cloud has {points} points but {other} {what}")]
    CloudLength {
        points: usize,
        other: usize,
        what: &'static str,
    },
    #[error("normal {index} has length {length}, expected unit length")]
    NormalLength { index: usize, length: f64 },
}

/// A triangle mesh with one RGB color per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredMesh {
    vertices: Vec<Vec3>,
    colors: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    name: String,
}

impl ColoredMesh {
    /// Builds a mesh, checking every structural invariant.
    ///
    /// Faces may be empty here; operations that need a surface check for it.
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        colors: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if vertices.is_empty() {
            return Err(MeshError::NoVertices);
        }
        if colors.len() != vertices.len() {
            return Err(MeshError::ColorCount {
                vertices: vertices.len(),
                colors: colors.len(),
            });
        }
        for (index, v) in vertices.iter().enumerate() {
            if v.iter().any(|c| !c.is_finite()) {
                return Err(MeshError::NonFinite { index });
            }
        }
        for (index, c) in colors.iter().enumerate() {
            for &value in c {
                if !(0.0..=1.0).contains(&value) {
                    return Err(MeshError::ColorRange { index, value });
                }
            }
        }
        for (face, f) in faces.iter().enumerate() {
            for &index in f {
                if index >= vertices.len() {
                    return Err(MeshError::FaceIndex {
                        face,
                        index,
                        vertices: vertices.len(),
                    });
                }
            }
        }
        Ok(Self {
            vertices,
            colors,
            faces,
            name: name.into(),
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn colors(&self) -> &[Vec3] {
        &self.colors
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Corner positions of face `f`.
    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice-area-weighted (unnormalized) face normal.
    fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        cross(sub(b, a), sub(c, a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * norm(self.face_cross(f))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        bounds_of(&self.vertices)
    }

    /// Length of the bounding-box diagonal.
    pub fn diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        norm(sub(hi, lo))
    }

    /// Area-weighted vertex normals. Vertices touched only by degenerate faces
    /// (or by none) get `[0, 0, 1]`.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut acc = alloc::vec![[0.0; 3]; self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            let n = self.face_cross(f);
            for &v in face {
                acc[v] = add(acc[v], n);
            }
        }
        acc.into_iter()
            .map(|n| {
                let len = norm(n);
                if len > 0.0 {
                    scale(n, 1.0 / len)
                } else {
                    [0.0, 0.0, 1.0]
                }
            })
            .collect()
    }

    /// Applies `transform` to every vertex; colors and faces are unchanged.
    pub fn transformed(&self, transform: &NormalizationTransform) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| transform.apply(v)).collect(),
            colors: self.colors.clone(),
            faces: self.faces.clone(),
            name: self.name.clone(),
        }
    }

    /// Applies an arbitrary point map to the vertices.
    pub fn map_vertices(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Result<Self, MeshError> {
        Self::new(
            self.name.clone(),
            self.vertices.iter().map(|&v| f(v)).collect(),
            self.colors.clone(),
            self.faces.clone(),
        )
    }
}

pub(crate) fn bounds_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// Maps original coordinates to normalized ones: `x' = (x + translation) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationTransform {
    pub translation: Vec3,
    pub scale: f64,
}

impl NormalizationTransform {
    pub const IDENTITY: Self = Self {
        translation: [0.0; 3],
        scale: 1.0,
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        scale(add(p, self.translation), self.scale)
    }

    /// Transform that centers `mesh` at its vertex centroid and scales its
    /// farthest vertex to distance 1.
    pub fn fit(mesh: &ColoredMesh) -> Result<Self, MeshError> {
        let n = mesh.vertices.len() as f64;
        let mut centroid = [0.0; 3];
        for v in &mesh.vertices {
            centroid = add(centroid, *v);
        }
        let centroid = scale(centroid, 1.0 / n);
        let radius = mesh
            .vertices
            .iter()
            .map(|&v| norm(sub(v, centroid)))
            .fold(0.0, f64::max);
        if !(radius > 0.0) {
            return Err(MeshError::ZeroExtent);
        }
        Ok(Self {
            translation: scale(centroid, -1.0),
            scale: 1.0 / radius,
        })
    }
}

/// Centers the mesh at the origin and scales it into the unit ball.
pub fn normalize(mesh: &ColoredMesh) -> Result<(ColoredMesh, NormalizationTransform), MeshError> {
    let t = NormalizationTransform::fit(mesh)?;
    Ok((mesh.transformed(&t), t))
}

/// Points sampled from a mesh surface, with interpolated colors.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredPointCloud {
    points: Vec<Vec3>,
    colors: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
    source: String,
    seed: u64,
}

impl ColoredPointCloud {
    pub fn new(
        points: Vec<Vec3>,
        colors: Vec<Vec3>,
        normals: Option<Vec<Vec3>>,
        source: impl Into<String>,
        seed: u64,
    ) -> Result<Self, MeshError> {
        if colors.len() != points.len() {
            return Err(MeshError::CloudLength {
                points: points.len(),
                other: colors.len(),
                what: "colors",
            });
        }
        if let Some(normals) = &normals {
            if normals.len() != points.len() {
                return Err(MeshError::CloudLength {
                    points: points.len(),
                    other: normals.len(),
                    what: "normals",
                });
            }
            for (index, n) in normals.iter().enumerate() {
                let length = norm(*n);
                if (length - 1.0).abs() > UNIT_NORMAL_TOLERANCE {
                    return Err(MeshError::NormalLength { index, length });
                }
            }
        }
        Ok(Self {
            points,
            colors,
            normals,
            source: source.into(),
            seed,
        })
    }

    /// A cloud with gray colors and no normals, for pure-geometry callers.
    pub fn from_points(points: Vec<Vec3>) -> Self {
        let colors = alloc::vec![[0.5; 3]; points.len()];
        Self {
            points,
            colors,
            normals: None,
            source: String::new(),
            seed: 0,
        }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn colors(&self) -> &[Vec3] {
        &self.colors
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Draws `n` points from the surface of `mesh`.
///
/// Faces are picked with probability proportional to area, then a point is
/// placed uniformly inside the triangle with the square-root barycentric
/// construction. Colors are interpolated with the same barycentric weights;
/// normals, when requested, are the unit face normals. The generator is
/// ChaCha8 seeded from `seed`, so output is bit-identical for equal inputs.
pub fn sample_points(
    mesh: &ColoredMesh,
    n: usize,
    seed: u64,
    with_normals: bool,
) -> Result<ColoredPointCloud, MeshError> {
    if n == 0 {
        return Err(MeshError::NoSamples);
    }
    if mesh.faces.is_empty() {
        return Err(MeshError::NoFaces);
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(MeshError::DegenerateSurface);
    }

    let mut rng = rng::seeded(rng::derive_seed(seed, 0x5A4D_504C));
    let mut points = Vec::with_capacity(n);
    let mut colors = Vec::with_capacity(n);
    let mut normals = with_normals.then(|| Vec::with_capacity(n));
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        // first face whose cumulative area exceeds the target; zero-area faces
        // share their predecessor's cumulative value and are never chosen
        let f = cumulative
            .partition_point(|&c| c <= target)
            .min(mesh.faces.len() - 1);
        let r1 = math::sqrt(rng.random::<f64>());
        let r2 = rng.random::<f64>();
        let w = [1.0 - r1, r1 * (1.0 - r2), r1 * r2];
        let [a, b, c] = mesh.faces[f];
        points.push(blend(&mesh.vertices, [a, b, c], w));
        colors.push(clamp_unit(blend(&mesh.colors, [a, b, c], w)));
        if let Some(normals) = normals.as_mut() {
            let nrm = mesh.face_cross(f);
            normals.push(scale(nrm, 1.0 / norm(nrm)));
        }
    }
    Ok(ColoredPointCloud {
        points,
        colors,
        normals,
        source: String::from(mesh.name()),
        seed,
    })
}

fn blend(values: &[Vec3], idx: [usize; 3], w: [f64; 3]) -> Vec3 {
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = w[0] * values[idx[0]][k] + w[1] * values[idx[1]][k] + w[2] * values[idx[2]][k];
    }
    out
}

fn clamp_unit(c: Vec3) -> Vec3 {
    [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0), c[2].clamp(0.0, 1.0)]
}
