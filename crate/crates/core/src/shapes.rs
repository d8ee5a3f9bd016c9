//! Procedural colored meshes used for fixtures and synthetic datasets.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::{self, norm, scale};
use crate::mesh::ColoredMesh;
use crate::Vec3;

/// Axis-aligned cube of half-width `half` centered at the origin, one color.
pub fn cube(half: f64, color: Vec3) -> ColoredMesh {
    let h = half;
    let vertices = alloc::vec![
        [-h, -h, -h],
        [h, -h, -h],
        [h, h, -h],
        [-h, h, -h],
        [-h, -h, h],
        [h, -h, h],
        [h, h, h],
        [-h, h, h],
    ];
    let faces = alloc::vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [1, 2, 6],
        [1, 6, 5],
        [0, 4, 7],
        [0, 7, 3],
    ];
    ColoredMesh::new("cube", vertices, alloc::vec![color; 8], faces).expect("valid cube")
}

/// Cube whose faces are split into an `n`×`n` grid, colored by `color`.
pub fn subdivided_cube(half: f64, n: usize, color: impl Fn(Vec3) -> Vec3) -> ColoredMesh {
    let n = n.max(1);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    // (axis, sign) for the six faces
    for axis in 0..3 {
        for &sign in &[-1.0, 1.0] {
            let base = vertices.len();
            let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
            for i in 0..=n {
                for j in 0..=n {
                    let mut p = [0.0; 3];
                    p[axis] = sign * half;
                    p[u_axis] = -half + 2.0 * half * i as f64 / n as f64;
                    p[v_axis] = -half + 2.0 * half * j as f64 / n as f64;
                    vertices.push(p);
                }
            }
            let at = |i: usize, j: usize| base + i * (n + 1) + j;
            for i in 0..n {
                for j in 0..n {
                    let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
                    if sign > 0.0 {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    let colors = vertices.iter().map(|&p| color(p)).collect();
    ColoredMesh::new("subdivided-cube", vertices, colors, faces).expect("valid cube")
}

/// Unit icosphere refined `subdivisions` times, colored by `color`.
pub fn icosphere(subdivisions: usize, color: impl Fn(Vec3) -> Vec3) -> ColoredMesh {
    let t = (1.0 + math::sqrt(5.0)) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|&p| scale(p, 1.0 / norm(p)))
    .collect();
    let mut faces: Vec<[usize; 3]> = alloc::vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = scale(crate::math::add(vertices[a], vertices[b]), 0.5);
                vertices.push(scale(m, 1.0 / norm(m)));
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let colors = vertices.iter().map(|&p| color(p)).collect();
    ColoredMesh::new("icosphere", vertices, colors, faces).expect("valid icosphere")
}

/// Torus around the z axis with tube radius `minor`.
pub fn torus(
    major: f64,
    minor: f64,
    segments: usize,
    sides: usize,
    color: impl Fn(Vec3) -> Vec3,
) -> ColoredMesh {
    let (segments, sides) = (segments.max(3), sides.max(3));
    let mut vertices = Vec::with_capacity(segments * sides);
    for i in 0..segments {
        let u = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..sides {
            let v = 2.0 * PI * j as f64 / sides as f64;
            let r = major + minor * math::cos(v);
            vertices.push([r * math::cos(u), r * math::sin(u), minor * math::sin(v)]);
        }
    }
    let at = |i: usize, j: usize| (i % segments) * sides + (j % sides);
    let mut faces = Vec::with_capacity(2 * segments * sides);
    for i in 0..segments {
        for j in 0..sides {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    let colors = vertices.iter().map(|&p| color(p)).collect();
    ColoredMesh::new("torus", vertices, colors, faces).expect("valid torus")
}

/// Closed cylinder along z with caps.
pub fn cylinder(
    radius: f64,
    height: f64,
    segments: usize,
    color: impl Fn(Vec3) -> Vec3,
) -> ColoredMesh {
    let segments = segments.max(3);
    let mut vertices = Vec::with_capacity(2 * segments + 2);
    for &z in &[-height / 2.0, height / 2.0] {
        for i in 0..segments {
            let a = 2.0 * PI * i as f64 / segments as f64;
            vertices.push([radius * math::cos(a), radius * math::sin(a), z]);
        }
    }
    let bottom = vertices.len();
    vertices.push([0.0, 0.0, -height / 2.0]);
    let top = vertices.len();
    vertices.push([0.0, 0.0, height / 2.0]);
    let mut faces = Vec::new();
    for i in 0..segments {
        let j = (i + 1) % segments;
        faces.push([i, j, segments + j]);
        faces.push([i, segments + j, segments + i]);
        faces.push([bottom, j, i]);
        faces.push([top, segments + i, segments + j]);
    }
    let colors = vertices.iter().map(|&p| color(p)).collect();
    ColoredMesh::new("cylinder", vertices, colors, faces).expect("valid cylinder")
}

/// A small family of distinct colored shapes for fixtures, indexed by `k`.
pub fn catalog(k: usize) -> ColoredMesh {
    let shifted = |p: Vec3, phase: f64| -> Vec3 {
        let w = |x: f64| 0.5 + 0.5 * math::sin(x);
        [w(3.0 * p[0] + phase), w(3.0 * p[1] + 2.0 * phase), w(3.0 * p[2] + 3.0 * phase)]
    };
    let phase = k as f64 * 0.7;
    let mesh = match k % 6 {
        0 => icosphere(2, |p| shifted(p, phase)),
        1 => torus(1.0, 0.35, 24, 12, |p| shifted(p, phase)),
        2 => subdivided_cube(0.8, 4, |p| shifted(p, phase)),
        3 => cylinder(0.6, 1.6, 24, |p| shifted(p, phase)),
        4 => icosphere(2, |p| shifted(p, phase))
            .map_vertices(|p| [p[0] * 1.4, p[1] * 0.8, p[2] * 0.6])
            .expect("finite"),
        _ => torus(0.9, 0.5, 20, 10, |p| shifted(p, phase))
            .map_vertices(|p| [p[0], p[1] * 0.7, p[2] * 1.3])
            .expect("finite"),
    };
    mesh.with_name(alloc::format!("shape{k}"))
}
