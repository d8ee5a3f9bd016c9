//! Exact point-to-triangle distance and an AABB hierarchy over triangles.

use alloc::vec::Vec;

use crate::math::{add, dist2, dot, scale, sub};
use crate::Vec3;

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, [a, b, c]: [Vec3; 3]) -> Vec3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}

/// Squared distance from `p` to triangle `tri`.
pub fn point_triangle_dist2(p: Vec3, tri: [Vec3; 3]) -> f64 {
    dist2(p, closest_point_on_triangle(p, tri))
}

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Vec3,
    hi: Vec3,
    // leaf: triangles[start..start+count]; inner: children at left/right
    start: usize,
    count: usize,
    left: usize,
    right: usize,
}

/// Bounding-volume hierarchy answering exact nearest-triangle queries.
#[derive(Debug, Clone)]
pub struct TriangleBvh {
    triangles: Vec<[Vec3; 3]>,
    nodes: Vec<BvhNode>,
}

const LEAF_SIZE: usize = 4;

impl TriangleBvh {
    pub fn new(triangles: Vec<[Vec3; 3]>) -> Self {
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            Self::build(&triangles, &mut order, 0, &mut nodes);
        }
        let triangles = order.iter().map(|&i| triangles[i]).collect();
        Self { triangles, nodes }
    }

    fn build(tris: &[[Vec3; 3]], order: &mut [usize], start: usize, nodes: &mut Vec<BvhNode>) -> usize {
        let (lo, hi) = tri_bounds(tris, order);
        let me = nodes.len();
        nodes.push(BvhNode {
            lo,
            hi,
            start,
            count: order.len(),
            left: 0,
            right: 0,
        });
        if order.len() <= LEAF_SIZE {
            return me;
        }
        let ext = sub(hi, lo);
        let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
            0
        } else if ext[1] >= ext[2] {
            1
        } else {
            2
        };
        let centroid = |i: usize| tris[i][0][axis] + tris[i][1][axis] + tris[i][2][axis];
        order.sort_unstable_by(|&a, &b| centroid(a).total_cmp(&centroid(b)).then(a.cmp(&b)));
        let mid = order.len() / 2;
        let (l, r) = order.split_at_mut(mid);
        let left = Self::build(tris, l, start, nodes);
        let right = Self::build(tris, r, start + mid, nodes);
        nodes[me].count = 0;
        nodes[me].left = left;
        nodes[me].right = right;
        me
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Exact squared distance from `p` to the closest triangle.
    pub fn dist2(&self, p: Vec3) -> f64 {
        let mut best = f64::INFINITY;
        if !self.nodes.is_empty() {
            self.query(0, p, &mut best);
        }
        best
    }

    fn query(&self, node: usize, p: Vec3, best: &mut f64) {
        let n = &self.nodes[node];
        if box_dist2(p, n.lo, n.hi) > *best {
            return;
        }
        if n.count > 0 {
            for tri in &self.triangles[n.start..n.start + n.count] {
                let d = point_triangle_dist2(p, *tri);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let (l, r) = (n.left, n.right);
        let dl = box_dist2(p, self.nodes[l].lo, self.nodes[l].hi);
        let dr = box_dist2(p, self.nodes[r].lo, self.nodes[r].hi);
        if dl <= dr {
            self.query(l, p, best);
            self.query(r, p, best);
        } else {
            self.query(r, p, best);
            self.query(l, p, best);
        }
    }
}

fn tri_bounds(tris: &[[Vec3; 3]], order: &[usize]) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order {
        for v in &tris[i] {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
    }
    (lo, hi)
}

fn box_dist2(p: Vec3, lo: Vec3, hi: Vec3) -> f64 {
    let mut d = 0.0;
    for k in 0..3 {
        let e = if p[k] < lo[k] {
            lo[k] - p[k]
        } else if p[k] > hi[k] {
            p[k] - hi[k]
        } else {
            0.0
        };
        d += e * e;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    const TRI: [Vec3; 3] = [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]];

    #[test]
    fn region_cases() {
        // interior, above the plane
        assert_eq!(closest_point_on_triangle([0.5, 0.5, 3.0], TRI), [0.5, 0.5, 0.0]);
        // vertex regions
        assert_eq!(closest_point_on_triangle([-1.0, -1.0, 0.0], TRI), [0.0, 0.0, 0.0]);
        assert_eq!(closest_point_on_triangle([3.0, -0.5, 0.0], TRI), [2.0, 0.0, 0.0]);
        assert_eq!(closest_point_on_triangle([-0.5, 3.0, 1.0], TRI), [0.0, 2.0, 0.0]);
        // edge regions
        assert_eq!(closest_point_on_triangle([1.0, -1.0, 0.0], TRI), [1.0, 0.0, 0.0]);
        assert_eq!(closest_point_on_triangle([-1.0, 1.0, 0.0], TRI), [0.0, 1.0, 0.0]);
        assert_eq!(closest_point_on_triangle([2.0, 2.0, 0.0], TRI), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn matches_dense_sampling_upper_bound() {
        // the exact distance never exceeds the distance to any sampled surface
        // point, and a fine lattice gets within its spacing
        let mut r = rng::seeded(1);
        let s = 200;
        for _ in 0..20 {
            let p = [r.random::<f64>() * 4.0 - 1.0, r.random::<f64>() * 4.0 - 1.0, r.random::<f64>() * 2.0 - 1.0];
            let exact = libm::sqrt(point_triangle_dist2(p, TRI));
            let mut best = f64::INFINITY;
            for i in 0..=s {
                for j in 0..=(s - i) {
                    let q = [2.0 * i as f64 / s as f64, 2.0 * j as f64 / s as f64, 0.0];
                    best = best.min(libm::sqrt(dist2(p, q)));
                }
            }
            assert!(exact <= best + 1e-12);
            assert!(best - exact < 2.0 * 2.0 / s as f64);
        }
    }

    #[test]
    fn bvh_matches_all_pairs() {
        let mut r = rng::seeded(2);
        let mut rp = || [r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0, r.random::<f64>() * 2.0 - 1.0];
        let tris: Vec<[Vec3; 3]> = (0..60).map(|_| [rp(), rp(), rp()]).collect();
        let bvh = TriangleBvh::new(tris.clone());
        for _ in 0..200 {
            let p = rp();
            let brute = tris.iter().map(|&t| point_triangle_dist2(p, t)).fold(f64::INFINITY, f64::min);
            assert_eq!(bvh.dist2(p), brute);
        }
    }
}
