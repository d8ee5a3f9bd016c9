use alloc::vec::Vec;

use super::GeometryError;
use crate::math::{dist2, sqrt};
use crate::Vec3;

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Node {
    point: usize,
    axis: u8,
    left: usize,
    right: usize,
}

/// A neighbor returned by [`SpatialIndex::nearest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// Balanced KD-tree over a fixed point set.
///
/// Construction splits at the median along a cycling axis; ordering within an
/// axis breaks ties by point index, so the tree layout is a pure function of
/// the input.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    nodes: Vec<Node>,
    root: usize,
}

// (squared distance, index) ordered lexicographically
type Candidate = (f64, usize);

#[inline]
fn before(a: Candidate, b: Candidate) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

impl SpatialIndex {
    pub fn build(points: &[Vec3]) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::Empty);
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(points, &mut order, 0, &mut nodes);
        Ok(Self {
            points: points.to_vec(),
            nodes,
            root,
        })
    }

    fn build_rec(points: &[Vec3], slice: &mut [usize], depth: usize, nodes: &mut Vec<Node>) -> usize {
        if slice.is_empty() {
            return LEAF;
        }
        let axis = depth % 3;
        slice.sort_unstable_by(|&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let mid = slice.len() / 2;
        let point = slice[mid];
        let (lo, rest) = slice.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, hi, depth + 1, nodes);
        nodes.push(Node {
            point,
            axis: axis as u8,
            left,
            right,
        });
        nodes.len() - 1
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points in nondecreasing distance, ties by lower index.
    pub fn nearest(&self, query: Vec3, k: usize) -> Result<Vec<Neighbor>, GeometryError> {
        if k == 0 {
            return Err(GeometryError::Zero);
        }
        if k > self.points.len() {
            return Err(GeometryError::TooMany {
                requested: k,
                available: self.points.len(),
            });
        }
        let mut best: Vec<Candidate> = Vec::with_capacity(k + 1);
        self.knn_rec(self.root, query, k, &mut best);
        Ok(best
            .into_iter()
            .map(|(d2, index)| Neighbor {
                index,
                distance: sqrt(d2),
            })
            .collect())
    }

    /// Squared distance and index of the single nearest point.
    pub fn nearest_one(&self, query: Vec3) -> (usize, f64) {
        let mut best: Candidate = (f64::INFINITY, usize::MAX);
        self.nn_rec(self.root, query, &mut best);
        (best.1, best.0)
    }

    fn nn_rec(&self, node: usize, q: Vec3, best: &mut Candidate) {
        if node == LEAF {
            return;
        }
        let n = &self.nodes[node];
        let p = self.points[n.point];
        let cand = (dist2(q, p), n.point);
        if before(cand, *best) {
            *best = cand;
        }
        let diff = q[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.nn_rec(near, q, best);
        if diff * diff <= best.0 {
            self.nn_rec(far, q, best);
        }
    }

    fn knn_rec(&self, node: usize, q: Vec3, k: usize, best: &mut Vec<Candidate>) {
        if node == LEAF {
            return;
        }
        let n = &self.nodes[node];
        let p = self.points[n.point];
        let cand = (dist2(q, p), n.point);
        if best.len() < k || before(cand, best[best.len() - 1]) {
            let pos = best.partition_point(|&c| before(c, cand));
            best.insert(pos, cand);
            best.truncate(k);
        }
        let diff = q[n.axis as usize] - p[n.axis as usize];
        let (near, far) = if diff < 0.0 { (n.left, n.right) } else { (n.right, n.left) };
        self.knn_rec(near, q, k, best);
        if best.len() < k || diff * diff <= best[best.len() - 1].0 {
            self.knn_rec(far, q, k, best);
        }
    }

    /// Indices within `radius` of `center` (squared-distance test), nearest
    /// first with ties by index, truncated at `max_k`. An empty ball yields
    /// the single global nearest point instead.
    pub fn ball_query(
        &self,
        center: Vec3,
        radius: f64,
        max_k: usize,
    ) -> Result<Vec<usize>, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::Radius(radius));
        }
        if max_k == 0 {
            return Err(GeometryError::Zero);
        }
        let r2 = radius * radius;
        let mut found: Vec<Candidate> = Vec::new();
        self.range_rec(self.root, center, r2, &mut found);
        if found.is_empty() {
            return Ok(alloc::vec![self.nearest_one(center).0]);
        }
        found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.truncate(max_k);
        Ok(found.into_iter().map(|(_, i)| i).collect())
    }

    fn range_rec(&self, node: usize, q: Vec3, r2: f64, out: &mut Vec<Candidate>) {
        if node == LEAF {
            return;
        }
        let n = &self.nodes[node];
        let p = self.points[n.point];
        let d2 = dist2(q, p);
        if d2 <= r2 {
            out.push((d2, n.point));
        }
        let diff = q[n.axis as usize] - p[n.axis as usize];
        if diff < 0.0 || diff * diff <= r2 {
            self.range_rec(n.left, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.range_rec(n.right, q, r2, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;
    use rand::Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut r = rng::seeded(seed);
        (0..n)
            .map(|_| [r.random::<f64>(), r.random::<f64>(), r.random::<f64>()])
            .collect()
    }

    // brute force reference: sort every point by (squared distance, index)
    fn brute_knn(points: &[Vec3], q: Vec3, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2], i)
            })
            .collect();
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        all.into_iter()
            .take(k)
            .map(|(d2, index)| Neighbor {
                index,
                distance: libm::sqrt(d2),
            })
            .collect()
    }

    fn brute_ball(points: &[Vec3], q: Vec3, r: f64, max_k: usize) -> Vec<usize> {
        let mut inside: Vec<(f64, usize)> = Vec::new();
        for (i, p) in points.iter().enumerate() {
            let d = [q[0] - p[0], q[1] - p[1], q[2] - p[2]];
            let d2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if d2 <= r * r {
                inside.push((d2, i));
            }
        }
        if inside.is_empty() {
            return vec![brute_knn(points, q, 1)[0].index];
        }
        inside.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        inside.into_iter().take(max_k).map(|(_, i)| i).collect()
    }

    #[test]
    fn single_point_index() {
        let idx = SpatialIndex::build(&[[1.0, 2.0, 3.0]]).unwrap();
        let nb = idx.nearest([9.0, 9.0, 9.0], 1).unwrap();
        assert_eq!(nb[0].index, 0);
        assert_eq!(idx.ball_query([9.0, 9.0, 9.0], 0.1, 4).unwrap(), vec![0]);
    }

    #[test]
    fn empty_and_k_errors() {
        assert_eq!(SpatialIndex::build(&[]).unwrap_err(), GeometryError::Empty);
        let idx = SpatialIndex::build(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(matches!(
            idx.nearest([0.0; 3], 3),
            Err(GeometryError::TooMany { requested: 3, available: 2 })
        ));
        assert!(idx.ball_query([0.0; 3], 0.0, 1).is_err());
    }

    #[test]
    fn duplicates_and_exact_hits() {
        let idx = SpatialIndex::build(&[[0.5; 3], [0.0; 3], [0.5; 3]]).unwrap();
        let nb = idx.nearest([0.5; 3], 2).unwrap();
        assert_eq!(nb, vec![
            Neighbor { index: 0, distance: 0.0 },
            Neighbor { index: 2, distance: 0.0 },
        ]);
    }

    #[test]
    fn collinear_example() {
        let idx = SpatialIndex::build(&[[0.0; 3], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]]).unwrap();
        let nb = idx.nearest([0.9, 0.0, 0.0], 1).unwrap();
        assert_eq!(nb[0].index, 1);
        assert!((nb[0].distance - 0.1).abs() < 1e-12);
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = random_points(256, 7);
        let idx = SpatialIndex::build(&pts).unwrap();
        for q in random_points(64, 8).into_iter().chain(pts.iter().copied().take(16)) {
            for k in [1, 2, 5, 17, 256] {
                assert_eq!(idx.nearest(q, k).unwrap(), brute_knn(&pts, q, k));
            }
        }
    }

    #[test]
    fn ball_query_matches_brute_force() {
        let pts = random_points(200, 11);
        let idx = SpatialIndex::build(&pts).unwrap();
        for q in random_points(50, 12) {
            for (r, k) in [(0.2, 16), (0.05, 4), (0.5, 64), (1e-4, 3)] {
                assert_eq!(idx.ball_query(q, r, k).unwrap(), brute_ball(&pts, q, r, k));
            }
        }
    }

    #[test]
    fn ball_query_includes_center_first() {
        let pts = random_points(100, 3);
        let idx = SpatialIndex::build(&pts).unwrap();
        for (i, &p) in pts.iter().enumerate() {
            assert_eq!(idx.ball_query(p, 0.3, 8).unwrap()[0], i);
        }
    }

    #[test]
    fn lattice_ties_resolve_by_index() {
        // many equal distances on an integer grid
        let mut pts = Vec::new();
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let idx = SpatialIndex::build(&pts).unwrap();
        for q in [[1.5, 1.5, 1.5], [0.0, 0.0, 0.0], [2.0, 1.0, 0.5]] {
            for k in [1, 6, 8, 27] {
                assert_eq!(idx.nearest(q, k).unwrap(), brute_knn(&pts, q, k));
            }
            assert_eq!(idx.ball_query(q, 1.0, 64).unwrap(), brute_ball(&pts, q, 1.0, 64));
        }
    }
}
