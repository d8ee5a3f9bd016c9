use alloc::vec::Vec;

use rand::Rng;

use super::GeometryError;
use crate::math::{dist2, sqrt};
use crate::{rng, Vec3};

/// Greedy farthest point sampling.
///
/// The first index is drawn uniformly from a ChaCha8 stream seeded by `seed`;
/// every later pick maximizes the distance to the already chosen set, ties
/// going to the lower index.
pub fn farthest_point_sample(
    points: &[Vec3],
    m: usize,
    seed: u64,
) -> Result<Vec<usize>, GeometryError> {
    farthest_point_sample_traced(points, m, seed).map(|(idx, _)| idx)
}

/// Like [`farthest_point_sample`], also returning the max-min distance at
/// which each pick after the first was selected.
pub fn farthest_point_sample_traced(
    points: &[Vec3],
    m: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<f64>), GeometryError> {
    let n = points.len();
    if n == 0 {
        return Err(GeometryError::Empty);
    }
    if m == 0 {
        return Err(GeometryError::Zero);
    }
    if m > n {
        return Err(GeometryError::TooMany {
            requested: m,
            available: n,
        });
    }
    let start = rng::seeded(rng::derive_seed(seed, 0x4650_5300)).random_range(0..n);
    Ok(fps_from(points, m, start))
}

pub(crate) fn fps_from(points: &[Vec3], m: usize, start: usize) -> (Vec<usize>, Vec<f64>) {
    let mut chosen = Vec::with_capacity(m);
    let mut picked_at = Vec::with_capacity(m.saturating_sub(1));
    let mut min_d2: Vec<f64> = points.iter().map(|&p| dist2(p, points[start])).collect();
    chosen.push(start);
    while chosen.len() < m {
        let mut best = 0;
        let mut best_d2 = f64::NEG_INFINITY;
        for (i, &d2) in min_d2.iter().enumerate() {
            if d2 > best_d2 {
                best = i;
                best_d2 = d2;
            }
        }
        chosen.push(best);
        picked_at.push(sqrt(best_d2));
        let p = points[best];
        for (d2, q) in min_d2.iter_mut().zip(points) {
            let d = dist2(*q, p);
            if d < *d2 {
                *d2 = d;
            }
        }
    }
    (chosen, picked_at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn line_example_from_origin() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0]];
        let (idx, _) = fps_from(&pts, 2, 0);
        assert_eq!(idx, vec![0, 2]);
    }

    #[test]
    fn full_sample_is_a_permutation() {
        let pts: Vec<Vec3> = (0..37).map(|i| [i as f64 * 0.37 % 1.0, (i * i) as f64 % 7.0, 0.0]).collect();
        let mut idx = farthest_point_sample(&pts, 37, 5).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn single_pick_is_the_seeded_start() {
        let pts: Vec<Vec3> = (0..50).map(|i| [i as f64, 0.0, 0.0]).collect();
        let a = farthest_point_sample(&pts, 1, 99).unwrap();
        let b = farthest_point_sample(&pts, 5, 99).unwrap();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0], b[0]);
    }

    #[test]
    fn errors() {
        assert_eq!(farthest_point_sample(&[], 1, 0).unwrap_err(), GeometryError::Empty);
        assert!(matches!(
            farthest_point_sample(&[[0.0; 3]], 2, 0),
            Err(GeometryError::TooMany { .. })
        ));
    }

    #[test]
    fn duplicate_points_tie_to_lower_index() {
        let pts = [[0.0; 3], [5.0, 0.0, 0.0], [5.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        assert_eq!(fps_from(&pts, 3, 0).0, vec![0, 1, 3]);
    }

    fn cloud() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..120)
    }

    proptest! {
        #[test]
        fn greedy_distances_are_nonincreasing(pts in cloud(), seed in any::<u64>()) {
            let m = pts.len();
            let (_, d) = farthest_point_sample_traced(&pts, m, seed).unwrap();
            for w in d.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }

        #[test]
        fn deterministic_per_seed(pts in cloud(), seed in any::<u64>()) {
            let m = 1 + pts.len() / 2;
            prop_assert_eq!(
                farthest_point_sample(&pts, m, seed).unwrap(),
                farthest_point_sample(&pts, m, seed).unwrap()
            );
        }

        #[test]
        fn each_pick_maximizes_min_distance(pts in cloud(), seed in any::<u64>()) {
            let m = 1 + pts.len() / 3;
            let idx = farthest_point_sample(&pts, m, seed).unwrap();
            for step in 1..idx.len() {
                let chosen = &idx[..step];
                let score = |i: usize| chosen.iter().map(|&c| dist2(pts[i], pts[c])).fold(f64::INFINITY, f64::min);
                let best = (0..pts.len()).map(score).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(score(idx[step]), best);
            }
        }
    }
}
