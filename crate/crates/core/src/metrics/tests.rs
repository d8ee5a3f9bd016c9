use super::*;
use crate::rng;
use crate::shapes;
use alloc::vec;
use rand::Rng;

fn cloud(points: Vec<[f64; 3]>) -> ColoredPointCloud {
    ColoredPointCloud::from_points(points)
}

fn random_cloud(n: usize, seed: u64, spread: f64) -> ColoredPointCloud {
    let mut r = rng::seeded(seed);
    let mut pts = Vec::new();
    let mut nrm = Vec::new();
    for _ in 0..n {
        pts.push([r.random::<f64>() * spread, r.random::<f64>() * spread, r.random::<f64>() * spread]);
        let v = [r.random::<f64>() - 0.5, r.random::<f64>() - 0.5, r.random::<f64>() - 0.5];
        let l = libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        nrm.push([v[0] / l, v[1] / l, v[2] / l]);
    }
    ColoredPointCloud::new(pts, vec![[0.5; 3]; n], Some(nrm), "rand", seed).unwrap()
}

fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2])
}

// brute-force nearest index with lowest-index tie break
fn brute_nn(p: [f64; 3], set: &[[f64; 3]]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &q) in set.iter().enumerate() {
        let d = d2(p, q);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[test]
fn chamfer_examples() {
    let a = random_cloud(40, 1, 1.0);
    assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    let s1 = cloud(vec![[0.0; 3]]);
    let s2 = cloud(vec![[1.0, 0.0, 0.0]]);
    assert_eq!(chamfer(&s1, &s2).unwrap(), 1.0);
    assert!(matches!(chamfer(&cloud(vec![]), &s1), Err(MetricError::EmptyCloud)));
}

#[test]
fn chamfer_matches_double_loop_and_is_symmetric() {
    for seed in 0..10 {
        let a = random_cloud(64, seed, 1.0);
        let b = random_cloud(64, seed + 100, 1.0);
        let ab: f64 = a.points().iter().map(|&p| brute_nn(p, b.points()).1).sum::<f64>() / 64.0;
        let ba: f64 = b.points().iter().map(|&p| brute_nn(p, a.points()).1).sum::<f64>() / 64.0;
        let got = chamfer(&a, &b).unwrap();
        assert!((got - 0.5 * (ab + ba)).abs() < 1e-12);
        assert_eq!(got, chamfer(&b, &a).unwrap());
    }
}

#[test]
fn fscore_examples_and_oracle() {
    let a = random_cloud(32, 3, 1.0);
    assert_eq!(fscore(&a, &a, 0.01).unwrap(), 1.0);
    let far = cloud(a.points().iter().map(|p| [p[0] + 100.0, p[1], p[2]]).collect());
    assert_eq!(fscore(&a, &far, 0.1).unwrap(), 0.0);
    assert!(fscore(&a, &a, 0.0).is_err());
    for seed in 0..10 {
        let a = random_cloud(32, seed, 1.0);
        let b = random_cloud(32, seed + 50, 1.0);
        let tau = 0.1;
        let p = a.points().iter().filter(|&&p| brute_nn(p, b.points()).1 <= tau * tau).count() as f64 / 32.0;
        let r = b.points().iter().filter(|&&p| brute_nn(p, a.points()).1 <= tau * tau).count() as f64 / 32.0;
        let expected = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        assert_eq!(fscore(&a, &b, tau).unwrap(), expected);
    }
}

#[test]
fn uhd_examples() {
    let a = cloud(vec![[0.0; 3], [5.0, 0.0, 0.0]]);
    let b = cloud(vec![[0.0; 3]]);
    assert_eq!(uhd(&a, &b).unwrap(), 5.0);
    let sup = random_cloud(30, 9, 1.0);
    let sub = cloud(sup.points()[..10].to_vec());
    assert_eq!(uhd(&sub, &sup).unwrap(), 0.0);
    for seed in 0..10 {
        let a = random_cloud(64, seed, 1.0);
        let b = random_cloud(64, seed + 7, 1.0);
        let c = random_cloud(64, seed + 13, 1.0);
        let brute = a.points().iter().map(|&p| libm::sqrt(brute_nn(p, b.points()).1)).fold(0.0, f64::max);
        assert_eq!(uhd(&a, &b).unwrap(), brute);
        let ac = uhd(&a, &c).unwrap();
        assert!(ac <= uhd(&a, &b).unwrap() + uhd(&b, &c).unwrap() + 1e-9);
    }
}

#[test]
fn normal_difference_examples() {
    let a = random_cloud(32, 4, 1.0);
    assert!(normal_difference(&a, &a).unwrap() < 1e-12);
    let pts = a.points().to_vec();
    let up = ColoredPointCloud::new(pts.clone(), vec![[0.5; 3]; 32], Some(vec![[0.0, 0.0, 1.0]; 32]), "", 0).unwrap();
    let side = ColoredPointCloud::new(pts, vec![[0.5; 3]; 32], Some(vec![[1.0, 0.0, 0.0]; 32]), "", 0).unwrap();
    assert_eq!(normal_difference(&up, &side).unwrap(), 1.0);
    assert_eq!(
        normal_difference(&a, &cloud(vec![[0.0; 3]])).unwrap_err(),
        MetricError::MissingNormals
    );
    for seed in 0..10 {
        let a = random_cloud(32, seed, 1.0);
        let b = random_cloud(32, seed + 31, 1.0);
        let one = |x: &ColoredPointCloud, y: &ColoredPointCloud| {
            let (nx, ny) = (x.normals().unwrap(), y.normals().unwrap());
            let mut s = 0.0;
            for (i, &p) in x.points().iter().enumerate() {
                let j = brute_nn(p, y.points()).0;
                let c = nx[i][0] * ny[j][0] + nx[i][1] * ny[j][1] + nx[i][2] * ny[j][2];
                s += 1.0 - c.abs().min(1.0);
            }
            s / x.len() as f64
        };
        let expected = 0.5 * (one(&a, &b) + one(&b, &a));
        assert!((normal_difference(&a, &b).unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn p2s_examples_and_oracle() {
    let big = ColoredMesh::new(
        "big",
        vec![[-10.0, -10.0, 0.0], [10.0, -10.0, 0.0], [0.0, 10.0, 0.0]],
        vec![[0.5; 3]; 3],
        vec![[0, 1, 2]],
    )
    .unwrap();
    assert_eq!(p2s(&cloud(vec![[0.3, 0.2, 1.7]]), &big).unwrap(), 1.7);
    let on = sample_points(&big, 50, 1, false).unwrap();
    assert!(p2s(&on, &big).unwrap() < 1e-12);

    let cube = shapes::cube(0.5, [0.1, 0.2, 0.3]);
    let octa = ColoredMesh::new(
        "octa",
        vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]],
        vec![[0.5; 3]; 6],
        vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]],
    )
    .unwrap();
    for seed in 0..10 {
        let pts = random_cloud(16, seed, 2.0);
        let shifted = cloud(pts.points().iter().map(|p| [p[0] - 1.0, p[1] - 1.0, p[2] - 1.0]).collect());
        for mesh in [&cube, &octa] {
            let brute: f64 = shifted
                .points()
                .iter()
                .map(|&p| {
                    (0..mesh.faces().len())
                        .map(|f| libm::sqrt(point_triangle_dist2(p, mesh.triangle(f))))
                        .fold(f64::INFINITY, f64::min)
                })
                .sum::<f64>()
                / 16.0;
            assert!((p2s(&shifted, mesh).unwrap() - brute).abs() < 1e-12);
        }
    }
    let flat = ColoredMesh::new("f", vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], vec![[0.0; 3]; 3], vec![[0, 1, 2]]).unwrap();
    assert_eq!(p2s(&cloud(vec![[0.0; 3]]), &flat).unwrap_err(), MetricError::DegenerateReference);
}

// per-voxel gather over a sample set, independent of the scatter used by
// `occupied`
fn brute_voxelize(samples: &[[f64; 3]], grid: &VoxelGrid) -> Vec<bool> {
    let r = grid.resolution;
    let mut occ = vec![false; r * r * r];
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                let cell = [i, j, k];
                occ[(i * r + j) * r + k] = samples.iter().any(|&p| {
                    (0..3).all(|a| {
                        let u = grid.coordinate(p, a);
                        let lo = cell[a] as f64;
                        (u >= lo || cell[a] == 0) && (u < lo + 1.0 || cell[a] == r - 1)
                    })
                });
            }
        }
    }
    occ
}

#[test]
fn iou_examples() {
    let c = shapes::cube(0.5, [0.3; 3]);
    assert_eq!(iou_voxel(&c, &c, 16).unwrap(), 1.0);
    let far = c.map_vertices(|p| [p[0] + 5.0, p[1], p[2]]).unwrap();
    assert_eq!(iou_voxel(&c, &far, 16).unwrap(), 0.0);
    assert_eq!(iou_voxel(&c, &c, 4).unwrap_err(), MetricError::Resolution(4));
}

#[test]
fn iou_matches_gather_voxelizer() {
    let a = shapes::cube(0.5, [0.3; 3]);
    for shift in [0.0, 0.1, 0.25, 0.3125, 0.6] {
        let b = a.map_vertices(|p| [p[0] + shift, p[1] + shift * 0.5, p[2]]).unwrap();
        let grid = VoxelGrid::enclosing(&a, &b, 16);
        let oa = brute_voxelize(&surface_samples(&a, &grid), &grid);
        let ob = brute_voxelize(&surface_samples(&b, &grid), &grid);
        let inter = oa.iter().zip(&ob).filter(|(x, y)| **x && **y).count();
        let union = oa.iter().zip(&ob).filter(|(x, y)| **x || **y).count();
        assert_eq!(iou_voxel(&a, &b, 16).unwrap(), inter as f64 / union as f64);
    }
}

#[test]
fn run_all_identity() {
    let m = shapes::catalog(1);
    let cfg = MetricConfig {
        points: 512,
        iou_resolution: 32,
        ..MetricConfig::default()
    };
    let res = run_all(&m, &m, &cfg).unwrap();
    let get = |k: MetricKind| res.iter().find(|r| r.metric == k).unwrap().value;
    assert_eq!(get(MetricKind::Cd), 0.0);
    assert_eq!(get(MetricKind::Uhd), 0.0);
    assert!(get(MetricKind::P2s) < 1e-12);
    assert!(get(MetricKind::Nd) < 1e-12);
    assert_eq!(get(MetricKind::Iou), 1.0);
    assert_eq!(get(MetricKind::Fscore), 1.0);
}

#[test]
fn run_all_far_apart() {
    let a = shapes::catalog(0);
    let b = a.map_vertices(|p| [p[0] + 50.0, p[1], p[2]]).unwrap();
    let cfg = MetricConfig {
        points: 256,
        iou_resolution: 16,
        ..MetricConfig::default()
    };
    let res = run_all(&b, &a, &cfg).unwrap();
    for r in res {
        match r.metric {
            MetricKind::Iou | MetricKind::Fscore => assert_eq!(r.value, 0.0),
            _ => {}
        }
    }
}

#[test]
fn run_all_composes_members() {
    let reference = shapes::catalog(2);
    let input = reference.map_vertices(|p| [p[0] + 0.05, p[1] * 1.1, p[2]]).unwrap();
    let cfg = MetricConfig {
        points: 300,
        iou_resolution: 24,
        seed: 9,
        ..MetricConfig::default()
    };
    let res = run_all(&input, &reference, &cfg).unwrap();
    let (nr, t) = normalize(&reference).unwrap();
    let ni = input.transformed(&t);
    let ci = sample_points(&ni, 300, 9, true).unwrap();
    let cr = sample_points(&nr, 300, 9, true).unwrap();
    let tau = DEFAULT_FSCORE_FRACTION * NORMALIZED_DIAGONAL;
    let expect = [
        chamfer(&ci, &cr).unwrap(),
        iou_voxel(&ni, &nr, 24).unwrap(),
        fscore(&ci, &cr, tau).unwrap(),
        p2s(&ci, &nr).unwrap(),
        normal_difference(&ci, &cr).unwrap(),
        uhd(&ci, &cr).unwrap(),
    ];
    for (r, e) in res.iter().zip(expect) {
        assert_eq!(r.value, e, "{}", r.metric);
    }
}

#[test]
fn rigid_motion_invariance() {
    let reference = shapes::catalog(4);
    let input = reference.map_vertices(|p| [p[0] * 1.05, p[1] + 0.02, p[2]]).unwrap();
    let (s, c) = (libm::sin(0.7), libm::cos(0.7));
    let rigid = |p: [f64; 3]| [c * p[0] - s * p[1] + 3.0, s * p[0] + c * p[1] - 1.0, p[2] + 2.0];
    let cfg = MetricConfig {
        points: 400,
        iou_resolution: 16,
        metrics: vec![MetricKind::Cd, MetricKind::Fscore, MetricKind::P2s, MetricKind::Nd, MetricKind::Uhd],
        ..MetricConfig::default()
    };
    let before = run_all(&input, &reference, &cfg).unwrap();
    let after = run_all(
        &input.map_vertices(rigid).unwrap(),
        &reference.map_vertices(rigid).unwrap(),
        &cfg,
    )
    .unwrap();
    for (x, y) in before.iter().zip(&after) {
        let rel = (x.value - y.value).abs() / x.value.abs().max(1e-12);
        assert!(rel < 1e-6 || (x.value - y.value).abs() < 1e-12, "{} {} {}", x.metric, x.value, y.value);
    }
}

#[test]
fn metric_names_parse() {
    for k in MetricKind::ALL {
        assert_eq!(k.name().parse::<MetricKind>().unwrap(), k);
    }
    assert!("emd".parse::<MetricKind>().is_err());
}
