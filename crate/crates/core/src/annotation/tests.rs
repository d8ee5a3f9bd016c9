use super::*;
use crate::rng::seeded;
use alloc::format;
use alloc::vec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("m{i:02}")).collect()
}

fn vote(round: usize, m: &Match, winner: &str) -> Vote {
    Vote {
        session: "s".into(),
        subject: "u".into(),
        round,
        left: m.left.clone(),
        right: m.right.clone(),
        winner: winner.into(),
        timestamp_ms: 0,
    }
}

/// Plays a tournament to completion with `judge(left, right) -> left wins`.
fn play(t: &mut Tournament, mut judge: impl FnMut(&str, &str) -> bool) {
    while let Ok(pending) = t.next_pairings() {
        let round = t.current_round().unwrap().number;
        for m in pending {
            let w = if judge(&m.left, &m.right) { m.left.clone() } else { m.right.clone() };
            t.record_result(&vote(round, &m, &w)).unwrap();
        }
    }
}

/// Participants with a hidden quality permutation; the better one always
/// wins.
fn transitive(n: usize, seed: u64) -> (Tournament, BTreeMap<String, usize>) {
    let mut r = seeded(seed);
    let mut quality: Vec<usize> = (0..n).collect();
    quality.shuffle(&mut r);
    let q: BTreeMap<String, usize> = ids(n).into_iter().zip(quality).collect();
    let mut t = Tournament::new(ids(n), DEFAULT_ROUNDS).unwrap();
    play(&mut t, |a, b| q[a] > q[b]);
    (t, q)
}

/// Whether the participants in `mask` can be perfectly paired without a
/// rematch (subset DP).
fn rematch_free_exists(players: &[usize], met: &BTreeSet<(usize, usize)>) -> bool {
    let n = players.len();
    let mut ok = vec![false; 1 << n];
    ok[0] = true;
    for mask in 1usize..(1 << n) {
        if mask.count_ones() % 2 == 1 {
            continue;
        }
        let a = mask.trailing_zeros() as usize;
        ok[mask] = (a + 1..n).any(|b| {
            mask & (1 << b) != 0
                && !met.contains(&(players[a].min(players[b]), players[a].max(players[b])))
                && ok[mask & !(1 << a) & !(1 << b)]
        });
    }
    ok[(1 << n) - 1]
}

use alloc::collections::BTreeSet;

#[test]
fn first_round_pairs_by_id() {
    let t = Tournament::new(ids(4), 6).unwrap();
    let p = t.next_pairings().unwrap();
    assert_eq!(p.len(), 2);
    assert_eq!((p[0].left.as_str(), p[0].right.as_str()), ("m00", "m01"));
    assert_eq!((p[1].left.as_str(), p[1].right.as_str()), ("m02", "m03"));
    assert_eq!(t.current_round().unwrap().bye, None);
}

#[test]
fn constructor_errors() {
    assert_eq!(Tournament::new(ids(1), 6), Err(AnnotationError::TooFewParticipants(1)));
    assert_eq!(Tournament::new(ids(3), 0), Err(AnnotationError::NoRounds));
    assert_eq!(
        Tournament::new(vec!["a".into(), "a".into()], 6),
        Err(AnnotationError::DuplicateParticipant("a".into()))
    );
}

#[test]
fn two_participants_rematch_after_exhaustion() {
    let mut t = Tournament::new(ids(2), 6).unwrap();
    play(&mut t, |a, _| a == "m01" || false);
    play(&mut t, |_, _| true);
    assert!(t.is_complete());
    assert_eq!(t.rounds().len(), 6);
    let s = t.final_scores().unwrap();
    assert_eq!(s[1], ("m01".into(), 1.0));
    assert_eq!(s[0], ("m00".into(), 0.0));
}

#[test]
fn record_result_contract() {
    let mut t = Tournament::new(ids(4), 6).unwrap();
    let m = t.next_pairings().unwrap()[0].clone();
    let before = t.clone();
    assert!(matches!(
        t.record_result(&vote(1, &m, "m03")),
        Err(AnnotationError::WinnerNotInPair(_))
    ));
    let bogus = Match {
        left: "m00".into(),
        right: "m02".into(),
        winner: None,
    };
    assert!(matches!(t.record_result(&vote(1, &bogus, "m00")), Err(AnnotationError::NotPending { .. })));
    assert!(matches!(t.record_result(&vote(2, &m, "m00")), Err(AnnotationError::NotPending { .. })));
    assert_eq!(t, before);

    let out = t.record_result(&vote(1, &m, "m01")).unwrap();
    assert!(!out.round_closed);
    let total: usize = t.standings().map(|s| s.1).sum();
    assert_eq!(total, 1);
    assert_eq!(t.wins("m01"), Some(1));
    // reversed orientation is the same pair
    let swapped = Match {
        left: m.right.clone(),
        right: m.left.clone(),
        winner: None,
    };
    let after = t.clone();
    assert!(matches!(t.record_result(&vote(1, &swapped, "m00")), Err(AnnotationError::DuplicateVote { .. })));
    assert_eq!(t, after);
    assert!(matches!(t.final_scores(), Err(AnnotationError::Incomplete { completed: 0, total: 6 })));

    play(&mut t, |a, b| a < b);
    assert_eq!(t.next_pairings(), Err(AnnotationError::TournamentComplete));
    assert_eq!(t.record_result(&vote(6, &m, "m00")), Err(AnnotationError::TournamentComplete));
}

#[test]
fn eight_participants_true_order() {
    let mut t = Tournament::new(ids(8), 6).unwrap();
    // lower id is better
    play(&mut t, |a, b| a < b);
    assert_eq!(t.wins("m00"), Some(6));
    assert_eq!(t.wins("m07"), Some(0));
}

#[test]
fn seven_participants_conserve_wins_and_rotate_byes() {
    let (t, _) = transitive(7, 3);
    let decided: usize = t.rounds().iter().map(|r| r.matches.len()).sum();
    assert_eq!(decided, 18);
    assert_eq!(t.standings().map(|s| s.1).sum::<usize>(), decided);
    let byes: BTreeSet<_> = t.rounds().iter().filter_map(|r| r.bye.clone()).collect();
    assert_eq!(byes.len(), 6);
}

#[test]
fn scores_are_wins_over_matches_played() {
    for seed in 0..20 {
        let n = 5 + seed as usize % 9;
        let (t, _) = transitive(n, seed);
        for (id, s) in t.final_scores().unwrap() {
            let played = t.matches_played(&id).unwrap();
            let byes = t.rounds().iter().filter(|r| r.bye.as_deref() == Some(id.as_str())).count();
            assert_eq!(played + byes, 6);
            assert_eq!(s, t.wins(&id).unwrap() as f64 / played as f64);
            if n % 2 == 0 {
                // no byes: multiples of 1/6
                let k = s * 6.0;
                assert!((k - libm::round(k)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn lone_bye_scores_neutral() {
    let mut t = Tournament::new(ids(3), 1).unwrap();
    play(&mut t, |a, b| a < b);
    let s = t.final_scores().unwrap();
    assert_eq!(s, [("m00".into(), 1.0), ("m01".into(), 0.0), ("m02".into(), 0.5)]);
}

#[test]
fn transitive_comparator_extremes() {
    for seed in 0..100 {
        let n = 8 + seed as usize % 9;
        let (t, q) = transitive(n, seed);
        let scores: BTreeMap<String, f64> = t.final_scores().unwrap().into_iter().collect();
        let worst = q.iter().find(|(_, &v)| v == 0).unwrap().0;
        assert_eq!(scores[worst], 0.0, "seed {seed}");
        let top = scores.values().copied().fold(0.0, f64::max);
        let bottom = scores.values().copied().fold(1.0, f64::min);
        assert_eq!(bottom, 0.0);
        assert_eq!(top, 1.0, "seed {seed}");
        let best = q.iter().find(|(_, &v)| v == n - 1).unwrap().0;
        assert_eq!(scores[best], 1.0, "seed {seed}");
    }
}

/// Six Swiss rounds do not sort a field, so scores are not monotone in
/// quality in general; they do agree strongly in rank.
#[test]
fn transitive_comparator_rank_agreement() {
    let mut total = 0.0;
    let mut strictly_monotone = 0;
    for seed in 0..100 {
        let n = 8 + seed as usize % 9;
        let (t, q) = transitive(n, seed);
        let (scores, quality): (Vec<f64>, Vec<f64>) =
            t.final_scores().unwrap().iter().map(|(id, s)| (*s, q[id] as f64)).unzip();
        let rho = crate::stats::srocc(&scores, &quality).unwrap();
        assert!(rho > 0.7, "seed {seed}: {rho}");
        total += rho;
        let mut pairs: Vec<(f64, f64)> = quality.iter().copied().zip(scores.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).all(|w| w[0].1 <= w[1].1) {
            strictly_monotone += 1;
        }
    }
    assert!(total / 100.0 > 0.9);
    assert!(strictly_monotone < 100);
}

#[test]
fn snapshot_round_trips() {
    let (t, _) = transitive(6, 1);
    let json = serde_json::to_string(&t).unwrap();
    let back: Tournament = serde_json::from_str(&json).unwrap();
    assert_eq!(t, back);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn pairing_invariants(n in 2usize..=12, seed in any::<u64>()) {
        let mut t = Tournament::new(ids(n), DEFAULT_ROUNDS).unwrap();
        let mut r = seeded(seed);
        let index = |id: &str| id[1..].parse::<usize>().unwrap();
        let mut met = BTreeSet::new();
        while let Ok(pending) = t.next_pairings() {
            let round = t.current_round().unwrap().clone();
            let mut seen = BTreeSet::new();
            let mut players = Vec::new();
            for m in &round.matches {
                prop_assert!(seen.insert(m.left.clone()) && seen.insert(m.right.clone()));
                players.push(index(&m.left));
                players.push(index(&m.right));
            }
            if let Some(b) = &round.bye {
                prop_assert!(seen.insert(b.clone()));
            }
            prop_assert_eq!(seen.len(), n);
            let rematch = round.matches.iter().any(|m| {
                let (a, b) = (index(&m.left), index(&m.right));
                met.contains(&(a.min(b), a.max(b)))
            });
            if rematch {
                prop_assert!(!rematch_free_exists(&players, &met));
            }
            for m in &pending {
                let w = if r.random_bool(0.5) { m.left.clone() } else { m.right.clone() };
                t.record_result(&vote(round.number, m, &w)).unwrap();
                let (a, b) = (index(&m.left), index(&m.right));
                met.insert((a.min(b), a.max(b)));
            }
            let done = t.rounds_completed();
            for (_, w) in t.standings() {
                prop_assert!(w <= done);
            }
        }
        let decided: usize = t.rounds().iter().map(|r| r.matches.len()).sum();
        prop_assert_eq!(t.standings().map(|s| s.1).sum::<usize>(), decided);
    }
}

fn quantile_oracle(data: &[f64], p: f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() as f64 - 1.0) * p;
    let lo = libm::floor(h);
    let frac = h - lo;
    let lo = lo as usize;
    if frac == 0.0 {
        v[lo]
    } else {
        (1.0 - frac) * v[lo] + frac * v[lo + 1]
    }
}

#[test]
fn outlier_examples() {
    let r = remove_outliers(&[1.0, 2.0, 3.0, 4.0, 100.0]);
    assert_eq!(r.removed, [100.0]);
    assert_eq!(r.kept, [1.0, 2.0, 3.0, 4.0]);
    assert_eq!((r.q1, r.q3), (Some(2.0), Some(4.0)));
    assert_eq!(r.method, "linear");
    assert_eq!(r.mask, [false, false, false, false, true]);

    let r = remove_outliers(&[0.5; 7]);
    assert!(r.removed.is_empty() && r.kept.len() == 7);

    let r = remove_outliers(&[0.3, 0.4, 0.5, 0.6, 0.7]);
    assert!(r.removed.is_empty());

    let r = remove_outliers(&[0.0, 1.0, 50.0]);
    assert!(r.insufficient && r.removed.is_empty() && r.kept.len() == 3 && r.q1.is_none());
}

#[test]
fn outlier_removal_is_not_idempotent() {
    // dropping the 5 narrows the fence enough to drop the 1s as well
    let first = remove_outliers(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 5.0]);
    assert_eq!(first.removed, [5.0]);
    let second = remove_outliers(&first.kept);
    assert_eq!(second.removed, [1.0, 1.0]);
}

proptest! {
    #[test]
    fn outlier_fence_matches_oracle(v in prop::collection::vec(-10.0f64..10.0, 4..40)) {
        let r = remove_outliers(&v);
        let (q1, q3) = (quantile_oracle(&v, 0.25), quantile_oracle(&v, 0.75));
        prop_assert!((r.q1.unwrap() - q1).abs() < 1e-12);
        prop_assert!((r.q3.unwrap() - q3).abs() < 1e-12);
        let (lo, hi) = (q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1));
        for (x, &out) in v.iter().zip(&r.mask) {
            if *x >= q1 && *x <= q3 {
                prop_assert!(!out);
            }
            prop_assert_eq!(out, *x < r.lower.unwrap() || *x > r.upper.unwrap());
            prop_assert!(out || (*x >= lo - 1e-12 && *x <= hi + 1e-12));
        }
        prop_assert_eq!(r.kept.len() + r.removed.len(), v.len());
    }
}

#[test]
fn confidence_interval_examples() {
    assert_eq!(ci_half_width(0.2, 16, Z_95), 0.098);
    assert_eq!(confidence_interval(&[0.4; 5], Z_95), Ok(0.0));
    assert_eq!(
        confidence_interval(&[0.4], Z_95),
        Err(AnnotationError::TooFewScores { needed: 2, got: 1 })
    );
    let mut r = seeded(9);
    for _ in 0..50 {
        let v: Vec<f64> = (0..20).map(|_| r.random_range(0.0..1.0)).collect();
        let n = v.len() as f64;
        let sum: f64 = v.iter().sum();
        let sq: f64 = v.iter().map(|x| x * x).sum();
        let sigma = libm::sqrt((sq - sum * sum / n) / (n - 1.0));
        let want = 1.96 * sigma / libm::sqrt(n);
        assert!((confidence_interval(&v, Z_95).unwrap() - want).abs() < 1e-12);
    }
}

fn subject(name: &str, group: &str, scores: &[(&str, f64)]) -> SubjectScores {
    SubjectScores {
        subject: name.into(),
        group: group.into(),
        scores: scores.iter().map(|(m, s)| ((*m).into(), *s)).collect(),
    }
}

#[test]
fn aggregate_examples() {
    assert_eq!(aggregate_dataset(&[]), Err(AnnotationError::NoResults));
    let one = aggregate_dataset(&[subject("a", "g", &[("x", 0.5), ("y", 1.0 / 6.0)])]).unwrap();
    assert_eq!(one.meshes[0].score, 0.5);
    assert_eq!(one.meshes[1].score, 1.0 / 6.0);
    assert_eq!(one.meshes[0].ci_before, None);
    assert_eq!(one.mean_ci_before, None);
    assert_eq!(one.removal_fraction, 0.0);

    let two = aggregate_dataset(&[subject("a", "g", &[("x", 0.4)]), subject("b", "g", &[("x", 0.6)])]).unwrap();
    assert!((two.meshes[0].score - 0.5).abs() < 1e-15);
    assert_eq!(two.records.len(), 2);
    assert!(two.meshes[0].ci_before.is_some());

    let (t, _) = transitive(4, 0);
    let s = SubjectScores::from_tournament("a", "g", &t).unwrap();
    let agg = aggregate_dataset(&[s.clone()]).unwrap();
    for (mesh, score) in &s.scores {
        let m = agg.meshes.iter().find(|m| &m.mesh == mesh).unwrap();
        assert_eq!(m.score, *score);
    }
}

#[test]
fn outlier_removal_tightens_simulated_intervals() {
    for seed in 0..10 {
        let mut r = seeded(seed);
        let n = 8;
        let quality: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let results: Vec<SubjectScores> = (0..20)
            .map(|s| {
                let mut t = Tournament::new(ids(n), DEFAULT_ROUNDS).unwrap();
                let index = |id: &str| id[1..].parse::<usize>().unwrap();
                // mostly consistent judges that err on close calls
                play(&mut t, |a, b| {
                    let d = quality[index(a)] - quality[index(b)];
                    r.random_range(-1.5..1.5) < d
                });
                let mut scores = t.final_scores().unwrap();
                for sc in &mut scores {
                    if r.random_bool(0.1) {
                        sc.1 = r.random_range(0.0..=1.0);
                    }
                }
                SubjectScores {
                    subject: format!("u{s}"),
                    group: "g".into(),
                    scores,
                }
            })
            .collect();
        let agg = aggregate_dataset(&results).unwrap();
        let (before, after) = (agg.mean_ci_before.unwrap(), agg.mean_ci_after.unwrap());
        assert!(after < before, "seed {seed}: {after} vs {before}");
        assert!(agg.removal_fraction > 0.0);
    }
}

