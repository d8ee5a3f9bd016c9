use std::fs::{self, OpenOptions};
use std::io::Write;

use rand::Rng;
use tge::store::{
    dataset_stats, load_snapshots, read_events, replay_dir, AnnotationStore, Event, SessionRecord, StoreError, EVENTS_FILE,
};
use tge_core::annotation::Vote;
use tge_core::rng::seeded;

fn participants(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("g/m{i}")).collect()
}

/// Runs one session to completion (or `max_votes`), persisting as it goes.
fn run_session(store: &AnnotationStore, id: &str, group: &str, seed: u64, max_votes: usize) -> SessionRecord {
    let mut rec = SessionRecord::new(id.into(), format!("subject-{id}"), group.into(), participants(5), 4, 10).unwrap();
    store.append(&rec.creation_event()).unwrap();
    let mut r = seeded(seed);
    let mut votes = 0;
    while let Some(round) = rec.tournament.current_round().map(|r| r.number) {
        for m in rec.tournament.next_pairings().unwrap() {
            if votes == max_votes {
                store.write_snapshot(&rec).unwrap();
                return rec;
            }
            let winner = if r.random_bool(0.7) == (m.left < m.right) { m.left.clone() } else { m.right.clone() };
            let vote = Vote { session: id.into(), subject: rec.subject.clone(), round, left: m.left, right: m.right, winner, timestamp_ms: 100 + votes as u64 };
            rec.apply_vote(&vote).unwrap();
            store.append(&Event::Vote(vote)).unwrap();
            votes += 1;
        }
    }
    store.write_snapshot(&rec).unwrap();
    rec
}

#[test]
fn replay_reconstructs_sessions_and_snapshots_agree() {
    let dir = tempfile::tempdir().unwrap();
    let store = AnnotationStore::open(dir.path()).unwrap();
    let a = run_session(&store, "a", "g", 1, usize::MAX);
    let b = run_session(&store, "b", "g", 2, 5);
    assert!(a.tournament.is_complete());
    assert!(!b.tournament.is_complete());
    let replayed = store.replay().unwrap();
    assert_eq!(replayed["a"], a);
    assert_eq!(replayed["b"], b);
    assert_eq!(load_snapshots(dir.path()).unwrap(), replayed);
}

#[test]
fn torn_tail_is_dropped_and_appends_continue() {
    let dir = tempfile::tempdir().unwrap();
    {
        let store = AnnotationStore::open(dir.path()).unwrap();
        run_session(&store, "a", "g", 1, 3);
    }
    let log = dir.path().join(EVENTS_FILE);
    let intact = read_events(dir.path()).unwrap();
    OpenOptions::new().append(true).open(&log).unwrap().write_all(br#"{"event":"vote","sess"#).unwrap();
    assert_eq!(read_events(dir.path()).unwrap(), intact);

    // reopening cuts the fragment, so the next event lands on its own line
    let store = AnnotationStore::open(dir.path()).unwrap();
    let mut rec = store.replay().unwrap().remove("a").unwrap();
    let m = rec.tournament.current_round().unwrap().pending().next().unwrap().clone();
    let round = rec.tournament.current_round().unwrap().number;
    let vote = Vote { session: "a".into(), subject: rec.subject.clone(), round, left: m.left.clone(), right: m.right, winner: m.left, timestamp_ms: 7 };
    rec.apply_vote(&vote).unwrap();
    store.append(&Event::Vote(vote)).unwrap();
    assert_eq!(read_events(dir.path()).unwrap().len(), intact.len() + 1);
    assert_eq!(replay_dir(dir.path()).unwrap()["a"], rec);
}

#[test]
fn corrupt_lines_and_orphan_votes_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let store = AnnotationStore::open(dir.path()).unwrap();
    run_session(&store, "a", "g", 1, 2);
    let log = dir.path().join(EVENTS_FILE);
    let text = fs::read_to_string(&log).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.insert(1, "not json");
    fs::write(&log, lines.join("\n") + "\n").unwrap();
    match read_events(dir.path()) {
        Err(StoreError::Corrupt { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }

    let dir = tempfile::tempdir().unwrap();
    let store = AnnotationStore::open(dir.path()).unwrap();
    let vote = Vote { session: "ghost".into(), subject: "s".into(), round: 1, left: "x".into(), right: "y".into(), winner: "x".into(), timestamp_ms: 0 };
    store.append(&Event::Vote(vote)).unwrap();
    assert!(matches!(store.replay(), Err(StoreError::Corrupt { .. })));
}

#[test]
fn dataset_stats_counts_completed_sessions_per_group() {
    let dir = tempfile::tempdir().unwrap();
    let store = AnnotationStore::open(dir.path()).unwrap();
    for (i, id) in ["s1", "s2", "s3", "s4", "s5"].iter().enumerate() {
        run_session(&store, id, "g", i as u64, usize::MAX);
    }
    run_session(&store, "partial", "g", 9, 3);
    run_session(&store, "other", "h", 9, usize::MAX);
    let all = dataset_stats(dir.path(), None).unwrap();
    let g = dataset_stats(dir.path(), Some("g")).unwrap();
    assert_eq!(g.meshes.len(), 5);
    assert_eq!(all.meshes.len(), 10);
    assert!(g.meshes.iter().all(|m| m.group == "g" && m.subjects == 5 && m.removed < 5));
    assert!(g.mean_ci_after.is_some());
    assert_eq!(g.records.len(), 25);
    assert!(matches!(dataset_stats(dir.path(), Some("missing")), Err(StoreError::Annotation(_))));
}
