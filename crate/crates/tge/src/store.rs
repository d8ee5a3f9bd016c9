//! File-backed annotation store: an append-only JSON-lines event log
//! (`events.jsonl`) plus one materialized snapshot per session under
//! `snapshots/`. Replaying the log rebuilds every session exactly.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tge_core::annotation::{
    aggregate_dataset, AnnotationError, DatasetAggregate, RecordOutcome, SubjectScores, Tournament, Vote,
};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("annotation store {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session: String,
        subject: String,
        group: String,
        participants: Vec<String>,
        rounds_total: usize,
        timestamp_ms: u64,
    },
    Vote(Vote),
}

/// One subject's tournament over one object group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub subject: String,
    pub group: String,
    pub tournament: Tournament,
    pub created_ms: u64,
    pub updated_ms: u64,
}

impl SessionRecord {
    pub fn new(
        id: String,
        subject: String,
        group: String,
        participants: Vec<String>,
        rounds_total: usize,
        timestamp_ms: u64,
    ) -> Result<Self, AnnotationError> {
        Ok(Self {
            id,
            subject,
            group,
            tournament: Tournament::new(participants, rounds_total)?,
            created_ms: timestamp_ms,
            updated_ms: timestamp_ms,
        })
    }

    pub fn creation_event(&self) -> Event {
        Event::SessionCreated {
            session: self.id.clone(),
            subject: self.subject.clone(),
            group: self.group.clone(),
            participants: self.tournament.participants().to_vec(),
            rounds_total: self.tournament.rounds_total(),
            timestamp_ms: self.created_ms,
        }
    }

    pub fn apply_vote(&mut self, vote: &Vote) -> Result<RecordOutcome, AnnotationError> {
        let out = self.tournament.record_result(vote)?;
        self.updated_ms = vote.timestamp_ms;
        Ok(out)
    }
}

/// Applies `events` in order.
pub fn replay_events(events: &[Event]) -> Result<BTreeMap<String, SessionRecord>, StoreError> {
    let mut sessions = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        match e {
            Event::SessionCreated {
                session,
                subject,
                group,
                participants,
                rounds_total,
                timestamp_ms,
            } => {
                let s = SessionRecord::new(
                    session.clone(),
                    subject.clone(),
                    group.clone(),
                    participants.clone(),
                    *rounds_total,
                    *timestamp_ms,
                )?;
                sessions.insert(session.clone(), s);
            }
            Event::Vote(v) => {
                let s = sessions.get_mut(&v.session).ok_or_else(|| StoreError::Corrupt {
                    file: EVENTS_FILE.into(),
                    line: i + 1,
                    message: format!("vote for unknown session {}", v.session),
                })?;
                s.apply_vote(v)?;
            }
        }
    }
    Ok(sessions)
}

pub struct AnnotationStore {
    dir: PathBuf,
    log: Mutex<File>,
}

impl AnnotationStore {
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let io = |source| StoreError::Io {
            path: dir.display().to_string(),
            source,
        };
        fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(io)?;
        truncate_torn_tail(&dir.join(EVENTS_FILE)).map_err(io)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join(EVENTS_FILE))
            .map_err(io)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log: Mutex::new(log),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Appends one event and syncs it to disk before returning.
    pub fn append(&self, event: &Event) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        let mut f = self.log.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|source| StoreError::Io {
                path: self.dir.join(EVENTS_FILE).display().to_string(),
                source,
            })
    }

    pub fn write_snapshot(&self, session: &SessionRecord) -> Result<(), StoreError> {
        let path = self.dir.join(SNAPSHOT_DIR).join(format!("{}.json", session.id));
        let tmp = path.with_extension("tmp");
        let json = serde_json::to_vec_pretty(session).expect("session serializes");
        fs::write(&tmp, json)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|source| StoreError::Io {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn replay(&self) -> Result<BTreeMap<String, SessionRecord>, StoreError> {
        replay_dir(&self.dir)
    }
}

/// Cuts an unterminated final line left by an interrupted append, so that
/// new events do not get glued onto it.
fn truncate_torn_tail(path: &Path) -> std::io::Result<()> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(e),
    };
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    log::warn!("dropping {} bytes of an incomplete event at the end of {}", bytes.len() - keep, path.display());
    OpenOptions::new().write(true).open(path)?.set_len(keep as u64)
}

/// Reads the event log. An unterminated final line (a write cut short by a
/// crash) is ignored; any other malformed line is an error.
pub fn read_events(dir: &Path) -> Result<Vec<Event>, StoreError> {
    let path = dir.join(EVENTS_FILE);
    let io = |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(e)),
    };
    let mut reader = BufReader::new(file);
    let mut events = Vec::new();
    let mut buf = String::new();
    let mut line = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf).map_err(io)? == 0 {
            break;
        }
        line += 1;
        if buf.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(buf.trim_end()) {
            Ok(e) => events.push(e),
            Err(_) if !buf.ends_with('\n') => break,
            Err(e) => {
                return Err(StoreError::Corrupt {
                    file: path.display().to_string(),
                    line,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(events)
}

pub fn replay_dir(dir: &Path) -> Result<BTreeMap<String, SessionRecord>, StoreError> {
    replay_events(&read_events(dir)?)
}

pub fn load_snapshots(dir: &Path) -> Result<BTreeMap<String, SessionRecord>, StoreError> {
    let snap = dir.join(SNAPSHOT_DIR);
    let mut out = BTreeMap::new();
    let entries = match fs::read_dir(&snap) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(source) => {
            return Err(StoreError::Io {
                path: snap.display().to_string(),
                source,
            })
        }
    };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|source| StoreError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let s: SessionRecord = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            file: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        out.insert(s.id.clone(), s);
    }
    Ok(out)
}

/// Scores of every completed session, optionally restricted to one group,
/// ordered by session id.
pub fn completed_scores<'a>(
    sessions: impl IntoIterator<Item = &'a SessionRecord>,
    group: Option<&str>,
) -> Vec<SubjectScores> {
    sessions
        .into_iter()
        .filter(|s| group.is_none_or(|g| s.group == g))
        .filter_map(|s| SubjectScores::from_tournament(&s.subject, &s.group, &s.tournament).ok())
        .collect()
}

/// Aggregate statistics of a store directory.
pub fn dataset_stats(dir: &Path, group: Option<&str>) -> Result<DatasetAggregate, StoreError> {
    let sessions = replay_dir(dir)?;
    Ok(aggregate_dataset(&completed_scores(sessions.values(), group))?)
}
