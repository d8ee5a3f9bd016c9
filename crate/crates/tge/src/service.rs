//! HTTP annotation service.
//!
//! - `GET /api/groups`
//! - `POST /api/sessions` `{subject, group}` → `{session, round, pairings}`
//! - `GET /api/sessions/{id}/next` → `{pair, round}` or `{complete, scores}`
//! - `POST /api/sessions/{id}/vote` `{left, right, winner}` → `{ok, remaining, round, complete}`
//! - `GET /api/export/{group}` → manifest fragment with aggregated scores
//! - `GET /meshes/{path}` → `.ply`/`.obj` files under the dataset root, byte
//!   for byte
//!
//! Every vote is validated on a copy of the session, appended to the event
//! log, and only then committed, so the log and memory never disagree.
//! Mutations of one session are serialized by its lock; sessions are
//! independent.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tge_core::annotation::{aggregate_dataset, AnnotationError, Match, Vote, DEFAULT_ROUNDS};

use crate::manifest::{Manifest, ManifestItem, ManifestObject};
use crate::store::{completed_scores, now_ms, AnnotationStore, Event, SessionRecord, StoreError};

pub const MESH_PREFIX: &str = "/meshes/";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupMesh {
    /// Path relative to the dataset root, `/`-separated; doubles as the
    /// participant id.
    pub id: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub id: String,
    pub reference: Option<String>,
    pub meshes: Vec<GroupMesh>,
}

/// Object groups under a dataset root: from `manifest.json` when present,
/// otherwise one group per subdirectory holding `.ply`/`.obj` files (a file
/// with stem `reference` is the group's reference).
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    groups: BTreeMap<String, Group>,
}

fn rel(root: &Path, path: &Path) -> Option<String> {
    let r = path.strip_prefix(root).ok()?;
    let parts: Vec<&str> = r.components().map(|c| c.as_os_str().to_str()).collect::<Option<_>>()?;
    Some(parts.join("/"))
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, String> {
        let root = root
            .canonicalize()
            .map_err(|e| format!("dataset root {}: {e}", root.display()))?;
        let manifest = root.join("manifest.json");
        let mut groups = BTreeMap::new();
        if manifest.exists() {
            let m = Manifest::load(&manifest).map_err(|e| e.to_string())?;
            for o in &m.objects {
                let inside = |p: &str| {
                    let full = m.resolve(p);
                    rel(&root, &full).ok_or_else(|| format!("{} lies outside the dataset root", full.display()))
                };
                let meshes = o
                    .distorted
                    .iter()
                    .map(|d| {
                        Ok(GroupMesh {
                            id: inside(&d.path)?,
                            method: d.method.clone(),
                        })
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                groups.insert(
                    o.id.clone(),
                    Group {
                        id: o.id.clone(),
                        reference: Some(inside(&o.reference)?),
                        meshes,
                    },
                );
            }
        } else {
            let mut dirs: Vec<PathBuf> = fs::read_dir(&root)
                .map_err(|e| e.to_string())?
                .flatten()
                .map(|e| e.path())
                .filter(|p| p.is_dir())
                // hidden directories hold the annotation store, not meshes
                .filter(|p| !p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.')))
                .collect();
            dirs.sort();
            for dir in dirs {
                let mut files: Vec<PathBuf> = fs::read_dir(&dir)
                    .map_err(|e| e.to_string())?
                    .flatten()
                    .map(|e| e.path())
                    .filter(|p| {
                        matches!(
                            p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                            Some("ply" | "obj")
                        )
                    })
                    .collect();
                files.sort();
                let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
                let (refs, meshes): (Vec<PathBuf>, Vec<PathBuf>) = files
                    .into_iter()
                    .partition(|p| p.file_stem().and_then(|s| s.to_str()) == Some("reference"));
                groups.insert(
                    id.clone(),
                    Group {
                        id,
                        reference: refs.first().and_then(|p| rel(&root, p)),
                        meshes: meshes
                            .iter()
                            .filter_map(|p| rel(&root, p))
                            .map(|id| GroupMesh { id, method: String::new() })
                            .collect(),
                    },
                );
            }
        }
        Ok(Self { root, groups })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn groups(&self) -> &BTreeMap<String, Group> {
        &self.groups
    }
}

pub fn mesh_url(id: &str) -> String {
    format!("{MESH_PREFIX}{id}")
}

/// Service error with its HTTP status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        let status = match e {
            AnnotationError::WinnerNotInPair(_) | AnnotationError::TooFewParticipants(_) => StatusCode::BAD_REQUEST,
            AnnotationError::NotPending { .. }
            | AnnotationError::DuplicateVote { .. }
            | AnnotationError::TournamentComplete
            | AnnotationError::Incomplete { .. }
            | AnnotationError::NoResults => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

pub struct AppState {
    dataset: Dataset,
    store: AnnotationStore,
    rounds_total: usize,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionRecord>>>>,
}

impl AppState {
    /// Opens the store and restores every session by replaying its log.
    pub fn new(dataset: Dataset, store: AnnotationStore, rounds_total: usize) -> Result<Self, StoreError> {
        let sessions = store
            .replay()?
            .into_iter()
            .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
            .collect();
        Ok(Self {
            dataset,
            store,
            rounds_total,
            sessions: RwLock::new(sessions),
        })
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }

    fn group(&self, id: &str) -> Result<&Group, ApiError> {
        self.dataset
            .groups
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown group {id}")))
    }
}

fn pair_json(m: &Match) -> Value {
    json!({
        "left": m.left,
        "right": m.right,
        "meshUrlLeft": mesh_url(&m.left),
        "meshUrlRight": mesh_url(&m.right),
    })
}

fn scores_json(s: &SessionRecord) -> Value {
    let scores: BTreeMap<String, f64> = s.tournament.final_scores().unwrap_or_default().into_iter().collect();
    json!({ "complete": true, "scores": scores })
}

async fn list_groups(State(state): State<Arc<AppState>>) -> Json<Value> {
    let groups: Vec<Value> = state
        .dataset
        .groups
        .values()
        .map(|g| {
            json!({
                "id": g.id,
                "meshes": g.meshes.len(),
                "referenceUrl": g.reference.as_deref().map(mesh_url),
            })
        })
        .collect();
    Json(json!({ "groups": groups }))
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    subject: String,
    group: String,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateSession>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(body) = body?;
    let group = state.group(&body.group)?;
    if group.meshes.len() < 2 {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("group {} has {} meshes; at least 2 are needed", group.id, group.meshes.len()),
        ));
    }
    let id = uuid::Uuid::new_v4().to_string();
    let participants = group.meshes.iter().map(|m| m.id.clone()).collect();
    let record = SessionRecord::new(id.clone(), body.subject, group.id.clone(), participants, state.rounds_total, now_ms())?;
    state.store.append(&record.creation_event())?;
    state.store.write_snapshot(&record)?;
    let round = record.tournament.current_round().map(|r| r.number);
    let pairings: Vec<Value> = record.tournament.next_pairings()?.iter().map(pair_json).collect();
    state
        .sessions
        .write()
        .unwrap_or_else(|p| p.into_inner())
        .insert(id.clone(), Arc::new(Mutex::new(record)));
    Ok(Json(json!({ "session": id, "round": round, "pairings": pairings })))
}

async fn next_pair(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    let session = state.session(&id)?;
    let s = session.lock().unwrap_or_else(|p| p.into_inner());
    Ok(Json(match s.tournament.current_round() {
        Some(round) => {
            let m = round.pending().next().expect("open round has a pending match");
            json!({ "pair": pair_json(m), "round": round.number, "roundsTotal": s.tournament.rounds_total() })
        }
        None => scores_json(&s),
    }))
}

#[derive(Debug, Deserialize)]
struct VoteBody {
    left: String,
    right: String,
    winner: String,
}

async fn post_vote(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<VoteBody>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(body) = body?;
    let session = state.session(&id)?;
    let mut s = session.lock().unwrap_or_else(|p| p.into_inner());
    let round = s
        .tournament
        .current_round()
        .map(|r| r.number)
        .ok_or(AnnotationError::TournamentComplete)?;
    let vote = Vote {
        session: id,
        subject: s.subject.clone(),
        round,
        left: body.left,
        right: body.right,
        winner: body.winner,
        timestamp_ms: now_ms(),
    };
    let mut next = s.clone();
    let outcome = next.apply_vote(&vote)?;
    state.store.append(&Event::Vote(vote))?;
    *s = next;
    state.store.write_snapshot(&s)?;
    let remaining = s.tournament.current_round().map_or(0, |r| r.pending().count());
    Ok(Json(json!({
        "ok": true,
        "remaining": remaining,
        "round": s.tournament.current_round().map(|r| r.number),
        "roundClosed": outcome.round_closed,
        "complete": outcome.complete,
    })))
}

/// Aggregated scores of a group's completed sessions as a manifest fragment.
pub fn export_group(state: &AppState, group_id: &str) -> Result<Value, ApiError> {
    let group = state.group(group_id)?;
    let sessions: Vec<SessionRecord> = {
        let map = state.sessions.read().unwrap_or_else(|p| p.into_inner());
        let mut v: Vec<SessionRecord> = map
            .values()
            .map(|s| s.lock().unwrap_or_else(|p| p.into_inner()).clone())
            .collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    };
    let results = completed_scores(&sessions, Some(group_id));
    if results.is_empty() {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("group {group_id} has no completed sessions"),
        ));
    }
    let agg = aggregate_dataset(&results)?;
    let distorted = group
        .meshes
        .iter()
        .filter_map(|m| {
            agg.meshes.iter().find(|a| a.mesh == m.id).map(|a| ManifestItem {
                path: m.id.clone(),
                method: m.method.clone(),
                score: Some(a.score),
            })
        })
        .collect();
    let object = ManifestObject {
        id: group.id.clone(),
        reference: group.reference.clone().unwrap_or_default(),
        distorted,
    };
    Ok(json!({
        "objects": [object],
        "statistics": {
            "sessions": results.len(),
            "meshes": agg.meshes,
            "meanCiBefore": agg.mean_ci_before,
            "meanCiAfter": agg.mean_ci_after,
            "removalFraction": agg.removal_fraction,
            "quartileMethod": agg.quartile_method,
        }
    }))
}

async fn export(
    State(state): State<Arc<AppState>>,
    UrlPath(group): UrlPath<String>,
) -> Result<Json<Value>, ApiError> {
    export_group(&state, &group).map(Json)
}

async fn mesh_file(State(state): State<Arc<AppState>>, UrlPath(path): UrlPath<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, format!("no mesh {path}"));
    let rel = Path::new(&path);
    let plain = rel.components().all(|c| matches!(c, std::path::Component::Normal(_)));
    let mesh = matches!(
        rel.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("ply" | "obj")
    );
    if !plain || !mesh {
        return Err(not_found());
    }
    let bytes = tokio::fs::read(state.dataset.root().join(rel)).await.map_err(|_| not_found())?;
    Ok(([(axum::http::header::CONTENT_TYPE, "application/octet-stream")], bytes).into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/groups", get(list_groups))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next_pair))
        .route("/api/sessions/{id}/vote", post(post_vote))
        .route("/api/export/{group}", get(export))
        .route("/meshes/{*path}", get(mesh_file))
        .with_state(state)
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub root: PathBuf,
    pub store: PathBuf,
    pub addr: SocketAddr,
    pub rounds_total: usize,
}

impl ServeConfig {
    pub fn new(root: PathBuf, addr: SocketAddr) -> Self {
        let store = root.join(".annotations");
        Self {
            root,
            store,
            addr,
            rounds_total: DEFAULT_ROUNDS,
        }
    }
}

pub fn build_state(config: &ServeConfig) -> Result<Arc<AppState>, String> {
    let dataset = Dataset::open(&config.root)?;
    let store = AnnotationStore::open(&config.store).map_err(|e| e.to_string())?;
    AppState::new(dataset, store, config.rounds_total)
        .map(Arc::new)
        .map_err(|e| e.to_string())
}

pub async fn serve(config: ServeConfig) -> Result<(), String> {
    let state = build_state(&config)?;
    let listener = tokio::net::TcpListener::bind(config.addr)
        .await
        .map_err(|e| format!("bind {}: {e}", config.addr))?;
    log::info!("serving {} on http://{}", config.root.display(), config.addr);
    axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
}
