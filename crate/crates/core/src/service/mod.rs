//! The orchestration server: sessions, request routing, event persistence and
//! long polling.
//!
//! [`Service::handle`] is transport agnostic. It takes an [`ApiRequest`] and
//! returns an [`ApiResponse`]; the command line crate puts HTTP in front.
//! All commands are serialized by one mutex, so each request observes and
//! produces a single consistent revision of the server.

mod error;
mod event;
mod state;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use error::ApiError;
pub use event::{AssignVia, Event, EventBody};
pub use state::{replay, Counters, DocState, Outcome, ReplayError, ServerState, TitledTemplate};
pub use store::{
    parse_log, read_log, write_log, EventStore, FailPoint, FailPointHandle, FileStore, LogError, MemoryStore,
};

use crate::comments::Anchor;
use crate::doc::{render_canonical, render_lines, BlockKind, StructuredDocument, DEFAULT_PAGE_HEIGHT};
use crate::ids::{Actor, ActorId, BlockId, DocId, EditId, Role, SubmissionId, TaskId, ThreadId};
use crate::suggest::{classify_metrics, Decision, EditSpec, EditStatus};

/// Longest a single events poll may block.
pub const MAX_WAIT_MS: u64 = 30_000;

pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
    Delete,
}

impl std::str::FromStr for Method {
    type Err = ApiError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Ok(Method::Get),
            "POST" => Ok(Method::Post),
            "DELETE" => Ok(Method::Delete),
            other => Err(ApiError::new(405, "method_not_allowed", format!("unsupported method {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiRequest {
    pub method: Method,
    pub path: String,
    pub query: BTreeMap<String, String>,
    pub token: Option<String>,
    pub body: Value,
}

impl ApiRequest {
    /// Builds a request from a target such as `/documents/doc1/events?since=3`.
    pub fn new(method: Method, target: &str) -> Self {
        let (path, query) = match target.split_once('?') {
            Some((p, q)) => (p, parse_query(q)),
            None => (target, BTreeMap::new()),
        };
        ApiRequest { method, path: path.to_owned(), query, token: None, body: Value::Null }
    }

    pub fn get(target: &str) -> Self {
        Self::new(Method::Get, target)
    }

    pub fn post(target: &str, body: Value) -> Self {
        Self { body, ..Self::new(Method::Post, target) }
    }

    pub fn with_token(mut self, token: impl Into<String>) -> Self {
        self.token = Some(token.into());
        self
    }
}

fn parse_query(q: &str) -> BTreeMap<String, String> {
    q.split('&')
        .filter(|kv| !kv.is_empty())
        .map(|kv| match kv.split_once('=') {
            Some((k, v)) => (k.to_owned(), v.to_owned()),
            None => (kv.to_owned(), String::new()),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    pub fn ok(body: Value) -> Self {
        ApiResponse { status: 200, body }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// The error code of a failed response.
    pub fn error_code(&self) -> Option<&str> {
        self.body.get("error")?.get("code")?.as_str()
    }
}

impl From<ApiError> for ApiResponse {
    fn from(e: ApiError) -> Self {
        ApiResponse { status: e.status, body: e.to_json() }
    }
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub page_height: usize,
    /// Directory holding the event log. `None` keeps the log in memory.
    pub data_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { page_height: DEFAULT_PAGE_HEIGHT, data_dir: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OpenError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
struct Session {
    actor: Actor,
    doc_id: Option<DocId>,
}

struct Inner {
    state: ServerState,
    log: Vec<Event>,
    store: Box<dyn EventStore>,
    sessions: BTreeMap<String, Session>,
}

pub struct Service {
    inner: Mutex<Inner>,
    appended: Condvar,
    config: ServiceConfig,
}

impl Service {
    /// Opens the service, replaying an existing log from `data_dir`.
    pub fn open(config: ServiceConfig) -> Result<Self, OpenError> {
        match &config.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let (store, events) = FileStore::open(dir.join(LOG_FILE))?;
                Self::with_store(config, Box::new(store), events)
            }
            None => Self::with_store(config, Box::new(MemoryStore::new()), Vec::new()),
        }
    }

    pub fn in_memory() -> Self {
        Self::open(ServiceConfig::default()).expect("memory store cannot fail")
    }

    /// Starts from `events` (already durable in `store`).
    pub fn with_store(
        config: ServiceConfig,
        store: Box<dyn EventStore>,
        events: Vec<Event>,
    ) -> Result<Self, OpenError> {
        let state = replay(&events)?;
        Ok(Service {
            inner: Mutex::new(Inner { state, log: events, store, sessions: BTreeMap::new() }),
            appended: Condvar::new(),
            config,
        })
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Digest of the current server state.
    pub fn digest(&self) -> String {
        self.lock().state.digest()
    }

    /// A copy of the whole event log.
    pub fn events(&self) -> Vec<Event> {
        self.lock().log.clone()
    }

    /// Runs `f` against the current state.
    pub fn inspect<T>(&self, f: impl FnOnce(&ServerState) -> T) -> T {
        f(&self.lock().state)
    }

    /// Issues a session token. Authors may start unscoped and become bound
    /// to the document they create. A new author session for a document
    /// revokes the previous one.
    pub fn open_session(&self, actor_id: ActorId, role: Role, doc_id: Option<DocId>) -> Result<String, ApiError> {
        if actor_id.as_str().trim().is_empty() {
            return Err(ApiError::bad_request("actor_id is empty"));
        }
        let mut inner = self.lock();
        if let Some(doc_id) = &doc_id {
            let doc = inner.state.doc(doc_id)?;
            if role == Role::Author && doc.author_id != actor_id {
                return Err(ApiError::unauthorized("not the author of this document"));
            }
        }
        if role == Role::Author && doc_id.is_some() {
            inner.sessions.retain(|_, s| !(s.actor.role == Role::Author && s.doc_id == doc_id));
        }
        let mut bytes = [0u8; 16];
        rand::rng().fill_bytes(&mut bytes);
        let token = hex::encode(bytes);
        inner.sessions.insert(token.clone(), Session { actor: Actor { id: actor_id, role }, doc_id });
        Ok(token)
    }

    /// Handles one request. Never panics on bad input.
    pub fn handle(&self, req: ApiRequest) -> ApiResponse {
        match self.route(&req) {
            Ok(resp) => resp,
            Err(e) => e.into(),
        }
    }

    fn route(&self, req: &ApiRequest) -> Result<ApiResponse, ApiError> {
        let segs: Vec<&str> = req.path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
        use Method::*;
        match (req.method, segs.as_slice()) {
            (Post, ["sessions"]) => {
                #[derive(Deserialize)]
                struct Body {
                    actor_id: ActorId,
                    role: Role,
                    #[serde(default)]
                    doc_id: Option<DocId>,
                }
                let b: Body = body(req)?;
                let token = self.open_session(b.actor_id, b.role, b.doc_id)?;
                Ok(ApiResponse::ok(json!({ "token": token })))
            }
            (Delete, ["sessions"]) => self.end_session(req),
            (Post, ["documents"]) => self.create_document(req),
            (Get, ["documents", d]) => self.read(req, d, |s, doc_id, _| {
                let doc = s.doc(doc_id)?;
                let pending: Vec<_> = doc.engine.pending().collect();
                let threads: Vec<_> = doc.comments.threads().collect();
                Ok(json!({
                    "doc_id": doc_id,
                    "revision": doc.tree.revision,
                    "document": StructuredDocument::from(&doc.tree),
                    "text": render_canonical(&doc.tree),
                    "pending_edits": pending,
                    "threads": threads,
                }))
            }),
            (Post, ["documents", d, "blocks"]) => {
                #[derive(Deserialize)]
                struct Body {
                    parent_id: BlockId,
                    #[serde(default)]
                    after_id: Option<BlockId>,
                    kind: BlockKind,
                    text: String,
                    #[serde(default)]
                    raw_token: Option<String>,
                }
                let b: Body = body(req)?;
                self.command(req, Some(d), |s, doc_id, actor| {
                    s.dictate(doc_id.unwrap(), actor, &b.parent_id, b.after_id.as_ref(), b.kind, &b.text, b.raw_token.clone())
                })
            }
            (Post, ["documents", d, "blocks", bid, "done"]) => {
                let done = req.body.get("done").and_then(Value::as_bool).unwrap_or(true);
                let bid = BlockId::from(*bid);
                self.command(req, Some(d), |s, doc_id, actor| s.toggle_done(doc_id.unwrap(), actor, &bid, done))
            }
            (Get, ["documents", d, "edits"]) => {
                let status = req.query.get("status").cloned();
                self.read(req, d, move |s, doc_id, _| {
                    let doc = s.doc(doc_id)?;
                    let edits: Vec<_> = doc
                        .engine
                        .edits()
                        .filter(|e| status.as_deref().is_none_or(|st| status_name(e.status) == st))
                        .collect();
                    Ok(json!({ "edits": edits }))
                })
            }
            (Post, ["documents", d, "edits"]) => {
                #[derive(Deserialize)]
                struct Body {
                    #[serde(default)]
                    submission_id: Option<SubmissionId>,
                    edits: Vec<EditSpec>,
                }
                let b: Body = body(req)?;
                self.command(req, Some(d), |s, doc_id, actor| {
                    s.propose_submission(doc_id.unwrap(), actor, b.submission_id.clone(), b.edits.clone())
                })
            }
            (Post, ["documents", d, "edits", eid, "review"]) => {
                #[derive(Deserialize)]
                struct Body {
                    decision: Decision,
                }
                let b: Body = body(req)?;
                let eid = EditId::from(*eid);
                self.command(req, Some(d), |s, doc_id, actor| s.review(doc_id.unwrap(), actor, &eid, b.decision))
            }
            (Get, ["documents", d, "edits", eid, "context"]) => {
                let eid = EditId::from(*eid);
                self.read(req, d, move |s, doc_id, _| {
                    let edit = s
                        .doc(doc_id)?
                        .engine
                        .get(&eid)
                        .ok_or_else(|| ApiError::new(404, "unknown_edit", format!("unknown edit {eid}")))?;
                    Ok(json!({ "edit": edit, "snapshot": edit.snapshot }))
                })
            }
            (Get, ["documents", d, "thumbnails"]) => self.read(req, d, |s, doc_id, _| {
                let doc = s.doc(doc_id)?;
                let pages = render_lines(&doc.tree).paginate(doc.engine.page_height);
                Ok(json!({ "revision": doc.tree.revision, "page_height": doc.engine.page_height, "pages": pages }))
            }),
            (Get, ["documents", d, "threads"]) => self.read(req, d, |s, doc_id, _| {
                let threads: Vec<_> = s.doc(doc_id)?.comments.threads().collect();
                Ok(json!({ "threads": threads }))
            }),
            (Post, ["documents", d, "threads"]) => {
                #[derive(Deserialize)]
                struct Body {
                    anchor: Anchor,
                    text: String,
                    #[serde(default)]
                    raw_token: Option<String>,
                }
                let b: Body = body(req)?;
                self.command(req, Some(d), |s, doc_id, actor| {
                    s.open_thread(doc_id.unwrap(), actor, b.anchor.clone(), &b.text, b.raw_token.clone())
                })
            }
            (Post, ["threads", tid, "replies"]) => {
                #[derive(Deserialize)]
                struct Body {
                    text: String,
                    #[serde(default)]
                    raw_token: Option<String>,
                }
                let b: Body = body(req)?;
                let tid = ThreadId::from(*tid);
                self.command_on_thread(req, &tid, |s, actor| s.reply(&tid, actor, &b.text, b.raw_token.clone()))
            }
            (Post, ["threads", tid, "resolve"]) => {
                let tid = ThreadId::from(*tid);
                self.command_on_thread(req, &tid, |s, actor| s.resolve_thread(&tid, actor))
            }
            (Get, ["documents", d, "tasks"]) => self.read(req, d, |s, doc_id, _| {
                let tasks: Vec<_> = s.doc(doc_id)?.tasks.tasks().collect();
                Ok(json!({ "tasks": tasks }))
            }),
            (Get, ["documents", d, "tasks", "next"]) => {
                let claim = req.query.get("claim").filter(|c| !c.is_empty()).map(|c| TaskId::from(c.as_str()));
                self.command(req, Some(d), |s, doc_id, actor| s.next_task(doc_id.unwrap(), actor, claim.as_ref()))
            }
            (Post, ["tasks", tid, "skip"]) => {
                let tid = TaskId::from(*tid);
                self.command_on_task(req, &tid, |s, actor, active| s.skip_task(&tid, actor, active))
            }
            (Post, ["tasks", tid, "done"]) => {
                let tid = TaskId::from(*tid);
                self.command_on_task(req, &tid, |s, actor, _| s.complete_task(&tid, actor))
            }
            (Post, ["tasks", tid, "reopen"]) => {
                #[derive(Deserialize)]
                struct Body {
                    worker_id: ActorId,
                }
                let b: Body = body(req)?;
                let tid = TaskId::from(*tid);
                self.command_on_task(req, &tid, |s, actor, _| s.reassign_task(&tid, actor, &b.worker_id))
            }
            (Get, ["documents", d, "events"]) => self.poll_events(req, d),
            (Get, ["documents", d, "metrics"]) => {
                let doc_id = DocId::from(*d);
                let inner = self.lock();
                self.authorize(&inner, req, Some(&doc_id))?;
                inner.state.doc(&doc_id)?;
                let events: Vec<Event> = inner.log.iter().filter(|e| e.doc_id == doc_id).cloned().collect();
                let summary =
                    classify_metrics(&events).map_err(|e| ApiError::new(500, "malformed_log", e.to_string()))?;
                Ok(ApiResponse::ok(serde_json::to_value(summary).expect("metrics serialize")))
            }
            _ => Err(ApiError::not_found(format!("no route for {:?} {}", req.method, req.path))),
        }
    }

    /// Looks up the session and checks it may act on `doc_id`. Unscoped
    /// worker sessions become bound to the first document they touch.
    fn authorize(&self, inner: &Inner, req: &ApiRequest, doc_id: Option<&DocId>) -> Result<Session, ApiError> {
        let token = req.token.as_deref().ok_or_else(|| ApiError::unauthorized("missing session token"))?;
        let session = inner.sessions.get(token).ok_or_else(|| ApiError::unauthorized("unknown session token"))?;
        if let (Some(bound), Some(doc_id)) = (&session.doc_id, doc_id) {
            if bound != doc_id {
                return Err(ApiError::unauthorized(format!("session is bound to {bound}")));
            }
        }
        Ok(session.clone())
    }

    fn bind(inner: &mut Inner, req: &ApiRequest, doc_id: &DocId) {
        if let Some(s) = req.token.as_deref().and_then(|t| inner.sessions.get_mut(t)) {
            if s.doc_id.is_none() {
                s.doc_id = Some(doc_id.clone());
            }
        }
    }

    fn read(
        &self,
        req: &ApiRequest,
        doc: &str,
        f: impl FnOnce(&ServerState, &DocId, &Session) -> Result<Value, ApiError>,
    ) -> Result<ApiResponse, ApiError> {
        let doc_id = DocId::from(doc);
        let mut inner = self.lock();
        let session = self.authorize(&inner, req, Some(&doc_id))?;
        let value = f(&inner.state, &doc_id, &session)?;
        Self::bind(&mut inner, req, &doc_id);
        Ok(ApiResponse::ok(value))
    }

    fn command(
        &self,
        req: &ApiRequest,
        doc: Option<&str>,
        f: impl FnOnce(&mut ServerState, Option<&DocId>, &Actor) -> Result<Outcome, ApiError>,
    ) -> Result<ApiResponse, ApiError> {
        let doc_id = doc.map(DocId::from);
        let mut inner = self.lock();
        let session = self.authorize(&inner, req, doc_id.as_ref())?;
        if let Some(d) = &doc_id {
            inner.state.doc(d)?;
        }
        let outcome = f(&mut inner.state, doc_id.as_ref(), &session.actor)?;
        let resp = self.commit(&mut inner, outcome)?;
        if let Some(d) = &doc_id {
            Self::bind(&mut inner, req, d);
        }
        Ok(resp)
    }

    fn command_on_thread(
        &self,
        req: &ApiRequest,
        thread: &ThreadId,
        f: impl FnOnce(&mut ServerState, &Actor) -> Result<Outcome, ApiError>,
    ) -> Result<ApiResponse, ApiError> {
        let doc_id = self
            .inspect(|s| s.thread_doc(thread).cloned())
            .ok_or_else(|| ApiError::new(404, "unknown_thread", format!("unknown thread {thread}")))?;
        self.command(req, Some(doc_id.as_str()), |s, _, actor| f(s, actor))
    }

    fn command_on_task(
        &self,
        req: &ApiRequest,
        task: &TaskId,
        f: impl FnOnce(&mut ServerState, &Actor, &BTreeSet<ActorId>) -> Result<Outcome, ApiError>,
    ) -> Result<ApiResponse, ApiError> {
        let doc_id = self
            .inspect(|s| s.task_doc(task).cloned())
            .ok_or_else(|| ApiError::new(404, "unknown_task", format!("unknown task {task}")))?;
        let mut inner = self.lock();
        let session = self.authorize(&inner, req, Some(&doc_id))?;
        Self::bind(&mut inner, req, &doc_id);
        let active = active_workers(&inner, &doc_id);
        let outcome = f(&mut inner.state, &session.actor, &active)?;
        self.commit(&mut inner, outcome)
    }

    fn create_document(&self, req: &ApiRequest) -> Result<ApiResponse, ApiError> {
        #[derive(Deserialize)]
        struct Body {
            seed_outline: String,
            #[serde(default)]
            tasks: Vec<TitledTemplate>,
            #[serde(default)]
            rng_seed: Option<u64>,
        }
        let b: Body = body(req)?;
        let mut inner = self.lock();
        let session = self.authorize(&inner, req, None)?;
        if session.doc_id.is_some() {
            return Err(ApiError::unauthorized("session is already bound to a document"));
        }
        let outcome = inner.state.create_document(
            &session.actor,
            &b.seed_outline,
            &b.tasks,
            b.rng_seed,
            self.config.page_height,
        )?;
        let resp = self.commit(&mut inner, outcome)?;
        let doc_id = DocId::from(resp.body["doc_id"].as_str().expect("doc id in response"));
        inner.sessions.retain(|t, s| {
            Some(t.as_str()) == req.token.as_deref() || !(s.actor.role == Role::Author && s.doc_id.as_ref() == Some(&doc_id))
        });
        Self::bind(&mut inner, req, &doc_id);
        Ok(resp)
    }

    /// Ends the caller's session. Tasks every remaining worker has skipped
    /// are escalated.
    fn end_session(&self, req: &ApiRequest) -> Result<ApiResponse, ApiError> {
        let mut inner = self.lock();
        let session = self.authorize(&inner, req, None)?;
        inner.sessions.remove(req.token.as_deref().unwrap_or_default());
        if let (Role::Worker, Some(doc_id)) = (session.actor.role, &session.doc_id) {
            let active = active_workers(&inner, doc_id);
            let outcome = inner.state.escalate_check(doc_id, &active)?;
            return self.commit(&mut inner, outcome);
        }
        Ok(ApiResponse::ok(json!({})))
    }

    /// Persists the outcome's events, then publishes them. If the store
    /// fails, the state is rebuilt from the log so the failed command leaves
    /// no trace.
    fn commit(&self, inner: &mut Inner, outcome: Outcome) -> Result<ApiResponse, ApiError> {
        if outcome.events.is_empty() {
            return Ok(ApiResponse::ok(outcome.response));
        }
        let wall_time = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let first = inner.state.last_seq() + 1;
        let events: Vec<Event> = outcome
            .events
            .into_iter()
            .enumerate()
            .map(|(i, (doc_id, body))| Event { seq: first + i as u64, doc_id, body, wall_time })
            .collect();
        if let Err(e) = inner.store.append(&events) {
            inner.state = replay(&inner.log).expect("logged events replay");
            return Err(ApiError::storage(e.to_string()));
        }
        inner.state.set_last_seq(events.last().expect("non-empty").seq);
        inner.log.extend(events);
        self.appended.notify_all();
        Ok(ApiResponse::ok(outcome.response))
    }

    /// Events after `since` visible to the caller. With `wait` set, blocks up
    /// to that many milliseconds for at least one to arrive.
    fn poll_events(&self, req: &ApiRequest, doc: &str) -> Result<ApiResponse, ApiError> {
        let doc_id = DocId::from(doc);
        let since: u64 = query_num(req, "since")?.unwrap_or(0);
        let wait = query_num(req, "wait")?.unwrap_or(0).min(MAX_WAIT_MS);
        let deadline = Instant::now() + Duration::from_millis(wait);

        let mut inner = self.lock();
        let session = self.authorize(&inner, req, Some(&doc_id))?;
        inner.state.doc(&doc_id)?;
        Self::bind(&mut inner, req, &doc_id);
        loop {
            let start = (since as usize).min(inner.log.len());
            let visible: Vec<&Event> = inner.log[start..]
                .iter()
                .filter(|e| e.doc_id == doc_id && e.body.visible_to(session.actor.role, &session.actor.id))
                .collect();
            let now = Instant::now();
            if !visible.is_empty() || now >= deadline {
                let cursor = inner.state.last_seq().max(since);
                return Ok(ApiResponse::ok(json!({ "events": visible, "cursor": cursor })));
            }
            inner = self.appended.wait_timeout(inner, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
            // The session may have been revoked while waiting.
            self.authorize(&inner, req, Some(&doc_id))?;
        }
    }
}

fn active_workers(inner: &Inner, doc_id: &DocId) -> BTreeSet<ActorId> {
    inner
        .sessions
        .values()
        .filter(|s| s.actor.role == Role::Worker && s.doc_id.as_ref() == Some(doc_id))
        .map(|s| s.actor.id.clone())
        .collect()
}

fn status_name(status: EditStatus) -> &'static str {
    match status {
        EditStatus::Pending => "pending",
        EditStatus::Accepted => "accepted",
        EditStatus::Rejected => "rejected",
        EditStatus::Stale => "stale",
    }
}

fn body<T: DeserializeOwned>(req: &ApiRequest) -> Result<T, ApiError> {
    serde_json::from_value(req.body.clone()).map_err(|e| ApiError::bad_request(format!("invalid body: {e}")))
}

fn query_num(req: &ApiRequest, key: &str) -> Result<Option<u64>, ApiError> {
    req.query
        .get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().map_err(|_| ApiError::bad_request(format!("{key} must be a non-negative integer"))))
        .transpose()
}
