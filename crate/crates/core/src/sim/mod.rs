//! Scripted crowd simulation against the service.
//!
//! A [`Transcript`] is a header naming the actors plus a list of
//! [`Action`]s, each one API call made by one actor. Strings in an action may
//! refer to `${name}` variables bound from earlier responses; `${cursor}` is
//! the acting actor's event cursor. Running a transcript yields a
//! [`SimReport`].

mod driver;
mod e2e;
mod fixture;
mod random;
mod workers;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use driver::Runner;
pub use e2e::{e2e_outline, run_e2e, E2eConfig};
pub use fixture::{fixture_paper_scale, PAPER_SCALE_TARGET};
pub use random::random_transcript;
pub use workers::gen_expand_bullets_worker;

use crate::ids::{ActorId, DocId, Role, TaskId};
use crate::suggest::MetricsSummary;
use crate::tasks::TaskState;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub id: ActorId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Header {
    /// Seed the transcript was generated from.
    pub seed: u64,
    pub actors: Vec<ActorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub virtual_time: u64,
    pub actor_id: ActorId,
    /// Filled in from the header when recorded; checked against it on run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    /// `METHOD /path?query`, e.g. `POST /documents/${doc}/edits`.
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub payload: Value,
    /// Variables to bind from the response: name to dotted path.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bind: BTreeMap<String, String>,
    /// Error code the call is expected to fail with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_error: Option<String>,
}

impl Action {
    pub fn new(actor: impl Into<ActorId>, endpoint: impl Into<String>, payload: Value) -> Self {
        Action {
            virtual_time: 0,
            actor_id: actor.into(),
            role: None,
            endpoint: endpoint.into(),
            payload,
            bind: BTreeMap::new(),
            expect_error: None,
        }
    }

    pub fn bind(mut self, var: &str, path: &str) -> Self {
        self.bind.insert(var.to_owned(), path.to_owned());
        self
    }

    pub fn expect_error(mut self, code: &str) -> Self {
        self.expect_error = Some(code.to_owned());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub header: Header,
    pub actions: Vec<Action>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(Header),
    Action(Action),
}

impl Transcript {
    /// One JSON record per line, header first.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Record::Header(self.header.clone());
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for action in &self.actions {
            let rec = Record::Action(action.clone());
            out.push_str(&serde_json::to_string(&rec).expect("action serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SimError> {
        let mut header = None;
        let mut actions = Vec::new();
        for (idx, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| SimError::Transcript(format!("line {}: {e}", idx + 1)))?;
            match rec {
                Record::Header(h) if header.is_none() && actions.is_empty() => header = Some(h),
                Record::Header(_) => {
                    return Err(SimError::Transcript(format!("line {}: unexpected header", idx + 1)))
                }
                Record::Action(a) => actions.push(a),
            }
        }
        let header = header.ok_or_else(|| SimError::Transcript("missing header".into()))?;
        Ok(Transcript { header, actions })
    }

    pub fn role_of(&self, actor: &ActorId) -> Option<Role> {
        self.header.actors.iter().find(|a| &a.id == actor).map(|a| a.role)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub index: usize,
    pub actor_id: ActorId,
    pub endpoint: String,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub final_digest: String,
    /// The first document the transcript created.
    pub doc_id: Option<DocId>,
    pub metrics: Option<MetricsSummary>,
    pub errors_encountered: Vec<ErrorRecord>,
    pub tasks_outcome: BTreeMap<TaskId, TaskState>,
    pub pending_edits: usize,
    /// Sequence numbers each actor received from event polls, in order.
    pub consumed: BTreeMap<ActorId, Vec<u64>>,
}

impl SimReport {
    /// Number of tasks in each state.
    pub fn task_counts(&self) -> BTreeMap<TaskState, usize> {
        let mut out = BTreeMap::new();
        for state in self.tasks_outcome.values() {
            *out.entry(*state).or_default() += 1;
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("bad transcript: {0}")]
    Transcript(String),
    #[error("action {index} ({endpoint}): {reason}")]
    Action { index: usize, endpoint: String, reason: String },
}
