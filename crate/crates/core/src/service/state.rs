//! Server state, the operations that change it, and log replay.
//!
//! Every command runs a module operation directly against the state. Module
//! operations validate before they mutate, so a failed command leaves the
//! state untouched. Each successful command yields events carrying both the
//! operation's inputs and its outputs; [`ServerState::apply`] re-runs the
//! operation from the inputs and checks it reproduces the recorded outputs.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{ApiError, AssignVia, Event, EventBody};
use crate::comments::{Anchor, CommentBook};
use crate::doc::{parse_seed_outline, BlockKind, DocumentTree, StructuredDocument};
use crate::ids::{Actor, ActorId, BlockId, DocId, EditId, SubmissionId, TaskId, ThreadId};
use crate::suggest::{Decision, EditSpec, EditStatus, SuggestionEngine};
use crate::tasks::{Task, TaskQueue, TaskTemplate};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("malformed log at seq {seq}: {reason}")]
    MalformedLog { seq: u64, reason: String },
}

/// Everything the server knows about one document.
#[derive(Debug, Clone)]
pub struct DocState {
    pub tree: DocumentTree,
    pub engine: SuggestionEngine,
    pub comments: CommentBook,
    pub tasks: TaskQueue,
    pub author_id: ActorId,
    pub rng_seed: u64,
    rng: ChaCha8Rng,
}

impl DocState {
    fn new(tree: DocumentTree, author_id: ActorId, rng_seed: u64, page_height: usize) -> Self {
        DocState {
            tree,
            engine: SuggestionEngine::new(page_height),
            comments: CommentBook::default(),
            tasks: TaskQueue::default(),
            author_id,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        }
    }

    fn digest_view(&self) -> Value {
        json!({
            "tree": StructuredDocument::from(&self.tree),
            "engine": self.engine,
            "comments": self.comments,
            "tasks": self.tasks,
            "author_id": self.author_id,
            "rng_seed": self.rng_seed,
            "rng_word_pos": self.rng.get_word_pos().to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub docs: u64,
    pub edits: u64,
    pub threads: u64,
    pub tasks: u64,
}

/// A task template whose target is named by section title.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TitledTemplate {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_section_title: Option<String>,
}

/// Result of a successful command: events to append and the response body.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub events: Vec<(DocId, EventBody)>,
    pub response: Value,
}

#[derive(Debug, Clone, Default)]
pub struct ServerState {
    docs: BTreeMap<DocId, DocState>,
    counters: Counters,
    thread_docs: BTreeMap<ThreadId, DocId>,
    task_docs: BTreeMap<TaskId, DocId>,
    last_seq: u64,
}

fn stale_events(engine: &SuggestionEngine, ids: &[EditId], doc: &DocId) -> Vec<(DocId, EventBody)> {
    ids.iter()
        .map(|id| {
            let worker_id = engine.get(id).map(|e| e.worker_id.clone()).unwrap_or_else(|| "".into());
            (doc.clone(), EventBody::EditStale { edit_id: id.clone(), worker_id })
        })
        .collect()
}

impl ServerState {
    pub fn docs(&self) -> &BTreeMap<DocId, DocState> {
        &self.docs
    }

    pub fn doc(&self, id: &DocId) -> Result<&DocState, ApiError> {
        self.docs.get(id).ok_or_else(|| ApiError::unknown_document(id))
    }

    fn doc_mut(&mut self, id: &DocId) -> Result<&mut DocState, ApiError> {
        self.docs.get_mut(id).ok_or_else(|| ApiError::unknown_document(id))
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn thread_doc(&self, id: &ThreadId) -> Option<&DocId> {
        self.thread_docs.get(id)
    }

    pub fn task_doc(&self, id: &TaskId) -> Option<&DocId> {
        self.task_docs.get(id)
    }

    /// SHA-256 over a canonical serialization of the whole state.
    pub fn digest(&self) -> String {
        let docs: BTreeMap<&DocId, Value> = self.docs.iter().map(|(k, v)| (k, v.digest_view())).collect();
        let view = json!({
            "last_seq": self.last_seq,
            "counters": self.counters,
            "docs": docs,
            "thread_docs": self.thread_docs,
            "task_docs": self.task_docs,
        });
        let bytes = serde_json::to_vec(&view).expect("state view serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub(crate) fn set_last_seq(&mut self, seq: u64) {
        self.last_seq = seq;
    }

    // ---- commands -------------------------------------------------------

    pub fn create_document(
        &mut self,
        author: &Actor,
        seed_outline: &str,
        templates: &[TitledTemplate],
        rng_seed: Option<u64>,
        page_height: usize,
    ) -> Result<Outcome, ApiError> {
        require_author(author)?;
        let n = self.counters.docs + 1;
        let doc_id = DocId(format!("doc{n}"));
        let rng_seed = rng_seed.unwrap_or(n);
        let tree = parse_seed_outline(doc_id.clone(), seed_outline)?;
        let resolved = resolve_templates(&tree, templates)?;
        let mut state = DocState::new(tree, author.id.clone(), rng_seed, page_height);

        // Each task records the seq of its own task_seeded event, which
        // follows doc_created.
        let mut task_counter = self.counters.tasks;
        let mut tasks = Vec::with_capacity(resolved.len());
        for (i, template) in resolved.iter().enumerate() {
            let created = self.last_seq + 2 + i as u64;
            let seeded = state.tasks.seed_tasks(
                &state.tree,
                std::slice::from_ref(template),
                || {
                    task_counter += 1;
                    TaskId(format!("t{task_counter}"))
                },
                created,
            )?;
            tasks.extend(seeded);
        }

        let mut events = vec![(
            doc_id.clone(),
            EventBody::DocCreated {
                author_id: author.id.clone(),
                seed_outline: seed_outline.to_owned(),
                rng_seed,
                page_height,
            },
        )];
        for task in &tasks {
            self.task_docs.insert(task.id.clone(), doc_id.clone());
            events.push((
                doc_id.clone(),
                EventBody::TaskSeeded {
                    task_id: task.id.clone(),
                    description: task.description.clone(),
                    target_section: task.target_section.clone(),
                },
            ));
        }
        self.counters.docs = n;
        self.counters.tasks = task_counter;
        self.docs.insert(doc_id.clone(), state);
        let task_ids: Vec<&TaskId> = tasks.iter().map(|t| &t.id).collect();
        Ok(Outcome {
            events,
            response: json!({ "doc_id": doc_id, "revision": 0, "task_ids": task_ids }),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn dictate(
        &mut self,
        doc_id: &DocId,
        author: &Actor,
        parent: &BlockId,
        after: Option<&BlockId>,
        kind: BlockKind,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<Outcome, ApiError> {
        let doc = self.doc_mut(doc_id)?;
        let (block_id, revision, stale) =
            doc.engine.dictate(&mut doc.tree, author, parent, after, kind, text, raw_token.clone())?;
        let mut events = vec![(
            doc_id.clone(),
            EventBody::BlockDictated {
                author_id: author.id.clone(),
                parent_id: parent.clone(),
                after_id: after.cloned(),
                block_kind: kind,
                text: text.to_owned(),
                raw_token,
                block_id: block_id.clone(),
                revision,
                newly_stale: stale.clone(),
            },
        )];
        events.extend(stale_events(&doc.engine, &stale, doc_id));
        Ok(Outcome { events, response: json!({ "block_id": block_id, "revision": revision }) })
    }

    pub fn toggle_done(
        &mut self,
        doc_id: &DocId,
        author: &Actor,
        block_id: &BlockId,
        done: bool,
    ) -> Result<Outcome, ApiError> {
        let doc = self.doc_mut(doc_id)?;
        let (revision, stale) = doc.engine.toggle_done(&mut doc.tree, author, block_id, done)?;
        let mut events = vec![(
            doc_id.clone(),
            EventBody::BlockDone {
                author_id: author.id.clone(),
                block_id: block_id.clone(),
                done,
                revision,
                newly_stale: stale.clone(),
            },
        )];
        events.extend(stale_events(&doc.engine, &stale, doc_id));
        Ok(Outcome { events, response: json!({ "revision": revision }) })
    }

    pub fn propose(
        &mut self,
        doc_id: &DocId,
        worker: &Actor,
        submission_id: SubmissionId,
        spec: EditSpec,
    ) -> Result<Outcome, ApiError> {
        let n = self.counters.edits + 1;
        let edit_id = EditId(format!("e{n}"));
        let doc = self.doc_mut(doc_id)?;
        let edit = doc.engine.propose(&doc.tree, edit_id.clone(), worker, submission_id, spec)?;
        let event = EventBody::EditProposed {
            edit_id: edit_id.clone(),
            worker_id: worker.id.clone(),
            submission_id: edit.submission_id.clone(),
            base_revision: edit.base_revision,
            spec: edit.spec.clone(),
        };
        self.counters.edits = n;
        Ok(Outcome { events: vec![(doc_id.clone(), event)], response: json!({ "edit_id": edit_id }) })
    }

    /// Proposes a batch of edits as one submission. Either every edit is
    /// recorded or none is.
    pub fn propose_submission(
        &mut self,
        doc_id: &DocId,
        worker: &Actor,
        submission_id: Option<SubmissionId>,
        specs: Vec<EditSpec>,
    ) -> Result<Outcome, ApiError> {
        if specs.is_empty() {
            return Err(ApiError::bad_request("a submission needs at least one edit"));
        }
        let first = self.counters.edits + 1;
        let submission_id = submission_id.unwrap_or_else(|| SubmissionId(format!("sub-e{first}")));
        let mut events = Vec::with_capacity(specs.len());
        let mut ids = Vec::with_capacity(specs.len());
        for spec in specs {
            match self.propose(doc_id, worker, submission_id.clone(), spec) {
                Ok(mut out) => {
                    ids.push(out.response["edit_id"].take());
                    events.append(&mut out.events);
                }
                Err(e) => {
                    if let Some(doc) = self.docs.get_mut(doc_id) {
                        for id in (first..=self.counters.edits).map(|n| EditId(format!("e{n}"))) {
                            doc.engine.withdraw(&id);
                        }
                    }
                    self.counters.edits = first - 1;
                    return Err(e);
                }
            }
        }
        Ok(Outcome { events, response: json!({ "submission_id": submission_id, "edit_ids": ids }) })
    }

    pub fn review(
        &mut self,
        doc_id: &DocId,
        author: &Actor,
        edit_id: &EditId,
        decision: Decision,
    ) -> Result<Outcome, ApiError> {
        let doc = self.doc_mut(doc_id)?;
        let outcome = doc.engine.review(&mut doc.tree, author, edit_id, decision)?;
        let worker_id = doc.engine.get(edit_id).expect("reviewed edit exists").worker_id.clone();
        let mut events = vec![(
            doc_id.clone(),
            EventBody::EditReviewed {
                edit_id: edit_id.clone(),
                author_id: author.id.clone(),
                worker_id,
                decision,
                applied_revision: outcome.applied_revision,
                newly_stale: outcome.newly_stale.clone(),
                block_id: outcome.block_id.clone(),
            },
        )];
        events.extend(stale_events(&doc.engine, &outcome.newly_stale, doc_id));
        Ok(Outcome { events, response: serde_json::to_value(&outcome).expect("outcome serializes") })
    }

    pub fn open_thread(
        &mut self,
        doc_id: &DocId,
        actor: &Actor,
        anchor: Anchor,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<Outcome, ApiError> {
        let n = self.counters.threads + 1;
        let thread_id = ThreadId(format!("th{n}"));
        let doc = self.doc_mut(doc_id)?;
        doc.comments.open_thread(
            thread_id.clone(),
            anchor.clone(),
            (&doc.tree, &doc.engine),
            actor,
            text,
            raw_token.clone(),
        )?;
        self.counters.threads = n;
        self.thread_docs.insert(thread_id.clone(), doc_id.clone());
        let event = EventBody::CommentPosted {
            thread_id: thread_id.clone(),
            anchor: Some(anchor),
            author_id: actor.id.clone(),
            role: actor.role,
            text: text.to_owned(),
            raw_token,
            message_seq: 1,
        };
        Ok(Outcome { events: vec![(doc_id.clone(), event)], response: json!({ "thread_id": thread_id }) })
    }

    pub fn reply(
        &mut self,
        thread_id: &ThreadId,
        actor: &Actor,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<Outcome, ApiError> {
        let doc_id = self.thread_doc_or_err(thread_id)?;
        let doc = self.doc_mut(&doc_id)?;
        let seq = doc.comments.reply(thread_id, actor, text, raw_token.clone())?.seq;
        let event = EventBody::CommentPosted {
            thread_id: thread_id.clone(),
            anchor: None,
            author_id: actor.id.clone(),
            role: actor.role,
            text: text.to_owned(),
            raw_token,
            message_seq: seq,
        };
        Ok(Outcome { events: vec![(doc_id, event)], response: json!({ "seq": seq }) })
    }

    pub fn resolve_thread(&mut self, thread_id: &ThreadId, author: &Actor) -> Result<Outcome, ApiError> {
        let doc_id = self.thread_doc_or_err(thread_id)?;
        let doc = self.doc_mut(&doc_id)?;
        let already = doc.comments.get(thread_id).is_some_and(|t| t.resolved);
        doc.comments.resolve_thread(thread_id, author)?;
        let events = if already {
            Vec::new()
        } else {
            vec![(doc_id, EventBody::ThreadResolved { thread_id: thread_id.clone(), author_id: author.id.clone() })]
        };
        Ok(Outcome { events, response: json!({}) })
    }

    /// Random pull, or a claim of one specific task when `claim` is set.
    pub fn next_task(
        &mut self,
        doc_id: &DocId,
        worker: &Actor,
        claim: Option<&TaskId>,
    ) -> Result<Outcome, ApiError> {
        require_worker(worker)?;
        let doc = self.doc_mut(doc_id)?;
        let picked: Option<(Task, bool)> = match claim {
            Some(task_id) => {
                if doc.tasks.get(task_id).is_none() {
                    return Err(crate::tasks::TaskError::UnknownTask(task_id.clone()).into());
                }
                Some(doc.tasks.claim(&worker.id, task_id)?)
            }
            None => doc.tasks.next_task(&worker.id, &mut doc.rng),
        };
        let Some((task, fresh)) = picked else {
            return Ok(Outcome { events: Vec::new(), response: Value::Null });
        };
        let events = if fresh {
            let via = if claim.is_some() { AssignVia::Claim } else { AssignVia::Random };
            vec![(
                doc_id.clone(),
                EventBody::TaskAssigned { task_id: task.id.clone(), worker_id: worker.id.clone(), via },
            )]
        } else {
            Vec::new()
        };
        Ok(Outcome { events, response: serde_json::to_value(&task).expect("task serializes") })
    }

    /// Skips a task, then escalates whatever every active worker has skipped.
    pub fn skip_task(
        &mut self,
        task_id: &TaskId,
        worker: &Actor,
        active_workers: &BTreeSet<ActorId>,
    ) -> Result<Outcome, ApiError> {
        require_worker(worker)?;
        let doc_id = self.task_doc_or_err(task_id)?;
        let doc = self.doc_mut(&doc_id)?;
        doc.tasks.skip_task(&worker.id, task_id)?;
        let mut events = vec![(
            doc_id.clone(),
            EventBody::TaskSkipped { task_id: task_id.clone(), worker_id: worker.id.clone() },
        )];
        let escalated = doc.tasks.escalate_check(active_workers);
        let active: Vec<ActorId> = active_workers.iter().cloned().collect();
        events.extend(escalated.iter().map(|id| {
            (doc_id.clone(), EventBody::TaskEscalated { task_id: id.clone(), active_workers: active.clone() })
        }));
        Ok(Outcome { events, response: json!({ "escalated": escalated }) })
    }

    pub fn escalate_check(
        &mut self,
        doc_id: &DocId,
        active_workers: &BTreeSet<ActorId>,
    ) -> Result<Outcome, ApiError> {
        let doc = self.doc_mut(doc_id)?;
        let escalated = doc.tasks.escalate_check(active_workers);
        let active: Vec<ActorId> = active_workers.iter().cloned().collect();
        let events = escalated
            .iter()
            .map(|id| {
                (doc_id.clone(), EventBody::TaskEscalated { task_id: id.clone(), active_workers: active.clone() })
            })
            .collect();
        Ok(Outcome { events, response: json!({ "escalated": escalated }) })
    }

    pub fn complete_task(&mut self, task_id: &TaskId, worker: &Actor) -> Result<Outcome, ApiError> {
        require_worker(worker)?;
        let doc_id = self.task_doc_or_err(task_id)?;
        self.doc_mut(&doc_id)?.tasks.complete_task(&worker.id, task_id)?;
        let event = EventBody::TaskDone { task_id: task_id.clone(), worker_id: worker.id.clone() };
        Ok(Outcome { events: vec![(doc_id, event)], response: json!({}) })
    }

    pub fn reassign_task(
        &mut self,
        task_id: &TaskId,
        author: &Actor,
        worker: &ActorId,
    ) -> Result<Outcome, ApiError> {
        require_author(author)?;
        let doc_id = self.task_doc_or_err(task_id)?;
        let task = self.doc_mut(&doc_id)?.tasks.reassign(task_id, worker)?;
        let event = EventBody::TaskAssigned {
            task_id: task_id.clone(),
            worker_id: worker.clone(),
            via: AssignVia::Reassign,
        };
        Ok(Outcome {
            events: vec![(doc_id, event)],
            response: serde_json::to_value(&task).expect("task serializes"),
        })
    }

    fn thread_doc_or_err(&self, id: &ThreadId) -> Result<DocId, ApiError> {
        self.thread_docs
            .get(id)
            .cloned()
            .ok_or_else(|| crate::comments::CommentError::UnknownThread(id.clone()).into())
    }

    fn task_doc_or_err(&self, id: &TaskId) -> Result<DocId, ApiError> {
        self.task_docs
            .get(id)
            .cloned()
            .ok_or_else(|| crate::tasks::TaskError::UnknownTask(id.clone()).into())
    }

    // ---- replay ---------------------------------------------------------

    /// Applies one logged event, re-running its operation and checking the
    /// recorded outputs.
    pub fn apply(&mut self, event: &Event) -> Result<(), ReplayError> {
        let seq = event.seq;
        let bad = |reason: String| ReplayError::MalformedLog { seq, reason };
        if seq != self.last_seq + 1 {
            return Err(bad(format!("expected seq {}", self.last_seq + 1)));
        }
        let doc_id = &event.doc_id;
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(bad(format!("{what} does not match the log"))) };

        match &event.body {
            EventBody::DocCreated { author_id, seed_outline, rng_seed, page_height } => {
                let n = self.counters.docs + 1;
                check(doc_id.0 == format!("doc{n}"), "document id")?;
                let tree = parse_seed_outline(doc_id.clone(), seed_outline).map_err(|e| bad(e.to_string()))?;
                self.docs.insert(doc_id.clone(), DocState::new(tree, author_id.clone(), *rng_seed, *page_height));
                self.counters.docs = n;
            }
            EventBody::TaskSeeded { task_id, description, target_section } => {
                let n = self.counters.tasks + 1;
                check(task_id.0 == format!("t{n}"), "task id")?;
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let template = TaskTemplate { description: description.clone(), target_section: target_section.clone() };
                doc.tasks
                    .seed_tasks(&doc.tree, &[template], || task_id.clone(), seq)
                    .map_err(|e| bad(e.to_string()))?;
                self.counters.tasks = n;
                self.task_docs.insert(task_id.clone(), doc_id.clone());
            }
            EventBody::BlockDictated {
                author_id,
                parent_id,
                after_id,
                block_kind,
                text,
                raw_token,
                block_id,
                revision,
                newly_stale,
            } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let (id, rev, stale) = doc
                    .engine
                    .dictate(
                        &mut doc.tree,
                        &Actor::author(author_id.clone()),
                        parent_id,
                        after_id.as_ref(),
                        *block_kind,
                        text,
                        raw_token.clone(),
                    )
                    .map_err(|e| bad(e.to_string()))?;
                check(&id == block_id && rev == *revision && &stale == newly_stale, "dictation outcome")?;
            }
            EventBody::BlockDone { author_id, block_id, done, revision, newly_stale } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let (rev, stale) = doc
                    .engine
                    .toggle_done(&mut doc.tree, &Actor::author(author_id.clone()), block_id, *done)
                    .map_err(|e| bad(e.to_string()))?;
                check(rev == *revision && &stale == newly_stale, "done-flag outcome")?;
            }
            EventBody::EditProposed { edit_id, worker_id, submission_id, base_revision, spec } => {
                let n = self.counters.edits + 1;
                check(edit_id.0 == format!("e{n}"), "edit id")?;
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let edit = doc
                    .engine
                    .propose(
                        &doc.tree,
                        edit_id.clone(),
                        &Actor::worker(worker_id.clone()),
                        submission_id.clone(),
                        spec.clone(),
                    )
                    .map_err(|e| bad(e.to_string()))?;
                check(edit.base_revision == *base_revision, "base revision")?;
                self.counters.edits = n;
            }
            EventBody::EditReviewed {
                edit_id,
                author_id,
                worker_id,
                decision,
                applied_revision,
                newly_stale,
                block_id,
            } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let out = doc
                    .engine
                    .review(&mut doc.tree, &Actor::author(author_id.clone()), edit_id, *decision)
                    .map_err(|e| bad(e.to_string()))?;
                let owner = &doc.engine.get(edit_id).expect("reviewed edit exists").worker_id;
                check(
                    owner == worker_id
                        && &out.applied_revision == applied_revision
                        && &out.newly_stale == newly_stale
                        && &out.block_id == block_id,
                    "review outcome",
                )?;
            }
            EventBody::EditStale { edit_id, worker_id } => {
                let doc = self.docs.get(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let edit = doc.engine.get(edit_id).ok_or_else(|| bad("unknown edit".into()))?;
                check(edit.status == EditStatus::Stale && &edit.worker_id == worker_id, "stale edit")?;
            }
            EventBody::CommentPosted { thread_id, anchor, author_id, role, text, raw_token, message_seq } => {
                let actor = Actor { id: author_id.clone(), role: *role };
                match anchor {
                    Some(anchor) => {
                        let n = self.counters.threads + 1;
                        check(thread_id.0 == format!("th{n}") && *message_seq == 1, "thread id")?;
                        let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                        doc.comments
                            .open_thread(
                                thread_id.clone(),
                                anchor.clone(),
                                (&doc.tree, &doc.engine),
                                &actor,
                                text,
                                raw_token.clone(),
                            )
                            .map_err(|e| bad(e.to_string()))?;
                        self.counters.threads = n;
                        self.thread_docs.insert(thread_id.clone(), doc_id.clone());
                    }
                    None => {
                        let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                        let msg = doc
                            .comments
                            .reply(thread_id, &actor, text, raw_token.clone())
                            .map_err(|e| bad(e.to_string()))?;
                        check(msg.seq == *message_seq, "message seq")?;
                    }
                }
            }
            EventBody::ThreadResolved { thread_id, author_id } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                doc.comments
                    .resolve_thread(thread_id, &Actor::author(author_id.clone()))
                    .map_err(|e| bad(e.to_string()))?;
            }
            EventBody::TaskAssigned { task_id, worker_id, via } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let got = match via {
                    AssignVia::Random => doc.tasks.next_task(worker_id, &mut doc.rng).and_then(|(t, fresh)| fresh.then_some(t)),
                    AssignVia::Claim => doc.tasks.claim(worker_id, task_id).ok().and_then(|(t, fresh)| fresh.then_some(t)),
                    AssignVia::Reassign => doc.tasks.reassign(task_id, worker_id).ok(),
                };
                check(got.is_some_and(|t| &t.id == task_id), "task assignment")?;
            }
            EventBody::TaskSkipped { task_id, worker_id } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                doc.tasks.skip_task(worker_id, task_id).map_err(|e| bad(e.to_string()))?;
            }
            EventBody::TaskDone { task_id, worker_id } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                doc.tasks.complete_task(worker_id, task_id).map_err(|e| bad(e.to_string()))?;
            }
            EventBody::TaskEscalated { task_id, active_workers } => {
                let doc = self.docs.get_mut(doc_id).ok_or_else(|| bad("unknown document".into()))?;
                let active: BTreeSet<ActorId> = active_workers.iter().cloned().collect();
                doc.tasks.escalate(task_id, &active).map_err(|e| bad(e.to_string()))?;
            }
        }
        self.last_seq = seq;
        Ok(())
    }
}

/// Rebuilds server state from a gap-free log starting at seq 1.
pub fn replay(events: &[Event]) -> Result<ServerState, ReplayError> {
    let mut state = ServerState::default();
    for event in events {
        state.apply(event)?;
    }
    Ok(state)
}

fn require_author(actor: &Actor) -> Result<(), ApiError> {
    if actor.role == crate::ids::Role::Author {
        Ok(())
    } else {
        Err(ApiError::unauthorized("author role required"))
    }
}

fn require_worker(actor: &Actor) -> Result<(), ApiError> {
    if actor.role == crate::ids::Role::Worker {
        Ok(())
    } else {
        Err(ApiError::unauthorized("worker role required"))
    }
}

fn resolve_templates(
    tree: &DocumentTree,
    templates: &[TitledTemplate],
) -> Result<Vec<TaskTemplate>, ApiError> {
    let sections = tree.children(&BlockId::root());
    templates
        .iter()
        .map(|t| {
            let target_section = match &t.target_section_title {
                None => None,
                Some(title) => Some(
                    sections
                        .iter()
                        .find(|s| s.text.trim() == title.trim())
                        .map(|s| s.id.clone())
                        .ok_or_else(|| ApiError::new(404, "unknown_target", format!("no section titled {title:?}")))?,
                ),
            };
            Ok(TaskTemplate { description: t.description.clone(), target_section })
        })
        .collect()
}
