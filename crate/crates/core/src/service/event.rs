use serde::{Deserialize, Serialize};

use crate::comments::Anchor;
use crate::doc::BlockKind;
use crate::ids::{ActorId, BlockId, DocId, EditId, Role, SubmissionId, TaskId, ThreadId};
use crate::suggest::{Decision, EditSpec};

/// One entry of the append-only log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub doc_id: DocId,
    #[serde(flatten)]
    pub body: EventBody,
    /// Milliseconds since the Unix epoch. Informational; replay ignores it.
    pub wall_time: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignVia {
    /// Uniform draw from the document's seeded generator.
    Random,
    /// Worker picked the task explicitly.
    Claim,
    /// Author handed an escalated task to a worker.
    Reassign,
}

/// Event payloads. Each records the inputs of the operation and the outputs
/// it produced, so replay can re-run the operation and verify the outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    DocCreated {
        author_id: ActorId,
        seed_outline: String,
        rng_seed: u64,
        page_height: usize,
    },
    BlockDictated {
        author_id: ActorId,
        parent_id: BlockId,
        #[serde(default)]
        after_id: Option<BlockId>,
        block_kind: BlockKind,
        text: String,
        #[serde(default)]
        raw_token: Option<String>,
        block_id: BlockId,
        revision: u64,
        newly_stale: Vec<EditId>,
    },
    BlockDone {
        author_id: ActorId,
        block_id: BlockId,
        done: bool,
        revision: u64,
        newly_stale: Vec<EditId>,
    },
    EditProposed {
        edit_id: EditId,
        worker_id: ActorId,
        submission_id: SubmissionId,
        base_revision: u64,
        spec: EditSpec,
    },
    EditReviewed {
        edit_id: EditId,
        author_id: ActorId,
        worker_id: ActorId,
        decision: Decision,
        #[serde(default)]
        applied_revision: Option<u64>,
        newly_stale: Vec<EditId>,
        #[serde(default)]
        block_id: Option<BlockId>,
    },
    EditStale {
        edit_id: EditId,
        worker_id: ActorId,
    },
    CommentPosted {
        thread_id: ThreadId,
        /// Set when this message opened the thread.
        #[serde(default)]
        anchor: Option<Anchor>,
        author_id: ActorId,
        role: Role,
        text: String,
        #[serde(default)]
        raw_token: Option<String>,
        message_seq: u64,
    },
    ThreadResolved {
        thread_id: ThreadId,
        author_id: ActorId,
    },
    TaskSeeded {
        task_id: TaskId,
        description: String,
        #[serde(default)]
        target_section: Option<BlockId>,
    },
    TaskAssigned {
        task_id: TaskId,
        worker_id: ActorId,
        via: AssignVia,
    },
    TaskSkipped {
        task_id: TaskId,
        worker_id: ActorId,
    },
    TaskDone {
        task_id: TaskId,
        worker_id: ActorId,
    },
    TaskEscalated {
        task_id: TaskId,
        active_workers: Vec<ActorId>,
    },
}

impl EventBody {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EventBody::DocCreated { .. } => "doc_created",
            EventBody::BlockDictated { .. } => "block_dictated",
            EventBody::BlockDone { .. } => "block_done",
            EventBody::EditProposed { .. } => "edit_proposed",
            EventBody::EditReviewed { .. } => "edit_reviewed",
            EventBody::EditStale { .. } => "edit_stale",
            EventBody::CommentPosted { .. } => "comment_posted",
            EventBody::ThreadResolved { .. } => "thread_resolved",
            EventBody::TaskSeeded { .. } => "task_seeded",
            EventBody::TaskAssigned { .. } => "task_assigned",
            EventBody::TaskSkipped { .. } => "task_skipped",
            EventBody::TaskDone { .. } => "task_done",
            EventBody::TaskEscalated { .. } => "task_escalated",
        }
    }

    /// Whether a session with this role and actor receives the event when
    /// polling.
    pub fn visible_to(&self, role: Role, actor: &ActorId) -> bool {
        match role {
            Role::Author => matches!(
                self,
                EventBody::EditProposed { .. }
                    | EventBody::CommentPosted { role: Role::Worker, .. }
                    | EventBody::TaskEscalated { .. }
            ),
            Role::Worker => match self {
                EventBody::EditReviewed { worker_id, .. } | EventBody::EditStale { worker_id, .. } => {
                    worker_id == actor
                }
                EventBody::CommentPosted { role, .. } => *role == Role::Author,
                EventBody::TaskSeeded { .. }
                | EventBody::TaskAssigned { .. }
                | EventBody::TaskSkipped { .. }
                | EventBody::TaskDone { .. }
                | EventBody::TaskEscalated { .. } => true,
                _ => false,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_shape() {
        let event = Event {
            seq: 7,
            doc_id: "doc1".into(),
            body: EventBody::TaskDone { task_id: "t1".into(), worker_id: "w1".into() },
            wall_time: 0,
        };
        let json = serde_json::to_value(&event).unwrap();
        assert_eq!(json["kind"], "task_done");
        assert_eq!(json["payload"]["task_id"], "t1");
        assert_eq!(json["seq"], 7);
        let back: Event = serde_json::from_value(json).unwrap();
        assert_eq!(back, event);
    }

    #[test]
    fn visibility() {
        let reviewed = EventBody::EditReviewed {
            edit_id: "e1".into(),
            author_id: "a".into(),
            worker_id: "w1".into(),
            decision: Decision::Reject,
            applied_revision: None,
            newly_stale: vec![],
            block_id: None,
        };
        assert!(reviewed.visible_to(Role::Worker, &"w1".into()));
        assert!(!reviewed.visible_to(Role::Worker, &"w2".into()));
        assert!(!reviewed.visible_to(Role::Author, &"a".into()));
        let comment = |role| EventBody::CommentPosted {
            thread_id: "th1".into(),
            anchor: None,
            author_id: "x".into(),
            role,
            text: "hi".into(),
            raw_token: None,
            message_seq: 2,
        };
        assert!(comment(Role::Worker).visible_to(Role::Author, &"a".into()));
        assert!(!comment(Role::Worker).visible_to(Role::Worker, &"w".into()));
        assert!(comment(Role::Author).visible_to(Role::Worker, &"w".into()));
        assert!(!comment(Role::Author).visible_to(Role::Author, &"a".into()));
    }
}
