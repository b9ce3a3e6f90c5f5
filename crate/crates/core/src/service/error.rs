use serde_json::{json, Value};

use crate::comments::CommentError;
use crate::doc::DocError;
use crate::suggest::SuggestError;
use crate::tasks::TaskError;

/// An error response with a stable machine-readable code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    pub fn unauthorized(message: impl Into<String>) -> Self {
        ApiError::new(401, "unauthorized", message)
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(400, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(404, "not_found", message)
    }

    pub fn unknown_document(id: impl std::fmt::Display) -> Self {
        ApiError::new(404, "unknown_document", format!("unknown document {id}"))
    }

    pub fn storage(message: impl Into<String>) -> Self {
        ApiError::new(503, "storage_failure", message)
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "code": self.code, "message": self.message } })
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.status, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<DocError> for ApiError {
    fn from(e: DocError) -> Self {
        let (status, code) = match &e {
            DocError::MalformedOutline(_) => (400, "malformed_outline"),
            DocError::KeyOrderViolation { .. } => (400, "key_order_violation"),
            DocError::NoGap { .. } => (409, "no_gap"),
            DocError::InvalidKey(_) => (400, "invalid_key"),
            DocError::UnknownParent(_) => (404, "unknown_parent"),
            DocError::UnknownAnchor(_) => (404, "unknown_anchor"),
            DocError::UnknownBlock(_) => (404, "unknown_target"),
            DocError::KindMismatch { .. } => (422, "kind_mismatch"),
            DocError::HasChildren(_) => (409, "has_children"),
            DocError::DuplicateBlock(_) | DocError::DuplicateKey(_) => (409, "conflict"),
            DocError::Malformed(_) => (400, "malformed_document"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<SuggestError> for ApiError {
    fn from(e: SuggestError) -> Self {
        let (status, code) = match &e {
            SuggestError::UnknownTarget(_) => (404, "unknown_target"),
            SuggestError::KindMismatch(_) => (422, "kind_mismatch"),
            SuggestError::HasChildren(_) => (409, "has_children"),
            SuggestError::AlreadyResolved(_) => (409, "already_resolved"),
            SuggestError::StaleEdit(_) => (409, "stale_edit"),
            SuggestError::UnknownEdit(_) => (404, "unknown_edit"),
            SuggestError::DuplicateEdit(_) => (409, "conflict"),
            SuggestError::NotAuthor | SuggestError::NotWorker => (401, "unauthorized"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<CommentError> for ApiError {
    fn from(e: CommentError) -> Self {
        let (status, code) = match &e {
            CommentError::UnknownAnchor => (404, "unknown_anchor"),
            CommentError::EmptyText => (400, "empty_text"),
            CommentError::UnknownThread(_) => (404, "unknown_thread"),
            CommentError::ThreadResolved(_) => (409, "thread_resolved"),
            CommentError::NotAuthor => (401, "not_author"),
            CommentError::DuplicateThread(_) => (409, "conflict"),
        };
        ApiError::new(status, code, e.to_string())
    }
}

impl From<TaskError> for ApiError {
    fn from(e: TaskError) -> Self {
        let (status, code) = match &e {
            TaskError::UnknownTask(_) => (404, "unknown_task"),
            TaskError::NotAssignee(_) => (403, "not_assignee"),
            TaskError::AlreadyDone(_) => (409, "already_done"),
            TaskError::Unavailable(_) => (409, "task_unavailable"),
            TaskError::WorkerBusy(_) => (409, "worker_busy"),
            TaskError::NotEscalated(_) => (409, "not_escalated"),
            TaskError::UnknownTarget(_) => (404, "unknown_target"),
            TaskError::DuplicateTask(_) => (409, "conflict"),
        };
        ApiError::new(status, code, e.to_string())
    }
}
