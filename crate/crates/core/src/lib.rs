//! Crowd-orchestrated authoring from a constrained client.
//!
//! Crowd workers propose suggested edits against a structured document, a
//! single author reviews each change with rendered page context, and a
//! randomized skip-able task queue spreads work across workers. Every state
//! change is recorded in an append-only event log that can be replayed to
//! reconstruct the server exactly.

pub mod comments;
pub mod doc;
pub mod ids;
pub mod service;
pub mod sim;
pub mod suggest;
pub mod tasks;

pub use doc::{
    order_key_between, paginate, parse_seed_outline, render_canonical, Block, BlockKind, DocError,
    DocumentTree, ExportFormat, OrderKey, Page,
};
pub use ids::{Actor, ActorId, BlockId, DocId, EditId, Role, SubmissionId, TaskId, ThreadId};
pub use comments::{Anchor, CommentBook, CommentError, CommentThread, Message};
pub use service::{
    replay, ApiError, ApiRequest, ApiResponse, Event, EventBody, Method, ServerState, Service, ServiceConfig,
};
pub use suggest::{
    classify_metrics, ConflictKey, ContextSnapshot, Decision, EditKind, EditSpec, EditStatus, MetricsSummary,
    ReviewOutcome, SuggestError, SuggestedEdit, SuggestionEngine,
};
pub use tasks::{Task, TaskError, TaskQueue, TaskState, TaskTemplate};
