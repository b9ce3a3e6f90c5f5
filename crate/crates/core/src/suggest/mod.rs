//! Suggested edits: proposal, author review, staleness tracking.
//!
//! Workers never touch the canonical document. Each change they make becomes
//! a [`SuggestedEdit`] that stays pending until the author accepts or rejects
//! it. Accepting an edit mutates the document and marks every other pending
//! edit whose target overlaps the mutation as stale; stale edits are terminal
//! and have to be proposed again against the new revision.
//!
//! Overlap is tracked with [`ConflictKey`]s rather than raw block sets so that
//! inserts into different slots under the same parent commute:
//!
//! | edit            | references                                   | mutates                         |
//! |-----------------|----------------------------------------------|---------------------------------|
//! | insert `(p, a)` | `Block(p)`, `Block(a)`, `Slot(p, a)`         | `Slot(p, a)`, `Children(p)`     |
//! | replace `b`     | `Block(b)`                                   | `Block(b)`                      |
//! | format `b`      | `Block(b)`                                   | `Block(b)`                      |
//! | delete `b`      | `Block(b)`, `Children(b)`                    | `Block(b)`                      |

mod context;
mod metrics;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{BlockKind, DocError, DocumentTree, OrderKey, DEFAULT_PAGE_HEIGHT};
use crate::ids::{Actor, ActorId, BlockId, EditId, Role, SubmissionId};

pub use context::{render_context, ContextSnapshot};
pub use metrics::{classify_metrics, MetricsError, MetricsSummary};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SuggestError {
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("kind mismatch: {0}")]
    KindMismatch(String),
    #[error("block {0} has children and cannot be deleted")]
    HasChildren(BlockId),
    #[error("edit {0} is already resolved")]
    AlreadyResolved(EditId),
    #[error("edit {0} is stale")]
    StaleEdit(EditId),
    #[error("unknown edit {0}")]
    UnknownEdit(EditId),
    #[error("edit id {0} is already in use")]
    DuplicateEdit(EditId),
    #[error("only the author may do this")]
    NotAuthor,
    #[error("only workers may propose edits")]
    NotWorker,
}

impl SuggestError {
    fn from_doc(err: DocError) -> Self {
        match err {
            DocError::UnknownParent(id) | DocError::UnknownAnchor(id) | DocError::UnknownBlock(id) => {
                SuggestError::UnknownTarget(id.to_string())
            }
            DocError::HasChildren(id) => SuggestError::HasChildren(id),
            DocError::KindMismatch { kind, parent } => {
                SuggestError::KindMismatch(format!("{kind} under {parent}"))
            }
            other => SuggestError::KindMismatch(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    Insert,
    Replace,
    Delete,
    Format,
}

/// What a suggested edit would change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditSpec {
    Insert {
        parent_id: BlockId,
        #[serde(default)]
        after_id: Option<BlockId>,
        block_kind: BlockKind,
        text: String,
    },
    Replace {
        block_id: BlockId,
        text: String,
    },
    Delete {
        block_id: BlockId,
    },
    Format {
        block_id: BlockId,
        done: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "key", rename_all = "snake_case")]
pub enum ConflictKey {
    Block { id: BlockId },
    Slot { parent: BlockId, after: Option<BlockId> },
    Children { parent: BlockId },
}

impl ConflictKey {
    pub fn block(id: &BlockId) -> Self {
        ConflictKey::Block { id: id.clone() }
    }

    /// Keys mutated by placing a block into a slot.
    pub fn insertion(parent: &BlockId, after: Option<&BlockId>) -> Vec<Self> {
        vec![
            ConflictKey::Slot { parent: parent.clone(), after: after.cloned() },
            ConflictKey::Children { parent: parent.clone() },
        ]
    }
}

impl EditSpec {
    pub fn kind(&self) -> EditKind {
        match self {
            EditSpec::Insert { .. } => EditKind::Insert,
            EditSpec::Replace { .. } => EditKind::Replace,
            EditSpec::Delete { .. } => EditKind::Delete,
            EditSpec::Format { .. } => EditKind::Format,
        }
    }

    /// Existing blocks the edit names as its target or anchor.
    pub fn referenced_blocks(&self) -> BTreeSet<BlockId> {
        match self {
            EditSpec::Insert { parent_id, after_id, .. } => {
                let mut set = BTreeSet::from([parent_id.clone()]);
                set.extend(after_id.iter().cloned());
                set
            }
            EditSpec::Replace { block_id, .. }
            | EditSpec::Delete { block_id }
            | EditSpec::Format { block_id, .. } => BTreeSet::from([block_id.clone()]),
        }
    }

    pub fn references(&self) -> Vec<ConflictKey> {
        match self {
            EditSpec::Insert { parent_id, after_id, .. } => {
                let mut keys = vec![ConflictKey::block(parent_id)];
                if let Some(a) = after_id {
                    keys.push(ConflictKey::block(a));
                }
                keys.push(ConflictKey::Slot { parent: parent_id.clone(), after: after_id.clone() });
                keys
            }
            EditSpec::Replace { block_id, .. } | EditSpec::Format { block_id, .. } => {
                vec![ConflictKey::block(block_id)]
            }
            EditSpec::Delete { block_id } => vec![
                ConflictKey::block(block_id),
                ConflictKey::Children { parent: block_id.clone() },
            ],
        }
    }

    pub fn mutates(&self) -> Vec<ConflictKey> {
        match self {
            EditSpec::Insert { parent_id, after_id, .. } => {
                ConflictKey::insertion(parent_id, after_id.as_ref())
            }
            EditSpec::Replace { block_id, .. }
            | EditSpec::Delete { block_id }
            | EditSpec::Format { block_id, .. } => vec![ConflictKey::block(block_id)],
        }
    }

    /// Checks the edit against the current document. For inserts, returns
    /// the order key the new block will get.
    fn validate(&self, doc: &DocumentTree) -> Result<Option<OrderKey>, SuggestError> {
        let existing = |id: &BlockId| {
            doc.get(id).ok_or_else(|| SuggestError::UnknownTarget(id.to_string()))
        };
        match self {
            EditSpec::Insert { parent_id, after_id, block_kind, .. } => {
                if !parent_id.is_root() {
                    existing(parent_id)?;
                }
                doc.check_placement(parent_id, *block_kind).map_err(SuggestError::from_doc)?;
                let key = doc
                    .key_for_slot(parent_id, after_id.as_ref())
                    .map_err(SuggestError::from_doc)?;
                Ok(Some(key))
            }
            EditSpec::Replace { block_id, .. } => existing(block_id).map(|_| None),
            EditSpec::Delete { block_id } => {
                existing(block_id)?;
                if doc.has_children(block_id) {
                    return Err(SuggestError::HasChildren(block_id.clone()));
                }
                Ok(None)
            }
            EditSpec::Format { block_id, .. } => {
                let block = existing(block_id)?;
                if block.kind != BlockKind::Bullet {
                    return Err(SuggestError::KindMismatch(format!(
                        "{} {block_id} has no done flag",
                        block.kind
                    )));
                }
                Ok(None)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditStatus {
    Pending,
    Accepted,
    Rejected,
    Stale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestedEdit {
    pub id: EditId,
    pub worker_id: ActorId,
    pub submission_id: SubmissionId,
    pub base_revision: u64,
    pub spec: EditSpec,
    pub status: EditStatus,
    pub snapshot: ContextSnapshot,
    /// Key reserved for the block an insert creates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_key: Option<OrderKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied_revision: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub applied_revision: Option<u64>,
    pub newly_stale: Vec<EditId>,
    /// Block created by an accepted insert.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_id: Option<BlockId>,
}

/// All suggested edits of one document plus the revision at which each
/// conflict key was last mutated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionEngine {
    pub page_height: usize,
    edits: BTreeMap<EditId, SuggestedEdit>,
    #[serde(with = "pairs")]
    last_mutated: BTreeMap<ConflictKey, u64>,
}

impl Default for SuggestionEngine {
    fn default() -> Self {
        SuggestionEngine::new(DEFAULT_PAGE_HEIGHT)
    }
}

impl SuggestionEngine {
    pub fn new(page_height: usize) -> Self {
        SuggestionEngine {
            page_height: page_height.max(1),
            edits: BTreeMap::new(),
            last_mutated: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: &EditId) -> Option<&SuggestedEdit> {
        self.edits.get(id)
    }

    pub fn edits(&self) -> impl Iterator<Item = &SuggestedEdit> {
        self.edits.values()
    }

    pub fn pending(&self) -> impl Iterator<Item = &SuggestedEdit> {
        self.edits.values().filter(|e| e.status == EditStatus::Pending)
    }

    /// Records a worker's suggestion. The document is not modified.
    pub fn propose(
        &mut self,
        doc: &DocumentTree,
        id: EditId,
        worker: &Actor,
        submission_id: SubmissionId,
        spec: EditSpec,
    ) -> Result<&SuggestedEdit, SuggestError> {
        if worker.role != Role::Worker {
            return Err(SuggestError::NotWorker);
        }
        if self.edits.contains_key(&id) {
            return Err(SuggestError::DuplicateEdit(id));
        }
        let order_key = spec.validate(doc)?;
        let snapshot = render_context(doc, &id, &spec, self.page_height)?;
        let edit = SuggestedEdit {
            id: id.clone(),
            worker_id: worker.id.clone(),
            submission_id,
            base_revision: doc.revision,
            spec,
            status: EditStatus::Pending,
            snapshot,
            order_key,
            applied_revision: None,
        };
        Ok(self.edits.entry(id).or_insert(edit))
    }

    /// Accepts or rejects a pending edit.
    pub fn review(
        &mut self,
        doc: &mut DocumentTree,
        reviewer: &Actor,
        edit_id: &EditId,
        decision: Decision,
    ) -> Result<ReviewOutcome, SuggestError> {
        if reviewer.role != Role::Author {
            return Err(SuggestError::NotAuthor);
        }
        let edit = self.edits.get(edit_id).ok_or_else(|| SuggestError::UnknownEdit(edit_id.clone()))?;
        match edit.status {
            EditStatus::Pending => {}
            EditStatus::Stale => return Err(SuggestError::StaleEdit(edit_id.clone())),
            EditStatus::Accepted | EditStatus::Rejected => {
                return Err(SuggestError::AlreadyResolved(edit_id.clone()))
            }
        }

        if decision == Decision::Reject {
            self.edits.get_mut(edit_id).expect("checked above").status = EditStatus::Rejected;
            return Ok(ReviewOutcome::default());
        }

        // Eager invalidation should already have caught this; refuse rather
        // than apply an edit whose target moved underneath it.
        let touched_since_base = edit
            .spec
            .references()
            .iter()
            .any(|k| self.last_mutated.get(k).is_some_and(|&rev| rev > edit.base_revision));
        if touched_since_base {
            return Err(SuggestError::StaleEdit(edit_id.clone()));
        }

        let block_id = apply_to(doc, edit).map_err(|_| SuggestError::StaleEdit(edit_id.clone()))?;
        let revision = doc.revision;
        let mutated = edit.spec.mutates();
        let edit = self.edits.get_mut(edit_id).expect("checked above");
        edit.status = EditStatus::Accepted;
        edit.applied_revision = Some(revision);
        let newly_stale = self.invalidate(&mutated, revision);
        Ok(ReviewOutcome { applied_revision: Some(revision), newly_stale, block_id })
    }

    /// Author dictation of a new block. Returns the block id, the new
    /// revision, and the edits this made stale.
    #[allow(clippy::too_many_arguments)]
    pub fn dictate(
        &mut self,
        doc: &mut DocumentTree,
        author: &Actor,
        parent: &BlockId,
        after: Option<&BlockId>,
        kind: BlockKind,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<(BlockId, u64, Vec<EditId>), SuggestError> {
        if author.role != Role::Author {
            return Err(SuggestError::NotAuthor);
        }
        let (id, revision) = doc
            .insert_block(parent, after, kind, text, raw_token)
            .map_err(SuggestError::from_doc)?;
        let stale = self.invalidate(&ConflictKey::insertion(parent, after), revision);
        Ok((id, revision, stale))
    }

    /// Author marks a bullet done or not done. Always bumps the revision.
    pub fn toggle_done(
        &mut self,
        doc: &mut DocumentTree,
        author: &Actor,
        block_id: &BlockId,
        done: bool,
    ) -> Result<(u64, Vec<EditId>), SuggestError> {
        if author.role != Role::Author {
            return Err(SuggestError::NotAuthor);
        }
        let revision = doc.set_done(block_id, done).map_err(SuggestError::from_doc)?;
        let stale = self.invalidate(&[ConflictKey::block(block_id)], revision);
        Ok((revision, stale))
    }

    /// Drops a pending edit that was proposed as part of a batch that failed
    /// later on. Nothing else refers to it yet.
    pub(crate) fn withdraw(&mut self, id: &EditId) {
        if self.edits.get(id).is_some_and(|e| e.status == EditStatus::Pending) {
            self.edits.remove(id);
        }
    }

    /// Records a mutation of `keys` at `revision` and marks every pending
    /// edit referencing one of them stale.
    pub fn invalidate(&mut self, keys: &[ConflictKey], revision: u64) -> Vec<EditId> {
        for key in keys {
            self.last_mutated.insert(key.clone(), revision);
        }
        let mut stale = Vec::new();
        for edit in self.edits.values_mut() {
            if edit.status == EditStatus::Pending
                && edit.spec.references().iter().any(|k| keys.contains(k))
            {
                edit.status = EditStatus::Stale;
                stale.push(edit.id.clone());
            }
        }
        stale
    }
}

fn apply_to(doc: &mut DocumentTree, edit: &SuggestedEdit) -> Result<Option<BlockId>, DocError> {
    match &edit.spec {
        EditSpec::Insert { parent_id, after_id, block_kind, text } => {
            let key = edit.order_key.clone().ok_or_else(|| DocError::Malformed("insert without key".into()))?;
            let (lo, hi) = doc.slot_bounds(parent_id, after_id.as_ref())?;
            let fits = lo.as_ref().is_none_or(|lo| lo < &key) && hi.as_ref().is_none_or(|hi| &key < hi);
            if !fits {
                return Err(DocError::DuplicateKey(key));
            }
            let id = BlockId::for_edit(&edit.id);
            doc.insert_with_key(id.clone(), parent_id, *block_kind, text, None, key)?;
            Ok(Some(id))
        }
        EditSpec::Replace { block_id, text } => doc.replace_text(block_id, text).map(|_| None),
        EditSpec::Delete { block_id } => doc.delete_block(block_id).map(|_| None),
        EditSpec::Format { block_id, done } => doc.set_done(block_id, *done).map(|_| None),
    }
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S, K, V>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        S: Serializer,
        K: Serialize,
        V: Serialize,
    {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D, K, V>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        D: Deserializer<'de>,
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{export, parse_seed_outline, render_canonical, ExportFormat};

    fn setup() -> (DocumentTree, SuggestionEngine) {
        let doc = parse_seed_outline("d".into(), "# Intro\n- alpha\n- beta\n# Body\n- gamma").unwrap();
        (doc, SuggestionEngine::default())
    }

    fn worker() -> Actor {
        Actor::worker("w1")
    }

    fn author() -> Actor {
        Actor::author("a")
    }

    fn replace(block: &str, text: &str) -> EditSpec {
        EditSpec::Replace { block_id: block.into(), text: text.into() }
    }

    #[test]
    fn proposal_leaves_document_untouched() {
        let (mut doc, mut engine) = setup();
        doc.revision = 12;
        let before = export(&doc, ExportFormat::Structured);
        let edit = engine.propose(&doc, "e1".into(), &worker(), "sub1".into(), replace("s2", "ALPHA")).unwrap();
        assert_eq!(edit.status, EditStatus::Pending);
        assert_eq!(edit.base_revision, 12);
        assert_eq!(doc.revision, 12);
        assert_eq!(export(&doc, ExportFormat::Structured), before);
    }

    #[test]
    fn proposal_errors() {
        let (doc, mut engine) = setup();
        let err = engine
            .propose(&doc, "e1".into(), &worker(), "s".into(), EditSpec::Delete { block_id: "nope".into() })
            .unwrap_err();
        assert!(matches!(err, SuggestError::UnknownTarget(_)));
        let err = engine
            .propose(
                &doc,
                "e1".into(),
                &worker(),
                "s".into(),
                EditSpec::Insert {
                    parent_id: "s2".into(),
                    after_id: None,
                    block_kind: BlockKind::Paragraph,
                    text: "p".into(),
                },
            )
            .unwrap_err();
        assert!(matches!(err, SuggestError::KindMismatch(_)));
        let err = engine
            .propose(&doc, "e1".into(), &worker(), "s".into(), EditSpec::Format { block_id: "s1".into(), done: true })
            .unwrap_err();
        assert!(matches!(err, SuggestError::KindMismatch(_)));
        let err = engine
            .propose(&doc, "e1".into(), &worker(), "s".into(), EditSpec::Delete { block_id: "s1".into() })
            .unwrap_err();
        assert_eq!(err, SuggestError::HasChildren("s1".into()));
        let err = engine.propose(&doc, "e1".into(), &author(), "s".into(), replace("s2", "x")).unwrap_err();
        assert_eq!(err, SuggestError::NotWorker);
    }

    #[test]
    fn format_edit_is_pending_until_accepted() {
        let (mut doc, mut engine) = setup();
        let spec = EditSpec::Format { block_id: "s2".into(), done: true };
        let edit = engine.propose(&doc, "e1".into(), &worker(), "s".into(), spec).unwrap();
        assert_eq!(edit.spec.kind(), EditKind::Format);
        assert!(!render_canonical(&doc).contains("~~"));
        engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        assert!(render_canonical(&doc).contains("- ~~alpha~~"));
    }

    #[test]
    fn accepted_insert_bumps_revision() {
        let (mut doc, mut engine) = setup();
        doc.revision = 20;
        let spec = EditSpec::Insert {
            parent_id: "s4".into(),
            after_id: Some("s5".into()),
            block_kind: BlockKind::Paragraph,
            text: "new paragraph".into(),
        };
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), spec).unwrap();
        let out = engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        assert_eq!(out.applied_revision, Some(21));
        let id = out.block_id.unwrap();
        assert_eq!(doc.get(&id).unwrap().text, "new paragraph");
        doc.validate().unwrap();
    }

    #[test]
    fn reject_never_touches_the_document() {
        let (mut doc, mut engine) = setup();
        engine
            .propose(&doc, "e1".into(), &worker(), "s".into(), EditSpec::Delete { block_id: "s2".into() })
            .unwrap();
        let before = export(&doc, ExportFormat::Structured);
        let out = engine.review(&mut doc, &author(), &"e1".into(), Decision::Reject).unwrap();
        assert_eq!(out, ReviewOutcome::default());
        assert_eq!(export(&doc, ExportFormat::Structured), before);
        assert_eq!(engine.get(&"e1".into()).unwrap().status, EditStatus::Rejected);
        let err = engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap_err();
        assert_eq!(err, SuggestError::AlreadyResolved("e1".into()));
    }

    #[test]
    fn second_replace_on_same_block_goes_stale() {
        let (mut doc, mut engine) = setup();
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), replace("s2", "first")).unwrap();
        engine.propose(&doc, "e2".into(), &Actor::worker("w2"), "t".into(), replace("s2", "second")).unwrap();

        let mut oracle = doc.clone();
        oracle.replace_text(&"s2".into(), "first").unwrap();

        let out = engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        assert_eq!(out.newly_stale, vec![EditId::from("e2")]);
        let err = engine.review(&mut doc, &author(), &"e2".into(), Decision::Accept).unwrap_err();
        assert_eq!(err, SuggestError::StaleEdit("e2".into()));
        assert_eq!(export(&doc, ExportFormat::Structured), export(&oracle, ExportFormat::Structured));
        assert_eq!(doc.get(&"s2".into()).unwrap().text, "first");
    }

    #[test]
    fn delete_after_pending_insert_under_it_is_refused() {
        let (mut doc, mut engine) = setup();
        engine
            .propose(&doc, "e1".into(), &worker(), "s".into(), EditSpec::Delete { block_id: "s5".into() })
            .unwrap();
        engine.propose(&doc, "e2".into(), &worker(), "s".into(), replace("s5", "x")).unwrap();
        engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        // the replace must never resurrect or silently drop anything
        assert_eq!(
            engine.review(&mut doc, &author(), &"e2".into(), Decision::Accept).unwrap_err(),
            SuggestError::StaleEdit("e2".into())
        );
        assert!(!doc.contains(&"s5".into()));
    }

    #[test]
    fn sibling_inserts_at_different_anchors_do_not_conflict() {
        let (mut doc, mut engine) = setup();
        let ins = |after: Option<&str>, text: &str| EditSpec::Insert {
            parent_id: "s1".into(),
            after_id: after.map(Into::into),
            block_kind: BlockKind::Bullet,
            text: text.into(),
        };
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), ins(Some("s2"), "x")).unwrap();
        engine.propose(&doc, "e2".into(), &worker(), "s".into(), ins(Some("s3"), "y")).unwrap();
        engine.propose(&doc, "e3".into(), &worker(), "s".into(), ins(Some("s2"), "z")).unwrap();
        let out = engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        assert_eq!(out.newly_stale, vec![EditId::from("e3")]);
        engine.review(&mut doc, &author(), &"e2".into(), Decision::Accept).unwrap();
        let texts: Vec<_> = doc.children(&"s1".into()).iter().map(|b| b.text.clone()).collect();
        assert_eq!(texts, ["alpha", "x", "beta", "y"]);
    }

    #[test]
    fn author_dictation_invalidates_same_slot_suggestions() {
        let (mut doc, mut engine) = setup();
        let spec = EditSpec::Insert {
            parent_id: "s1".into(),
            after_id: Some("s2".into()),
            block_kind: BlockKind::Bullet,
            text: "x".into(),
        };
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), spec).unwrap();
        let (_, _, stale) = engine
            .dictate(&mut doc, &author(), &"s1".into(), Some(&"s2".into()), BlockKind::Bullet, "mine", None)
            .unwrap();
        assert_eq!(stale, vec![EditId::from("e1")]);
    }

    #[test]
    fn toggle_done_contract() {
        let (mut doc, mut engine) = setup();
        let (r1, _) = engine.toggle_done(&mut doc, &author(), &"s2".into(), true).unwrap();
        let (r2, _) = engine.toggle_done(&mut doc, &author(), &"s2".into(), true).unwrap();
        assert_eq!(r2, r1 + 1);
        assert!(doc.get(&"s2".into()).unwrap().done);
        assert!(render_canonical(&doc).contains("- ~~alpha~~"));
        assert!(matches!(
            engine.toggle_done(&mut doc, &author(), &"s1".into(), true),
            Err(SuggestError::KindMismatch(_))
        ));
        assert!(matches!(
            engine.toggle_done(&mut doc, &author(), &"zz".into(), true),
            Err(SuggestError::UnknownTarget(_))
        ));
        assert_eq!(
            engine.toggle_done(&mut doc, &worker(), &"s2".into(), true).unwrap_err(),
            SuggestError::NotAuthor
        );
    }

    #[test]
    fn workers_cannot_review() {
        let (mut doc, mut engine) = setup();
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), replace("s2", "x")).unwrap();
        assert_eq!(
            engine.review(&mut doc, &worker(), &"e1".into(), Decision::Accept).unwrap_err(),
            SuggestError::NotAuthor
        );
        assert_eq!(
            engine.review(&mut doc, &author(), &"e9".into(), Decision::Accept).unwrap_err(),
            SuggestError::UnknownEdit("e9".into())
        );
    }

    #[test]
    fn engine_serializes() {
        let (mut doc, mut engine) = setup();
        engine.propose(&doc, "e1".into(), &worker(), "s".into(), replace("s2", "x")).unwrap();
        engine.review(&mut doc, &author(), &"e1".into(), Decision::Accept).unwrap();
        let json = serde_json::to_string(&engine).unwrap();
        let back: SuggestionEngine = serde_json::from_str(&json).unwrap();
        assert_eq!(back, engine);
    }
}
