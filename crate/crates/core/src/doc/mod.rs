//! The structured document: a shallow tree of sections, paragraphs and
//! bullets, ordered among siblings by fractional keys.

mod interchange;
mod order_key;
mod outline;
mod render;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{BlockId, DocId};

pub use interchange::{export, import_structured, ExportFormat, StructuredBlock, StructuredDocument};
pub use order_key::{order_key_between, OrderKey};
pub use outline::parse_seed_outline;
pub use render::{paginate, render_canonical, render_lines, wrap_text, Page, RenderedDoc, WRAP_WIDTH};

/// Default number of rendered lines per page.
pub const DEFAULT_PAGE_HEIGHT: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DocError {
    #[error("malformed outline at line {0}")]
    MalformedOutline(usize),
    #[error("order key {lo:?} is not below {hi:?}")]
    KeyOrderViolation { lo: String, hi: String },
    #[error("no order key fits between {lo:?} and {hi:?}")]
    NoGap { lo: String, hi: String },
    #[error("invalid order key {0:?}")]
    InvalidKey(String),
    #[error("unknown parent block {0}")]
    UnknownParent(BlockId),
    #[error("unknown anchor block {0}")]
    UnknownAnchor(BlockId),
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("a {kind} cannot be placed under {parent}")]
    KindMismatch { kind: BlockKind, parent: String },
    #[error("block {0} still has children")]
    HasChildren(BlockId),
    #[error("block id {0} already exists")]
    DuplicateBlock(BlockId),
    #[error("order key {0} is already used by a sibling")]
    DuplicateKey(OrderKey),
    #[error("malformed document: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Section,
    Paragraph,
    Bullet,
}

impl std::fmt::Display for BlockKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BlockKind::Section => "section",
            BlockKind::Paragraph => "paragraph",
            BlockKind::Bullet => "bullet",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub kind: BlockKind,
    pub parent_id: BlockId,
    pub order_key: OrderKey,
    pub text: String,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentTree {
    pub doc_id: DocId,
    pub blocks: BTreeMap<BlockId, Block>,
    pub revision: u64,
}

impl DocumentTree {
    pub fn new(doc_id: DocId) -> Self {
        DocumentTree { doc_id, blocks: BTreeMap::new(), revision: 0 }
    }

    pub fn get(&self, id: &BlockId) -> Option<&Block> {
        self.blocks.get(id)
    }

    pub fn contains(&self, id: &BlockId) -> bool {
        self.blocks.contains_key(id)
    }

    /// Children of `parent` in display order.
    pub fn children(&self, parent: &BlockId) -> Vec<&Block> {
        let mut out: Vec<&Block> =
            self.blocks.values().filter(|b| &b.parent_id == parent).collect();
        out.sort_by(|a, b| a.order_key.cmp(&b.order_key));
        out
    }

    pub fn has_children(&self, id: &BlockId) -> bool {
        self.blocks.values().any(|b| &b.parent_id == id)
    }

    /// Sections followed by their children, in display order.
    pub fn in_display_order(&self) -> Vec<&Block> {
        let mut out = Vec::with_capacity(self.blocks.len());
        for section in self.children(&BlockId::root()) {
            out.push(section);
            out.extend(self.children(&section.id));
        }
        out
    }

    /// Checks that `kind` may be placed under `parent`.
    pub fn check_placement(&self, parent: &BlockId, kind: BlockKind) -> Result<(), DocError> {
        let parent_kind = if parent.is_root() {
            None
        } else {
            match self.blocks.get(parent) {
                Some(b) => Some(b.kind),
                None => return Err(DocError::UnknownParent(parent.clone())),
            }
        };
        let ok = matches!(
            (parent_kind, kind),
            (None, BlockKind::Section) | (Some(BlockKind::Section), BlockKind::Paragraph | BlockKind::Bullet)
        );
        if ok {
            Ok(())
        } else {
            Err(DocError::KindMismatch {
                kind,
                parent: parent_kind.map_or_else(|| "the root".to_owned(), |k| k.to_string()),
            })
        }
    }

    /// The open interval of keys available directly after `after` (or at the
    /// front when `after` is `None`) among the children of `parent`.
    pub fn slot_bounds(
        &self,
        parent: &BlockId,
        after: Option<&BlockId>,
    ) -> Result<(Option<OrderKey>, Option<OrderKey>), DocError> {
        let siblings = self.children(parent);
        match after {
            None => Ok((None, siblings.first().map(|b| b.order_key.clone()))),
            Some(anchor) => {
                let pos = siblings
                    .iter()
                    .position(|b| &b.id == anchor)
                    .ok_or_else(|| DocError::UnknownAnchor(anchor.clone()))?;
                Ok((
                    Some(siblings[pos].order_key.clone()),
                    siblings.get(pos + 1).map(|b| b.order_key.clone()),
                ))
            }
        }
    }

    /// Computes the key a new child would get in the given slot.
    pub fn key_for_slot(
        &self,
        parent: &BlockId,
        after: Option<&BlockId>,
    ) -> Result<OrderKey, DocError> {
        let (lo, hi) = self.slot_bounds(parent, after)?;
        order_key_between(lo.as_ref(), hi.as_ref())
    }

    /// Author dictation: adds a block after `after` (or first) under
    /// `parent`. Returns the new block id and the new revision.
    pub fn insert_block(
        &mut self,
        parent: &BlockId,
        after: Option<&BlockId>,
        kind: BlockKind,
        text: &str,
        raw_token: Option<String>,
    ) -> Result<(BlockId, u64), DocError> {
        self.check_placement(parent, kind)?;
        let key = self.key_for_slot(parent, after)?;
        let id = BlockId(format!("d{}", self.revision + 1));
        self.insert_with_key(id.clone(), parent, kind, text, raw_token, key)?;
        Ok((id, self.revision))
    }

    /// Places a block with a caller-chosen id and key. Bumps the revision.
    pub fn insert_with_key(
        &mut self,
        id: BlockId,
        parent: &BlockId,
        kind: BlockKind,
        text: &str,
        raw_token: Option<String>,
        order_key: OrderKey,
    ) -> Result<u64, DocError> {
        self.check_placement(parent, kind)?;
        if id.is_root() || self.blocks.contains_key(&id) {
            return Err(DocError::DuplicateBlock(id));
        }
        if self.children(parent).iter().any(|b| b.order_key == order_key) {
            return Err(DocError::DuplicateKey(order_key));
        }
        self.blocks.insert(
            id.clone(),
            Block {
                id,
                kind,
                parent_id: parent.clone(),
                order_key,
                text: text.to_owned(),
                done: false,
                raw_token,
            },
        );
        Ok(self.bump())
    }

    pub fn replace_text(&mut self, id: &BlockId, text: &str) -> Result<u64, DocError> {
        let block = self.blocks.get_mut(id).ok_or_else(|| DocError::UnknownBlock(id.clone()))?;
        block.text = text.to_owned();
        Ok(self.bump())
    }

    /// Removes a leaf block. Blocks with children are refused.
    pub fn delete_block(&mut self, id: &BlockId) -> Result<u64, DocError> {
        if !self.blocks.contains_key(id) {
            return Err(DocError::UnknownBlock(id.clone()));
        }
        if self.has_children(id) {
            return Err(DocError::HasChildren(id.clone()));
        }
        self.blocks.remove(id);
        Ok(self.bump())
    }

    /// Sets the done flag of a bullet. Always bumps the revision, even when
    /// the flag already had the requested value.
    pub fn set_done(&mut self, id: &BlockId, done: bool) -> Result<u64, DocError> {
        let block = self.blocks.get_mut(id).ok_or_else(|| DocError::UnknownBlock(id.clone()))?;
        if block.kind != BlockKind::Bullet {
            return Err(DocError::KindMismatch {
                kind: block.kind,
                parent: "the done flag (bullets only)".to_owned(),
            });
        }
        block.done = done;
        Ok(self.bump())
    }

    fn bump(&mut self) -> u64 {
        self.revision += 1;
        self.revision
    }

    /// Checks every structural invariant of the tree.
    pub fn validate(&self) -> Result<(), DocError> {
        let mut seen_keys: BTreeMap<(&BlockId, &OrderKey), &BlockId> = BTreeMap::new();
        for (id, block) in &self.blocks {
            if id != &block.id {
                return Err(DocError::Malformed(format!("block keyed {id} carries id {}", block.id)));
            }
            if id.is_root() {
                return Err(DocError::Malformed("a block uses the root sentinel id".into()));
            }
            self.check_placement(&block.parent_id, block.kind)
                .map_err(|e| DocError::Malformed(format!("block {id}: {e}")))?;
            if block.done && block.kind != BlockKind::Bullet {
                return Err(DocError::Malformed(format!("non-bullet {id} is marked done")));
            }
            if let Some(other) = seen_keys.insert((&block.parent_id, &block.order_key), id) {
                return Err(DocError::Malformed(format!(
                    "blocks {other} and {id} share key {}",
                    block.order_key
                )));
            }
        }
        Ok(())
    }
}
