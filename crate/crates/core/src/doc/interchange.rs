use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::{BlockId, DocId};

use super::{render_canonical, Block, BlockKind, DocError, DocumentTree, OrderKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Structured,
    Plain,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" => Ok(ExportFormat::Structured),
            "plain" => Ok(ExportFormat::Plain),
            other => Err(format!("unknown export format {other:?}")),
        }
    }
}

/// Interchange form of a document. Blocks are sorted by
/// `(parent_id, order_key)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredDocument {
    pub doc_id: DocId,
    pub revision: u64,
    pub blocks: Vec<StructuredBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredBlock {
    pub id: BlockId,
    pub kind: BlockKind,
    pub parent_id: BlockId,
    pub order_key: OrderKey,
    pub text: String,
    pub done: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_token: Option<String>,
}

impl From<&DocumentTree> for StructuredDocument {
    fn from(doc: &DocumentTree) -> Self {
        let mut blocks: Vec<StructuredBlock> = doc
            .blocks
            .values()
            .map(|b| StructuredBlock {
                id: b.id.clone(),
                kind: b.kind,
                parent_id: b.parent_id.clone(),
                order_key: b.order_key.clone(),
                text: b.text.clone(),
                done: b.done,
                raw_token: b.raw_token.clone(),
            })
            .collect();
        blocks.sort_by(|a, b| (&a.parent_id, &a.order_key).cmp(&(&b.parent_id, &b.order_key)));
        StructuredDocument { doc_id: doc.doc_id.clone(), revision: doc.revision, blocks }
    }
}

pub fn export(doc: &DocumentTree, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Plain => render_canonical(doc).into_bytes(),
        ExportFormat::Structured => serde_json::to_vec(&StructuredDocument::from(doc))
            .expect("structured documents always serialize"),
    }
}

/// Rebuilds a tree from its structured export and validates it.
pub fn import_structured(bytes: &[u8]) -> Result<DocumentTree, DocError> {
    let parsed: StructuredDocument =
        serde_json::from_slice(bytes).map_err(|e| DocError::Malformed(e.to_string()))?;
    let mut blocks = BTreeMap::new();
    for b in parsed.blocks {
        let block = Block {
            id: b.id.clone(),
            kind: b.kind,
            parent_id: b.parent_id,
            order_key: b.order_key,
            text: b.text,
            done: b.done,
            raw_token: b.raw_token,
        };
        if blocks.insert(b.id.clone(), block).is_some() {
            return Err(DocError::DuplicateBlock(b.id));
        }
    }
    let doc = DocumentTree { doc_id: parsed.doc_id, blocks, revision: parsed.revision };
    doc.validate()?;
    Ok(doc)
}
