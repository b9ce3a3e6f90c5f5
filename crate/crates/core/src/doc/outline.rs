use crate::ids::{BlockId, DocId};

use super::{order_key_between, BlockKind, DocError, DocumentTree, OrderKey};

/// Parses a seed outline into a revision-0 tree.
///
/// `# Title` lines open a section, `- text` lines add a bullet to the most
/// recent section, blank lines are ignored. Blocks are numbered `s1`, `s2`,
/// ... in input order.
pub fn parse_seed_outline(doc_id: DocId, text: &str) -> Result<DocumentTree, DocError> {
    let mut doc = DocumentTree::new(doc_id);
    let root = BlockId::root();
    let mut current: Option<(BlockId, Option<OrderKey>)> = None;
    let mut last_section_key: Option<OrderKey> = None;
    let mut count = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(title) = line.strip_prefix("# ") {
            count += 1;
            let id = BlockId(format!("s{count}"));
            let key = order_key_between(last_section_key.as_ref(), None)?;
            doc.insert_with_key(id.clone(), &root, BlockKind::Section, title.trim(), None, key.clone())?;
            last_section_key = Some(key);
            current = Some((id, None));
        } else if let Some(item) = line.strip_prefix("- ") {
            let (section, last_key) =
                current.as_mut().ok_or(DocError::MalformedOutline(line_no))?;
            count += 1;
            let id = BlockId(format!("s{count}"));
            let key = order_key_between(last_key.as_ref(), None)?;
            doc.insert_with_key(id, section, BlockKind::Bullet, item.trim(), None, key.clone())?;
            *last_key = Some(key);
        } else {
            return Err(DocError::MalformedOutline(line_no));
        }
    }
    doc.revision = 0;
    Ok(doc)
}
