//! Rendered page context sent along with each suggested edit.

use serde::{Deserialize, Serialize};

use crate::doc::{render_lines, BlockKind, DocumentTree};
use crate::ids::{BlockId, EditId};

use super::{EditSpec, SuggestError};

const OPEN: char = '«';
const CLOSE: char = '»';
const EXCERPT_RADIUS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub edit_id: EditId,
    pub revision: u64,
    pub page_index: usize,
    /// The page's lines with the affected region wrapped in « and ».
    pub lines: Vec<String>,
    /// The affected region plus up to two lines on either side.
    pub excerpt: Vec<String>,
}

/// Renders the page an edit touches, bracketing the affected region.
///
/// Replaces, deletes and formats bracket the target block's lines. An insert
/// shows its proposed text as an extra bracketed line at the insertion point.
pub fn render_context(
    doc: &DocumentTree,
    edit_id: &EditId,
    spec: &EditSpec,
    page_height: usize,
) -> Result<ContextSnapshot, SuggestError> {
    let height = page_height.max(1);
    let rendered = render_lines(doc);
    let mut lines: Vec<String> = rendered.lines.iter().map(|l| escape(l)).collect();
    let unknown = |id: &BlockId| SuggestError::UnknownTarget(id.to_string());

    let (start, end) = match spec {
        EditSpec::Insert { parent_id, after_id, block_kind, text } => {
            let at = match after_id {
                Some(after) => {
                    let anchor = doc.get(after).ok_or_else(|| unknown(after))?;
                    if &anchor.parent_id != parent_id {
                        return Err(unknown(after));
                    }
                    rendered.span_of(after).ok_or_else(|| unknown(after))?.1
                }
                None if parent_id.is_root() => 0,
                None => rendered.span_of(parent_id).ok_or_else(|| unknown(parent_id))?.1,
            };
            let prefix = if *block_kind == BlockKind::Bullet { "- " } else { "" };
            let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
            lines.insert(at, format!("{prefix}{}", escape(&flat)));
            (at, at + 1)
        }
        EditSpec::Replace { block_id, .. }
        | EditSpec::Delete { block_id }
        | EditSpec::Format { block_id, .. } => {
            rendered.span_of(block_id).ok_or_else(|| unknown(block_id))?
        }
    };

    // Pages follow the canonical layout; an inserted preview line joins the
    // page of the line it precedes.
    let canonical_len = rendered.lines.len();
    let page_index = if canonical_len == 0 { 0 } else { start.min(canonical_len - 1) / height };
    let page_start = page_index * height;
    let mut page_end = (page_start + height).min(canonical_len);
    if matches!(spec, EditSpec::Insert { .. }) {
        page_end += 1;
    }
    let page_end = page_end.min(lines.len());

    let page_lines = bracket(&lines[page_start..page_end], start - page_start, end.min(page_end) - page_start);
    let ex_start = start.saturating_sub(EXCERPT_RADIUS);
    let ex_end = (end + EXCERPT_RADIUS).min(lines.len());
    let excerpt = bracket(&lines[ex_start..ex_end], start - ex_start, end - ex_start);

    Ok(ContextSnapshot {
        edit_id: edit_id.clone(),
        revision: doc.revision,
        page_index,
        lines: page_lines,
        excerpt,
    })
}

fn escape(line: &str) -> String {
    line.replace(OPEN, "<<").replace(CLOSE, ">>")
}

fn bracket(lines: &[String], start: usize, end: usize) -> Vec<String> {
    let mut out = lines.to_vec();
    out[start].insert(0, OPEN);
    out[end - 1].push(CLOSE);
    out
}
