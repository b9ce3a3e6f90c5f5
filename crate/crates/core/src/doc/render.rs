//! Deterministic plain-text rendering and pagination.

use serde::{Deserialize, Serialize};

use crate::ids::BlockId;

use super::{Block, BlockKind, DocumentTree};

/// Column at which rendered text wraps.
pub const WRAP_WIDTH: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub index: usize,
    pub lines: Vec<String>,
    pub block_ids: Vec<BlockId>,
}

/// Rendered lines plus the line range each block occupies.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RenderedDoc {
    pub lines: Vec<String>,
    /// `(block, first line, one past last line)` in display order.
    pub spans: Vec<(BlockId, usize, usize)>,
}

impl RenderedDoc {
    pub fn text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn span_of(&self, id: &BlockId) -> Option<(usize, usize)> {
        self.spans.iter().find(|(b, _, _)| b == id).map(|&(_, s, e)| (s, e))
    }

    /// Pages with `block_ids` listing blocks whose first line is on the page.
    pub fn paginate(&self, page_height: usize) -> Vec<Page> {
        let mut pages = paginate_lines(&self.lines, page_height);
        for (id, start, _) in &self.spans {
            pages[start / page_height.max(1)].block_ids.push(id.clone());
        }
        pages
    }
}

pub fn render_lines(doc: &DocumentTree) -> RenderedDoc {
    let mut out = RenderedDoc::default();
    for block in doc.in_display_order() {
        if block.kind == BlockKind::Section && !out.lines.is_empty() {
            out.lines.push(String::new());
        }
        let start = out.lines.len();
        out.lines.extend(block_lines(block));
        out.spans.push((block.id.clone(), start, out.lines.len()));
    }
    out
}

/// Renders only the canonical content; pending suggestions never appear.
pub fn render_canonical(doc: &DocumentTree) -> String {
    render_lines(doc).text()
}

pub(crate) fn block_lines(block: &Block) -> Vec<String> {
    match block.kind {
        BlockKind::Section => {
            let title = block.text.split_whitespace().collect::<Vec<_>>().join(" ");
            let underline = "=".repeat(title.chars().count().max(1));
            vec![title, underline]
        }
        BlockKind::Paragraph => wrap_text(&block.text, WRAP_WIDTH, "", ""),
        BlockKind::Bullet => {
            let body = if block.done { format!("~~{}~~", block.text.trim()) } else { block.text.clone() };
            wrap_text(&body, WRAP_WIDTH, "- ", "  ")
        }
    }
}

/// Greedy word wrap. Always yields at least one line; words longer than the
/// available width are split.
pub fn wrap_text(text: &str, width: usize, first_prefix: &str, rest_prefix: &str) -> Vec<String> {
    let mut lines = Vec::new();
    let mut current = first_prefix.to_owned();
    let mut current_len = first_prefix.chars().count();
    let mut empty = true;

    for word in text.split_whitespace() {
        let mut chars: Vec<char> = word.chars().collect();
        loop {
            let room = width.saturating_sub(current_len);
            let needed = chars.len() + usize::from(!empty);
            if needed <= room {
                if !empty {
                    current.push(' ');
                }
                current.extend(chars.iter());
                current_len += needed;
                empty = false;
                break;
            }
            if !empty {
                lines.push(std::mem::replace(&mut current, rest_prefix.to_owned()));
                current_len = rest_prefix.chars().count();
                empty = true;
                continue;
            }
            // word longer than a whole line
            let take = room.max(1);
            let rest = chars.split_off(take.min(chars.len()));
            current.extend(chars.iter());
            lines.push(std::mem::replace(&mut current, rest_prefix.to_owned()));
            current_len = rest_prefix.chars().count();
            chars = rest;
            if chars.is_empty() {
                break;
            }
        }
    }
    if !empty || lines.is_empty() {
        lines.push(current);
    }
    lines
}

/// Splits newline-terminated rendered text into pages of at most
/// `page_height` lines. Concatenating every page line followed by `\n`
/// reproduces the input.
pub fn paginate(rendered: &str, page_height: usize) -> Vec<Page> {
    let lines: Vec<String> = rendered.split_terminator('\n').map(str::to_owned).collect();
    paginate_lines(&lines, page_height)
}

fn paginate_lines(lines: &[String], page_height: usize) -> Vec<Page> {
    let height = page_height.max(1);
    lines
        .chunks(height)
        .enumerate()
        .map(|(index, chunk)| Page { index, lines: chunk.to_vec(), block_ids: Vec::new() })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{parse_seed_outline, DocumentTree};
    use crate::ids::DocId;

    fn numbered(n: usize) -> String {
        (0..n).map(|i| format!("line {i}\n")).collect()
    }

    #[test]
    fn page_counts() {
        let sizes: Vec<usize> = paginate(&numbered(100), 40).iter().map(|p| p.lines.len()).collect();
        assert_eq!(sizes, [40, 40, 20]);
        assert!(paginate("", 40).is_empty());
        assert_eq!(paginate(&numbered(40), 40).len(), 1);
        assert_eq!(paginate(&numbered(41), 40).len(), 2);
    }

    #[test]
    fn empty_doc_renders_nothing() {
        assert_eq!(render_canonical(&DocumentTree::new(DocId::from("d"))), "");
    }

    #[test]
    fn done_bullet_is_struck_through() {
        let mut doc = parse_seed_outline("d".into(), "# S\n- use small fragment of time").unwrap();
        doc.set_done(&"s2".into(), true).unwrap();
        let text = render_canonical(&doc);
        assert!(text.lines().any(|l| l == "- ~~use small fragment of time~~"), "{text}");
    }

    #[test]
    fn section_layout() {
        let doc = parse_seed_outline("d".into(), "# Intro\n- a\n# Body\n- b").unwrap();
        assert_eq!(render_canonical(&doc), "Intro\n=====\n- a\n\nBody\n====\n- b\n");
    }

    #[test]
    fn rendering_is_repeatable() {
        let doc = parse_seed_outline("d".into(), "# A\n- x\n- y\n# B").unwrap();
        assert_eq!(render_canonical(&doc).as_bytes(), render_canonical(&doc).as_bytes());
    }

    #[test]
    fn wrap_respects_width() {
        let text = "word ".repeat(60);
        let lines = wrap_text(&text, WRAP_WIDTH, "- ", "  ");
        assert!(lines.len() > 1);
        assert!(lines.iter().all(|l| l.chars().count() <= WRAP_WIDTH));
        assert!(lines[0].starts_with("- word"));
        assert!(lines[1].starts_with("  word"));
        let long = "x".repeat(200);
        let lines = wrap_text(&long, WRAP_WIDTH, "", "");
        assert_eq!(lines.iter().map(|l| l.len()).collect::<Vec<_>>(), [80, 80, 40]);
        assert_eq!(wrap_text("", WRAP_WIDTH, "- ", "  "), ["- "]);
    }

    #[test]
    fn page_block_ids_mark_first_lines() {
        let outline: String =
            std::iter::once("# S\n".to_owned()).chain((0..50).map(|i| format!("- b{i}\n"))).collect();
        let doc = parse_seed_outline("d".into(), &outline).unwrap();
        let pages = render_lines(&doc).paginate(40);
        assert_eq!(pages.len(), 2);
        // title + underline + 38 bullets on the first page
        assert_eq!(pages[0].block_ids.len(), 39);
        assert_eq!(pages[1].block_ids.len(), 12);
    }
}
