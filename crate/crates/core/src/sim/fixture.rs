//! A full-size authoring session with known workflow totals.
//!
//! The transcript is produced by driving a fresh in-memory service, so every
//! id it mentions is the one the service hands out. Replaying it against
//! another fresh service reproduces the same run.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::{Action, Header, Runner, SimError, Transcript};
use crate::doc::{BlockKind, DocumentTree};
use crate::ids::{ActorId, BlockId, EditId, Role, TaskId};
use crate::service::Service;
use crate::suggest::MetricsSummary;
use crate::tasks::TaskState;

pub const PAPER_SCALE_TARGET: MetricsSummary = MetricsSummary {
    submissions: 95,
    insertions: 117,
    replacements: 170,
    deletions: 107,
    formatting: 48,
    author_comments: 68,
};

const SEED: u64 = 95;
const AUTHOR: &str = "author";
const WORKERS: [&str; 5] = ["w1", "w2", "w3", "w4", "w5"];
const TASKS: usize = 10;
/// Submission after which the declared conflict is staged.
const CONFLICT_AT: usize = 40;
/// Author messages that answer a worker question; the rest open new threads.
const REPLIES: u64 = 32;
const INSTRUCTIONS: u64 = PAPER_SCALE_TARGET.author_comments - REPLIES;

/// Section titles with their bullet counts, shaped like a short research report.
const OUTLINE: &[(&str, usize)] = &[
    ("Title", 3),
    ("Abstract", 0),
    ("Introduction", 0),
    ("Problem area", 4),
    ("Problem addressed", 4),
    ("Example", 3),
    ("Thesis", 2),
    ("Contributions", 3),
    ("Related work", 0),
    ("Prior systems", 4),
    ("Small device input", 3),
    ("System", 0),
    ("Early trials", 3),
    ("Interface", 5),
    ("Supported actions", 6),
    ("Architecture", 5),
    ("Study", 0),
    ("Method", 4),
    ("Results", 6),
    ("Discussion", 0),
    ("Form factor", 4),
    ("Micro tasks", 3),
    ("Hired workers", 3),
    ("Conclusion", 3),
    ("References", 2),
];

fn seed_outline() -> String {
    let mut out = String::new();
    for (s, (title, bullets)) in OUTLINE.iter().enumerate() {
        out.push_str(&format!("# {title}\n"));
        for b in 0..*bullets {
            out.push_str(&format!("- point {}.{} on {}\n", s + 1, b + 1, title.to_lowercase()));
        }
    }
    out
}

/// Share of `total` given to submission `i` of `n`, spreading it evenly.
fn share(i: usize, n: usize, total: u64) -> usize {
    let n = n as u64;
    let i = i as u64;
    (((i + 1) * total / n) - (i * total / n)) as usize
}

/// Builds the fixture transcript.
pub fn fixture_paper_scale() -> Transcript {
    let service = Service::in_memory();
    build(&service).expect("fixture construction is self-consistent")
}

fn build(service: &Service) -> Result<Transcript, SimError> {
    let header = Header {
        seed: SEED,
        actors: std::iter::once((AUTHOR, Role::Author))
            .chain(WORKERS.iter().map(|w| (*w, Role::Worker)))
            .map(|(id, role)| super::ActorSpec { id: id.into(), role })
            .collect(),
        note: Some(format!(
            "author comments: {REPLIES} replies to worker questions, {INSTRUCTIONS} new instruction threads"
        )),
    };
    let mut r = Runner::new(service, header);
    let tasks: Vec<Value> = OUTLINE
        .iter()
        .filter(|(_, bullets)| *bullets > 0)
        .take(TASKS)
        .map(|(title, _)| json!({ "description": format!("Turn the bullets of {title} into paragraphs"), "target_section_title": title }))
        .collect();
    let resp = r.call(Action::new(
        AUTHOR,
        "POST /documents",
        json!({ "seed_outline": seed_outline(), "tasks": tasks, "rng_seed": SEED }),
    ))?;
    let doc = resp.body["doc_id"].as_str().expect("doc id").to_owned();
    let events = format!("GET /documents/{doc}/events?since=${{cursor}}");
    for w in WORKERS {
        r.call(Action::new(w, events.clone(), Value::Null))?;
    }

    let mut author_messages = 0u64;
    let mut instructions = 0u64;
    let totals = [
        PAPER_SCALE_TARGET.insertions,
        PAPER_SCALE_TARGET.replacements,
        PAPER_SCALE_TARGET.deletions,
        PAPER_SCALE_TARGET.formatting,
    ];
    let n = PAPER_SCALE_TARGET.submissions as usize;

    for i in 0..n {
        let worker = WORKERS[i % WORKERS.len()];
        let held = if i < TASKS { Some(take_task(&mut r, &doc, worker, i < 2)?) } else { None };

        let [ins, rep, del, fmt] = totals.map(|t| share(i, n, t));
        let tree = document(&r);
        let plan = plan_submission(&tree, i, ins, rep, del, fmt);
        let resp = r.call(Action::new(
            worker,
            format!("POST /documents/{doc}/edits"),
            json!({ "submission_id": format!("sub{:02}", i + 1), "edits": plan.edits }),
        ))?;
        let ids: Vec<EditId> = resp.body["edit_ids"]
            .as_array()
            .expect("edit ids")
            .iter()
            .map(|v| EditId::from(v.as_str().expect("edit id")))
            .collect();

        let question = if i % 3 == 0 && author_messages < PAPER_SCALE_TARGET.author_comments {
            let resp = r.call(Action::new(
                worker,
                format!("POST /documents/{doc}/threads"),
                json!({ "anchor": { "edit": ids[0] }, "text": format!("Question on submission {}: keep the original wording?", i + 1) }),
            ))?;
            Some(resp.body["thread_id"].as_str().expect("thread id").to_owned())
        } else {
            None
        };

        r.call(Action::new(AUTHOR, events.clone(), Value::Null))?;
        for (k, id) in ids.iter().enumerate() {
            let decision = if k >= plan.accepted { "reject" } else { "accept" };
            r.call(Action::new(
                AUTHOR,
                format!("POST /documents/{doc}/edits/{id}/review"),
                json!({ "decision": decision }),
            ))?;
        }

        if let Some(thread) = question {
            author_messages += 1;
            r.call(Action::new(
                AUTHOR,
                format!("POST /threads/{thread}/replies"),
                author_text(author_messages, "Yes, keep it and tighten the sentence."),
            ))?;
            r.call(Action::new(AUTHOR, format!("POST /threads/{thread}/resolve"), Value::Null))?;
        } else if instructions < INSTRUCTIONS {
            instructions += 1;
            author_messages += 1;
            let section = &tree.children(&BlockId::root())[i % OUTLINE.len()].id;
            let mut body = author_text(author_messages, "Please focus on this section next.");
            body["anchor"] = json!({ "block": section });
            r.call(Action::new(AUTHOR, format!("POST /documents/{doc}/threads"), body))?;
        }

        if let Some(task) = held {
            r.call(Action::new(worker, format!("POST /tasks/{task}/done"), Value::Null))?;
        }
        if i + 1 == CONFLICT_AT {
            stage_conflict(&mut r, &doc)?;
        }
    }
    r.call(Action::new(AUTHOR, events, Value::Null))?;
    debug_assert_eq!(author_messages, PAPER_SCALE_TARGET.author_comments);
    Ok(r.transcript())
}

fn author_text(n: u64, text: &str) -> Value {
    // Every fourth message carries the unprocessed speech input as well.
    if n.is_multiple_of(4) {
        json!({ "text": text, "raw_token": format!("raw-speech-{n:03}") })
    } else {
        json!({ "text": text })
    }
}

fn document(r: &Runner<'_>) -> DocumentTree {
    let doc = r.doc_id().expect("document created").clone();
    r.service().inspect(|s| s.doc(&doc).expect("document exists").tree.clone())
}

/// The worker takes a task: optionally pulling one at random and skipping it
/// first, then claiming the lowest open task it has not skipped.
fn take_task(r: &mut Runner<'_>, doc: &str, worker: &str, skip_first: bool) -> Result<TaskId, SimError> {
    if skip_first {
        let resp = r.call(Action::new(worker, format!("GET /documents/{doc}/tasks/next"), Value::Null))?;
        let task = resp.body["id"].as_str().expect("a task is open").to_owned();
        r.call(Action::new(worker, format!("POST /tasks/{task}/skip"), Value::Null))?;
    }
    let doc_id = r.doc_id().expect("document").clone();
    let me = ActorId::from(worker);
    let pick = r.service().inspect(|s| {
        s.doc(&doc_id)
            .expect("document")
            .tasks
            .tasks()
            .find(|t| t.state == TaskState::Open && !t.skip_set.contains(&me))
            .map(|t| t.id.clone())
            .expect("an open task remains")
    });
    r.call(Action::new(worker, format!("GET /documents/{doc}/tasks/next?claim={pick}"), Value::Null))?;
    Ok(pick)
}

/// A worker proposes a top insert into a section, the author dictates into
/// the same slot first, and the worker's edit goes stale.
fn stage_conflict(r: &mut Runner<'_>, doc: &str) -> Result<(), SimError> {
    let tree = document(r);
    let section = tree.children(&BlockId::root())[1].id.clone();
    let resp = r.call(Action::new(
        WORKERS[0],
        format!("POST /documents/{doc}/edits"),
        json!({ "submission_id": "sub-conflict", "edits": [{
            "kind": "insert", "parent_id": section, "block_kind": "paragraph",
            "text": "A draft opening paragraph."
        }] }),
    ))?;
    let edit = resp.body["edit_ids"][0].as_str().expect("edit id").to_owned();
    r.call(Action::new(
        AUTHOR,
        format!("POST /documents/{doc}/blocks"),
        json!({ "parent_id": section, "kind": "paragraph", "text": "Author's own opening." }),
    ))?;
    r.call(
        Action::new(AUTHOR, format!("POST /documents/{doc}/edits/{edit}/review"), json!({ "decision": "accept" }))
            .expect_error("stale_edit"),
    )?;
    Ok(())
}

struct Plan {
    edits: Vec<Value>,
    /// Edits before this index are accepted; the rest are rejected.
    accepted: usize,
}

/// Chooses targets so that no two edits of the submission touch the same
/// block, and inserts go to sections nothing else in the batch changes.
fn plan_submission(tree: &DocumentTree, i: usize, ins: usize, rep: usize, del: usize, fmt: usize) -> Plan {
    let sections: Vec<BlockId> = tree.children(&BlockId::root()).iter().map(|b| b.id.clone()).collect();
    let blocks = tree.in_display_order();
    let mut used: BTreeSet<BlockId> = BTreeSet::new();
    let mut edits = Vec::new();

    for k in 0..ins {
        let section = sections[(i * 3 + k * 7) % sections.len()].clone();
        if !used.insert(section.clone()) {
            continue;
        }
        edits.push(json!({
            "kind": "insert", "parent_id": section, "block_kind": "paragraph",
            "text": format!("Draft paragraph {}.{} written from the outline.", i + 1, k + 1),
        }));
    }
    assert_eq!(edits.len(), ins, "insert sections collide in submission {i}");

    // Deletes: oldest worker paragraphs first, then bullets from the end.
    let mut paragraphs: Vec<(u64, BlockId)> = blocks
        .iter()
        .filter(|b| b.kind == BlockKind::Paragraph && !tree.has_children(&b.id))
        .filter_map(|b| b.id.as_str().strip_prefix("blk-e").and_then(|n| n.parse().ok()).map(|n| (n, b.id.clone())))
        .collect();
    paragraphs.sort();
    let fallback = blocks.iter().rev().filter(|b| b.kind == BlockKind::Bullet).map(|b| b.id.clone());
    let deletes: Vec<BlockId> = paragraphs
        .into_iter()
        .map(|(_, id)| id)
        .chain(fallback)
        .filter(|id| !used.contains(id))
        .take(del)
        .collect();
    assert_eq!(deletes.len(), del, "not enough deletable blocks in submission {i}");
    used.extend(deletes.iter().cloned());

    let formats: Vec<BlockId> = blocks
        .iter()
        .filter(|b| b.kind == BlockKind::Bullet && !b.done && !used.contains(&b.id))
        .map(|b| b.id.clone())
        .take(fmt)
        .collect();
    assert_eq!(formats.len(), fmt, "not enough open bullets in submission {i}");
    used.extend(formats.iter().cloned());

    // One extra replacement every sixth submission is rejected.
    let extra = usize::from(i % 6 == 5);
    let candidates: Vec<&BlockId> = blocks.iter().map(|b| &b.id).filter(|id| !used.contains(*id)).collect();
    assert!(candidates.len() >= rep + extra, "not enough blocks to replace in submission {i}");
    let start = (i * 7) % candidates.len();
    let replaces: Vec<BlockId> =
        (0..rep + extra).map(|k| candidates[(start + k) % candidates.len()].clone()).collect();

    for (k, id) in replaces.iter().take(rep).enumerate() {
        let text = match tree.get(id).map(|b| b.kind) {
            Some(BlockKind::Section) => format!("{} (rev {})", OUTLINE[(i + k) % OUTLINE.len()].0, i + 1),
            _ => format!("Revised wording {}.{} for clarity.", i + 1, k + 1),
        };
        edits.push(json!({ "kind": "replace", "block_id": id, "text": text }));
    }
    for id in &deletes {
        edits.push(json!({ "kind": "delete", "block_id": id }));
    }
    for id in &formats {
        edits.push(json!({ "kind": "format", "block_id": id, "done": true }));
    }
    let accepted = edits.len();
    for id in replaces.iter().skip(rep) {
        edits.push(json!({ "kind": "replace", "block_id": id, "text": "An alternative nobody asked for." }));
    }
    Plan { edits, accepted }
}
