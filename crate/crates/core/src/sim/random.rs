//! Randomized transcripts for determinism checks. Actions are chosen by
//! looking at the live state, so most are valid, but nothing stops the
//! generator from sending requests that fail; those are recorded as expected
//! errors.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{Action, ActorSpec, Header, Runner, SimError, Transcript};
use crate::doc::{Block, BlockKind};
use crate::ids::{ActorId, BlockId, DocId, Role};
use crate::service::Service;

const AUTHOR: &str = "author";
const WORKERS: [&str; 3] = ["w1", "w2", "w3"];
const WORDS: &[&str] = &["alpha", "beta", "gamma", "delta", "draft", "note", "idea", "claim"];

/// Generates `actions` actions (the first creates the document) by driving
/// `service`, and returns the transcript that reproduces the run.
pub fn random_transcript(seed: u64, actions: usize, service: &Service) -> Result<Transcript, SimError> {
    let header = Header {
        seed,
        actors: std::iter::once((AUTHOR, Role::Author))
            .chain(WORKERS.iter().map(|w| (*w, Role::Worker)))
            .map(|(id, role)| ActorSpec { id: id.into(), role })
            .collect(),
        note: None,
    };
    let mut r = Runner::new(service, header);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let resp = r.call(Action::new(
        AUTHOR,
        "POST /documents",
        json!({
            "seed_outline": "# One\n- first\n- second\n# Two\n- third\n# Three\n",
            "tasks": [
                { "description": "expand one", "target_section_title": "One" },
                { "description": "expand two", "target_section_title": "Two" },
                { "description": "polish" },
                { "description": "expand three", "target_section_title": "Three" },
            ],
            "rng_seed": seed,
        }),
    ))?;
    let doc = DocId::from(resp.body["doc_id"].as_str().expect("doc id"));
    for _ in 1..actions {
        let action = next_action(&r, &mut rng, &doc);
        r.observe(action)?;
    }
    Ok(r.transcript())
}

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.random_range(1..6);
    (0..n).map(|_| *WORDS.choose(rng).expect("words")).collect::<Vec<_>>().join(" ")
}

fn next_action(r: &Runner<'_>, rng: &mut ChaCha8Rng, doc: &DocId) -> Action {
    let (blocks, edits, threads, tasks) = r.service().inspect(|s| {
        let d = s.doc(doc).expect("document");
        (
            d.tree.in_display_order().into_iter().cloned().collect::<Vec<Block>>(),
            d.engine.edits().map(|e| (e.id.clone(), e.status)).collect::<Vec<_>>(),
            d.comments.threads().map(|t| t.id.clone()).collect::<Vec<_>>(),
            d.tasks.tasks().map(|t| t.id.clone()).collect::<Vec<_>>(),
        )
    });
    let worker: ActorId = (*WORKERS.choose(rng).expect("workers")).into();
    let any_block = |rng: &mut ChaCha8Rng| -> BlockId {
        if blocks.is_empty() || rng.random_bool(0.05) {
            BlockId::from("missing")
        } else {
            blocks.choose(rng).expect("blocks").id.clone()
        }
    };
    let placement = |rng: &mut ChaCha8Rng| -> (BlockId, Option<BlockId>, BlockKind) {
        let sections: Vec<&Block> = blocks.iter().filter(|b| b.kind == BlockKind::Section).collect();
        if sections.is_empty() || rng.random_bool(0.15) {
            let after = sections.choose(rng).map(|b| b.id.clone());
            return (BlockId::root(), after, BlockKind::Section);
        }
        let parent = sections.choose(rng).expect("sections").id.clone();
        let siblings: Vec<&Block> = blocks.iter().filter(|b| b.parent_id == parent).collect();
        let after = if rng.random_bool(0.3) { None } else { siblings.choose(rng).map(|b| b.id.clone()) };
        let kind = if rng.random_bool(0.5) { BlockKind::Bullet } else { BlockKind::Paragraph };
        (parent, after, kind)
    };

    match rng.random_range(0..100) {
        0..25 => {
            let n = rng.random_range(1..4);
            let specs: Vec<Value> = (0..n)
                .map(|_| match rng.random_range(0..4) {
                    0 => {
                        let (parent, after, kind) = placement(rng);
                        json!({ "kind": "insert", "parent_id": parent, "after_id": after, "block_kind": kind, "text": text(rng) })
                    }
                    1 => json!({ "kind": "replace", "block_id": any_block(rng), "text": text(rng) }),
                    2 => json!({ "kind": "delete", "block_id": any_block(rng) }),
                    _ => json!({ "kind": "format", "block_id": any_block(rng), "done": rng.random_bool(0.7) }),
                })
                .collect();
            Action::new(worker, format!("POST /documents/{doc}/edits"), json!({ "edits": specs }))
        }
        25..42 => {
            let pending: Vec<_> =
                edits.iter().filter(|(_, st)| *st == crate::suggest::EditStatus::Pending).collect();
            let edit = if !pending.is_empty() && rng.random_bool(0.85) {
                pending.choose(rng).map(|(id, _)| id.to_string())
            } else {
                edits.choose(rng).map(|(id, _)| id.to_string())
            }
            .unwrap_or_else(|| "e0".into());
            let decision = if rng.random_bool(0.8) { "accept" } else { "reject" };
            Action::new(AUTHOR, format!("POST /documents/{doc}/edits/{edit}/review"), json!({ "decision": decision }))
        }
        42..50 => {
            let (parent, after, kind) = placement(rng);
            let mut body = json!({ "parent_id": parent, "after_id": after, "kind": kind, "text": text(rng) });
            if rng.random_bool(0.3) {
                body["raw_token"] = json!(format!("raw-{}", rng.random_range(0..1000)));
            }
            Action::new(AUTHOR, format!("POST /documents/{doc}/blocks"), body)
        }
        50..55 => Action::new(
            AUTHOR,
            format!("POST /documents/{doc}/blocks/{}/done", any_block(rng)),
            json!({ "done": rng.random_bool(0.7) }),
        ),
        55..62 => {
            let actor: ActorId = if rng.random_bool(0.5) { AUTHOR.into() } else { worker };
            let anchor = match edits.choose(rng) {
                Some((id, _)) if rng.random_bool(0.5) => json!({ "edit": id }),
                _ => json!({ "block": any_block(rng) }),
            };
            Action::new(actor, format!("POST /documents/{doc}/threads"), json!({ "anchor": anchor, "text": text(rng) }))
        }
        62..67 => {
            let actor: ActorId = if rng.random_bool(0.5) { AUTHOR.into() } else { worker };
            let thread = threads.choose(rng).map_or("th0".to_owned(), |t| t.to_string());
            Action::new(actor, format!("POST /threads/{thread}/replies"), json!({ "text": text(rng) }))
        }
        67..70 => {
            let thread = threads.choose(rng).map_or("th0".to_owned(), |t| t.to_string());
            Action::new(AUTHOR, format!("POST /threads/{thread}/resolve"), Value::Null)
        }
        70..78 => Action::new(worker, format!("GET /documents/{doc}/tasks/next"), Value::Null),
        78..81 => {
            let task = tasks.choose(rng).map_or("t0".to_owned(), |t| t.to_string());
            Action::new(worker, format!("GET /documents/{doc}/tasks/next?claim={task}"), Value::Null)
        }
        81..91 => {
            let task = tasks.choose(rng).map_or("t0".to_owned(), |t| t.to_string());
            let verb = if rng.random_bool(0.5) { "skip" } else { "done" };
            Action::new(worker, format!("POST /tasks/{task}/{verb}"), Value::Null)
        }
        91..94 => {
            let task = tasks.choose(rng).map_or("t0".to_owned(), |t| t.to_string());
            Action::new(AUTHOR, format!("POST /tasks/{task}/reopen"), json!({ "worker_id": worker }))
        }
        _ => {
            let actor: ActorId = if rng.random_bool(0.3) { AUTHOR.into() } else { worker };
            Action::new(actor, format!("GET /documents/{doc}/events?since=${{cursor}}"), Value::Null)
        }
    }
}
