use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::Action;
use crate::doc::{BlockKind, DocumentTree};
use crate::ids::ActorId;
use crate::suggest::EditSpec;
use crate::tasks::Task;

const OPENERS: &[&str] = &["In short,", "Concretely,", "To expand on this,", "Put simply,", "For example,"];
const BODIES: &[&str] = &[
    "the idea is worked out in a full sentence",
    "this point gets a short supporting paragraph",
    "the note becomes prose a reader can follow",
    "the outline item is turned into running text",
];

/// Plans a worker's actions for an "expand the bullets" task.
///
/// For each bullet of the target section the worker proposes a paragraph
/// right after it, then proposes marking the bullet done. All edits go in one
/// submission, followed by completing the task. Inserts come before formats
/// so accepting in order never invalidates a later edit of the batch. With no
/// target or no bullets to expand, the worker skips the task.
pub fn gen_expand_bullets_worker(
    persona_seed: u64,
    worker: &ActorId,
    doc: &DocumentTree,
    task: &Task,
) -> Vec<Action> {
    let skip = Action::new(worker.clone(), format!("POST /tasks/{}/skip", task.id), Value::Null);
    let Some(section) = task.target_section.as_ref() else {
        return vec![skip];
    };
    let bullets: Vec<_> = doc.children(section).into_iter().filter(|b| b.kind == BlockKind::Bullet).collect();
    if bullets.is_empty() {
        return vec![skip];
    }

    let mut rng = ChaCha8Rng::seed_from_u64(persona_seed);
    let mut edits = Vec::with_capacity(bullets.len() * 2);
    for bullet in &bullets {
        let opener = OPENERS.choose(&mut rng).expect("non-empty");
        let body = BODIES.choose(&mut rng).expect("non-empty");
        edits.push(EditSpec::Insert {
            parent_id: section.clone(),
            after_id: Some(bullet.id.clone()),
            block_kind: BlockKind::Paragraph,
            text: format!("{opener} {body}: {}.", bullet.text.trim().trim_end_matches('.')),
        });
    }
    for bullet in bullets.iter().filter(|b| !b.done) {
        edits.push(EditSpec::Format { block_id: bullet.id.clone(), done: true });
    }

    vec![
        Action::new(
            worker.clone(),
            format!("POST /documents/{}/edits", doc.doc_id),
            json!({ "submission_id": format!("sub-{worker}-{}", task.id), "edits": edits }),
        ),
        Action::new(worker.clone(), format!("POST /tasks/{}/done", task.id), Value::Null),
    ]
}
