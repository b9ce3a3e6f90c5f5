//! End-to-end crowd run: one author, several workers, one "expand the
//! bullets" task per section, adversarial skips, and an author who reviews
//! everything, answers questions and rescues escalated tasks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{gen_expand_bullets_worker, Action, ActorSpec, Header, Runner, SimError, SimReport, Transcript};
use crate::doc::BlockKind;
use crate::ids::{ActorId, BlockId, DocId, EditId, Role, TaskId};
use crate::service::{Event, EventBody, Service};
use crate::suggest::{EditSpec, EditStatus};
use crate::tasks::{Task, TaskState};

#[derive(Debug, Clone)]
pub struct E2eConfig {
    pub seed: u64,
    /// Sections that get bullets.
    pub sections: usize,
    pub bullets_per_section: usize,
    /// Extra sections with no bullets; every worker skips their tasks.
    pub empty_sections: usize,
    pub workers: usize,
    /// Chance that a worker skips a fresh task during the first rounds.
    pub skip_probability: f64,
    pub reject_probability: f64,
    pub question_probability: f64,
    pub max_rounds: usize,
}

impl Default for E2eConfig {
    fn default() -> Self {
        E2eConfig {
            seed: 1,
            sections: 10,
            bullets_per_section: 3,
            empty_sections: 2,
            workers: 5,
            skip_probability: 0.3,
            reject_probability: 0.1,
            question_probability: 0.25,
            max_rounds: 200,
        }
    }
}

const AUTHOR: &str = "author";

pub fn e2e_outline(config: &E2eConfig) -> String {
    let mut out = String::new();
    for s in 0..config.sections + config.empty_sections {
        out.push_str(&format!("# Part {}\n", s + 1));
        if s < config.sections {
            for b in 0..config.bullets_per_section {
                out.push_str(&format!("- idea {} of part {}\n", b + 1, s + 1));
            }
        }
    }
    out
}

/// Drives the run and returns the transcript it produced with the report.
pub fn run_e2e(config: &E2eConfig, service: &Service) -> Result<(Transcript, SimReport), SimError> {
    let workers: Vec<ActorId> = (1..=config.workers).map(|i| ActorId(format!("w{i}"))).collect();
    let header = Header {
        seed: config.seed,
        actors: std::iter::once(ActorSpec { id: AUTHOR.into(), role: Role::Author })
            .chain(workers.iter().map(|w| ActorSpec { id: w.clone(), role: Role::Worker }))
            .collect(),
        note: None,
    };
    let mut r = Runner::new(service, header);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let tasks: Vec<Value> = (0..config.sections + config.empty_sections)
        .map(|s| json!({ "description": format!("Expand the bullets of Part {}", s + 1), "target_section_title": format!("Part {}", s + 1) }))
        .collect();
    let resp = r.call(Action::new(
        AUTHOR,
        "POST /documents",
        json!({ "seed_outline": e2e_outline(config), "tasks": tasks, "rng_seed": config.seed }),
    ))?;
    let doc = DocId::from(resp.body["doc_id"].as_str().expect("doc id"));
    let poll = format!("GET /documents/{doc}/events?since=${{cursor}}");
    for w in &workers {
        r.call(Action::new(w.clone(), poll.clone(), Value::Null))?;
    }

    let mut toggled = false;
    for round in 0..config.max_rounds {
        for (wi, w) in workers.iter().enumerate() {
            worker_turn(&mut r, config, &mut rng, &doc, w, wi, round)?;
        }
        author_turn(&mut r, config, &mut rng, &doc, &workers, &mut toggled)?;
        if finished(&r, &doc) {
            break;
        }
    }
    r.call(Action::new(AUTHOR, poll.clone(), Value::Null))?;
    for w in &workers {
        r.call(Action::new(w.clone(), poll.clone(), Value::Null))?;
    }
    Ok((r.transcript(), r.report()))
}

fn finished(r: &Runner<'_>, doc: &DocId) -> bool {
    r.service().inspect(|s| {
        let d = s.doc(doc).expect("document");
        d.engine.pending().next().is_none() && d.tasks.tasks().all(|t| t.state == TaskState::Done)
    })
}

fn held_task(r: &Runner<'_>, doc: &DocId, w: &ActorId) -> Option<Task> {
    r.service().inspect(|s| s.doc(doc).ok().and_then(|d| d.tasks.held_by(w).cloned()))
}

fn worker_turn(
    r: &mut Runner<'_>,
    config: &E2eConfig,
    rng: &mut ChaCha8Rng,
    doc: &DocId,
    w: &ActorId,
    wi: usize,
    round: usize,
) -> Result<(), SimError> {
    r.call(Action::new(w.clone(), format!("GET /documents/{doc}/events?since=${{cursor}}"), Value::Null))?;
    let task = match held_task(r, doc, w) {
        Some(t) => t,
        None => {
            let resp = r.call(Action::new(w.clone(), format!("GET /documents/{doc}/tasks/next"), Value::Null))?;
            if resp.body.is_null() {
                return Ok(());
            }
            serde_json::from_value(resp.body).expect("task body")
        }
    };
    if round < 3 && task.skip_set.is_empty() && rng.random_bool(config.skip_probability) {
        r.call(Action::new(w.clone(), format!("POST /tasks/{}/skip", task.id), Value::Null))?;
        return Ok(());
    }
    let tree = r.service().inspect(|s| s.doc(doc).expect("document").tree.clone());
    let persona = config.seed.wrapping_mul(1_000_003).wrapping_add(wi as u64);
    let mut first_edit = None;
    for action in gen_expand_bullets_worker(persona, w, &tree, &task) {
        let resp = r.call(action)?;
        if first_edit.is_none() {
            first_edit = resp.body["edit_ids"][0].as_str().map(EditId::from);
        }
    }
    if let Some(edit) = first_edit {
        if rng.random_bool(config.question_probability) {
            r.call(Action::new(
                w.clone(),
                format!("POST /documents/{doc}/threads"),
                json!({ "anchor": { "edit": edit }, "text": "Is this the tone you want?" }),
            ))?;
        }
    }
    Ok(())
}

fn author_turn(
    r: &mut Runner<'_>,
    config: &E2eConfig,
    rng: &mut ChaCha8Rng,
    doc: &DocId,
    workers: &[ActorId],
    toggled: &mut bool,
) -> Result<(), SimError> {
    let resp = r.call(Action::new(AUTHOR, format!("GET /documents/{doc}/events?since=${{cursor}}"), Value::Null))?;
    let events: Vec<Event> = serde_json::from_value(resp.body["events"].clone()).expect("events");
    for event in &events {
        match &event.body {
            EventBody::EditProposed { edit_id, spec, .. } => {
                // Once per run, the author strikes through a bullet a worker is
                // about to expand, which invalidates the insert anchored on it.
                if let EditSpec::Insert { after_id: Some(anchor), .. } = spec {
                    if !*toggled && status(r, doc, edit_id) == Some(EditStatus::Pending) {
                        *toggled = true;
                        r.call(Action::new(
                            AUTHOR,
                            format!("POST /documents/{doc}/blocks/{anchor}/done"),
                            json!({ "done": true }),
                        ))?;
                    }
                }
                let review = format!("POST /documents/{doc}/edits/{edit_id}/review");
                match status(r, doc, edit_id) {
                    Some(EditStatus::Pending) => {
                        let decision = if rng.random_bool(config.reject_probability) { "reject" } else { "accept" };
                        r.call(Action::new(AUTHOR, review, json!({ "decision": decision })))?;
                    }
                    Some(EditStatus::Stale) => {
                        r.call(Action::new(AUTHOR, review, json!({ "decision": "accept" })).expect_error("stale_edit"))?;
                    }
                    _ => {}
                }
            }
            EventBody::CommentPosted { thread_id, role: Role::Worker, .. } => {
                r.call(Action::new(
                    AUTHOR,
                    format!("POST /threads/{thread_id}/replies"),
                    json!({ "text": "Yes, keep it plain.", "raw_token": format!("raw-{}", event.seq) }),
                ))?;
                r.call(Action::new(AUTHOR, format!("POST /threads/{thread_id}/resolve"), Value::Null))?;
            }
            _ => {}
        }
    }
    rescue_escalated(r, doc, workers)
}

/// Gives every escalated task something to work on and hands it to an idle
/// worker.
fn rescue_escalated(r: &mut Runner<'_>, doc: &DocId, workers: &[ActorId]) -> Result<(), SimError> {
    let escalated: Vec<Task> = r.service().inspect(|s| {
        s.doc(doc).expect("document").tasks.tasks().filter(|t| t.state == TaskState::Escalated).cloned().collect()
    });
    for task in escalated {
        let Some(idle) = workers.iter().find(|w| held_task(r, doc, w).is_none()) else {
            return Ok(());
        };
        if let Some(section) = &task.target_section {
            let has_bullet = r.service().inspect(|s| {
                let d = s.doc(doc).expect("document");
                d.tree.children(section).iter().any(|b| b.kind == BlockKind::Bullet && !b.done)
            });
            if !has_bullet {
                let last: Option<BlockId> = r
                    .service()
                    .inspect(|s| s.doc(doc).expect("document").tree.children(section).last().map(|b| b.id.clone()));
                r.call(Action::new(
                    AUTHOR,
                    format!("POST /documents/{doc}/blocks"),
                    json!({ "parent_id": section, "after_id": last, "kind": "bullet", "text": "one point the author dictated" }),
                ))?;
            }
        }
        let idle = idle.clone();
        reopen(r, &task.id, &idle)?;
    }
    Ok(())
}

fn reopen(r: &mut Runner<'_>, task: &TaskId, worker: &ActorId) -> Result<(), SimError> {
    r.call(Action::new(AUTHOR, format!("POST /tasks/{task}/reopen"), json!({ "worker_id": worker })))?;
    Ok(())
}

fn status(r: &Runner<'_>, doc: &DocId, edit: &EditId) -> Option<EditStatus> {
    r.service().inspect(|s| s.doc(doc).ok().and_then(|d| d.engine.get(edit).map(|e| e.status)))
}
