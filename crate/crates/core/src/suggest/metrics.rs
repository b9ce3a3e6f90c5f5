use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{EditId, Role, SubmissionId};
use crate::service::{Event, EventBody};

use super::{Decision, EditKind};

/// Workflow counters over a document's event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub submissions: u64,
    pub insertions: u64,
    pub replacements: u64,
    pub deletions: u64,
    pub formatting: u64,
    pub author_comments: u64,
}

impl MetricsSummary {
    pub fn edits(&self) -> u64 {
        self.insertions + self.replacements + self.deletions + self.formatting
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("malformed log at seq {0}")]
    MalformedLog(u64),
}

/// Counts accepted edits by kind, the submissions they came from, and the
/// author's comment messages. An author marking a bullet done counts as a
/// formatting change.
pub fn classify_metrics(events: &[Event]) -> Result<MetricsSummary, MetricsError> {
    let mut proposed: BTreeMap<&EditId, (EditKind, &SubmissionId)> = BTreeMap::new();
    let mut submissions: BTreeSet<&SubmissionId> = BTreeSet::new();
    let mut summary = MetricsSummary::default();
    let mut last_seq = 0;

    for event in events {
        if event.seq <= last_seq {
            return Err(MetricsError::MalformedLog(event.seq));
        }
        last_seq = event.seq;
        match &event.body {
            EventBody::EditProposed { edit_id, submission_id, spec, .. } => {
                if proposed.insert(edit_id, (spec.kind(), submission_id)).is_some() {
                    return Err(MetricsError::MalformedLog(event.seq));
                }
            }
            EventBody::EditReviewed { edit_id, decision, .. } => {
                let &(kind, submission) =
                    proposed.get(edit_id).ok_or(MetricsError::MalformedLog(event.seq))?;
                if *decision == Decision::Accept {
                    submissions.insert(submission);
                    *match kind {
                        EditKind::Insert => &mut summary.insertions,
                        EditKind::Replace => &mut summary.replacements,
                        EditKind::Delete => &mut summary.deletions,
                        EditKind::Format => &mut summary.formatting,
                    } += 1;
                }
            }
            EventBody::BlockDone { .. } => summary.formatting += 1,
            EventBody::CommentPosted { role: Role::Author, .. } => summary.author_comments += 1,
            _ => {}
        }
    }
    summary.submissions = submissions.len() as u64;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suggest::EditSpec;

    fn ev(seq: u64, body: EventBody) -> Event {
        Event { seq, doc_id: "doc1".into(), body, wall_time: 0 }
    }

    fn proposed(seq: u64, edit: &str, sub: &str, spec: EditSpec) -> Event {
        ev(
            seq,
            EventBody::EditProposed {
                edit_id: edit.into(),
                worker_id: "w1".into(),
                submission_id: sub.into(),
                base_revision: 0,
                spec,
            },
        )
    }

    fn reviewed(seq: u64, edit: &str, decision: Decision) -> Event {
        ev(
            seq,
            EventBody::EditReviewed {
                edit_id: edit.into(),
                author_id: "a".into(),
                worker_id: "w1".into(),
                decision,
                applied_revision: None,
                newly_stale: vec![],
                block_id: None,
            },
        )
    }

    fn comment(seq: u64, role: Role) -> Event {
        ev(
            seq,
            EventBody::CommentPosted {
                thread_id: "th1".into(),
                anchor: None,
                author_id: "x".into(),
                role,
                text: "hi".into(),
                raw_token: None,
                message_seq: seq,
            },
        )
    }

    #[test]
    fn counts_only_accepted_edits_and_their_submissions() {
        let log = vec![
            proposed(1, "e1", "s1", EditSpec::Replace { block_id: "b".into(), text: "t".into() }),
            proposed(2, "e2", "s1", EditSpec::Delete { block_id: "c".into() }),
            proposed(3, "e3", "s2", EditSpec::Format { block_id: "d".into(), done: true }),
            reviewed(4, "e1", Decision::Accept),
            reviewed(5, "e2", Decision::Accept),
            reviewed(6, "e3", Decision::Reject),
            comment(7, Role::Author),
            comment(8, Role::Worker),
        ];
        let m = classify_metrics(&log).unwrap();
        assert_eq!(
            m,
            MetricsSummary {
                submissions: 1,
                insertions: 0,
                replacements: 1,
                deletions: 1,
                formatting: 0,
                author_comments: 1
            }
        );
        assert_eq!(m.edits(), 2);
    }

    #[test]
    fn author_done_toggle_is_formatting() {
        let log = vec![ev(
            1,
            EventBody::BlockDone { author_id: "a".into(), block_id: "b".into(), done: true, revision: 1, newly_stale: vec![] },
        )];
        assert_eq!(classify_metrics(&log).unwrap().formatting, 1);
    }

    #[test]
    fn malformed_logs_are_rejected() {
        assert_eq!(classify_metrics(&[reviewed(1, "e9", Decision::Accept)]), Err(MetricsError::MalformedLog(1)));
        let out_of_order = vec![comment(2, Role::Author), comment(2, Role::Author)];
        assert_eq!(classify_metrics(&out_of_order), Err(MetricsError::MalformedLog(2)));
        let spec = EditSpec::Delete { block_id: "c".into() };
        let dup = vec![proposed(1, "e1", "s", spec.clone()), proposed(2, "e1", "s", spec)];
        assert_eq!(classify_metrics(&dup), Err(MetricsError::MalformedLog(2)));
    }
}
