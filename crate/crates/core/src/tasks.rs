//! Randomized, skip-able task allocation.
//!
//! Workers pull tasks one at a time. A pull picks uniformly among open tasks
//! the worker has not skipped; a worker may also claim a specific open task.
//! Skipping returns the task to the pool and bars that worker from it for
//! good. A task every active worker has skipped is escalated to the author
//! instead of being left to rot.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doc::{BlockKind, DocumentTree};
use crate::ids::{ActorId, BlockId, TaskId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("unknown task {0}")]
    UnknownTask(TaskId),
    #[error("task {0} is not assigned to this worker")]
    NotAssignee(TaskId),
    #[error("task {0} is already done")]
    AlreadyDone(TaskId),
    #[error("task {0} is not open for this worker")]
    Unavailable(TaskId),
    #[error("worker already holds task {0}")]
    WorkerBusy(TaskId),
    #[error("task {0} is not escalated")]
    NotEscalated(TaskId),
    #[error("unknown target section {0}")]
    UnknownTarget(String),
    #[error("task id {0} is already in use")]
    DuplicateTask(TaskId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Open,
    Assigned,
    Done,
    Escalated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: TaskId,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_section: Option<BlockId>,
    pub state: TaskState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignee: Option<ActorId>,
    pub skip_set: BTreeSet<ActorId>,
    pub created_seq: u64,
}

impl Task {
    fn eligible_for(&self, worker: &ActorId) -> bool {
        self.state == TaskState::Open && !self.skip_set.contains(worker)
    }
}

/// A task template: instruction text and an optional target section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskTemplate {
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_section: Option<BlockId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskQueue {
    tasks: BTreeMap<TaskId, Task>,
}

impl TaskQueue {
    pub fn get(&self, id: &TaskId) -> Option<&Task> {
        self.tasks.get(id)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.values()
    }

    pub fn held_by(&self, worker: &ActorId) -> Option<&Task> {
        self.tasks.values().find(|t| t.assignee.as_ref() == Some(worker))
    }

    /// Adds open tasks. Every target must name an existing section; nothing
    /// is added if any does not.
    pub fn seed_tasks(
        &mut self,
        doc: &DocumentTree,
        templates: &[TaskTemplate],
        mut next_id: impl FnMut() -> TaskId,
        created_seq: u64,
    ) -> Result<Vec<Task>, TaskError> {
        for t in templates {
            if let Some(section) = &t.target_section {
                let ok = doc.get(section).is_some_and(|b| b.kind == BlockKind::Section);
                if !ok {
                    return Err(TaskError::UnknownTarget(section.to_string()));
                }
            }
        }
        let mut out = Vec::with_capacity(templates.len());
        for t in templates {
            let id = next_id();
            if self.tasks.contains_key(&id) {
                return Err(TaskError::DuplicateTask(id));
            }
            let task = Task {
                id: id.clone(),
                description: t.description.clone(),
                target_section: t.target_section.clone(),
                state: TaskState::Open,
                assignee: None,
                skip_set: BTreeSet::new(),
                created_seq,
            };
            self.tasks.insert(id, task.clone());
            out.push(task);
        }
        Ok(out)
    }

    /// Hands the worker a uniformly random eligible task. A worker already
    /// holding a task gets that task back and no random draw happens.
    /// Returns the task and whether it was newly assigned.
    pub fn next_task<R: Rng + ?Sized>(
        &mut self,
        worker: &ActorId,
        rng: &mut R,
    ) -> Option<(Task, bool)> {
        if let Some(held) = self.held_by(worker) {
            return Some((held.clone(), false));
        }
        let eligible: Vec<TaskId> =
            self.tasks.values().filter(|t| t.eligible_for(worker)).map(|t| t.id.clone()).collect();
        if eligible.is_empty() {
            return None;
        }
        let pick = &eligible[rng.random_range(0..eligible.len())];
        Some((self.assign(pick, worker), true))
    }

    /// Self-selection of one specific open task.
    pub fn claim(&mut self, worker: &ActorId, task_id: &TaskId) -> Result<(Task, bool), TaskError> {
        let task = self.tasks.get(task_id).ok_or_else(|| TaskError::UnknownTask(task_id.clone()))?;
        if task.assignee.as_ref() == Some(worker) {
            return Ok((task.clone(), false));
        }
        if let Some(held) = self.held_by(worker) {
            return Err(TaskError::WorkerBusy(held.id.clone()));
        }
        let task = &self.tasks[task_id];
        if !task.eligible_for(worker) {
            return Err(TaskError::Unavailable(task_id.clone()));
        }
        Ok((self.assign(task_id, worker), true))
    }

    /// Author re-opens an escalated task by handing it to a worker.
    pub fn reassign(&mut self, task_id: &TaskId, worker: &ActorId) -> Result<Task, TaskError> {
        let task = self.tasks.get(task_id).ok_or_else(|| TaskError::UnknownTask(task_id.clone()))?;
        if task.state != TaskState::Escalated {
            return Err(TaskError::NotEscalated(task_id.clone()));
        }
        if let Some(held) = self.held_by(worker) {
            return Err(TaskError::WorkerBusy(held.id.clone()));
        }
        Ok(self.assign(task_id, worker))
    }

    fn assign(&mut self, task_id: &TaskId, worker: &ActorId) -> Task {
        let task = self.tasks.get_mut(task_id).expect("caller checked the id");
        task.state = TaskState::Assigned;
        task.assignee = Some(worker.clone());
        task.clone()
    }

    fn assigned_to(&mut self, worker: &ActorId, task_id: &TaskId) -> Result<&mut Task, TaskError> {
        let task = self.tasks.get_mut(task_id).ok_or_else(|| TaskError::UnknownTask(task_id.clone()))?;
        if task.state == TaskState::Done {
            return Err(TaskError::AlreadyDone(task_id.clone()));
        }
        if task.state != TaskState::Assigned || task.assignee.as_ref() != Some(worker) {
            return Err(TaskError::NotAssignee(task_id.clone()));
        }
        Ok(task)
    }

    /// Returns the task to the pool and remembers that this worker passed.
    /// The caller runs [`TaskQueue::escalate_check`] afterwards.
    pub fn skip_task(&mut self, worker: &ActorId, task_id: &TaskId) -> Result<(), TaskError> {
        let task = self.assigned_to(worker, task_id)?;
        task.state = TaskState::Open;
        task.assignee = None;
        task.skip_set.insert(worker.clone());
        Ok(())
    }

    pub fn complete_task(&mut self, worker: &ActorId, task_id: &TaskId) -> Result<(), TaskError> {
        let task = self.assigned_to(worker, task_id)?;
        task.state = TaskState::Done;
        task.assignee = None;
        Ok(())
    }

    /// Escalates every open task that all of `active_workers` have skipped.
    /// An empty worker set escalates nothing.
    pub fn escalate_check(&mut self, active_workers: &BTreeSet<ActorId>) -> Vec<TaskId> {
        if active_workers.is_empty() {
            return Vec::new();
        }
        let mut out = Vec::new();
        for task in self.tasks.values_mut() {
            if task.state == TaskState::Open && task.skip_set.is_superset(active_workers) {
                task.state = TaskState::Escalated;
                out.push(task.id.clone());
            }
        }
        out
    }

    /// Escalates one task, checking it qualifies against `active_workers`.
    pub fn escalate(&mut self, task_id: &TaskId, active_workers: &BTreeSet<ActorId>) -> Result<(), TaskError> {
        let task = self.tasks.get_mut(task_id).ok_or_else(|| TaskError::UnknownTask(task_id.clone()))?;
        if task.state != TaskState::Open || active_workers.is_empty() || !task.skip_set.is_superset(active_workers)
        {
            return Err(TaskError::Unavailable(task_id.clone()));
        }
        task.state = TaskState::Escalated;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::parse_seed_outline;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn queue(n: usize) -> TaskQueue {
        let doc = parse_seed_outline("d".into(), "# Introduction\n- a").unwrap();
        let mut q = TaskQueue::default();
        let templates: Vec<_> = (0..n)
            .map(|i| TaskTemplate { description: format!("task {i}"), target_section: None })
            .collect();
        let mut counter = 0;
        q.seed_tasks(&doc, &templates, || { counter += 1; TaskId(format!("t{counter}")) }, 1).unwrap();
        q
    }

    fn w(s: &str) -> ActorId {
        ActorId::from(s)
    }

    #[test]
    fn seeding() {
        let q = queue(2);
        assert_eq!(q.tasks().count(), 2);
        assert!(q.tasks().all(|t| t.state == TaskState::Open && t.skip_set.is_empty()));
        assert_eq!(queue(0).tasks().count(), 0);

        let doc = parse_seed_outline("d".into(), "# Introduction\n- a").unwrap();
        let mut q = TaskQueue::default();
        let intro = TaskTemplate {
            description: "turn the bullets in the 'Introduction' into paragraphs".into(),
            target_section: Some("s1".into()),
        };
        let tasks = q.seed_tasks(&doc, &[intro], || "t1".into(), 1).unwrap();
        assert_eq!(tasks[0].target_section, Some(BlockId::from("s1")));
        let bad = TaskTemplate { description: "x".into(), target_section: Some("s2".into()) };
        assert!(matches!(q.seed_tasks(&doc, &[bad], || "t2".into(), 1), Err(TaskError::UnknownTarget(_))));
    }

    #[test]
    fn single_eligible_task_is_assigned() {
        let mut q = queue(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (task, fresh) = q.next_task(&w("w1"), &mut rng).unwrap();
        assert!(fresh);
        assert_eq!(task.state, TaskState::Assigned);
        assert_eq!(task.assignee, Some(w("w1")));
        // polling again returns the held task
        let (again, fresh) = q.next_task(&w("w1"), &mut rng).unwrap();
        assert!(!fresh);
        assert_eq!(again.id, task.id);
    }

    #[test]
    fn skipped_tasks_are_never_reoffered() {
        let mut q = queue(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2 {
            let (t, _) = q.next_task(&w("w1"), &mut rng).unwrap();
            q.skip_task(&w("w1"), &t.id).unwrap();
            assert_eq!(q.get(&t.id).unwrap().skip_set, BTreeSet::from([w("w1")]));
            assert_eq!(q.get(&t.id).unwrap().state, TaskState::Open);
        }
        assert!(q.next_task(&w("w1"), &mut rng).is_none());
        assert!(q.next_task(&w("w2"), &mut rng).is_some());
    }

    #[test]
    fn only_the_assignee_may_skip_or_complete() {
        let mut q = queue(1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (t, _) = q.next_task(&w("w1"), &mut rng).unwrap();
        assert_eq!(q.skip_task(&w("w2"), &t.id).unwrap_err(), TaskError::NotAssignee(t.id.clone()));
        assert_eq!(q.complete_task(&w("w2"), &t.id).unwrap_err(), TaskError::NotAssignee(t.id.clone()));
        assert_eq!(q.skip_task(&w("w1"), &"t9".into()).unwrap_err(), TaskError::UnknownTask("t9".into()));
        q.complete_task(&w("w1"), &t.id).unwrap();
        assert_eq!(q.get(&t.id).unwrap().state, TaskState::Done);
        assert_eq!(q.complete_task(&w("w1"), &t.id).unwrap_err(), TaskError::AlreadyDone(t.id.clone()));
        assert!(q.next_task(&w("w1"), &mut rng).is_none());
    }

    #[test]
    fn completing_an_unassigned_task_fails() {
        let mut q = queue(1);
        assert_eq!(q.complete_task(&w("w1"), &"t1".into()).unwrap_err(), TaskError::NotAssignee("t1".into()));
    }

    #[test]
    fn claim_rules() {
        let mut q = queue(3);
        let (t, fresh) = q.claim(&w("w1"), &"t2".into()).unwrap();
        assert!(fresh && t.id == TaskId::from("t2"));
        assert_eq!(q.claim(&w("w1"), &"t3".into()).unwrap_err(), TaskError::WorkerBusy("t2".into()));
        assert_eq!(q.claim(&w("w2"), &"t2".into()).unwrap_err(), TaskError::Unavailable("t2".into()));
        q.skip_task(&w("w1"), &"t2".into()).unwrap();
        assert_eq!(q.claim(&w("w1"), &"t2".into()).unwrap_err(), TaskError::Unavailable("t2".into()));
    }

    #[test]
    fn escalation_needs_every_active_worker() {
        let mut q = queue(2);
        let active: BTreeSet<ActorId> = ["w1", "w2", "w3"].map(w).into();
        for name in ["w1", "w2"] {
            q.claim(&w(name), &"t1".into()).unwrap();
            q.skip_task(&w(name), &"t1".into()).unwrap();
        }
        assert!(q.escalate_check(&active).is_empty());
        assert_eq!(q.get(&"t1".into()).unwrap().state, TaskState::Open);
        q.claim(&w("w3"), &"t1".into()).unwrap();
        q.skip_task(&w("w3"), &"t1".into()).unwrap();
        assert_eq!(q.escalate_check(&active), vec![TaskId::from("t1")]);
        assert_eq!(q.get(&"t1".into()).unwrap().state, TaskState::Escalated);
        assert!(q.escalate_check(&BTreeSet::new()).is_empty());
    }

    #[test]
    fn reassign_after_escalation() {
        let mut q = queue(1);
        let active: BTreeSet<ActorId> = [w("w1")].into();
        q.claim(&w("w1"), &"t1".into()).unwrap();
        q.skip_task(&w("w1"), &"t1".into()).unwrap();
        q.escalate_check(&active);
        let t = q.reassign(&"t1".into(), &w("w1")).unwrap();
        assert_eq!(t.state, TaskState::Assigned);
        assert_eq!(t.skip_set.len(), 1);
        assert_eq!(q.reassign(&"t1".into(), &w("w2")).unwrap_err(), TaskError::NotEscalated("t1".into()));
    }

    #[test]
    fn same_seed_same_choices() {
        let picks = |seed| {
            let mut q = queue(6);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..6).map(|i| q.next_task(&w(&format!("w{i}")), &mut rng).unwrap().0.id).collect::<Vec<_>>()
        };
        assert_eq!(picks(9), picks(9));
    }
}
