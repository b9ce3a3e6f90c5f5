use std::collections::BTreeMap;

use serde_json::Value;

use super::{Action, ActorSpec, ErrorRecord, Header, SimError, SimReport, Transcript};
use crate::ids::{ActorId, DocId, Role};
use crate::service::{ApiRequest, ApiResponse, Method, Service};
use crate::suggest::classify_metrics;

/// Executes actions against a service, tracking sessions, bound variables
/// and per-actor event cursors. Every executed action is kept, so an
/// adaptive driver can hand back the transcript it produced.
pub struct Runner<'a> {
    service: &'a Service,
    header: Header,
    sessions: BTreeMap<ActorId, String>,
    vars: BTreeMap<String, Value>,
    cursors: BTreeMap<ActorId, u64>,
    consumed: BTreeMap<ActorId, Vec<u64>>,
    errors: Vec<ErrorRecord>,
    recorded: Vec<Action>,
    clock: u64,
    doc_id: Option<DocId>,
}

impl<'a> Runner<'a> {
    pub fn new(service: &'a Service, header: Header) -> Self {
        Runner {
            service,
            header,
            sessions: BTreeMap::new(),
            vars: BTreeMap::new(),
            cursors: BTreeMap::new(),
            consumed: BTreeMap::new(),
            errors: Vec::new(),
            recorded: Vec::new(),
            clock: 0,
            doc_id: None,
        }
    }

    /// Runs a whole transcript and reports on the result.
    pub fn run(service: &'a Service, transcript: &Transcript) -> Result<SimReport, SimError> {
        let mut runner = Runner::new(service, transcript.header.clone());
        for action in &transcript.actions {
            runner.step(action)?;
        }
        Ok(runner.report())
    }

    pub fn service(&self) -> &Service {
        self.service
    }

    pub fn doc_id(&self) -> Option<&DocId> {
        self.doc_id.as_ref()
    }

    pub fn var(&self, name: &str) -> Option<&Value> {
        self.vars.get(name)
    }

    pub fn cursor(&self, actor: &ActorId) -> u64 {
        self.cursors.get(actor).copied().unwrap_or(0)
    }

    pub fn add_actor(&mut self, id: impl Into<ActorId>, role: Role) {
        self.header.actors.push(ActorSpec { id: id.into(), role });
    }

    pub fn transcript(&self) -> Transcript {
        Transcript { header: self.header.clone(), actions: self.recorded.clone() }
    }

    /// Stamps the action with the next virtual time and runs it, failing on
    /// any outcome other than the one the action declares.
    pub fn call(&mut self, mut action: Action) -> Result<ApiResponse, SimError> {
        action.virtual_time = self.clock + 1;
        action.role = self.role_of(&action.actor_id);
        self.step(&action)
    }

    /// Like [`Runner::call`] but accepts any outcome, recording an error
    /// response as the action's expected error.
    pub fn observe(&mut self, mut action: Action) -> Result<ApiResponse, SimError> {
        action.virtual_time = self.clock + 1;
        action.role = self.role_of(&action.actor_id);
        action.expect_error = None;
        let index = self.recorded.len();
        let resp = self.execute(index, &action)?;
        if let Some(code) = resp.error_code() {
            action.expect_error = Some(code.to_owned());
            self.note_error(index, &action, code.to_owned());
        }
        self.recorded.push(action);
        Ok(resp)
    }

    /// Runs one action exactly as written.
    pub fn step(&mut self, action: &Action) -> Result<ApiResponse, SimError> {
        let index = self.recorded.len();
        let fail = |reason: String| SimError::Action { index, endpoint: action.endpoint.clone(), reason };
        if action.virtual_time < self.clock {
            return Err(fail(format!("virtual time {} goes backwards", action.virtual_time)));
        }
        let resp = self.execute(index, action)?;
        match (&action.expect_error, resp.error_code()) {
            (None, None) => {}
            (Some(want), Some(got)) if want == got => self.note_error(index, action, got.to_owned()),
            (Some(want), got) => {
                return Err(fail(format!("expected error {want}, got {}", got.unwrap_or("success"))));
            }
            (None, Some(got)) => return Err(fail(format!("unexpected error {got}: {}", resp.body))),
        }
        self.recorded.push(action.clone());
        Ok(resp)
    }

    fn note_error(&mut self, index: usize, action: &Action, code: String) {
        self.errors.push(ErrorRecord {
            index,
            actor_id: action.actor_id.clone(),
            endpoint: action.endpoint.clone(),
            code,
        });
    }

    fn execute(&mut self, index: usize, action: &Action) -> Result<ApiResponse, SimError> {
        let fail = |reason: String| SimError::Action { index, endpoint: action.endpoint.clone(), reason };
        self.clock = action.virtual_time;
        let actor = &action.actor_id;
        if action.role.is_some() && action.role != self.role_of(actor) {
            return Err(fail(format!("actor {actor} is not declared with that role")));
        }
        let token = self.session(actor).map_err(fail)?;

        let endpoint = self.interpolate_str(&action.endpoint, actor).map_err(fail)?;
        let (method, target) = endpoint.split_once(' ').ok_or_else(|| fail("endpoint needs a method".into()))?;
        let method: Method = method.parse().map_err(|e: crate::service::ApiError| fail(e.message))?;
        let payload = self.interpolate(&action.payload, actor).map_err(fail)?;
        let mut req = ApiRequest::new(method, target.trim()).with_token(token);
        req.body = payload;
        let is_poll = method == Method::Get && req.path.trim_end_matches('/').ends_with("/events");
        let is_create = method == Method::Post && req.path.trim_matches('/') == "documents";

        let resp = self.service.handle(req);
        if !resp.is_success() {
            return Ok(resp);
        }
        if is_create && self.doc_id.is_none() {
            self.doc_id = resp.body["doc_id"].as_str().map(DocId::from);
        }
        if is_poll {
            let seqs = resp.body["events"]
                .as_array()
                .map(|evs| evs.iter().filter_map(|e| e["seq"].as_u64()).collect::<Vec<_>>())
                .unwrap_or_default();
            self.consumed.entry(actor.clone()).or_default().extend(seqs);
            if let Some(cursor) = resp.body["cursor"].as_u64() {
                self.cursors.insert(actor.clone(), cursor);
            }
        }
        for (var, path) in &action.bind {
            let value = lookup(&resp.body, path).ok_or_else(|| fail(format!("response has no {path}")))?;
            self.vars.insert(var.clone(), value.clone());
        }
        Ok(resp)
    }

    fn role_of(&self, actor: &ActorId) -> Option<Role> {
        self.header.actors.iter().find(|a| &a.id == actor).map(|a| a.role)
    }

    fn session(&mut self, actor: &ActorId) -> Result<String, String> {
        if let Some(token) = self.sessions.get(actor) {
            return Ok(token.clone());
        }
        let role = self
            .header
            .actors
            .iter()
            .find(|a| &a.id == actor)
            .map(|a| a.role)
            .ok_or_else(|| format!("actor {actor} is not declared"))?;
        let token = self.service.open_session(actor.clone(), role, None).map_err(|e| e.to_string())?;
        self.sessions.insert(actor.clone(), token.clone());
        Ok(token)
    }

    fn resolve(&self, name: &str, actor: &ActorId) -> Result<Value, String> {
        if name == "cursor" {
            return Ok(Value::from(self.cursor(actor)));
        }
        self.vars.get(name).cloned().ok_or_else(|| format!("unbound variable {name}"))
    }

    fn interpolate_str(&self, s: &str, actor: &ActorId) -> Result<String, String> {
        let mut out = String::with_capacity(s.len());
        let mut rest = s;
        while let Some(start) = rest.find("${") {
            out.push_str(&rest[..start]);
            let end = rest[start..].find('}').ok_or_else(|| format!("unterminated variable in {s:?}"))? + start;
            match self.resolve(&rest[start + 2..end], actor)? {
                Value::String(v) => out.push_str(&v),
                other => out.push_str(&other.to_string()),
            }
            rest = &rest[end + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    fn interpolate(&self, v: &Value, actor: &ActorId) -> Result<Value, String> {
        Ok(match v {
            Value::String(s) => {
                let whole = s.strip_prefix("${").and_then(|r| r.strip_suffix('}'));
                match whole {
                    Some(name) if !name.contains("${") => self.resolve(name, actor)?,
                    _ => Value::String(self.interpolate_str(s, actor)?),
                }
            }
            Value::Array(items) => {
                Value::Array(items.iter().map(|i| self.interpolate(i, actor)).collect::<Result<_, _>>()?)
            }
            Value::Object(map) => Value::Object(
                map.iter()
                    .map(|(k, v)| Ok((k.clone(), self.interpolate(v, actor)?)))
                    .collect::<Result<_, String>>()?,
            ),
            other => other.clone(),
        })
    }

    pub fn report(&self) -> SimReport {
        let doc_id = self.doc_id.clone();
        let (metrics, tasks_outcome, pending_edits) = match &doc_id {
            Some(id) => {
                let events: Vec<_> = self.service.events().into_iter().filter(|e| &e.doc_id == id).collect();
                let metrics = classify_metrics(&events).ok();
                let (tasks, pending) = self.service.inspect(|s| {
                    s.doc(id).map_or_else(
                        |_| (BTreeMap::new(), 0),
                        |d| {
                            (
                                d.tasks.tasks().map(|t| (t.id.clone(), t.state)).collect(),
                                d.engine.pending().count(),
                            )
                        },
                    )
                });
                (metrics, tasks, pending)
            }
            None => (None, BTreeMap::new(), 0),
        };
        SimReport {
            final_digest: self.service.digest(),
            doc_id,
            metrics,
            errors_encountered: self.errors.clone(),
            tasks_outcome,
            pending_edits,
            consumed: self.consumed.clone(),
        }
    }
}

fn lookup<'v>(body: &'v Value, path: &str) -> Option<&'v Value> {
    path.split('.').filter(|s| !s.is_empty()).try_fold(body, |v, seg| match v {
        Value::Array(items) => items.get(seg.parse::<usize>().ok()?),
        Value::Object(map) => map.get(seg),
        _ => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn dotted_lookup() {
        let v = json!({"task_ids": ["t1", "t2"], "a": {"b": 3}});
        assert_eq!(lookup(&v, "task_ids.1"), Some(&json!("t2")));
        assert_eq!(lookup(&v, "a.b"), Some(&json!(3)));
        assert_eq!(lookup(&v, "a.c"), None);
    }

    #[test]
    fn binds_and_interpolation() {
        let service = Service::in_memory();
        let header = Header {
            seed: 0,
            note: None,
            actors: vec![
                ActorSpec { id: "a".into(), role: Role::Author },
                ActorSpec { id: "w".into(), role: Role::Worker },
            ],
        };
        let mut r = Runner::new(&service, header);
        r.call(
            Action::new(
                "a",
                "POST /documents",
                json!({"seed_outline": "# Intro\n- one\n", "tasks": [{"description": "x"}]}),
            )
            .bind("doc", "doc_id")
            .bind("t", "task_ids.0"),
        )
        .unwrap();
        let resp = r.call(Action::new("w", "GET /documents/${doc}/tasks/next?claim=${t}", Value::Null)).unwrap();
        assert_eq!(resp.body["id"], "t1");
        r.call(Action::new("w", "POST /tasks/${t}/done", Value::Null)).unwrap();
        r.call(Action::new("w", "POST /tasks/${t}/done", Value::Null).expect_error("already_done")).unwrap();
        let err = r.call(Action::new("w", "POST /tasks/${t}/done", Value::Null)).unwrap_err();
        assert!(matches!(err, SimError::Action { index: 4, .. }));
        r.call(Action::new("w", "GET /documents/${doc}/events?since=${cursor}", Value::Null)).unwrap();
        let report = r.report();
        assert_eq!(report.consumed[&ActorId::from("w")], vec![2, 3, 4]);
        assert_eq!(report.errors_encountered.len(), 1);
        let text = r.transcript().to_jsonl();
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), r.transcript());
    }
}
