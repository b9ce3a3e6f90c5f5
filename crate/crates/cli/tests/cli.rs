use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_crowdwrite"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap().trim().to_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn fixture_transcript_runs_to_a_stable_digest() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("fixture.jsonl");
    run(&["sim", "fixture-paper-scale", "--out", path(&file)]);
    let a = stdout(&run(&["sim", "run", path(&file), "--digest"]));
    let b = stdout(&run(&["sim", "run", path(&file), "--digest"]));
    assert_eq!(a.len(), 64);
    assert_eq!(a, b);
    let report: Value = serde_json::from_str(&stdout(&run(&["sim", "run", path(&file)]))).unwrap();
    assert_eq!(report["final_digest"], a.as_str());
    assert_eq!(report["metrics"]["submissions"], 95);
    assert_eq!(report["metrics"]["author_comments"], 68);
}

#[test]
fn seed_export_metrics_and_replay_share_one_log() {
    let dir = tempfile::tempdir().unwrap();
    let outline = dir.path().join("outline.md");
    let tasks = dir.path().join("tasks.json");
    std::fs::write(&outline, "# Introduction\n- motivation\n- contribution\n# Method\n").unwrap();
    std::fs::write(&tasks, r#"[{"description": "write up the introduction", "target_section_title": "Introduction"}]"#).unwrap();
    let data = dir.path().join("data");

    let created: Value = serde_json::from_str(&stdout(&run(&["seed", path(&outline), path(&tasks), "--data-dir", path(&data)]))).unwrap();
    assert_eq!(created["doc_id"], "doc1");
    assert_eq!(created["task_ids"].as_array().unwrap().len(), 1);

    let plain = stdout(&run(&["export", "doc1", "--format", "plain", "--data-dir", path(&data)]));
    assert!(plain.contains("Introduction") && plain.contains("motivation"), "{plain}");
    let structured: Value =
        serde_json::from_str(&stdout(&run(&["export", "doc1", "--data-dir", path(&data)]))).unwrap();
    assert_eq!(structured["blocks"].as_array().unwrap().len(), 4);

    let metrics: Value = serde_json::from_str(&stdout(&run(&["metrics", "doc1", "--data-dir", path(&data)]))).unwrap();
    assert_eq!(metrics["submissions"], 0);

    let log = data.join("events.jsonl");
    let digest = stdout(&run(&["replay", path(&log), "--digest"]));
    let summary: Value = serde_json::from_str(&stdout(&run(&["replay", path(&log)]))).unwrap();
    assert_eq!(summary["digest"], digest.as_str());
    assert_eq!(summary["documents"], json!(["doc1"]));

    // Environment variables stand in for flags.
    let out = bin().args(["metrics", "doc1"]).env("CROWDWRITE_DATA_DIR", &data).output().unwrap();
    assert!(out.status.success());
}

#[test]
fn unknown_document_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["export", "doc7", "--data-dir", path(dir.path())]).output().unwrap();
    assert!(!out.status.success());
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(data: &Path) -> Server {
    let mut child = bin()
        .args(["serve", "--port", "0", "--data-dir", path(data)])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").expect("startup line").to_owned();
    Server { child, base }
}

#[test]
fn http_round_trip_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let client = reqwest::blocking::Client::new();
    let digest_before;
    {
        let server = serve(dir.path());
        let url = |p: &str| format!("{}{p}", server.base);
        let token = |actor: &str, role: &str| -> String {
            let body: Value = client
                .post(url("/sessions"))
                .json(&json!({ "actor_id": actor, "role": role }))
                .send()
                .unwrap()
                .json()
                .unwrap();
            body["token"].as_str().unwrap().to_owned()
        };
        let author = token("author", "author");
        let worker = token("w1", "worker");

        let created: Value = client
            .post(url("/documents"))
            .bearer_auth(&author)
            .json(&json!({ "seed_outline": "# A\n- one\n", "tasks": [] }))
            .send()
            .unwrap()
            .json()
            .unwrap();
        let doc = created["doc_id"].as_str().unwrap().to_owned();

        let resp = client
            .post(url(&format!("/documents/{doc}/edits")))
            .bearer_auth(&worker)
            .json(&json!({ "edits": [{ "kind": "replace", "block_id": "s2", "text": "uno" }] }))
            .send()
            .unwrap();
        assert_eq!(resp.status(), 200);
        assert_eq!(resp.headers()["access-control-allow-origin"], "*");

        let events: Value = client
            .get(url(&format!("/documents/{doc}/events?since=0&wait=1000")))
            .bearer_auth(&author)
            .send()
            .unwrap()
            .json()
            .unwrap();
        assert_eq!(events["events"][0]["kind"], "edit_proposed");

        let denied = client
            .post(url(&format!("/documents/{doc}/edits/e1/review")))
            .bearer_auth(&worker)
            .json(&json!({ "decision": "accept" }))
            .send()
            .unwrap();
        assert_eq!(denied.status(), 401);
        let err: Value = denied.json().unwrap();
        assert_eq!(err["error"]["code"], "unauthorized");

        let bad = client.post(url("/documents")).bearer_auth(&author).body("{not json").send().unwrap();
        assert_eq!(bad.status(), 400);

        let accepted = client
            .post(url(&format!("/documents/{doc}/edits/e1/review")))
            .bearer_auth(&author)
            .json(&json!({ "decision": "accept" }))
            .send()
            .unwrap();
        assert_eq!(accepted.status(), 200);
        digest_before = stdout(&run(&["replay", path(&dir.path().join("events.jsonl")), "--digest"]));
    }

    // A restarted server serves the same document from the log.
    let server = serve(dir.path());
    let body: Value = client
        .post(format!("{}/sessions", server.base))
        .json(&json!({ "actor_id": "author", "role": "author" }))
        .send()
        .unwrap()
        .json()
        .unwrap();
    let token = body["token"].as_str().unwrap();
    let doc: Value = client
        .get(format!("{}/documents/doc1", server.base))
        .bearer_auth(token)
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert!(doc["text"].as_str().unwrap().contains("uno"));
    assert_eq!(doc["revision"], 1);
    let digest_after = stdout(&run(&["replay", path(&dir.path().join("events.jsonl")), "--digest"]));
    assert_eq!(digest_before, digest_after);
}
