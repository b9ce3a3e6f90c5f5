use crowdwrite_core::service::replay;
use crowdwrite_core::sim::{fixture_paper_scale, random_transcript, run_e2e, E2eConfig, Runner, Transcript, PAPER_SCALE_TARGET};
use crowdwrite_core::{Role, Service, TaskState};

#[test]
fn fixture_hits_the_target_totals() {
    let transcript = fixture_paper_scale();
    let service = Service::in_memory();
    let report = Runner::run(&service, &transcript).unwrap();
    assert_eq!(report.metrics, Some(PAPER_SCALE_TARGET));
    assert_eq!(report.pending_edits, 0);
    assert!(report.tasks_outcome.values().all(|s| *s == TaskState::Done));
    assert_eq!(report.errors_encountered.len(), 1);
    assert_eq!(report.errors_encountered[0].code, "stale_edit");
    let workers = transcript.header.actors.iter().filter(|a| a.role == Role::Worker).count();
    assert_eq!(workers, 5);
}

#[test]
fn fixture_round_trips_through_jsonl() {
    let transcript = fixture_paper_scale();
    let back = Transcript::from_jsonl(&transcript.to_jsonl()).unwrap();
    assert_eq!(back, transcript);
}

#[test]
fn same_transcript_same_digest() {
    let transcript = fixture_paper_scale();
    let a = Runner::run(&Service::in_memory(), &transcript).unwrap();
    let b = Runner::run(&Service::in_memory(), &transcript).unwrap();
    assert_eq!(a.final_digest, b.final_digest);
    assert_eq!(a, b);
}

#[test]
fn e2e_run_finishes_cleanly() {
    let service = Service::in_memory();
    let (transcript, report) = run_e2e(&E2eConfig::default(), &service).unwrap();
    assert_eq!(report.pending_edits, 0);
    assert!(report.tasks_outcome.values().all(|s| *s == TaskState::Done), "{:?}", report.tasks_outcome);
    let again = Runner::run(&Service::in_memory(), &transcript).unwrap();
    assert_eq!(again.final_digest, report.final_digest);
}

#[test]
fn random_runs_replay_to_the_same_digest() {
    for seed in 0..5 {
        let service = Service::in_memory();
        let transcript = random_transcript(seed, 300, &service).unwrap();
        let live = service.digest();
        assert_eq!(replay(&service.events()).unwrap().digest(), live);
        let rerun = Runner::run(&Service::in_memory(), &transcript).unwrap();
        assert_eq!(rerun.final_digest, live, "seed {seed}");
    }
}
