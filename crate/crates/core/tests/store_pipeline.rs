mod common;

use common::{planted_course, planted_csv, PLANTED_ELEMENT};
use readtrace::detector::{IssueCode, IssueStatus};
use readtrace::report;
use readtrace::tasks::{NewTask, SuggestionRef, TaskPatch, TaskStatus};
use readtrace::{AnalysisConfig, Error, Store};

fn loaded_store(dir: &std::path::Path) -> Store {
    let mut store = Store::open(dir, AnalysisConfig::default()).unwrap();
    store.register(planted_course()).unwrap();
    let report = store.ingest("planted", planted_csv("u", 3).as_bytes()).unwrap();
    assert_eq!(report.rows_kept, report.rows_in);
    store
}

#[test]
fn planted_fixture_yields_one_issue() {
    let dir = tempfile::tempdir().unwrap();
    let store = loaded_store(dir.path());
    let snap = store.record("planted").unwrap().snapshot.as_ref().unwrap();
    assert_eq!(snap.actor_count, 60);
    assert_eq!(snap.session_count, 60);
    assert_eq!(snap.flags.len(), 1, "{:?}", snap.flags);
    assert_eq!(snap.issues.len(), 1);
    let issue = &snap.issues[0];
    assert_eq!(issue.code, IssueCode::SI2);
    assert_eq!(issue.element_id, PLANTED_ELEMENT);
    assert_eq!(snap.suggestions.len(), 1);
    assert_eq!(snap.suggestions[0].problem_type, "Slow Reading Speed");
}

#[test]
fn cutoff_controls_the_planted_flag() {
    let dir = tempfile::tempdir().unwrap();
    drop(loaded_store(dir.path()));
    let strict = AnalysisConfig { mad_cutoff: 8.0, ..AnalysisConfig::default() };
    let store = Store::open(dir.path(), strict).unwrap();
    let record = store.record("planted").unwrap();
    assert_eq!(record.analysis_config, Some(strict));
    assert!(record.snapshot.as_ref().unwrap().issues.is_empty());
}

#[test]
fn state_survives_reopening_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = loaded_store(dir.path());
    let issue_id = store.record("planted").unwrap().snapshot.as_ref().unwrap().issues[0].issue_id.clone();
    store.set_issue_status(&issue_id, IssueStatus::Dismissed).unwrap();
    let task = store
        .create_task("planted", NewTask { title: Some("Tighten chapter 5".into()), ..NewTask::default() })
        .unwrap();
    let path = dir.path().join("courses/planted.json");
    let before = std::fs::read(&path).unwrap();
    let report_before = report::render_json(store.record("planted").unwrap()).unwrap();
    drop(store);

    let store = Store::open(dir.path(), AnalysisConfig::default()).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), before);
    let record = store.record("planted").unwrap();
    assert_eq!(record.tasks, vec![task]);
    assert_eq!(record.snapshot.as_ref().unwrap().issues[0].status, IssueStatus::Dismissed);
    assert_eq!(report::render_json(record).unwrap(), report_before);
}

#[test]
fn dismissal_survives_new_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = loaded_store(dir.path());
    let issue_id = store.record("planted").unwrap().snapshot.as_ref().unwrap().issues[0].issue_id.clone();
    store.set_issue_status(&issue_id, IssueStatus::Dismissed).unwrap();

    // Same batch again: all duplicates, nothing changes.
    let before = store.record("planted").unwrap().clone();
    let again = store.ingest("planted", planted_csv("u", 3).as_bytes()).unwrap();
    assert_eq!(again.rows_kept, 0);
    assert_eq!(again.dropped_duplicate, again.rows_in);
    assert_eq!(store.record("planted").unwrap(), &before);

    // More learners: the issue is recomputed under the same id and stays dismissed.
    let more = store.ingest("planted", planted_csv("v", 1).as_bytes()).unwrap();
    assert!(more.rows_kept > 0);
    let snap = store.record("planted").unwrap().snapshot.as_ref().unwrap();
    assert_eq!(snap.actor_count, 80);
    let issue = snap.issue(&issue_id).unwrap();
    assert_eq!(issue.status, IssueStatus::Dismissed);

    store.set_issue_status(&issue_id, IssueStatus::Open).unwrap();
    store.reanalyze("planted").unwrap();
    let snap = store.record("planted").unwrap().snapshot.as_ref().unwrap();
    assert_eq!(snap.issue(&issue_id).unwrap().status, IssueStatus::Open);
}

#[test]
fn empty_batch_leaves_snapshot_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = loaded_store(dir.path());
    let before = store.record("planted").unwrap().clone();
    let report = store.ingest("planted", &b""[..]).unwrap();
    assert_eq!(report.rows_in, 0);
    let header_only = store
        .ingest("planted", &b"request_id,user_id,course_id,element_id,server_session_id,timestamp\n"[..])
        .unwrap();
    assert_eq!(header_only.rows_in, 0);
    assert_eq!(store.record("planted").unwrap(), &before);
}

#[test]
fn task_lifecycle_from_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = loaded_store(dir.path());
    let snap = store.record("planted").unwrap().snapshot.clone().unwrap();
    let suggestion = &snap.suggestions[0];
    let task = store
        .create_task(
            "planted",
            NewTask {
                suggestion: Some(SuggestionRef {
                    issue_id: suggestion.issue_id.clone(),
                    problem_type: suggestion.problem_type.clone(),
                }),
                ..NewTask::default()
            },
        )
        .unwrap();
    assert_eq!(task.body, suggestion.text);
    assert_eq!(task.issue_id.as_deref(), Some(suggestion.issue_id.as_str()));
    assert_eq!(task.element_id.as_deref(), Some(PLANTED_ELEMENT));
    assert_eq!(task.title, "Slow Reading Speed: Chapter 5");
    assert_eq!(task.status, TaskStatus::Todo);

    let edited = store
        .update_task(&task.task_id, &TaskPatch { body: Some("Split into two parts".into()), ..TaskPatch::default() })
        .unwrap();
    assert_eq!(edited.body, "Split into two parts");
    assert!(edited.updated_at >= task.updated_at);
    let started = store
        .update_task(&task.task_id, &TaskPatch { status: Some(TaskStatus::InProgress), ..TaskPatch::default() })
        .unwrap();
    let done = store
        .update_task(&task.task_id, &TaskPatch { status: Some(TaskStatus::Done), ..TaskPatch::default() })
        .unwrap();
    assert_eq!(done.status, TaskStatus::Done);
    assert!(done.updated_at >= started.updated_at);
    let back = store.update_task(&task.task_id, &TaskPatch { status: Some(TaskStatus::Todo), ..TaskPatch::default() });
    assert!(matches!(back, Err(Error::Validation(_))));

    let second = store.create_task("planted", NewTask { title: Some("Other".into()), ..NewTask::default() }).unwrap();
    assert_ne!(second.task_id, task.task_id);
    store.delete_task(&task.task_id).unwrap();
    assert!(matches!(store.delete_task(&task.task_id), Err(Error::NotFound(_))));
    let third = store.create_task("planted", NewTask { title: Some("Third".into()), ..NewTask::default() }).unwrap();
    assert_ne!(third.task_id, task.task_id, "ids are never reused");
    assert_eq!(store.tasks("planted").unwrap().len(), 2);
}

#[test]
fn invalid_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = loaded_store(dir.path());
    assert!(matches!(store.register(planted_course()), Err(Error::Conflict(_))));
    assert!(matches!(store.ingest("nope", &b""[..]), Err(Error::NotFound(_))));
    assert!(matches!(store.set_issue_status("000000000000", IssueStatus::Dismissed), Err(Error::NotFound(_))));
    for bad in [
        NewTask::default(),
        NewTask { title: Some("x".into()), element_id: Some("e99".into()), ..NewTask::default() },
        NewTask { title: Some("x".into()), issue_id: Some("ffffffffffff".into()), ..NewTask::default() },
    ] {
        assert!(matches!(store.create_task("planted", bad), Err(Error::Validation(_))));
    }
    let evil = readtrace::CourseStructure::new("../evil", planted_course().elements().to_vec()).unwrap();
    assert!(matches!(store.register(evil), Err(Error::Validation(_))));
}

#[test]
fn report_needs_a_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = Store::open(dir.path(), AnalysisConfig::default()).unwrap();
    store.register(planted_course()).unwrap();
    let record = store.record("planted").unwrap();
    assert!(matches!(report::render_json(record), Err(Error::NoData)));
    assert!(matches!(report::indicator_grid(record), report::IndicatorGrid::Empty { .. }));
}
