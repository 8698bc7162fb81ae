//! File-backed course store.
//!
//! One JSON document per course under `<dir>/courses/`, rewritten atomically
//! (temp file + rename) after every mutation. Each record holds the outline,
//! the cleaned events, the latest analysis snapshot, issue statuses and tasks.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, Snapshot};
use crate::config::AnalysisConfig;
use crate::detector::{Issue, IssueCode, IssueStatus};
use crate::error::{Error, Result};
use crate::indicators::Indicator;
use crate::ingest::{clean_log, sort_events, CleanReport, CourseStructure, LogEvent};
use crate::tasks::{NewTask, RevisionTask, TaskPatch};

/// Author decision on one piece of issue evidence; survives reanalysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusRecord {
    pub code: IssueCode,
    pub element_id: String,
    pub indicator: Indicator,
    pub status: IssueStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseRecord {
    pub course: CourseStructure,
    pub events: Vec<LogEvent>,
    /// Latest event timestamp ingested.
    pub watermark: Option<i64>,
    pub snapshot: Option<Snapshot>,
    /// Configuration the snapshot was computed with.
    pub analysis_config: Option<AnalysisConfig>,
    /// Why the last analysis produced no snapshot, if it failed.
    pub analysis_error: Option<String>,
    pub issue_status: Vec<StatusRecord>,
    pub tasks: Vec<RevisionTask>,
    pub next_task: u64,
}

impl CourseRecord {
    fn new(course: CourseStructure) -> Self {
        CourseRecord {
            course,
            events: Vec::new(),
            watermark: None,
            snapshot: None,
            analysis_config: None,
            analysis_error: None,
            issue_status: Vec::new(),
            tasks: Vec::new(),
            next_task: 1,
        }
    }

    pub fn course_id(&self) -> &str {
        self.course.course_id()
    }

    fn status_of(&self, issue: &Issue) -> IssueStatus {
        issue
            .evidence
            .iter()
            .find_map(|f| {
                self.issue_status.iter().find(|r| {
                    r.code == issue.code && r.element_id == issue.element_id && r.indicator == f.indicator
                })
            })
            .map_or(IssueStatus::Open, |r| r.status)
    }

    /// Recomputes the snapshot from the stored events.
    fn refresh(&mut self, config: &AnalysisConfig) {
        self.analysis_config = Some(*config);
        match analyze(&self.course, &self.events, config) {
            Ok(mut snapshot) => {
                let statuses: Vec<IssueStatus> =
                    snapshot.issues.iter().map(|i| self.status_of(i)).collect();
                for (issue, status) in snapshot.issues.iter_mut().zip(statuses) {
                    issue.status = status;
                }
                self.snapshot = Some(snapshot);
                self.analysis_error = None;
            }
            Err(e) => {
                self.snapshot = None;
                self.analysis_error = (!matches!(e, Error::NoData)).then(|| e.to_string());
            }
        }
    }
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    config: AnalysisConfig,
    courses: BTreeMap<String, CourseRecord>,
}

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as i64)
}

/// Course ids double as file names.
fn check_course_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "course id {id:?} must be 1-128 characters of A-Z, a-z, 0-9, '-', '_' or '.', not starting with '.'"
        )))
    }
}

impl Store {
    /// Opens (creating if needed) the store under `dir`. Snapshots computed
    /// with a different configuration are recomputed.
    pub fn open(dir: impl AsRef<Path>, config: AnalysisConfig) -> Result<Self> {
        config.validate()?;
        let dir = dir.as_ref().to_path_buf();
        let courses_dir = dir.join("courses");
        fs::create_dir_all(&courses_dir).map_err(|e| Error::io(&courses_dir, e))?;

        let mut paths: Vec<PathBuf> = fs::read_dir(&courses_dir)
            .map_err(|e| Error::io(&courses_dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();

        let mut store = Store {
            dir,
            config,
            courses: BTreeMap::new(),
        };
        for path in paths {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let record: CourseRecord = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
            let id = record.course_id().to_owned();
            if path.file_stem().and_then(|s| s.to_str()) != Some(id.as_str()) {
                return Err(Error::Format(format!(
                    "{} holds course {id}",
                    path.display()
                )));
            }
            store.courses.insert(id.clone(), record);
            let stale = {
                let r = &store.courses[&id];
                !r.events.is_empty() && r.analysis_config != Some(config)
            };
            if stale {
                store.courses.get_mut(&id).expect("just inserted").refresh(&config);
                store.persist(&id)?;
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> &AnalysisConfig {
        &self.config
    }

    fn path_for(&self, course_id: &str) -> PathBuf {
        self.dir.join("courses").join(format!("{course_id}.json"))
    }

    fn persist(&self, course_id: &str) -> Result<()> {
        let record = &self.courses[course_id];
        let mut bytes = serde_json::to_vec_pretty(record)?;
        bytes.push(b'\n');
        let path = self.path_for(course_id);
        let parent = path.parent().expect("course files live in a directory");
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
        tmp.write_all(&bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }

    pub fn courses(&self) -> impl Iterator<Item = &CourseRecord> {
        self.courses.values()
    }

    pub fn record(&self, course_id: &str) -> Result<&CourseRecord> {
        self.courses
            .get(course_id)
            .ok_or_else(|| Error::NotFound(format!("course {course_id}")))
    }

    fn record_mut(&mut self, course_id: &str) -> Result<&mut CourseRecord> {
        self.courses
            .get_mut(course_id)
            .ok_or_else(|| Error::NotFound(format!("course {course_id}")))
    }

    /// Registers a new course. Fails with a conflict if the id is taken.
    pub fn register(&mut self, course: CourseStructure) -> Result<&CourseRecord> {
        let id = course.course_id().to_owned();
        check_course_id(&id)?;
        if self.courses.contains_key(&id) {
            return Err(Error::Conflict(format!("course {id} already exists")));
        }
        self.courses.insert(id.clone(), CourseRecord::new(course));
        if let Err(e) = self.persist(&id) {
            self.courses.remove(&id);
            return Err(e);
        }
        Ok(&self.courses[&id])
    }

    /// Cleans a CSV batch, appends the surviving events and reanalyzes the
    /// course before returning. A batch that keeps no rows changes nothing.
    pub fn ingest(&mut self, course_id: &str, csv: impl Read) -> Result<CleanReport> {
        let config = self.config;
        let record = self.record_mut(course_id)?;
        let known: HashSet<String> = record.events.iter().map(|e| e.request_id.clone()).collect();
        let (events, report) = clean_log(csv, &record.course, &known)?;
        if events.is_empty() {
            return Ok(report);
        }
        let mut updated = record.clone();
        updated.events.extend(events);
        sort_events(&mut updated.events);
        updated.watermark = updated.events.iter().map(|e| e.timestamp).max();
        updated.refresh(&config);
        let previous = std::mem::replace(record, updated);
        if let Err(e) = self.persist(course_id) {
            self.courses.insert(course_id.to_owned(), previous);
            return Err(e);
        }
        Ok(report)
    }

    /// Recomputes a course's snapshot with the store configuration.
    pub fn reanalyze(&mut self, course_id: &str) -> Result<&Snapshot> {
        let config = self.config;
        let record = self.record_mut(course_id)?;
        if record.events.is_empty() {
            return Err(Error::NoData);
        }
        record.refresh(&config);
        self.persist(course_id)?;
        let record = &self.courses[course_id];
        match (&record.snapshot, &record.analysis_error) {
            (Some(snapshot), _) => Ok(snapshot),
            (None, Some(reason)) => Err(Error::InsufficientData(reason.clone())),
            (None, None) => Err(Error::NoData),
        }
    }

    fn locate_issue(&self, issue_id: &str) -> Result<(String, Issue)> {
        self.courses
            .values()
            .find_map(|r| {
                let issue = r.snapshot.as_ref()?.issue(issue_id)?;
                Some((r.course_id().to_owned(), issue.clone()))
            })
            .ok_or_else(|| Error::NotFound(format!("issue {issue_id}")))
    }

    /// Sets an issue's status; the decision is stored per piece of evidence
    /// so it carries over to recomputed snapshots.
    pub fn set_issue_status(&mut self, issue_id: &str, status: IssueStatus) -> Result<Issue> {
        let (course_id, issue) = self.locate_issue(issue_id)?;
        let record = self.record_mut(&course_id)?;
        for flag in &issue.evidence {
            record.issue_status.retain(|r| {
                !(r.code == issue.code && r.element_id == issue.element_id && r.indicator == flag.indicator)
            });
            record.issue_status.push(StatusRecord {
                code: issue.code,
                element_id: issue.element_id.clone(),
                indicator: flag.indicator,
                status,
            });
        }
        let snapshot = record.snapshot.as_mut().expect("issue came from this snapshot");
        let stored = snapshot
            .issues
            .iter_mut()
            .find(|i| i.issue_id == issue_id)
            .expect("issue came from this snapshot");
        stored.status = status;
        let updated = stored.clone();
        self.persist(&course_id)?;
        Ok(updated)
    }

    pub fn tasks(&self, course_id: &str) -> Result<&[RevisionTask]> {
        Ok(&self.record(course_id)?.tasks)
    }

    pub fn create_task(&mut self, course_id: &str, req: NewTask) -> Result<RevisionTask> {
        let record = self.record(course_id)?;
        let mut element_id = req.element_id.clone();
        let mut issue_id = req.issue_id.clone();
        let mut title = req.title.clone();
        let mut body = req.body.clone();

        if let Some(sref) = &req.suggestion {
            let snapshot = record
                .snapshot
                .as_ref()
                .ok_or_else(|| Error::NotFound(format!("issue {}", sref.issue_id)))?;
            let suggestion = snapshot
                .suggestions
                .iter()
                .find(|s| s.issue_id == sref.issue_id && s.problem_type == sref.problem_type)
                .ok_or_else(|| {
                    Error::NotFound(format!(
                        "suggestion {} for issue {}",
                        sref.problem_type, sref.issue_id
                    ))
                })?;
            let issue = snapshot.issue(&sref.issue_id).expect("suggestions follow issues");
            let element_title = record
                .course
                .element(&issue.element_id)
                .map_or(issue.element_id.as_str(), |e| e.title.as_str());
            element_id.get_or_insert_with(|| issue.element_id.clone());
            issue_id.get_or_insert_with(|| issue.issue_id.clone());
            title.get_or_insert_with(|| format!("{}: {}", suggestion.problem_type, element_title));
            body.get_or_insert_with(|| suggestion.text.clone());
        }

        let title = title.unwrap_or_default();
        if title.trim().is_empty() {
            return Err(Error::Validation("task title is empty".into()));
        }
        if let Some(e) = &element_id {
            if !record.course.contains(e) {
                return Err(Error::Validation(format!("unknown element {e}")));
            }
        }
        if let Some(i) = &issue_id {
            let known = record.snapshot.as_ref().is_some_and(|s| s.issue(i).is_some());
            if !known {
                return Err(Error::Validation(format!("unknown issue {i}")));
            }
        }

        let now = now_ms();
        let record = self.record_mut(course_id)?;
        let task = RevisionTask {
            task_id: format!("{course_id}-task-{}", record.next_task),
            course_id: course_id.to_owned(),
            element_id,
            issue_id,
            title,
            body: body.unwrap_or_default(),
            status: Default::default(),
            created_at: now,
            updated_at: now,
        };
        record.next_task += 1;
        record.tasks.push(task.clone());
        self.persist(course_id)?;
        Ok(task)
    }

    fn locate_task(&self, task_id: &str) -> Result<(String, usize)> {
        self.courses
            .values()
            .find_map(|r| {
                let idx = r.tasks.iter().position(|t| t.task_id == task_id)?;
                Some((r.course_id().to_owned(), idx))
            })
            .ok_or_else(|| Error::NotFound(format!("task {task_id}")))
    }

    pub fn update_task(&mut self, task_id: &str, patch: &TaskPatch) -> Result<RevisionTask> {
        let (course_id, idx) = self.locate_task(task_id)?;
        let record = self.record_mut(&course_id)?;
        let mut task = record.tasks[idx].clone();
        task.apply(patch, now_ms())?;
        record.tasks[idx] = task.clone();
        self.persist(&course_id)?;
        Ok(task)
    }

    pub fn delete_task(&mut self, task_id: &str) -> Result<()> {
        let (course_id, idx) = self.locate_task(task_id)?;
        self.record_mut(&course_id)?.tasks.remove(idx);
        self.persist(&course_id)
    }
}
