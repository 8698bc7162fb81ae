//! Author-managed revision tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    #[default]
    Todo,
    InProgress,
    Done,
}

impl TaskStatus {
    /// Allowed moves: todo to in_progress or done, in_progress to done.
    /// Staying put is always allowed.
    pub fn can_become(self, next: TaskStatus) -> bool {
        use TaskStatus::*;
        self == next || matches!((self, next), (Todo, InProgress) | (Todo, Done) | (InProgress, Done))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskStatus::Todo => "todo",
            TaskStatus::InProgress => "in_progress",
            TaskStatus::Done => "done",
        }
    }
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "todo" => Ok(TaskStatus::Todo),
            "in_progress" => Ok(TaskStatus::InProgress),
            "done" => Ok(TaskStatus::Done),
            _ => Err(Error::Validation(format!("unknown task status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionTask {
    pub task_id: String,
    pub course_id: String,
    pub element_id: Option<String>,
    pub issue_id: Option<String>,
    pub title: String,
    pub body: String,
    pub status: TaskStatus,
    /// Unix milliseconds.
    pub created_at: i64,
    pub updated_at: i64,
}

/// Request to create a task. With `suggestion` set, title, body, element and
/// issue are taken from that suggestion unless given explicitly.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewTask {
    pub element_id: Option<String>,
    pub issue_id: Option<String>,
    pub title: Option<String>,
    pub body: Option<String>,
    pub suggestion: Option<SuggestionRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionRef {
    pub issue_id: String,
    pub problem_type: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskPatch {
    pub title: Option<String>,
    pub body: Option<String>,
    pub status: Option<TaskStatus>,
}

impl RevisionTask {
    /// Applies `patch`, keeping `updated_at` monotone.
    pub fn apply(&mut self, patch: &TaskPatch, now: i64) -> Result<()> {
        if let Some(next) = patch.status {
            if !self.status.can_become(next) {
                return Err(Error::Validation(format!(
                    "task {} cannot go from {} to {}",
                    self.task_id, self.status, next
                )));
            }
        }
        if let Some(title) = &patch.title {
            if title.trim().is_empty() {
                return Err(Error::Validation("task title is empty".into()));
            }
            self.title = title.clone();
        }
        if let Some(body) = &patch.body {
            self.body = body.clone();
        }
        if let Some(next) = patch.status {
            self.status = next;
        }
        self.updated_at = now.max(self.updated_at);
        Ok(())
    }
}
