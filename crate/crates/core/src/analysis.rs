//! The full pipeline from cleaned events to an analysis snapshot.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::advisor::{self, Suggestion};
use crate::config::AnalysisConfig;
use crate::detector::{classify_issues, detect, modified_z_scores, AnomalyFlag, Issue};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, Evaluation};
use crate::indicators::{compute_matrix, Indicator, IndicatorMatrix};
use crate::ingest::{CourseStructure, LogEvent};
use crate::sessionizer::{actions_from_events, compute_thresholds, split_sessions, ThresholdMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EvaluationStatus {
    Available(Evaluation),
    Unavailable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Latest event timestamp covered.
    pub watermark: i64,
    pub event_count: usize,
    pub actor_count: usize,
    pub session_count: usize,
    pub thresholds: ThresholdMap,
    pub matrix: IndicatorMatrix,
    /// Modified z-score per cell, aligned with `matrix.values`.
    pub modified_z: Vec<Vec<Option<f64>>>,
    pub flags: Vec<AnomalyFlag>,
    pub issues: Vec<Issue>,
    pub suggestions: Vec<Suggestion>,
    pub evaluation: EvaluationStatus,
}

impl Snapshot {
    pub fn issue(&self, issue_id: &str) -> Option<&Issue> {
        self.issues.iter().find(|i| i.issue_id == issue_id)
    }
}

/// Sessionizes `events`, computes indicators, flags anomalies, classifies
/// issues, derives suggestions and evaluates the session reconstruction.
///
/// Every issue comes back open; stored dismissals are applied by the caller.
pub fn analyze(
    course: &CourseStructure,
    events: &[LogEvent],
    config: &AnalysisConfig,
) -> Result<Snapshot> {
    config.validate()?;
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let actions = actions_from_events(events);
    let thresholds = compute_thresholds(&actions, course)?;
    let sessions = split_sessions(&actions, &thresholds)?;
    let matrix = compute_matrix(&sessions, course)?;

    let columns: Vec<Vec<Option<f64>>> = Indicator::ALL
        .iter()
        .map(|&ind| modified_z_scores(&matrix.column(ind)))
        .collect();
    let modified_z = (0..matrix.elements.len())
        .map(|row| columns.iter().map(|c| c[row]).collect())
        .collect();

    let flags = detect(&matrix, config.mad_cutoff);
    let issues = classify_issues(course.course_id(), &flags)?;
    let mut suggestions = Vec::new();
    for issue in &issues {
        suggestions.extend(advisor::suggest(issue, course)?);
    }

    let evaluation = match evaluate(events, course, config.baselines()) {
        Ok(e) => EvaluationStatus::Available(e),
        Err(e) => EvaluationStatus::Unavailable { reason: e.to_string() },
    };

    let actors: BTreeSet<_> = actions.iter().map(|a| &a.actor).collect();
    Ok(Snapshot {
        watermark: events.iter().map(|e| e.timestamp).max().unwrap_or_default(),
        event_count: events.len(),
        actor_count: actors.len(),
        session_count: sessions.len(),
        thresholds,
        matrix,
        modified_z,
        flags,
        issues,
        suggestions,
        evaluation,
    })
}
