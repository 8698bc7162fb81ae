//! Report rendering shared by the command line and the HTTP service, so both
//! emit the same bytes for the same store state.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::analysis::{EvaluationStatus, Snapshot};
use crate::advisor::Suggestion;
use crate::config::AnalysisConfig;
use crate::detector::{Issue, IssueCode, IssueStatus};
use crate::error::{Error, Result};
use crate::evaluator::Evaluation;
use crate::indicators::{Indicator, IndicatorRecord};
use crate::store::CourseRecord;

#[derive(Debug, Clone, Serialize)]
pub struct ElementSummary<'a> {
    pub element_id: &'a str,
    pub title: &'a str,
    pub position: usize,
    pub effective_size: u64,
    pub threshold_seconds: Option<f64>,
    pub threshold_inherited: Option<bool>,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub course_id: &'a str,
    pub config: Option<AnalysisConfig>,
    pub watermark: i64,
    pub event_count: usize,
    pub actor_count: usize,
    pub session_count: usize,
    pub elements: Vec<ElementSummary<'a>>,
    pub indicators: Vec<IndicatorRecord<'a>>,
    pub issues: &'a [Issue],
    pub suggestions: &'a [Suggestion],
    pub evaluation: &'a EvaluationStatus,
}

fn snapshot(record: &CourseRecord) -> Result<&Snapshot> {
    record.snapshot.as_ref().ok_or_else(|| match &record.analysis_error {
        Some(reason) => Error::InsufficientData(reason.clone()),
        None => Error::NoData,
    })
}

/// Structured report of a course's latest analysis.
pub fn build(record: &CourseRecord) -> Result<Report<'_>> {
    let snap = snapshot(record)?;
    let elements = record
        .course
        .elements()
        .iter()
        .map(|e| {
            let t = snap.thresholds.get(&e.element_id);
            ElementSummary {
                element_id: &e.element_id,
                title: &e.title,
                position: e.position,
                effective_size: e.effective_size(),
                threshold_seconds: t.map(|t| t.threshold_seconds),
                threshold_inherited: t.map(|t| t.inherited),
            }
        })
        .collect();
    Ok(Report {
        course_id: record.course_id(),
        config: record.analysis_config,
        watermark: snap.watermark,
        event_count: snap.event_count,
        actor_count: snap.actor_count,
        session_count: snap.session_count,
        elements,
        indicators: snap.matrix.records(),
        issues: &snap.issues,
        suggestions: &snap.suggestions,
        evaluation: &snap.evaluation,
    })
}

/// Pretty JSON with a trailing newline.
pub fn render_json(record: &CourseRecord) -> Result<String> {
    let mut out = serde_json::to_string_pretty(&build(record)?)?;
    out.push('\n');
    Ok(out)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.digits$}"))
}

fn status_label(s: IssueStatus) -> &'static str {
    match s {
        IssueStatus::Open => "open",
        IssueStatus::Dismissed => "dismissed",
        IssueStatus::Addressed => "addressed",
    }
}

fn write_evaluation(out: &mut String, e: &Evaluation) {
    let _ = writeln!(
        out,
        "Session sizes: slope {:.3}, R^2 {:.3}, err {:.3}",
        e.power_law.slope, e.power_law.r_squared, e.power_law.std_err
    );
    let _ = writeln!(
        out,
        "Size/threshold correlation: {}",
        fmt_opt(e.size_threshold_correlation, 3)
    );
    let _ = writeln!(out, "{:<14} {:>9} {:>7} {:>7}", "method", "sessions", "R^2", "err");
    for m in &e.methods {
        let _ = writeln!(
            out,
            "{:<14} {:>9} {:>7.3} {:>7.3}",
            m.method.label(),
            m.sessions,
            m.fit.r_squared,
            m.fit.std_err
        );
    }
}

/// Human-readable report.
pub fn render_text(record: &CourseRecord) -> Result<String> {
    let r = build(record)?;
    let mut out = String::new();
    let _ = writeln!(out, "Course {}", r.course_id);
    let _ = writeln!(
        out,
        "{} events, {} learners, {} reading sessions",
        r.event_count, r.actor_count, r.session_count
    );
    out.push('\n');

    let _ = writeln!(out, "{:<4} {:<16} {:>7} {:>10}  title", "pos", "element", "size", "threshold");
    for e in &r.elements {
        let inherited = if e.threshold_inherited == Some(true) { "*" } else { " " };
        let _ = writeln!(
            out,
            "{:<4} {:<16} {:>7} {:>9}{} {}",
            e.position,
            e.element_id,
            e.effective_size,
            fmt_opt(e.threshold_seconds, 0),
            inherited,
            e.title
        );
    }
    out.push('\n');

    let _ = writeln!(out, "Indicators");
    let snap = record.snapshot.as_ref().expect("build checked the snapshot");
    for (row, element) in snap.matrix.elements.iter().enumerate() {
        let _ = writeln!(out, "  {element}");
        for ind in Indicator::ALL {
            let _ = writeln!(
                out,
                "    {:<24} {:>10}",
                ind.name(),
                fmt_opt(snap.matrix.get(row, ind), 4)
            );
        }
    }
    out.push('\n');

    let _ = writeln!(out, "Issues ({})", r.issues.len());
    for issue in r.issues {
        let _ = writeln!(
            out,
            "  [{}] {} on {} ({}): {}",
            issue.issue_id,
            issue.code,
            issue.element_id,
            status_label(issue.status),
            issue.description
        );
        for f in &issue.evidence {
            let _ = writeln!(
                out,
                "      {} {} = {:.4} (z {:.2})",
                f.direction, f.indicator, f.value, f.modified_z
            );
        }
        for s in r.suggestions.iter().filter(|s| s.issue_id == issue.issue_id) {
            let _ = writeln!(out, "      -> {}: {}", s.problem_type, s.text);
        }
    }
    out.push('\n');

    match r.evaluation {
        EvaluationStatus::Available(e) => write_evaluation(&mut out, e),
        EvaluationStatus::Unavailable { reason } => {
            let _ = writeln!(out, "Evaluation unavailable: {reason}");
        }
    }
    Ok(out)
}

/// Counts for a quick overview after analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub course_id: String,
    pub events: usize,
    pub learners: usize,
    pub sessions: usize,
    pub issues_by_code: BTreeMap<IssueCode, usize>,
}

pub fn summary(record: &CourseRecord) -> Result<Summary> {
    let snap = snapshot(record)?;
    let mut issues_by_code = BTreeMap::new();
    for i in &snap.issues {
        *issues_by_code.entry(i.code).or_insert(0) += 1;
    }
    Ok(Summary {
        course_id: record.course_id().to_owned(),
        events: snap.event_count,
        learners: snap.actor_count,
        sessions: snap.session_count,
        issues_by_code,
    })
}

pub fn render_summary(s: &Summary) -> String {
    let mut out = format!(
        "{}: {} events, {} learners, {} sessions\n",
        s.course_id, s.events, s.learners, s.sessions
    );
    let total: usize = s.issues_by_code.values().sum();
    let _ = writeln!(out, "issues: {total}");
    for (code, n) in &s.issues_by_code {
        let _ = writeln!(out, "  {code}: {n}");
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct GridCell {
    pub indicator: Indicator,
    pub value: Option<f64>,
    pub modified_z: Option<f64>,
    /// Beyond the cutoff on the concerning tail.
    pub flagged: bool,
    pub issue_ids: Vec<String>,
    /// An open issue references this cell.
    pub badge: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub element_id: String,
    pub title: String,
    pub position: usize,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum IndicatorGrid {
    Empty {
        course_id: String,
        reason: String,
    },
    Ready {
        course_id: String,
        mad_cutoff: f64,
        indicators: Vec<Indicator>,
        rows: Vec<GridRow>,
    },
}

/// Element × indicator grid with per-cell shading data and issue markers.
pub fn indicator_grid(record: &CourseRecord) -> IndicatorGrid {
    let course_id = record.course_id().to_owned();
    let Some(snap) = &record.snapshot else {
        return IndicatorGrid::Empty {
            course_id,
            reason: record
                .analysis_error
                .clone()
                .unwrap_or_else(|| "no data".to_owned()),
        };
    };
    let rows = record
        .course
        .elements()
        .iter()
        .enumerate()
        .map(|(row, e)| GridRow {
            element_id: e.element_id.clone(),
            title: e.title.clone(),
            position: e.position,
            cells: Indicator::ALL
                .iter()
                .map(|&ind| {
                    let touching: Vec<&Issue> = snap
                        .issues
                        .iter()
                        .filter(|i| {
                            i.element_id == e.element_id
                                && i.evidence.iter().any(|f| f.indicator == ind)
                        })
                        .collect();
                    GridCell {
                        indicator: ind,
                        value: snap.matrix.get(row, ind),
                        modified_z: snap.modified_z[row][ind.index()],
                        flagged: snap
                            .flags
                            .iter()
                            .any(|f| f.element_id == e.element_id && f.indicator == ind),
                        issue_ids: touching.iter().map(|i| i.issue_id.clone()).collect(),
                        badge: touching.iter().any(|i| i.status == IssueStatus::Open),
                    }
                })
                .collect(),
        })
        .collect();
    IndicatorGrid::Ready {
        course_id,
        mad_cutoff: record.analysis_config.map_or(f64::NAN, |c| c.mad_cutoff),
        indicators: Indicator::ALL.to_vec(),
        rows,
    }
}
