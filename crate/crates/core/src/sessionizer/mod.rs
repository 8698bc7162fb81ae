//! Reading-session reconstruction.
//!
//! Each action's dwell is the gap to the same actor's next request. Per
//! element, the dwells that survive Peirce's criterion define a reading
//! threshold (their maximum); a session ends after any action whose dwell
//! exceeds its element's threshold. Terminal actions (end of session or end of
//! the actor's stream) carry an estimated dwell equal to the threshold.

mod peirce;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{identify_actor, ActorKey, CourseStructure, LogEvent};

pub use peirce::{peirce_filter, peirce_ratio, PeirceOutcome};

/// Default fixed page-stay threshold of the baseline method, in seconds.
pub const DEFAULT_PAGE_THRESHOLD_S: f64 = 600.0;
/// Default fixed total-session threshold of the baseline method, in seconds.
pub const DEFAULT_SESSION_THRESHOLD_S: f64 = 1800.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadAction {
    pub actor: ActorKey,
    pub element_id: String,
    /// Unix seconds.
    pub start: i64,
    pub dwell_seconds: f64,
    pub dwell_is_estimated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementThreshold {
    pub element_id: String,
    pub threshold_seconds: f64,
    pub sample_count: usize,
    pub outliers_removed: usize,
    /// True when the element had no usable dwells and inherited the course median.
    pub inherited: bool,
}

pub type ThresholdMap = BTreeMap<String, ElementThreshold>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingSession {
    pub actor: ActorKey,
    pub ordinal: usize,
    pub actions: Vec<ReadAction>,
}

impl ReadingSession {
    /// Number of distinct elements read in the session.
    pub fn distinct_elements(&self) -> usize {
        let mut ids: Vec<&str> = self.actions.iter().map(|a| a.element_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    pub fn first(&self) -> &ReadAction {
        &self.actions[0]
    }

    pub fn last(&self) -> &ReadAction {
        &self.actions[self.actions.len() - 1]
    }
}

/// Turns one actor's time-ordered events into actions.
///
/// Each dwell is the gap to the next event; the final action has no successor
/// and is flagged estimated with a zero placeholder dwell, filled in when
/// sessions are split.
pub fn estimate_durations(events: &[LogEvent]) -> Vec<ReadAction> {
    let attributed: Vec<(ActorKey, &LogEvent)> = events
        .iter()
        .filter_map(|ev| identify_actor(ev).ok().map(|a| (a, ev)))
        .collect();
    attributed
        .iter()
        .enumerate()
        .map(|(i, (actor, ev))| {
            let next = attributed.get(i + 1).map(|(_, n)| n.timestamp);
            ReadAction {
                actor: actor.clone(),
                element_id: ev.element_id.clone(),
                start: ev.timestamp,
                dwell_seconds: next.map_or(0.0, |t| (t - ev.timestamp).max(0) as f64),
                dwell_is_estimated: next.is_none(),
            }
        })
        .collect()
}

/// Groups canonically ordered events by actor and estimates every actor's
/// dwells. The output is grouped by actor, time-ordered within each group.
pub fn actions_from_events(events: &[LogEvent]) -> Vec<ReadAction> {
    let mut by_actor: BTreeMap<ActorKey, Vec<LogEvent>> = BTreeMap::new();
    for ev in events {
        if let Ok(actor) = identify_actor(ev) {
            by_actor.entry(actor).or_default().push(ev.clone());
        }
    }
    by_actor
        .into_values()
        .flat_map(|mut evs| {
            evs.sort_by(|a, b| (a.timestamp, &a.request_id).cmp(&(b.timestamp, &b.request_id)));
            estimate_durations(&evs)
        })
        .collect()
}

/// Per-element thresholds from the observed (non-estimated) dwells.
///
/// Elements without usable dwells inherit the median threshold of the
/// elements that have data.
pub fn compute_thresholds(actions: &[ReadAction], course: &CourseStructure) -> Result<ThresholdMap> {
    let mut samples: BTreeMap<&str, Vec<f64>> = course
        .elements()
        .iter()
        .map(|e| (e.element_id.as_str(), Vec::new()))
        .collect();
    for a in actions.iter().filter(|a| !a.dwell_is_estimated) {
        if let Some(s) = samples.get_mut(a.element_id.as_str()) {
            s.push(a.dwell_seconds);
        }
    }

    let mut thresholds = ThresholdMap::new();
    let mut pending = Vec::new();
    for (element_id, dwells) in samples {
        let outcome = peirce_filter(&dwells);
        let max = outcome.retained.iter().copied().fold(f64::NAN, f64::max);
        if max > 0.0 {
            thresholds.insert(
                element_id.to_owned(),
                ElementThreshold {
                    element_id: element_id.to_owned(),
                    threshold_seconds: max,
                    sample_count: dwells.len(),
                    outliers_removed: outcome.removed.len(),
                    inherited: false,
                },
            );
        } else {
            pending.push((element_id, dwells.len(), outcome.removed.len()));
        }
    }

    let observed: Vec<f64> = thresholds.values().map(|t| t.threshold_seconds).collect();
    let fallback = median(&observed).ok_or_else(|| {
        Error::InsufficientData("no element has an observed dwell".into())
    })?;
    for (element_id, sample_count, outliers_removed) in pending {
        thresholds.insert(
            element_id.to_owned(),
            ElementThreshold {
                element_id: element_id.to_owned(),
                threshold_seconds: fallback,
                sample_count,
                outliers_removed,
                inherited: true,
            },
        );
    }
    Ok(thresholds)
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Splits actor-grouped actions into sessions with per-element thresholds.
pub fn split_sessions(actions: &[ReadAction], thresholds: &ThresholdMap) -> Result<Vec<ReadingSession>> {
    if let Some(a) = actions.iter().find(|a| !thresholds.contains_key(&a.element_id)) {
        return Err(Error::InsufficientData(format!(
            "no threshold for element {}",
            a.element_id
        )));
    }
    Ok(split_by_dwell_cap(actions, |a| {
        thresholds[&a.element_id].threshold_seconds
    }))
}

/// Baseline: one constant page-stay threshold for every element.
pub fn split_sessions_fixed_page(actions: &[ReadAction], page_threshold_seconds: f64) -> Vec<ReadingSession> {
    split_by_dwell_cap(actions, |_| page_threshold_seconds)
}

/// Baseline: an action opens a new session when adding its dwell would push
/// the running session duration past the limit.
///
/// Single dwells longer than the limit are capped to it and flagged
/// estimated. Final actions keep the dwell they carry.
pub fn split_sessions_fixed_total(actions: &[ReadAction], session_threshold_seconds: f64) -> Vec<ReadingSession> {
    let mut sessions = Vec::new();
    for run in actor_runs(actions) {
        let mut ordinal = 0;
        let mut current: Vec<ReadAction> = Vec::new();
        let mut total = 0.0;
        for action in run {
            let mut action = action.clone();
            if action.dwell_seconds > session_threshold_seconds {
                action.dwell_seconds = session_threshold_seconds;
                action.dwell_is_estimated = true;
            }
            if !current.is_empty() && total + action.dwell_seconds > session_threshold_seconds {
                sessions.push(ReadingSession {
                    actor: action.actor.clone(),
                    ordinal,
                    actions: std::mem::take(&mut current),
                });
                ordinal += 1;
                total = 0.0;
            }
            total += action.dwell_seconds;
            current.push(action);
        }
        if let Some(first) = current.first() {
            sessions.push(ReadingSession {
                actor: first.actor.clone(),
                ordinal,
                actions: current,
            });
        }
    }
    sessions
}

fn split_by_dwell_cap(actions: &[ReadAction], cap: impl Fn(&ReadAction) -> f64) -> Vec<ReadingSession> {
    let mut sessions = Vec::new();
    for run in actor_runs(actions) {
        let mut ordinal = 0;
        let mut current = Vec::new();
        for (i, action) in run.iter().enumerate() {
            let limit = cap(action);
            let mut action = action.clone();
            let is_final = i + 1 == run.len();
            let ends = is_final || action.dwell_seconds > limit;
            if ends {
                action.dwell_seconds = limit;
                action.dwell_is_estimated = true;
            }
            current.push(action);
            if ends {
                sessions.push(ReadingSession {
                    actor: run[0].actor.clone(),
                    ordinal,
                    actions: std::mem::take(&mut current),
                });
                ordinal += 1;
            }
        }
    }
    sessions
}

/// Maximal runs of consecutive actions sharing an actor.
fn actor_runs(actions: &[ReadAction]) -> impl Iterator<Item = &[ReadAction]> {
    actions.chunk_by(|a, b| a.actor == b.actor)
}

/// Writes one CSV record per action: actor, session ordinal, element, start,
/// dwell and the estimated flag.
pub fn write_session_dump(writer: impl Write, sessions: &[ReadingSession]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let fmt_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["actor", "session", "element_id", "start", "dwell", "estimated"])
        .map_err(fmt_err)?;
    for s in sessions {
        for a in &s.actions {
            w.write_record([
                a.actor.as_str(),
                &s.ordinal.to_string(),
                &a.element_id,
                &a.start.to_string(),
                &a.dwell_seconds.to_string(),
                if a.dwell_is_estimated { "true" } else { "false" },
            ])
            .map_err(fmt_err)?;
        }
    }
    w.flush()?;
    Ok(())
}
