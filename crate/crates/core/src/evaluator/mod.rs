//! Session-quality evaluation: power-law fit of session sizes, the
//! size/threshold correlation, a comparison against the fixed-threshold
//! baselines, and boundary scoring against known sessions.

mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ActorKey, CourseStructure, LogEvent};
use crate::sessionizer::{
    actions_from_events, compute_thresholds, split_sessions, split_sessions_fixed_page,
    split_sessions_fixed_total, ReadingSession, ThresholdMap,
};

pub use synthetic::{generate_synthetic, SyntheticLog, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual standard error of the log-log regression.
    pub std_err: f64,
}

/// Histogram of distinct elements per session.
pub fn session_size_histogram(sessions: &[ReadingSession]) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for s in sessions {
        *hist.entry(s.distinct_elements()).or_insert(0) += 1;
    }
    hist
}

/// Fits `ln freq = slope·ln size + intercept` to the session-size histogram.
pub fn fit_power_law(sessions: &[ReadingSession]) -> Result<PowerLawFit> {
    fit_histogram(&session_size_histogram(sessions))
}

/// Least squares on a (size, frequency) histogram. Zero sizes and zero
/// frequencies are skipped since their logarithm is undefined.
pub fn fit_histogram(hist: &BTreeMap<usize, u64>) -> Result<PowerLawFit> {
    let points: Vec<(f64, f64)> = hist
        .iter()
        .filter(|&(&size, &freq)| size > 0 && freq > 0)
        .map(|(&size, &freq)| ((size as f64).ln(), (freq as f64).ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::DegenerateHistogram(format!(
            "{} distinct session sizes, at least 3 needed",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - (slope * p.0 + intercept)).powi(2))
        .sum();
    // A flat histogram leaves no variance to explain.
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(PowerLawFit {
        slope,
        intercept,
        r_squared,
        std_err: (sse / (n - 2.0)).sqrt(),
    })
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson r between effective element size and reading threshold, over the
/// elements that have a threshold of their own. Absent with fewer than three
/// such elements or when either side has no variance.
pub fn size_threshold_correlation(thresholds: &ThresholdMap, course: &CourseStructure) -> Option<f64> {
    let (sizes, secs): (Vec<f64>, Vec<f64>) = course
        .elements()
        .iter()
        .filter_map(|e| {
            let t = thresholds.get(&e.element_id)?;
            (!t.inherited).then(|| (e.effective_size() as f64, t.threshold_seconds))
        })
        .unzip();
    if sizes.len() < 3 {
        return None;
    }
    pearson(&sizes, &secs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dynamic,
    FixedPage,
    FixedSession,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Dynamic => "dynamic",
            Method::FixedPage => "fixed_page",
            Method::FixedSession => "fixed_session",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub sessions: usize,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub page_threshold_s: f64,
    pub session_threshold_s: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            page_threshold_s: crate::sessionizer::DEFAULT_PAGE_THRESHOLD_S,
            session_threshold_s: crate::sessionizer::DEFAULT_SESSION_THRESHOLD_S,
        }
    }
}

/// Runs the three splitters over `events` and fits each one's size histogram.
pub fn compare_methods(
    events: &[LogEvent],
    course: &CourseStructure,
    baselines: BaselineConfig,
) -> Result<Vec<MethodRow>> {
    if events.is_empty() {
        return Err(Error::NoData);
    }
    let actions = actions_from_events(events);
    let thresholds = compute_thresholds(&actions, course)?;
    [
        (Method::Dynamic, split_sessions(&actions, &thresholds)?),
        (
            Method::FixedPage,
            split_sessions_fixed_page(&actions, baselines.page_threshold_s),
        ),
        (
            Method::FixedSession,
            split_sessions_fixed_total(&actions, baselines.session_threshold_s),
        ),
    ]
    .into_iter()
    .map(|(method, sessions)| {
        Ok(MethodRow {
            method,
            sessions: sessions.len(),
            fit: fit_power_law(&sessions)?,
        })
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub power_law: PowerLawFit,
    pub size_threshold_correlation: Option<f64>,
    pub methods: Vec<MethodRow>,
}

/// Full evaluation of one course's log.
pub fn evaluate(
    events: &[LogEvent],
    course: &CourseStructure,
    baselines: BaselineConfig,
) -> Result<Evaluation> {
    let methods = compare_methods(events, course, baselines)?;
    let thresholds = compute_thresholds(&actions_from_events(events), course)?;
    Ok(Evaluation {
        power_law: methods[0].fit,
        size_threshold_correlation: size_threshold_correlation(&thresholds, course),
        methods,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted_boundaries: usize,
    pub truth_boundaries: usize,
}

/// Boundary offsets per actor: the number of actions before each session
/// start other than the first, plus the actor's total action count.
fn boundaries(sessions: &[ReadingSession]) -> BTreeMap<&ActorKey, (BTreeSet<usize>, usize)> {
    let mut by_actor: BTreeMap<&ActorKey, Vec<&ReadingSession>> = BTreeMap::new();
    for s in sessions {
        by_actor.entry(&s.actor).or_default().push(s);
    }
    by_actor
        .into_iter()
        .map(|(actor, mut list)| {
            list.sort_by_key(|s| s.ordinal);
            let mut offset = 0;
            let mut cuts = BTreeSet::new();
            for (i, s) in list.iter().enumerate() {
                if i > 0 {
                    cuts.insert(offset);
                }
                offset += s.actions.len();
            }
            (actor, (cuts, offset))
        })
        .collect()
}

/// Precision, recall and F1 of predicted session boundaries. An empty
/// prediction set has precision 1, an empty truth set recall 1.
pub fn score_reconstruction(
    predicted: &[ReadingSession],
    truth: &[ReadingSession],
) -> Result<ReconstructionScore> {
    let p = boundaries(predicted);
    let t = boundaries(truth);
    if p.len() != t.len() || p.keys().zip(t.keys()).any(|(a, b)| a != b) {
        let only: Vec<String> = p
            .keys()
            .filter(|a| !t.contains_key(*a))
            .chain(t.keys().filter(|a| !p.contains_key(*a)))
            .map(|a| a.to_string())
            .collect();
        return Err(Error::ActorMismatch(only.join(", ")));
    }
    let (mut tp, mut np, mut nt) = (0, 0, 0);
    for ((actor, (pc, plen)), (_, (tc, tlen))) in p.iter().zip(&t) {
        if plen != tlen {
            return Err(Error::ActorMismatch(format!(
                "{actor} has {plen} predicted and {tlen} true actions"
            )));
        }
        tp += pc.intersection(tc).count();
        np += pc.len();
        nt += tc.len();
    }
    let precision = if np == 0 { 1.0 } else { tp as f64 / np as f64 };
    let recall = if nt == 0 { 1.0 } else { tp as f64 / nt as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ReconstructionScore {
        precision,
        recall,
        f1,
        true_positives: tp,
        predicted_boundaries: np,
        truth_boundaries: nt,
    })
}
