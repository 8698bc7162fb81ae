//! Robust outlier flagging over indicator columns and issue classification.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::indicators::{Indicator, IndicatorMatrix};

pub const DEFAULT_MAD_CUTOFF: f64 = 3.5;
/// Fewer non-missing values than this never produce a flag.
pub const MIN_VALUES: usize = 4;

const MAD_SCALE: f64 = 0.6745;
const MEAN_AD_SCALE: f64 = 1.253314;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    High,
    Low,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::High => "high",
            Direction::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFlag {
    pub element_id: String,
    pub indicator: Indicator,
    pub value: f64,
    pub modified_z: f64,
    pub direction: Direction,
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Modified z-score of every present cell.
///
/// Cells are `None` when missing, or when fewer than [`MIN_VALUES`] cells are
/// present. A column with no spread at all scores zero everywhere.
pub fn modified_z_scores(values: &[Option<f64>]) -> Vec<Option<f64>> {
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    if present.len() < MIN_VALUES {
        return vec![None; values.len()];
    }
    present.sort_by(f64::total_cmp);
    let median = median_sorted(&present);
    let mut deviations: Vec<f64> = present.iter().map(|x| (x - median).abs()).collect();
    deviations.sort_by(f64::total_cmp);
    let mad = median_sorted(&deviations);

    let score: Box<dyn Fn(f64) -> f64> = if mad > 0.0 {
        Box::new(move |x| MAD_SCALE * (x - median) / mad)
    } else {
        let mean_ad = deviations.iter().sum::<f64>() / deviations.len() as f64;
        if mean_ad > 0.0 {
            Box::new(move |x| (x - median) / (MEAN_AD_SCALE * mean_ad))
        } else {
            Box::new(|_| 0.0)
        }
    };
    values.iter().map(|v| v.map(&score)).collect()
}

/// Flags every cell of one indicator column whose modified z-score exceeds
/// `cutoff` in absolute value, in either direction.
pub fn mad_flags(
    indicator: Indicator,
    elements: &[String],
    values: &[Option<f64>],
    cutoff: f64,
) -> Vec<AnomalyFlag> {
    modified_z_scores(values)
        .into_iter()
        .zip(values)
        .zip(elements)
        .filter_map(|((z, value), element_id)| {
            let (z, value) = (z?, (*value)?);
            (z.abs() > cutoff).then(|| AnomalyFlag {
                element_id: element_id.clone(),
                indicator,
                value,
                modified_z: z,
                direction: if z > 0.0 { Direction::High } else { Direction::Low },
            })
        })
        .collect()
}

/// Issue codes triggered by an indicator deviating in `direction`. Empty for
/// the harmless tail.
pub fn trigger(indicator: Indicator, direction: Direction) -> &'static [IssueCode] {
    use Direction::*;
    use Indicator::*;
    use IssueCode::*;
    const NAV: &[IssueCode] = &[NI1, NI2, NI3];
    match (indicator, direction) {
        (Visits | Readers | ReadingSessions | Interest, Low) => &[SI1],
        (ReadingSpeed, High) => &[SI1],
        (ReadingSpeed, Low) => &[SI2],
        (NavigationLinearity | ArrivalLinearity | DepartureLinearity, Low) => NAV,
        (FutureArrivals | PastArrivals | FutureDepartures | PastDepartures, High) => NAV,
        (Rereads | WithinSessionRereads, High) => &[RRI1],
        (BetweenSessionRereads, High) => &[RRI2],
        (ReadingStop, High) => &[SRI1],
        (ReadingHalt, High) => &[SRI2],
        (ResumeLinearity, Low) => &[SRI3],
        (PastResume | FutureResume, High) => &[SRI3],
        _ => &[],
    }
}

/// Every (indicator, direction) pair that [`detect`] can emit.
pub fn concerning_pairs() -> Vec<(Indicator, Direction)> {
    Indicator::ALL
        .into_iter()
        .flat_map(|i| [(i, Direction::High), (i, Direction::Low)])
        .filter(|&(i, d)| !trigger(i, d).is_empty())
        .collect()
}

/// Flags over the whole matrix, keeping only the concerning tail of each
/// indicator.
pub fn detect(matrix: &IndicatorMatrix, cutoff: f64) -> Vec<AnomalyFlag> {
    Indicator::ALL
        .into_iter()
        .flat_map(|ind| mad_flags(ind, &matrix.elements, &matrix.column(ind), cutoff))
        .filter(|f| !trigger(f.indicator, f.direction).is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    SI1,
    SI2,
    NI1,
    NI2,
    NI3,
    RRI1,
    RRI2,
    SRI1,
    SRI2,
    SRI3,
}

impl IssueCode {
    pub const ALL: [IssueCode; 10] = [
        IssueCode::SI1,
        IssueCode::SI2,
        IssueCode::NI1,
        IssueCode::NI2,
        IssueCode::NI3,
        IssueCode::RRI1,
        IssueCode::RRI2,
        IssueCode::SRI1,
        IssueCode::SRI2,
        IssueCode::SRI3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::SI1 => "SI1",
            IssueCode::SI2 => "SI2",
            IssueCode::NI1 => "NI1",
            IssueCode::NI2 => "NI2",
            IssueCode::NI3 => "NI3",
            IssueCode::RRI1 => "RRI1",
            IssueCode::RRI2 => "RRI2",
            IssueCode::SRI1 => "SRI1",
            IssueCode::SRI2 => "SRI2",
            IssueCode::SRI3 => "SRI3",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            IssueCode::SI1 => {
                "Low popularity due to low attractiveness of the chapter and/or its low readability"
            }
            IssueCode::SI2 => "Low stickiness due to the complexity of the content",
            IssueCode::NI1 => "Disorientation due to bad structuring",
            IssueCode::NI2 => "Non linear reading due to low memorability",
            IssueCode::NI3 => "Non linear reading due to low content complexity",
            IssueCode::RRI1 => "Many consecutive rereading due to content complexity",
            IssueCode::RRI2 => "Many distant rereading,due to low memorability",
            IssueCode::SRI1 => {
                "Permanently stop reading the course because of loss of interest, poor readability and/or high complexity"
            }
            IssueCode::SRI2 => "Reading halts due to content complexity",
            IssueCode::SRI3 => {
                "Resuming on previous on future distant chapters due to content complexity, low memorability and/or bad structuring"
            }
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IssueCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IssueCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown issue code {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueStatus {
    #[default]
    Open,
    Dismissed,
    Addressed,
}

impl FromStr for IssueStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(IssueStatus::Open),
            "dismissed" => Ok(IssueStatus::Dismissed),
            "addressed" => Ok(IssueStatus::Addressed),
            _ => Err(Error::Validation(format!("unknown issue status {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_id: String,
    pub code: IssueCode,
    pub element_id: String,
    pub evidence: Vec<AnomalyFlag>,
    pub description: String,
    pub status: IssueStatus,
}

/// Stable id for the issue `code` on `element_id`, unchanged across reanalysis.
pub fn issue_id(course_id: &str, element_id: &str, code: IssueCode) -> String {
    let mut h = Sha256::new();
    h.update(course_id.as_bytes());
    h.update([0]);
    h.update(element_id.as_bytes());
    h.update([0]);
    h.update(code.as_str().as_bytes());
    hex::encode(h.finalize())[..12].to_owned()
}

/// Groups flags into issues through the trigger table.
///
/// One issue per (element, code), ordered by element then code. Flags on the
/// harmless tail are ignored. An indicator flagged in both directions on one
/// element is an internal error.
pub fn classify_issues(course_id: &str, flags: &[AnomalyFlag]) -> Result<Vec<Issue>> {
    let mut seen: BTreeMap<(&str, Indicator), Direction> = BTreeMap::new();
    for f in flags {
        if let Some(prev) = seen.insert((&f.element_id, f.indicator), f.direction) {
            if prev != f.direction {
                return Err(Error::Internal(format!(
                    "{} flagged both high and low on {}",
                    f.indicator, f.element_id
                )));
            }
        }
    }

    let mut grouped: BTreeMap<(&str, IssueCode), Vec<AnomalyFlag>> = BTreeMap::new();
    for f in flags {
        for &code in trigger(f.indicator, f.direction) {
            let evidence = grouped.entry((&f.element_id, code)).or_default();
            if !evidence.iter().any(|e| e.indicator == f.indicator) {
                evidence.push(f.clone());
            }
        }
    }

    Ok(grouped
        .into_iter()
        .map(|((element_id, code), mut evidence)| {
            evidence.sort_by_key(|f| f.indicator);
            Issue {
                issue_id: issue_id(course_id, element_id, code),
                code,
                element_id: element_id.to_owned(),
                evidence,
                description: code.description().to_owned(),
                status: IssueStatus::Open,
            }
        })
        .collect())
}
