//! Session-based reading indicators, computed per course element.
//!
//! Four classes: stickiness, rereading, navigation, and stop & resume.
//! Consecutive requests for the same element inside a session are collapsed
//! into one visit (dwells summed) before anything is counted, so every
//! transition joins two distinct elements.
//!
//! Values that have no denominator (an element never arrived at, never
//! halted on, never read with a measured dwell) are `None`, never zero.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::{ActorKey, CourseStructure};
use crate::sessionizer::ReadingSession;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorClass {
    Stickiness,
    Rereading,
    Navigation,
    StopResume,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indicator {
    Visits,
    Readers,
    ReadingSessions,
    ReadingSpeed,
    Interest,
    Rereads,
    WithinSessionRereads,
    BetweenSessionRereads,
    NavigationLinearity,
    ArrivalLinearity,
    DepartureLinearity,
    FutureArrivals,
    PastArrivals,
    FutureDepartures,
    PastDepartures,
    ReadingHalt,
    ReadingStop,
    ResumeLinearity,
    PastResume,
    FutureResume,
}

impl Indicator {
    pub const ALL: [Indicator; 20] = [
        Indicator::Visits,
        Indicator::Readers,
        Indicator::ReadingSessions,
        Indicator::ReadingSpeed,
        Indicator::Interest,
        Indicator::Rereads,
        Indicator::WithinSessionRereads,
        Indicator::BetweenSessionRereads,
        Indicator::NavigationLinearity,
        Indicator::ArrivalLinearity,
        Indicator::DepartureLinearity,
        Indicator::FutureArrivals,
        Indicator::PastArrivals,
        Indicator::FutureDepartures,
        Indicator::PastDepartures,
        Indicator::ReadingHalt,
        Indicator::ReadingStop,
        Indicator::ResumeLinearity,
        Indicator::PastResume,
        Indicator::FutureResume,
    ];

    /// Column index in [`IndicatorMatrix`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Indicator::Visits => "visits",
            Indicator::Readers => "readers",
            Indicator::ReadingSessions => "reading_sessions",
            Indicator::ReadingSpeed => "reading_speed",
            Indicator::Interest => "interest",
            Indicator::Rereads => "rereads",
            Indicator::WithinSessionRereads => "within_session_rereads",
            Indicator::BetweenSessionRereads => "between_session_rereads",
            Indicator::NavigationLinearity => "navigation_linearity",
            Indicator::ArrivalLinearity => "arrival_linearity",
            Indicator::DepartureLinearity => "departure_linearity",
            Indicator::FutureArrivals => "future_arrivals",
            Indicator::PastArrivals => "past_arrivals",
            Indicator::FutureDepartures => "future_departures",
            Indicator::PastDepartures => "past_departures",
            Indicator::ReadingHalt => "reading_halt",
            Indicator::ReadingStop => "reading_stop",
            Indicator::ResumeLinearity => "resume_linearity",
            Indicator::PastResume => "past_resume",
            Indicator::FutureResume => "future_resume",
        }
    }

    pub fn class(self) -> IndicatorClass {
        use Indicator::*;
        match self {
            Visits | Readers | ReadingSessions | ReadingSpeed | Interest => IndicatorClass::Stickiness,
            Rereads | WithinSessionRereads | BetweenSessionRereads => IndicatorClass::Rereading,
            ReadingHalt | ReadingStop | ResumeLinearity | PastResume | FutureResume => {
                IndicatorClass::StopResume
            }
            _ => IndicatorClass::Navigation,
        }
    }

    /// Everything but reading speed is a rate in `[0, 1]`.
    pub fn is_ratio(self) -> bool {
        self != Indicator::ReadingSpeed
    }
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Indicator::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown indicator {s:?}")))
    }
}

/// Where a transition lands relative to the course plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heading {
    Linear,
    Past,
    Future,
}

/// Classifies an arrival at position `to` coming from position `from`.
pub fn classify_arrival(from: usize, to: usize) -> Heading {
    if from + 1 == to {
        Heading::Linear
    } else if from > to {
        Heading::Future
    } else {
        Heading::Past
    }
}

/// Classifies a departure from position `from` to position `to`.
pub fn classify_departure(from: usize, to: usize) -> Heading {
    if to == from + 1 {
        Heading::Linear
    } else if to > from + 1 {
        Heading::Future
    } else {
        Heading::Past
    }
}

/// Classifies a resumption on `resumed` after a halt on `halted`.
pub fn classify_resume(halted: usize, resumed: usize) -> Heading {
    if resumed == halted || resumed == halted + 1 {
        Heading::Linear
    } else if resumed < halted {
        Heading::Past
    } else {
        Heading::Future
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub actor: ActorKey,
    pub session: usize,
    pub from_element: String,
    pub to_element: String,
    pub arrival: Heading,
    pub departure: Heading,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionCounts {
    pub linear: u64,
    pub past: u64,
    pub future: u64,
}

impl DirectionCounts {
    fn add(&mut self, d: Heading) {
        match d {
            Heading::Linear => self.linear += 1,
            Heading::Past => self.past += 1,
            Heading::Future => self.future += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.linear + self.past + self.future
    }

    pub fn rate(&self, d: Heading) -> Option<f64> {
        let n = match d {
            Heading::Linear => self.linear,
            Heading::Past => self.past,
            Heading::Future => self.future,
        };
        ratio(n, self.total())
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn share(num: u64, den: u64) -> f64 {
    ratio(num, den).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StickinessRow {
    pub element_id: String,
    pub visits: f64,
    pub readers: f64,
    pub reading_sessions: f64,
    /// Words per minute; `None` when no measured dwell exists.
    pub reading_speed: Option<f64>,
    pub interest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RereadingRow {
    pub element_id: String,
    pub visit_count: u64,
    pub reread_count: u64,
    pub within_session_count: u64,
    pub between_session_count: u64,
    pub rereads: Option<f64>,
    pub within_session_rereads: Option<f64>,
    pub between_session_rereads: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationRow {
    pub element_id: String,
    pub arrivals: DirectionCounts,
    pub departures: DirectionCounts,
    pub navigation_linearity: Option<f64>,
    pub arrival_linearity: Option<f64>,
    pub departure_linearity: Option<f64>,
    pub future_arrivals: Option<f64>,
    pub past_arrivals: Option<f64>,
    pub future_departures: Option<f64>,
    pub past_departures: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopResumeRow {
    pub element_id: String,
    pub reading_halt: f64,
    pub reading_stop: f64,
    pub resumptions: DirectionCounts,
    pub resume_linearity: Option<f64>,
    pub past_resume: Option<f64>,
    pub future_resume: Option<f64>,
}

/// One collapsed visit: a maximal run of requests for the same element.
#[derive(Debug, Clone, Copy)]
struct Visit {
    position: usize,
    dwell: f64,
    estimated: bool,
}

#[derive(Debug, Clone, Default)]
struct ElementTally {
    visits: u64,
    readers: u64,
    sessions: u64,
    speed_sum: f64,
    speed_n: u64,
    rereads: u64,
    within: u64,
    between: u64,
    arrivals: DirectionCounts,
    departures: DirectionCounts,
    halts: u64,
    stops: u64,
    resumes: DirectionCounts,
}

struct Tally {
    elements: Vec<ElementTally>,
    total_visits: u64,
    total_actors: u64,
    total_sessions: u64,
}

/// Collapses a session into visits, skipping elements outside the plan.
fn collapse(session: &ReadingSession, course: &CourseStructure) -> Vec<Visit> {
    let mut visits: Vec<Visit> = Vec::with_capacity(session.actions.len());
    for a in &session.actions {
        let Some(position) = course.position(&a.element_id) else {
            continue;
        };
        match visits.last_mut() {
            Some(last) if last.position == position => {
                last.dwell += a.dwell_seconds;
                last.estimated |= a.dwell_is_estimated;
            }
            _ => visits.push(Visit {
                position,
                dwell: a.dwell_seconds,
                estimated: a.dwell_is_estimated,
            }),
        }
    }
    visits
}

/// Sessions grouped per actor, each group in ordinal order. Sorting here makes
/// every downstream sum independent of the order sessions were supplied in.
fn by_actor<'a>(
    sessions: &'a [ReadingSession],
    course: &CourseStructure,
) -> BTreeMap<&'a ActorKey, Vec<(usize, Vec<Visit>)>> {
    let mut grouped: BTreeMap<&ActorKey, Vec<&ReadingSession>> = BTreeMap::new();
    for s in sessions {
        grouped.entry(&s.actor).or_default().push(s);
    }
    grouped
        .into_iter()
        .map(|(actor, mut list)| {
            list.sort_by_key(|s| s.ordinal);
            let visits = list
                .into_iter()
                .map(|s| (s.ordinal, collapse(s, course)))
                .filter(|(_, v)| !v.is_empty())
                .collect::<Vec<_>>();
            (actor, visits)
        })
        .filter(|(_, v)| !v.is_empty())
        .collect()
}

fn tally(sessions: &[ReadingSession], course: &CourseStructure) -> Tally {
    let n = course.len();
    let words: Vec<u64> = course.elements().iter().map(|e| e.word_count).collect();
    let mut el = vec![ElementTally::default(); n];
    let mut total_visits = 0;
    let mut total_sessions = 0;
    let grouped = by_actor(sessions, course);

    for actor_sessions in grouped.values() {
        let mut read_by_actor = BTreeSet::new();
        for (_, visits) in actor_sessions {
            total_sessions += 1;
            let mut in_session = BTreeSet::new();
            for (i, v) in visits.iter().enumerate() {
                let t = &mut el[v.position];
                t.visits += 1;
                total_visits += 1;
                if !read_by_actor.insert(v.position) {
                    t.rereads += 1;
                    if in_session.contains(&v.position) {
                        t.within += 1;
                    } else {
                        t.between += 1;
                    }
                }
                if in_session.insert(v.position) {
                    t.sessions += 1;
                }
                if !v.estimated && v.dwell > 0.0 && words[v.position] > 0 {
                    t.speed_sum += words[v.position] as f64 / (v.dwell / 60.0);
                    t.speed_n += 1;
                }
                if let Some(next) = visits.get(i + 1) {
                    el[v.position]
                        .departures
                        .add(classify_departure(v.position, next.position));
                    el[next.position]
                        .arrivals
                        .add(classify_arrival(v.position, next.position));
                }
            }
            el[visits[visits.len() - 1].position].halts += 1;
        }
        for p in read_by_actor {
            el[p].readers += 1;
        }
        for pair in actor_sessions.windows(2) {
            let halted = pair[0].1[pair[0].1.len() - 1].position;
            let resumed = pair[1].1[0].position;
            el[halted].resumes.add(classify_resume(halted, resumed));
        }
        let (_, last) = &actor_sessions[actor_sessions.len() - 1];
        el[last[last.len() - 1].position].stops += 1;
    }

    Tally {
        elements: el,
        total_visits,
        total_actors: grouped.len() as u64,
        total_sessions,
    }
}

fn stickiness_rows(t: &Tally, course: &CourseStructure) -> Vec<StickinessRow> {
    course
        .elements()
        .iter()
        .zip(&t.elements)
        .map(|(e, c)| {
            let visits = share(c.visits, t.total_visits);
            let readers = share(c.readers, t.total_actors);
            let reading_sessions = share(c.sessions, t.total_sessions);
            StickinessRow {
                element_id: e.element_id.clone(),
                visits,
                readers,
                reading_sessions,
                reading_speed: (c.speed_n > 0).then(|| c.speed_sum / c.speed_n as f64),
                interest: (visits + readers + reading_sessions) / 3.0,
            }
        })
        .collect()
}

fn rereading_rows(t: &Tally, course: &CourseStructure) -> Vec<RereadingRow> {
    course
        .elements()
        .iter()
        .zip(&t.elements)
        .map(|(e, c)| RereadingRow {
            element_id: e.element_id.clone(),
            visit_count: c.visits,
            reread_count: c.rereads,
            within_session_count: c.within,
            between_session_count: c.between,
            rereads: ratio(c.rereads, c.visits),
            within_session_rereads: ratio(c.within, c.visits),
            between_session_rereads: ratio(c.between, c.visits),
        })
        .collect()
}

fn navigation_rows(t: &Tally, course: &CourseStructure) -> Vec<NavigationRow> {
    course
        .elements()
        .iter()
        .zip(&t.elements)
        .map(|(e, c)| NavigationRow {
            element_id: e.element_id.clone(),
            arrivals: c.arrivals,
            departures: c.departures,
            navigation_linearity: ratio(
                c.arrivals.linear + c.departures.linear,
                c.arrivals.total() + c.departures.total(),
            ),
            arrival_linearity: c.arrivals.rate(Heading::Linear),
            departure_linearity: c.departures.rate(Heading::Linear),
            future_arrivals: c.arrivals.rate(Heading::Future),
            past_arrivals: c.arrivals.rate(Heading::Past),
            future_departures: c.departures.rate(Heading::Future),
            past_departures: c.departures.rate(Heading::Past),
        })
        .collect()
}

fn stop_resume_rows(t: &Tally, course: &CourseStructure) -> Vec<StopResumeRow> {
    course
        .elements()
        .iter()
        .zip(&t.elements)
        .map(|(e, c)| StopResumeRow {
            element_id: e.element_id.clone(),
            reading_halt: share(c.halts, t.total_sessions),
            reading_stop: share(c.stops, t.total_actors),
            resumptions: c.resumes,
            resume_linearity: c.resumes.rate(Heading::Linear),
            past_resume: c.resumes.rate(Heading::Past),
            future_resume: c.resumes.rate(Heading::Future),
        })
        .collect()
}

/// Stickiness indicators, one row per element in plan order.
pub fn stickiness(sessions: &[ReadingSession], course: &CourseStructure) -> Vec<StickinessRow> {
    stickiness_rows(&tally(sessions, course), course)
}

pub fn rereading(sessions: &[ReadingSession], course: &CourseStructure) -> Vec<RereadingRow> {
    rereading_rows(&tally(sessions, course), course)
}

pub fn navigation(sessions: &[ReadingSession], course: &CourseStructure) -> Vec<NavigationRow> {
    navigation_rows(&tally(sessions, course), course)
}

pub fn stop_resume(sessions: &[ReadingSession], course: &CourseStructure) -> Vec<StopResumeRow> {
    stop_resume_rows(&tally(sessions, course), course)
}

/// Every transition between consecutive distinct elements within a session.
pub fn transitions(sessions: &[ReadingSession], course: &CourseStructure) -> Vec<TransitionRecord> {
    let id = |p: usize| course.elements()[p].element_id.clone();
    by_actor(sessions, course)
        .into_iter()
        .flat_map(|(actor, list)| {
            list.into_iter().flat_map(move |(ordinal, visits)| {
                visits
                    .windows(2)
                    .map(|w| TransitionRecord {
                        actor: actor.clone(),
                        session: ordinal,
                        from_element: id(w[0].position),
                        to_element: id(w[1].position),
                        arrival: classify_arrival(w[0].position, w[1].position),
                        departure: classify_departure(w[0].position, w[1].position),
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect()
}

/// Element × indicator grid of all twenty indicators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    pub course_id: String,
    pub elements: Vec<String>,
    /// `values[row][Indicator::index()]`; `None` marks a cell with no data.
    pub values: Vec<Vec<Option<f64>>>,
}

impl IndicatorMatrix {
    pub fn get(&self, row: usize, indicator: Indicator) -> Option<f64> {
        self.values[row][indicator.index()]
    }

    pub fn value(&self, element_id: &str, indicator: Indicator) -> Option<f64> {
        let row = self.elements.iter().position(|e| e == element_id)?;
        self.get(row, indicator)
    }

    pub fn column(&self, indicator: Indicator) -> Vec<Option<f64>> {
        self.values.iter().map(|r| r[indicator.index()]).collect()
    }

    /// One record per element with every indicator named, `null` when absent.
    pub fn records(&self) -> Vec<IndicatorRecord<'_>> {
        self.elements
            .iter()
            .zip(&self.values)
            .map(|(element_id, values)| IndicatorRecord { element_id, values })
            .collect()
    }
}

pub struct IndicatorRecord<'a> {
    pub element_id: &'a str,
    pub values: &'a [Option<f64>],
}

impl Serialize for IndicatorRecord<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(1 + Indicator::ALL.len()))?;
        map.serialize_entry("element_id", self.element_id)?;
        for ind in Indicator::ALL {
            map.serialize_entry(ind.name(), &self.values[ind.index()])?;
        }
        map.end()
    }
}

/// Computes all four indicator classes for every course element.
pub fn compute_matrix(sessions: &[ReadingSession], course: &CourseStructure) -> Result<IndicatorMatrix> {
    let t = tally(sessions, course);
    if t.total_sessions == 0 {
        return Err(Error::NoData);
    }
    let stick = stickiness_rows(&t, course);
    let reread = rereading_rows(&t, course);
    let nav = navigation_rows(&t, course);
    let stop = stop_resume_rows(&t, course);

    let values = (0..course.len())
        .map(|i| {
            let (s, r, n, p) = (&stick[i], &reread[i], &nav[i], &stop[i]);
            vec![
                Some(s.visits),
                Some(s.readers),
                Some(s.reading_sessions),
                s.reading_speed,
                Some(s.interest),
                r.rereads,
                r.within_session_rereads,
                r.between_session_rereads,
                n.navigation_linearity,
                n.arrival_linearity,
                n.departure_linearity,
                n.future_arrivals,
                n.past_arrivals,
                n.future_departures,
                n.past_departures,
                Some(p.reading_halt),
                Some(p.reading_stop),
                p.resume_linearity,
                p.past_resume,
                p.future_resume,
            ]
        })
        .collect();

    Ok(IndicatorMatrix {
        course_id: course.course_id().to_owned(),
        elements: course.elements().iter().map(|e| e.element_id.clone()).collect(),
        values,
    })
}
