//! Log and course-outline ingestion.
//!
//! Logs are header-bearing CSV files with one request per row:
//!
//! ```text
//! request_id,user_id,course_id,element_id,server_session_id,timestamp
//! r1,u1,c1,intro,s9,1420070400
//! ```
//!
//! Timestamps are integer Unix seconds. An empty `user_id` marks an anonymous
//! request, whose actor falls back to the server session id. Bad rows never
//! abort a batch; they are counted in the [`CleanReport`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns of the log CSV, in canonical order.
pub const LOG_COLUMNS: [&str; 6] = [
    "request_id",
    "user_id",
    "course_id",
    "element_id",
    "server_session_id",
    "timestamp",
];

/// Words an inline image counts for when sizing an element.
pub const WORDS_PER_IMAGE: u64 = 30;

/// Identifies the learner (or anonymous browser session) behind a request.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActorKey(pub String);

impl ActorKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ActorKey {
    fn from(s: &str) -> Self {
        ActorKey(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub request_id: String,
    pub user_id: Option<String>,
    pub course_id: String,
    pub element_id: String,
    pub server_session_id: Option<String>,
    /// Unix seconds, UTC.
    pub timestamp: i64,
}

impl LogEvent {
    fn actor_str(&self) -> Option<&str> {
        self.user_id
            .as_deref()
            .or(self.server_session_id.as_deref())
    }
}

/// Returns the actor key for an event: the user id when present, otherwise the
/// server session id.
pub fn identify_actor(event: &LogEvent) -> Result<ActorKey> {
    event
        .actor_str()
        .map(ActorKey::from)
        .ok_or_else(|| Error::Unattributable {
            request_id: event.request_id.clone(),
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseElement {
    pub element_id: String,
    pub title: String,
    pub position: usize,
    pub word_count: u64,
    pub image_count: u64,
}

impl CourseElement {
    /// Word count plus [`WORDS_PER_IMAGE`] per inline image.
    pub fn effective_size(&self) -> u64 {
        self.word_count + WORDS_PER_IMAGE * self.image_count
    }
}

/// On-disk / wire shape of a course outline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutlineFile {
    pub course_id: String,
    pub elements: Vec<CourseElement>,
}

/// A validated course plan: elements ordered by position, ids unique,
/// positions exactly `0..N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OutlineFile", into = "OutlineFile")]
pub struct CourseStructure {
    course_id: String,
    elements: Vec<CourseElement>,
    index: BTreeMap<String, usize>,
}

impl TryFrom<OutlineFile> for CourseStructure {
    type Error = Error;

    fn try_from(file: OutlineFile) -> Result<Self> {
        CourseStructure::new(file.course_id, file.elements)
    }
}

impl From<CourseStructure> for OutlineFile {
    fn from(course: CourseStructure) -> Self {
        OutlineFile {
            course_id: course.course_id,
            elements: course.elements,
        }
    }
}

impl CourseStructure {
    pub fn new(course_id: impl Into<String>, mut elements: Vec<CourseElement>) -> Result<Self> {
        let course_id = course_id.into();
        if course_id.trim().is_empty() {
            return Err(Error::Outline("course_id is empty".into()));
        }
        if elements.is_empty() {
            return Err(Error::Outline("outline is empty".into()));
        }
        let mut index = BTreeMap::new();
        for el in &elements {
            if el.element_id.is_empty() {
                return Err(Error::Outline("element with empty element_id".into()));
            }
            if index.insert(el.element_id.clone(), 0).is_some() {
                return Err(Error::Outline(format!(
                    "duplicate element_id {}",
                    el.element_id
                )));
            }
        }
        elements.sort_by_key(|e| e.position);
        for (i, el) in elements.iter().enumerate() {
            if el.position != i {
                return Err(if i > 0 && elements[i - 1].position == el.position {
                    Error::Outline(format!("duplicate position {}", el.position))
                } else {
                    Error::Outline(format!("gap at {i}"))
                });
            }
            index.insert(el.element_id.clone(), i);
        }
        Ok(CourseStructure {
            course_id,
            elements,
            index,
        })
    }

    pub fn course_id(&self) -> &str {
        &self.course_id
    }

    /// Elements in plan order.
    pub fn elements(&self) -> &[CourseElement] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, element_id: &str) -> Option<usize> {
        self.index.get(element_id).copied()
    }

    pub fn element(&self, element_id: &str) -> Option<&CourseElement> {
        self.position(element_id).map(|p| &self.elements[p])
    }

    pub fn contains(&self, element_id: &str) -> bool {
        self.index.contains_key(element_id)
    }
}

/// Reads and validates a JSON course outline.
pub fn parse_course_outline(path: impl AsRef<Path>) -> Result<CourseStructure> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_course_outline_reader(file)
}

pub fn parse_course_outline_reader(reader: impl Read) -> Result<CourseStructure> {
    let outline: OutlineFile = serde_json::from_reader(reader)
        .map_err(|e| Error::Outline(format!("unreadable outline: {e}")))?;
    CourseStructure::try_from(outline)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanReport {
    pub rows_in: u64,
    pub rows_kept: u64,
    pub dropped_malformed: u64,
    pub dropped_duplicate: u64,
    pub dropped_unknown_element: u64,
    pub dropped_anonymous: u64,
}

impl CleanReport {
    pub fn dropped(&self) -> u64 {
        self.dropped_malformed
            + self.dropped_duplicate
            + self.dropped_unknown_element
            + self.dropped_anonymous
    }

    pub fn is_balanced(&self) -> bool {
        self.rows_in == self.rows_kept + self.dropped()
    }
}

/// Parses and cleans a log file against `course`.
pub fn parse_log_file(
    path: impl AsRef<Path>,
    course: &CourseStructure,
) -> Result<(Vec<LogEvent>, CleanReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log_reader(file, course)
}

pub fn parse_log_reader(
    reader: impl Read,
    course: &CourseStructure,
) -> Result<(Vec<LogEvent>, CleanReport)> {
    clean_log(reader, course, &HashSet::new())
}

/// Like [`parse_log_reader`] but also treats `known_request_ids` (events
/// already held elsewhere) as duplicates.
pub fn clean_log(
    reader: impl Read,
    course: &CourseStructure,
    known_request_ids: &HashSet<String>,
) -> Result<(Vec<LogEvent>, CleanReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .has_headers(false)
        .from_reader(reader);
    let mut records = rdr.records();
    let mut report = CleanReport::default();

    let header = match records.next() {
        None => return Ok((Vec::new(), report)),
        Some(h) => h.map_err(|e| Error::Format(format!("unreadable header: {e}")))?,
    };
    let columns = column_map(&header)?;

    let mut seen: HashSet<String> = HashSet::new();
    let mut events = Vec::new();
    for record in records {
        report.rows_in += 1;
        let Some(event) = record.ok().and_then(|r| parse_row(&r, &columns)) else {
            report.dropped_malformed += 1;
            continue;
        };
        if event.course_id != course.course_id() || !course.contains(&event.element_id) {
            report.dropped_unknown_element += 1;
            continue;
        }
        if event.actor_str().is_none() {
            report.dropped_anonymous += 1;
            continue;
        }
        if known_request_ids.contains(&event.request_id) || !seen.insert(event.request_id.clone())
        {
            report.dropped_duplicate += 1;
            continue;
        }
        events.push(event);
    }
    report.rows_kept = events.len() as u64;
    sort_events(&mut events);
    Ok((events, report))
}

/// Sorts into the canonical (actor, timestamp, request_id) order.
/// Events without an actor sort first.
pub fn sort_events(events: &mut [LogEvent]) {
    events.sort_by(|a, b| {
        (a.actor_str(), a.timestamp, &a.request_id).cmp(&(
            b.actor_str(),
            b.timestamp,
            &b.request_id,
        ))
    });
}

fn column_map(header: &csv::StringRecord) -> Result<[usize; 6]> {
    let mut map = [usize::MAX; 6];
    for (i, name) in header.iter().enumerate() {
        let name = name.trim_start_matches('\u{feff}');
        match LOG_COLUMNS.iter().position(|c| *c == name) {
            Some(slot) if map[slot] == usize::MAX => map[slot] = i,
            Some(_) => return Err(Error::Format(format!("column {name} repeated in header"))),
            None => return Err(Error::Format(format!("unexpected column {name:?} in header"))),
        }
    }
    if let Some(missing) = map.iter().position(|&i| i == usize::MAX) {
        return Err(Error::Format(format!(
            "header lacks column {}",
            LOG_COLUMNS[missing]
        )));
    }
    Ok(map)
}

fn parse_row(record: &csv::StringRecord, columns: &[usize; 6]) -> Option<LogEvent> {
    if record.len() != LOG_COLUMNS.len() {
        return None;
    }
    let field = |slot: usize| record.get(columns[slot]).unwrap_or("");
    let optional = |slot: usize| Some(field(slot)).filter(|s| !s.is_empty()).map(str::to_owned);
    let required = |slot: usize| optional(slot);

    Some(LogEvent {
        request_id: required(0)?,
        user_id: optional(1),
        course_id: required(2)?,
        element_id: required(3)?,
        server_session_id: optional(4),
        timestamp: field(5).parse().ok()?,
    })
}

/// Writes events as log CSV in the order given.
pub fn write_log_csv(writer: impl Write, events: &[LogEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LOG_COLUMNS)
        .map_err(|e| Error::Format(e.to_string()))?;
    for ev in events {
        let ts = ev.timestamp.to_string();
        w.write_record([
            ev.request_id.as_str(),
            ev.user_id.as_deref().unwrap_or(""),
            ev.course_id.as_str(),
            ev.element_id.as_str(),
            ev.server_session_id.as_deref().unwrap_or(""),
            ts.as_str(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
