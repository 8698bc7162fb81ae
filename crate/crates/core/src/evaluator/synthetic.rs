//! Seeded synthetic reading logs with known session boundaries.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, LogNormal, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{CourseElement, CourseStructure, LogEvent};
use crate::sessionizer::{ReadAction, ReadingSession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub course_id: String,
    pub n_actors: usize,
    pub n_elements: usize,
    pub seed: u64,
    /// Word counts are drawn uniformly from `[min, max)`.
    pub word_range: (u64, u64),
    pub max_images: u64,
    /// Median dwell per unit of effective size.
    pub seconds_per_word: f64,
    /// Log-scale sigma of the dwell noise; 0 gives exact median dwells.
    pub dwell_noise: f64,
    /// Per-session probability that an actor stops after it.
    pub stop_probability: f64,
    /// Exponent of the Zipf law over distinct elements per session.
    pub size_exponent: f64,
    /// Chance of stepping back to the previous element and returning after
    /// each newly visited element.
    pub reread_probability: f64,
    /// Bounds of the uniform pause between two sessions, in seconds.
    pub gap_range_s: (i64, i64),
    pub start_time: i64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            course_id: "synthetic".into(),
            n_actors: 6000,
            n_elements: 15,
            seed: 42,
            word_range: (150, 1500),
            max_images: 4,
            seconds_per_word: 0.25,
            dwell_noise: 0.3,
            stop_probability: 0.95,
            size_exponent: 1.8,
            reread_probability: 0.4,
            gap_range_s: (129_600, 216_000),
            start_time: 1_400_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticLog {
    pub course: CourseStructure,
    /// Canonically ordered events.
    pub events: Vec<LogEvent>,
    /// True sessions with the generated dwell of every action.
    pub truth: Vec<ReadingSession>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.into()));
        if self.n_elements == 0 {
            return bad("n_elements must be positive");
        }
        if self.word_range.0 >= self.word_range.1 {
            return bad("word_range must be a non-empty interval");
        }
        if !(self.stop_probability > 0.0 && self.stop_probability <= 1.0) {
            return bad("stop_probability must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.reread_probability) {
            return bad("reread_probability must be in [0, 1]");
        }
        if self.size_exponent <= 0.0 || self.seconds_per_word <= 0.0 || self.dwell_noise < 0.0 {
            return bad("size_exponent and seconds_per_word must be positive, dwell_noise non-negative");
        }
        if self.gap_range_s.0 < 1 || self.gap_range_s.0 > self.gap_range_s.1 {
            return bad("gap_range_s must be a positive interval");
        }
        Ok(())
    }
}

/// Generates a course, its event log and the true sessions. The same spec
/// always yields the same output.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticLog> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_elements;

    let elements: Vec<CourseElement> = (0..n)
        .map(|i| CourseElement {
            element_id: format!("e{i:02}"),
            title: format!("Element {}", i + 1),
            position: i,
            word_count: rng.random_range(spec.word_range.0..spec.word_range.1),
            image_count: rng.random_range(0..=spec.max_images),
        })
        .collect();
    let medians: Vec<f64> = elements
        .iter()
        .map(|e| spec.seconds_per_word * e.effective_size() as f64)
        .collect();

    let zipf = Zipf::new(n as f64, spec.size_exponent).map_err(|e| Error::Validation(e.to_string()))?;
    let extra_sessions =
        Geometric::new(spec.stop_probability).map_err(|e| Error::Validation(e.to_string()))?;
    let noise = LogNormal::new(0.0, spec.dwell_noise).map_err(|e| Error::Validation(e.to_string()))?;

    let mut events = Vec::new();
    let mut truth = Vec::new();
    let mut request = 0usize;

    for actor in 0..spec.n_actors {
        let user = format!("u{actor:05}");
        let mut t = spec.start_time + rng.random_range(0..10_000_000);
        let n_sessions = 1 + extra_sessions.sample(&mut rng) as usize;
        for ordinal in 0..n_sessions {
            let k = (zipf.sample(&mut rng) as usize).clamp(1, n);
            let path = reading_path(&mut rng, n, k, spec.reread_probability);
            let mut actions = Vec::with_capacity(path.len());
            for e in path {
                let factor = if spec.dwell_noise > 0.0 { noise.sample(&mut rng) } else { 1.0 };
                let dwell = (medians[e] * factor).round().max(1.0);
                events.push(LogEvent {
                    request_id: format!("r{request:08}"),
                    user_id: Some(user.clone()),
                    course_id: spec.course_id.clone(),
                    element_id: elements[e].element_id.clone(),
                    server_session_id: Some(format!("s{actor:05}-{ordinal}")),
                    timestamp: t,
                });
                request += 1;
                actions.push(ReadAction {
                    actor: user.as_str().into(),
                    element_id: elements[e].element_id.clone(),
                    start: t,
                    dwell_seconds: dwell,
                    dwell_is_estimated: false,
                });
                t += dwell as i64;
            }
            truth.push(ReadingSession {
                actor: user.as_str().into(),
                ordinal,
                actions,
            });
            t += rng.random_range(spec.gap_range_s.0..=spec.gap_range_s.1);
        }
    }

    Ok(SyntheticLog {
        course: CourseStructure::new(spec.course_id.clone(), elements)?,
        events,
        truth,
    })
}

/// A mostly linear walk over `k` distinct elements starting at a random one.
/// When the walk runs off the end or onto a visited element it jumps to a
/// random unvisited one.
fn reading_path(rng: &mut impl Rng, n: usize, k: usize, reread: f64) -> Vec<usize> {
    let mut visited = Vec::with_capacity(k);
    let mut path = Vec::with_capacity(k * 2);
    let mut cur = rng.random_range(0..n);
    while visited.len() < k {
        if cur >= n || visited.contains(&cur) {
            let free: Vec<usize> = (0..n).filter(|e| !visited.contains(e)).collect();
            cur = *free.choose(rng).expect("k never exceeds n");
        }
        path.push(cur);
        visited.push(cur);
        if visited.len() > 1 && rng.random::<f64>() < reread {
            path.push(visited[visited.len() - 2]);
            path.push(cur);
        }
        cur += 1;
    }
    path
}
