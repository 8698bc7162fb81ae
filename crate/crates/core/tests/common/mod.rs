//! Independent reference implementations used as test oracles. None of these
//! call into the library's algorithms; they recompute from definitions.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use readtrace::indicators::Indicator;
use readtrace::ingest::{CourseElement, CourseStructure};
use readtrace::sessionizer::{ReadAction, ReadingSession};

// ---------------------------------------------------------------------------
// Peirce's criterion from Gould's equations, solved by bisection.

/// erfc by composite Simpson integration of the Gaussian kernel.
pub fn erfc_simpson(x: f64) -> f64 {
    let steps = 4000;
    let h = x / steps as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    1.0 - 2.0 / std::f64::consts::PI.sqrt() * s * h / 3.0
}

/// Gould's ratio for `n` doubtful of `big_n` observations with one unknown,
/// as the root of `n ln R(x) + (N-n)/2 ln λ²(x) - N ln Q = 0`. `None` when
/// the equation has no positive root (`n` close to `N`).
pub fn gould_ratio(big_n: usize, n: usize) -> Option<f64> {
    thread_local! {
        static MEMO: std::cell::RefCell<std::collections::HashMap<(usize, usize), Option<f64>>> =
            Default::default();
    }
    if let Some(hit) = MEMO.with(|m| m.borrow().get(&(big_n, n)).copied()) {
        return hit;
    }
    let r = gould_ratio_uncached(big_n, n);
    MEMO.with(|m| m.borrow_mut().insert((big_n, n), r));
    r
}

fn gould_ratio_uncached(big_n: usize, n: usize) -> Option<f64> {
    let m = 1.0;
    let (bn, nn) = (big_n as f64, n as f64);
    if n == 0 || nn + m >= bn {
        return None;
    }
    let ln_q_n = nn * nn.ln() + (bn - nn) * (bn - nn).ln() - bn * bn.ln();
    let f = |x: f64| {
        let ln_r = (x * x - 1.0) / 2.0 + erfc_simpson(x / 2f64.sqrt()).ln();
        let lambda2 = 1.0 - (x * x - 1.0) * nn / (bn - m - nn);
        nn * ln_r + (bn - nn) / 2.0 * lambda2.ln() - ln_q_n
    };
    let mut lo = 1e-9;
    let mut hi = (1.0 + (bn - m - nn) / nn).sqrt() - 1e-12;
    let flo = f(lo);
    if flo.signum() == f(hi).signum() {
        return None;
    }
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Rejection with the oracle ratio: mean and sample deviation once, then the
/// doubtful count grows until a round rejects fewer than it assumed.
/// Returns the rejected values in ascending order.
pub fn peirce_oracle(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 3 {
        return Vec::new();
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    if sd == 0.0 {
        return Vec::new();
    }
    let mut limit = f64::INFINITY;
    let mut k = 1;
    while let Some(r) = gould_ratio(n, k) {
        let rejected = xs.iter().filter(|x| (*x - mean).abs() > r * sd).count();
        if rejected < k {
            break;
        }
        limit = r * sd;
        k = rejected + 1;
    }
    let mut out: Vec<f64> = xs.iter().copied().filter(|x| (x - mean).abs() > limit).collect();
    out.sort_by(f64::total_cmp);
    out
}

// ---------------------------------------------------------------------------
// Session splitting by direct transcription of the rules.

/// Splits actor-grouped actions: a session ends after the actor's last
/// action or after any dwell above the element's threshold, and that action's
/// dwell becomes the threshold.
pub fn split_oracle(
    actions: &[ReadAction],
    threshold: &dyn Fn(&str) -> f64,
) -> Vec<ReadingSession> {
    let mut order: Vec<String> = Vec::new();
    let mut per_actor: BTreeMap<String, Vec<ReadAction>> = BTreeMap::new();
    for a in actions {
        if !per_actor.contains_key(a.actor.as_str()) {
            order.push(a.actor.as_str().to_owned());
        }
        per_actor.entry(a.actor.as_str().to_owned()).or_default().push(a.clone());
    }
    let mut out = Vec::new();
    for actor in order {
        let list = &per_actor[&actor];
        let mut ordinal = 0;
        let mut cur: Vec<ReadAction> = Vec::new();
        for i in 0..list.len() {
            let mut a = list[i].clone();
            let t = threshold(&a.element_id);
            let last = i == list.len() - 1;
            let gap = if last { None } else { Some((list[i + 1].start - a.start) as f64) };
            let cut = match gap {
                None => true,
                Some(g) => g > t,
            };
            if cut {
                a.dwell_seconds = t;
                a.dwell_is_estimated = true;
            } else {
                a.dwell_seconds = gap.unwrap();
                a.dwell_is_estimated = false;
            }
            cur.push(a);
            if cut {
                out.push(ReadingSession {
                    actor: actor.as_str().into(),
                    ordinal,
                    actions: std::mem::take(&mut cur),
                });
                ordinal += 1;
            }
        }
    }
    out
}

/// Thresholds from the definitions: the largest Peirce-retained observed
/// dwell per element, or the median of those for elements without one.
/// `None` when no element has an observed dwell.
pub fn threshold_oracle(actions: &[ReadAction], course: &CourseStructure) -> Option<BTreeMap<String, f64>> {
    let mut own = BTreeMap::new();
    for el in course.elements() {
        let samples: Vec<f64> = actions
            .iter()
            .filter(|a| !a.dwell_is_estimated && a.element_id == el.element_id)
            .map(|a| a.dwell_seconds)
            .collect();
        let mut kept = samples.clone();
        for r in peirce_oracle(&samples) {
            let i = kept.iter().position(|x| *x == r).expect("removed values come from the input");
            kept.remove(i);
        }
        let max = kept.iter().copied().fold(0.0, f64::max);
        own.insert(el.element_id.clone(), (max > 0.0).then_some(max));
    }
    let mut observed: Vec<f64> = own.values().flatten().copied().collect();
    if observed.is_empty() {
        return None;
    }
    observed.sort_by(f64::total_cmp);
    let k = observed.len();
    let fallback = if k % 2 == 1 { observed[k / 2] } else { (observed[k / 2 - 1] + observed[k / 2]) / 2.0 };
    Some(own.into_iter().map(|(e, t)| (e, t.unwrap_or(fallback))).collect())
}

// ---------------------------------------------------------------------------
// Indicators recounted element by element.

struct Visit<'a> {
    actor: &'a str,
    session: usize,
    index: usize,
    element: &'a str,
    dwell: f64,
    estimated: bool,
}

fn flatten(sessions: &[ReadingSession]) -> Vec<Vec<Visit<'_>>> {
    let mut keyed: Vec<&ReadingSession> = sessions.iter().collect();
    keyed.sort_by(|a, b| (a.actor.as_str(), a.ordinal).cmp(&(b.actor.as_str(), b.ordinal)));
    keyed
        .iter()
        .map(|s| {
            let mut v: Vec<Visit> = Vec::new();
            for a in &s.actions {
                if let Some(last) = v.last_mut() {
                    if last.element == a.element_id {
                        last.dwell += a.dwell_seconds;
                        last.estimated = last.estimated || a.dwell_is_estimated;
                        continue;
                    }
                }
                let index = v.len();
                v.push(Visit {
                    actor: s.actor.as_str(),
                    session: s.ordinal,
                    index,
                    element: &a.element_id,
                    dwell: a.dwell_seconds,
                    estimated: a.dwell_is_estimated,
                });
            }
            v
        })
        .collect()
}

fn div(a: usize, b: usize) -> Option<f64> {
    if b == 0 {
        None
    } else {
        Some(a as f64 / b as f64)
    }
}

/// All twenty indicators for every element, keyed by element id.
pub fn naive_indicators(
    sessions: &[ReadingSession],
    course: &CourseStructure,
) -> BTreeMap<String, BTreeMap<Indicator, Option<f64>>> {
    let sess = flatten(sessions);
    let pos = |e: &str| course.position(e).unwrap() as i64;
    let all_visits: usize = sess.iter().map(|s| s.len()).sum();
    let actors: BTreeSet<&str> = sess.iter().flatten().map(|v| v.actor).collect();
    let n_sessions = sess.len();

    let mut out = BTreeMap::new();
    for el in course.elements() {
        let e = el.element_id.as_str();
        let p = pos(e);
        let mut m = BTreeMap::new();

        let visits: Vec<&Visit> = sess.iter().flatten().filter(|v| v.element == e).collect();
        let readers: BTreeSet<&str> = visits.iter().map(|v| v.actor).collect();
        let in_sessions = sess.iter().filter(|s| s.iter().any(|v| v.element == e)).count();
        let share = |a: usize, b: usize| div(a, b).unwrap_or(0.0);
        let v_share = share(visits.len(), all_visits);
        let r_share = share(readers.len(), actors.len());
        let s_share = share(in_sessions, n_sessions);
        m.insert(Indicator::Visits, Some(v_share));
        m.insert(Indicator::Readers, Some(r_share));
        m.insert(Indicator::ReadingSessions, Some(s_share));
        let speeds: Vec<f64> = visits
            .iter()
            .filter(|v| !v.estimated && v.dwell > 0.0 && el.word_count > 0)
            .map(|v| el.word_count as f64 * 60.0 / v.dwell)
            .collect();
        m.insert(
            Indicator::ReadingSpeed,
            if speeds.is_empty() { None } else { Some(speeds.iter().sum::<f64>() / speeds.len() as f64) },
        );
        m.insert(Indicator::Interest, Some((v_share + r_share + s_share) / 3.0));

        // Rereads: an earlier visit by the same actor exists.
        let mut within = 0;
        let mut between = 0;
        for v in &visits {
            let earlier_same_session = sess.iter().flatten().any(|w| {
                w.actor == v.actor && w.session == v.session && w.index < v.index && w.element == e
            });
            let earlier_other = sess.iter().flatten().any(|w| {
                w.actor == v.actor && w.session < v.session && w.element == e
            });
            if earlier_same_session {
                within += 1;
            } else if earlier_other {
                between += 1;
            }
        }
        m.insert(Indicator::Rereads, div(within + between, visits.len()));
        m.insert(Indicator::WithinSessionRereads, div(within, visits.len()));
        m.insert(Indicator::BetweenSessionRereads, div(between, visits.len()));

        // Transitions touching e.
        let mut arr = [0usize; 3]; // linear, past, future
        let mut dep = [0usize; 3];
        for s in &sess {
            for w in s.windows(2) {
                let (d, a) = (pos(w[0].element), pos(w[1].element));
                if w[1].element == e {
                    let k = if d == a - 1 { 0 } else if d > a { 2 } else { 1 };
                    arr[k] += 1;
                }
                if w[0].element == e {
                    let k = if a == d + 1 { 0 } else if a > d + 1 { 2 } else { 1 };
                    dep[k] += 1;
                }
            }
        }
        let (na, nd) = (arr.iter().sum::<usize>(), dep.iter().sum::<usize>());
        m.insert(Indicator::NavigationLinearity, div(arr[0] + dep[0], na + nd));
        m.insert(Indicator::ArrivalLinearity, div(arr[0], na));
        m.insert(Indicator::PastArrivals, div(arr[1], na));
        m.insert(Indicator::FutureArrivals, div(arr[2], na));
        m.insert(Indicator::DepartureLinearity, div(dep[0], nd));
        m.insert(Indicator::PastDepartures, div(dep[1], nd));
        m.insert(Indicator::FutureDepartures, div(dep[2], nd));

        // Stops and resumptions.
        let halts = sess.iter().filter(|s| s.last().unwrap().element == e).count();
        m.insert(Indicator::ReadingHalt, Some(share(halts, n_sessions)));
        let mut stops = 0;
        let mut res = [0usize; 3];
        for actor in &actors {
            let mine: Vec<&Vec<Visit>> = sess.iter().filter(|s| s[0].actor == *actor).collect();
            if mine.last().unwrap().last().unwrap().element == e {
                stops += 1;
            }
            for pair in mine.windows(2) {
                let h = pair[0].last().unwrap().element;
                if h != e {
                    continue;
                }
                let r = pos(pair[1][0].element);
                let k = if r == p || r == p + 1 { 0 } else if r < p { 1 } else { 2 };
                res[k] += 1;
            }
        }
        m.insert(Indicator::ReadingStop, Some(share(stops, actors.len())));
        let nr = res.iter().sum();
        m.insert(Indicator::ResumeLinearity, div(res[0], nr));
        m.insert(Indicator::PastResume, div(res[1], nr));
        m.insert(Indicator::FutureResume, div(res[2], nr));

        out.insert(e.to_owned(), m);
    }
    out
}

// ---------------------------------------------------------------------------
// Modified z-scores by brute force.

pub fn brute_modified_z(xs: &[f64]) -> Vec<f64> {
    let med = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
    };
    let m = med(&mut xs.to_vec());
    let mad = med(&mut xs.iter().map(|x| (x - m).abs()).collect());
    if mad > 0.0 {
        return xs.iter().map(|x| 0.6745 * (x - m) / mad).collect();
    }
    let mean_ad = xs.iter().map(|x| (x - m).abs()).sum::<f64>() / xs.len() as f64;
    if mean_ad > 0.0 {
        xs.iter().map(|x| (x - m) / (1.253314 * mean_ad)).collect()
    } else {
        vec![0.0; xs.len()]
    }
}

// ---------------------------------------------------------------------------
// Fixtures.

pub fn course(n: usize) -> CourseStructure {
    let elements = (0..n)
        .map(|i| CourseElement {
            element_id: format!("e{i}"),
            title: format!("Element {i}"),
            position: i,
            word_count: 200 + 50 * i as u64,
            image_count: (i % 3) as u64,
        })
        .collect();
    CourseStructure::new("course", elements).unwrap()
}

// ---------------------------------------------------------------------------
// A small course with one planted issue.

/// Ten elements whose word counts make every dwell a whole number of seconds.
pub fn planted_course() -> CourseStructure {
    let elements = (0..10)
        .map(|i| CourseElement {
            element_id: format!("e{i:02}"),
            title: format!("Chapter {i}"),
            position: i,
            word_count: 200 + 40 * i as u64,
            image_count: 0,
        })
        .collect();
    CourseStructure::new("planted", elements).unwrap()
}

pub const PLANTED_ELEMENT: &str = "e05";

/// Learners `{prefix}{n}` each read a prefix of the outline linearly in one
/// session, at 240 or 120 words per minute. Stopping points and speeds are
/// balanced so every indicator column is constant or a straight trend,
/// except reading speed on [`PLANTED_ELEMENT`], which is three times slower.
pub fn planted_events(prefix: &str, reps: usize) -> Vec<readtrace::LogEvent> {
    let course = planted_course();
    let mut events = Vec::new();
    let mut n = 0;
    for rep in 0..reps {
        for last in 0..10 {
            for factor in [1u64, 2] {
                let actor = format!("{prefix}{n:03}");
                n += 1;
                let mut t = 1_500_000_000 + (rep * 20 + last * 2 + factor as usize) as i64 * 7_200;
                for (i, el) in course.elements().iter().take(last + 1).enumerate() {
                    events.push(readtrace::LogEvent {
                        request_id: format!("{actor}-{i}"),
                        user_id: Some(actor.clone()),
                        course_id: "planted".into(),
                        element_id: el.element_id.clone(),
                        server_session_id: None,
                        timestamp: t,
                    });
                    let mut dwell = el.word_count / 4 * factor;
                    if el.element_id == PLANTED_ELEMENT {
                        dwell *= 3;
                    }
                    t += dwell as i64;
                }
            }
        }
    }
    readtrace::ingest::sort_events(&mut events);
    events
}

pub fn planted_outline_json() -> String {
    serde_json::to_string_pretty(&planted_course()).unwrap()
}

pub fn planted_csv(prefix: &str, reps: usize) -> String {
    let mut out = Vec::new();
    readtrace::ingest::write_log_csv(&mut out, &planted_events(prefix, reps)).unwrap();
    String::from_utf8(out).unwrap()
}

// ---------------------------------------------------------------------------
// Revision catalog transcription.

/// Related factors of each problem type, transcribed from the source text in
/// its order.
pub const FACTOR_LISTS: [(&str, &[&str]); 15] = [
    ("Low Interest", &["LL2", "ML7", "ML1", "ML9"]),
    ("Fast Reading Speed", &["LL1", "ML3", "ML9", "ML7"]),
    ("Slow Reading Speed", &["LL3", "WL2", "WL3", "WL4", "ML10", "ML8"]),
    ("Frequent Proofreading", &["PL5", "WL4", "WL5", "ML8"]),
    ("Frequent Intra-session Proofreading", &["WL1", "WL2", "WL3", "WL4", "ML4", "ML8"]),
    ("Frequent Proofreading Across Sessions", &["LL5", "PL5", "WL5", "ML2", "ML4", "ML10"]),
    ("Excessive Non-linear Navigation", &["LL5", "PL5", "WL5", "ML3", "ML4", "ML5"]),
    ("Excessive Arrival of Future Elements", &["LL5", "LL7", "PL5", "WL5"]),
    ("Excessive Arrival of Past Elements", &["LL5", "LL6", "PL5"]),
    ("Excessive Departure to Future Elements", &["LL1", "LL2", "LL5", "LL7", "ML9"]),
    ("Excessive Departure to Past Elements", &["LL5", "LL6", "WL5", "ML3", "ML4", "ML5"]),
    ("Multiple Pauses", &["WL1", "WL2", "WL3", "WL4", "ML1", "ML2", "ML3", "ML4", "ML10"]),
    ("Non-linear Resumption", &["LL5", "PL5", "WL5", "ML3", "ML4", "ML5"]),
    ("Resumption on Future Elements", &["LL1", "LL2", "LL5", "LL7", "ML5", "ML9"]),
    ("Resumption on Past Elements", &["LL5", "LL6", "WL5", "ML3", "ML4", "ML5"]),
];
