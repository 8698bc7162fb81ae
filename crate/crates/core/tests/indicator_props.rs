mod common;

use proptest::prelude::*;
use readtrace::indicators::*;
use readtrace::sessionizer::{ReadAction, ReadingSession};

const ELEMENTS: usize = 6;

/// Per actor, a list of sessions; each session a list of (element, dwell,
/// estimated) steps. Repeated elements are allowed so collapsing is exercised.
fn sessions_strategy(max_sessions: usize) -> impl Strategy<Value = Vec<ReadingSession>> {
    let step = (0..ELEMENTS, 0.0f64..900.0, prop::bool::weighted(0.2));
    let session = prop::collection::vec(step, 1..8);
    prop::collection::vec((0usize..4, session), 1..=max_sessions).prop_map(|raw| {
        let mut ordinals = [0usize; 4];
        let mut clock = [0i64; 4];
        raw.into_iter()
            .map(|(actor, steps)| {
                let ordinal = ordinals[actor];
                ordinals[actor] += 1;
                let actions = steps
                    .into_iter()
                    .map(|(e, dwell, estimated)| {
                        clock[actor] += 10;
                        ReadAction {
                            actor: format!("u{actor}").as_str().into(),
                            element_id: format!("e{e}"),
                            start: clock[actor],
                            dwell_seconds: dwell,
                            dwell_is_estimated: estimated,
                        }
                    })
                    .collect();
                clock[actor] += 100_000;
                ReadingSession {
                    actor: format!("u{actor}").as_str().into(),
                    ordinal,
                    actions,
                }
            })
            .collect()
    })
}

fn sum_to_one(counts: &DirectionCounts) -> bool {
    if counts.total() == 0 {
        return [Heading::Linear, Heading::Past, Heading::Future]
            .iter()
            .all(|&h| counts.rate(h).is_none());
    }
    let s: f64 = [Heading::Linear, Heading::Past, Heading::Future]
        .iter()
        .map(|&h| counts.rate(h).unwrap())
        .sum();
    (s - 1.0).abs() <= 1e-9
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())),
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, ..ProptestConfig::default() })]

    #[test]
    fn heading_triples_sum_to_one(sessions in sessions_strategy(12)) {
        let course = common::course(ELEMENTS);
        for row in navigation(&sessions, &course) {
            prop_assert!(sum_to_one(&row.arrivals), "arrivals {:?}", row);
            prop_assert!(sum_to_one(&row.departures), "departures {:?}", row);
        }
        for row in stop_resume(&sessions, &course) {
            prop_assert!(sum_to_one(&row.resumptions), "resumptions {:?}", row);
        }
        let m = compute_matrix(&sessions, &course).unwrap();
        for row in 0..ELEMENTS {
            for triple in [
                [Indicator::ArrivalLinearity, Indicator::PastArrivals, Indicator::FutureArrivals],
                [Indicator::DepartureLinearity, Indicator::PastDepartures, Indicator::FutureDepartures],
                [Indicator::ResumeLinearity, Indicator::PastResume, Indicator::FutureResume],
            ] {
                let vals: Vec<Option<f64>> = triple.iter().map(|&i| m.get(row, i)).collect();
                if vals.iter().all(Option::is_some) {
                    let s: f64 = vals.iter().flatten().sum();
                    prop_assert!((s - 1.0).abs() <= 1e-9);
                } else {
                    prop_assert!(vals.iter().all(Option::is_none));
                }
            }
        }
    }

    #[test]
    fn shares_sum_to_one(sessions in sessions_strategy(12)) {
        let course = common::course(ELEMENTS);
        let m = compute_matrix(&sessions, &course).unwrap();
        for ind in [Indicator::Visits, Indicator::ReadingHalt, Indicator::ReadingStop] {
            let s: f64 = m.column(ind).iter().map(|v| v.unwrap()).sum();
            prop_assert!((s - 1.0).abs() <= 1e-9, "{} sums to {}", ind, s);
        }
    }

    #[test]
    fn reread_split_is_exact(sessions in sessions_strategy(12)) {
        let course = common::course(ELEMENTS);
        for row in rereading(&sessions, &course) {
            prop_assert_eq!(row.within_session_count + row.between_session_count, row.reread_count);
            prop_assert!(row.reread_count <= row.visit_count);
        }
    }

    #[test]
    fn ratios_stay_in_unit_interval(sessions in sessions_strategy(12)) {
        let course = common::course(ELEMENTS);
        let m = compute_matrix(&sessions, &course).unwrap();
        for ind in Indicator::ALL.into_iter().filter(|i| i.is_ratio()) {
            for v in m.column(ind).into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v), "{} = {}", ind, v);
            }
        }
        for v in m.column(Indicator::ReadingSpeed).into_iter().flatten() {
            prop_assert!(v > 0.0 && v.is_finite());
        }
    }

    #[test]
    fn matches_naive_recount(sessions in sessions_strategy(10)) {
        let course = common::course(ELEMENTS);
        let m = compute_matrix(&sessions, &course).unwrap();
        let want = common::naive_indicators(&sessions, &course);
        for (row, element) in m.elements.iter().enumerate() {
            for ind in Indicator::ALL {
                let got = m.get(row, ind);
                let expected = want[element][&ind];
                prop_assert!(close(got, expected), "{} {}: {:?} vs {:?}", element, ind, got, expected);
            }
        }
    }

    #[test]
    fn session_order_is_irrelevant(sessions in sessions_strategy(12), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let course = common::course(ELEMENTS);
        let mut shuffled = sessions.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = compute_matrix(&sessions, &course).unwrap();
        let b = compute_matrix(&shuffled, &course).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn cloned_learner_changes_nothing(sessions in sessions_strategy(10)) {
        let course = common::course(ELEMENTS);
        let mut doubled = sessions.clone();
        for s in &sessions {
            let twin = format!("twin-{}", s.actor.as_str());
            let mut copy = s.clone();
            copy.actor = twin.as_str().into();
            for a in &mut copy.actions {
                a.actor = twin.as_str().into();
            }
            doubled.push(copy);
        }
        let a = compute_matrix(&sessions, &course).unwrap();
        let b = compute_matrix(&doubled, &course).unwrap();
        for row in 0..ELEMENTS {
            for ind in Indicator::ALL {
                prop_assert!(close(a.get(row, ind), b.get(row, ind)), "{}", ind);
            }
        }
    }
}

#[test]
fn no_sessions_is_an_error() {
    assert!(compute_matrix(&[], &common::course(3)).is_err());
}

#[test]
fn headings_follow_the_outline() {
    assert_eq!(classify_arrival(2, 3), Heading::Linear);
    assert_eq!(classify_arrival(4, 3), Heading::Future);
    assert_eq!(classify_arrival(0, 3), Heading::Past);
    assert_eq!(classify_departure(3, 4), Heading::Linear);
    assert_eq!(classify_departure(3, 5), Heading::Future);
    assert_eq!(classify_departure(3, 1), Heading::Past);
    assert_eq!(classify_resume(3, 3), Heading::Linear);
    assert_eq!(classify_resume(3, 4), Heading::Linear);
    assert_eq!(classify_resume(3, 1), Heading::Past);
    assert_eq!(classify_resume(3, 6), Heading::Future);
}
