mod common;

use proptest::prelude::*;
use readtrace::ingest::LogEvent;
use readtrace::sessionizer::*;

/// (actor, element, gap) triples turned into a canonical event log. Gaps are
/// mostly in-reading pauses with occasional long breaks.
fn log_strategy(max_events: usize) -> impl Strategy<Value = Vec<LogEvent>> {
    let gap = prop_oneof![8 => 1i64..400, 2 => 1_000i64..200_000];
    prop::collection::vec((0usize..4, 0usize..5, gap), 0..=max_events).prop_map(|rows| {
        let mut clock = [1_000_000i64; 4];
        let mut events: Vec<LogEvent> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (actor, element, gap))| {
                clock[actor] += gap;
                LogEvent {
                    request_id: format!("r{i:03}"),
                    user_id: Some(format!("u{actor}")),
                    course_id: "course".into(),
                    element_id: format!("e{element}"),
                    server_session_id: None,
                    timestamp: clock[actor],
                }
            })
            .collect();
        readtrace::ingest::sort_events(&mut events);
        events
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn dynamic_split_matches_oracle(events in log_strategy(50)) {
        let course = common::course(5);
        let actions = actions_from_events(&events);
        prop_assume!(actions.iter().any(|a| !a.dwell_is_estimated));
        let thresholds = compute_thresholds(&actions, &course).unwrap();
        let got = split_sessions(&actions, &thresholds).unwrap();
        let want = common::split_oracle(&actions, &|e| thresholds[e].threshold_seconds);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn fixed_page_split_matches_oracle(events in log_strategy(50)) {
        let actions = actions_from_events(&events);
        let got = split_sessions_fixed_page(&actions, 600.0);
        let want = common::split_oracle(&actions, &|_| 600.0);
        prop_assert_eq!(got, want);
    }

    #[test]
    fn sessions_partition_the_actions(events in log_strategy(50)) {
        let actions = actions_from_events(&events);
        for sessions in [
            split_sessions_fixed_page(&actions, 600.0),
            split_sessions_fixed_total(&actions, 1800.0),
        ] {
            let flat: Vec<(String, i64)> = sessions
                .iter()
                .flat_map(|s| s.actions.iter().map(|a| (a.actor.to_string(), a.start)))
                .collect();
            let orig: Vec<(String, i64)> =
                actions.iter().map(|a| (a.actor.to_string(), a.start)).collect();
            prop_assert_eq!(flat, orig);
            prop_assert!(sessions.iter().all(|s| !s.actions.is_empty()));
        }
    }

    #[test]
    fn fixed_total_sessions_respect_limit(events in log_strategy(50)) {
        let actions = actions_from_events(&events);
        for s in split_sessions_fixed_total(&actions, 1800.0) {
            let total: f64 = s.actions.iter().map(|a| a.dwell_seconds).sum();
            prop_assert!(total <= 1800.0);
        }
    }

    #[test]
    fn thresholds_follow_oracle_rejection(events in log_strategy(50)) {
        let course = common::course(5);
        let actions = actions_from_events(&events);
        prop_assume!(actions.iter().any(|a| !a.dwell_is_estimated));
        let thresholds = compute_thresholds(&actions, &course).unwrap();
        for el in course.elements() {
            let samples: Vec<f64> = actions
                .iter()
                .filter(|a| !a.dwell_is_estimated && a.element_id == el.element_id)
                .map(|a| a.dwell_seconds)
                .collect();
            let removed = common::peirce_oracle(&samples);
            let mut kept = samples.clone();
            for r in &removed {
                let i = kept.iter().position(|x| x == r).unwrap();
                kept.remove(i);
            }
            let t = &thresholds[&el.element_id];
            prop_assert_eq!(t.sample_count, samples.len());
            match kept.iter().copied().fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x)))) {
                Some(max) if max > 0.0 => {
                    prop_assert!(!t.inherited);
                    prop_assert_eq!(t.threshold_seconds, max);
                }
                _ => prop_assert!(t.inherited),
            }
        }
    }
}

#[test]
fn thousand_logs_under_ten_seconds() {
    use proptest::strategy::ValueTree;
    use proptest::test_runner::{Config, TestRunner};

    let course = common::course(5);
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha),
    );
    let strategy = log_strategy(50);
    let start = std::time::Instant::now();
    let mut checked = 0;
    for _ in 0..1000 {
        let events = strategy.new_tree(&mut runner).unwrap().current();
        let actions = actions_from_events(&events);
        if !actions.iter().any(|a| !a.dwell_is_estimated) {
            continue;
        }
        let thresholds = compute_thresholds(&actions, &course).unwrap();
        let got = split_sessions(&actions, &thresholds).unwrap();
        let want = common::split_oracle(&actions, &|e| thresholds[e].threshold_seconds);
        assert_eq!(got, want);
        checked += 1;
    }
    assert!(checked > 900);
    assert!(start.elapsed().as_secs_f64() < 10.0);
}
