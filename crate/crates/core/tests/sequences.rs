mod common;

use proptest::prelude::*;
use roleseer_core::events::{compress, period_distributions, player_sequence};
use roleseer_core::ingest::{EventType, InteractionEvent, Window};
use roleseer_core::storyline::{build_rounds, layout, DEFAULT_SPACE, DEFAULT_SWEEPS};

fn types() -> impl Strategy<Value = Vec<EventType>> {
    proptest::collection::vec((0usize..8).prop_map(|i| EventType::ALL[i]), 0..200)
}

fn ego_events() -> impl Strategy<Value = Vec<InteractionEvent>> {
    proptest::collection::vec((0i64..20_000, 0usize..8, proptest::option::of(0usize..5), any::<bool>()), 1..150).prop_map(|raw| {
        let mut v: Vec<InteractionEvent> = raw
            .into_iter()
            .map(|(ts, ty, other, ego_acts)| {
                let other = other.map(|o| format!("o{o}"));
                if ego_acts || other.is_none() {
                    InteractionEvent::new(ts, "ego", other.as_deref(), EventType::ALL[ty])
                } else {
                    InteractionEvent::new(ts, other.as_deref().unwrap(), Some("ego"), EventType::ALL[ty])
                }
            })
            .collect();
        v.sort_by_key(|e| e.occurred_at);
        v
    })
}

proptest! {
    #[test]
    fn compression_is_idempotent(t in types()) {
        let once = compress(&t);
        let twice = compress(&once.tokens);
        prop_assert_eq!(&twice.tokens, &once.tokens);
        prop_assert!(once.tokens.windows(2).all(|w| w[0] != w[1]));
        prop_assert_eq!(once.raw_len(), t.len());
        // every run of the input leaves exactly one token
        let runs = t.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(!t.is_empty());
        prop_assert_eq!(once.tokens.len(), runs);
    }

    #[test]
    fn period_shares_sum_to_one(events in ego_events(), minutes in 1i64..60) {
        let periods = period_distributions("ego", &events, minutes, None).unwrap();
        let total: usize = periods.iter().map(|p| p.total).sum();
        prop_assert_eq!(total, events.len());
        for p in &periods {
            if p.empty {
                prop_assert!(p.shares.is_empty());
            } else {
                prop_assert!((p.shares.values().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        prop_assert!(periods.windows(2).all(|w| w[1].start - w[0].start == minutes * 60));
    }

    #[test]
    fn sequence_window_filters(events in ego_events(), a in 0i64..20_000, len in 1i64..20_000) {
        let w = Window { start: a, end: a + len };
        let s = player_sequence("ego", &events, w);
        prop_assert_eq!(s.raw_len(), events.iter().filter(|e| w.contains(e.occurred_at)).count());
    }

    #[test]
    fn layouts_from_events_hold_invariants(events in ego_events()) {
        let rounds = build_rounds("ego", &events, 10, &[]).unwrap();
        prop_assert!(rounds.iter().all(|r| r.participants[0] == "ego"));
        let l = layout(&rounds, DEFAULT_SPACE, DEFAULT_SWEEPS);
        prop_assert!(common::story::check(&rounds, &l).is_ok(), "{:?}", common::story::check(&rounds, &l));
    }
}

#[test]
fn random_storylines_hold_invariants() {
    for seed in 0..300 {
        let rounds = common::story::random_rounds(seed);
        let l = layout(&rounds, DEFAULT_SPACE, DEFAULT_SWEEPS);
        if let Err(e) = common::story::check(&rounds, &l) {
            panic!("instance {seed}: {e}");
        }
    }
}

#[test]
fn empty_window_has_no_periods() {
    let ev = [InteractionEvent::new(5, "ego", None, EventType::Task)];
    assert!(period_distributions("ego", &ev, 10, Some(Window { start: 10, end: 10 })).unwrap().is_empty());
    let p = period_distributions("ego", &ev, 10, Some(Window { start: 0, end: 1800 })).unwrap();
    assert_eq!(p.len(), 3);
    assert!(p[1].empty && p[2].empty && !p[0].empty);
}
