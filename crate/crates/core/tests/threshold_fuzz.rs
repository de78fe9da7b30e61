use flashgan_core::threshold::{ThresholdConfig, ThresholdState};
use proptest::prelude::*;

#[derive(Clone, Copy, Debug)]
enum Event {
    Round,
    Failure,
    Success,
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![1 => Just(Event::Round), 3 => Just(Event::Failure), 1 => Just(Event::Success)]
}

/// Reference model in integer micro-units.
struct Model {
    eta: i64,
    f: u32,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn controller_matches_reference(events in prop::collection::vec(event(), 0..200)) {
        let cfg = ThresholdConfig::default();
        let mut s = ThresholdState::new(vec!["uu".into(), "up".into()], &cfg).unwrap();
        let mut m = Model { eta: 490_000, f: 0 };
        for e in events {
            let before = s.etas();
            match e {
                Event::Round => {
                    s.round_begin();
                    m.eta = (m.eta + 40_000).min(950_000);
                    m.f = 0;
                }
                Event::Failure => {
                    let fired = s.record_failure();
                    m.f += 1;
                    let expect_fire = m.f == cfg.failure_limit;
                    if expect_fire {
                        m.eta = (m.eta - 5_000).max(490_000);
                        m.f = 0;
                    }
                    prop_assert_eq!(fired, expect_fire);
                    if !expect_fire {
                        prop_assert_eq!(s.etas(), before);
                    }
                }
                Event::Success => {
                    s.record_success();
                    prop_assert_eq!(s.etas(), before);
                }
            }
            let want = m.eta as f64 / 1e6;
            for r in 0..2 {
                prop_assert_eq!(s.eta(r), want);
                prop_assert!((0.49..=0.95).contains(&s.eta(r)));
            }
            prop_assert_eq!(s.failures(), m.f);
            prop_assert!(s.failures() < s.failure_limit());
        }
    }
}

#[test]
fn increments_and_decrements_are_exact() {
    let cfg = ThresholdConfig::default();
    let mut s = ThresholdState::new(vec!["uu".into(), "up".into()], &cfg).unwrap();
    s.round_begin();
    assert_eq!(s.etas(), vec![0.53, 0.53]);
    s.round_begin();
    assert_eq!(s.etas(), vec![0.57, 0.57]);
    for _ in 0..9 {
        assert!(!s.record_failure());
    }
    assert!(s.record_failure());
    assert_eq!(s.etas(), vec![0.565, 0.565]);
    for _ in 0..20 {
        s.round_begin();
    }
    assert_eq!(s.etas(), vec![0.95, 0.95]);
}
