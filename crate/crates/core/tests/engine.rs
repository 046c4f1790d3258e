use cei_core::engine::{self, TraceEvent, World};
use cei_core::exec::Execution;
use cei_core::scenario::{self, PRESET_NAMES};
use cei_core::track::Side;

#[test]
fn sequential_and_parallel_runs_agree_exactly() {
    for name in PRESET_NAMES {
        let cfg = scenario::preset(name).unwrap();
        let seq = engine::run_with(&cfg, Execution::Sequential).unwrap();
        let par = engine::run_with(&cfg, Execution::default()).unwrap();
        assert_eq!(seq.trace, par.trace, "{name}");
        assert_eq!(seq.replans, par.replans, "{name}");
        assert_eq!(seq.outcome, par.outcome, "{name}");
    }
}

#[test]
fn trace_alternates_sides_on_a_common_clock() {
    let cfg = scenario::preset("B").unwrap();
    let run = engine::run(&cfg).unwrap();
    assert_eq!(run.trace.len() % 2, 0);
    for (k, pair) in run.trace.chunks(2).enumerate() {
        assert_eq!(pair[0].side, Side::Left);
        assert_eq!(pair[1].side, Side::Right);
        assert_eq!(pair[0].time, pair[1].time);
        assert!((pair[0].time - k as f64 * cfg.dynamics.dt).abs() < 1e-9);
    }
}

#[test]
fn replan_records_match_trace_events() {
    let run = engine::run(&scenario::preset("C").unwrap()).unwrap();
    let marked = run.trace.iter().filter(|t| t.event != TraceEvent::None).count();
    assert_eq!(marked, run.replans.len());
    let upper = run.trace.iter().filter(|t| t.event == TraceEvent::ReplanUpper).count();
    assert_eq!(upper, run.outcome.replans_upper_left + run.outcome.replans_upper_right);
}

#[test]
fn stepping_by_hand_matches_run() {
    let cfg = scenario::preset("A").unwrap();
    let mut world = World::new(&cfg).unwrap();
    while !world.finished() {
        world.tick().unwrap();
    }
    let run = engine::run(&cfg).unwrap();
    assert_eq!(world.outcome(), run.outcome);
}

#[test]
fn traces_respect_physical_limits() {
    for name in PRESET_NAMES {
        let cfg = scenario::preset(name).unwrap();
        let run = engine::run(&cfg).unwrap();
        for side in Side::BOTH {
            let mut prev = f64::NEG_INFINITY;
            for r in run.side_trace(side) {
                assert!(r.v >= 0.0);
                assert!(r.a_in.abs() <= cfg.dynamics.a_max);
                assert!((0.0..=1.0).contains(&r.max_risk));
                assert!(r.s >= prev, "{name} {side:?} went backwards");
                prev = r.s;
            }
        }
    }
}
