mod common;

use cei_core::belief::{self, Belief, BeliefParams, BeliefPoint};
use cei_core::dynamics::{DynamicsParams, VehicleState};
use cei_core::risk;
use cei_core::track::{Side, Track, TrackGeometry};
use proptest::prelude::*;

fn merge() -> Track {
    Track::merge(TrackGeometry::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn belief_update_commutes_with_translation(
        t in 0.25f64..4.0, sigma in 0.05f64..6.0, d in -10.0f64..60.0,
        v in 0.0f64..20.0, s0 in -100.0f64..100.0, shift in -500.0f64..500.0,
    ) {
        let params = BeliefParams::default();
        let a = belief::update_point(&params, &BeliefPoint { t, mu: s0 + d, sigma }, v, s0).unwrap();
        let b = belief::update_point(&params, &BeliefPoint { t, mu: s0 + shift + d, sigma }, v, s0 + shift).unwrap();
        prop_assert!(((a.mu - s0) - (b.mu - s0 - shift)).abs() < 1e-9);
        prop_assert!((a.sigma - b.sigma).abs() < 1e-12);
        prop_assert!(a.sigma < sigma);
    }

    #[test]
    fn posterior_agrees_with_quadrature(
        t in 0.5f64..4.0, frac in 0.1f64..1.0, z in -2.0f64..2.0, v in 2.0f64..14.0,
    ) {
        let params = BeliefParams::default();
        let sigma = frac * params.a_max * t * t / 6.0;
        let mu = v * t + z * sigma;
        let p = belief::update_point(&params, &BeliefPoint { t, mu, sigma }, v, 0.0).unwrap();
        let (gm, gs) = common::grid_posterior(mu, sigma, v, t, params.a_c, 20_000);
        prop_assert!((p.mu - gm).abs() < 1e-4);
        prop_assert!((p.sigma - gs).abs() < 1e-4);
    }

    #[test]
    fn belief_width_shrinks_on_repeated_observation(s in 0.0f64..80.0, v in 0.0f64..15.0) {
        let mut b = Belief::new(BeliefParams::default(), 0.0, s, v).unwrap();
        let before: Vec<f64> = b.points().map(|p| p.sigma).collect();
        b.update(s, v).unwrap();
        for (p, s0) in b.points().zip(before) {
            prop_assert!(p.sigma < s0);
        }
    }

    #[test]
    fn exact_bounds_contain_own_position_past_merge(s in 54.5f64..95.0, left in any::<bool>()) {
        let side = if left { Side::Left } else { Side::Right };
        let (l, u) = merge().collision_bounds(s, side).as_pair().unwrap();
        prop_assert!(l < s && s < u);
    }

    #[test]
    fn exact_bounds_agree_with_the_swept_oracle(s in 0.0f64..100.0, left in any::<bool>()) {
        let side = if left { Side::Left } else { Side::Right };
        let track = merge();
        let exact = track.collision_bounds(s, side).as_pair();
        let oracle = common::swept_interval(&track, s, side, 0.01);
        match (exact, oracle) {
            (Some(a), Some(b)) => {
                prop_assert!((a.0 - b.0).abs() <= 0.011, "{a:?} {b:?}");
                prop_assert!((a.1 - b.1).abs() <= 0.011, "{a:?} {b:?}");
            }
            (None, None) => {}
            // a sliver thinner than the oracle's sampling
            (Some((l, u)), None) => prop_assert!(u - l < 0.02),
            (None, Some(b)) => prop_assert!(false, "oracle found {b:?}"),
        }
    }

    #[test]
    fn interval_probability_is_a_probability(l in -50.0f64..50.0, w in 0.0f64..20.0, mu in -60.0f64..60.0, sd in 0.01f64..10.0) {
        let p = risk::interval_probability(l, l + w, mu, sd);
        prop_assert!((0.0..=1.0).contains(&p));
        let wider = risk::interval_probability(l - 1.0, l + w + 1.0, mu, sd);
        prop_assert!(wider >= p);
    }

    #[test]
    fn rollout_keeps_speed_non_negative_and_position_monotone(
        v0 in 0.0f64..20.0, inputs in proptest::collection::vec(-2.5f64..2.5, 1..100),
    ) {
        let d = DynamicsParams::default();
        let states = d.rollout(&VehicleState::new(0.0, v0), &inputs);
        let mut prev = 0.0;
        for st in states {
            prop_assert!(st.v >= 0.0);
            prop_assert!(st.s >= prev);
            prev = st.s;
        }
    }
}
