//! Longitudinal vehicle dynamics with quadratic drag and constant rolling
//! resistance, integrated with explicit Euler.

use serde::{Deserialize, Serialize};

use crate::error::{CeiError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Quadratic drag coefficient.
    pub alpha: f64,
    /// Constant resistance, m/s².
    pub beta: f64,
    /// Symmetric input bound, m/s².
    pub a_max: f64,
    /// Integration step, s.
    pub dt: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            alpha: 0.0005,
            beta: 0.1,
            a_max: 2.5,
            dt: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    /// Arc position, m.
    pub s: f64,
    /// Velocity, m/s. Never negative.
    pub v: f64,
    /// Last applied input, m/s².
    pub a_in: f64,
}

impl VehicleState {
    pub fn new(s: f64, v: f64) -> Self {
        VehicleState { s, v, a_in: 0.0 }
    }
}

/// Result of one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: VehicleState,
    /// Net acceleration actually realised over the step.
    pub a_net: f64,
    /// True when the non-negativity clamp engaged.
    pub clamped: bool,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |key: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(CeiError::config(key, format!("must be >= 0, got {v}")))
            }
        };
        let pos = |key: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CeiError::config(key, format!("must be > 0, got {v}")))
            }
        };
        nonneg("dynamics.alpha", self.alpha)?;
        nonneg("dynamics.beta", self.beta)?;
        pos("dynamics.a_max", self.a_max)?;
        pos("dynamics.dt", self.dt)
    }

    pub fn resistance(&self, v: f64) -> Result<f64> {
        if v < 0.0 || v.is_nan() {
            return Err(CeiError::domain("v", v, "v >= 0"));
        }
        Ok(self.resistance_unchecked(v))
    }

    #[inline]
    pub(crate) fn resistance_unchecked(&self, v: f64) -> f64 {
        self.alpha * v * v + self.beta
    }

    #[inline]
    pub fn clip(&self, a_in: f64) -> f64 {
        a_in.clamp(-self.a_max, self.a_max)
    }

    /// Input that holds velocity `v` constant; zero for a stopped vehicle.
    pub fn hold_input(&self, v: f64) -> f64 {
        if v <= 0.0 {
            0.0
        } else {
            self.clip(self.resistance_unchecked(v))
        }
    }

    /// One explicit Euler step. Position advances with the pre-step velocity.
    pub fn step(&self, state: &VehicleState, a_in: f64) -> StepOutcome {
        let a_in = self.clip(a_in);
        let a_net = a_in - self.resistance_unchecked(state.v);
        let v_next = state.v + a_net * self.dt;
        let (v_next, a_net, clamped) = if v_next < 0.0 {
            (0.0, -state.v / self.dt, true)
        } else {
            (v_next, a_net, false)
        };
        StepOutcome {
            state: VehicleState {
                s: state.s + state.v * self.dt,
                v: v_next,
                a_in,
            },
            a_net,
            clamped,
        }
    }

    pub fn rollout(&self, state: &VehicleState, inputs: &[f64]) -> Vec<VehicleState> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut cur = *state;
        for &a in inputs {
            cur = self.step(&cur, a).state;
            out.push(cur);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn resistance_values() {
        let d = DynamicsParams::default();
        assert_relative_eq!(d.resistance(0.0).unwrap(), 0.1);
        assert_relative_eq!(d.resistance(10.0).unwrap(), 0.15, epsilon = 1e-15);
        assert_relative_eq!(d.resistance(20.0).unwrap(), 0.30, epsilon = 1e-15);
        assert!(d.resistance(-1.0).is_err());
    }

    #[test]
    fn stopped_vehicle_stays_stopped() {
        let d = DynamicsParams::default();
        let out = d.step(&VehicleState::new(0.0, 0.0), 0.0);
        assert_eq!(out.state.v, 0.0);
        assert_eq!(out.state.s, 0.0);
        assert_eq!(out.a_net, 0.0);
        assert!(out.clamped);
    }

    #[test]
    fn coasting_step() {
        let d = DynamicsParams::default();
        let out = d.step(&VehicleState::new(0.0, 10.0), 0.0);
        assert_relative_eq!(out.state.v, 9.9925, epsilon = 1e-12);
        assert_relative_eq!(out.state.s, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn input_is_clipped() {
        let d = DynamicsParams::default();
        let out = d.step(&VehicleState::new(0.0, 10.0), 3.0);
        assert_eq!(out.state.a_in, 2.5);
        assert_relative_eq!(out.state.v, 10.1175, epsilon = 1e-12);
    }

    #[test]
    fn rollout_of_zero_inputs_from_rest() {
        let d = DynamicsParams::default();
        let states = d.rollout(&VehicleState::default(), &[0.0; 80]);
        assert!(states.iter().all(|s| s.s == 0.0 && s.v == 0.0));
    }

    #[test]
    fn hold_input_keeps_velocity() {
        let d = DynamicsParams::default();
        let v0 = 12.0;
        let inputs = vec![d.resistance(v0).unwrap(); 80];
        let states = d.rollout(&VehicleState::new(0.0, v0), &inputs);
        let mut prev = v0;
        for st in &states {
            assert!((st.v - prev).abs() < 1e-6);
            prev = st.v;
        }
    }

    proptest! {
        #[test]
        fn velocity_nonnegative_and_input_bounded(
            v0 in 0.0f64..30.0,
            inputs in proptest::collection::vec(-10.0f64..10.0, 1..120),
        ) {
            let d = DynamicsParams::default();
            let states = d.rollout(&VehicleState::new(0.0, v0), &inputs);
            for st in &states {
                prop_assert!(st.v >= 0.0);
                prop_assert!(st.a_in.abs() <= d.a_max);
            }
            // position telescopes as the sum of pre-step velocity * dt
            let mut expected = 0.0;
            let mut v = v0;
            for st in &states {
                expected += v * d.dt;
                v = st.v;
            }
            prop_assert!((states.last().unwrap().s - expected).abs() < 1e-9);
            prop_assert_eq!(&states, &d.rollout(&VehicleState::new(0.0, v0), &inputs));
        }

        #[test]
        fn coasting_strictly_decelerates(v0 in 0.01f64..40.0) {
            let d = DynamicsParams::default();
            let mut st = VehicleState::new(0.0, v0);
            for _ in 0..2000 {
                let next = d.step(&st, 0.0).state;
                if st.v > 0.0 {
                    prop_assert!(next.v < st.v);
                } else {
                    prop_assert_eq!(next.v, 0.0);
                }
                st = next;
            }
        }
    }
}
