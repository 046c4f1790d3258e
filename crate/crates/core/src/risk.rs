//! Perceived collision risk of a plan under a belief, and the threshold
//! rule that decides when a driver re-plans.

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BeliefPoint};
use crate::error::{CeiError, Result};
use crate::planner::Plan;
use crate::track::{Side, Track};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub rho_l: f64,
    pub rho_u: f64,
    /// Saturation time, s.
    pub tau: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams {
            rho_l: 0.2,
            rho_u: 0.5,
            tau: 2.0,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        for (key, rho) in [("rho_l", self.rho_l), ("rho_u", self.rho_u)] {
            if !(0.0..=1.0).contains(&rho) {
                return Err(CeiError::config(key, format!("must lie in [0, 1], got {rho}")));
            }
        }
        if self.rho_l >= self.rho_u {
            return Err(CeiError::config(
                "rho_l",
                format!(
                    "thresholds ordered: rho_l ({}) must be below rho_u ({})",
                    self.rho_l, self.rho_u
                ),
            ));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(CeiError::config("tau", format!("must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    /// Risk level a re-planned trajectory must stay under.
    pub fn constraint_level(&self) -> f64 {
        0.5 * (self.rho_l + self.rho_u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsMode {
    Exact,
    Linearized,
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Probability mass of `N(mu, sigma²)` inside `[lower, upper]`.
pub fn interval_probability(lower: f64, upper: f64, mu: f64, sigma: f64) -> f64 {
    if upper <= lower {
        return 0.0;
    }
    (normal_cdf((upper - mu) / sigma) - normal_cdf((lower - mu) / sigma)).clamp(0.0, 1.0)
}

pub fn point_collision_probability(
    track: &Track,
    own_planned_s: f64,
    own_side: Side,
    point: &BeliefPoint,
    mode: BoundsMode,
) -> f64 {
    let bounds = match mode {
        BoundsMode::Exact => track.collision_bounds(own_planned_s, own_side),
        BoundsMode::Linearized => track.collision_bounds_linearized(own_planned_s, own_side),
    };
    match bounds.as_pair() {
        None => 0.0,
        Some((l, u)) => interval_probability(l, u, point.mu, point.sigma),
    }
}

/// Linearized-bounds probability and its derivative w.r.t. own position.
pub(crate) fn linearized_probability_with_slope(
    track: &Track,
    own_s: f64,
    own_side: Side,
    point: &BeliefPoint,
) -> (f64, f64) {
    let Some(b) = track.linear_bounds(own_s, own_side) else {
        return (0.0, 0.0);
    };
    if b.upper <= b.lower {
        return (0.0, 0.0);
    }
    let zu = (b.upper - point.mu) / point.sigma;
    let zl = (b.lower - point.mu) / point.sigma;
    let p = normal_cdf(zu) - normal_cdf(zl);
    let dp = (normal_pdf(zu) * b.d_upper - normal_pdf(zl) * b.d_lower) / point.sigma;
    (p.max(0.0), dp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEvaluation {
    pub per_point: Vec<f64>,
    pub max_risk: f64,
    /// Lead time of the riskiest point, s.
    pub argmax_time: f64,
}

/// Where on the plan grid a lead time falls: `(lower index, fraction)`,
/// with index 0 standing for the plan's start state.
pub(crate) fn plan_slot(lead: f64, dt: f64, plan_len: usize) -> Result<(usize, f64)> {
    let k = lead / dt;
    let needed = k.ceil() as usize;
    let rounded = k.round();
    if (k - rounded).abs() < 1e-6 {
        let r = rounded as usize;
        if r > plan_len {
            return Err(CeiError::PlanTooShort { plan_len, needed: r });
        }
        return Ok((r, 0.0));
    }
    if needed > plan_len {
        return Err(CeiError::PlanTooShort { plan_len, needed });
    }
    Ok((k.floor() as usize, k - k.floor()))
}

/// Planned own position at `lead` seconds after the plan's start.
pub fn plan_position_at(plan: &Plan, lead: f64, dt: f64) -> Result<f64> {
    let (i, frac) = plan_slot(lead, dt, plan.len())?;
    let pos = |j: usize| if j == 0 { plan.start.s } else { plan.states[j - 1].s };
    Ok(if frac == 0.0 {
        pos(i)
    } else {
        pos(i) + frac * (pos(i + 1) - pos(i))
    })
}

/// Risk of a plan against every belief point; the plan must start at the
/// belief clock.
pub fn evaluate(
    plan: &Plan,
    belief: &Belief,
    track: &Track,
    own_side: Side,
    dt: f64,
    mode: BoundsMode,
) -> Result<RiskEvaluation> {
    let mut per_point = Vec::with_capacity(belief.len());
    let mut max_risk = 0.0;
    let mut argmax_time = 0.0;
    for point in belief.points() {
        let s = plan_position_at(plan, point.t, dt)?;
        let p = point_collision_probability(track, s, own_side, &point, mode);
        if p > max_risk {
            max_risk = p;
            argmax_time = point.t;
        }
        per_point.push(p);
    }
    Ok(RiskEvaluation {
        per_point,
        max_risk,
        argmax_time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerDecision {
    Continue,
    ReplanUpper,
    ReplanLower,
}

/// Upper threshold is checked first; equality at either threshold continues.
pub fn trigger(current_risk: f64, time_since_replan: f64, params: &RiskParams) -> TriggerDecision {
    if current_risk > params.rho_u {
        TriggerDecision::ReplanUpper
    } else if current_risk < params.rho_l && time_since_replan > params.tau {
        TriggerDecision::ReplanLower
    } else {
        TriggerDecision::Continue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{TrackGeometry, VehicleBody};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn cdf_table_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.0) - normal_cdf(0.0), 0.341_344_746_068_542_9, epsilon = 1e-12);
        assert_relative_eq!(
            interval_probability(-3.0, 3.0, 0.0, 1.0),
            0.997_300_203_936_74,
            epsilon = 1e-10
        );
    }

    #[test]
    fn empty_bounds_have_zero_risk() {
        let track = Track::merge(TrackGeometry::default()).unwrap();
        let point = BeliefPoint { t: 1.0, mu: 0.0, sigma: 1.0 };
        for mode in [BoundsMode::Exact, BoundsMode::Linearized] {
            assert_eq!(point_collision_probability(&track, 0.0, Side::Left, &point, mode), 0.0);
        }
    }

    #[test]
    fn three_sigma_mass() {
        // straight lane: bounds are own ± 4.5
        let track = Track::straight(400.0, VehicleBody::default()).unwrap();
        let point = BeliefPoint { t: 1.0, mu: 100.0, sigma: 1.5 };
        let p = point_collision_probability(&track, 100.0, Side::Left, &point, BoundsMode::Exact);
        assert_relative_eq!(p, 0.9973, epsilon = 1e-4);
        // [mu, mu + sigma]
        let point = BeliefPoint { t: 1.0, mu: 95.5, sigma: 9.0 };
        let p = point_collision_probability(&track, 100.0, Side::Left, &point, BoundsMode::Exact);
        assert_relative_eq!(p, 0.3413, epsilon = 1e-4);
    }

    #[test]
    fn trigger_examples() {
        let params = RiskParams::default();
        assert_eq!(trigger(0.6, 0.0, &params), TriggerDecision::ReplanUpper);
        assert_eq!(trigger(0.1, 3.0, &params), TriggerDecision::ReplanLower);
        assert_eq!(trigger(0.3, 3.0, &params), TriggerDecision::Continue);
        assert_eq!(trigger(0.5, 3.0, &params), TriggerDecision::Continue);
        assert_eq!(trigger(0.1, 2.0, &params), TriggerDecision::Continue);
        assert_eq!(trigger(0.2, 9.0, &params), TriggerDecision::Continue);
    }

    #[test]
    fn params_validation() {
        assert!(RiskParams { rho_l: 0.6, rho_u: 0.5, tau: 2.0 }.validate().is_err());
        assert!(RiskParams { rho_l: 0.2, rho_u: 0.5, tau: 0.0 }.validate().is_err());
        assert_relative_eq!(RiskParams::default().constraint_level(), 0.35);
    }

    #[test]
    fn plan_slot_alignment() {
        assert_eq!(plan_slot(0.25, 0.05, 80).unwrap(), (5, 0.0));
        assert_eq!(plan_slot(4.0, 0.05, 80).unwrap(), (80, 0.0));
        assert!(plan_slot(4.05, 0.05, 80).is_err());
        let (i, f) = plan_slot(0.26, 0.05, 80).unwrap();
        assert_eq!(i, 5);
        assert!((f - 0.2).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn probability_monotone_in_width(
            mu in -10.0f64..10.0, sigma in 0.01f64..10.0, w1 in 0.0f64..10.0, extra in 0.0f64..10.0,
        ) {
            let a = interval_probability(-w1, w1, mu, sigma);
            let b = interval_probability(-w1 - extra, w1 + extra, mu, sigma);
            prop_assert!(b >= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn lower_trigger_needs_saturation(risk in 0.0f64..1.0, elapsed in 0.0f64..2.0) {
            let params = RiskParams::default();
            prop_assert_ne!(trigger(risk, elapsed, &params), TriggerDecision::ReplanLower);
        }
    }
}
