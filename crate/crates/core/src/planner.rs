//! Deterministic acceleration plans over the planning horizon.
//!
//! Plans minimise a comfort-and-speed cost: squared deviation from the
//! desired velocity plus squared input, summed over every step. Re-plans add
//! a risk constraint that is enforced with a sequence of increasing
//! quadratic penalties, warm-started from the previous plan. When that fails
//! a cascade of three constant-input candidates provides a new start.

use serde::{Deserialize, Serialize};

use crate::belief::{Belief, BeliefPoint};
use crate::dynamics::{DynamicsParams, VehicleState};
use crate::error::{CeiError, Result};
use crate::optimize::{minimize_box, SpgOptions};
use crate::risk::{self, linearized_probability_with_slope, plan_slot};
use crate::track::{Side, Track};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    /// State the plan was computed from.
    pub start: VehicleState,
    pub inputs: Vec<f64>,
    /// `states[k]` is the predicted state after applying `inputs[..=k]`.
    pub states: Vec<VehicleState>,
    pub created_at: f64,
}

impl Plan {
    pub fn from_inputs(
        dynamics: &DynamicsParams,
        start: VehicleState,
        inputs: Vec<f64>,
        created_at: f64,
    ) -> Plan {
        let inputs: Vec<f64> = inputs.into_iter().map(|a| dynamics.clip(a)).collect();
        let states = dynamics.rollout(&start, &inputs);
        Plan {
            start,
            inputs,
            states,
            created_at,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn final_velocity(&self) -> f64 {
        self.states.last().map_or(self.start.v, |s| s.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub v_d: f64,
    pub risk_constraint: f64,
    /// Iteration cap per penalty stage.
    pub max_iterations: usize,
    pub penalty_stages: usize,
    /// Allowed constraint violation for a plan to count as satisfying.
    pub tolerance: f64,
}

impl PlannerParams {
    pub fn new(v_d: f64, risk_constraint: f64) -> PlannerParams {
        PlannerParams {
            v_d,
            risk_constraint,
            max_iterations: 200,
            penalty_stages: 5,
            tolerance: 1e-3,
        }
    }
}

const INITIAL_PENALTY: f64 = 1e3;
const PENALTY_GROWTH: f64 = 10.0;
const INITIAL_PLAN_ITERATIONS: usize = 2000;

pub fn cost(plan: &Plan, v_d: f64) -> f64 {
    plan.states
        .iter()
        .zip(&plan.inputs)
        .map(|(s, a)| (s.v - v_d).powi(2) + a * a)
        .sum()
}

/// Constant-input candidates tried when the warm-started re-plan fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Candidate {
    Braking,
    Zero,
    Acceleration,
}

impl Candidate {
    pub const ALL: [Candidate; 3] = [Candidate::Braking, Candidate::Zero, Candidate::Acceleration];

    fn input(self, a_max: f64) -> f64 {
        match self {
            Candidate::Braking => -a_max,
            Candidate::Zero => 0.0,
            Candidate::Acceleration => a_max,
        }
    }
}

/// Risk constraint data for one optimisation: the belief points with the
/// plan slots they fall on.
struct RiskTerm<'a> {
    track: &'a Track,
    side: Side,
    points: Vec<(BeliefPoint, usize, f64)>,
    level: f64,
}

impl<'a> RiskTerm<'a> {
    fn new(track: &'a Track, side: Side, belief: &Belief, dt: f64, n: usize, level: f64) -> Result<Self> {
        let points = belief
            .points()
            .map(|p| plan_slot(p.t, dt, n).map(|(i, f)| (p, i, f)))
            .collect::<Result<Vec<_>>>()?;
        Ok(RiskTerm {
            track,
            side,
            points,
            level,
        })
    }

    fn position(&self, positions: &[f64], i: usize, frac: f64) -> f64 {
        if frac == 0.0 {
            positions[i]
        } else {
            positions[i] + frac * (positions[i + 1] - positions[i])
        }
    }

    /// Max linearized risk for a rollout; `positions[0]` is the start.
    fn max_risk(&self, positions: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|(p, i, f)| {
                let s = self.position(positions, *i, *f);
                linearized_probability_with_slope(self.track, s, self.side, p).0
            })
            .fold(0.0, f64::max)
    }
}

/// Rollout plus adjoint gradient of cost and risk penalty.
struct Objective<'a> {
    dynamics: DynamicsParams,
    start: VehicleState,
    v_d: f64,
    risk: Option<&'a RiskTerm<'a>>,
    penalty: f64,
    // scratch
    s: Vec<f64>,
    v: Vec<f64>,
    clamped: Vec<bool>,
    gs: Vec<f64>,
    gv: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(dynamics: DynamicsParams, start: VehicleState, n: usize, v_d: f64) -> Self {
        Objective {
            dynamics,
            start,
            v_d,
            risk: None,
            penalty: 0.0,
            s: vec![0.0; n + 1],
            v: vec![0.0; n + 1],
            clamped: vec![false; n],
            gs: vec![0.0; n + 1],
            gv: vec![0.0; n + 1],
        }
    }

    fn rollout(&mut self, u: &[f64]) {
        let d = &self.dynamics;
        self.s[0] = self.start.s;
        self.v[0] = self.start.v;
        for (k, &uk) in u.iter().enumerate() {
            let v = self.v[k];
            let next = v + (uk - d.resistance_unchecked(v)) * d.dt;
            self.s[k + 1] = self.s[k] + v * d.dt;
            if next < 0.0 {
                self.v[k + 1] = 0.0;
                self.clamped[k] = true;
            } else {
                self.v[k + 1] = next;
                self.clamped[k] = false;
            }
        }
    }

    fn cost_only(&mut self, u: &[f64]) -> f64 {
        self.rollout(u);
        (0..u.len())
            .map(|k| (self.v[k + 1] - self.v_d).powi(2) + u[k] * u[k])
            .sum()
    }

    fn value_and_gradient(&mut self, u: &[f64], grad: &mut [f64]) -> f64 {
        self.rollout(u);
        let n = u.len();
        let dt = self.dynamics.dt;
        let alpha = self.dynamics.alpha;
        self.gs.iter_mut().for_each(|g| *g = 0.0);
        self.gv.iter_mut().for_each(|g| *g = 0.0);

        let mut value = 0.0;
        for (k, &uk) in u.iter().enumerate() {
            let e = self.v[k + 1] - self.v_d;
            value += e * e + uk * uk;
            self.gv[k + 1] += 2.0 * e;
        }

        if let Some(risk) = self.risk {
            for (p, i, f) in &risk.points {
                let pos = risk.position(&self.s, *i, *f);
                let (prob, dprob) = linearized_probability_with_slope(risk.track, pos, risk.side, p);
                let excess = prob - risk.level;
                if excess > 0.0 {
                    value += self.penalty * excess * excess;
                    let g = 2.0 * self.penalty * excess * dprob;
                    if *f == 0.0 {
                        self.gs[*i] += g;
                    } else {
                        self.gs[*i] += (1.0 - f) * g;
                        self.gs[*i + 1] += f * g;
                    }
                }
            }
        }

        // reverse sweep; index 0 is the fixed start state
        for k in (0..n).rev() {
            let (dv_dv, dv_du) = if self.clamped[k] {
                (0.0, 0.0)
            } else {
                (1.0 - 2.0 * alpha * self.v[k] * dt, dt)
            };
            grad[k] = self.gv[k + 1] * dv_du + 2.0 * u[k];
            self.gs[k] += self.gs[k + 1];
            self.gv[k] += self.gs[k + 1] * dt + self.gv[k + 1] * dv_dv;
        }
        value
    }
}

/// Analytic gradient of the plan cost w.r.t. the inputs.
pub fn cost_gradient(dynamics: &DynamicsParams, start: &VehicleState, inputs: &[f64], v_d: f64) -> Vec<f64> {
    let mut obj = Objective::new(*dynamics, *start, inputs.len(), v_d);
    let mut grad = vec![0.0; inputs.len()];
    obj.value_and_gradient(inputs, &mut grad);
    grad
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub converged: bool,
    pub iterations: usize,
}

/// Unconstrained minimisation of the plan cost from a zero-input start.
pub fn initial_plan(
    dynamics: &DynamicsParams,
    state: &VehicleState,
    params: &PlannerParams,
    steps: usize,
    now: f64,
) -> PlanOutcome {
    let mut obj = Objective::new(*dynamics, *state, steps, params.v_d);
    let opts = SpgOptions {
        max_iterations: INITIAL_PLAN_ITERATIONS,
        ..Default::default()
    };
    let r = minimize_box(
        |u, g| obj.value_and_gradient(u, g),
        &vec![0.0; steps],
        -dynamics.a_max,
        dynamics.a_max,
        &opts,
    );
    PlanOutcome {
        plan: Plan::from_inputs(dynamics, *state, r.x, now),
        converged: r.converged,
        iterations: r.iterations,
    }
}

/// Shift the plan by one step and hold the final velocity.
pub fn continue_plan(dynamics: &DynamicsParams, plan: &Plan) -> Result<Plan> {
    if plan.is_empty() {
        return Err(CeiError::PlanTooShort {
            plan_len: 0,
            needed: 1,
        });
    }
    let start = plan.states[0];
    let last = *plan.states.last().expect("non-empty");
    let hold = dynamics.hold_input(last.v);
    let appended = dynamics.step(&last, hold).state;
    let mut inputs = Vec::with_capacity(plan.len());
    inputs.extend_from_slice(&plan.inputs[1..]);
    inputs.push(hold);
    let mut states = Vec::with_capacity(plan.len());
    states.extend_from_slice(&plan.states[1..]);
    states.push(appended);
    Ok(Plan {
        start,
        inputs,
        states,
        created_at: plan.created_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanDiagnostics {
    /// 1 for the warm-started optimisation, 2 after the candidate cascade.
    pub stage: u8,
    pub iterations: usize,
    /// Penalty weight of the last penalty stage run.
    pub penalty: f64,
    pub candidate: Option<Candidate>,
    /// Max linearized risk of the returned plan.
    pub risk: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplanOutcome {
    pub plan: Plan,
    pub diagnostics: ReplanDiagnostics,
}

/// Everything a re-plan needs apart from the plans themselves.
pub struct ReplanContext<'a> {
    pub dynamics: &'a DynamicsParams,
    pub track: &'a Track,
    pub side: Side,
    pub belief: &'a Belief,
    pub now: f64,
}

struct ConstrainedRun {
    inputs: Vec<f64>,
    risk: f64,
    iterations: usize,
    penalty: f64,
}

fn constrained_minimize(
    dynamics: &DynamicsParams,
    state: &VehicleState,
    params: &PlannerParams,
    risk: &RiskTerm<'_>,
    warm: &[f64],
) -> ConstrainedRun {
    let n = warm.len();
    let mut obj = Objective::new(*dynamics, *state, n, params.v_d);
    obj.risk = Some(risk);
    let opts = SpgOptions {
        max_iterations: params.max_iterations,
        ..Default::default()
    };
    let mut x = warm.to_vec();
    let mut iterations = 0;
    let mut penalty = INITIAL_PENALTY;
    let mut current_risk = f64::INFINITY;
    for stage in 0..params.penalty_stages {
        penalty = INITIAL_PENALTY * PENALTY_GROWTH.powi(stage as i32);
        obj.penalty = penalty;
        let r = minimize_box(
            |u, g| obj.value_and_gradient(u, g),
            &x,
            -dynamics.a_max,
            dynamics.a_max,
            &opts,
        );
        iterations += r.iterations;
        x = r.x;
        obj.rollout(&x);
        current_risk = risk.max_risk(&obj.s);
        if current_risk <= params.risk_constraint + params.tolerance {
            break;
        }
    }
    ConstrainedRun {
        inputs: x,
        risk: current_risk,
        iterations,
        penalty,
    }
}

fn linearized_max_risk(dynamics: &DynamicsParams, state: &VehicleState, inputs: &[f64], risk: &RiskTerm<'_>) -> f64 {
    let mut obj = Objective::new(*dynamics, *state, inputs.len(), 0.0);
    obj.rollout(inputs);
    risk.max_risk(&obj.s)
}

/// Risk-constrained re-plan from the current state. Never fails: a plan that
/// cannot meet the constraint is returned with `feasible = false`.
pub fn replan(
    ctx: &ReplanContext<'_>,
    old_plan: &Plan,
    state: &VehicleState,
    params: &PlannerParams,
) -> Result<ReplanOutcome> {
    let dynamics = ctx.dynamics;
    let n = old_plan.len();
    let risk = RiskTerm::new(ctx.track, ctx.side, ctx.belief, dynamics.dt, n, params.risk_constraint)?;
    let limit = params.risk_constraint + params.tolerance;
    let mut cost_of = Objective::new(*dynamics, *state, n, params.v_d);

    // stage 1: warm start from the current plan
    let warm = &old_plan.inputs;
    let run = constrained_minimize(dynamics, state, params, &risk, warm);
    if run.risk <= limit {
        let mut inputs = run.inputs;
        let mut final_risk = run.risk;
        // never hand back something worse than an already-feasible warm start
        let warm_risk = linearized_max_risk(dynamics, state, warm, &risk);
        if warm_risk <= limit && cost_of.cost_only(warm) < cost_of.cost_only(&inputs) {
            inputs = warm.clone();
            final_risk = warm_risk;
        }
        return Ok(ReplanOutcome {
            plan: Plan::from_inputs(dynamics, *state, inputs, ctx.now),
            diagnostics: ReplanDiagnostics {
                stage: 1,
                iterations: run.iterations,
                penalty: run.penalty,
                candidate: None,
                risk: final_risk,
                feasible: true,
            },
        });
    }

    // stage 2: pick the cheapest constant-input candidate as the new start
    let penalised = |obj: &mut Objective<'_>, u: &[f64]| {
        let c = obj.cost_only(u);
        let excess = (risk.max_risk(&obj.s) - params.risk_constraint).max(0.0);
        c + candidate_penalty(params) * excess * excess
    };
    let mut best: Option<(Candidate, f64, Vec<f64>)> = None;
    let mut fallbacks: Vec<(f64, Vec<f64>)> = vec![(run.risk, run.inputs)];
    for cand in Candidate::ALL {
        let inputs = vec![cand.input(dynamics.a_max); n];
        let score = penalised(&mut cost_of, &inputs);
        fallbacks.push((risk.max_risk(&cost_of.s), inputs.clone()));
        if best.as_ref().is_none_or(|(_, b, _)| score < *b) {
            best = Some((cand, score, inputs));
        }
    }
    let (cand, _, start_inputs) = best.expect("three candidates");
    let run2 = constrained_minimize(dynamics, state, params, &risk, &start_inputs);
    let iterations = run.iterations + run2.iterations;
    if run2.risk <= limit {
        return Ok(ReplanOutcome {
            plan: Plan::from_inputs(dynamics, *state, run2.inputs, ctx.now),
            diagnostics: ReplanDiagnostics {
                stage: 2,
                iterations,
                penalty: run2.penalty,
                candidate: Some(cand),
                risk: run2.risk,
                feasible: true,
            },
        });
    }

    fallbacks.push((run2.risk, run2.inputs));
    let (min_risk, inputs) = fallbacks
        .into_iter()
        .fold(None::<(f64, Vec<f64>)>, |acc, item| match acc {
            Some(a) if a.0 <= item.0 => Some(a),
            _ => Some(item),
        })
        .expect("non-empty");
    Ok(ReplanOutcome {
        plan: Plan::from_inputs(dynamics, *state, inputs, ctx.now),
        diagnostics: ReplanDiagnostics {
            stage: 2,
            iterations,
            penalty: run2.penalty,
            candidate: Some(cand),
            risk: min_risk,
            feasible: false,
        },
    })
}

/// Weight used to rank cascade candidates. Zero ranks by raw cost alone.
fn candidate_penalty(_params: &PlannerParams) -> f64 {
    0.0
}

/// Max linearized risk of a plan, as enforced by the re-plan constraint.
pub fn plan_linearized_risk(plan: &Plan, belief: &Belief, track: &Track, side: Side, dt: f64) -> Result<f64> {
    Ok(risk::evaluate(plan, belief, track, side, dt, risk::BoundsMode::Linearized)?.max_risk)
}
