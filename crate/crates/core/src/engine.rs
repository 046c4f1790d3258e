//! Closed-loop simulation of two interacting drivers.
//!
//! Each tick both agents read the same pre-tick snapshot of the other
//! vehicle, refine their beliefs, score their current plan, re-plan if a
//! threshold is crossed and finally execute the first input of their plan.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::dynamics::{DynamicsParams, VehicleState};
use crate::error::Result;
use crate::exec::Execution;
use crate::planner::{self, Plan, PlannerParams, ReplanContext, ReplanDiagnostics};
use crate::risk::{self, BoundsMode, RiskParams, TriggerDecision};
use crate::scenario::ScenarioConfig;
use crate::track::{Side, Track};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    None,
    ReplanUpper,
    ReplanLower,
    /// A re-plan ran but no plan satisfying the risk constraint was found.
    Infeasible,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::None => "none",
            TraceEvent::ReplanUpper => "replan_upper",
            TraceEvent::ReplanLower => "replan_lower",
            TraceEvent::Infeasible => "infeasible",
        }
    }
}

/// One row of the trace: the state at `time` and what the agent did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub side: Side,
    pub s: f64,
    pub v: f64,
    pub a_in: f64,
    pub a_net: f64,
    pub max_risk: f64,
    pub event: TraceEvent,
}

/// Diagnostics for every executed re-plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub time: f64,
    pub side: Side,
    pub trigger: TriggerDecision,
    pub risk_before: f64,
    pub risk_after: f64,
    /// Risk of the new plan against the linearized bounds the optimizer
    /// constrains.
    pub linearized_risk_after: f64,
    #[serde(flatten)]
    pub diagnostics: ReplanDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Finished,
    Collision,
    TimeCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub scenario: String,
    pub collided: bool,
    pub termination: Termination,
    /// Clock at which each vehicle first reached the merge point.
    pub merge_pass_left: Option<f64>,
    pub merge_pass_right: Option<f64>,
    /// Side that reached the merge point first.
    pub first_through_merge: Option<Side>,
    /// Centre-to-centre distance (gap plus leader length) when the second
    /// vehicle reaches the merge point.
    pub headway_at_merge: Option<f64>,
    pub final_time: f64,
    pub replans_upper_left: usize,
    pub replans_upper_right: usize,
    pub replans_lower_left: usize,
    pub replans_lower_right: usize,
    pub infeasible_replans: usize,
}

impl SimOutcome {
    pub fn merge_pass(&self, side: Side) -> Option<f64> {
        match side {
            Side::Left => self.merge_pass_left,
            Side::Right => self.merge_pass_right,
        }
    }

    pub fn upper_replans(&self, side: Side) -> usize {
        match side {
            Side::Left => self.replans_upper_left,
            Side::Right => self.replans_upper_right,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub side: Side,
    pub vehicle: VehicleState,
    pub plan: Plan,
    pub belief: Belief,
    pub risk_params: RiskParams,
    pub planner_params: PlannerParams,
    pub last_replan_at: f64,
}

/// What an agent decided during the observe/evaluate/re-plan phase.
#[derive(Debug, Clone)]
struct Decision {
    max_risk: f64,
    event: TraceEvent,
    replan: Option<ReplanRecord>,
}

impl AgentState {
    fn decide(
        &mut self,
        other: &VehicleState,
        now: f64,
        track: &Track,
        dynamics: &DynamicsParams,
    ) -> Result<Decision> {
        self.belief.roll(now, other.s, other.v)?;
        self.belief.update(other.s, other.v)?;
        let eval = risk::evaluate(&self.plan, &self.belief, track, self.side, dynamics.dt, BoundsMode::Exact)?;
        let decision = risk::trigger(eval.max_risk, now - self.last_replan_at, &self.risk_params);
        if decision == TriggerDecision::Continue {
            return Ok(Decision {
                max_risk: eval.max_risk,
                event: TraceEvent::None,
                replan: None,
            });
        }

        let ctx = ReplanContext {
            dynamics,
            track,
            side: self.side,
            belief: &self.belief,
            now,
        };
        let out = planner::replan(&ctx, &self.plan, &self.vehicle, &self.planner_params)?;
        self.plan = out.plan;
        self.last_replan_at = now;
        let after = risk::evaluate(&self.plan, &self.belief, track, self.side, dynamics.dt, BoundsMode::Exact)?;
        let linearized =
            risk::evaluate(&self.plan, &self.belief, track, self.side, dynamics.dt, BoundsMode::Linearized)?;
        let event = match (out.diagnostics.feasible, decision) {
            (false, _) => TraceEvent::Infeasible,
            (true, TriggerDecision::ReplanUpper) => TraceEvent::ReplanUpper,
            (true, _) => TraceEvent::ReplanLower,
        };
        Ok(Decision {
            max_risk: after.max_risk,
            event,
            replan: Some(ReplanRecord {
                time: now,
                side: self.side,
                trigger: decision,
                risk_before: eval.max_risk,
                risk_after: after.max_risk,
                linearized_risk_after: linearized.max_risk,
                diagnostics: out.diagnostics,
            }),
        })
    }
}

/// Full simulation state.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: String,
    pub track: Track,
    pub dynamics: DynamicsParams,
    pub agents: [AgentState; 2],
    pub tick: u64,
    pub sim_cap: f64,
    pub execution: Execution,
    pub trace: Vec<TraceRecord>,
    pub replans: Vec<ReplanRecord>,
    merge_pass: [Option<f64>; 2],
    headway_at_merge: Option<f64>,
    collided: bool,
}

impl World {
    pub fn new(config: &ScenarioConfig) -> Result<World> {
        config.validate()?;
        let track = config.track.build()?;
        let dynamics = config.dynamics;
        let steps = config.plan_steps();
        let start = |side: Side| {
            let d = config.driver(side);
            VehicleState::new(d.x_0, d.v_0)
        };
        let make_agent = |side: Side| -> Result<AgentState> {
            let d = config.driver(side);
            let risk_params = d.risk();
            let planner_params = PlannerParams::new(d.v_d, risk_params.constraint_level());
            let own = start(side);
            let other = start(side.other());
            let plan = planner::initial_plan(&dynamics, &own, &planner_params, steps, 0.0).plan;
            Ok(AgentState {
                side,
                vehicle: own,
                plan,
                belief: Belief::new(config.belief, 0.0, other.s, other.v)?,
                risk_params,
                planner_params,
                last_replan_at: 0.0,
            })
        };
        let agents = [make_agent(Side::Left)?, make_agent(Side::Right)?];
        let collided = track.overlaps(Side::Left, agents[0].vehicle.s, Side::Right, agents[1].vehicle.s);
        Ok(World {
            scenario: config.name.clone(),
            track,
            dynamics,
            agents,
            tick: 0,
            sim_cap: config.sim_cap,
            execution: Execution::default(),
            trace: Vec::new(),
            replans: Vec::new(),
            merge_pass: [None, None],
            headway_at_merge: None,
            collided,
        })
    }

    pub fn with_execution(mut self, execution: Execution) -> World {
        self.execution = execution;
        self
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.dynamics.dt
    }

    pub fn collided(&self) -> bool {
        self.collided
    }

    pub fn finished(&self) -> bool {
        let end = self.track.end();
        self.collided
            || self.agents.iter().all(|a| a.vehicle.s >= end)
            || self.now() >= self.sim_cap - 1e-9
    }

    /// Advance the world by one simulation step.
    pub fn tick(&mut self) -> Result<()> {
        let now = self.now();
        let snapshot = [self.agents[0].vehicle, self.agents[1].vehicle];
        let track = &self.track;
        let dynamics = &self.dynamics;
        let [left, right] = &mut self.agents;
        let (dl, dr) = self.execution.join(
            || left.decide(&snapshot[1], now, track, dynamics),
            || right.decide(&snapshot[0], now, track, dynamics),
        );
        let decisions = [dl?, dr?];

        for (agent, decision) in self.agents.iter_mut().zip(decisions) {
            let before = agent.vehicle;
            let step = dynamics.step(&before, agent.plan.inputs[0]);
            self.trace.push(TraceRecord {
                time: now,
                side: agent.side,
                s: before.s,
                v: before.v,
                a_in: step.state.a_in,
                a_net: step.a_net,
                max_risk: decision.max_risk,
                event: decision.event,
            });
            if let Some(r) = decision.replan {
                self.replans.push(r);
            }
            agent.vehicle = step.state;
            agent.plan = planner::continue_plan(dynamics, &agent.plan)?;
        }
        self.tick += 1;
        let t_next = self.now();

        if let Some(merge) = self.track.merge_point() {
            for (i, agent) in self.agents.iter().enumerate() {
                if self.merge_pass[i].is_none() && agent.vehicle.s >= merge {
                    self.merge_pass[i] = Some(t_next);
                }
            }
            if self.headway_at_merge.is_none() && self.merge_pass.iter().all(Option::is_some) {
                self.headway_at_merge = Some((self.agents[0].vehicle.s - self.agents[1].vehicle.s).abs());
            }
        }
        let (l, r) = (&self.agents[0].vehicle, &self.agents[1].vehicle);
        if self.track.overlaps(Side::Left, l.s, Side::Right, r.s) {
            self.collided = true;
        }
        debug_assert!(self.agents.iter().all(|a| a.vehicle.v >= 0.0));
        Ok(())
    }

    pub fn outcome(&self) -> SimOutcome {
        let count = |side: Side, trig: TriggerDecision| {
            self.replans
                .iter()
                .filter(|r| r.side == side && r.trigger == trig)
                .count()
        };
        let first = match self.merge_pass {
            [Some(l), Some(r)] if l < r => Some(Side::Left),
            [Some(l), Some(r)] if r < l => Some(Side::Right),
            [Some(_), None] => Some(Side::Left),
            [None, Some(_)] => Some(Side::Right),
            _ => None,
        };
        let termination = if self.collided {
            Termination::Collision
        } else if self.agents.iter().all(|a| a.vehicle.s >= self.track.end()) {
            Termination::Finished
        } else {
            Termination::TimeCap
        };
        SimOutcome {
            scenario: self.scenario.clone(),
            collided: self.collided,
            termination,
            merge_pass_left: self.merge_pass[0],
            merge_pass_right: self.merge_pass[1],
            first_through_merge: first,
            headway_at_merge: self.headway_at_merge,
            final_time: self.now(),
            replans_upper_left: count(Side::Left, TriggerDecision::ReplanUpper),
            replans_upper_right: count(Side::Right, TriggerDecision::ReplanUpper),
            replans_lower_left: count(Side::Left, TriggerDecision::ReplanLower),
            replans_lower_right: count(Side::Right, TriggerDecision::ReplanLower),
            infeasible_replans: self.replans.iter().filter(|r| !r.diagnostics.feasible).count(),
        }
    }
}

/// Trace, re-plan log and summary of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub trace: Vec<TraceRecord>,
    pub replans: Vec<ReplanRecord>,
    pub outcome: SimOutcome,
}

impl SimRun {
    pub fn side_trace(&self, side: Side) -> impl Iterator<Item = &TraceRecord> + '_ {
        self.trace.iter().filter(move |r| r.side == side)
    }
}

pub fn run(config: &ScenarioConfig) -> Result<SimRun> {
    run_with(config, Execution::default())
}

pub fn run_with(config: &ScenarioConfig, execution: Execution) -> Result<SimRun> {
    let mut world = World::new(config)?.with_execution(execution);
    while !world.finished() {
        world.tick()?;
    }
    let outcome = world.outcome();
    Ok(SimRun {
        trace: world.trace,
        replans: world.replans,
        outcome,
    })
}
