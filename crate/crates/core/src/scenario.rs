//! Scenario presets, the car-following gap sweep protocol and the scenario
//! configuration file format.
//!
//! Config files are TOML documents: an optional `preset` to start from,
//! optional `[track]`, `[dynamics]`, `[belief]`, `[left]` and `[right]`
//! tables that override individual fields, and a mandatory
//! `schema_version = 1`. Unknown keys are rejected.
//!
//! ```toml
//! schema_version = 1
//! preset = "A"
//!
//! [dynamics]
//! alpha = 0.001
//!
//! [right]
//! x0 = 1.2
//! ```

use serde::{Deserialize, Serialize};

use crate::belief::BeliefParams;
use crate::dynamics::DynamicsParams;
use crate::error::{CeiError, Result};
use crate::risk::RiskParams;
use crate::track::{Side, Track, TrackGeometry, VehicleBody};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SIM_CAP: f64 = 60.0;
pub const STRAIGHT_ROAD_LENGTH: f64 = 400.0;

pub const PRESET_NAMES: [&str; 5] = ["A", "B", "C", "D", "car_following"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrackConfig {
    Merge(TrackGeometry),
    Straight { length: f64, body: VehicleBody },
}

impl TrackConfig {
    pub fn build(&self) -> Result<Track> {
        match *self {
            TrackConfig::Merge(g) => Track::merge(g),
            TrackConfig::Straight { length, body } => Track::straight(length, body),
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            TrackConfig::Merge(g) => g.total_length(),
            TrackConfig::Straight { length, .. } => *length,
        }
    }

    pub fn vehicle_length(&self) -> f64 {
        match self {
            TrackConfig::Merge(g) => g.vehicle_length,
            TrackConfig::Straight { body, .. } => body.length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverParams {
    pub rho_l: f64,
    pub rho_u: f64,
    pub tau: f64,
    pub v_0: f64,
    pub v_d: f64,
    pub x_0: f64,
}

impl DriverParams {
    pub fn new(rho_l: f64, rho_u: f64, v_0: f64, v_d: f64, x_0: f64) -> Self {
        DriverParams {
            rho_l,
            rho_u,
            tau: 2.0,
            v_0,
            v_d,
            x_0,
        }
    }

    pub fn risk(&self) -> RiskParams {
        RiskParams {
            rho_l: self.rho_l,
            rho_u: self.rho_u,
            tau: self.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub track: TrackConfig,
    pub left: DriverParams,
    pub right: DriverParams,
    pub dynamics: DynamicsParams,
    pub belief: BeliefParams,
    /// Simulated-time cap, s.
    pub sim_cap: f64,
}

impl ScenarioConfig {
    pub fn driver(&self, side: Side) -> &DriverParams {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    /// Number of plan steps covering the horizon.
    pub fn plan_steps(&self) -> usize {
        (self.belief.horizon / self.dynamics.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.dynamics.validate()?;
        self.belief.validate()?;
        let track = self.track.build()?;
        let steps = self.belief.horizon / self.dynamics.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return Err(CeiError::config(
                "dynamics.dt",
                "the belief horizon must be a whole number of steps",
            ));
        }
        if (self.belief.a_max - self.dynamics.a_max).abs() > 0.0 {
            return Err(CeiError::config(
                "belief.a_max",
                "must equal dynamics.a_max",
            ));
        }
        if !(self.sim_cap.is_finite() && self.sim_cap > 0.0) {
            return Err(CeiError::config("sim_cap", format!("must be > 0, got {}", self.sim_cap)));
        }
        for side in Side::BOTH {
            let d = self.driver(side);
            let key = |f: &str| format!("{side}.{f}");
            d.risk().validate().map_err(|e| match e {
                CeiError::Config { key: k, reason } => CeiError::config(key(&k), reason),
                other => other,
            })?;
            if !(d.v_0.is_finite() && d.v_0 >= 0.0) {
                return Err(CeiError::config(key("v0"), format!("must be >= 0, got {}", d.v_0)));
            }
            if !(d.v_d.is_finite() && d.v_d >= 0.0) {
                return Err(CeiError::config(key("vd"), format!("must be >= 0, got {}", d.v_d)));
            }
            if !(d.x_0.is_finite() && d.x_0 >= 0.0 && d.x_0 < track.end()) {
                return Err(CeiError::config(
                    key("x0"),
                    format!("must lie in [0, {}), got {}", track.end(), d.x_0),
                ));
            }
        }
        Ok(())
    }
}

fn merge_scenario(name: &str, left: DriverParams, right: DriverParams) -> ScenarioConfig {
    let dynamics = DynamicsParams::default();
    ScenarioConfig {
        name: name.to_string(),
        track: TrackConfig::Merge(TrackGeometry::default()),
        left,
        right,
        dynamics,
        belief: BeliefParams {
            a_max: dynamics.a_max,
            ..BeliefParams::default()
        },
        sim_cap: DEFAULT_SIM_CAP,
    }
}

/// Straight-road car following: `left` follows, `right` leads with a bumper
/// gap of `follower_v * time_gap` at the start.
pub fn car_following(name: &str, follower_v: f64, leader_v: f64, time_gap: f64) -> ScenarioConfig {
    let dynamics = DynamicsParams::default();
    let body = VehicleBody::default();
    let leader_x0 = follower_v * time_gap + body.length;
    ScenarioConfig {
        name: name.to_string(),
        track: TrackConfig::Straight {
            length: STRAIGHT_ROAD_LENGTH,
            body,
        },
        left: DriverParams::new(0.2, 0.5, follower_v, follower_v, 0.0),
        right: DriverParams::new(0.2, 0.5, leader_v, leader_v, leader_x0),
        dynamics,
        belief: BeliefParams {
            a_max: dynamics.a_max,
            ..BeliefParams::default()
        },
        sim_cap: DEFAULT_SIM_CAP,
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let d = DriverParams::new;
    Ok(match name {
        "A" | "a" => merge_scenario("A", d(0.2, 0.5, 10.0, 10.0, 0.0), d(0.2, 0.5, 9.0, 9.0, 0.0)),
        "B" | "b" => merge_scenario("B", d(0.2, 0.5, 10.0, 10.0, 0.0), d(0.2, 0.5, 9.0, 9.0, 1.2)),
        "C" | "c" => merge_scenario("C", d(0.2, 0.4, 10.0, 10.0, 0.0), d(0.3, 0.6, 10.0, 10.0, 0.0)),
        "D" | "d" => merge_scenario("D", d(0.3, 0.4, 10.0, 10.0, 0.0), d(0.3, 0.6, 10.0, 10.0, 0.0)),
        "car_following" | "car-following" => car_following("car_following", 10.0, 9.0, 1.0),
        other => return Err(CeiError::UnknownScenario(other.to_string())),
    })
}

/// One straight-road config per follower velocity: leader at 90 % of the
/// follower's speed, bumper gap of one second at the follower's speed.
pub fn gap_sweep_protocol(velocities: &[f64]) -> Result<Vec<ScenarioConfig>> {
    velocities
        .iter()
        .map(|&v| {
            if !(v.is_finite() && v > 0.0) {
                return Err(CeiError::domain("velocity", v, "velocity > 0"));
            }
            Ok(car_following(&format!("sweep_{v}"), v, 0.9 * v, 1.0))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// file format

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sim_cap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    track: Option<RawTrack>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dynamics: Option<RawDynamics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    belief: Option<RawBelief>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<RawDriver>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<RawDriver>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrack {
    kind: Option<String>,
    l_a: Option<f64>,
    l_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    length: Option<f64>,
    vehicle_length: Option<f64>,
    vehicle_width: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    alpha: Option<f64>,
    beta: Option<f64>,
    a_max: Option<f64>,
    dt: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBelief {
    horizon: Option<f64>,
    point_rate: Option<f64>,
    a_c: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDriver {
    rho_l: Option<f64>,
    rho_u: Option<f64>,
    tau: Option<f64>,
    v0: Option<f64>,
    vd: Option<f64>,
    x0: Option<f64>,
}

fn merge_driver(side: Side, base: Option<DriverParams>, raw: Option<RawDriver>) -> Result<DriverParams> {
    let raw = raw.unwrap_or_default();
    let defaults = RiskParams::default();
    let need = |v: Option<f64>, from_base: Option<f64>, field: &str| {
        v.or(from_base)
            .ok_or_else(|| CeiError::config(format!("{side}.{field}"), "missing required field"))
    };
    Ok(DriverParams {
        rho_l: raw.rho_l.or(base.map(|b| b.rho_l)).unwrap_or(defaults.rho_l),
        rho_u: raw.rho_u.or(base.map(|b| b.rho_u)).unwrap_or(defaults.rho_u),
        tau: raw.tau.or(base.map(|b| b.tau)).unwrap_or(defaults.tau),
        v_0: need(raw.v0, base.map(|b| b.v_0), "v0")?,
        v_d: need(raw.vd, base.map(|b| b.v_d), "vd")?,
        x_0: raw.x0.or(base.map(|b| b.x_0)).unwrap_or(0.0),
    })
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_config_over(text, None)
}

/// Parses a config whose unspecified fields fall back to `default_preset`
/// when the file does not name a preset itself.
pub fn parse_config_over(text: &str, default_preset: Option<&str>) -> Result<ScenarioConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CeiError::Parse(e.to_string()))?;
    match raw.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(CeiError::config(
                "schema_version",
                format!("unsupported version {v}, expected {SCHEMA_VERSION}"),
            ))
        }
        None => return Err(CeiError::config("schema_version", "missing required field")),
    }
    let preset_name = match (raw.preset.as_deref(), default_preset) {
        (Some(a), Some(b)) if !a.eq_ignore_ascii_case(b) => {
            return Err(CeiError::config(
                "preset",
                format!("file names preset `{a}` but `{b}` was requested"),
            ))
        }
        (a, b) => a.or(b),
    };
    let base = preset_name.map(preset).transpose()?;

    let base_track = base.as_ref().map(|b| b.track);
    let rt = raw.track.unwrap_or_default();
    let kind = rt.kind.clone().unwrap_or_else(|| match base_track {
        Some(TrackConfig::Straight { .. }) => "straight".into(),
        _ => "merge".into(),
    });
    let track = match kind.as_str() {
        "merge" => {
            let g = match base_track {
                Some(TrackConfig::Merge(g)) => g,
                _ => TrackGeometry::default(),
            };
            if rt.length.is_some() {
                return Err(CeiError::config("track.length", "only valid for kind = \"straight\""));
            }
            TrackConfig::Merge(TrackGeometry {
                l_a: rt.l_a.unwrap_or(g.l_a),
                l_b: rt.l_b.unwrap_or(g.l_b),
                vehicle_length: rt.vehicle_length.unwrap_or(g.vehicle_length),
                vehicle_width: rt.vehicle_width.unwrap_or(g.vehicle_width),
            })
        }
        "straight" => {
            let (length, body) = match base_track {
                Some(TrackConfig::Straight { length, body }) => (length, body),
                _ => (STRAIGHT_ROAD_LENGTH, VehicleBody::default()),
            };
            if rt.l_a.is_some() || rt.l_b.is_some() {
                return Err(CeiError::config("track.l_a", "only valid for kind = \"merge\""));
            }
            TrackConfig::Straight {
                length: rt.length.unwrap_or(length),
                body: VehicleBody {
                    length: rt.vehicle_length.unwrap_or(body.length),
                    width: rt.vehicle_width.unwrap_or(body.width),
                },
            }
        }
        other => {
            return Err(CeiError::config(
                "track.kind",
                format!("expected \"merge\" or \"straight\", got \"{other}\""),
            ))
        }
    };

    let bd = base.as_ref().map_or_else(DynamicsParams::default, |b| b.dynamics);
    let rd = raw.dynamics.unwrap_or_default();
    let dynamics = DynamicsParams {
        alpha: rd.alpha.unwrap_or(bd.alpha),
        beta: rd.beta.unwrap_or(bd.beta),
        a_max: rd.a_max.unwrap_or(bd.a_max),
        dt: rd.dt.unwrap_or(bd.dt),
    };
    let bb = base.as_ref().map_or_else(BeliefParams::default, |b| b.belief);
    let rb = raw.belief.unwrap_or_default();
    let belief = BeliefParams {
        horizon: rb.horizon.unwrap_or(bb.horizon),
        point_rate: rb.point_rate.unwrap_or(bb.point_rate),
        a_c: rb.a_c.unwrap_or(bb.a_c),
        a_max: dynamics.a_max,
    };

    let cfg = ScenarioConfig {
        name: raw
            .name
            .or_else(|| base.as_ref().map(|b| b.name.clone()))
            .unwrap_or_else(|| "custom".to_string()),
        track,
        left: merge_driver(Side::Left, base.as_ref().map(|b| b.left), raw.left)?,
        right: merge_driver(Side::Right, base.as_ref().map(|b| b.right), raw.right)?,
        dynamics,
        belief,
        sim_cap: raw
            .sim_cap
            .or(base.as_ref().map(|b| b.sim_cap))
            .unwrap_or(DEFAULT_SIM_CAP),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Serialise a config with every field spelled out (no preset reference).
pub fn to_config_string(cfg: &ScenarioConfig) -> String {
    let driver = |d: &DriverParams| RawDriver {
        rho_l: Some(d.rho_l),
        rho_u: Some(d.rho_u),
        tau: Some(d.tau),
        v0: Some(d.v_0),
        vd: Some(d.v_d),
        x0: Some(d.x_0),
    };
    let track = match cfg.track {
        TrackConfig::Merge(g) => RawTrack {
            kind: Some("merge".into()),
            l_a: Some(g.l_a),
            l_b: Some(g.l_b),
            length: None,
            vehicle_length: Some(g.vehicle_length),
            vehicle_width: Some(g.vehicle_width),
        },
        TrackConfig::Straight { length, body } => RawTrack {
            kind: Some("straight".into()),
            l_a: None,
            l_b: None,
            length: Some(length),
            vehicle_length: Some(body.length),
            vehicle_width: Some(body.width),
        },
    };
    let raw = RawConfig {
        schema_version: Some(SCHEMA_VERSION),
        preset: None,
        name: Some(cfg.name.clone()),
        sim_cap: Some(cfg.sim_cap),
        track: Some(track),
        dynamics: Some(RawDynamics {
            alpha: Some(cfg.dynamics.alpha),
            beta: Some(cfg.dynamics.beta),
            a_max: Some(cfg.dynamics.a_max),
            dt: Some(cfg.dynamics.dt),
        }),
        belief: Some(RawBelief {
            horizon: Some(cfg.belief.horizon),
            point_rate: Some(cfg.belief.point_rate),
            a_c: Some(cfg.belief.a_c),
        }),
        left: Some(driver(&cfg.left)),
        right: Some(driver(&cfg.right)),
    };
    toml::to_string(&raw).expect("config serialises")
}
