//! Brute-force oracles for the closed-form parts of the model: collision
//! bounds, the belief posterior and the collision probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{self, BeliefParams, BeliefPoint};
use crate::error::{CeiError, Result};
use crate::exec::Execution;
use crate::risk::{self, BoundsMode};
use crate::track::{CollisionBounds, Side, Track, TrackGeometry};

pub const BOUNDS_TOLERANCE: f64 = 0.2;
pub const POSTERIOR_TOLERANCE: f64 = 1e-4;
pub const RISK_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Bounds,
    Posterior,
    Risk,
}

impl std::str::FromStr for Suite {
    type Err = CeiError;

    fn from_str(s: &str) -> Result<Suite> {
        match s {
            "bounds" => Ok(Suite::Bounds),
            "posterior" => Ok(Suite::Posterior),
            "risk" => Ok(Suite::Risk),
            other => Err(CeiError::Parse(format!(
                "unknown verify suite `{other}` (expected bounds, posterior or risk)"
            ))),
        }
    }
}

/// Outcome of one oracle comparison, ready for printing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: Suite,
    pub instances: usize,
    /// Named maximum deviations with the threshold each is held to.
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &str, max_deviation: f64, threshold: f64) -> Check {
        Check {
            name: name.to_owned(),
            max_deviation,
            threshold,
            passed: max_deviation <= threshold,
        }
    }
}

impl Report {
    fn new(suite: Suite, instances: usize, checks: Vec<Check>) -> Report {
        let passed = checks.iter().all(|c| c.passed);
        Report {
            suite,
            instances,
            checks,
            passed,
        }
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let suite = serde_json::to_value(self.suite).ok();
        let name = suite.as_ref().and_then(|v| v.as_str()).unwrap_or("?");
        writeln!(f, "{name}: {} instances", self.instances)?;
        for c in &self.checks {
            writeln!(
                f,
                "  {:<32} max {:.3e}  threshold {:.3e}  {}",
                c.name,
                c.max_deviation,
                c.threshold,
                if c.passed { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "{}", if self.passed { "PASS" } else { "FAIL" })
    }
}

pub fn run_suite(suite: Suite, execution: Execution) -> Result<Report> {
    match suite {
        Suite::Bounds => verify_bounds(&TrackGeometry::default(), 0.1, execution),
        Suite::Posterior => Ok(verify_posterior(11, 100, 100_000, execution)),
        Suite::Risk => verify_risk(29, 50, 1_000_000, execution),
    }
}

// ---------------------------------------------------------------------------
// bounds

/// Resolution of the brute-force sweep over the other vehicle's position.
const SWEEP_RESOLUTION: f64 = 0.01;

/// Smallest and largest other-vehicle position overlapping `own_s`, found by
/// testing every position on a fine grid.
pub fn swept_bounds(geometry: &TrackGeometry, own_s: f64, own_side: Side) -> CollisionBounds {
    let body = geometry.body();
    let own = geometry.pose_at(own_side, own_s);
    let reach = body.length.hypot(body.width);
    // vehicles near the end may overlap positions past it; poses extrapolate
    let n = ((geometry.total_length() + reach) / SWEEP_RESOLUTION).ceil() as usize;
    let mut hit: Option<(f64, f64)> = None;
    for i in 0..=n {
        let s = i as f64 * SWEEP_RESOLUTION;
        let other = geometry.pose_at(own_side.other(), s);
        if own.distance(&other) > reach {
            continue;
        }
        if body.overlaps(&own, &other) {
            hit = Some(hit.map_or((s, s), |(lo, _)| (lo, s)));
        }
    }
    match hit {
        Some((lower, upper)) => CollisionBounds::Interval { lower, upper },
        None => CollisionBounds::Empty,
    }
}

/// Linearized bounds against the swept oracle outside the approximation
/// window, and linearized against exact on the shared exit leg.
pub fn verify_bounds(geometry: &TrackGeometry, step: f64, execution: Execution) -> Result<Report> {
    let track = Track::merge(*geometry)?;
    let (w_lo, w_hi) = track.approximation_window().expect("merge track");
    let shared_from = geometry.l_b + geometry.vehicle_length;
    let n = (geometry.total_length() / step).floor() as usize;
    let jobs: Vec<(Side, f64)> = Side::BOTH
        .iter()
        .flat_map(|&side| (0..=n).map(move |i| (side, i as f64 * step)))
        .collect();
    let rows = execution.map(&jobs, |&(side, s)| {
        let lin = track.collision_bounds_linearized(s, side);
        let outside = if s < w_lo || s > w_hi {
            swept_bounds(geometry, s, side).deviation(&lin)
        } else {
            0.0
        };
        // shared lane: every colliding position of the other vehicle is on
        // the exit leg too, not only the own vehicle
        let exact = track.collision_bounds(s, side);
        let shared = match exact.as_pair() {
            Some((lower, _)) if s >= shared_from && lower >= geometry.l_b => exact.deviation(&lin),
            _ => 0.0,
        };
        (outside, shared)
    });
    let outside = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let shared = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(Report::new(
        Suite::Bounds,
        jobs.len(),
        vec![
            Check::new("linearized vs swept outside window", outside, BOUNDS_TOLERANCE),
            Check::new("linearized vs exact on shared leg", shared, 0.0),
        ],
    ))
}

// ---------------------------------------------------------------------------
// posterior

/// Posterior mean and standard deviation by direct numerical integration of
/// prior times likelihood over `prior.mu ± 8 prior.sigma`.
pub fn grid_posterior(
    params: &BeliefParams,
    prior: &BeliefPoint,
    observed_v: f64,
    other_current_s: f64,
    points: usize,
) -> (f64, f64) {
    let lo = prior.mu - 8.0 * prior.sigma;
    let h = 16.0 * prior.sigma / (points - 1) as f64;
    let sd_v = params.a_c * prior.t / 6.0;
    let log_w = |x: f64| {
        let zp = (x - prior.mu) / prior.sigma;
        let mean_v = (x - other_current_s) / prior.t;
        let zl = (observed_v - mean_v) / sd_v;
        -0.5 * (zp * zp + zl * zl)
    };
    let peak = (0..points)
        .map(|i| log_w(lo + i as f64 * h))
        .fold(f64::NEG_INFINITY, f64::max);
    let (mut w0, mut w1, mut w2) = (0.0, 0.0, 0.0);
    for i in 0..points {
        let x = lo + i as f64 * h;
        let w = (log_w(x) - peak).exp();
        w0 += w;
        w1 += w * x;
        w2 += w * x * x;
    }
    let mean = w1 / w0;
    let var = (w2 / w0 - mean * mean).max(0.0);
    (mean, var.sqrt())
}

pub fn verify_posterior(seed: u64, instances: usize, points: usize, execution: Execution) -> Report {
    let params = BeliefParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(BeliefPoint, f64, f64)> = (0..instances)
        .map(|_| {
            let t = rng.gen_range(0.25..=4.0);
            let s0 = rng.gen_range(0.0..100.0);
            let v = rng.gen_range(0.0..15.0);
            // prior somewhere between freshly initialised and well refined
            let sigma = params.a_max * t * t / 6.0 * rng.gen_range(0.05..1.0);
            let mu = s0 + v * t + rng.gen_range(-2.0..2.0) * sigma;
            let observed = v + rng.gen_range(-1.0..1.0) * params.a_c * t / 6.0;
            (BeliefPoint { t, mu, sigma }, observed, s0)
        })
        .collect();
    let rows = execution.map(&cases, |(prior, v, s0)| {
        let closed = belief::update_point(&params, prior, *v, *s0).expect("valid prior");
        let (mu, sigma) = grid_posterior(&params, prior, *v, *s0, points);
        ((closed.mu - mu).abs(), (closed.sigma - sigma).abs())
    });
    let dmu = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let dsigma = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Report::new(
        Suite::Posterior,
        instances,
        vec![
            Check::new("|mu closed - mu grid|", dmu, POSTERIOR_TOLERANCE),
            Check::new("|sigma closed - sigma grid|", dsigma, POSTERIOR_TOLERANCE),
        ],
    )
}

// ---------------------------------------------------------------------------
// risk

/// Samples per independently seeded chunk of a Monte Carlo estimate.
const MC_CHUNK: usize = 1 << 16;

/// Fraction of `samples` draws from `N(mu, sigma²)` that land in
/// `[lower, upper]`. Chunks are seeded from `(seed, chunk)`, so the estimate
/// is identical under every execution strategy.
pub fn monte_carlo_probability(
    lower: f64,
    upper: f64,
    mu: f64,
    sigma: f64,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> f64 {
    let chunks: Vec<(u64, usize)> = (0..samples.div_ceil(MC_CHUNK))
        .map(|c| (c as u64, MC_CHUNK.min(samples - c * MC_CHUNK)))
        .collect();
    let hits: usize = execution
        .map(&chunks, |&(c, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            (0..n)
                .filter(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = mu + sigma * z;
                    lower <= x && x <= upper
                })
                .count()
        })
        .into_iter()
        .sum();
    hits as f64 / samples as f64
}

pub fn verify_risk(seed: u64, instances: usize, samples: usize, execution: Execution) -> Result<Report> {
    let track = Track::merge(TrackGeometry::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(instances);
    while cases.len() < instances {
        let side = if rng.gen_bool(0.5) { Side::Left } else { Side::Right };
        let own_s = rng.gen_range(40.0..100.0);
        let Some((l, u)) = track.collision_bounds(own_s, side).as_pair() else {
            continue;
        };
        let sigma = rng.gen_range(0.2..5.0);
        let mu = 0.5 * (l + u) + rng.gen_range(-1.5..1.5) * (u - l);
        cases.push((side, own_s, BeliefPoint { t: 1.0, mu, sigma }, (l, u), rng.gen::<u64>()));
    }
    // instances run one after another; each estimate is itself parallel
    let mut worst_z: f64 = 0.0;
    for (side, own_s, point, (l, u), mc_seed) in &cases {
        let p = risk::point_collision_probability(&track, *own_s, *side, point, BoundsMode::Exact);
        let estimate = monte_carlo_probability(*l, *u, point.mu, point.sigma, samples, *mc_seed, execution);
        let sd = (p * (1.0 - p) / samples as f64).sqrt();
        let z = if sd > 0.0 {
            (estimate - p).abs() / sd
        } else if estimate == p {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
    }
    Ok(Report::new(
        Suite::Risk,
        instances,
        vec![Check::new("|analytic - MC| / binomial sd", worst_z, RISK_SIGMAS)],
    ))
}
