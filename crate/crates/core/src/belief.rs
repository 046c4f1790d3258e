//! Gaussian beliefs about the other vehicle's future arc position.
//!
//! A belief is a rolling sequence of points, one per `1 / point_rate`
//! seconds of the planning horizon. Each tick every point is refined with a
//! conjugate-Gaussian update from the other vehicle's observed velocity.

use serde::{Deserialize, Serialize};

use crate::error::{CeiError, Result};

const DUE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefParams {
    pub horizon: f64,
    pub point_rate: f64,
    /// Maximum comfortable acceleration, m/s². Drives the likelihood width.
    pub a_c: f64,
    /// Physical acceleration bound, m/s². Drives the initial width.
    pub a_max: f64,
}

impl Default for BeliefParams {
    fn default() -> Self {
        BeliefParams {
            horizon: 4.0,
            point_rate: 4.0,
            a_c: 1.0,
            a_max: 2.5,
        }
    }
}

impl BeliefParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [
            ("belief.horizon", self.horizon),
            ("belief.point_rate", self.point_rate),
            ("belief.a_c", self.a_c),
            ("belief.a_max", self.a_max),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CeiError::config(key, format!("must be > 0, got {v}")));
            }
        }
        let n = self.horizon * self.point_rate;
        if (n - n.round()).abs() > 1e-9 || n.round() < 1.0 {
            return Err(CeiError::config(
                "belief.point_rate",
                "horizon * point_rate must be a positive integer",
            ));
        }
        Ok(())
    }

    pub fn num_points(&self) -> usize {
        (self.horizon * self.point_rate).round() as usize
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.point_rate
    }
}

/// Gaussian over the other vehicle's arc position `t` seconds from now.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefPoint {
    pub t: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// Constant-velocity mean with a width such that the reachable band under
/// full acceleration covers three standard deviations.
pub fn init_point(params: &BeliefParams, other_s: f64, other_v: f64, t: f64) -> Result<BeliefPoint> {
    if t.is_nan() || t <= 0.0 {
        return Err(CeiError::domain("t", t, "t > 0"));
    }
    if other_v < 0.0 {
        return Err(CeiError::domain("other_v", other_v, "other_v >= 0"));
    }
    let mu = other_s + other_v * t;
    let ub = mu + 0.5 * params.a_max * t * t;
    Ok(BeliefPoint {
        t,
        mu,
        sigma: (ub - mu) / 3.0,
    })
}

/// Mean and standard deviation of the velocity likelihood for a believed
/// displacement `p` reached after `t` seconds.
pub fn likelihood_params(a_c: f64, p: f64, t: f64) -> Result<(f64, f64)> {
    if t.is_nan() || t <= 0.0 {
        return Err(CeiError::domain("t", t, "t > 0"));
    }
    Ok((p / t, a_c * t / 6.0))
}

/// Conjugate update of one point given the other's current position and
/// observed velocity. Works in displacement coordinates relative to
/// `other_current_s`, where the observation model is `v ~ N(d / t, sd²)`,
/// i.e. `d ~ N(v t, (sd t)²)` as a function of the displacement.
pub fn update_point(
    params: &BeliefParams,
    prior: &BeliefPoint,
    observed_v: f64,
    other_current_s: f64,
) -> Result<BeliefPoint> {
    if prior.sigma.is_nan() || prior.sigma <= 0.0 {
        return Err(CeiError::domain("sigma", prior.sigma, "sigma > 0"));
    }
    let t = prior.t;
    let (_, sd) = likelihood_params(params.a_c, 0.0, t)?;
    let prior_prec = 1.0 / (prior.sigma * prior.sigma);
    let obs_var = sd * sd * t * t;
    let obs_prec = 1.0 / obs_var;
    let prec = prior_prec + obs_prec;
    let d0 = prior.mu - other_current_s;
    let d1 = (d0 * prior_prec + observed_v * t * obs_prec) / prec;
    Ok(BeliefPoint {
        t,
        mu: other_current_s + d1,
        sigma: prec.recip().sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    due: f64,
    mu: f64,
    sigma: f64,
}

/// Rolling sequence of belief points with absolute due times.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    params: BeliefParams,
    clock: f64,
    entries: Vec<Entry>,
}

impl Belief {
    /// Fresh belief at clock `now` from the other's observed state.
    pub fn new(params: BeliefParams, now: f64, other_s: f64, other_v: f64) -> Result<Belief> {
        params.validate()?;
        let spacing = params.spacing();
        let entries = (1..=params.num_points())
            .map(|k| {
                let t = k as f64 * spacing;
                init_point(&params, other_s, other_v, t).map(|p| Entry {
                    due: now + t,
                    mu: p.mu,
                    sigma: p.sigma,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Belief {
            params,
            clock: now,
            entries,
        })
    }

    pub fn params(&self) -> &BeliefParams {
        &self.params
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Points with lead times relative to the belief clock.
    pub fn points(&self) -> impl ExactSizeIterator<Item = BeliefPoint> + '_ {
        self.entries.iter().map(move |e| BeliefPoint {
            t: e.due - self.clock,
            mu: e.mu,
            sigma: e.sigma,
        })
    }

    pub fn point(&self, i: usize) -> BeliefPoint {
        let e = &self.entries[i];
        BeliefPoint {
            t: e.due - self.clock,
            mu: e.mu,
            sigma: e.sigma,
        }
    }

    /// Advance the clock, dropping points whose time has come and appending
    /// freshly initialised ones at the horizon tail. Returns how many rolled.
    pub fn roll(&mut self, now: f64, other_s: f64, other_v: f64) -> Result<usize> {
        self.clock = now;
        let spacing = self.params.spacing();
        let mut rolled = 0;
        while self.entries.first().is_some_and(|e| e.due <= now + DUE_EPS) {
            self.entries.remove(0);
            let due = self
                .entries
                .last()
                .map_or(now + self.params.horizon, |e| e.due + spacing);
            let p = init_point(&self.params, other_s, other_v, due - now)?;
            self.entries.push(Entry {
                due,
                mu: p.mu,
                sigma: p.sigma,
            });
            rolled += 1;
        }
        Ok(rolled)
    }

    /// Bayesian update of every point from one noiseless observation.
    pub fn update(&mut self, other_s: f64, other_v: f64) -> Result<()> {
        let clock = self.clock;
        for e in &mut self.entries {
            let prior = BeliefPoint {
                t: e.due - clock,
                mu: e.mu,
                sigma: e.sigma,
            };
            let post = update_point(&self.params, &prior, other_v, other_s)?;
            e.mu = post.mu;
            e.sigma = post.sigma;
        }
        Ok(())
    }
}
