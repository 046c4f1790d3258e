//! Post-processing of simulation traces: bumper gaps, steady state and the
//! velocity sweep with its straight-line fit.

use serde::{Deserialize, Serialize};

use crate::engine::{self, SimRun};
use crate::error::{CeiError, Result};
use crate::exec::Execution;
use crate::scenario::{self, ScenarioConfig};
use crate::track::Side;

/// Averaging window for steady-state quantities, in simulated seconds.
pub const STEADY_STATE_WINDOW: f64 = 1.0;

/// Bumper-to-bumper gap between leader (right) and follower (left) per tick.
pub fn gap_series(run: &SimRun, vehicle_length: f64) -> Vec<(f64, f64)> {
    run.side_trace(Side::Left)
        .zip(run.side_trace(Side::Right))
        .map(|(f, l)| {
            debug_assert_eq!(f.time, l.time);
            (f.time, l.s - f.s - vehicle_length)
        })
        .collect()
}

fn final_window(series: &[(f64, f64)], window: f64) -> &[(f64, f64)] {
    let Some(&(t_end, _)) = series.last() else {
        return series;
    };
    let start = series.partition_point(|&(t, _)| t < t_end - window - 1e-9);
    &series[start..]
}

/// Mean gap over the final `window` seconds of the series.
pub fn steady_state_gap(series: &[(f64, f64)], window: f64) -> Option<f64> {
    let tail = final_window(series, window);
    (!tail.is_empty()).then(|| tail.iter().map(|&(_, g)| g).sum::<f64>() / tail.len() as f64)
}

/// Mean absolute rate of change of the gap over the final window, in m/s.
pub fn gap_drift(series: &[(f64, f64)], window: f64) -> Option<f64> {
    let tail = final_window(series, window);
    if tail.len() < 2 {
        return None;
    }
    let total: f64 = tail
        .windows(2)
        .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
        .sum();
    Some(total / (tail.len() - 1) as f64)
}

/// Ordinary least squares fit of `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Needs at least two distinct x values; `None` otherwise.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub velocity: f64,
    pub steady_state_gap: f64,
    pub gap_drift: f64,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `None` when fewer than two non-colliding velocities remain.
    pub fit: Option<LinearFit>,
}

impl SweepReport {
    pub fn flagged(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().filter(|r| r.collided).map(|r| r.velocity)
    }
}

/// Parses `start..end` or `start..end:step` (inclusive end, default step 1).
pub fn parse_velocity_range(spec: &str) -> Result<Vec<f64>> {
    let bad = |why: &str| CeiError::Parse(format!("velocity range '{spec}': {why}"));
    let (range, step) = match spec.split_once(':') {
        Some((r, s)) => (r, s.trim().parse::<f64>().map_err(|_| bad("step is not a number"))?),
        None => (spec, 1.0),
    };
    let (a, b) = range.split_once("..").ok_or_else(|| bad("expected start..end"))?;
    let start: f64 = a.trim().parse().map_err(|_| bad("start is not a number"))?;
    let end: f64 = b.trim().parse().map_err(|_| bad("end is not a number"))?;
    if !(step.is_finite() && step > 0.0) {
        return Err(bad("step must be positive"));
    }
    if !(start.is_finite() && end.is_finite()) || end < start {
        return Err(bad("end must not be below start"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn sweep_row(config: &ScenarioConfig, velocity: f64) -> Result<SweepRow> {
    let run = engine::run_with(config, Execution::Sequential)?;
    let series = gap_series(&run, config.track.vehicle_length());
    Ok(SweepRow {
        velocity,
        steady_state_gap: steady_state_gap(&series, STEADY_STATE_WINDOW).unwrap_or(f64::NAN),
        gap_drift: gap_drift(&series, STEADY_STATE_WINDOW).unwrap_or(f64::NAN),
        collided: run.outcome.collided,
    })
}

/// Runs the car-following protocol for every velocity and fits the
/// non-colliding steady-state gaps. Rows keep the input order whatever the
/// execution strategy.
pub fn sweep(velocities: &[f64], execution: Execution, threads: Option<usize>) -> Result<SweepReport> {
    let configs = scenario::gap_sweep_protocol(velocities)?;
    let jobs: Vec<(&ScenarioConfig, f64)> = configs.iter().zip(velocities.iter().copied()).collect();
    let rows = execution
        .with_threads(threads, || execution.map(&jobs, |(c, v)| sweep_row(c, *v)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.collided && r.steady_state_gap.is_finite())
        .map(|r| (r.velocity, r.steady_state_gap))
        .collect();
    Ok(SweepReport {
        fit: linear_fit(&points),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fit_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 + 0.5 * i as f64)).collect();
        let fit = linear_fit(&pts).unwrap();
        assert_relative_eq!(fit.slope, 0.5, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_point_has_no_fit() {
        assert!(linear_fit(&[(1.0, 2.0)]).is_none());
        assert!(linear_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_velocity_range("6..14:2").unwrap(), vec![6.0, 8.0, 10.0, 12.0, 14.0]);
        assert_eq!(parse_velocity_range("5..7").unwrap(), vec![5.0, 6.0, 7.0]);
        assert_eq!(parse_velocity_range("8..8").unwrap(), vec![8.0]);
        assert!(parse_velocity_range("8..6").is_err());
        assert!(parse_velocity_range("6..8:0").is_err());
        assert!(parse_velocity_range("six..8").is_err());
    }

    #[test]
    fn steady_state_uses_final_second() {
        let series: Vec<(f64, f64)> = (0..=100).map(|k| (k as f64 * 0.05, k as f64)).collect();
        // last 21 samples: t in [4.0, 5.0]
        let g = steady_state_gap(&series, 1.0).unwrap();
        assert_relative_eq!(g, 90.0, epsilon = 1e-9);
        assert_relative_eq!(gap_drift(&series, 1.0).unwrap(), 20.0, epsilon = 1e-9);
    }
}
