//! Box-constrained spectral projected gradient descent.
//!
//! Barzilai-Borwein step lengths with a monotone Armijo backtracking line
//! search along the projected direction.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpgOptions {
    pub max_iterations: usize,
    /// Stop when the infinity norm of the projected step falls below this.
    pub step_tolerance: f64,
    pub armijo: f64,
}

impl Default for SpgOptions {
    fn default() -> Self {
        SpgOptions {
            max_iterations: 200,
            step_tolerance: 1e-9,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: f64, hi: f64) {
    for xi in x {
        *xi = xi.clamp(lo, hi);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimise `f` over the box `[lo, hi]^n`. `f` writes the gradient into its
/// second argument and returns the value.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: f64, hi: f64, opts: &SpgOptions) -> SpgResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut value = f(&x, &mut g);

    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut dir = vec![0.0; n];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        for i in 0..n {
            dir[i] = (x[i] - step * g[i]).clamp(lo, hi) - x[i];
        }
        let dnorm = dir.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if dnorm < opts.step_tolerance {
            converged = true;
            break;
        }
        let slope = dot(&g, &dir);
        let mut lambda = 1.0;
        let mut accepted = false;
        let mut trial_value = value;
        while lambda > 1e-12 {
            for i in 0..n {
                trial[i] = (x[i] + lambda * dir[i]).clamp(lo, hi);
            }
            trial_value = f(&trial, &mut g_trial);
            if trial_value <= value + opts.armijo * lambda * slope {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..n {
            let s = trial[i] - x[i];
            let y = g_trial[i] - g[i];
            ss += s * s;
            sy += s * y;
        }
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_trial);
        let improvement = value - trial_value;
        value = trial_value;
        step = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e8) } else { 1e4 };
        if improvement.abs() <= 1e-15 * value.abs().max(1.0) && ss < 1e-24 {
            converged = true;
            break;
        }
    }

    SpgResult {
        x,
        value,
        iterations,
        converged,
    }
}
