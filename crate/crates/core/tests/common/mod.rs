//! Independent oracles shared by the integration tests. Nothing here calls
//! the closed-form code it is used to check.
#![allow(dead_code)]

use cei_core::track::{Pose2D, Side, Track};

fn corners(p: &Pose2D, length: f64, width: f64) -> [(f64, f64); 4] {
    let (c, s) = (p.heading.cos(), p.heading.sin());
    let (hl, hw) = (length / 2.0, width / 2.0);
    [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)].map(|(a, b)| (p.x + a * c - b * s, p.y + a * s + b * c))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Strictly inside a convex counter-clockwise quadrilateral.
fn inside(q: &[(f64, f64); 4], p: (f64, f64)) -> bool {
    let ccw = cross(q[0], q[1], q[2]) > 0.0;
    (0..4).all(|i| {
        let c = cross(q[i], q[(i + 1) % 4], p);
        if ccw {
            c > 1e-12
        } else {
            c < -1e-12
        }
    })
}

/// Proper crossing of two segments (touching does not count).
fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    d1 * d2 < -1e-18 && d3 * d4 < -1e-18
}

/// Rectangle interiors intersect: an edge crossing or one containing the
/// other's corner or centre.
pub fn rectangles_overlap(a: &Pose2D, b: &Pose2D, length: f64, width: f64) -> bool {
    let qa = corners(a, length, width);
    let qb = corners(b, length, width);
    if qa.iter().any(|&p| inside(&qb, p)) || qb.iter().any(|&p| inside(&qa, p)) {
        return true;
    }
    if inside(&qa, (b.x, b.y)) || inside(&qb, (a.x, a.y)) {
        return true;
    }
    (0..4).any(|i| (0..4).any(|j| segments_cross(qa[i], qa[(i + 1) % 4], qb[j], qb[(j + 1) % 4])))
}

/// Collision interval of the other vehicle's arc position by sweeping it
/// over the whole track (plus one body length past the end).
pub fn swept_interval(track: &Track, own_s: f64, own_side: Side, resolution: f64) -> Option<(f64, f64)> {
    let body = track.body();
    let own = track.pose(own_side, own_s);
    let reach = body.length.hypot(body.width);
    let end = track.end() + body.length;
    let n = (end / resolution).ceil() as usize;
    let mut hit: Option<(f64, f64)> = None;
    for i in 0..=n {
        let s = i as f64 * resolution;
        let other = track.pose(own_side.other(), s);
        if (other.x - own.x).hypot(other.y - own.y) > reach {
            continue;
        }
        if rectangles_overlap(&own, &other, body.length, body.width) {
            hit = Some(hit.map_or((s, s), |(lo, _)| (lo, s)));
        }
    }
    hit
}

/// Posterior mean and sd of `d ~ N(mu0, sigma0²)` after observing `v` with
/// `v ~ N(d / t, (a_c t / 6)²)`, by midpoint quadrature over ±8 sigma0.
pub fn grid_posterior(mu0: f64, sigma0: f64, v: f64, t: f64, a_c: f64, points: usize) -> (f64, f64) {
    let lo = mu0 - 8.0 * sigma0;
    let h = 16.0 * sigma0 / points as f64;
    let sd = a_c * t / 6.0;
    let logw: Vec<f64> = (0..points)
        .map(|i| {
            let d = lo + (i as f64 + 0.5) * h;
            -0.5 * ((d - mu0) / sigma0).powi(2) - 0.5 * ((v - d / t) / sd).powi(2)
        })
        .collect();
    let peak = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1) = (0.0, 0.0);
    for (i, lw) in logw.iter().enumerate() {
        let w = (lw - peak).exp();
        z += w;
        m1 += w * (lo + (i as f64 + 0.5) * h);
    }
    let mean = m1 / z;
    let var: f64 = logw
        .iter()
        .enumerate()
        .map(|(i, lw)| (lw - peak).exp() * (lo + (i as f64 + 0.5) * h - mean).powi(2))
        .sum::<f64>()
        / z;
    (mean, var.sqrt())
}

/// Ordinary least squares: (slope, intercept, r²).
pub fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}
