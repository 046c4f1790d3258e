//! Track layouts, arc-length to pose mapping and collision bounds.
//!
//! The merge layout has two straight approach legs of length `l_b` whose
//! start points are `l_a` apart. They meet at the merge point, after which a
//! shared exit leg continues for another `l_b`. Vehicles travel towards +y;
//! the left leg starts at `x = -l_a / 2`, the right leg at `x = +l_a / 2`.
//!
//! Bounds of collision are expressed in the *other* vehicle's arc
//! coordinate: the set of other-vehicle positions whose body overlaps the
//! own body at a given own position.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{CeiError, Result};

/// Sample spacing of the piecewise-linear bounds table.
pub const LINEARIZATION_SPACING: f64 = 1.0;

/// Half-width of the own-position window around the merge point inside
/// which the linearized bounds are allowed to deviate from the exact ones.
pub const APPROXIMATION_WINDOW: f64 = 5.0;

const SCAN_STEP: f64 = 0.05;
const BISECTION_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    fn lateral_sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from +x.
    pub heading: f64,
}

impl Pose2D {
    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular vehicle body centred on the path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleBody {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleBody {
    fn default() -> Self {
        VehicleBody {
            length: 4.5,
            width: 1.8,
        }
    }
}

impl VehicleBody {
    fn diagonal(&self) -> f64 {
        self.length.hypot(self.width)
    }

    /// Separating-axis overlap test for two bodies at the given poses.
    /// Touching edges do not count as overlap.
    pub fn overlaps(&self, a: &Pose2D, b: &Pose2D) -> bool {
        if a.distance(b) >= self.diagonal() {
            return false;
        }
        let ca = corners(a, self);
        let cb = corners(b, self);
        for pose in [a, b] {
            let (sin, cos) = pose.heading.sin_cos();
            for axis in [(cos, sin), (-sin, cos)] {
                let (amin, amax) = project(&ca, axis);
                let (bmin, bmax) = project(&cb, axis);
                if amax <= bmin || bmax <= amin {
                    return false;
                }
            }
        }
        true
    }
}

fn corners(p: &Pose2D, body: &VehicleBody) -> [(f64, f64); 4] {
    let (sin, cos) = p.heading.sin_cos();
    let hl = 0.5 * body.length;
    let hw = 0.5 * body.width;
    let mut out = [(0.0, 0.0); 4];
    for (i, (dl, dw)) in [(hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw)].into_iter().enumerate() {
        out[i] = (p.x + dl * cos - dw * sin, p.y + dl * sin + dw * cos);
    }
    out
}

fn project(pts: &[(f64, f64); 4], axis: (f64, f64)) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(x, y) in pts {
        let d = x * axis.0 + y * axis.1;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Geometry of the symmetric merge layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackGeometry {
    pub l_a: f64,
    pub l_b: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
}

impl Default for TrackGeometry {
    fn default() -> Self {
        TrackGeometry {
            l_a: 25.0,
            l_b: 50.0,
            vehicle_length: 4.5,
            vehicle_width: 1.8,
        }
    }
}

impl TrackGeometry {
    pub fn validate(&self) -> Result<()> {
        check_positive("track.l_a", self.l_a)?;
        check_positive("track.l_b", self.l_b)?;
        check_positive("track.vehicle_length", self.vehicle_length)?;
        check_positive("track.vehicle_width", self.vehicle_width)?;
        if self.l_a / 2.0 >= self.l_b {
            return Err(CeiError::config(
                "track.l_a",
                "half the start separation must be shorter than the leg length",
            ));
        }
        Ok(())
    }

    pub fn body(&self) -> VehicleBody {
        VehicleBody {
            length: self.vehicle_length,
            width: self.vehicle_width,
        }
    }

    /// Longitudinal (y) distance from the start line to the merge point.
    pub fn merge_y(&self) -> f64 {
        (self.l_b * self.l_b - 0.25 * self.l_a * self.l_a).sqrt()
    }

    pub fn total_length(&self) -> f64 {
        2.0 * self.l_b
    }

    fn approach_direction(&self, side: Side) -> (f64, f64) {
        let dx = -side.lateral_sign() * 0.5 * self.l_a / self.l_b;
        let dy = self.merge_y() / self.l_b;
        (dx, dy)
    }

    fn start_point(&self, side: Side) -> (f64, f64) {
        (side.lateral_sign() * 0.5 * self.l_a, 0.0)
    }

    /// Pose at arc position `s`, extrapolating the exit leg beyond the track end.
    pub(crate) fn pose_at(&self, side: Side, s: f64) -> Pose2D {
        if s < self.l_b {
            let (x0, y0) = self.start_point(side);
            let (dx, dy) = self.approach_direction(side);
            Pose2D {
                x: x0 + s * dx,
                y: y0 + s * dy,
                heading: dy.atan2(dx),
            }
        } else {
            Pose2D {
                x: 0.0,
                y: self.merge_y() + (s - self.l_b),
                heading: FRAC_PI_2,
            }
        }
    }

    pub fn arc_to_pose(&self, side: Side, s: f64) -> Result<Pose2D> {
        if !(0.0..=self.total_length()).contains(&s) {
            return Err(CeiError::domain("s", s, "0 <= s <= 2 * l_b"));
        }
        Ok(self.pose_at(side, s))
    }

    /// Other-vehicle arc ranges whose centre lies within one body diagonal
    /// of `own`. Only those positions can possibly overlap.
    fn candidate_range(&self, own: &Pose2D, other_side: Side) -> Option<(f64, f64)> {
        let reach = self.body().diagonal();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;

        // approach leg: s in [0, l_b)
        let (x0, y0) = self.start_point(other_side);
        let (dx, dy) = self.approach_direction(other_side);
        if let Some((a, b)) = segment_within(own, (x0, y0), (dx, dy), reach) {
            let a = a.max(0.0);
            let b = b.min(self.l_b);
            if a <= b {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        // exit leg: s >= l_b, direction +y from the merge point
        if let Some((a, b)) = segment_within(own, (0.0, self.merge_y()), (0.0, 1.0), reach) {
            let a = a.max(0.0);
            if a <= b {
                lo = lo.min(self.l_b + a);
                hi = hi.max(self.l_b + b);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Exact bounds of collision by a swept separating-axis test with
    /// bisection refinement of both edges.
    pub fn collision_bounds(&self, own_s: f64, own_side: Side) -> CollisionBounds {
        let own = self.pose_at(own_side, own_s);
        let other_side = own_side.other();
        let body = self.body();
        let Some((lo, hi)) = self.candidate_range(&own, other_side) else {
            return CollisionBounds::Empty;
        };
        let collides = |s: f64| body.overlaps(&own, &self.pose_at(other_side, s));

        let n = ((hi - lo) / SCAN_STEP).ceil().max(1.0) as usize;
        let sample = |i: usize| lo + (hi - lo) * i as f64 / n as f64;
        let first = (0..=n).find(|&i| collides(sample(i)));
        let Some(first) = first else {
            return CollisionBounds::Empty;
        };
        let last = (first..=n).rev().find(|&i| collides(sample(i))).unwrap_or(first);

        let mut lower = sample(first);
        if first > 0 {
            lower = bisect_edge(&collides, sample(first - 1), sample(first));
        }
        let mut upper = sample(last);
        if last < n {
            upper = bisect_edge(&collides, sample(last + 1), sample(last));
        }

        // Snap edges that come from two aligned bodies on the exit leg.
        let len = self.vehicle_length;
        if own_s >= self.l_b {
            if own_s - len >= self.l_b && (lower - (own_s - len)).abs() < 2.0 * BISECTION_RESOLUTION {
                lower = own_s - len;
            }
            if (upper - (own_s + len)).abs() < 2.0 * BISECTION_RESOLUTION {
                upper = own_s + len;
            }
        }
        if upper <= lower {
            // single touching sample; widen to a degenerate but ordered interval
            upper = lower + BISECTION_RESOLUTION;
        }
        CollisionBounds::Interval { lower, upper }
    }
}

fn check_positive(key: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CeiError::config(key, format!("must be positive, got {v}")))
    }
}

/// Parameter range `[a, b]` of `p0 + t * dir` (unit `dir`) within `reach` of `c`.
fn segment_within(c: &Pose2D, p0: (f64, f64), dir: (f64, f64), reach: f64) -> Option<(f64, f64)> {
    let wx = p0.0 - c.x;
    let wy = p0.1 - c.y;
    let b = wx * dir.0 + wy * dir.1;
    let cc = wx * wx + wy * wy - reach * reach;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let r = disc.sqrt();
    Some((-b - r, -b + r))
}

/// Bisect between a non-colliding and a colliding position.
fn bisect_edge(collides: &impl Fn(f64) -> bool, mut free: f64, mut hit: f64) -> f64 {
    while (hit - free).abs() > BISECTION_RESOLUTION {
        let mid = 0.5 * (free + hit);
        if collides(mid) {
            hit = mid;
        } else {
            free = mid;
        }
    }
    0.5 * (free + hit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollisionBounds {
    Empty,
    Interval { lower: f64, upper: f64 },
}

impl CollisionBounds {
    pub fn is_empty(&self) -> bool {
        matches!(self, CollisionBounds::Empty)
    }

    pub fn width(&self) -> f64 {
        match *self {
            CollisionBounds::Empty => 0.0,
            CollisionBounds::Interval { lower, upper } => upper - lower,
        }
    }

    pub fn as_pair(&self) -> Option<(f64, f64)> {
        match *self {
            CollisionBounds::Empty => None,
            CollisionBounds::Interval { lower, upper } => Some((lower, upper)),
        }
    }

    /// Distance to the front/back of the interval measured from `own_s`:
    /// `(upper - own_s, own_s - lower)`.
    pub fn offsets(&self, own_s: f64) -> Option<(f64, f64)> {
        self.as_pair().map(|(l, u)| (u - own_s, own_s - l))
    }

    /// Deviation metric used to compare two bound sets. When exactly one is
    /// empty the width of the other is the amount of misplaced interval.
    pub fn deviation(&self, other: &CollisionBounds) -> f64 {
        match (self.as_pair(), other.as_pair()) {
            (None, None) => 0.0,
            (Some((l, u)), None) | (None, Some((l, u))) => u - l,
            (Some((l1, u1)), Some((l2, u2))) => (l1 - l2).abs().max((u1 - u2).abs()),
        }
    }
}

/// Linearized bounds with their slopes w.r.t. own position, for gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearBounds {
    pub lower: f64,
    pub upper: f64,
    pub d_lower: f64,
    pub d_upper: f64,
}

/// Piecewise-linear approximation of the bounds, tabulated once per side.
/// Knots start on a uniform grid and are refined where the exact bounds
/// bend or appear.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    knots: Vec<f64>,
    samples: Vec<Option<(f64, f64)>>,
    /// Own positions at or past this use the aligned-body formula.
    aligned_from: f64,
}

/// A track layout together with its precomputed linearized bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum Track {
    Merge {
        geometry: TrackGeometry,
        tables: Box<[BoundsTable; 2]>,
    },
    /// Single straight lane shared by both vehicles.
    Straight { length: f64, body: VehicleBody },
}

impl Track {
    pub fn merge(geometry: TrackGeometry) -> Result<Track> {
        geometry.validate()?;
        let tables = Box::new([
            build_table(&geometry, Side::Left),
            build_table(&geometry, Side::Right),
        ]);
        Ok(Track::Merge { geometry, tables })
    }

    pub fn straight(length: f64, body: VehicleBody) -> Result<Track> {
        check_positive("track.length", length)?;
        check_positive("track.vehicle_length", body.length)?;
        check_positive("track.vehicle_width", body.width)?;
        Ok(Track::Straight { length, body })
    }

    pub fn body(&self) -> VehicleBody {
        match self {
            Track::Merge { geometry, .. } => geometry.body(),
            Track::Straight { body, .. } => *body,
        }
    }

    pub fn vehicle_length(&self) -> f64 {
        self.body().length
    }

    /// Arc length at which a vehicle has finished the track.
    pub fn end(&self) -> f64 {
        match self {
            Track::Merge { geometry, .. } => geometry.total_length(),
            Track::Straight { length, .. } => *length,
        }
    }

    pub fn merge_point(&self) -> Option<f64> {
        match self {
            Track::Merge { geometry, .. } => Some(geometry.l_b),
            Track::Straight { .. } => None,
        }
    }

    pub fn geometry(&self) -> Option<&TrackGeometry> {
        match self {
            Track::Merge { geometry, .. } => Some(geometry),
            Track::Straight { .. } => None,
        }
    }

    pub fn pose(&self, side: Side, s: f64) -> Pose2D {
        match self {
            Track::Merge { geometry, .. } => geometry.pose_at(side, s),
            Track::Straight { .. } => Pose2D {
                x: 0.0,
                y: s,
                heading: FRAC_PI_2,
            },
        }
    }

    pub fn overlaps(&self, a_side: Side, a_s: f64, b_side: Side, b_s: f64) -> bool {
        self.body()
            .overlaps(&self.pose(a_side, a_s), &self.pose(b_side, b_s))
    }

    pub fn collision_bounds(&self, own_s: f64, own_side: Side) -> CollisionBounds {
        match self {
            Track::Merge { geometry, .. } => geometry.collision_bounds(own_s, own_side),
            Track::Straight { body, .. } => CollisionBounds::Interval {
                lower: own_s - body.length,
                upper: own_s + body.length,
            },
        }
    }

    pub fn collision_bounds_linearized(&self, own_s: f64, own_side: Side) -> CollisionBounds {
        match self.linear_bounds(own_s, own_side) {
            Some(b) if b.upper > b.lower => CollisionBounds::Interval {
                lower: b.lower,
                upper: b.upper,
            },
            _ => CollisionBounds::Empty,
        }
    }

    /// Linearized bounds and slopes; `None` where the table has no interval.
    pub fn linear_bounds(&self, own_s: f64, own_side: Side) -> Option<LinearBounds> {
        match self {
            Track::Straight { body, .. } => Some(aligned(own_s, body.length)),
            Track::Merge { geometry, tables } => {
                let table = &tables[own_side.index()];
                if own_s >= table.aligned_from {
                    return Some(aligned(own_s, geometry.vehicle_length));
                }
                table.interpolate(own_s)
            }
        }
    }

    /// Own positions inside this window may use approximate bounds.
    pub fn approximation_window(&self) -> Option<(f64, f64)> {
        self.merge_point()
            .map(|m| (m - APPROXIMATION_WINDOW, m + APPROXIMATION_WINDOW))
    }
}

fn aligned(own_s: f64, len: f64) -> LinearBounds {
    LinearBounds {
        lower: own_s - len,
        upper: own_s + len,
        d_lower: 1.0,
        d_upper: 1.0,
    }
}

/// Largest interpolation error tolerated before a table interval is split.
const REFINE_TOLERANCE: f64 = 0.02;
/// Narrowest table interval produced by refinement.
const MIN_KNOT_SPACING: f64 = 1.0 / 256.0;
/// Resolution to which the appearance of a collision interval is located.
const ONSET_RESOLUTION: f64 = 1e-4;

fn build_table(geometry: &TrackGeometry, side: Side) -> BoundsTable {
    let spacing = LINEARIZATION_SPACING;
    let n = (geometry.total_length() / spacing).ceil() as usize;
    let len = geometry.vehicle_length;
    let exact = |s: f64| geometry.collision_bounds(s, side).as_pair();
    let grid: Vec<(f64, Option<(f64, f64)>)> = (0..=n)
        .map(|i| {
            let s = i as f64 * spacing;
            (s, exact(s))
        })
        .collect();

    // First grid sample from which every later sample is the aligned interval.
    let is_aligned = |(s, b): &(f64, Option<(f64, f64)>)| {
        matches!(b, Some((l, u)) if *l == s - len && *u == s + len)
    };
    let first_aligned = grid
        .iter()
        .rposition(|k| !is_aligned(k))
        .map_or(0, |i| i + 1);
    let aligned_from = if first_aligned <= n {
        first_aligned as f64 * spacing
    } else {
        f64::INFINITY
    };

    let mut knots = vec![grid[0]];
    for pair in grid.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.0 >= aligned_from {
            knots.push(b);
            continue;
        }
        refine(&exact, a, b, &mut knots);
    }
    let (knots, samples) = knots.into_iter().unzip();
    BoundsTable {
        knots,
        samples,
        aligned_from,
    }
}

type Knot = (f64, Option<(f64, f64)>);

/// Appends the knots strictly after `a` up to and including `b`.
fn refine(exact: &impl Fn(f64) -> Option<(f64, f64)>, a: Knot, b: Knot, out: &mut Vec<Knot>) {
    match (a.1, b.1) {
        (None, None) => out.push(b),
        (Some(_), Some(_)) => {
            let h = b.0 - a.0;
            let needs_split = h > MIN_KNOT_SPACING
                && [0.25, 0.5, 0.75].iter().any(|&f| {
                    let s = a.0 + f * h;
                    let approx = lerp_pair(a, b, s);
                    match exact(s) {
                        Some(e) => {
                            (e.0 - approx.0).abs().max((e.1 - approx.1).abs()) > REFINE_TOLERANCE
                        }
                        None => true,
                    }
                });
            if needs_split {
                let m = 0.5 * (a.0 + b.0);
                let mid = (m, exact(m));
                refine(exact, a, mid, out);
                refine(exact, mid, b, out);
            } else {
                out.push(b);
            }
        }
        _ => {
            // Locate the edge where the interval appears or vanishes and put
            // a knot on its populated side.
            let (mut empty, mut full) = if a.1.is_none() { (a.0, b.0) } else { (b.0, a.0) };
            while (full - empty).abs() > ONSET_RESOLUTION {
                let m = 0.5 * (empty + full);
                if exact(m).is_some() {
                    full = m;
                } else {
                    empty = m;
                }
            }
            let edge = (full, exact(full));
            if a.1.is_none() {
                out.push((empty, None));
                out.push(edge);
                refine(exact, edge, b, out);
            } else {
                refine(exact, a, edge, out);
                out.push((empty, None));
                out.push(b);
            }
        }
    }
}

fn lerp_pair(a: Knot, b: Knot, s: f64) -> (f64, f64) {
    let (Some(pa), Some(pb)) = (a.1, b.1) else {
        unreachable!("lerp_pair needs populated knots")
    };
    let f = (s - a.0) / (b.0 - a.0);
    (pa.0 + f * (pb.0 - pa.0), pa.1 + f * (pb.1 - pa.1))
}

impl BoundsTable {
    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    fn interpolate(&self, own_s: f64) -> Option<LinearBounds> {
        let last = self.knots.len() - 1;
        let i = self
            .knots
            .partition_point(|&k| k <= own_s)
            .saturating_sub(1)
            .min(last - 1);
        let (s0, s1) = (self.knots[i], self.knots[i + 1]);
        let h = s1 - s0;
        let frac = ((own_s - s0) / h).max(0.0);
        let (a, b) = (self.samples[i], self.samples[i + 1]);
        // An empty knot next to a populated one becomes a zero-width interval
        // at the neighbour's centre shifted along with own_s, so the width
        // ramps up continuously from zero.
        let (a, b) = match (a, b) {
            (None, None) => return None,
            (Some(a), Some(b)) => (a, b),
            (None, Some((l, u))) => {
                let c = 0.5 * (l + u) - h;
                ((c, c), (l, u))
            }
            (Some((l, u)), None) => {
                let c = 0.5 * (l + u) + h;
                ((l, u), (c, c))
            }
        };
        let d_lower = (b.0 - a.0) / h;
        let d_upper = (b.1 - a.1) / h;
        Some(LinearBounds {
            lower: a.0 + frac * (b.0 - a.0),
            upper: a.1 + frac * (b.1 - a.1),
            d_lower,
            d_upper,
        })
    }
}
