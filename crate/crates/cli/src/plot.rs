//! Minimal self-contained SVG line and scatter charts.

use std::fmt::Write as _;

use cei_core::analysis::SweepReport;
use cei_core::engine::{SimRun, TraceEvent};
use cei_core::scenario::ScenarioConfig;
use cei_core::track::{Side, Track};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const TICKS: usize = 5;

pub fn side_colour(side: Side) -> &'static str {
    match side {
        Side::Left => "#1f77b4",
        Side::Right => "#ff7f0e",
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Star,
    Circle,
    Dot,
    Cross,
}

#[derive(Debug, Clone)]
struct Line {
    points: Vec<(f64, f64)>,
    colour: String,
    dashed: bool,
    width: f64,
}

#[derive(Debug, Clone)]
struct Point {
    at: (f64, f64),
    marker: Marker,
    colour: String,
}

/// One chart panel. Data are added in user coordinates; axis ranges are
/// taken from the data unless set explicitly.
#[derive(Debug, Clone)]
pub struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    lines: Vec<Line>,
    points: Vec<Point>,
    hlines: Vec<(f64, String)>,
    legend: Vec<(String, String)>,
    y_range: Option<(f64, f64)>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Chart {
        Chart {
            title: title.to_owned(),
            x_label: x_label.to_owned(),
            y_label: y_label.to_owned(),
            lines: Vec::new(),
            points: Vec::new(),
            hlines: Vec::new(),
            legend: Vec::new(),
            y_range: None,
        }
    }

    pub fn line(&mut self, points: Vec<(f64, f64)>, colour: &str) -> &mut Chart {
        self.lines.push(Line {
            points,
            colour: colour.to_owned(),
            dashed: false,
            width: 1.5,
        });
        self
    }

    pub fn dashed_line(&mut self, points: Vec<(f64, f64)>, colour: &str) -> &mut Chart {
        self.lines.push(Line {
            points,
            colour: colour.to_owned(),
            dashed: true,
            width: 0.8,
        });
        self
    }

    pub fn marker(&mut self, at: (f64, f64), marker: Marker, colour: &str) -> &mut Chart {
        self.points.push(Point {
            at,
            marker,
            colour: colour.to_owned(),
        });
        self
    }

    /// Dashed horizontal line across the whole panel.
    pub fn hline(&mut self, y: f64, colour: &str) -> &mut Chart {
        self.hlines.push((y, colour.to_owned()));
        self
    }

    pub fn legend(&mut self, label: &str, colour: &str) -> &mut Chart {
        self.legend.push((label.to_owned(), colour.to_owned()));
        self
    }

    pub fn y_range(&mut self, lo: f64, hi: f64) -> &mut Chart {
        self.y_range = Some((lo, hi));
        self
    }

    fn data_range(&self) -> ((f64, f64), (f64, f64)) {
        let xs = self
            .lines
            .iter()
            .flat_map(|l| l.points.iter())
            .chain(self.points.iter().map(|p| &p.at));
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in xs.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        for (y, _) in &self.hlines {
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if let Some(r) = self.y_range {
            (y0, y1) = r;
        }
        let widen = |lo: f64, hi: f64| {
            if !lo.is_finite() || !hi.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        (widen(x0, x1), widen(y0, y1))
    }

    pub fn to_svg(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.data_range();
        let pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#ddd"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
                sx(xv),
                MARGIN_TOP,
                MARGIN_TOP + ph,
                MARGIN_TOP + ph + 16.0,
                tick_label(xv)
            );
            let _ = writeln!(
                s,
                r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#ddd"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
                MARGIN_LEFT,
                sy(yv),
                MARGIN_LEFT + pw,
                MARGIN_LEFT - 6.0,
                sy(yv) + 4.0,
                tick_label(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + pw / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{0:.1}" text-anchor="middle" transform="rotate(-90 14 {0:.1})">{1}</text>"#,
            MARGIN_TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (y, colour) in &self.hlines {
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN_LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{2}" stroke-dasharray="6 4"/>"#,
                sy(*y),
                MARGIN_LEFT + pw,
                escape(colour)
            );
        }
        for line in &self.lines {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if pts.is_empty() {
                continue;
            }
            let dash = if line.dashed { r#" stroke-dasharray="4 3""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="{}"{dash} points="{}"/>"#,
                escape(&line.colour),
                line.width,
                pts.join(" ")
            );
        }
        for p in &self.points {
            let (cx, cy) = (sx(p.at.0), sy(p.at.1));
            let colour = escape(&p.colour);
            let _ = match p.marker {
                Marker::Circle => writeln!(
                    s,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="none" stroke="{colour}" stroke-width="1.5"/>"#
                ),
                Marker::Dot => writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{colour}"/>"#),
                Marker::Star => writeln!(
                    s,
                    r#"<polygon points="{}" fill="{colour}"/>"#,
                    star_points(cx, cy, 7.0, 3.0)
                ),
                Marker::Cross => writeln!(
                    s,
                    r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}" stroke="{colour}" stroke-width="2"/>"#,
                    cx - 5.0,
                    cy - 5.0,
                    cx + 5.0,
                    cy + 5.0,
                    cx - 5.0,
                    cy + 5.0,
                    cx + 5.0,
                    cy - 5.0
                ),
            };
        }
        for (i, (label, colour)) in self.legend.iter().enumerate() {
            let y = MARGIN_TOP + 14.0 + 16.0 * i as f64;
            let x = MARGIN_LEFT + pw - 150.0;
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{0:.1}" x2="{1:.1}" y2="{0:.1}" stroke="{2}" stroke-width="2"/><text x="{3:.1}" y="{4:.1}">{5}</text>"#,
                y,
                x + 18.0,
                escape(colour),
                x + 24.0,
                y + 4.0,
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(v: f64) -> String {
    let v = if v.abs() < 1e-9 { 0.0 } else { v };
    if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

fn star_points(cx: f64, cy: f64, outer: f64, inner: f64) -> String {
    (0..10)
        .map(|k| {
            let r = if k % 2 == 0 { outer } else { inner };
            let a = -std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::PI / 5.0;
            format!("{:.2},{:.2}", cx + r * a.cos(), cy + r * a.sin())
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lateral offset applied to each vehicle after the merge point, so the two
/// paths stay visible once they share the lane.
const MERGED_OFFSET: f64 = 0.6;

/// The four run panels in order: position, velocity, acceleration, risk.
pub fn run_panels(config: &ScenarioConfig, run: &SimRun) -> anyhow::Result<Vec<(&'static str, String)>> {
    let track: Track = config.track.build()?;
    let name = &config.name;

    let mut position = Chart::new(&format!("{name}: positions"), "x [m]", "y [m]");
    let xy = |side: Side, s: f64| {
        let p = track.pose(side, s);
        let merged = track.merge_point().is_none_or(|m| s >= m);
        let sign = if side == Side::Left { -1.0 } else { 1.0 };
        let dx = if merged { sign * MERGED_OFFSET } else { 0.0 };
        (p.x + dx, p.y)
    };
    for side in Side::BOTH {
        let path = run.side_trace(side).map(|r| xy(side, r.s)).collect();
        position.line(path, side_colour(side)).legend(side.as_str(), side_colour(side));
    }
    // grey markers at whole seconds, joined across the two vehicles
    let dt = config.dynamics.dt;
    let every = (1.0 / dt).round().max(1.0) as usize;
    for (l, r) in run
        .side_trace(Side::Left)
        .zip(run.side_trace(Side::Right))
        .step_by(every)
    {
        let (a, b) = (xy(Side::Left, l.s), xy(Side::Right, r.s));
        position
            .dashed_line(vec![a, b], "#999")
            .marker(a, Marker::Dot, "#999")
            .marker(b, Marker::Dot, "#999");
    }

    let mut velocity = Chart::new(&format!("{name}: velocity"), "time [s]", "v [m/s]");
    let mut accel = Chart::new(&format!("{name}: acceleration"), "time [s]", "a [m/s²]");
    let mut risk = Chart::new(&format!("{name}: perceived risk"), "time [s]", "max risk [-]");
    risk.y_range(0.0, 1.0);
    for side in Side::BOTH {
        let colour = side_colour(side);
        velocity
            .line(run.side_trace(side).map(|r| (r.time, r.v)).collect(), colour)
            .legend(side.as_str(), colour);
        accel
            .line(run.side_trace(side).map(|r| (r.time, r.a_net)).collect(), colour)
            .legend(side.as_str(), colour);
        risk.line(run.side_trace(side).map(|r| (r.time, r.max_risk)).collect(), colour)
            .legend(side.as_str(), colour);
        for r in run.side_trace(side) {
            let marker = match r.event {
                TraceEvent::ReplanUpper => Marker::Star,
                TraceEvent::ReplanLower => Marker::Circle,
                TraceEvent::Infeasible => Marker::Cross,
                TraceEvent::None => continue,
            };
            velocity.marker((r.time, r.v), marker, colour);
            risk.marker((r.time, r.max_risk), marker, colour);
        }
        let d = config.driver(side);
        risk.hline(d.rho_l, colour).hline(d.rho_u, colour);
    }
    Ok(vec![
        ("position", position.to_svg()),
        ("velocity", velocity.to_svg()),
        ("acceleration", accel.to_svg()),
        ("risk", risk.to_svg()),
    ])
}

pub fn sweep_panel(report: &SweepReport) -> String {
    let mut chart = Chart::new("Steady-state gap", "follower velocity [m/s]", "gap [m]");
    for row in &report.rows {
        let (marker, colour) = if row.collided {
            (Marker::Cross, "#d62728")
        } else {
            (Marker::Dot, side_colour(Side::Left))
        };
        if row.steady_state_gap.is_finite() {
            chart.marker((row.velocity, row.steady_state_gap), marker, colour);
        }
    }
    if let Some(fit) = report.fit {
        let xs = report.rows.iter().map(|r| r.velocity);
        let lo = xs.clone().fold(f64::INFINITY, f64::min);
        let hi = xs.fold(f64::NEG_INFINITY, f64::max);
        let f = |x: f64| fit.intercept + fit.slope * x;
        chart
            .line(vec![(lo, f(lo)), (hi, f(hi))], "#444")
            .legend(
                &format!("fit: {:.3} m per m/s, R² {:.3}", fit.slope, fit.r_squared),
                "#444",
            );
    }
    chart.to_svg()
}
