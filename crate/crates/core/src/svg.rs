//! Static SVG figures: fibers, trajectories, cycles and phase portraits.

use std::fmt::Write as _;

use crate::analysis::AnalysisReport;
use crate::config::FlowConfig;
use crate::cycledetect::{LimitCycle, Stability};
use crate::geom::Point;
use crate::milnorfiber::FiberCurve;
use crate::odeflow::{integrate, Trajectory};
use crate::polyalg::VectorField;

const SIZE: f64 = 640.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Maps a world rectangle onto a square drawing, `y` pointing up.
pub struct Canvas {
    x0: f64,
    y0: f64,
    scale: f64,
    height: f64,
    body: String,
}

impl Canvas {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        let scale = SIZE / (x1 - x0).max(y1 - y0);
        Self {
            x0,
            y0,
            scale,
            height: (y1 - y0) * scale,
            body: String::new(),
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        ((p.x - self.x0) * self.scale, self.height - (p.y - self.y0) * self.scale)
    }

    fn path_data(&self, pts: &[Point], close: bool) -> String {
        let mut d = String::new();
        for (k, &p) in pts.iter().enumerate() {
            let (x, y) = self.map(p);
            let _ = write!(d, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
        }
        if close {
            d.push('Z');
        }
        d
    }

    pub fn path(&mut self, pts: &[Point], close: bool, style: &str) {
        if pts.len() < 2 {
            return;
        }
        let d = self.path_data(pts, close);
        let _ = writeln!(self.body, r#"<path d="{d}" {style}/>"#);
    }

    pub fn circle(&mut self, c: Point, r_world: f64, style: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" {style}/>"#,
            r_world * self.scale
        );
    }

    pub fn dot(&mut self, c: Point, r_px: f64, style: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r_px}" {style}/>"#);
    }

    pub fn text(&mut self, at: Point, s: &str) {
        let (x, y) = self.map(at);
        let _ = writeln!(
            self.body,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{}</text>"#,
            x + 4.0,
            y - 4.0,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.2} {h:.2}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = SIZE,
            h = self.height,
        )
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_fiber(c: &mut Canvas, f: &FiberCurve, colour: &str) {
    c.circle(
        f.center,
        f.delta,
        r##"fill="none" stroke="#888" stroke-dasharray="4 3""##,
    );
    for comp in &f.components {
        if comp.closed {
            let style = format!(r#"fill="{colour}" fill-opacity="0.2" stroke="{colour}" stroke-width="1.5""#);
            c.path(&comp.vertices, true, &style);
        } else {
            let style = format!(r#"fill="none" stroke="{colour}" stroke-width="1.5""#);
            c.path(&comp.vertices, false, &style);
        }
    }
}

/// One path per fiber component (closed ones filled) inside the dashed
/// Milnor circle.
pub fn fiber_svg(f: &FiberCurve) -> String {
    let m = 1.05 * f.delta;
    let mut c = Canvas::new(f.center.x - m, f.center.x + m, f.center.y - m, f.center.y + m);
    draw_fiber(&mut c, f, PALETTE[0]);
    c.dot(f.center, 3.0, r#"fill="black""#);
    c.finish()
}

fn cycle_style(s: Stability) -> &'static str {
    match s {
        Stability::Attracting => r##"fill="none" stroke="#d62728" stroke-width="2.5""##,
        Stability::Repelling => r##"fill="none" stroke="#1f77b4" stroke-width="2.5" stroke-dasharray="8 4""##,
        Stability::SemiStable => r##"fill="none" stroke="#9467bd" stroke-width="2.5" stroke-dasharray="2 3""##,
    }
}

fn frame(v: &VectorField) -> Canvas {
    let (x0, x1, y0, y1) = v.bounds().bounds_f64();
    let mut c = Canvas::new(x0, x1, y0, y1);
    let corners = [
        Point::new(x0, y0),
        Point::new(x1, y0),
        Point::new(x1, y1),
        Point::new(x0, y1),
    ];
    c.path(&corners, true, r##"fill="none" stroke="#444""##);
    c
}

/// Sample trajectories from an 8 × 8 grid, both time directions, clipped to
/// a short horizon.
fn flow_sample(c: &mut Canvas, v: &VectorField) {
    let (x0, x1, y0, y1) = v.bounds().bounds_f64();
    let cfg = FlowConfig {
        rtol: 1e-6,
        atol: 1e-9,
        box_inflation: 1.0,
        ..FlowConfig::default()
    };
    let back = v.reversed();
    for j in 0..8 {
        for i in 0..8 {
            let p = Point::new(
                x0 + (x1 - x0) * (i as f64 + 0.5) / 8.0,
                y0 + (y1 - y0) * (j as f64 + 0.5) / 8.0,
            );
            for w in [v, &back] {
                let tr = integrate(w, p, 10.0, &cfg);
                c.path(&tr.states(), false, r##"fill="none" stroke="#bbb" stroke-width="0.8""##);
            }
        }
    }
}

/// Trajectory polyline over the search box.
pub fn trajectory_svg(v: &VectorField, tr: &Trajectory) -> String {
    let mut c = frame(v);
    c.path(
        &tr.states(),
        false,
        r##"fill="none" stroke="#1f77b4" stroke-width="1.2""##,
    );
    c.dot(tr.start, 3.0, r#"fill="black""#);
    c.finish()
}

/// Detected cycles over a sample of the flow.
pub fn cycles_svg(v: &VectorField, cycles: &[LimitCycle], cps: &[Point]) -> String {
    let mut c = frame(v);
    flow_sample(&mut c, v);
    for cy in cycles {
        c.path(&cy.points, true, cycle_style(cy.stability));
    }
    for &p in cps {
        c.dot(p, 3.5, r#"fill="black""#);
    }
    c.finish()
}

/// Phase portrait for a report: flow sample, cycles, equilibria with their
/// `l_i`, and one fiber per equilibrium.
pub fn phase_portrait_svg(v: &VectorField, report: &AnalysisReport, fibers: &[FiberCurve]) -> String {
    let mut c = frame(v);
    flow_sample(&mut c, v);
    for (k, f) in fibers.iter().enumerate() {
        draw_fiber(&mut c, f, PALETTE[k % PALETTE.len()]);
    }
    for d in &report.detected {
        c.path(&d.cycle.points, true, cycle_style(d.cycle.stability));
    }
    for cp in &report.critical_points {
        c.dot(cp.location, 3.5, r#"fill="black""#);
        let l = report
            .milnor
            .iter()
            .find(|m| m.point_id == cp.id)
            .map_or("?".to_string(), |m| m.l.to_string());
        c.text(cp.location, &format!("p{} l={l}", cp.id));
    }
    c.finish()
}
