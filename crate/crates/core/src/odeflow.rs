//! Adaptive integration of `x' = V(x)` with the Dormand–Prince 5(4) pair and
//! crossing detection on straight Poincaré sections.
//!
//! Every accepted step is kept as a [`Segment`], which carries the state, the
//! velocity `V(x)` and the acceleration `∇V(x)·V(x)` at both ends. The dense
//! output is the quintic Hermite interpolant through those six values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::FlowConfig;
use crate::geom::Point;
use crate::polyalg::{IBox, VectorField};

/// Why an integration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TEnd,
    BoxExit,
    EquilibriumConvergence,
    StepUnderflow,
    /// The step budget `max_steps` ran out before any other event.
    MaxSteps,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI step-size controller.
const SAFETY: f64 = 0.8;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn accel(v: &VectorField, x: Point, f: Point) -> Point {
    let j = v.jacobian(x);
    Point::new(j[0][0] * f.x + j[0][1] * f.y, j[1][0] * f.x + j[1][1] * f.y)
}

/// One accepted step `[t0, t1]` with its Hermite data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: Point,
    pub x1: Point,
    pub f0: Point,
    pub f1: Point,
    pub a0: Point,
    pub a1: Point,
}

impl Segment {
    fn basis(&self, t: f64) -> (f64, f64) {
        let h = self.t1 - self.t0;
        (h, ((t - self.t0) / h).clamp(0.0, 1.0))
    }

    /// Dense state at `t ∈ [t0, t1]`.
    pub fn eval(&self, t: f64) -> Point {
        let (h, s) = self.basis(t);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
        let h3 = 0.5 * s3 - s4 + 0.5 * s5;
        let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        self.x0 * h0
            + self.f0 * (h * h1)
            + self.a0 * (h * h * h2)
            + self.a1 * (h * h * h3)
            + self.f1 * (h * h4)
            + self.x1 * h5
    }

    /// Time derivative of the dense state at `t`.
    pub fn deriv(&self, t: f64) -> Point {
        let (h, s) = self.basis(t);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let d0 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let d1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let d2 = s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4;
        let d3 = 1.5 * s2 - 4.0 * s3 + 2.5 * s4;
        let d4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        (self.x0 * d0 + self.x1 * -d0) * (1.0 / h)
            + self.f0 * d1
            + self.a0 * (h * d2)
            + self.a1 * (h * d3)
            + self.f1 * d4
    }
}

/// Incremental Dormand–Prince integrator. Each call to [`Stepper::next_segment`]
/// advances by one accepted step, so callers can stop as soon as an event of
/// interest is seen.
pub struct Stepper<'a> {
    v: &'a VectorField,
    cfg: FlowConfig,
    region: IBox,
    t_max: f64,
    t: f64,
    x: Point,
    f: Point,
    a: Point,
    h: f64,
    err_old: f64,
    steps: usize,
    done: Option<Termination>,
}

impl<'a> Stepper<'a> {
    /// Starts at `x0` (time 0). Integration stops on leaving the search box
    /// inflated by `cfg.box_inflation`.
    pub fn new(v: &'a VectorField, x0: Point, t_max: f64, cfg: &FlowConfig) -> Self {
        let region = v.bounds().inflated(cfg.box_inflation);
        Self::with_region(v, x0, t_max, cfg, region)
    }

    pub fn with_region(v: &'a VectorField, x0: Point, t_max: f64, cfg: &FlowConfig, region: IBox) -> Self {
        assert!(t_max > 0.0, "t_max must be positive");
        let f = v.eval(x0);
        let mut s = Self {
            v,
            cfg: cfg.clone(),
            region,
            t_max,
            t: 0.0,
            x: x0,
            f,
            a: accel(v, x0, f),
            h: 0.0,
            err_old: 1e-4,
            steps: 0,
            done: None,
        };
        if !region.contains(x0.x, x0.y) {
            s.done = Some(Termination::BoxExit);
        } else if f.norm() < cfg.equilibrium_tol {
            s.done = Some(Termination::EquilibriumConvergence);
        } else {
            s.h = s.initial_step();
        }
        s
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> Point {
        self.x
    }

    pub fn termination(&self) -> Option<Termination> {
        self.done
    }

    fn sc(&self, a: f64, b: f64) -> f64 {
        self.cfg.atol + self.cfg.rtol * a.abs().max(b.abs())
    }

    fn wnorm(&self, d: Point, x: Point, y: Point) -> f64 {
        let ex = d.x / self.sc(x.x, y.x);
        let ey = d.y / self.sc(x.y, y.y);
        (0.5 * (ex * ex + ey * ey)).sqrt()
    }

    /// Initial step after Hairer, Nørsett and Wanner.
    fn initial_step(&self) -> f64 {
        let x = self.x;
        let d0 = self.wnorm(x, x, x);
        let d1 = self.wnorm(self.f, x, x);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(self.t_max);
        let x1 = x + self.f * h0;
        let f1 = self.v.eval(x1);
        let d2 = self.wnorm(f1 - self.f, x, x) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(self.t_max)
    }

    /// Advances one accepted step. Returns `None` once integration has
    /// terminated; the reason is then available from [`Stepper::termination`].
    pub fn next_segment(&mut self) -> Option<Segment> {
        if self.done.is_some() {
            return None;
        }
        let v = self.v;
        let (t, x, k1) = (self.t, self.x, self.f);
        loop {
            if self.steps >= self.cfg.max_steps {
                self.done = Some(Termination::MaxSteps);
                return None;
            }
            let mut h = self.h;
            let last = t + h >= self.t_max;
            if last {
                h = self.t_max - t;
            }
            if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                self.done = Some(Termination::StepUnderflow);
                return None;
            }
            self.steps += 1;
            let k2 = v.eval(x + k1 * (h * A21));
            let k3 = v.eval(x + (k1 * A31 + k2 * A32) * h);
            let k4 = v.eval(x + (k1 * A41 + k2 * A42 + k3 * A43) * h);
            let k5 = v.eval(x + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h);
            let k6 = v.eval(x + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h);
            let y = x + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
            let k7 = v.eval(y);
            let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
            let err = self.wnorm(err_vec, x, y);
            if !err.is_finite() || !y.is_finite() {
                self.h = h * FAC_MIN;
                continue;
            }
            let fac11 = err.powf(EXPO);
            if err <= 1.0 {
                let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                self.err_old = err.max(1e-4);
                let t1 = if last { self.t_max } else { t + h };
                let a1 = accel(v, y, k7);
                let seg = Segment {
                    t0: t,
                    t1,
                    x0: x,
                    x1: y,
                    f0: k1,
                    f1: k7,
                    a0: self.a,
                    a1,
                };
                self.t = t1;
                self.x = y;
                self.f = k7;
                self.a = a1;
                self.h = h / fac;
                if last {
                    self.done = Some(Termination::TEnd);
                } else if !self.region.contains(y.x, y.y) {
                    self.done = Some(Termination::BoxExit);
                } else if k7.norm() < self.cfg.equilibrium_tol {
                    self.done = Some(Termination::EquilibriumConvergence);
                }
                return Some(seg);
            }
            self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}

/// A solution `x(t)`, `t ∈ [0, times.last]`, with its dense output.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
    pub start: Point,
    pub terminated_by: Termination,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.segments.iter().map(|s| s.t1)).collect()
    }

    pub fn states(&self) -> Vec<Point> {
        std::iter::once(self.start)
            .chain(self.segments.iter().map(|s| s.x1))
            .collect()
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t1)
    }

    pub fn end(&self) -> Point {
        self.segments.last().map_or(self.start, |s| s.x1)
    }

    fn segment_at(&self, t: f64) -> Option<&Segment> {
        let k = self.segments.partition_point(|s| s.t1 < t);
        self.segments.get(k)
    }

    /// Dense state at `t`, or `None` outside the integrated range.
    pub fn dense(&self, t: f64) -> Option<Point> {
        if t == 0.0 {
            return Some(self.start);
        }
        self.segment_at(t).filter(|s| t >= s.t0).map(|s| s.eval(t))
    }

    pub fn dense_deriv(&self, t: f64) -> Option<Point> {
        self.segment_at(t).filter(|s| t >= s.t0).map(|s| s.deriv(t))
    }

    /// `t,x,y` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y\n");
        for (t, p) in self.times().into_iter().zip(self.states()) {
            let _ = writeln!(out, "{t},{},{}", p.x, p.y);
        }
        out
    }
}

/// Integrates `x' = V(x)` from `x0` over `[0, t_max]`.
pub fn integrate(v: &VectorField, x0: Point, t_max: f64, cfg: &FlowConfig) -> Trajectory {
    let mut st = Stepper::new(v, x0, t_max, cfg);
    let mut segments = Vec::new();
    while let Some(seg) = st.next_segment() {
        segments.push(seg);
    }
    Trajectory {
        segments,
        start: x0,
        terminated_by: st.termination().expect("stepper terminated"),
    }
}

/// The segment `{anchor + u·tangent : |u| ≤ halfwidth}` with `tangent` the
/// normal rotated by +90°. Crossings count in the direction of `normal`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub anchor: Point,
    pub normal: Point,
    pub halfwidth: f64,
}

/// Bisection stops once the bracket is shorter than this.
pub const CROSSING_TIME_TOL: f64 = 1e-10;

impl Section {
    /// `normal` need not be unit length; it is normalized here.
    pub fn new(anchor: Point, normal: Point, halfwidth: f64) -> Self {
        Self {
            anchor,
            normal: normal.normalized(),
            halfwidth,
        }
    }

    pub fn tangent(&self) -> Point {
        self.normal.perp()
    }

    /// Signed distance from the section's line.
    pub fn height(&self, p: Point) -> f64 {
        (p - self.anchor).dot(self.normal)
    }

    /// Coordinate of `p` along the section.
    pub fn coord(&self, p: Point) -> f64 {
        (p - self.anchor).dot(self.tangent())
    }

    pub fn at(&self, u: f64) -> Point {
        self.anchor + self.tangent() * u
    }

    /// The positive crossing inside `seg`, if its endpoints bracket one.
    pub fn crossing(&self, seg: &Segment) -> Option<(f64, Point)> {
        let h0 = self.height(seg.x0);
        let h1 = self.height(seg.x1);
        if !(h0 < 0.0 && h1 >= 0.0) {
            return None;
        }
        let (mut lo, mut hi) = (seg.t0, seg.t1);
        while hi - lo > CROSSING_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.height(seg.eval(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // A few Newton corrections inside the bracket sharpen the crossing
        // well below the bisection tolerance.
        let mut t = 0.5 * (lo + hi);
        for _ in 0..3 {
            let g = self.height(seg.eval(t));
            let dg = seg.deriv(t).dot(self.normal);
            if dg <= 0.0 {
                break;
            }
            let next = t - g / dg;
            if !(next >= lo && next <= hi) {
                break;
            }
            t = next;
        }
        let p = seg.eval(t);
        if seg.deriv(t).dot(self.normal) <= 0.0 || self.coord(p).abs() > self.halfwidth {
            return None;
        }
        Some((t, p))
    }
}

/// Every crossing of `traj` through `s` in the direction of the normal.
/// Crossings where the flow is tangent to the section are skipped.
pub fn section_crossings(v: &VectorField, traj: &Trajectory, s: &Section) -> Vec<(f64, Point)> {
    traj.segments
        .iter()
        .filter_map(|seg| s.crossing(seg))
        .filter(|&(_, p)| v.eval(p).dot(s.normal) > 0.0)
        .collect()
}
