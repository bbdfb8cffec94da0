//! Numerical detection of limit cycles.
//!
//! Seeds are placed on rays around every equilibrium and on a grid over the
//! search box, then integrated forward and backward. A trajectory whose
//! crossings of a section through its end point settle down yields a
//! candidate, which is refined by Newton's method on the Poincaré return map.
//! A periodic orbit counts as a limit cycle when it is hyperbolic
//! (`|P'(u*) - 1|` above the isolation tolerance) or when neighbouring orbits
//! drift monotonically towards or away from it on both sides. Centres fail
//! both tests and are rejected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{CycleConfig, FlowConfig};
use crate::critfind::CriticalPoint;
use crate::geom::{hausdorff, open_vertices, point_polyline_dist, vertex_centroid, winding_number, Point};
use crate::milnorfiber::FiberCurve;
use crate::odeflow::{integrate, section_crossings, Section, Stepper, Termination};
use crate::polyalg::VectorField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Attracting,
    Repelling,
    SemiStable,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CycleError {
    #[error("no return to the section within t = {t_horizon}")]
    NoReturn { t_horizon: f64 },
    #[error("critical point {point} lies on cycle {cycle}")]
    PointOnCycle { cycle: usize, point: usize },
}

/// A refined, confirmed limit cycle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    /// Closed polyline sampled uniformly in time; the last vertex repeats the
    /// first.
    pub points: Vec<Point>,
    pub period: f64,
    pub stability: Stability,
    /// Derivative of the forward return map at the cycle (its multiplier).
    pub return_derivative: f64,
    pub enclosed_cp_ids: Vec<usize>,
    /// `‖x(period) - x(0)‖`.
    pub closure_residual: f64,
    /// Mean distance of the vertices from their centroid.
    pub mean_radius: f64,
}

impl LimitCycle {
    pub fn centroid(&self) -> Point {
        vertex_centroid(open_vertices(&self.points))
    }
}

/// First return of the orbit through `x` to `s`, crossing in the direction of
/// the normal. `x` is assumed to lie on the section.
pub fn return_map(
    v: &VectorField,
    s: &Section,
    x: Point,
    cfg: &FlowConfig,
    t_horizon: f64,
) -> Result<(Point, f64), CycleError> {
    let mut st = Stepper::new(v, x, t_horizon, cfg);
    let start_on_section = s.height(x).abs() <= 1e-12 * (1.0 + x.norm());
    let mut first = true;
    while let Some(seg) = st.next_segment() {
        let skip = first && start_on_section;
        first = false;
        if skip {
            continue;
        }
        if let Some((t, p)) = s.crossing(&seg) {
            return Ok((p, t));
        }
    }
    Err(CycleError::NoReturn { t_horizon })
}

/// Winding number of every cycle, traversed counterclockwise, around every
/// critical point.
pub fn enclosure_matrix(cycles: &[LimitCycle], cps: &[CriticalPoint]) -> Result<Vec<Vec<i32>>, CycleError> {
    const ON_CYCLE: f64 = 1e-8;
    cycles
        .iter()
        .enumerate()
        .map(|(c, cy)| {
            cps.iter()
                .enumerate()
                .map(|(i, cp)| {
                    if point_polyline_dist(cp.location, &cy.points) <= ON_CYCLE {
                        Err(CycleError::PointOnCycle { cycle: c, point: i })
                    } else {
                        let w = winding_number(open_vertices(&cy.points), cp.location);
                        Ok(if signed_area(&cy.points) < 0.0 { -w } else { w })
                    }
                })
                .collect()
        })
        .collect()
}

/// Mean and relative spread `(max - min) / mean` of `‖V(x) - V(p)‖` along
/// the cycle.
pub fn fiber_residence(cycle: &LimitCycle, v: &VectorField, cp: &CriticalPoint) -> (f64, f64) {
    let v0 = v.eval(cp.location);
    let speeds: Vec<f64> = open_vertices(&cycle.points)
        .iter()
        .map(|&x| (v.eval(x) - v0).norm())
        .collect();
    if speeds.is_empty() {
        return (0.0, 0.0);
    }
    let mean = speeds.iter().sum::<f64>() / speeds.len() as f64;
    let lo = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = speeds.iter().copied().fold(0.0, f64::max);
    let variation = if mean > 0.0 { (hi - lo) / mean } else { 0.0 };
    (mean, variation)
}

/// The closed fiber component nearest to the cycle in Hausdorff distance.
pub fn cycle_class_map(cycle: &LimitCycle, fiber: &FiberCurve) -> (Option<usize>, f64) {
    fiber
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| c.closed)
        .map(|(k, c)| (Some(k), hausdorff(&cycle.points, &c.vertices)))
        .fold(
            (None, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        )
}

fn seeds(v: &VectorField, cps: &[CriticalPoint], cfg: &CycleConfig) -> Vec<Point> {
    let b = v.bounds();
    let scale = b.scale();
    let mut out = Vec::new();
    for cp in cps {
        for k in 0..cfg.rays {
            let th = std::f64::consts::TAU * (k as f64 + 0.5) / cfg.rays as f64;
            for m in 0..cfg.radii {
                let r = scale * (m + 1) as f64 / (cfg.radii + 1) as f64;
                let x = cp.location + Point::from_polar(r, th);
                if b.contains(x) {
                    out.push(x);
                }
            }
        }
    }
    let (x0, x1, y0, y1) = b.bounds_f64();
    let n = cfg.box_grid;
    for j in 0..n {
        for i in 0..n {
            out.push(Point::new(
                x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64,
                y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64,
            ));
        }
    }
    out
}

/// Examines the tail of a trajectory of `w` (`V` or `-V`). Returns the end
/// point when its crossings of the section through it settle down.
fn candidate(w: &VectorField, x0: Point, scale: f64, flow: &FlowConfig, cfg: &CycleConfig) -> Option<Point> {
    let tr = integrate(w, x0, cfg.t_horizon, flow);
    if tr.terminated_by != Termination::TEnd {
        return None;
    }
    let xf = tr.end();
    let vf = w.eval(xf);
    if vf.norm() == 0.0 {
        return None;
    }
    let s = Section::new(xf, vf, 0.2 * scale);
    let c = section_crossings(w, &tr, &s);
    if c.len() < 3 {
        return None;
    }
    let tail = &c[c.len().saturating_sub(6)..];
    let u: Vec<f64> = tail.iter().map(|&(_, p)| s.coord(p)).collect();
    let d: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let floor = 1e-9 * scale;
    let settling = d.windows(2).all(|w| w[1] <= w[0] + floor);
    if !settling || *d.last().unwrap() > 0.05 * scale {
        return None;
    }
    // Reject spirals into an equilibrium: the last revolution is tiny.
    let (ta, tb) = (tail[tail.len() - 2].0, tail[tail.len() - 1].0);
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for k in 0..=64 {
        let p = tr.dense(ta + (tb - ta) * k as f64 / 64.0)?;
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    if hi.dist(lo) < 1e-3 * scale {
        return None;
    }
    Some(xf)
}

/// Derivative of the return map of `V` at a periodic orbit sampled uniformly
/// in time: `exp(∫_0^T div V(x(t)) dt)`, independent of the section. The
/// periodic trapezoid rule is used for the integral.
fn multiplier(v: &VectorField, points: &[Point], period: f64) -> f64 {
    let pts = open_vertices(points);
    let mean_div = pts
        .iter()
        .map(|&p| {
            let j = v.jacobian(p);
            j[0][0] + j[1][1]
        })
        .sum::<f64>()
        / pts.len() as f64;
    (mean_div * period).exp()
}

/// Signed area of a closed polyline (positive when counterclockwise).
fn signed_area(points: &[Point]) -> f64 {
    let pts = open_vertices(points);
    let n = pts.len();
    0.5 * (0..n).map(|k| pts[k].cross(pts[(k + 1) % n])).sum::<f64>()
}

/// Why a candidate did not become a limit cycle.
enum Rejection {
    /// Periodic, but neighbours neither approach nor leave it (a centre).
    NotIsolated(Vec<Point>),
    Failed(String),
}

/// Refinement in one time direction: `w` is `V` (forward) or `-V`.
struct Refiner<'a> {
    v: &'a VectorField,
    w: &'a VectorField,
    forward: bool,
    flow: FlowConfig,
    cfg: &'a CycleConfig,
    scale: f64,
}

impl Refiner<'_> {
    fn map(&self, s: &Section, u: f64) -> Result<(f64, f64), CycleError> {
        let (p, t) = return_map(self.w, s, s.at(u), &self.flow, self.cfg.t_horizon)?;
        Ok((s.coord(p), t))
    }

    fn derivative(&self, s: &Section, u: f64) -> Result<f64, CycleError> {
        let h = 1e-5 * self.scale;
        let (a, _) = self.map(s, u + h)?;
        let (b, _) = self.map(s, u - h)?;
        Ok((a - b) / (2.0 * h))
    }

    /// Monotone drift of the neighbour starting `offset` away from `u*`:
    /// `Some(true)` towards, `Some(false)` away, `None` no clear drift.
    fn drift(&self, s: &Section, ustar: f64, offset: f64) -> Option<bool> {
        let d0 = offset.abs();
        let mut u = ustar + offset;
        let mut dists = vec![d0];
        for _ in 0..self.cfg.one_sided_returns {
            match self.map(s, u) {
                Ok((next, _)) => {
                    // crossing to the other side of u* also counts as approach
                    if (next - ustar).signum() != offset.signum() {
                        return Some(true);
                    }
                    u = next;
                    dists.push((u - ustar).abs());
                }
                Err(_) => return Some(false),
            }
        }
        let last = *dists.last().unwrap();
        if (last - d0).abs() <= 1e-3 * d0 {
            return None;
        }
        let toward = last < d0;
        let agree = dists.windows(2).filter(|w| (w[1] < w[0]) == toward).count();
        (agree * 10 >= 9 * (dists.len() - 1)).then_some(toward)
    }

    fn refine(&self, x: Point, cps: &[CriticalPoint]) -> Result<LimitCycle, Rejection> {
        let fail = |e: CycleError| Rejection::Failed(e.to_string());
        let vx = self.w.eval(x);
        if vx.norm() == 0.0 {
            return Err(Rejection::Failed("candidate is an equilibrium".into()));
        }
        let s = Section::new(x, vx, 0.2 * self.scale);
        let mut u = 0.0;
        let mut converged = false;
        for _ in 0..60 {
            let (pu, _) = self.map(&s, u).map_err(fail)?;
            let f = pu - u;
            if f.abs() < self.cfg.refine_tol {
                converged = true;
                break;
            }
            let d = self.derivative(&s, u).map_err(fail)?;
            if (d - 1.0).abs() < 1e-12 {
                break;
            }
            let step = (-f / (d - 1.0)).clamp(-0.05 * self.scale, 0.05 * self.scale);
            u += step;
            if u.abs() > s.halfwidth {
                return Err(Rejection::Failed("Newton left the section".into()));
            }
        }
        let (pu, period) = self.map(&s, u).map_err(fail)?;
        if !converged && (pu - u).abs() > self.cfg.closure_tol {
            return Err(Rejection::Failed(format!(
                "return-map Newton stalled at |P(u) - u| = {:e}",
                (pu - u).abs()
            )));
        }
        let xs = s.at(u);
        let tr = integrate(self.w, xs, period, &self.flow);
        if tr.terminated_by != Termination::TEnd {
            return Err(Rejection::Failed(format!(
                "orbit integration ended by {:?}",
                tr.terminated_by
            )));
        }
        let closure = tr.end().dist(xs);
        let n = self.cfg.polyline_samples.max(8);
        let mut points: Vec<Point> = (0..n)
            .map(|k| tr.dense(period * k as f64 / n as f64).unwrap())
            .collect();
        points.push(points[0]);
        if !self.forward {
            points.reverse();
        }
        if closure > self.cfg.closure_tol {
            return Err(Rejection::Failed(format!("closure residual {closure:e}")));
        }
        let min_speed = open_vertices(&points)
            .iter()
            .map(|&p| self.v.eval(p).norm())
            .fold(f64::INFINITY, f64::min);
        let c = vertex_centroid(open_vertices(&points));
        let mean_radius = open_vertices(&points).iter().map(|p| p.dist(c)).sum::<f64>() / n as f64;
        if mean_radius < 1e-4 * self.scale || min_speed < 10.0 * self.flow.equilibrium_tol {
            return Err(Rejection::Failed("degenerate orbit".into()));
        }

        let pd = multiplier(self.v, &points, period);
        let stability = if (pd - 1.0).abs() > self.cfg.isolation_tol {
            if pd < 1.0 {
                Stability::Attracting
            } else {
                Stability::Repelling
            }
        } else {
            let off = self.cfg.one_sided_offset * self.scale;
            let inner = self.drift(&s, u, -off);
            let outer = self.drift(&s, u, off);
            if inner.is_none() || outer.is_none() {
                return Err(Rejection::NotIsolated(points));
            }
            Stability::SemiStable
        };
        let enclosed_cp_ids: Vec<usize> = cps
            .iter()
            .filter(|cp| winding_number(open_vertices(&points), cp.location) != 0)
            .map(|cp| cp.id)
            .collect();
        if enclosed_cp_ids.is_empty() {
            log::warn!("cycle through {xs:?} encloses no located equilibrium");
        }
        Ok(LimitCycle {
            points,
            period,
            stability,
            return_derivative: pd,
            enclosed_cp_ids,
            closure_residual: closure,
            mean_radius,
        })
    }
}

/// Finds the limit cycles of `V` reachable from the configured seeds.
///
/// The result is a lower bound on the true number: seeding is finite and
/// completeness cannot be certified. Output is sorted by mean radius.
pub fn detect_limit_cycles(
    v: &VectorField,
    cps: &[CriticalPoint],
    flow: &FlowConfig,
    cfg: &CycleConfig,
) -> Vec<LimitCycle> {
    let scale = v.bounds().scale();
    let back = v.reversed();
    let seeds = seeds(v, cps, cfg);
    let candidates: Vec<(Point, bool)> = seeds
        .par_iter()
        .flat_map_iter(|&x0| {
            [
                candidate(v, x0, scale, flow, cfg).map(|x| (x, true)),
                candidate(&back, x0, scale, flow, cfg).map(|x| (x, false)),
            ]
        })
        .flatten()
        .collect();
    log::debug!("{} seeds, {} candidates", 2 * seeds.len(), candidates.len());

    let refine_flow = FlowConfig {
        rtol: cfg.refine_rtol,
        atol: cfg.refine_atol,
        ..flow.clone()
    };
    let refiners = [true, false].map(|forward| Refiner {
        v,
        w: if forward { v } else { &back },
        forward,
        flow: refine_flow.clone(),
        cfg,
        scale,
    });
    let near = 1e-3 * scale;
    let mut cycles: Vec<LimitCycle> = Vec::new();
    let mut rejected_orbits: Vec<Vec<Point>> = Vec::new();
    let mut rejected_points: Vec<Point> = Vec::new();
    for (x, forward) in candidates {
        let known = cycles.iter().any(|c| point_polyline_dist(x, &c.points) < near)
            || rejected_orbits.iter().any(|o| point_polyline_dist(x, o) < near)
            || rejected_points.iter().any(|p| p.dist(x) < near);
        if known {
            continue;
        }
        match refiners[usize::from(!forward)].refine(x, cps) {
            Ok(c) => {
                if cycles
                    .iter()
                    .any(|k| hausdorff(&k.points, &c.points) < cfg.dedup_tol * scale)
                {
                    continue;
                }
                cycles.push(c);
            }
            Err(Rejection::NotIsolated(orbit)) => rejected_orbits.push(orbit),
            Err(Rejection::Failed(why)) => {
                log::debug!("candidate {x:?} dropped: {why}");
                rejected_points.push(x);
            }
        }
    }
    cycles.sort_by(|a, b| {
        a.mean_radius
            .total_cmp(&b.mean_radius)
            .then(a.centroid().x.total_cmp(&b.centroid().x))
    });
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolveConfig;
    use crate::critfind::find_critical_points;
    use crate::milnorfiber::Component;
    use std::f64::consts::TAU;

    fn run(p: &str, q: &str) -> (VectorField, Vec<CriticalPoint>, Vec<LimitCycle>) {
        let v = VectorField::from_strs(p, q).unwrap();
        let cps = find_critical_points(&v, &SolveConfig::default()).unwrap();
        let cycles = detect_limit_cycles(&v, &cps, &FlowConfig::default(), &CycleConfig::default());
        (v, cps, cycles)
    }

    fn circle(r: f64, n: usize) -> Vec<Point> {
        (0..=n)
            .map(|k| Point::from_polar(r, TAU * k as f64 / n as f64))
            .collect()
    }

    #[test]
    fn cubic_system_has_the_unit_circle() {
        let (_, _, cycles) = run("-y + x*(1 - x^2 - y^2)", "x + y*(1 - x^2 - y^2)");
        assert_eq!(cycles.len(), 1);
        let c = &cycles[0];
        assert_eq!(c.stability, Stability::Attracting);
        assert!((c.period - TAU).abs() < 1e-6);
        assert!(c.closure_residual <= 1e-8);
        assert_eq!(c.enclosed_cp_ids, vec![0]);
        assert!(hausdorff(&c.points, &circle(1.0, 4096)) < 1e-4);
    }

    #[test]
    fn linear_centre_has_no_limit_cycle() {
        let (_, _, cycles) = run("-y", "x");
        assert!(cycles.is_empty());
    }

    #[test]
    fn return_map_examples() {
        let v = VectorField::from_strs("-y", "x").unwrap();
        let s = Section::new(Point::new(1.0, 0.0), Point::new(0.0, 1.0), 0.5);
        let (p, t) = return_map(&v, &s, Point::new(1.0, 0.0), &FlowConfig::default(), 100.0).unwrap();
        assert!(p.dist(Point::new(1.0, 0.0)) < 1e-8);
        assert!((t - TAU).abs() < 1e-8);
        let v = VectorField::from_strs("x", "y").unwrap();
        let s = Section::new(Point::new(1.0, 0.0), Point::new(0.0, 1.0), 0.5);
        assert!(matches!(
            return_map(&v, &s, Point::new(1.0, 0.0), &FlowConfig::default(), 100.0),
            Err(CycleError::NoReturn { .. })
        ));
    }

    fn unit_cycle() -> LimitCycle {
        LimitCycle {
            points: circle(1.0, 512),
            period: TAU,
            stability: Stability::Attracting,
            return_derivative: 0.0,
            enclosed_cp_ids: vec![0],
            closure_residual: 0.0,
            mean_radius: 1.0,
        }
    }

    #[test]
    fn enclosure_of_unit_circle() {
        let v = VectorField::from_strs("x^2 - 25", "y").unwrap();
        let cps = find_critical_points(&v, &SolveConfig::default()).unwrap();
        let mut cps2 = cps.clone();
        cps2[0].location = Point::ORIGIN;
        cps2[1].location = Point::new(5.0, 5.0);
        assert_eq!(enclosure_matrix(&[unit_cycle()], &cps2).unwrap(), vec![vec![1, 0]]);
        cps2[1].location = Point::new(1.0, 0.0);
        assert!(matches!(
            enclosure_matrix(&[unit_cycle()], &cps2),
            Err(CycleError::PointOnCycle { cycle: 0, point: 1 })
        ));
    }

    #[test]
    fn residence_on_circles() {
        let v = VectorField::from_strs("-y", "x").unwrap();
        let cps = find_critical_points(&v, &SolveConfig::default()).unwrap();
        let mut c = unit_cycle();
        c.points = circle(2.0, 256);
        let (mean, var) = fiber_residence(&c, &v, &cps[0]);
        assert!((mean - 2.0).abs() < 1e-12);
        assert!(var < 1e-12);
    }

    #[test]
    fn class_map_picks_nearest_loop() {
        let fiber = FiberCurve {
            center: Point::ORIGIN,
            components: vec![
                Component {
                    vertices: circle(0.5, 64),
                    closed: true,
                    arc_endpoints_on_sphere: false,
                },
                Component {
                    vertices: circle(1.0, 64),
                    closed: true,
                    arc_endpoints_on_sphere: false,
                },
            ],
            eta: 1.0,
            delta: 2.0,
            grid_resolution: 64,
        };
        let (k, d) = cycle_class_map(&unit_cycle(), &fiber);
        assert_eq!(k, Some(1));
        // chord sag of the 64-gon
        assert!(d < 2e-3);
        let empty = FiberCurve {
            components: vec![],
            ..fiber
        };
        assert_eq!(cycle_class_map(&unit_cycle(), &empty), (None, f64::INFINITY));
    }
}
