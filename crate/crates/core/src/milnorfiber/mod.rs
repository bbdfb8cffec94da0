//! Numerical Milnor fibration of the germ `f = V - V(p)` at each equilibrium.
//!
//! The fibration base is collapsed to `η > 0` through `‖f‖`, so the fiber over
//! `η` is the plane curve `{‖f(x)‖ = η} ∩ B_δ(p)`, extracted as the zero set of
//! `g = ‖f‖² - η²` by marching squares. Its closed components are the
//! vanishing cycles; their number `l` is read off an η sweep and accepted when
//! the tail of the sweep agrees.

mod march;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::FiberConfig;
use crate::critfind::CriticalPoint;
use crate::geom::Point;
use crate::polyalg::{Interval, VectorField};

use march::{cell_segments, chain, clip_to_disk, SignGrid};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum MilnorError {
    #[error("Milnor ball radius collapsed to {delta:e} (neighbouring equilibrium or box edge too close)")]
    DeltaCollapse { delta: f64 },
    #[error("‖V - V(p)‖ vanishes on the sphere of radius {delta}; no admissible η")]
    DegenerateSphere { delta: f64 },
    #[error("fiber topology still changing at grid {grid}")]
    GridTooCoarse { grid: usize },
    #[error("fiber at η = {eta} touches the Milnor sphere tangentially")]
    EtaTooLarge { eta: f64 },
    #[error("{0}")]
    InvalidArgument(String),
}

/// One connected component of a fiber.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub vertices: Vec<Point>,
    pub closed: bool,
    /// For arcs: both ends lie on the Milnor sphere.
    pub arc_endpoints_on_sphere: bool,
}

/// The fiber `{‖V - V(p)‖ = η} ∩ B_δ(p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberCurve {
    pub center: Point,
    pub components: Vec<Component>,
    pub eta: f64,
    pub delta: f64,
    /// Cells per side of the grid the curve was traced on.
    pub grid_resolution: usize,
}

impl FiberCurve {
    pub fn cell_size(&self) -> f64 {
        2.0 * self.delta / self.grid_resolution as f64
    }
}

/// `(b0, closed_count)`.
pub fn betti(f: &FiberCurve) -> (usize, usize) {
    (f.components.len(), f.components.iter().filter(|c| c.closed).count())
}

/// Milnor ball radius and η sweep for one equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radii {
    pub delta: f64,
    pub eta_max: f64,
    pub eta_sweep: Vec<f64>,
}

/// A sweep entry that could not be extracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub eta: f64,
    pub error: MilnorError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MilnorData {
    pub point_id: usize,
    pub delta: f64,
    pub eta_sweep: Vec<f64>,
    /// `(closed_count, arc_count)` per η, `None` where extraction failed.
    pub counts_per_eta: Vec<Option<(usize, usize)>>,
    pub failures: Vec<SweepFailure>,
    /// Closed-component count on the stable tail of the sweep.
    pub l: usize,
    pub stable: bool,
    pub submersion_ok: bool,
    pub witness: Option<Point>,
}

/// Picks `δ` and the η sweep for `cp`.
///
/// `δ = min(delta_cap, d/2, b/2)` with `d` the distance to the nearest other
/// equilibrium and `b` the distance to the box edge. `η_max` is half the
/// smallest `‖V - V(p)‖` sampled on the sphere, and the sweep is geometric on
/// `[η_max / sweep_span, η_max]`.
pub fn select_radii(
    v: &VectorField,
    cp: &CriticalPoint,
    all_cps: &[CriticalPoint],
    cfg: &FiberConfig,
) -> Result<Radii, MilnorError> {
    let p = cp.location;
    let mut delta = cfg.delta_cap;
    for other in all_cps.iter().filter(|o| o.id != cp.id) {
        if other.enclosure.overlaps(&cp.enclosure) {
            return Err(MilnorError::DeltaCollapse { delta: 0.0 });
        }
        delta = delta.min(0.5 * other.location.dist(p));
    }
    delta = delta.min(0.5 * v.bounds().distance_to_boundary(p));
    if !(delta >= cfg.min_delta) {
        return Err(MilnorError::DeltaCollapse { delta });
    }
    let v0 = v.eval(p);
    let m = cfg.sphere_samples.max(8);
    let min_norm = (0..m)
        .into_par_iter()
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / m as f64;
            (v.eval(p + Point::from_polar(delta, t)) - v0).norm()
        })
        .reduce(|| f64::INFINITY, f64::min);
    let eta_max = 0.5 * min_norm;
    if !(eta_max > 0.0) || !eta_max.is_finite() {
        return Err(MilnorError::DegenerateSphere { delta });
    }
    let n = cfg.sweep_len.max(1);
    let lo = eta_max / cfg.sweep_span;
    let eta_sweep = (0..n)
        .map(|k| {
            if n == 1 || k == n - 1 {
                eta_max
            } else {
                lo * (eta_max / lo).powf(k as f64 / (n - 1) as f64)
            }
        })
        .collect();
    Ok(Radii {
        delta,
        eta_max,
        eta_sweep,
    })
}

/// `g(x) = ‖V(x) - V(p)‖² - η²`.
fn level_fn(v: &VectorField, v0: Point, eta: f64) -> impl Fn(Point) -> f64 + Sync + '_ {
    let e2 = eta * eta;
    move |x: Point| (v.eval(x) - v0).norm_sq() - e2
}

/// Rejects `η` when the fiber grazes the sphere: `g` has a local minimum of
/// `|g|` on the sphere, below `1e-3·η²`, with no sign change around it.
fn check_tangency(v: &VectorField, p: Point, delta: f64, eta: f64, samples: usize) -> Result<(), MilnorError> {
    let v0 = v.eval(p);
    let g = level_fn(v, v0, eta);
    let vals: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| g(p + Point::from_polar(delta, std::f64::consts::TAU * k as f64 / samples as f64)))
        .collect();
    let tol = 1e-3 * eta * eta;
    for k in 0..samples {
        let a = vals[(k + samples - 1) % samples];
        let b = vals[k];
        let c = vals[(k + 1) % samples];
        let same_sign = (a < 0.0) == (c < 0.0) && a != 0.0 && c != 0.0;
        if same_sign && b.abs() < tol && b.abs() <= a.abs() && b.abs() <= c.abs() {
            return Err(MilnorError::EtaTooLarge { eta });
        }
    }
    Ok(())
}

/// Sub-samples per cell side when hunting for level-set features hidden
/// between grid nodes.
const PROBE: usize = 4;

/// Traces the fiber on one fixed grid. Returns `None` in place of the curve
/// when some cell hides a sign change its corners do not show.
fn trace(v: &VectorField, p: Point, delta: f64, eta: f64, n: usize) -> Option<FiberCurve> {
    let v0 = v.eval(p);
    let g = level_fn(v, v0, eta);
    let grid = SignGrid::sample(p, delta, n, &g);
    let keep = |i: usize, j: usize| grid.cell_distance(i, j, p) <= delta;

    let e2 = eta * eta;
    let (cp, cq) = v.compiled();
    let hidden = (0..n).into_par_iter().any(|j| {
        (0..n).any(|i| {
            if !keep(i, j) {
                return false;
            }
            let corners = [
                grid.value(i, j),
                grid.value(i + 1, j),
                grid.value(i + 1, j + 1),
                grid.value(i, j + 1),
            ];
            let neg = corners[0] < 0.0;
            if corners.iter().any(|&c| (c < 0.0) != neg) {
                return false;
            }
            let bx = grid.cell_box(i, j);
            let fx = cp.enclose(&bx) - v0.x;
            let fy = cq.enclose(&bx) - v0.y;
            let enc: Interval = fx.sqr() + fy.sqr() - e2;
            if !enc.contains_zero() {
                return false;
            }
            let a = grid.node(i, j);
            (0..PROBE).any(|u| {
                (0..PROBE).any(|w| {
                    let q = Point::new(
                        a.x + (u as f64 + 0.5) / PROBE as f64 * grid.step,
                        a.y + (w as f64 + 0.5) / PROBE as f64 * grid.step,
                    );
                    (g(q) < 0.0) != neg
                })
            })
        })
    });
    if hidden {
        return None;
    }

    let centre = |i: usize, j: usize| {
        let a = grid.node(i, j);
        g(Point::new(a.x + 0.5 * grid.step, a.y + 0.5 * grid.step))
    };
    let segments = cell_segments(&grid, keep, centre);
    let on_sphere_tol = 1e-9 * delta.max(1.0);
    let mut components = Vec::new();
    for (line, closed) in chain(&grid, &segments) {
        for (mut vertices, closed) in clip_to_disk(&line, closed, p, delta) {
            if !closed && vertices.len() == 2 {
                // a single chord: add its midpoint so every piece has three
                // vertices
                let mid = vertices[0].lerp(vertices[1], 0.5);
                vertices.insert(1, mid);
            }
            if vertices.len() < 3 {
                continue;
            }
            let ends_on_sphere = !closed
                && [vertices[0], *vertices.last().unwrap()]
                    .iter()
                    .all(|e| (e.dist(p) - delta).abs() <= on_sphere_tol);
            components.push(crate::milnorfiber::Component {
                vertices,
                closed,
                arc_endpoints_on_sphere: ends_on_sphere,
            });
        }
    }
    Some(FiberCurve {
        center: p,
        components,
        eta,
        delta,
        grid_resolution: n,
    })
}

/// Extracts the fiber of `V - V(cp)` over `eta` inside `B_δ(cp)`.
///
/// The grid starts at `grid` cells per side and doubles while some cell hides
/// a feature or until two successive grids agree on `(b0, closed_count)`; the
/// coarser of the agreeing pair is returned. `max_grid` bounds the doubling.
pub fn extract_fiber(
    v: &VectorField,
    cp: &CriticalPoint,
    delta: f64,
    eta: f64,
    grid: usize,
    max_grid: usize,
) -> Result<FiberCurve, MilnorError> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(MilnorError::InvalidArgument(format!("η must be positive, got {eta}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(MilnorError::InvalidArgument(format!("δ must be positive, got {delta}")));
    }
    if grid < 2 {
        return Err(MilnorError::InvalidArgument(format!(
            "grid must be at least 2, got {grid}"
        )));
    }
    let p = cp.location;
    check_tangency(v, p, delta, eta, 8 * grid.max(512))?;
    let max_grid = max_grid.max(grid);
    let mut n = grid;
    let mut prev: Option<FiberCurve> = None;
    loop {
        match trace(v, p, delta, eta, n) {
            None => {
                prev = None;
                if 2 * n > max_grid {
                    return Err(MilnorError::GridTooCoarse { grid: n });
                }
            }
            Some(cur) => {
                if let Some(pr) = prev.take() {
                    if betti(&pr) == betti(&cur) {
                        return Ok(pr);
                    }
                }
                if 2 * n > max_grid {
                    if n == grid {
                        // nothing finer to compare against
                        return Ok(cur);
                    }
                    return Err(MilnorError::GridTooCoarse { grid: n });
                }
                prev = Some(cur);
            }
        }
        n *= 2;
    }
}

/// Samples the η-annulus `{x ∈ B_δ : η_min ≤ ‖V(x) - V(p)‖ ≤ η_max}` on a
/// `grid × grid` lattice and checks `‖∇P‖ > tol` at every sample. Returns the
/// first failing sample in row-major order, if any.
pub fn submersion_check(
    v: &VectorField,
    cp: &CriticalPoint,
    delta: f64,
    eta_sweep: &[f64],
    grid: usize,
    tol: f64,
) -> (bool, Option<Point>) {
    let p = cp.location;
    let v0 = v.eval(p);
    let lo = eta_sweep.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eta_sweep.iter().copied().fold(0.0, f64::max);
    let (cp_, _) = v.compiled();
    let step = 2.0 * delta / grid as f64;
    let witness = (0..=grid).into_par_iter().find_map_first(|j| {
        (0..=grid).find_map(|i| {
            let x = Point::new(p.x - delta + i as f64 * step, p.y - delta + j as f64 * step);
            if x.dist(p) > delta {
                return None;
            }
            let r = (v.eval(x) - v0).norm();
            if r < lo || r > hi {
                return None;
            }
            let (gx, gy) = cp_.gradient(x.x, x.y);
            (gx.hypot(gy) <= tol).then_some(x)
        })
    });
    (witness.is_none(), witness)
}

/// Runs the η sweep at `cp` and reads off `l`.
pub fn vanishing_cycle_count(
    v: &VectorField,
    cp: &CriticalPoint,
    all_cps: &[CriticalPoint],
    cfg: &FiberConfig,
) -> Result<MilnorData, MilnorError> {
    let radii = select_radii(v, cp, all_cps, cfg)?;
    let results: Vec<Result<FiberCurve, MilnorError>> = radii
        .eta_sweep
        .par_iter()
        .map(|&eta| extract_fiber(v, cp, radii.delta, eta, cfg.grid, cfg.max_grid))
        .collect();
    let mut counts = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(f) => {
                let (b0, closed) = betti(&f);
                counts.push(Some((closed, b0 - closed)));
            }
            Err(error) => {
                log::warn!("point {}: fiber at η = {} failed: {error}", cp.id, radii.eta_sweep[k]);
                failures.push(SweepFailure {
                    index: k,
                    eta: radii.eta_sweep[k],
                    error,
                });
                counts.push(None);
            }
        }
    }
    let (l, stable) = stable_count(&counts, cfg.stable_tail);
    let (submersion_ok, witness) = submersion_check(v, cp, radii.delta, &radii.eta_sweep, cfg.grid, cfg.submersion_tol);
    Ok(MilnorData {
        point_id: cp.id,
        delta: radii.delta,
        eta_sweep: radii.eta_sweep,
        counts_per_eta: counts,
        failures,
        l,
        stable,
        submersion_ok,
        witness,
    })
}

/// `(l, stable)`: stable when the last `tail` entries all succeeded with the
/// same closed count; otherwise `l` is the last successful closed count.
fn stable_count(counts: &[Option<(usize, usize)>], tail: usize) -> (usize, bool) {
    let tail = tail.clamp(1, counts.len().max(1));
    let last = counts.iter().rev().flatten().next().map_or(0, |c| c.0);
    if counts.len() < tail {
        return (last, false);
    }
    let suffix = &counts[counts.len() - tail..];
    match suffix[0] {
        Some((c, _)) if suffix.iter().all(|e| matches!(e, Some((d, _)) if *d == c)) => (c, true),
        _ => (last, false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SolveConfig;
    use crate::critfind::find_critical_points;

    fn setup(p: &str, q: &str) -> (VectorField, Vec<CriticalPoint>) {
        let v = VectorField::from_strs(p, q).unwrap();
        let cps = find_critical_points(&v, &SolveConfig::default()).unwrap();
        (v, cps)
    }

    #[test]
    fn radial_radii() {
        let (v, cps) = setup("x", "y");
        let r = select_radii(&v, &cps[0], &cps, &FiberConfig::default()).unwrap();
        assert_eq!(r.delta, 2.5);
        assert!((r.eta_max - 1.25).abs() < 1e-12);
        assert_eq!(r.eta_sweep.len(), 8);
        assert_eq!(*r.eta_sweep.last().unwrap(), r.eta_max);
        assert!((r.eta_sweep[0] - 0.0125).abs() < 1e-12);
    }

    #[test]
    fn neighbours_halve_delta() {
        let (v, cps) = setup("x^2 - 1", "y");
        let r = select_radii(&v, &cps[0], &cps, &FiberConfig::default()).unwrap();
        assert!(r.delta <= 1.0);
    }

    #[test]
    fn unit_circle_fiber() {
        for (p, q) in [("x", "y"), ("-y", "x")] {
            let (v, cps) = setup(p, q);
            let f = extract_fiber(&v, &cps[0], 2.0, 1.0, 256, 2048).unwrap();
            assert_eq!(betti(&f), (1, 1));
            let c = &f.components[0];
            assert_eq!(c.vertices.first(), c.vertices.last());
            for x in &c.vertices {
                assert!((x.norm_sq() - 1.0).abs() <= 1e-3);
            }
        }
    }

    #[test]
    fn index_two_fiber_is_one_circle() {
        let (v, cps) = setup("x^2 - y^2", "2*x*y");
        let f = extract_fiber(&v, &cps[0], 2.0, 0.25, 256, 2048).unwrap();
        assert_eq!(betti(&f), (1, 1));
        for x in &f.components[0].vertices {
            assert!((x.norm() - 0.5).abs() < 1e-2);
        }
    }

    #[test]
    fn betti_counts() {
        let circle = Component {
            vertices: vec![
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(-1.0, 0.0),
                Point::new(1.0, 0.0),
            ],
            closed: true,
            arc_endpoints_on_sphere: false,
        };
        let arc = Component {
            vertices: vec![Point::new(2.0, 0.0), Point::new(0.0, 0.5), Point::new(-2.0, 0.0)],
            closed: false,
            arc_endpoints_on_sphere: true,
        };
        let mut f = FiberCurve {
            center: Point::ORIGIN,
            components: vec![circle.clone()],
            eta: 1.0,
            delta: 2.0,
            grid_resolution: 64,
        };
        assert_eq!(betti(&f), (1, 1));
        f.components.push(arc);
        assert_eq!(betti(&f), (2, 1));
        f.components.clear();
        assert_eq!(betti(&f), (0, 0));
    }

    #[test]
    fn line_fiber_gives_arcs() {
        // V = (x, 0): the fiber ‖V‖ = η is the pair of lines x = ±η
        let v = VectorField::from_strs("x", "0").unwrap();
        let cp = setup("x", "y").1.remove(0);
        let f = extract_fiber(&v, &cp, 2.0, 1.0, 128, 256).unwrap();
        assert_eq!(betti(&f), (2, 0));
        assert!(f.components.iter().all(|c| c.arc_endpoints_on_sphere));
    }

    #[test]
    fn tangent_fiber_is_rejected() {
        // ‖V‖ = |x|; at η = δ the lines x = ±δ graze the sphere
        let v = VectorField::from_strs("x", "0").unwrap();
        let cp = setup("x", "y").1.remove(0);
        assert!(matches!(
            extract_fiber(&v, &cp, 2.0, 2.0, 128, 256),
            Err(MilnorError::EtaTooLarge { .. })
        ));
    }

    #[test]
    fn radial_sweep_is_stable_with_l_one() {
        for (p, q) in [("x", "y"), ("-y", "x")] {
            let (v, cps) = setup(p, q);
            let m = vanishing_cycle_count(&v, &cps[0], &cps, &FiberConfig::default()).unwrap();
            assert!(m.stable);
            assert_eq!(m.l, 1);
            assert!(m.counts_per_eta.iter().all(|c| *c == Some((1, 0))));
            assert!(m.submersion_ok);
        }
    }

    #[test]
    fn stability_rule() {
        let s = |v: &[Option<(usize, usize)>]| stable_count(v, 4);
        assert_eq!(
            s(&[Some((2, 0)), Some((1, 0)), Some((1, 0)), Some((1, 0)), Some((1, 0))]),
            (1, true)
        );
        assert_eq!(s(&[Some((1, 0)), Some((1, 0)), Some((1, 0)), Some((2, 0))]), (2, false));
        assert_eq!(s(&[Some((1, 0)), Some((1, 0)), Some((1, 0)), None]), (1, false));
        assert_eq!(s(&[]), (0, false));
    }

    #[test]
    fn submersion_examples() {
        for (p, q) in [("x", "y"), ("x^2 - y^2", "2*x*y"), ("y", "-x")] {
            let (v, cps) = setup(p, q);
            let r = select_radii(&v, &cps[0], &cps, &FiberConfig::default()).unwrap();
            let (ok, w) = submersion_check(&v, &cps[0], r.delta, &r.eta_sweep, 256, 1e-6);
            assert!(ok, "{p}, {q}: {w:?}");
        }
        // ∇P vanishes everywhere when P = 0
        let cps = setup("x", "y").1;
        let w = VectorField::from_strs("0", "y").unwrap();
        let (ok, wit) = submersion_check(&w, &cps[0], 1.0, &[0.1, 0.5], 64, 1e-6);
        assert!(!ok);
        assert!(wit.is_some());
    }
}
