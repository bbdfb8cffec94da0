//! Isolation and certification of the equilibria of `V` inside its search box.
//!
//! The box is subdivided as a quadtree. A child is discarded when the
//! enclosure of `P` or `Q` excludes zero or when the Krawczyk operator maps it
//! to a disjoint box; a zero is certified (existence and uniqueness) when the
//! Krawczyk image lands strictly inside the tested box. Boxes that reach the
//! resolution limit undecided are clustered and polished separately; that is
//! where degenerate equilibria end up.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::SolveConfig;
use crate::geom::Point;
use crate::polyalg::{IBox, Interval, VectorField};

/// An isolated zero of the vector field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub id: usize,
    pub location: Point,
    /// Box containing this zero and no other. For `certified` points this is
    /// the Krawczyk image; otherwise the hull of the unresolved cluster.
    pub enclosure: IBox,
    /// Existence and uniqueness in `enclosure` proven by the Krawczyk test.
    pub certified: bool,
    /// `[[P_x, P_y], [Q_x, Q_y]]` at `location`.
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    pub nondegenerate: bool,
    /// Poincaré index (winding number of `V` on a small circle).
    pub index: i32,
    /// `‖V(location)‖`.
    pub residual: f64,
    /// Lies on (within rounding of) the edge of the search box.
    pub on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum CritError {
    #[error(
        "subdivision did not terminate at depth {depth} ({active} live boxes near ({:.6}, {:.6})); \
         the zero set is probably not a finite set of points",
        near.x,
        near.y
    )]
    DepthLimitExceeded { depth: u32, active: usize, near: Point },
    #[error("two or more zeros closer than the resolution tolerance inside [{:.6e}, {:.6e}] x [{:.6e}, {:.6e}]", bx.x.lo, bx.x.hi, bx.y.lo, bx.y.hi)]
    AmbiguousCluster { bx: IBox },
}

impl CritError {
    /// Variant name, used as a stable tag in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::DepthLimitExceeded { .. } => "DepthLimitExceeded",
            Self::AmbiguousCluster { .. } => "AmbiguousCluster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("vector field vanishes (‖V‖ = {min_norm:e}) on the sampling circle")]
    ZeroOnCircle { min_norm: f64 },
    #[error("angle increments stayed above π/2 with {samples} samples")]
    StepTooCoarse { samples: usize },
}

/// Outcome of a Krawczyk test on a box.
#[derive(Clone, Copy, Debug)]
enum Krawczyk {
    /// Exactly one zero, contained in the returned image.
    Unique(IBox),
    /// No zero in the box.
    Empty,
    Unknown,
}

fn krawczyk(v: &VectorField, bx: &IBox) -> Krawczyk {
    let (cx, cy) = bx.mid();
    let c = Point::new(cx, cy);
    let j = v.jacobian(c);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det == 0.0 || !det.is_finite() {
        return Krawczyk::Unknown;
    }
    // Y = inverse of the midpoint Jacobian (any nonsingular matrix is valid).
    let y = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
    let (fp, fq) = v.enclose(&IBox::new(Interval::point(cx), Interval::point(cy)));
    let yf0 = fp * y[0][0] + fq * y[0][1];
    let yf1 = fp * y[1][0] + fq * y[1][1];
    let jb = v.jacobian_enclosure(bx);
    let one = Interval::point(1.0);
    let m00 = one - (jb[0][0] * y[0][0] + jb[1][0] * y[0][1]);
    let m01 = -(jb[0][1] * y[0][0] + jb[1][1] * y[0][1]);
    let m10 = -(jb[0][0] * y[1][0] + jb[1][0] * y[1][1]);
    let m11 = one - (jb[0][1] * y[1][0] + jb[1][1] * y[1][1]);
    let dx = bx.x - cx;
    let dy = bx.y - cy;
    let k0 = Interval::point(cx) - yf0 + m00 * dx + m01 * dy;
    let k1 = Interval::point(cy) - yf1 + m10 * dx + m11 * dy;
    if !(k0.lo.is_finite() && k0.hi.is_finite() && k1.lo.is_finite() && k1.hi.is_finite()) {
        return Krawczyk::Unknown;
    }
    let k = IBox::new(k0, k1);
    if k.interior_of(bx) {
        Krawczyk::Unique(k)
    } else if !k.overlaps(bx) {
        Krawczyk::Empty
    } else {
        Krawczyk::Unknown
    }
}

/// Damped (Levenberg–Marquardt) Newton iteration on `V = 0`; returns the
/// iterate with the smallest residual.
pub(crate) fn polish(v: &VectorField, start: Point, max_iter: usize) -> (Point, f64) {
    let mut x = start;
    let mut best = (x, v.eval(x).norm());
    for _ in 0..max_iter {
        let f = v.eval(x);
        if f.norm() == 0.0 {
            return (x, 0.0);
        }
        let j = v.jacobian(x);
        // (J^T J + λ I) d = -J^T f
        let a = j[0][0] * j[0][0] + j[1][0] * j[1][0];
        let b = j[0][0] * j[0][1] + j[1][0] * j[1][1];
        let d = j[0][1] * j[0][1] + j[1][1] * j[1][1];
        let lambda = 1e-16 * (a + d) + f64::MIN_POSITIVE;
        let (a, d) = (a + lambda, d + lambda);
        let g0 = j[0][0] * f.x + j[1][0] * f.y;
        let g1 = j[0][1] * f.x + j[1][1] * f.y;
        let den = a * d - b * b;
        if den == 0.0 || !den.is_finite() {
            break;
        }
        let step = Point::new(-(d * g0 - b * g1) / den, -(a * g1 - b * g0) / den);
        if !step.is_finite() {
            break;
        }
        x += step;
        let r = v.eval(x).norm();
        if r < best.1 {
            best = (x, r);
        }
        if step.norm() <= 1e-16 * (1.0 + x.norm()) {
            break;
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
struct Found {
    location: Point,
    enclosure: IBox,
    /// Box in which uniqueness was proven (contains `enclosure`).
    region: IBox,
    certified: bool,
}

enum Outcome {
    Excluded,
    Found { zero: Found, covers: bool },
    Undecided,
}

/// Newton from the box centre followed by Krawczyk on shrinking boxes
/// around the limit (epsilon inflation).
fn certify_near(v: &VectorField, bx: &IBox, scale: f64) -> Option<Found> {
    let (cx, cy) = bx.mid();
    let (z, _) = polish(v, Point::new(cx, cy), 30);
    let w = bx.width();
    let reach = IBox::centered(cx, cy, w);
    if !z.is_finite() || !reach.contains(z.x, z.y) {
        return None;
    }
    let floor = 1e-13 * (scale + z.norm());
    for r in [w, 0.25 * w, w / 32.0, w / 1024.0, w * 1e-6] {
        let r = r.max(floor);
        let trial = IBox::centered(z.x, z.y, r);
        if let Krawczyk::Unique(k) = krawczyk(v, &trial) {
            return Some(Found {
                location: z,
                enclosure: k,
                region: trial,
                certified: true,
            });
        }
    }
    None
}

fn classify(v: &VectorField, bx: &IBox, try_newton: bool, scale: f64) -> Outcome {
    let (ip, iq) = v.enclose(bx);
    if !ip.contains_zero() || !iq.contains_zero() {
        return Outcome::Excluded;
    }
    match krawczyk(v, bx) {
        Krawczyk::Empty => return Outcome::Excluded,
        Krawczyk::Unique(k) => {
            let (cx, cy) = k.mid();
            let (z, _) = polish(v, Point::new(cx, cy), 30);
            let location = if k.contains(z.x, z.y) { z } else { Point::new(cx, cy) };
            return Outcome::Found {
                zero: Found {
                    location,
                    enclosure: k,
                    region: *bx,
                    certified: true,
                },
                covers: true,
            };
        }
        Krawczyk::Unknown => {}
    }
    if try_newton {
        if let Some(zero) = certify_near(v, bx, scale) {
            let covers = bx.subset_of(&zero.region);
            return Outcome::Found { zero, covers };
        }
    }
    Outcome::Undecided
}

fn is_known(found: &[Found], p: Point, tol: f64) -> bool {
    found
        .iter()
        .any(|f| f.region.contains(p.x, p.y) || f.location.dist(p) <= tol)
}

/// Finds every zero of `V` in its search box.
///
/// The result is sorted by `(x, y)` and ids follow that order.
pub fn find_critical_points(v: &VectorField, cfg: &SolveConfig) -> Result<Vec<CriticalPoint>, CritError> {
    let search = v.bounds();
    let scale = search.scale();
    let margin = 1e-9 * scale;
    let b = search.to_ibox();
    let root = IBox::from_bounds(b.x.lo - margin, b.x.hi + margin, b.y.lo - margin, b.y.hi + margin);
    let newton_width = root.width() / 64.0;
    let dedup = 1e-12 * scale;

    let mut found: Vec<Found> = Vec::new();
    let mut unresolved: Vec<IBox> = Vec::new();
    let mut level = vec![root];
    let mut depth = 0;
    while !level.is_empty() {
        if depth > cfg.max_depth || level.len() > cfg.max_active_boxes {
            let (mx, my) = level[level.len() / 2].mid();
            return Err(CritError::DepthLimitExceeded {
                depth,
                active: level.len(),
                near: Point::new(mx, my),
            });
        }
        let outcomes: Vec<Outcome> = level
            .par_iter()
            .map(|bx| classify(v, bx, bx.width() <= newton_width, scale))
            .collect();
        let mut next = Vec::new();
        for (bx, outcome) in level.iter().zip(outcomes) {
            let split = match outcome {
                Outcome::Excluded => false,
                Outcome::Found { zero, covers } => {
                    if root.contains(zero.location.x, zero.location.y) && !is_known(&found, zero.location, dedup) {
                        found.push(zero);
                    }
                    !covers
                }
                Outcome::Undecided => true,
            };
            if !split {
                continue;
            }
            if bx.width() < cfg.resolution_tol {
                if matches!(outcome, Outcome::Undecided) {
                    unresolved.push(*bx);
                }
                continue;
            }
            next.extend(
                bx.quadrisect()
                    .into_iter()
                    .filter(|c| !found.iter().any(|f| c.subset_of(&f.region))),
            );
        }
        level = next;
        depth += 1;
    }

    resolve_clusters(v, cfg, &root, &mut found, unresolved, scale, dedup)?;
    separate_enclosures(v, &mut found);

    let mut points: Vec<CriticalPoint> = found.iter().map(|f| describe(v, cfg, f, search, margin)).collect();
    points.sort_by(|a, b| {
        a.location
            .x
            .total_cmp(&b.location.x)
            .then(a.location.y.total_cmp(&b.location.y))
    });
    for (id, p) in points.iter_mut().enumerate() {
        p.id = id;
    }
    assign_indices(v, &mut points, scale);
    Ok(points)
}

fn describe(
    v: &VectorField,
    cfg: &SolveConfig,
    f: &Found,
    search: &crate::polyalg::SearchBox,
    margin: f64,
) -> CriticalPoint {
    let jacobian = v.jacobian(f.location);
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    CriticalPoint {
        id: 0,
        location: f.location,
        enclosure: f.enclosure,
        certified: f.certified,
        jacobian,
        det,
        nondegenerate: det.abs() > cfg.degeneracy_tol,
        index: 0,
        residual: v.eval(f.location).norm(),
        on_boundary: search.distance_to_boundary(f.location) <= 2.0 * margin || !search.contains(f.location),
    }
}

fn resolve_clusters(
    v: &VectorField,
    cfg: &SolveConfig,
    root: &IBox,
    found: &mut Vec<Found>,
    unresolved: Vec<IBox>,
    scale: f64,
    dedup: f64,
) -> Result<(), CritError> {
    if unresolved.is_empty() {
        return Ok(());
    }
    let clusters = cluster_boxes(&unresolved, 1e-12 * scale);
    let max_extent = 1000.0 * cfg.resolution_tol;
    for hull in clusters {
        let (hx, hy) = hull.mid();
        if hull.width() > max_extent {
            return Err(CritError::DepthLimitExceeded {
                depth: cfg.max_depth,
                active: unresolved.len(),
                near: Point::new(hx, hy),
            });
        }
        let (z, residual) = polish(v, Point::new(hx, hy), 400);
        if residual > cfg.residual_tol || !root.contains(z.x, z.y) {
            log::debug!("dropping unresolved cluster {hull:?}: residual {residual:e}");
            continue;
        }
        if is_known(found, z, dedup) {
            continue;
        }
        if v.jacobian_det_at(z).abs() > cfg.degeneracy_tol {
            // A regular zero that the subdivision could not isolate: either two
            // zeros are closer than the resolution or certification is hopeless.
            match certify_near(v, &IBox::centered(z.x, z.y, hull.width()), scale) {
                Some(f) if !is_known(found, f.location, dedup) => found.push(f),
                Some(_) => {}
                None => return Err(CritError::AmbiguousCluster { bx: hull }),
            }
            continue;
        }
        let enclosure = IBox::new(hull.x.hull(Interval::point(z.x)), hull.y.hull(Interval::point(z.y)));
        found.push(Found {
            location: z,
            enclosure,
            region: enclosure,
            certified: false,
        });
    }
    Ok(())
}

/// Groups touching boxes; returns the hull of each group.
fn cluster_boxes(boxes: &[IBox], slack: f64) -> Vec<IBox> {
    let n = boxes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if boxes[i].touches(&boxes[j], slack) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut hulls: Vec<(usize, IBox)> = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        let r = root(&mut parent, i);
        match hulls.iter_mut().find(|(k, _)| *k == r) {
            Some((_, h)) => *h = IBox::new(h.x.hull(b.x), h.y.hull(b.y)),
            None => hulls.push((r, *b)),
        }
    }
    hulls.into_iter().map(|(_, h)| h).collect()
}

/// Shrinks overlapping enclosures of distinct zeros until they are disjoint.
fn separate_enclosures(v: &VectorField, found: &mut [Found]) {
    for _ in 0..8 {
        let mut changed = false;
        for i in 0..found.len() {
            for j in i + 1..found.len() {
                if !found[i].enclosure.overlaps(&found[j].enclosure) {
                    continue;
                }
                let r = found[i].location.dist(found[j].location) / 4.0;
                for k in [i, j] {
                    let z = found[k].location;
                    let trial = IBox::centered(z.x, z.y, r);
                    if let Krawczyk::Unique(kb) = krawczyk(v, &trial) {
                        found[k].enclosure = kb;
                        found[k].region = trial;
                    } else {
                        found[k].enclosure = IBox::centered(z.x, z.y, r * 0.5);
                    }
                }
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

fn assign_indices(v: &VectorField, points: &mut [CriticalPoint], scale: f64) {
    let locs: Vec<Point> = points.iter().map(|p| p.location).collect();
    for p in points.iter_mut() {
        let nearest = locs
            .iter()
            .filter(|&&q| q != p.location)
            .map(|q| q.dist(p.location))
            .fold(f64::INFINITY, f64::min);
        let mut radius = (0.4 * nearest).min(0.05 * scale);
        let mut index = None;
        for _ in 0..20 {
            match poincare_index(v, p.location, radius, 64) {
                Ok(i) => {
                    index = Some(i);
                    break;
                }
                Err(_) => radius *= 0.5,
            }
        }
        p.index = index.unwrap_or(if p.nondegenerate { p.det.signum() as i32 } else { 0 });
    }
}

/// Winding number of `t ↦ V(center + radius (cos t, sin t))` about the origin.
///
/// Sampling starts at `samples` (at least 64) and doubles until every angle
/// increment is below π/2.
pub fn poincare_index(v: &VectorField, center: Point, radius: f64, samples: usize) -> Result<i32, IndexError> {
    // Relative to the largest sample: a zero on the circle leaves a value at
    // rounding level while the others stay O(1).
    const ZERO_TOL: f64 = 1e-12;
    const MAX_DOUBLINGS: u32 = 14;
    let mut n = samples.max(64);
    for _ in 0..=MAX_DOUBLINGS {
        let vals: Vec<Point> = (0..n)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / n as f64;
                v.eval(center + Point::from_polar(radius, t))
            })
            .collect();
        let min_norm = vals.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        let max_norm = vals.iter().map(|p| p.norm()).fold(0.0, f64::max);
        if !(min_norm > ZERO_TOL * max_norm) {
            return Err(IndexError::ZeroOnCircle { min_norm });
        }
        let mut total = 0.0;
        let mut coarse = false;
        for k in 0..n {
            let a = vals[k];
            let b = vals[(k + 1) % n];
            let d = a.cross(b).atan2(a.dot(b));
            if d.abs() >= std::f64::consts::FRAC_PI_2 {
                coarse = true;
                break;
            }
            total += d;
        }
        if !coarse {
            return Ok((total / std::f64::consts::TAU).round() as i32);
        }
        n *= 2;
    }
    Err(IndexError::StepTooCoarse { samples: n })
}

/// `|det ∇V(p)| > tol`.
pub fn is_nondegenerate(v: &VectorField, p: Point, tol: f64) -> bool {
    v.jacobian_det_at(p).abs() > tol
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(p: &str, q: &str) -> VectorField {
        VectorField::from_strs(p, q).unwrap()
    }

    fn solve(p: &str, q: &str) -> Vec<CriticalPoint> {
        find_critical_points(&field(p, q), &SolveConfig::default()).unwrap()
    }

    #[test]
    fn linear_source() {
        let cps = solve("x", "y");
        assert_eq!(cps.len(), 1);
        assert!(cps[0].location.norm() < 1e-12);
        assert!(cps[0].nondegenerate && cps[0].certified);
        assert_eq!(cps[0].index, 1);
    }

    #[test]
    fn fold_pair() {
        let cps = solve("x^2 - 1", "y");
        assert_eq!(cps.len(), 2);
        assert!((cps[0].location.x + 1.0).abs() < 1e-12);
        assert!((cps[1].location.x - 1.0).abs() < 1e-12);
        assert_eq!((cps[0].index, cps[1].index), (-1, 1));
        assert_eq!((cps[0].id, cps[1].id), (0, 1));
        assert!(!cps[0].enclosure.overlaps(&cps[1].enclosure));
    }

    #[test]
    fn van_der_pol_has_one_equilibrium() {
        let cps = solve("y", "(1 - x^2)*y - x");
        assert_eq!(cps.len(), 1);
        assert!(cps[0].location.norm() < 1e-12);
        assert!(cps[0].residual <= 1e-12);
    }

    #[test]
    fn degenerate_zero_is_kept_and_flagged() {
        let cps = solve("x^2", "y");
        assert_eq!(cps.len(), 1);
        assert!(!cps[0].nondegenerate);
        assert!(!cps[0].certified);
        assert!(cps[0].residual <= 1e-12);
        assert_eq!(cps[0].index, 0);
    }

    #[test]
    fn zero_curve_is_rejected() {
        let err = find_critical_points(&field("x", "0"), &SolveConfig::default()).unwrap_err();
        assert!(matches!(err, CritError::DepthLimitExceeded { .. }));
    }

    #[test]
    fn no_zero_in_box() {
        assert!(solve("x^2 + 1", "y").is_empty());
    }

    #[test]
    fn boundary_zero_is_flagged() {
        let cps = solve("x - 5", "y");
        assert_eq!(cps.len(), 1);
        assert!(cps[0].on_boundary);
    }

    #[test]
    fn index_examples() {
        let v = field("x", "y");
        assert_eq!(poincare_index(&v, Point::ORIGIN, 1.0, 64).unwrap(), 1);
        let v = field("x", "-y");
        assert_eq!(poincare_index(&v, Point::ORIGIN, 1.0, 64).unwrap(), -1);
        let v = field("x^2 - y^2", "2*x*y");
        assert_eq!(poincare_index(&v, Point::ORIGIN, 1.0, 64).unwrap(), 2);
        let v = field("x", "y");
        assert!(matches!(
            poincare_index(&v, Point::new(1.0, 0.0), 1.0, 64),
            Err(IndexError::ZeroOnCircle { .. })
        ));
    }

    #[test]
    fn index_two_by_brute_force_angle_sum() {
        // Independent check of the adaptive routine: fixed 10^4 samples.
        let v = field("x^2 - y^2", "2*x*y");
        let n = 10_000;
        let mut total = 0.0;
        for k in 0..n {
            let a = v.eval(Point::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64));
            let b = v.eval(Point::from_polar(
                1.0,
                std::f64::consts::TAU * (k + 1) as f64 / n as f64,
            ));
            total += a.cross(b).atan2(a.dot(b));
        }
        assert_eq!((total / std::f64::consts::TAU).round() as i32, 2);
    }

    #[test]
    fn nondegeneracy() {
        let tol = SolveConfig::default().degeneracy_tol;
        assert!(is_nondegenerate(&field("x", "y"), Point::ORIGIN, tol));
        assert!(!is_nondegenerate(&field("x^2", "y"), Point::ORIGIN, tol));
        assert!(is_nondegenerate(&field("y", "(1 - x^2)*y - x"), Point::ORIGIN, tol));
    }
}
