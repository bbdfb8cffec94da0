//! Marching squares on a uniform grid over the bounding square of a disk,
//! followed by clipping of the traced polylines to the disk.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::geom::Point;
use crate::polyalg::{IBox, Interval};

/// Node values of a scalar function on an `n × n`-cell grid over
/// `[cx - r, cx + r] × [cy - r, cy + r]`.
pub(crate) struct SignGrid {
    pub n: usize,
    pub origin: Point,
    pub step: f64,
    /// Row-major, `(n + 1)²` values; row `j` holds `y = origin.y + j·step`.
    pub values: Vec<f64>,
}

impl SignGrid {
    pub fn sample<F>(center: Point, radius: f64, n: usize, g: &F) -> Self
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let origin = Point::new(center.x - radius, center.y - radius);
        let step = 2.0 * radius / n as f64;
        let values: Vec<f64> = (0..=n)
            .into_par_iter()
            .flat_map_iter(|j| {
                let y = origin.y + j as f64 * step;
                (0..=n).map(move |i| g(Point::new(origin.x + i as f64 * step, y)))
            })
            .collect();
        Self {
            n,
            origin,
            step,
            values,
        }
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + i as f64 * self.step,
            self.origin.y + j as f64 * self.step,
        )
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    pub fn cell_box(&self, i: usize, j: usize) -> IBox {
        let a = self.node(i, j);
        let b = self.node(i + 1, j + 1);
        IBox::new(Interval::new(a.x, b.x), Interval::new(a.y, b.y))
    }

    /// Smallest distance from `c` to the closed cell `(i, j)`.
    pub fn cell_distance(&self, i: usize, j: usize, c: Point) -> f64 {
        let a = self.node(i, j);
        let b = self.node(i + 1, j + 1);
        let dx = (a.x - c.x).max(0.0).max(c.x - b.x);
        let dy = (a.y - c.y).max(0.0).max(c.y - b.y);
        dx.hypot(dy)
    }
}

fn negative(g: f64) -> bool {
    g < 0.0
}

/// Key of a grid edge: horizontal edges from node `(i, j)` to `(i + 1, j)`
/// are even, vertical ones from `(i, j)` to `(i, j + 1)` are odd.
fn hkey(grid: &SignGrid, i: usize, j: usize) -> u64 {
    2 * (j * (grid.n + 1) + i) as u64
}

fn vkey(grid: &SignGrid, i: usize, j: usize) -> u64 {
    2 * (j * (grid.n + 1) + i) as u64 + 1
}

fn crossing_point(grid: &SignGrid, key: u64) -> Point {
    let node = (key / 2) as usize;
    let (i, j) = (node % (grid.n + 1), node / (grid.n + 1));
    let (i1, j1) = if key.is_multiple_of(2) { (i + 1, j) } else { (i, j + 1) };
    let g0 = grid.value(i, j);
    let g1 = grid.value(i1, j1);
    let t = (g0 / (g0 - g1)).clamp(0.0, 1.0);
    grid.node(i, j).lerp(grid.node(i1, j1), t)
}

/// Level-set segments of every cell accepted by `keep`, as pairs of edge
/// keys. `center_value` resolves saddle cells.
pub(crate) fn cell_segments<K, C>(grid: &SignGrid, keep: K, center_value: C) -> Vec<(u64, u64)>
where
    K: Fn(usize, usize) -> bool + Sync,
    C: Fn(usize, usize) -> f64 + Sync,
{
    let n = grid.n;
    (0..n)
        .into_par_iter()
        .flat_map_iter(|j| {
            let keep = &keep;
            let center_value = &center_value;
            (0..n).flat_map(move |i| {
                let mut out: Vec<(u64, u64)> = Vec::new();
                if !keep(i, j) {
                    return out;
                }
                let bl = negative(grid.value(i, j));
                let br = negative(grid.value(i + 1, j));
                let tr = negative(grid.value(i + 1, j + 1));
                let tl = negative(grid.value(i, j + 1));
                let bottom = hkey(grid, i, j);
                let right = vkey(grid, i + 1, j);
                let top = hkey(grid, i, j + 1);
                let left = vkey(grid, i, j);
                let mut crossed = Vec::with_capacity(4);
                if bl != br {
                    crossed.push(bottom);
                }
                if br != tr {
                    crossed.push(right);
                }
                if tr != tl {
                    crossed.push(top);
                }
                if tl != bl {
                    crossed.push(left);
                }
                match crossed.len() {
                    2 => out.push((crossed[0], crossed[1])),
                    4 => {
                        if negative(center_value(i, j)) == bl {
                            // bl and tr joined through the centre
                            out.push((bottom, right));
                            out.push((top, left));
                        } else {
                            out.push((left, bottom));
                            out.push((right, top));
                        }
                    }
                    _ => {}
                }
                out
            })
        })
        .collect()
}

/// Traces segments into maximal polylines. Returns `(vertices, closed)`;
/// closed polylines repeat their first vertex at the end.
pub(crate) fn chain(grid: &SignGrid, segments: &[(u64, u64)]) -> Vec<(Vec<Point>, bool)> {
    let mut incident: HashMap<u64, Vec<usize>> = HashMap::with_capacity(2 * segments.len());
    for (s, &(a, b)) in segments.iter().enumerate() {
        incident.entry(a).or_default().push(s);
        incident.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut out = Vec::new();

    let walk = |start_seg: usize, start_key: u64, used: &mut Vec<bool>| -> (Vec<u64>, bool) {
        let mut keys = vec![start_key];
        let mut seg = start_seg;
        let mut key = start_key;
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            key = if a == key { b } else { a };
            keys.push(key);
            if key == start_key {
                return (keys, true);
            }
            match incident[&key].iter().find(|&&s| !used[s]) {
                Some(&next) => seg = next,
                None => return (keys, false),
            }
        }
    };

    // open chains start at keys with a single incident segment
    for (s, &(a, b)) in segments.iter().enumerate() {
        if used[s] {
            continue;
        }
        for k in [a, b] {
            if incident[&k].len() == 1 && !used[s] {
                let (keys, _) = walk(s, k, &mut used);
                out.push((keys, false));
            }
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let (keys, closed) = walk(s, segments[s].0, &mut used);
            out.push((keys, closed));
        }
    }
    out.into_iter()
        .map(|(keys, closed)| (keys.iter().map(|&k| crossing_point(grid, k)).collect(), closed))
        .collect()
}

/// Parameter `t ∈ [0, 1]` where the segment `a → b` meets the circle, `a`
/// and `b` being on opposite sides.
fn circle_hit(a: Point, b: Point, c: Point, r: f64) -> Point {
    let d = b - a;
    let f = a - c;
    let qa = d.norm_sq();
    let qb = 2.0 * f.dot(d);
    let qc = f.norm_sq() - r * r;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    let t1 = (-qb - disc) / (2.0 * qa);
    let t2 = (-qb + disc) / (2.0 * qa);
    let t = if (0.0..=1.0).contains(&t1) && !(0.0..=1.0).contains(&t2) {
        t1
    } else if (0.0..=1.0).contains(&t2) && !(0.0..=1.0).contains(&t1) {
        t2
    } else if qc > 0.0 {
        // a outside: first hit
        t1.clamp(0.0, 1.0)
    } else {
        t2.clamp(0.0, 1.0)
    };
    a.lerp(b, t)
}

/// A clipped piece: vertices and whether it is a closed loop.
pub(crate) type Piece = (Vec<Point>, bool);

/// Clips a traced polyline to the closed disk `|x - c| ≤ r`. Closed loops
/// that stay inside are kept whole; everything else becomes arcs whose ends
/// lie where the polyline crosses the circle.
pub(crate) fn clip_to_disk(line: &[Point], closed: bool, c: Point, r: f64) -> Vec<Piece> {
    let inside = |p: Point| p.dist(c) <= r;
    if line.iter().all(|&p| inside(p)) {
        return vec![(line.to_vec(), closed)];
    }
    // For loops, start at an outside vertex so no run wraps around.
    let pts: Vec<Point> = if closed {
        let body = &line[..line.len() - 1];
        let k = body.iter().position(|&p| !inside(p)).unwrap();
        body[k..]
            .iter()
            .chain(body[..k].iter())
            .chain(std::iter::once(&body[k]))
            .copied()
            .collect()
    } else {
        line.to_vec()
    };
    let mut out = Vec::new();
    let mut run: Vec<Point> = Vec::new();
    for w in 0..pts.len() {
        let p = pts[w];
        if inside(p) {
            if run.is_empty() && w > 0 {
                run.push(circle_hit(pts[w - 1], p, c, r));
            }
            run.push(p);
        } else if !run.is_empty() {
            run.push(circle_hit(*run.last().unwrap(), p, c, r));
            out.push((std::mem::take(&mut run), false));
        }
    }
    if !run.is_empty() {
        out.push((run, false));
    }
    out
}
