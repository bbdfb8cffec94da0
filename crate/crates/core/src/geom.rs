//! Small planar geometry helpers shared by every stage of the pipeline.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A point (or vector) in the plane. Serialized as a two-element array.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        Self::new(r * theta.cos(), r * theta.sin())
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by a quarter turn.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point, t: f64) -> Point {
        self + (other - self) * t
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Point {
    fn from(a: [f64; 2]) -> Self {
        Point::new(a[0], a[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        <[f64; 2]>::deserialize(d).map(Point::from)
    }
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_dist(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Distance from `p` to a polyline.
pub fn point_polyline_dist(p: Point, line: &[Point]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [a] => p.dist(*a),
        _ => line
            .windows(2)
            .map(|w| point_segment_dist(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Symmetric Hausdorff distance between two polylines, measured from each
/// vertex set to the other polyline's segments.
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    let one_way = |from: &[Point], to: &[Point]| from.iter().map(|&p| point_polyline_dist(p, to)).fold(0.0, f64::max);
    one_way(a, b).max(one_way(b, a))
}

/// Winding number of a closed polyline around `center`, by accumulating the
/// signed angle swept between consecutive vertices. The polyline is treated as
/// closed whether or not its last vertex repeats the first.
pub fn winding_number(line: &[Point], center: Point) -> i32 {
    if line.len() < 2 {
        return 0;
    }
    let mut total = 0.0;
    let n = line.len();
    for k in 0..n {
        let a = line[k] - center;
        let b = line[(k + 1) % n] - center;
        total += a.cross(b).atan2(a.dot(b));
    }
    (total / std::f64::consts::TAU).round() as i32
}

/// Centroid of the vertices (closing duplicate excluded when present).
pub fn vertex_centroid(line: &[Point]) -> Point {
    let pts = open_vertices(line);
    if pts.is_empty() {
        return Point::ORIGIN;
    }
    let mut c = Point::ORIGIN;
    for &p in pts {
        c += p;
    }
    c * (1.0 / pts.len() as f64)
}

/// Drops the repeated closing vertex of a closed polyline, if present.
pub fn open_vertices(line: &[Point]) -> &[Point] {
    match line {
        [first, .., last] if first == last => &line[..line.len() - 1],
        _ => line,
    }
}
