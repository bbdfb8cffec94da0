//! Outward-rounded interval arithmetic, just enough for polynomial range
//! enclosure and Krawczyk tests.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Closed interval `[lo, hi]`. Every arithmetic result is widened by one ulp
/// on each side, which covers the half-ulp error of round-to-nearest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// One-ulp enclosure around a possibly rounded value.
    pub fn around(v: f64) -> Self {
        Self::new(v.next_down(), v.next_up())
    }

    fn outward(lo: f64, hi: f64) -> Self {
        Self::new(lo.next_down(), hi.next_up())
    }

    pub fn width(self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn mag(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn contains(self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_zero(self) -> bool {
        self.contains(0.0)
    }

    /// `self` lies strictly inside `other`.
    pub fn interior_of(self, other: Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn subset_of(self, other: Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn intersect(self, other: Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(self, other: Interval) -> Interval {
        Interval::new(self.lo.min(other.lo), self.hi.max(other.hi))
    }

    pub fn sqr(self) -> Interval {
        self.powi(2)
    }

    pub fn powi(self, n: u32) -> Interval {
        match n {
            0 => Interval::point(1.0),
            1 => self,
            _ => {
                let a = pow_up(self.lo.abs(), n);
                let b = pow_up(self.hi.abs(), n);
                if n.is_multiple_of(2) {
                    let top = a.max(b);
                    let bottom = if self.contains_zero() {
                        0.0
                    } else {
                        pow_down(self.lo.abs().min(self.hi.abs()), n)
                    };
                    Interval::new(bottom, top)
                } else {
                    // odd powers are monotone
                    let lo = signed_pow(self.lo, n, false);
                    let hi = signed_pow(self.hi, n, true);
                    Interval::new(lo, hi)
                }
            }
        }
    }
}

// Repeated multiplication accumulates at most n-1 roundings; widen by n ulps.
fn pow_up(v: f64, n: u32) -> f64 {
    let mut r = v.powi(n as i32);
    for _ in 0..n {
        r = r.next_up();
    }
    r
}

fn pow_down(v: f64, n: u32) -> f64 {
    let mut r = v.powi(n as i32);
    for _ in 0..n {
        r = r.next_down();
    }
    r.max(0.0)
}

fn signed_pow(v: f64, n: u32, up: bool) -> f64 {
    let m = v.abs();
    let widened = if (v >= 0.0) == up { pow_up(m, n) } else { pow_down(m, n) };
    if v < 0.0 {
        -widened
    } else {
        widened
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval::outward(self.lo + o.lo, self.hi + o.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, o: Interval) -> Interval {
        Interval::outward(self.lo - o.hi, self.hi - o.lo)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, o: Interval) -> Interval {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::outward(lo, hi)
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, o: f64) -> Interval {
        self + Interval::point(o)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, o: f64) -> Interval {
        self - Interval::point(o)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, o: f64) -> Interval {
        self * Interval::point(o)
    }
}

/// Axis-aligned box `x × y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IBox {
    pub x: Interval,
    pub y: Interval,
}

impl IBox {
    pub fn new(x: Interval, y: Interval) -> Self {
        Self { x, y }
    }

    pub fn from_bounds(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self::new(Interval::new(x0, x1), Interval::new(y0, y1))
    }

    /// Square box of half-width `r` centred on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, r: f64) -> Self {
        Self::from_bounds(cx - r, cx + r, cy - r, cy + r)
    }

    pub fn width(&self) -> f64 {
        self.x.width().max(self.y.width())
    }

    pub fn mid(&self) -> (f64, f64) {
        (self.x.mid(), self.y.mid())
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        self.x.contains(px) && self.y.contains(py)
    }

    pub fn subset_of(&self, other: &IBox) -> bool {
        self.x.subset_of(other.x) && self.y.subset_of(other.y)
    }

    pub fn interior_of(&self, other: &IBox) -> bool {
        self.x.interior_of(other.x) && self.y.interior_of(other.y)
    }

    pub fn intersect(&self, other: &IBox) -> Option<IBox> {
        Some(IBox::new(self.x.intersect(other.x)?, self.y.intersect(other.y)?))
    }

    pub fn overlaps(&self, other: &IBox) -> bool {
        self.intersect(other).is_some()
    }

    /// Splits into four children at a point slightly off the midpoint, so that
    /// zeros sitting at dyadic rationals do not land on every split line.
    pub fn quadrisect(&self) -> [IBox; 4] {
        const RATIO: f64 = 0.487_153_73;
        let sx = self.x.lo + RATIO * self.x.width();
        let sy = self.y.lo + RATIO * self.y.width();
        let xl = Interval::new(self.x.lo, sx);
        let xr = Interval::new(sx, self.x.hi);
        let yl = Interval::new(self.y.lo, sy);
        let yr = Interval::new(sy, self.y.hi);
        [
            IBox::new(xl, yl),
            IBox::new(xr, yl),
            IBox::new(xl, yr),
            IBox::new(xr, yr),
        ]
    }

    /// Boxes touching or overlapping (closed boxes intersect).
    pub fn touches(&self, other: &IBox, slack: f64) -> bool {
        self.x.lo <= other.x.hi + slack
            && other.x.lo <= self.x.hi + slack
            && self.y.lo <= other.y.hi + slack
            && other.y.lo <= self.y.hi + slack
    }
}
