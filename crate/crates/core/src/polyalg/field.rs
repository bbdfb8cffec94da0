use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::dense::CompiledPoly;
use super::interval::{IBox, Interval};
use super::parse::{parse_poly, render_number};
use super::poly::{jacobian_det, rational_to_f64, AffineMap, Poly2};
use crate::geom::Point;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("vector field has P = Q = 0")]
    ZeroField,
    #[error("search box must have positive width and height")]
    DegenerateBox,
}

/// Axis-aligned search rectangle `[x0, x1] × [y0, y1]` with exact corners.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchBox {
    pub x0: BigRational,
    pub x1: BigRational,
    pub y0: BigRational,
    pub y1: BigRational,
}

impl Default for SearchBox {
    /// `[-5, 5] × [-5, 5]`.
    fn default() -> Self {
        let five = BigRational::from_integer(BigInt::from(5));
        Self {
            x0: -five.clone(),
            x1: five.clone(),
            y0: -five.clone(),
            y1: five,
        }
    }
}

impl SearchBox {
    pub fn new(x0: BigRational, x1: BigRational, y0: BigRational, y1: BigRational) -> Result<Self, FieldError> {
        if x1 <= x0 || y1 <= y0 {
            return Err(FieldError::DegenerateBox);
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    pub fn from_f64(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self, FieldError> {
        use super::poly::rational_from_f64 as q;
        Self::new(q(x0), q(x1), q(y0), q(y1))
    }

    /// Corner coordinates as floats: `(x0, x1, y0, y1)`.
    pub fn bounds_f64(&self) -> (f64, f64, f64, f64) {
        (
            rational_to_f64(&self.x0),
            rational_to_f64(&self.x1),
            rational_to_f64(&self.y0),
            rational_to_f64(&self.y1),
        )
    }

    pub fn to_ibox(&self) -> IBox {
        let (x0, x1, y0, y1) = self.bounds_f64();
        IBox::from_bounds(x0, x1, y0, y1)
    }

    pub fn center(&self) -> Point {
        let (x0, x1, y0, y1) = self.bounds_f64();
        Point::new(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }

    /// Half the length of the diagonal; the natural length scale of a system.
    pub fn scale(&self) -> f64 {
        let (x0, x1, y0, y1) = self.bounds_f64();
        0.5 * (x1 - x0).hypot(y1 - y0)
    }

    pub fn contains(&self, p: Point) -> bool {
        let (x0, x1, y0, y1) = self.bounds_f64();
        (x0..=x1).contains(&p.x) && (y0..=y1).contains(&p.y)
    }

    /// Distance from an interior point to the nearest edge (0 outside).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let (x0, x1, y0, y1) = self.bounds_f64();
        (p.x - x0).min(x1 - p.x).min(p.y - y0).min(y1 - p.y).max(0.0)
    }

    /// The box scaled by `factor` about its centre.
    pub fn inflated(&self, factor: f64) -> IBox {
        let (x0, x1, y0, y1) = self.bounds_f64();
        let c = self.center();
        let hx = 0.5 * (x1 - x0) * factor;
        let hy = 0.5 * (y1 - y0) * factor;
        IBox::from_bounds(c.x - hx, c.x + hx, c.y - hy, c.y + hy)
    }

    fn render(&self) -> String {
        format!(
            "[{}, {}] x [{}, {}]",
            render_number(&self.x0),
            render_number(&self.x1),
            render_number(&self.y0),
            render_number(&self.y1)
        )
    }
}

/// A planar polynomial system `x' = P(x, y)`, `y' = Q(x, y)` together with the
/// rectangle in which its equilibria and cycles are sought.
///
/// Float-compiled forms of `P`, `Q` and their partials are built once at
/// construction and used by every numerical stage.
#[derive(Clone, Debug)]
pub struct VectorField {
    name: Option<String>,
    p: Poly2,
    q: Poly2,
    bounds: SearchBox,
    cp: CompiledPoly,
    cq: CompiledPoly,
}

impl PartialEq for VectorField {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.p == other.p && self.q == other.q && self.bounds == other.bounds
    }
}

impl VectorField {
    pub fn new(p: Poly2, q: Poly2, bounds: SearchBox) -> Result<Self, FieldError> {
        if p.is_zero() && q.is_zero() {
            return Err(FieldError::ZeroField);
        }
        let cp = CompiledPoly::new(&p);
        let cq = CompiledPoly::new(&q);
        Ok(Self {
            name: None,
            p,
            q,
            bounds,
            cp,
            cq,
        })
    }

    /// Parses `P` and `Q` from expression strings, default box.
    pub fn from_strs(p: &str, q: &str) -> Result<Self, super::ParseError> {
        let p = parse_poly(p)?;
        let q = parse_poly(q)?;
        Self::new(p, q, SearchBox::default()).map_err(|e| super::ParseError {
            line: 1,
            column: 1,
            kind: e.into(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_bounds(mut self, bounds: SearchBox) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn p(&self) -> &Poly2 {
        &self.p
    }

    pub fn q(&self) -> &Poly2 {
        &self.q
    }

    pub fn bounds(&self) -> &SearchBox {
        &self.bounds
    }

    pub fn compiled(&self) -> (&CompiledPoly, &CompiledPoly) {
        (&self.cp, &self.cq)
    }

    #[inline]
    pub fn eval(&self, pt: Point) -> Point {
        Point::new(self.cp.eval(pt.x, pt.y), self.cq.eval(pt.x, pt.y))
    }

    /// `[[P_x, P_y], [Q_x, Q_y]]` at a point.
    pub fn jacobian(&self, pt: Point) -> [[f64; 2]; 2] {
        let (px, py) = self.cp.gradient(pt.x, pt.y);
        let (qx, qy) = self.cq.gradient(pt.x, pt.y);
        [[px, py], [qx, qy]]
    }

    pub fn jacobian_det_at(&self, pt: Point) -> f64 {
        let j = self.jacobian(pt);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Exact determinant polynomial `P_x Q_y - P_y Q_x`.
    pub fn jacobian_det(&self) -> Poly2 {
        jacobian_det(&self.p, &self.q)
    }

    /// Enclosures of `(P, Q)` over a box.
    pub fn enclose(&self, bx: &IBox) -> (Interval, Interval) {
        (self.cp.enclose(bx), self.cq.enclose(bx))
    }

    /// Interval Jacobian over a box.
    pub fn jacobian_enclosure(&self, bx: &IBox) -> [[Interval; 2]; 2] {
        [
            [self.cp.dx.eval_interval(bx), self.cp.dy.eval_interval(bx)],
            [self.cq.dx.eval_interval(bx), self.cq.dy.eval_interval(bx)],
        ]
    }

    /// `cV` for an exact scalar `c`.
    pub fn scaled(&self, c: &BigRational) -> Result<Self, FieldError> {
        let mut out = Self::new(self.p.scale(c), self.q.scale(c), self.bounds.clone())?;
        out.name = self.name.clone();
        Ok(out)
    }

    /// `-V`: the same phase portrait traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut out = Self::new(-&self.p, -&self.q, self.bounds.clone()).expect("negation preserves nonzero fields");
        out.name = self.name.clone();
        out
    }

    /// `V + W` on the same box.
    pub fn plus(&self, p: &Poly2, q: &Poly2) -> Result<Self, FieldError> {
        let mut out = Self::new(&self.p + p, &self.q + q, self.bounds.clone())?;
        out.name = self.name.clone();
        Ok(out)
    }

    /// The system in coordinates `u = x - c`: `u' = V(u + c)`, box shifted by `-c`.
    pub fn translated(&self, cx: &BigRational, cy: &BigRational) -> Self {
        let map = AffineMap::translation(cx.clone(), cy.clone());
        let bounds = SearchBox {
            x0: &self.bounds.x0 - cx,
            x1: &self.bounds.x1 - cx,
            y0: &self.bounds.y0 - cy,
            y1: &self.bounds.y1 - cy,
        };
        let mut out = Self::new(self.p.compose_affine(&map), self.q.compose_affine(&map), bounds)
            .expect("translation preserves nonzero fields");
        out.name = self.name.clone();
        out
    }

    /// The system in rotated coordinates `x = R u` with `R = [[c, -s], [s, c]]`
    /// (`c^2 + s^2 = 1` exactly): `u' = R^T V(R u)`. The new box is the
    /// bounding box of the rotated old one.
    pub fn rotated(&self, c: &BigRational, s: &BigRational) -> Result<Self, FieldError> {
        if &(c * c) + &(s * s) != BigRational::one() {
            return Err(FieldError::DegenerateBox);
        }
        let map = AffineMap::linear([[c.clone(), -s.clone()], [s.clone(), c.clone()]]);
        let pr = self.p.compose_affine(&map);
        let qr = self.q.compose_affine(&map);
        let p_new = &pr.scale(c) + &qr.scale(s);
        let q_new = &qr.scale(c) - &pr.scale(s);
        // u = R^T x for each corner
        let b = &self.bounds;
        let corners = [(&b.x0, &b.y0), (&b.x0, &b.y1), (&b.x1, &b.y0), (&b.x1, &b.y1)];
        let mapped: Vec<(BigRational, BigRational)> = corners
            .iter()
            .map(|(x, y)| (c * *x + s * *y, c * *y - s * *x))
            .collect();
        let min = |f: fn(&(BigRational, BigRational)) -> &BigRational| {
            mapped.iter().map(f).min().cloned().unwrap_or_else(BigRational::zero)
        };
        let max = |f: fn(&(BigRational, BigRational)) -> &BigRational| {
            mapped.iter().map(f).max().cloned().unwrap_or_else(BigRational::zero)
        };
        let bounds = SearchBox::new(min(|m| &m.0), max(|m| &m.0), min(|m| &m.1), max(|m| &m.1))?;
        let mut out = Self::new(p_new, q_new, bounds)?;
        out.name = self.name.clone();
        Ok(out)
    }

    /// Renders the system in `.vf` file syntax.
    pub fn to_vf_string(&self) -> String {
        let mut s = String::new();
        if let Some(n) = &self.name {
            s.push_str(&format!("name = {n}\n"));
        }
        s.push_str(&format!("P = {}\n", self.p.render()));
        s.push_str(&format!("Q = {}\n", self.q.render()));
        s.push_str(&format!("box = {}\n", self.bounds.render()));
        s
    }
}

#[derive(Serialize, Deserialize)]
struct FieldRepr {
    name: Option<String>,
    p: String,
    q: String,
    #[serde(rename = "box")]
    bounds: String,
}

impl Serialize for VectorField {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FieldRepr {
            name: self.name.clone(),
            p: self.p.render(),
            q: self.q.render(),
            bounds: self.bounds.render(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VectorField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = FieldRepr::deserialize(d)?;
        let mut src = format!("P = {}\nQ = {}\nbox = {}\n", r.p, r.q, r.bounds);
        if let Some(n) = &r.name {
            src.push_str(&format!("name = {n}\n"));
        }
        super::parse_vector_field(&src).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn eval_and_jacobian() {
        let v = VectorField::from_strs("y", "(1 - x^2)*y - x").unwrap();
        assert_eq!(v.eval(Point::new(2.0, 1.0)), Point::new(1.0, -5.0));
        assert_eq!(v.jacobian(Point::ORIGIN), [[0.0, 1.0], [-1.0, 1.0]]);
        assert_eq!(v.jacobian_det_at(Point::ORIGIN), 1.0);
    }

    #[test]
    fn translation_shifts_zeros() {
        let v = VectorField::from_strs("x^2 - 1", "y").unwrap();
        let t = v.translated(&r(1, 2), &r(0, 1));
        // zeros of V(u + 1/2) are at u = -3/2 and u = 1/2
        assert_eq!(t.eval(Point::new(-1.5, 0.0)), Point::ORIGIN);
        assert_eq!(t.eval(Point::new(0.5, 0.0)), Point::ORIGIN);
        assert_eq!(t.bounds().x0, r(-11, 2));
    }

    #[test]
    fn rotation_conjugates_field() {
        let v = VectorField::from_strs("x^2 - 1", "y").unwrap();
        let (c, s) = (r(3, 5), r(4, 5));
        let w = v.rotated(&c, &s).unwrap();
        // u = R^T (1, 0) = (3/5, -4/5) is a zero of the rotated field
        let z = w.eval(Point::new(0.6, -0.8));
        assert!(z.norm() < 1e-15);
        assert!(v.rotated(&r(1, 2), &r(1, 2)).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let v = VectorField::from_strs("-y + x*(1 - x^2 - y^2)", "x + y/3")
            .unwrap()
            .with_name("demo");
        let s = serde_json::to_string(&v).unwrap();
        let back: VectorField = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn zero_field_rejected() {
        assert_eq!(
            VectorField::new(Poly2::zero(), Poly2::zero(), SearchBox::default()).unwrap_err(),
            FieldError::ZeroField
        );
    }
}
