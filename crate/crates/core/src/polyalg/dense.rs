//! Float-coefficient compiled forms of [`Poly2`] for fast evaluation.

use num_rational::BigRational;

use super::interval::{IBox, Interval};
use super::poly::{rational_from_f64, rational_to_f64, Poly2, Var};

/// Dense float image of a polynomial, evaluated by nested Horner.
///
/// `rows[i][j]` is the (rounded) coefficient of `x^i y^j`. The exact
/// coefficients are kept as one-ulp enclosures for interval evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DensePoly {
    rows: Vec<Vec<f64>>,
    enclosures: Vec<(u32, u32, Interval)>,
    degree: i32,
}

impl DensePoly {
    pub fn from_poly(p: &Poly2) -> Self {
        let max_i = p.terms().map(|(m, _)| m.i).max().unwrap_or(0) as usize;
        let max_j = p.terms().map(|(m, _)| m.j).max().unwrap_or(0) as usize;
        let mut rows = vec![vec![0.0; max_j + 1]; max_i + 1];
        let mut enclosures = Vec::with_capacity(p.num_terms());
        for (m, c) in p.terms() {
            let f = rational_to_f64(c);
            rows[m.i as usize][m.j as usize] = f;
            enclosures.push((m.i, m.j, coefficient_enclosure(c, f)));
        }
        if p.is_zero() {
            rows.clear();
        }
        Self {
            rows,
            enclosures,
            degree: p.degree(),
        }
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for row in self.rows.iter().rev() {
            let mut inner = 0.0;
            for &c in row.iter().rev() {
                inner = inner * y + c;
            }
            acc = acc * x + inner;
        }
        acc
    }

    /// Value together with an a-priori bound on its absolute rounding error,
    /// `gamma(2d + 2) * sum |c_ij| |x|^i |y|^j` (Horner's standard bound,
    /// with the coefficient rounding folded in).
    pub fn eval_with_bound(&self, x: f64, y: f64) -> (f64, f64) {
        let value = self.eval(x, y);
        let (ax, ay) = (x.abs(), y.abs());
        let mut mag = 0.0;
        for row in self.rows.iter().rev() {
            let mut inner = 0.0;
            for &c in row.iter().rev() {
                inner = inner * ay + c.abs();
            }
            mag = mag * ax + inner;
        }
        let k = (2 * self.degree.max(0) + 2) as f64;
        let u = f64::EPSILON / 2.0;
        let gamma = k * u / (1.0 - k * u);
        (value, gamma * mag)
    }

    /// Natural interval extension, term by term with exact even powers.
    pub fn eval_interval(&self, bx: &IBox) -> Interval {
        let mut acc = Interval::point(0.0);
        for &(i, j, c) in &self.enclosures {
            acc = acc + c * bx.x.powi(i) * bx.y.powi(j);
        }
        acc
    }
}

fn coefficient_enclosure(c: &BigRational, f: f64) -> Interval {
    if rational_from_f64(f) == *c {
        Interval::point(f)
    } else {
        Interval::around(f)
    }
}

/// A polynomial with its two first partials compiled alongside, which gives
/// a mean-value enclosure tighter than the natural one on small boxes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompiledPoly {
    pub value: DensePoly,
    pub dx: DensePoly,
    pub dy: DensePoly,
}

impl CompiledPoly {
    pub fn new(p: &Poly2) -> Self {
        Self {
            value: DensePoly::from_poly(p),
            dx: DensePoly::from_poly(&p.partial(Var::X1)),
            dy: DensePoly::from_poly(&p.partial(Var::X2)),
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.value.eval(x, y)
    }

    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (self.dx.eval(x, y), self.dy.eval(x, y))
    }

    /// Range enclosure over `bx`: the natural extension intersected with the
    /// mean-value form `p(c) + p_x(B)(x - c_x) + p_y(B)(y - c_y)`.
    pub fn enclose(&self, bx: &IBox) -> Interval {
        let natural = self.value.eval_interval(bx);
        let (cx, cy) = bx.mid();
        let at_center = self
            .value
            .eval_interval(&IBox::new(Interval::point(cx), Interval::point(cy)));
        let centered = at_center + self.dx.eval_interval(bx) * (bx.x - cx) + self.dy.eval_interval(bx) * (bx.y - cy);
        // Both are enclosures, so they always intersect unless rounding
        // misbehaves; fall back to the natural one.
        natural.intersect(centered).unwrap_or(natural)
    }
}

/// Interval enclosure of `p` over `bx`.
pub fn interval_eval(p: &Poly2, bx: &IBox) -> Interval {
    CompiledPoly::new(p).enclose(bx)
}
