use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exponent pair of a monomial `x^i * y^j`.
///
/// Ordered graded-lexicographically on `(i + j, i)`, which is the canonical
/// term order for rendering and hashing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub i: u32,
    pub j: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { i: 0, j: 0 };

    pub const fn new(i: u32, j: u32) -> Self {
        Self { i, j }
    }

    pub fn degree(self) -> u32 {
        self.i + self.j
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.degree(), self.i).cmp(&(other.degree(), other.i))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Which coordinate a partial derivative is taken along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
}

/// Exact bivariate polynomial with rational coefficients.
///
/// No stored coefficient is ever zero, so structural equality is polynomial
/// equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly2 {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::monomial(c, Monomial::ONE)
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(BigRational::from_integer(BigInt::from(c)))
    }

    /// Exact rational image of a float (every finite `f64` is a dyadic rational).
    pub fn from_f64(c: f64) -> Self {
        Self::constant(rational_from_f64(c))
    }

    pub fn monomial(c: BigRational, m: Monomial) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn x() -> Self {
        Self::monomial(BigRational::one(), Monomial::new(1, 0))
    }

    pub fn y() -> Self {
        Self::monomial(BigRational::one(), Monomial::new(0, 1))
    }

    /// Builds a polynomial from `(i, j, coefficient)` triples, summing repeats.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, BigRational)>,
    {
        let mut p = Self::zero();
        for (i, j, c) in terms {
            p.add_term(Monomial::new(i, j), c);
        }
        p
    }

    /// Integer-coefficient convenience constructor.
    pub fn from_int_terms(terms: &[(u32, u32, i64)]) -> Self {
        Self::from_terms(
            terms
                .iter()
                .map(|&(i, j, c)| (i, j, BigRational::from_integer(c.into()))),
        )
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i32 {
        self.terms.keys().map(|m| m.degree() as i32).max().unwrap_or(-1)
    }

    pub fn coeff(&self, i: u32, j: u32) -> BigRational {
        self.terms
            .get(&Monomial::new(i, j))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Terms in ascending canonical order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (Monomial, &BigRational)> {
        self.terms.iter().map(|(m, c)| (*m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// The constant polynomial's value, if this polynomial is constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.degree() {
            -1 => Some(BigRational::zero()),
            0 => Some(self.coeff(0, 0)),
            _ => None,
        }
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, c)| (*m, c * s)).collect(),
        }
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::from_int(1);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact formal partial derivative.
    pub fn partial(&self, var: Var) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let (k, dm) = match var {
                Var::X1 if m.i > 0 => (m.i, Monomial::new(m.i - 1, m.j)),
                Var::X2 if m.j > 0 => (m.j, Monomial::new(m.i, m.j - 1)),
                _ => continue,
            };
            out.add_term(dm, c * BigRational::from_integer(k.into()));
        }
        out
    }

    /// Substitutes `x -> a11 x + a12 y + b1`, `y -> a21 x + a22 y + b2`.
    pub fn compose_affine(&self, map: &AffineMap) -> Self {
        let xs = Self::from_terms([
            (1, 0, map.a[0][0].clone()),
            (0, 1, map.a[0][1].clone()),
            (0, 0, map.b[0].clone()),
        ]);
        let ys = Self::from_terms([
            (1, 0, map.a[1][0].clone()),
            (0, 1, map.a[1][1].clone()),
            (0, 0, map.b[1].clone()),
        ]);
        let max_i = self.terms.keys().map(|m| m.i).max().unwrap_or(0);
        let max_j = self.terms.keys().map(|m| m.j).max().unwrap_or(0);
        let xpow = powers(&xs, max_i);
        let ypow = powers(&ys, max_j);
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let term = (&xpow[m.i as usize] * &ypow[m.j as usize]).scale(c);
            out = &out + &term;
        }
        out
    }

    /// Float evaluation at a point (Horner in `x` over rows in `y`).
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        super::DensePoly::from_poly(self).eval(x, y)
    }

    /// Canonical rendering: descending graded-lex order, explicit `*` and
    /// `^`, rationals written `p/q`.
    pub fn render(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let a = c.abs();
            let mono = render_monomial(*m);
            if mono.is_empty() {
                out.push_str(&render_rational(&a));
            } else if a.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&render_rational(&a));
                out.push('*');
                out.push_str(&mono);
            }
        }
        out
    }
}

fn powers(p: &Poly2, n: u32) -> Vec<Poly2> {
    let mut v = Vec::with_capacity(n as usize + 1);
    v.push(Poly2::from_int(1));
    for k in 1..=n as usize {
        let next = &v[k - 1] * p;
        v.push(next);
    }
    v
}

fn render_monomial(m: Monomial) -> String {
    let part = |name: &str, e: u32| match e {
        0 => None,
        1 => Some(name.to_string()),
        _ => Some(format!("{name}^{e}")),
    };
    [part("x", m.i), part("y", m.j)]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>()
        .join("*")
}

pub(crate) fn render_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact conversion of a finite float to a rational.
pub fn rational_from_f64(c: f64) -> BigRational {
    BigRational::from_float(c).unwrap_or_else(BigRational::zero)
}

/// Nearest float to a rational (may round).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 gives up on very large numerators; fall back to a
        // split conversion.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, c.clone());
        }
        out
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, -c.clone());
        }
        out
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(Monomial::new(ma.i + mb.i, ma.j + mb.j), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        Poly2 {
            terms: self.terms.iter().map(|(m, c)| (*m, -c.clone())).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $f:ident) => {
        impl $tr for Poly2 {
            type Output = Poly2;
            fn $f(self, rhs: Poly2) -> Poly2 {
                (&self).$f(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        -&self
    }
}

/// Exact affine map `v -> A v + b` of the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    pub a: [[BigRational; 2]; 2],
    pub b: [BigRational; 2],
}

impl AffineMap {
    pub fn identity() -> Self {
        let (z, o) = (BigRational::zero(), BigRational::one());
        Self {
            a: [[o.clone(), z.clone()], [z.clone(), o]],
            b: [z.clone(), z],
        }
    }

    pub fn translation(bx: BigRational, by: BigRational) -> Self {
        Self {
            b: [bx, by],
            ..Self::identity()
        }
    }

    /// Linear map with the given matrix, no offset.
    pub fn linear(a: [[BigRational; 2]; 2]) -> Self {
        Self {
            a,
            b: [BigRational::zero(), BigRational::zero()],
        }
    }
}

/// `P_x Q_y - P_y Q_x`, the determinant of the Jacobian of `(P, Q)`.
pub fn jacobian_det(p: &Poly2, q: &Poly2) -> Poly2 {
    let px = p.partial(Var::X1);
    let py = p.partial(Var::X2);
    let qx = q.partial(Var::X1);
    let qy = q.partial(Var::X2);
    &(&px * &qy) - &(&py * &qx)
}
