//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use milnor_cycles::polyalg::{load_vector_field, rational_to_f64, Poly2, SearchBox};
use milnor_cycles::{Point, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(format!("{name}.vf"))
}

pub fn corpus(name: &str) -> VectorField {
    load_vector_field(&corpus_path(name)).unwrap()
}

pub const CORPUS: [&str; 9] = [
    "cubic-one-cycle",
    "van-der-pol",
    "linear-center",
    "two-cycle",
    "radial-source",
    "fold-pair",
    "degenerate-fold",
    "zero-curve",
    "index-two",
];

pub fn field(p: &str, q: &str) -> VectorField {
    VectorField::from_strs(p, q).unwrap()
}

pub fn field_in(p: &str, q: &str, half: f64) -> VectorField {
    field(p, q).with_bounds(SearchBox::from_f64(-half, half, -half, half).unwrap())
}

/// Float coefficients of `p`, evaluated term by term (no Horner, no compiled
/// form) so it shares nothing with the library's evaluators.
pub struct NaivePoly(Vec<(i32, i32, f64)>);

impl NaivePoly {
    pub fn new(p: &Poly2) -> Self {
        Self(
            p.terms()
                .map(|(m, c)| (m.i as i32, m.j as i32, rational_to_f64(c)))
                .collect(),
        )
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.0.iter().map(|&(i, j, c)| c * x.powi(i) * y.powi(j)).sum()
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }
}

/// Flood-fill count of `{‖V - V(p)‖ = η} ∩ B_δ(p)` on an `n × n` sign grid
/// over the bounding square of the disk. Nodes of equal sign inside the disk
/// are joined along grid edges, and across a saddle cell along the diagonal
/// whose sign the cell centre shares. Each curve component separates two
/// regions, so `b0 = regions - 1`, and each closed component has exactly one
/// inner region that never reaches the sphere. Returns `(closed, b0)`.
pub fn flood_fill_counts(v: &VectorField, p: Point, delta: f64, eta: f64, n: usize) -> (usize, usize) {
    let (np, nq) = (NaivePoly::new(v.p()), NaivePoly::new(v.q()));
    let (p0, q0) = (np.eval(p.x, p.y), nq.eval(p.x, p.y));
    let g = |x: f64, y: f64| {
        let a = np.eval(x, y) - p0;
        let b = nq.eval(x, y) - q0;
        a * a + b * b - eta * eta
    };
    let h = 2.0 * delta / n as f64;
    let coord = |i: usize, j: usize| (p.x - delta + i as f64 * h, p.y - delta + j as f64 * h);
    let w = n + 1;
    let idx = |i: usize, j: usize| j * w + i;
    let mut neg = vec![false; w * w];
    let mut inside = vec![false; w * w];
    for j in 0..w {
        for i in 0..w {
            let (x, y) = coord(i, j);
            inside[idx(i, j)] = (x - p.x).hypot(y - p.y) <= delta;
            neg[idx(i, j)] = g(x, y) < 0.0;
        }
    }
    let mut uf = UnionFind((0..w * w).collect());
    for j in 0..w {
        for i in 0..w {
            let a = idx(i, j);
            if !inside[a] {
                continue;
            }
            if i + 1 < w && inside[a + 1] && neg[a] == neg[a + 1] {
                uf.union(a, a + 1);
            }
            if j + 1 < w && inside[a + w] && neg[a] == neg[a + w] {
                uf.union(a, a + w);
            }
        }
    }
    for j in 0..n {
        for i in 0..n {
            let (bl, br, tr, tl) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            if ![bl, br, tr, tl].iter().all(|&k| inside[k]) {
                continue;
            }
            let saddle = neg[bl] == neg[tr] && neg[br] == neg[tl] && neg[bl] != neg[br];
            if !saddle {
                continue;
            }
            let (x, y) = coord(i, j);
            let centre_neg = g(x + 0.5 * h, y + 0.5 * h) < 0.0;
            if centre_neg == neg[bl] {
                uf.union(bl, tr);
            } else {
                uf.union(br, tl);
            }
        }
    }
    let mut touches = std::collections::HashMap::<usize, bool>::new();
    for j in 0..w {
        for i in 0..w {
            let a = idx(i, j);
            if !inside[a] {
                continue;
            }
            let on_rim = i == 0
                || j == 0
                || i == n
                || j == n
                || !inside[a - 1]
                || !inside[a + 1]
                || !inside[a - w]
                || !inside[a + w];
            let r = uf.find(a);
            *touches.entry(r).or_insert(false) |= on_rim;
        }
    }
    let regions = touches.len();
    let closed = touches.values().filter(|&&t| !t).count();
    (closed, regions.saturating_sub(1))
}

/// Seeded random field of degree ≤ 4 with a nondegenerate linear part at
/// the origin and small higher-order terms, on `[-1, 1]²`.
pub fn random_field(seed: u64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = |rng: &mut ChaCha8Rng| {
        let mut terms = Vec::new();
        for d in 1..=4u32 {
            for i in 0..=d {
                let c: i64 = if d == 1 {
                    rng.gen_range(-4..=4)
                } else {
                    rng.gen_range(-3..=3)
                };
                if c != 0 {
                    terms.push((i, d - i, c));
                }
            }
        }
        Poly2::from_int_terms(&terms)
    };
    loop {
        let p = comp(&mut rng);
        let q = comp(&mut rng);
        let det = rational_to_f64(&p.coeff(1, 0)) * rational_to_f64(&q.coeff(0, 1))
            - rational_to_f64(&p.coeff(0, 1)) * rational_to_f64(&q.coeff(1, 0));
        if det.abs() >= 1.0 {
            return VectorField::new(p, q, SearchBox::from_f64(-1.0, 1.0, -1.0, 1.0).unwrap()).unwrap();
        }
    }
}

fn naive_field(v: &VectorField) -> impl Fn([f64; 2]) -> [f64; 2] {
    let (np, nq) = (NaivePoly::new(v.p()), NaivePoly::new(v.q()));
    move |s: [f64; 2]| [np.eval(s[0], s[1]), nq.eval(s[0], s[1])]
}

fn rk4<const N: usize>(f: &impl Fn([f64; N]) -> [f64; N], s: [f64; N], h: f64) -> [f64; N] {
    let add = |a: [f64; N], b: [f64; N], c: f64| std::array::from_fn(|i| a[i] + c * b[i]);
    let k1 = f(s);
    let k2 = f(add(s, k1, h / 2.0));
    let k3 = f(add(s, k2, h / 2.0));
    let k4 = f(add(s, k3, h));
    std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Fixed-step classical RK4 run of `V` from `x0`. Returns the times at
/// which the orbit crosses `y = 0` downward with `x > 0`; each crossing is
/// located by RK4 substeps with `y` as the independent variable
/// (`dx/dy = P/Q`, `dt/dy = 1/Q`), so no interpolation error enters.
pub fn rk4_downward_crossings(v: &VectorField, x0: Point, h: f64, t_end: f64) -> Vec<f64> {
    let f = naive_field(v);
    let g = |s: [f64; 3]| {
        let [p, q] = f([s[0], s[1]]);
        [p / q, 1.0, 1.0 / q]
    };
    let mut s = [x0.x, x0.y];
    let mut t = 0.0;
    let mut out = Vec::new();
    while t < t_end {
        let next = rk4(&f, s, h);
        if s[1] > 0.0 && next[1] <= 0.0 && s[0] > 0.0 {
            let mut z = [s[0], s[1], t];
            let sub = 8;
            let dy = -s[1] / sub as f64;
            for _ in 0..sub {
                z = rk4(&g, z, dy);
            }
            out.push(z[2]);
        }
        s = next;
        t += h;
    }
    out
}

/// Fixed-step RK4 endpoint of `V` from `x0` over `[0, t]`.
pub fn rk4_endpoint(v: &VectorField, x0: Point, t: f64, steps: usize) -> Point {
    let f = naive_field(v);
    let h = t / steps as f64;
    let mut s = [x0.x, x0.y];
    for _ in 0..steps {
        s = rk4(&f, s, h);
    }
    Point::new(s[0], s[1])
}

/// Van der Pol (μ = 1) period from the RK4 oracle at step `1e-3` after a
/// transient of 100 time units.
pub fn van_der_pol_period_oracle(v: &VectorField) -> f64 {
    let ts = rk4_downward_crossings(v, Point::new(2.0, 0.0), 1e-3, 160.0);
    let late: Vec<f64> = ts.into_iter().filter(|&t| t > 100.0).collect();
    let periods: Vec<f64> = late.windows(2).map(|w| w[1] - w[0]).collect();
    let spread = periods.iter().fold(0.0_f64, |m, &p| m.max((p - periods[0]).abs()));
    assert!(
        periods.len() >= 3 && spread < 1e-9,
        "oracle did not settle: {periods:?}"
    );
    periods.iter().sum::<f64>() / periods.len() as f64
}
