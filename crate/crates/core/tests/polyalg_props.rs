use milnor_cycles::polyalg::{interval_eval, jacobian_det, parse_poly, IBox, Interval, Poly2, Var};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

/// Sparse polynomial of total degree ≤ `deg` with coefficients `n/d`,
/// `n ∈ [-10, 10]`, `d ∈ [1, 6]`.
fn poly(deg: u32, max_terms: usize) -> impl Strategy<Value = Poly2> {
    prop::collection::vec((0..=deg, 0..=deg, -10i64..=10, 1i64..=6), 0..=max_terms).prop_map(move |terms| {
        Poly2::from_terms(
            terms
                .into_iter()
                .filter(|t| t.0 + t.1 <= deg)
                .map(|(i, j, n, d)| (i, j, BigRational::new(BigInt::from(n), BigInt::from(d)))),
        )
    })
}

fn unit() -> impl Strategy<Value = f64> {
    -1.0..1.0f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn render_parse_round_trip(p in poly(8, 12)) {
        prop_assert_eq!(parse_poly(&p.render()).unwrap(), p);
    }

    #[test]
    fn mixed_partials_commute(p in poly(8, 12)) {
        prop_assert_eq!(
            p.partial(Var::X1).partial(Var::X2),
            p.partial(Var::X2).partial(Var::X1)
        );
    }

    #[test]
    fn partial_matches_central_difference(p in poly(6, 12), x in unit(), y in unit()) {
        let h = 1e-5;
        for (var, (dx, dy)) in [(Var::X1, (h, 0.0)), (Var::X2, (0.0, h))] {
            let exact = p.partial(var).eval(x, y);
            let fd = (p.eval(x + dx, y + dy) - p.eval(x - dx, y - dy)) / (2.0 * h);
            prop_assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "{var:?}: fd {fd} vs exact {exact}"
            );
        }
    }

    #[test]
    fn interval_eval_encloses_samples(
        p in poly(6, 12),
        (x0, y0) in (-2.0..2.0f64, -2.0..2.0f64),
        (w, h) in (0.0..1.0f64, 0.0..1.0f64),
        (s, t) in (0.0..=1.0f64, 0.0..=1.0f64),
    ) {
        let bx = IBox::new(Interval::new(x0, x0 + w), Interval::new(y0, y0 + h));
        let (x, y) = ((x0 + s * w).min(x0 + w), (y0 + t * h).min(y0 + h));
        let r = interval_eval(&p, &bx);
        let v = p.eval(x, y);
        prop_assert!(r.contains(v), "{v} outside [{}, {}]", r.lo, r.hi);
    }

    #[test]
    fn jacobian_det_is_antisymmetric(p in poly(5, 10), q in poly(5, 10)) {
        prop_assert_eq!(jacobian_det(&q, &p), -jacobian_det(&p, &q));
    }
}
