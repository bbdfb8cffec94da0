mod common;

use common::{corpus, field_in, CORPUS};
use milnor_cycles::config::SolveConfig;
use milnor_cycles::critfind::{find_critical_points, poincare_index, CritError};
use milnor_cycles::polyalg::{rational_to_f64, Poly2, SearchBox};
use milnor_cycles::{Point, VectorField};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn lin(a: &BigRational, b: &BigRational, c: &BigRational) -> Poly2 {
    // a·x + b·y + c
    &(&Poly2::x() * &Poly2::constant(a.clone()) + &Poly2::y() * &Poly2::constant(b.clone()))
        + &Poly2::constant(c.clone())
}

/// Systems built from linear and quadratic factors, with their zero sets in
/// closed form. Parameters avoid the box boundary.
fn factored(seed: u64) -> (VectorField, Vec<Point>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |lo: i64, hi: i64| q(rng.gen_range(lo..=hi), 10);
    let one = q(1, 1);
    let zero = q(0, 1);
    let f = rational_to_f64;
    let (p, qq, zeros) = match seed % 3 {
        0 => {
            // (x - a)(x - b), (y - c)(y - d)
            let (a, b, c, d) = (pick(-15, -1), pick(1, 15), pick(-15, -1), pick(1, 15));
            let p = &lin(&one, &zero, &-a.clone()) * &lin(&one, &zero, &-b.clone());
            let qq = &lin(&zero, &one, &-c.clone()) * &lin(&zero, &one, &-d.clone());
            let zs = [(&a, &c), (&a, &d), (&b, &c), (&b, &d)]
                .map(|(x, y)| Point::new(f(x), f(y)))
                .to_vec();
            (p, qq, zs)
        }
        1 => {
            // (x - a)(y - c), x + y - a - d with d ≠ c
            let (a, c) = (pick(-10, 5), pick(-5, 0));
            let d = pick(1, 5);
            let p = &lin(&one, &zero, &-a.clone()) * &lin(&zero, &one, &-c.clone());
            let qq = lin(&one, &one, &-(&a + &d));
            let zs = vec![Point::new(f(&a), f(&d)), Point::new(f(&(&a + &d - &c)), f(&c))];
            (p, qq, zs)
        }
        _ => {
            // x² + y² - r², y - m·x: the circle meets the line twice
            let r = pick(3, 15);
            let m = pick(-20, 20);
            let p = &(&(&Poly2::x() * &Poly2::x()) + &(&Poly2::y() * &Poly2::y())) - &Poly2::constant(&r * &r);
            let qq = lin(&-m.clone(), &one, &zero);
            let (rf, mf) = (f(&r), f(&m));
            let x = rf / (1.0 + mf * mf).sqrt();
            let zs = vec![Point::new(x, mf * x), Point::new(-x, -mf * x)];
            (p, qq, zs)
        }
    };
    let bx = SearchBox::from_f64(-2.0, 2.0, -2.0, 2.0).unwrap();
    (VectorField::new(p, qq, bx).unwrap(), zeros)
}

#[test]
fn finds_exactly_the_analytic_zeros() {
    for seed in 0..20 {
        let (v, zeros) = factored(seed);
        let found = find_critical_points(&v, &SolveConfig::default()).unwrap();
        assert_eq!(found.len(), zeros.len(), "seed {seed}: {found:?}");
        for z in &zeros {
            let hits = found.iter().filter(|c| c.location.dist(*z) < 1e-9).count();
            assert_eq!(hits, 1, "seed {seed}: zero {z:?}");
        }
        assert!(found.iter().all(|c| c.certified));
    }
}

#[test]
fn index_is_sign_of_jacobian() {
    let mut checked = 0;
    let fields = (0..20).map(|s| factored(s).0).chain(CORPUS.iter().map(|n| corpus(n)));
    for v in fields {
        let Ok(found) = find_critical_points(&v, &SolveConfig::default()) else {
            continue;
        };
        for c in found.iter().filter(|c| c.nondegenerate) {
            assert_eq!(c.index, c.det.signum() as i32, "{c:?}");
            let r = 1e-3 * (1.0 + c.location.norm());
            assert_eq!(poincare_index(&v, c.location, r, 256).unwrap(), c.index);
            checked += 1;
        }
    }
    assert!(checked >= 50);
}

#[test]
fn translation_moves_the_zeros() {
    for seed in 0..20 {
        let (v, _) = factored(seed);
        let (cx, cy) = (q(3, 7), q(-2, 9));
        let w = v.translated(&cx, &cy);
        let a = find_critical_points(&v, &SolveConfig::default()).unwrap();
        let b = find_critical_points(&w, &SolveConfig::default()).unwrap();
        assert_eq!(a.len(), b.len());
        let shift = Point::new(rational_to_f64(&cx), rational_to_f64(&cy));
        for c in &a {
            let moved = c.location - shift;
            assert!(b.iter().any(|d| d.location.dist(moved) < 1e-9), "seed {seed}");
        }
    }
}

#[test]
fn enclosures_are_disjoint() {
    for seed in 0..20 {
        let (v, _) = factored(seed);
        let found = find_critical_points(&v, &SolveConfig::default()).unwrap();
        for (i, a) in found.iter().enumerate() {
            assert!(a.enclosure.contains(a.location.x, a.location.y));
            for b in &found[i + 1..] {
                assert!(!a.enclosure.overlaps(&b.enclosure), "seed {seed}");
            }
        }
    }
}

#[test]
fn fold_pair_rows_are_ordered_by_x() {
    let found = find_critical_points(&field_in("x^2 - 1", "y", 3.0), &SolveConfig::default()).unwrap();
    let rows: Vec<(f64, i32)> = found.iter().map(|c| (c.location.x, c.index)).collect();
    assert_eq!(rows.len(), 2);
    assert!((rows[0].0 + 1.0).abs() < 1e-12 && rows[0].1 == -1);
    assert!((rows[1].0 - 1.0).abs() < 1e-12 && rows[1].1 == 1);
}

#[test]
fn zero_free_box_gives_nothing() {
    let v = field_in("x^2 + y^2 + 1", "x", 2.0);
    assert!(find_critical_points(&v, &SolveConfig::default()).unwrap().is_empty());
}

#[test]
fn zero_curve_is_rejected() {
    let err = find_critical_points(&corpus("zero-curve"), &SolveConfig::default()).unwrap_err();
    assert!(matches!(err, CritError::DepthLimitExceeded { .. }));
}
