mod common;

use std::f64::consts::TAU;

use common::{corpus, field, van_der_pol_period_oracle};
use milnor_cycles::config::{CycleConfig, FlowConfig, SolveConfig};
use milnor_cycles::critfind::{find_critical_points, CriticalPoint};
use milnor_cycles::cycledetect::{detect_limit_cycles, enclosure_matrix, return_map, LimitCycle, Stability};
use milnor_cycles::geom::{hausdorff, point_polyline_dist};
use milnor_cycles::odeflow::{integrate, Section};
use milnor_cycles::{Point, VectorField};

fn detect(v: &VectorField) -> (Vec<CriticalPoint>, Vec<LimitCycle>) {
    let cps = find_critical_points(v, &SolveConfig::default()).unwrap();
    let cycles = detect_limit_cycles(v, &cps, &FlowConfig::default(), &CycleConfig::default());
    (cps, cycles)
}

fn unit_circle(n: usize) -> Vec<Point> {
    (0..=n)
        .map(|k| Point::from_polar(1.0, TAU * k as f64 / n as f64))
        .collect()
}

fn check_invariants(cps: &[CriticalPoint], cycles: &[LimitCycle]) {
    for c in cycles {
        assert!(c.closure_residual <= 1e-8);
        assert_eq!(c.points.first(), c.points.last());
        assert!(!c.enclosed_cp_ids.is_empty());
        match c.stability {
            Stability::Attracting => assert!(c.return_derivative < 1.0),
            Stability::Repelling => assert!(c.return_derivative > 1.0),
            Stability::SemiStable => assert!((c.return_derivative - 1.0).abs() <= 1e-4),
        }
        let index: i32 = c
            .enclosed_cp_ids
            .iter()
            .map(|&id| cps.iter().find(|p| p.id == id).unwrap().index)
            .sum();
        assert_eq!(index, 1, "index law");
    }
}

#[test]
fn cubic_system_has_the_unit_circle() {
    let (cps, cycles) = detect(&corpus("cubic-one-cycle"));
    assert_eq!(cycles.len(), 1);
    let c = &cycles[0];
    assert_eq!(c.stability, Stability::Attracting);
    assert!((c.period - TAU).abs() < 1e-6, "{}", c.period);
    assert!(hausdorff(&c.points, &unit_circle(4096)) < 1e-4);
    // P'(u*) = exp(∮ div V dt) = exp(-4π) for ṙ = r(1 - r²)
    assert!((c.return_derivative.ln() + 2.0 * TAU).abs() < 1e-6);
    assert_eq!(enclosure_matrix(&cycles, &cps).unwrap(), vec![vec![1]]);
    check_invariants(&cps, &cycles);
}

#[test]
fn linear_center_has_no_limit_cycle() {
    let (_, cycles) = detect(&corpus("linear-center"));
    assert!(cycles.is_empty());
}

#[test]
fn van_der_pol_cycle_matches_oracle_period() {
    let v = corpus("van-der-pol");
    let (cps, cycles) = detect(&v);
    assert_eq!(cycles.len(), 1);
    assert_eq!(cycles[0].stability, Stability::Attracting);
    let oracle = van_der_pol_period_oracle(&v);
    assert!(
        (cycles[0].period - oracle).abs() < 1e-6,
        "{} vs {oracle}",
        cycles[0].period
    );
    check_invariants(&cps, &cycles);
}

#[test]
fn two_cycle_system_has_both_cycles() {
    let (cps, cycles) = detect(&corpus("two-cycle"));
    assert_eq!(cycles.len(), 2);
    let radii: Vec<f64> = cycles.iter().map(|c| c.mean_radius).collect();
    assert!(
        (radii[0] - 1.0).abs() < 1e-3 && (radii[1] - 2.0).abs() < 1e-3,
        "{radii:?}"
    );
    assert_eq!(cycles[0].stability, Stability::Attracting);
    assert_eq!(cycles[1].stability, Stability::Repelling);
    check_invariants(&cps, &cycles);
}

#[test]
fn return_map_contracts_towards_the_van_der_pol_cycle() {
    let v = corpus("van-der-pol");
    let (_, cycles) = detect(&v);
    let c = &cycles[0];
    let star = c.points[0];
    let s = Section::new(star, v.eval(star), 1.0);
    let flow = FlowConfig::default();
    for off in [-0.1, 0.1] {
        let x = s.at(off);
        let (next, t) = return_map(&v, &s, x, &flow, 100.0).unwrap();
        assert!(next.dist(star) < x.dist(star));
        assert!((t - c.period).abs() < 0.5);
    }
}

/// A seed `1e-3` off the cycle, on the side away from the centroid, gets
/// closer period after period (in forward time for attracting cycles,
/// backward for repelling ones).
#[test]
fn perturbed_seeds_converge_to_hyperbolic_cycles() {
    for name in ["cubic-one-cycle", "van-der-pol", "two-cycle"] {
        let v = corpus(name);
        let (_, cycles) = detect(&v);
        for c in &cycles {
            let w = match c.stability {
                Stability::Attracting => v.clone(),
                Stability::Repelling => v.reversed(),
                Stability::SemiStable => continue,
            };
            let x = c.points[0];
            let seed = x + (x - c.centroid()).normalized() * 1e-3;
            let tr = integrate(&w, seed, 3.0 * c.period, &FlowConfig::default());
            let dists: Vec<f64> = (0..3)
                .map(|k| {
                    (0..200)
                        .map(|j| c.period * (k as f64 + j as f64 / 200.0))
                        .filter_map(|t| tr.dense(t))
                        .map(|p| point_polyline_dist(p, &c.points))
                        .fold(0.0, f64::max)
                })
                .collect();
            assert!(dists.windows(2).all(|d| d[1] < d[0]), "{name}: {dists:?}");
        }
    }
}

#[test]
fn detection_is_idempotent() {
    let v = corpus("van-der-pol");
    let (_, a) = detect(&v);
    let (_, b) = detect(&v);
    assert_eq!(a, b);
}

#[test]
fn radial_source_has_no_return() {
    let v = field("x", "y");
    let s = Section::new(Point::new(1.0, 0.0), Point::new(0.0, 1.0), 0.5);
    assert!(return_map(&v, &s, Point::new(1.0, 0.0), &FlowConfig::default(), 100.0).is_err());
}
