use std::collections::BTreeMap;

use proptest::prelude::*;

use pfinsler::flow::{integrate, IntegratorConfig, PtmPoint};
use pfinsler::geom::point_polyline_distance;
use pfinsler::metric::PseudoFinslerMetric;
use pfinsler::puiseux::{solve_geodesic_series, OrderStatus, SeriesProblem, TruncatedSeries};

fn tongue() -> PseudoFinslerMetric {
    PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap()
}

fn problem(a4: f64) -> SeriesProblem {
    SeriesProblem { base: (0.0, 0.0), s: 3, seed: vec![0.0, 0.0, 0.0, 2.0], order: 14, free: BTreeMap::from([(4, a4)]) }
}

#[test]
fn coefficients_with_unit_a4() {
    let r = solve_geodesic_series(&tongue(), problem(1.0)).unwrap();
    assert_eq!(r.sigma, 6);
    assert_eq!(r.normalization, -2.0);
    assert!((r.p.coeff(6) + 1.0 / 6.0).abs() < 1e-15);
    assert!((r.p.coeff(8) - 7.0 / 144.0).abs() < 1e-14);
    for k in (5..=13).step_by(2) {
        assert_eq!(r.p.coeff(k), 0.0, "odd order {k}");
    }
    assert_eq!(r.free_orders(), vec![4]);
    assert!(r.first_obstruction().is_none());
    assert!(r.max_residual < 1e-12);
}

#[test]
fn free_order_defaults_to_zero() {
    let mut pr = problem(0.0);
    pr.free.clear();
    let r = solve_geodesic_series(&tongue(), pr).unwrap();
    let row = r.rows.iter().find(|row| row.order == 4).unwrap();
    assert_eq!(row.status, OrderStatus::Free);
    assert_eq!(row.value, 0.0);
    assert!((4..=14).all(|k| r.p.coeff(k) == 0.0));
}

#[test]
fn series_agrees_with_the_integrator() {
    let m = tongue();
    let r = solve_geodesic_series(&m, problem(1.0)).unwrap();
    let (x, y, p) = r.curve();
    let t0 = 0.2;
    let start = PtmPoint::p_chart(x.eval(t0), y.eval(t0), p.eval(t0));
    let cfg = IntegratorConfig { max_seg: 1e-4, max_length: 0.05, ..IntegratorConfig::default() };
    let trace = integrate(&m, start, &cfg).unwrap();
    let line = trace.projection();
    for t in [0.17, 0.19, 0.21, 0.23] {
        let d = point_polyline_distance([x.eval(t), y.eval(t)], &line);
        assert!(d < 1e-8, "t = {t}: distance {d:e}");
    }
}

fn series(coeffs: Vec<i32>) -> TruncatedSeries {
    let c: Vec<f64> = coeffs.into_iter().map(f64::from).collect();
    TruncatedSeries::new(&c, 8)
}

proptest! {
    #[test]
    fn multiplication_is_associative(
        a in prop::collection::vec(-9i32..9, 9),
        b in prop::collection::vec(-9i32..9, 9),
        c in prop::collection::vec(-9i32..9, 9),
    ) {
        let (a, b, c) = (series(a), series(b), series(c));
        let left = (a.clone() * b.clone()) * c.clone();
        let right = a * (b * c);
        prop_assert_eq!(left.coeffs(), right.coeffs());
    }

    #[test]
    fn derivative_undoes_integration(a in prop::collection::vec(-9i32..9, 9)) {
        let a = series(a);
        let back = a.integrate().derive();
        prop_assert_eq!(back.coeffs(), a.coeffs());
    }

    #[test]
    fn composition_with_identity(a in prop::collection::vec(-9i32..9, 9)) {
        let a = series(a);
        let id = TruncatedSeries::monomial(1, 8);
        let composed = a.compose(&id).unwrap();
        prop_assert_eq!(composed.coeffs(), a.coeffs());
    }
}
