use proptest::prelude::*;

use pfinsler::expr::{Expr, ScalarField, Var};
use pfinsler::flow::PtmPoint;
use pfinsler::metric::{Chart, PseudoFinslerMetric};
use pfinsler::polyanalysis::{check_multiple_roots, varphi, RootedPolynomial};

/// `Σ c_k x^i y^j` over total degree ≤ 2, as text.
fn poly_text(c: &[f64]) -> String {
    let monos = ["1", "x", "y", "x^2", "x*y", "y^2"];
    c.iter().zip(monos).map(|(v, m)| format!("({v})*{m}")).collect::<Vec<_>>().join(" + ")
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 6)
}

proptest! {
    #[test]
    fn varphi_is_nonnegative(a in prop::collection::vec(-10.0f64..10.0, 2..7)) {
        let v = varphi(&a);
        let scale = a.iter().map(|x| x * x).sum::<f64>() * a.len() as f64;
        prop_assert!(v >= -1e-12 * (1.0 + scale));
    }

    #[test]
    fn varphi_vanishes_on_equal_tuples(c in -5.0f64..5.0, n in 2usize..7) {
        prop_assert!(varphi(&vec![c; n]).abs() < 1e-9 * (1.0 + c * c));
    }

    #[test]
    fn multiple_roots_on_real_rooted_polynomials(picks in prop::collection::vec(0usize..4, 3..6)) {
        let pool = [-2.0, -0.5, 1.0, 3.0];
        let gammas: Vec<f64> = picks.iter().map(|&i| pool[i]).collect();
        let report = check_multiple_roots(&RootedPolynomial::new(gammas.clone()).unwrap());
        prop_assert!(report.holds(), "{:?}: {:?}", gammas, report);
    }

    #[test]
    fn delta_and_p_degree_bounds(
        c0 in coeffs(), c1 in coeffs(), c2 in coeffs(), c3 in coeffs(),
        x in -1.0f64..1.0, y in -1.0f64..1.0,
    ) {
        let texts = [poly_text(&c0), poly_text(&c1), poly_text(&c2), poly_text(&c3)];
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let m = PseudoFinslerMetric::parse(3, &refs).unwrap();
        let a = m.coeff_values(x, y).unwrap();
        let d = m.delta_poly(x, y).unwrap();
        let p = m.p_poly(x, y).unwrap();
        prop_assert!(d.degree().is_none_or(|k| k <= 2));
        prop_assert!(p.degree().is_none_or(|k| k <= 5));
        let constant = 6.0 * a[0] * a[2] - 2.0 * a[1] * a[1];
        let scale = 1.0 + a.iter().map(|v| v * v).sum::<f64>();
        prop_assert!((d.coeff(0) - constant).abs() < 1e-12 * scale);
    }

    #[test]
    fn partials_match_central_differences(c in coeffs(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let text = format!("({}) / (2 + x^2 + y^2)", poly_text(&c));
        let f = ScalarField::parse(&text).unwrap();
        let h = 1e-5;
        let fdx = (f.eval(x + h, y).unwrap() - f.eval(x - h, y).unwrap()) / (2.0 * h);
        let fdy = (f.eval(x, y + h).unwrap() - f.eval(x, y - h).unwrap()) / (2.0 * h);
        prop_assert!((f.dx().eval(x, y).unwrap() - fdx).abs() < 1e-7);
        prop_assert!((f.dy().eval(x, y).unwrap() - fdy).abs() < 1e-7);
        let e = f.expr();
        prop_assert_eq!(e.diff(Var::X).eval(x, y).unwrap(), f.partial(Var::X).eval(x, y).unwrap());
    }

    #[test]
    fn display_round_trips(c in coeffs(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let e = Expr::parse(&poly_text(&c)).unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        let (u, v) = (e.eval(x, y).unwrap(), again.eval(x, y).unwrap());
        prop_assert!((u - v).abs() < 1e-12 * (1.0 + u.abs()), "{} vs {}", e, again);
    }

    #[test]
    fn chart_switch_keeps_the_direction(p in -50.0f64..50.0) {
        prop_assume!(p.abs() > 1e-3);
        let q = PtmPoint::p_chart(0.1, 0.2, p).in_chart(Chart::Q).unwrap();
        prop_assert!((q.slope * p - 1.0).abs() < 1e-9);
        let back = q.in_chart(Chart::P).unwrap();
        prop_assert!((back.slope - p).abs() < 1e-9 * (1.0 + p.abs()));
    }
}

#[test]
fn coincident_roots_give_vanishing_delta() {
    for n in 3..=5 {
        for g in [-1.0, 0.0, 2.0] {
            let report = check_multiple_roots(&RootedPolynomial::new(vec![g; n]).unwrap());
            assert!(report.part_a && report.delta_vanishes);
            assert!(report.delta.coeffs().iter().all(|c| c.abs() < 1e-12));
        }
    }
}
