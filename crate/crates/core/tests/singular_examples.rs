use pfinsler::expr::ScalarField;
use pfinsler::flow::{BBox, PtmPoint};
use pfinsler::metric::PseudoFinslerMetric;
use pfinsler::singular::{
    classify_singular, locate_tangencies, singular_roots, tangency_direction_on_s, trace_discriminant_curve,
    trace_s_curves, SingularKind,
};

fn ex(c: &str) -> PseudoFinslerMetric {
    PseudoFinslerMetric::parse(3, &[c, "0", "1", "0"]).unwrap()
}

fn ratio_at(m: &PseudoFinslerMetric, x: f64, y: f64) -> f64 {
    let sp = classify_singular(m, PtmPoint::p_chart(x, y, 0.0)).unwrap();
    assert_eq!(sp.kind, SingularKind::Resonant32);
    let (l1, l2) = sp.pair();
    l2.re / l1.re
}

#[test]
fn singular_directions_of_the_fold() {
    let m = ex("-x");
    let (lo, hi) = singular_roots(&m, -0.75, 0.3).unwrap();
    assert!((lo + 1.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
}

#[test]
fn discriminant_curve_of_the_tilted_example_is_a_parabola() {
    let m = ex("0.5*y^2 - x");
    let curves = trace_discriminant_curve(&m, BBox::square(1.0), 80);
    let pts: Vec<_> = curves.iter().flat_map(|c| c.points.iter()).collect();
    assert!(pts.len() > 50);
    assert!(pts.iter().all(|q| (q[0] - 0.5 * q[1] * q[1]).abs() < 1e-8));
}

#[test]
fn tongue_has_no_discriminant_curve_off_the_axis() {
    let m = PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap();
    assert!(trace_discriminant_curve(&m, BBox::new(0.1, 1.0, -1.0, 1.0), 40).is_empty());
}

#[test]
fn resonance_along_the_whole_parabola() {
    let m = ex("0.5*y^2 - x");
    for y in [-0.8, -0.3, 0.2, 0.7] {
        assert!((ratio_at(&m, 0.5 * y * y, y) - 1.5).abs() < 1e-8);
    }
}

#[test]
fn spectrum_ratio_survives_conformal_scaling() {
    let m = ex("-x");
    let kappa = ScalarField::parse("1 + x^2 + 2*y^2").unwrap();
    let scaled = m.scaled_by(&kappa).unwrap();
    assert!((ratio_at(&scaled, 0.0, 0.0) - 1.5).abs() < 1e-8);
    assert!((ratio_at(&scaled, 0.0, 0.4) - 1.5).abs() < 1e-8);
}

#[test]
fn negative_alpha_is_transversal_everywhere() {
    let m = ex("-y^2 - x");
    let curves = trace_s_curves(&m, BBox::square(2.0), 120).unwrap();
    assert!(!curves.is_empty());
    let mut checked = 0;
    for c in &curves {
        assert!(locate_tangencies(&m, c).unwrap().is_empty());
        let slopes = c.slopes.as_ref().unwrap();
        for (q, &p) in c.points.iter().zip(slopes).step_by(7) {
            let r = tangency_direction_on_s(&m, q[0], q[1], p).unwrap();
            assert!(r.transverse && r.eigen_nonzero, "{r:?}");
            checked += 1;
        }
    }
    assert!(checked > 10);
}

#[test]
fn pair_kinds_on_the_s_curves() {
    let m = ex("y^2 - x");
    let curves = trace_s_curves(&m, BBox::square(2.0), 120).unwrap();
    let (mut real, mut imag) = (0, 0);
    for c in &curves {
        let slopes = c.slopes.as_ref().unwrap();
        for (q, &p) in c.points.iter().zip(slopes).step_by(3) {
            let sp = classify_singular(&m, PtmPoint::p_chart(q[0], q[1], p)).unwrap();
            let (l1, l2) = sp.pair();
            let size = l1.norm().max(l2.norm());
            match sp.kind {
                SingularKind::RealPair => {
                    real += 1;
                    assert!(l1.im.abs() + l2.im.abs() < 1e-8 * size);
                    assert!((l1.re + l2.re).abs() < 1e-6 * size);
                }
                SingularKind::ImaginaryPair => {
                    imag += 1;
                    assert!(l1.re.abs() + l2.re.abs() < 1e-6 * size);
                }
                _ => {}
            }
            assert!(sp.eigenvalues[0].norm() < 1e-8 * (1.0 + size));
        }
    }
    assert!(real > 0 && imag > 0, "real {real}, imaginary {imag}");
}
