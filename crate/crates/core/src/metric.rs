//! Polynomial pseudo-Finsler metrics `F(x, y; p) = Σ a_i(x, y) p^i`, the
//! projectivized geodesic polynomials Δ and P, discriminants, isotropic
//! directions and the discriminant stratification for cubic metrics.

use std::fmt;

use thiserror::Error;

use crate::algebra::{Dual, Scalar};
use crate::expr::{ExprError, ScalarField};
use crate::poly::{formal_discriminant, RealPolynomial};

/// `|D_F| < M0_REL_TOL * scale^4` counts as lying on the discriminant curve.
pub const M0_REL_TOL: f64 = 1e-10;
/// Leading coefficients below this fraction of the largest one are treated as
/// roots at infinity.
pub const LEADING_REL_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("metric degree must be at least 2, got {0}")]
    Degree(usize),
    #[error("expected {expected} coefficients a_0..a_n, got {got}")]
    CoefficientCount { expected: usize, got: usize },
    #[error("all metric coefficients are identically zero")]
    AllZero,
    #[error("operation requires a cubic metric, got degree {0}")]
    RequiresCubic(usize),
    #[error("F vanishes identically in p at ({x}, {y})")]
    DegeneratePoint { x: f64, y: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Affine chart on the projectivized tangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Chart {
    /// Slope `p = dy/dx`.
    P,
    /// Slope `q = dx/dy`.
    Q,
}

impl Chart {
    pub fn other(self) -> Self {
        match self {
            Chart::P => Chart::Q,
            Chart::Q => Chart::P,
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chart::P => "P",
            Chart::Q => "Q",
        })
    }
}

/// Discriminant stratum of a point for a cubic metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stratum {
    /// Three distinct real projective isotropic directions.
    MPlus,
    /// One real isotropic direction.
    MMinus,
    /// Double isotropic direction.
    M01,
    /// Triple isotropic direction.
    M00,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stratum::MPlus => "M+",
            Stratum::MMinus => "M-",
            Stratum::M01 => "M01",
            Stratum::M00 => "M00",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slope {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectiveRoot {
    pub value: Slope,
    pub multiplicity: usize,
}

/// Values of the metric coefficients and their first partials at a point,
/// expressed in a chart: `u` is the chart's independent coordinate and `v`
/// the dependent one (`(x, y)` in the P-chart, `(y, x)` in the Q-chart).
#[derive(Debug, Clone)]
pub struct CoeffJet<T> {
    pub a: Vec<T>,
    pub a_u: Vec<T>,
    pub a_v: Vec<T>,
}

impl CoeffJet<f64> {
    fn lift(&self) -> CoeffJet<RealPolynomial> {
        let l = |v: &Vec<f64>| v.iter().map(|&c| RealPolynomial::constant(c)).collect();
        CoeffJet { a: l(&self.a), a_u: l(&self.a_u), a_v: l(&self.a_v) }
    }

    /// Largest coefficient magnitude.
    pub fn scale(&self) -> f64 {
        self.a.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

/// `(f, f', f'')` of `Σ c_i s^i` by Horner's scheme.
fn horner2<T: Scalar>(c: &[T], s: &T) -> (T, T, T) {
    let zero = s.lift(0.0);
    let (mut f, mut d1, mut d2) = (zero.clone(), zero.clone(), zero);
    for ci in c.iter().rev() {
        d2 = d2 * s.clone() + d1.clone().scale(2.0);
        d1 = d1 * s.clone() + f.clone();
        f = f * s.clone() + ci.clone();
    }
    (f, d1, d2)
}

/// `(f, f')` of `Σ c_i s^i`.
fn horner1<T: Scalar>(c: &[T], s: &T) -> (T, T) {
    let zero = s.lift(0.0);
    let (mut f, mut d1) = (zero.clone(), zero);
    for ci in c.iter().rev() {
        d1 = d1 * s.clone() + f.clone();
        f = f * s.clone() + ci.clone();
    }
    (f, d1)
}

/// Δ and P at slope `s` from a coefficient jet, in chart coordinates:
///
/// Δ = nFF_ss − (n−1)F_s², P = nF(F_v − F_us − sF_vs) + (n−1)F_s(F_u + sF_v).
pub fn delta_and_p<T: Scalar>(n: usize, jet: &CoeffJet<T>, s: &T) -> (T, T) {
    let nf = n as f64;
    let (f, fs, fss) = horner2(&jet.a, s);
    let (fu, fus) = horner1(&jet.a_u, s);
    let (fv, fvs) = horner1(&jet.a_v, s);
    let delta = (f.clone() * fss).scale(nf) - (fs.clone() * fs.clone()).scale(nf - 1.0);
    let p = (f * (fv.clone() - fus - s.clone() * fvs)).scale(nf)
        + (fs * (fu + s.clone() * fv)).scale(nf - 1.0);
    (delta, p)
}

/// Homogeneous polynomial metric function of degree `n` in the velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoFinslerMetric {
    n: usize,
    coeffs: Vec<ScalarField>,
}

impl PseudoFinslerMetric {
    pub fn new(n: usize, coeffs: Vec<ScalarField>) -> Result<Self, MetricError> {
        if n < 2 {
            return Err(MetricError::Degree(n));
        }
        if coeffs.len() != n + 1 {
            return Err(MetricError::CoefficientCount { expected: n + 1, got: coeffs.len() });
        }
        if coeffs.iter().all(ScalarField::is_identically_zero) {
            return Err(MetricError::AllZero);
        }
        Ok(Self { n, coeffs })
    }

    /// Builds a metric from coefficient expressions `a_0..a_n`.
    pub fn parse(n: usize, coeffs: &[&str]) -> Result<Self, MetricError> {
        let fields = coeffs
            .iter()
            .map(|s| ScalarField::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(n, fields)
    }

    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[ScalarField] {
        &self.coeffs
    }

    /// The metric with every coefficient multiplied by `kappa`.
    pub fn scaled_by(&self, kappa: &ScalarField) -> Result<Self, MetricError> {
        use crate::expr::Expr;
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| ScalarField::new(Expr::mul(kappa.expr().clone(), c.expr().clone())))
            .collect();
        Self::new(self.n, coeffs)
    }

    pub fn coeff_values(&self, x: f64, y: f64) -> Result<Vec<f64>, MetricError> {
        self.coeffs.iter().map(|c| Ok(c.eval(x, y)?)).collect()
    }

    /// Coefficient jet at `(x, y)` in the given chart, over any scalar type.
    pub fn jet_generic<T: Scalar>(&self, chart: Chart, x: &T, y: &T) -> Result<CoeffJet<T>, MetricError> {
        let mut a = Vec::with_capacity(self.n + 1);
        let mut ax = Vec::with_capacity(self.n + 1);
        let mut ay = Vec::with_capacity(self.n + 1);
        for c in &self.coeffs {
            a.push(c.eval_generic(x, y)?);
            ax.push(c.dx().eval_generic(x, y)?);
            ay.push(c.dy().eval_generic(x, y)?);
        }
        Ok(match chart {
            Chart::P => CoeffJet { a, a_u: ax, a_v: ay },
            Chart::Q => {
                a.reverse();
                ax.reverse();
                ay.reverse();
                CoeffJet { a, a_u: ay, a_v: ax }
            }
        })
    }

    pub fn jet(&self, chart: Chart, x: f64, y: f64) -> Result<CoeffJet<f64>, MetricError> {
        self.jet_generic(chart, &x, &y)
    }

    /// `F(x, y; p)`.
    pub fn eval_f(&self, x: f64, y: f64, p: f64) -> Result<f64, MetricError> {
        let a = self.coeff_values(x, y)?;
        Ok(a.iter().rev().fold(0.0, |acc, &c| acc * p + c))
    }

    /// `F` in the given chart: `Σ a_i s^i` (P) or `Σ a_{n-i} s^i` (Q).
    pub fn eval_f_chart(&self, chart: Chart, x: f64, y: f64, s: f64) -> Result<f64, MetricError> {
        let mut a = self.coeff_values(x, y)?;
        if chart == Chart::Q {
            a.reverse();
        }
        Ok(a.iter().rev().fold(0.0, |acc, &c| acc * s + c))
    }

    /// `F(x, y; ·)` as a polynomial in `p`.
    pub fn f_poly(&self, x: f64, y: f64) -> Result<RealPolynomial, MetricError> {
        Ok(RealPolynomial::new(self.coeff_values(x, y)?))
    }

    /// Δ(x, y; ·) in the P-chart, degree at most 2n − 4.
    pub fn delta_poly(&self, x: f64, y: f64) -> Result<RealPolynomial, MetricError> {
        self.delta_poly_chart(Chart::P, x, y)
    }

    /// P(x, y; ·) in the P-chart, degree at most 2n − 1.
    pub fn p_poly(&self, x: f64, y: f64) -> Result<RealPolynomial, MetricError> {
        self.p_poly_chart(Chart::P, x, y)
    }

    pub fn delta_poly_chart(&self, chart: Chart, x: f64, y: f64) -> Result<RealPolynomial, MetricError> {
        let (d, _) = self.polys(chart, x, y)?;
        Ok(d)
    }

    pub fn p_poly_chart(&self, chart: Chart, x: f64, y: f64) -> Result<RealPolynomial, MetricError> {
        let (_, p) = self.polys(chart, x, y)?;
        Ok(p)
    }

    fn polys(&self, chart: Chart, x: f64, y: f64) -> Result<(RealPolynomial, RealPolynomial), MetricError> {
        let jet = self.jet(chart, x, y)?.lift();
        let (d, p) = delta_and_p(self.n, &jet, &RealPolynomial::identity());
        // The top coefficients cancel analytically; drop their rounding residue.
        let cut = |poly: RealPolynomial, deg: usize| {
            RealPolynomial::new(poly.coeffs().iter().take(deg + 1).copied().collect())
        };
        Ok((cut(d, 2 * self.n - 4), cut(p, 2 * self.n - 1)))
    }

    /// Real isotropic directions with multiplicities; the deficiency of
    /// `deg F(x, y; ·)` from `n` is reported as a root at infinity.
    pub fn isotropic_directions(&self, x: f64, y: f64) -> Result<Vec<ProjectiveRoot>, MetricError> {
        let f = self.f_poly(x, y)?;
        if f.is_zero() {
            return Err(MetricError::DegeneratePoint { x, y });
        }
        let f = f.trimmed(LEADING_REL_TOL);
        let deg = f.degree().unwrap_or(0);
        let mut out: Vec<ProjectiveRoot> = f
            .real_roots()
            .into_iter()
            .map(|r| ProjectiveRoot { value: Slope::Finite(r.value), multiplicity: r.multiplicity })
            .collect();
        if deg < self.n {
            out.push(ProjectiveRoot { value: Slope::Infinite, multiplicity: self.n - deg });
        }
        Ok(out)
    }

    fn require_cubic(&self) -> Result<(), MetricError> {
        if self.n == 3 {
            Ok(())
        } else {
            Err(MetricError::RequiresCubic(self.n))
        }
    }

    /// Discriminant of the formal cubic `F(x, y; ·)`.
    pub fn disc_f(&self, x: f64, y: f64) -> Result<f64, MetricError> {
        self.require_cubic()?;
        Ok(formal_discriminant(&self.f_poly(x, y)?, 3))
    }

    /// Discriminant of the formal quadratic `Δ(x, y; ·)`; equals `-12 disc_f`.
    pub fn disc_delta(&self, x: f64, y: f64) -> Result<f64, MetricError> {
        self.require_cubic()?;
        Ok(formal_discriminant(&self.delta_poly(x, y)?, 2))
    }

    pub fn classify_point(&self, x: f64, y: f64) -> Result<Stratum, MetricError> {
        self.require_cubic()?;
        let a = self.coeff_values(x, y)?;
        let scale = a.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let d = formal_discriminant(&RealPolynomial::new(a), 3);
        if d > M0_REL_TOL * scale.powi(4) {
            return Ok(Stratum::MPlus);
        }
        if d < -M0_REL_TOL * scale.powi(4) {
            return Ok(Stratum::MMinus);
        }
        let delta = self.delta_poly(x, y)?;
        if delta.max_abs_coeff() <= 1e-8 * scale * scale {
            Ok(Stratum::M00)
        } else {
            Ok(Stratum::M01)
        }
    }

    /// Gradient of `disc_f` at `(x, y)` via forward-mode differentiation.
    pub fn disc_f_gradient(&self, x: f64, y: f64) -> Result<[f64; 2], MetricError> {
        self.require_cubic()?;
        let (dx, dy) = (Dual::<2>::var(x, 0), Dual::<2>::var(y, 1));
        let c: Vec<Dual<2>> = self
            .coeffs
            .iter()
            .map(|f| f.eval_generic(&dx, &dy))
            .collect::<Result<_, _>>()?;
        let (a, b, cc, d) = (c[3], c[2], c[1], c[0]);
        let disc = b * b * cc * cc - (a * cc * cc * cc).scale(4.0) - (b * b * b * d).scale(4.0)
            - (a * a * d * d).scale(27.0)
            + (a * b * cc * d).scale(18.0);
        Ok(disc.d)
    }

    /// Determinants `(H̄, H̄₁, H̄₂)` of the tangent-bundle geodesic equation for
    /// `F̄(x, y; ẋ, ẏ) = Σ a_i ẋ^{n−i} ẏ^i`, from exact second partials.
    pub fn oracle_h(&self, x: f64, y: f64, xdot: f64, ydot: f64) -> Result<(f64, f64, f64), MetricError> {
        let jet = self.jet(Chart::P, x, y)?;
        let n = self.n as i32;
        // ∂^{j}_{ẋ} ∂^{k}_{ẏ} of ẋ^{n−i} ẏ^i.
        let mono = |i: usize, j: i32, k: i32| -> f64 {
            let (e1, e2) = (n - i as i32, i as i32);
            let falling = |e: i32, m: i32| (0..m).map(|t| (e - t) as f64).product::<f64>();
            let c = falling(e1, j) * falling(e2, k);
            if c == 0.0 {
                0.0
            } else {
                c * xdot.powi(e1 - j) * ydot.powi(e2 - k)
            }
        };
        let sum = |w: &[f64], j: i32, k: i32| -> f64 {
            w.iter().enumerate().map(|(i, a)| a * mono(i, j, k)).sum()
        };
        let (a, ax, ay) = (&jet.a, &jet.a_u, &jet.a_v);
        let f_xdxd = sum(a, 2, 0);
        let f_xdyd = sum(a, 1, 1);
        let f_ydyd = sum(a, 0, 2);
        let f_x = sum(ax, 0, 0);
        let f_y = sum(ay, 0, 0);
        let f_xd_x = sum(ax, 1, 0);
        let f_xd_y = sum(ay, 1, 0);
        let f_yd_x = sum(ax, 0, 1);
        let f_yd_y = sum(ay, 0, 1);
        let g1 = f_x - xdot * f_xd_x - ydot * f_xd_y;
        let g2 = f_y - xdot * f_yd_x - ydot * f_yd_y;
        let h = f_xdxd * f_ydyd - f_xdyd * f_xdyd;
        let h1 = g1 * f_ydyd - g2 * f_xdyd;
        let h2 = f_xdxd * g2 - f_xdyd * g1;
        Ok((h, h1, h2))
    }
}

impl fmt::Display for PseudoFinslerMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n = {}; F =", self.n)?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if !c.is_identically_zero() {
                write!(f, " + ({c})*p^{i}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    fn quad(c: &str) -> PseudoFinslerMetric {
        PseudoFinslerMetric::parse(3, &[c, "0", "1", "0"]).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert_eq!(PseudoFinslerMetric::parse(1, &["1", "1"]), Err(MetricError::Degree(1)));
        assert!(matches!(
            PseudoFinslerMetric::parse(3, &["1"]),
            Err(MetricError::CoefficientCount { expected: 4, got: 1 })
        ));
        assert_eq!(PseudoFinslerMetric::parse(2, &["0", "0", "0"]), Err(MetricError::AllZero));
    }

    #[test]
    fn eval_f_examples() {
        assert_eq!(quad("-x").eval_f(1.0, 0.0, 2.0).unwrap(), 3.0);
        let m = PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap();
        assert_eq!(m.eval_f(1.0, 0.0, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_delta_and_p() {
        // c = 0.7*y^2 - x at (0.3, -1.1): c_x = -1, c_y = 1.4 y.
        let m = quad("0.7*y^2 - x");
        let (x, y) = (0.3, -1.1);
        let c = 0.7 * y * y - x;
        let (cx, cy) = (-1.0, 1.4 * y);
        let d = m.delta_poly(x, y).unwrap();
        let p = m.p_poly(x, y).unwrap();
        for s in [-2.0, -0.3, 0.0, 0.9, 3.0] {
            assert!(close(d.eval(s), 2.0 * (3.0 * c - s * s), 1e-12));
            assert!(close(p.eval(s), 7.0 * cy * s * s + 4.0 * cx * s + 3.0 * c * cy, 1e-12));
        }
    }

    #[test]
    fn tongue_delta_and_p() {
        let m = PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap();
        let x = 0.8;
        let d = m.delta_poly(x, 5.0).unwrap();
        let p = m.p_poly(x, 5.0).unwrap();
        for s in [-1.0, 0.5, 2.0] {
            assert!(close(d.eval(s), -2.0 * (s * s - 4.0 * x * s + 16.0 * x * x), 1e-12));
            assert!(close(p.eval(s), -4.0 * s * (s + 4.0 * x), 1e-12));
        }
    }

    #[test]
    fn triple_root_gives_zero_delta() {
        let m = PseudoFinslerMetric::parse(3, &["8", "12", "6", "1"]).unwrap();
        assert!(m.delta_poly(0.0, 0.0).unwrap().max_abs_coeff() < 1e-12);
        assert_eq!(m.classify_point(0.0, 0.0).unwrap(), Stratum::M00);
    }

    #[test]
    fn isotropic_direction_examples() {
        let m = quad("-x");
        let r = m.isotropic_directions(4.0, 0.0).unwrap();
        assert_eq!(r.len(), 3);
        assert!(matches!(r[0].value, Slope::Finite(v) if close(v, -2.0, 1e-12)));
        assert!(matches!(r[1].value, Slope::Finite(v) if close(v, 2.0, 1e-12)));
        assert_eq!(r[2], ProjectiveRoot { value: Slope::Infinite, multiplicity: 1 });

        let m = PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap();
        let r = m.isotropic_directions(0.0, 1.0).unwrap();
        assert_eq!(
            r,
            vec![
                ProjectiveRoot { value: Slope::Finite(0.0), multiplicity: 2 },
                ProjectiveRoot { value: Slope::Infinite, multiplicity: 1 }
            ]
        );

        let m = PseudoFinslerMetric::parse(3, &["0", "1", "0", "1"]).unwrap();
        let r = m.isotropic_directions(0.5, 0.5).unwrap();
        assert_eq!(r, vec![ProjectiveRoot { value: Slope::Finite(0.0), multiplicity: 1 }]);

        let m = PseudoFinslerMetric::parse(3, &["x", "0", "0", "0"]).unwrap();
        assert!(matches!(m.isotropic_directions(0.0, 0.0), Err(MetricError::DegeneratePoint { .. })));
    }

    #[test]
    fn strata_of_the_fold() {
        let m = quad("-x");
        assert_eq!(m.classify_point(-0.5, 0.0).unwrap(), Stratum::MMinus);
        assert_eq!(m.classify_point(0.5, 0.0).unwrap(), Stratum::MPlus);
        assert_eq!(m.classify_point(0.0, 0.3).unwrap(), Stratum::M01);
        let cube = PseudoFinslerMetric::parse(3, &["0", "0", "0", "1"]).unwrap();
        assert_eq!(cube.classify_point(1.0, 2.0).unwrap(), Stratum::M00);
        assert_eq!(cube.disc_f(1.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn tongue_never_in_m_minus() {
        let m = PseudoFinslerMetric::parse(3, &["0", "-4*x", "1", "0"]).unwrap();
        for i in -20..=20 {
            let x = i as f64 * 0.05;
            assert!(m.disc_f(x, 0.0).unwrap() >= 0.0);
            let expected = if i == 0 { Stratum::M01 } else { Stratum::MPlus };
            assert_eq!(m.classify_point(x, 0.0).unwrap(), expected);
        }
    }

    #[test]
    fn quadratic_disc_formula() {
        // F = a p^2 + 2 b p + c
        let m = PseudoFinslerMetric::parse(3, &["x - y", "2*(y + 0.5)", "1 + x*y", "0"]).unwrap();
        let (x, y) = (0.4, -0.9);
        let (a, b, c) = (1.0 + x * y, y + 0.5, x - y);
        assert!(close(m.disc_f(x, y).unwrap(), 4.0 * a * a * (b * b - a * c), 1e-12));
        assert!(close(m.disc_delta(x, y).unwrap(), -12.0 * m.disc_f(x, y).unwrap(), 1e-12));
    }

    #[test]
    fn disc_gradient_matches_finite_difference() {
        let m = PseudoFinslerMetric::parse(3, &["x*y - 1", "y^2", "x + 2", "0.5*x"]).unwrap();
        let g = m.disc_f_gradient(0.3, 0.7).unwrap();
        let h = 1e-6;
        let fx = (m.disc_f(0.3 + h, 0.7).unwrap() - m.disc_f(0.3 - h, 0.7).unwrap()) / (2.0 * h);
        let fy = (m.disc_f(0.3, 0.7 + h).unwrap() - m.disc_f(0.3, 0.7 - h).unwrap()) / (2.0 * h);
        assert!(close(g[0], fx, 1e-7) && close(g[1], fy, 1e-7));
    }

    #[test]
    fn oracle_matches_delta_and_p() {
        let m = PseudoFinslerMetric::parse(
            4,
            &["1 + x*y", "x^2 - y", "2 + y", "x*y^2", "-0.5 + x"],
        )
        .unwrap();
        let (x, y, p) = (0.4, -0.7, 1.3);
        let (h, h1, h2) = m.oracle_h(x, y, 1.0, p).unwrap();
        let d = m.delta_poly(x, y).unwrap().eval(p);
        let pp = m.p_poly(x, y).unwrap().eval(p);
        assert!(close(h, 3.0 * d, 1e-12));
        assert!(close(h2 - p * h1, 3.0 * pp, 1e-12));
        let (hl, _, _) = m.oracle_h(x, y, 2.0, 2.0 * p).unwrap();
        assert!(close(hl, 16.0 * h, 1e-12));
    }

    #[test]
    fn q_chart_is_a_multiple_of_p_chart() {
        // (qΔ̃, Δ̃, −P̃/q²) = q^{2n−3} (Δ, pΔ, P) with q = 1/p.
        let m = PseudoFinslerMetric::parse(3, &["x*y - 1", "y^2", "x + 2", "0.5*x"]).unwrap();
        let (x, y, p) = (0.3, 0.7, 1.7);
        let q = 1.0 / p;
        let dp = m.delta_poly_chart(Chart::P, x, y).unwrap().eval(p);
        let pp = m.p_poly_chart(Chart::P, x, y).unwrap().eval(p);
        let dq = m.delta_poly_chart(Chart::Q, x, y).unwrap().eval(q);
        let pq = m.p_poly_chart(Chart::Q, x, y).unwrap().eval(q);
        let k = q.powi(3);
        assert!(close(q * dq, k * dp, 1e-12));
        assert!(close(dq, k * p * dp, 1e-12));
        assert!(close(-pq / (q * q), k * pp, 1e-12));
    }
}
