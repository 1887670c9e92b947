//! Metrics induced on surfaces in Berwald–Moor space, their double isotropic
//! directions, and the blow-up `p = xu` of a line of degenerate singular
//! points.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use thiserror::Error;

use crate::algebra::{Dual, Scalar};
use crate::expr::{Expr, ExprError, ScalarField, Var};
use crate::flow::{BBox, EventKind, GeodesicTrace, PtmPoint, TraceEvent, TracePoint};
use crate::metric::{MetricError, PseudoFinslerMetric};
use crate::ode::{Stepper, Tolerances};
use crate::singular::{trace_implicit_curve, CurveLabel, CurveSamples};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BmError {
    #[error("Berwald-Moor immersions need n >= 3 components, got {0}")]
    TooFewComponents(usize),
    #[error("component f{index} has a vanishing differential{}", at.map(|(x, y)| format!(" at ({x}, {y})")).unwrap_or_default())]
    Degenerate { index: usize, at: Option<(f64, f64)> },
    #[error("component indices must be distinct and in 1..={n}")]
    BadPair { n: usize },
    #[error("b vanishes at ({x}, {y})")]
    BVanishes { x: f64, y: f64 },
    #[error("blow-up denominator is not bounded away from zero at ({x}, {y}): D = {d}")]
    DenominatorGuard { x: f64, y: f64, d: f64 },
    #[error("isotropic directions at (0, {y}) do not have first-order tangency")]
    TangencyOrder { y: f64 },
    #[error("no adapted chart found: {0}")]
    NotAdapted(String),
    #[error("shooting failed for alpha = {alpha}: {reason}")]
    Shooting { alpha: f64, reason: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Surface `x_i = f_i(x, y)` in `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceImmersion {
    f: Vec<ScalarField>,
}

impl SurfaceImmersion {
    pub fn new(f: Vec<ScalarField>) -> Result<Self, BmError> {
        if f.len() < 3 {
            return Err(BmError::TooFewComponents(f.len()));
        }
        for (i, fi) in f.iter().enumerate() {
            if fi.dx().is_identically_zero() && fi.dy().is_identically_zero() {
                return Err(BmError::Degenerate { index: i + 1, at: None });
            }
        }
        Ok(Self { f })
    }

    pub fn parse(f: &[&str]) -> Result<Self, BmError> {
        let fields = f.iter().map(|s| ScalarField::parse(s)).collect::<Result<Vec<_>, _>>()?;
        Self::new(fields)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.f
    }

    /// Checks `|f_ix| + |f_iy| > 1e-10` on a `res × res` grid over `domain`.
    pub fn validate_on(&self, domain: BBox, res: usize) -> Result<(), BmError> {
        let res = res.max(1);
        for (i, fi) in self.f.iter().enumerate() {
            for a in 0..=res {
                for b in 0..=res {
                    let x = domain.xmin + (domain.xmax - domain.xmin) * a as f64 / res as f64;
                    let y = domain.ymin + (domain.ymax - domain.ymin) * b as f64 / res as f64;
                    if fi.dx().eval(x, y)?.abs() + fi.dy().eval(x, y)?.abs() <= 1e-10 {
                        return Err(BmError::Degenerate { index: i + 1, at: Some((x, y)) });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Expands `Π (A_k + B_k p)` into coefficient expressions of `p^0..p^m`.
fn expand_linear_factors(factors: &[(Expr, Expr)]) -> Vec<Expr> {
    let mut coeffs = vec![Expr::constant(1.0)];
    for (a, b) in factors {
        let mut next = vec![Expr::constant(0.0); coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k] = Expr::add(next[k].clone(), Expr::mul(c.clone(), a.clone()));
            next[k + 1] = Expr::add(next[k + 1].clone(), Expr::mul(c.clone(), b.clone()));
        }
        coeffs = next;
    }
    coeffs
}

/// `F(x, y; p) = Π (f_ix + f_iy p)`.
pub fn induced_metric(imm: &SurfaceImmersion) -> Result<PseudoFinslerMetric, BmError> {
    let factors: Vec<(Expr, Expr)> =
        imm.f.iter().map(|f| (f.dx().expr().clone(), f.dy().expr().clone())).collect();
    let coeffs = expand_linear_factors(&factors).into_iter().map(ScalarField::new).collect();
    Ok(PseudoFinslerMetric::new(imm.n(), coeffs)?)
}

/// Zero set of `f_ix f_jy − f_iy f_jx` (1-based indices), where the
/// isotropic directions of `f_i` and `f_j` coincide.
pub fn double_direction_locus(
    imm: &SurfaceImmersion,
    i: usize,
    j: usize,
    domain: BBox,
    res: usize,
) -> Result<Vec<CurveSamples>, BmError> {
    let n = imm.n();
    if i == j || i == 0 || j == 0 || i > n || j > n {
        return Err(BmError::BadPair { n });
    }
    let (fi, fj) = (&imm.f[i - 1], &imm.f[j - 1]);
    let g = |x: f64, y: f64| -> Option<f64> {
        Some(fi.dx().eval(x, y).ok()? * fj.dy().eval(x, y).ok()? - fi.dy().eval(x, y).ok()? * fj.dx().eval(x, y).ok()?)
    };
    Ok(trace_implicit_curve(g, domain, res, 1e-13, CurveLabel::DoubleDirection))
}

/// Local metric `F = p(ax + bp)·G` with `G = Π_k (g_kx + g_ky p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedLocalMetric {
    pub a: ScalarField,
    pub b: ScalarField,
    /// Remaining linear factors as `(g_kx, g_ky)` coefficient fields.
    pub g: Vec<(ScalarField, ScalarField)>,
}

/// Values at `(x, y)` with first partials (`d[0]` along x, `d[1]` along y).
type D2 = Dual<2>;

struct BlowupJet {
    a: D2,
    b: D2,
    /// `G, G_p, G_pp` at `p = xu`, each carrying x/y partials.
    g: D2,
    g_p: D2,
    g_pp: D2,
}

impl AdaptedLocalMetric {
    pub fn new(a: ScalarField, b: ScalarField, g: Vec<(ScalarField, ScalarField)>) -> Self {
        Self { a, b, g }
    }

    pub fn parse(a: &str, b: &str, g: &[(&str, &str)]) -> Result<Self, BmError> {
        let g = g
            .iter()
            .map(|(u, v)| Ok((ScalarField::parse(u)?, ScalarField::parse(v)?)))
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(Self::new(ScalarField::parse(a)?, ScalarField::parse(b)?, g))
    }

    /// Degree of the metric, `2 + #g`.
    pub fn n(&self) -> usize {
        2 + self.g.len()
    }

    pub fn to_metric(&self) -> Result<PseudoFinslerMetric, BmError> {
        let mut factors = vec![
            (Expr::constant(0.0), Expr::constant(1.0)),
            (Expr::mul(self.a.expr().clone(), Expr::x()), self.b.expr().clone()),
        ];
        factors.extend(self.g.iter().map(|(u, v)| (u.expr().clone(), v.expr().clone())));
        let coeffs = expand_linear_factors(&factors).into_iter().map(ScalarField::new).collect();
        Ok(PseudoFinslerMetric::new(self.n(), coeffs)?)
    }

    fn jet(&self, x: f64, y: f64, p: f64) -> Result<BlowupJet, BmError> {
        let (dx, dy) = (D2::var(x, 0), D2::var(y, 1));
        let a = self.a.eval_generic(&dx, &dy)?;
        let b = self.b.eval_generic(&dx, &dy)?;
        // G as a polynomial in p with dual coefficients.
        let mut coeffs = vec![D2::constant(1.0)];
        for (u, v) in &self.g {
            let (gu, gv) = (u.eval_generic(&dx, &dy)?, v.eval_generic(&dx, &dy)?);
            let mut next = vec![D2::constant(0.0); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k] = next[k] + *c * gu;
                next[k + 1] = next[k + 1] + *c * gv;
            }
            coeffs = next;
        }
        let pp = D2::constant(p);
        let (mut g, mut g_p, mut g_pp) = (D2::constant(0.0), D2::constant(0.0), D2::constant(0.0));
        for c in coeffs.iter().rev() {
            g_pp = g_pp * pp + g_p.scale(2.0);
            g_p = g_p * pp + g;
            g = g * pp + *c;
        }
        Ok(BlowupJet { a, b, g, g_p, g_pp })
    }

    /// `(Δ/x², P/x²)` at `p = xu`, regular across `x = 0`.
    pub fn reduced_delta_p(&self, x: f64, y: f64, u: f64) -> Result<(f64, f64), BmError> {
        let n = self.n() as f64;
        let p = x * u;
        let j = self.jet(x, y, p)?;
        let (a, b) = (j.a.v, j.b.v);
        let (ax, ay, bx, by) = (j.a.d[0], j.a.d[1], j.b.d[0], j.b.d[1]);
        let (g, g_p, g_pp) = (j.g.v, j.g_p.v, j.g_pp.v);
        let (g_x, g_y) = (j.g.d[0], j.g.d[1]);
        let (g_xp, g_yp) = (j.g_p.d[0], j.g_p.d[1]);
        let ab = a + b * u;

        let fh = u * ab * g;
        let a1 = (a + 2.0 * b * u) * g + x * u * ab * g_p;
        let f_pp = 2.0 * b * g + x * (2.0 * (a + 2.0 * b * u) * g_p + x * u * ab * g_pp);
        let delta_h = n * fh * f_pp - (n - 1.0) * a1 * a1;

        let fx_h = u * ((a + x * (ax + bx * u)) * g + x * ab * g_x);
        let fy_h = u * ((ay + by * u) * g + ab * g_y);
        let f_xp = (a + x * ax + 2.0 * x * u * bx) * g
            + x * u * (a + x * ax + x * u * bx) * g_p
            + x * (a + 2.0 * b * u) * g_x
            + x * x * u * ab * g_xp;
        let f_yp_over_x = (ay + 2.0 * by * u) * g
            + x * u * (ay + by * u) * g_p
            + (a + 2.0 * b * u) * g_y
            + x * u * ab * g_yp;
        let p_f_yp = x * x * u * f_yp_over_x;
        let p_h = n * fh * (x * x * fy_h - f_xp - p_f_yp) + (n - 1.0) * a1 * (fx_h + x * x * u * fy_h);
        Ok((delta_h, p_h))
    }

    /// Guard: `n(2−n)(ab)²` must be strictly negative.
    fn guard(&self, x: f64, y: f64) -> Result<(), BmError> {
        let n = self.n() as f64;
        let (a, b) = (self.a.eval(x, y)?, self.b.eval(x, y)?);
        let d = n * (2.0 - n) * (a * b).powi(2);
        if d >= -1e-12 {
            return Err(BmError::DenominatorGuard { x, y, d });
        }
        Ok(())
    }

    /// The blown-up field `(x, x²u, (P/x² − uΔ/x²)/(Δ/x²))` in `(x, y, u)`.
    pub fn blowup_field_at(&self, x: f64, y: f64, u: f64) -> Result<[f64; 3], BmError> {
        self.guard(x, y)?;
        let (dh, ph) = self.reduced_delta_p(x, y, u)?;
        if dh.abs() < 1e-12 {
            return Err(BmError::DenominatorGuard { x, y, d: dh });
        }
        Ok([x, x * x * u, (ph - u * dh) / dh])
    }

    /// `(0, −a/2b, −a/b)` at `(x, y)`.
    pub fn admissible_u(&self, x: f64, y: f64) -> Result<[f64; 3], BmError> {
        let (a, b) = (self.a.eval(x, y)?, self.b.eval(x, y)?);
        if b.abs() < 1e-12 {
            return Err(BmError::BVanishes { x, y });
        }
        Ok([0.0, -a / (2.0 * b), -a / b])
    }

    /// Jacobian of the blown-up field by central differences.
    pub fn blowup_jacobian(&self, x: f64, y: f64, u: f64) -> Result<Matrix3<f64>, BmError> {
        let z = [x, y, u];
        let mut j = Matrix3::zeros();
        for c in 0..3 {
            let h = 1e-5 * (1.0 + z[c].abs());
            let (mut zp, mut zm) = (z, z);
            zp[c] += h;
            zm[c] -= h;
            let fp = self.blowup_field_at(zp[0], zp[1], zp[2])?;
            let fm = self.blowup_field_at(zm[0], zm[1], zm[2])?;
            // Fourth-order stencil for accuracy at the 1e-10 level.
            let (mut zp2, mut zm2) = (z, z);
            zp2[c] += 2.0 * h;
            zm2[c] -= 2.0 * h;
            let fp2 = self.blowup_field_at(zp2[0], zp2[1], zp2[2])?;
            let fm2 = self.blowup_field_at(zm2[0], zm2[1], zm2[2])?;
            for r in 0..3 {
                j[(r, c)] = (8.0 * (fp[r] - fm[r]) - (fp2[r] - fm2[r])) / (12.0 * h);
            }
        }
        Ok(j)
    }

    /// Spectrum at `(0, y0, u_i)` normalized so the eigenvalue along `x` is 1:
    /// returns `(1, λ, 0)` with `λ` the eigenvalue along `∂u`.
    pub fn blowup_spectrum(&self, y0: f64, which: usize) -> Result<BlowupSpectrum, BmError> {
        let u = self.admissible_u(0.0, y0)?[which.min(2)];
        let j = self.blowup_jacobian(0.0, y0, u)?;
        let ev = j.complex_eigenvalues();
        let eig: Vec<f64> = ev.iter().map(|c| c.re).collect();
        let x_eig = j[(0, 0)];
        // The u-row decouples at x = 0: ∂u is an eigenvector iff the other
        // entries of the u-column vanish.
        let lambda = j[(2, 2)];
        let du_is_eigenvector = j[(0, 2)].abs() < 1e-8 && j[(1, 2)].abs() < 1e-8;
        let mut rest: Vec<f64> = eig.clone();
        for target in [x_eig, lambda] {
            if let Some(k) = rest
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .map(|(k, _)| k)
            {
                rest.remove(k);
            }
        }
        let third = rest.first().copied().unwrap_or(f64::NAN);
        Ok(BlowupSpectrum {
            u,
            normalized: [1.0, lambda / x_eig, third / x_eig],
            eigenvalues: eig,
            du_is_eigenvector,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSpectrum {
    pub u: f64,
    /// `(1, λ, 0)` after normalization.
    pub normalized: [f64; 3],
    pub eigenvalues: Vec<f64>,
    pub du_is_eigenvector: bool,
}

/// `λ = (n−2)/n`, the exponent of the family through the middle admissible value.
pub fn family_exponent(n: usize) -> f64 {
    (n as f64 - 2.0) / n as f64
}

/// A geodesic through the degenerate point, traced in the blow-up chart.
#[derive(Debug, Clone, PartialEq)]
pub struct BmFamilyMember {
    /// `lim (u − u₁)/|x|^λ` on this side.
    pub alpha: f64,
    /// Sign of `x` along the member.
    pub side: f64,
    pub trace: GeodesicTrace,
}

/// Start offset in `x` for blow-up shooting.
pub const BM_SHOOT_EPS: f64 = 1e-6;

/// Family of geodesics through `(0, y0)` in the middle admissible direction:
/// on each side of `x = 0` the member with label `α` starts at `x = ±ε`,
/// `u = u₁ + α ε^λ`, with the start ordinate corrected so that the backward
/// flow lands on `(0, y0)`; it is then followed outward to `|x| = x_max` or
/// until it leaves `domain`. Traces carry `p = xu` in the P-chart.
pub fn bm_family_shoot(
    alm: &AdaptedLocalMetric,
    y0: f64,
    alphas: &[f64],
    x_max: f64,
    domain: BBox,
) -> Result<Vec<BmFamilyMember>, BmError> {
    let (a, b) = (alm.a.eval(0.0, y0)?, alm.b.eval(0.0, y0)?);
    let g0 = alm.jet(0.0, y0, 0.0)?.g.v;
    if a.abs() < 1e-12 || b.abs() < 1e-12 || g0.abs() < 1e-12 {
        return Err(BmError::TangencyOrder { y: y0 });
    }
    let u1 = alm.admissible_u(0.0, y0)?[1];
    let lambda = family_exponent(alm.n());
    let tol = Tolerances { rtol: 1e-12, atol: 1e-15, h_init: 1e-3, h_min: 1e-14, h_max: 0.05 };
    let mut out = Vec::new();
    for &alpha in alphas {
        for side in [-1.0, 1.0] {
            let x0 = side * BM_SHOOT_EPS;
            let u0 = u1 + alpha * BM_SHOOT_EPS.powf(lambda);
            // Newton on the start ordinate for the landing condition.
            let land = |ys: f64| -> Result<f64, BmError> {
                let pts = integrate_blowup(alm, [x0, ys, u0], -1.0, BM_SHOOT_EPS * 1e-6, domain, tol)?;
                Ok(pts.last().map_or(f64::NAN, |p| p[1]) - y0)
            };
            let mut ys = y0 + u1 * x0 * x0 / 2.0;
            let mut ok = false;
            for _ in 0..10 {
                let r = land(ys)?;
                if r.abs() < 1e-15 {
                    ok = true;
                    break;
                }
                let h = 1e-9;
                let d = (land(ys + h)? - r) / h;
                if d == 0.0 || !d.is_finite() {
                    break;
                }
                ys -= r / d;
            }
            if !ok && land(ys)?.abs() > 1e-12 {
                return Err(BmError::Shooting { alpha, reason: "landing did not converge".into() });
            }
            let inner = integrate_blowup(alm, [x0, ys, u0], -1.0, BM_SHOOT_EPS * 1e-3, domain, tol)?;
            let outer = integrate_blowup(alm, [x0, ys, u0], 1.0, x_max, domain, tol)?;
            let mut pts: Vec<[f64; 3]> = inner.into_iter().rev().collect();
            pts.extend(outer.into_iter().skip(1));
            let pts = thin(&pts);
            let last = pts.len() - 1;
            let exited = pts[last][0].abs() < x_max * (1.0 - 1e-9);
            let points = pts
                .iter()
                .map(|s| TracePoint { t: s[0].abs().ln(), pt: PtmPoint::p_chart(s[0], s[1], s[0] * s[2]) })
                .collect();
            let events = if exited { vec![TraceEvent { index: last, kind: EventKind::DomainExit }] } else { vec![] };
            out.push(BmFamilyMember { alpha, side, trace: GeodesicTrace { points, events } });
        }
    }
    Ok(out)
}

/// Keeps a point once `|x|` grew by 2% or the projected chord exceeds 2e-3.
fn thin(pts: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let mut out: Vec<[f64; 3]> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let keep = match out.last() {
            None => true,
            Some(q) => {
                i + 1 == pts.len()
                    || p[0].abs() >= 1.02 * q[0].abs()
                    || (p[0] - q[0]).hypot(p[1] - q[1]) >= 2e-3
            }
        };
        if keep {
            out.push(*p);
        }
    }
    out
}

/// Integrates the blown-up field from `start` along `sigma` until `|x|`
/// crosses `x_stop` (inward when `sigma < 0`, outward otherwise) or the
/// projection leaves `domain`. Output is resampled densely in `x`.
fn integrate_blowup(
    alm: &AdaptedLocalMetric,
    start: [f64; 3],
    sigma: f64,
    x_stop: f64,
    domain: BBox,
    tol: Tolerances,
) -> Result<Vec<[f64; 3]>, BmError> {
    let mut err = None;
    let mut field = |s: &[f64; 3]| -> Option<[f64; 3]> {
        match alm.blowup_field_at(s[0], s[1], s[2]) {
            Ok(f) => Some([sigma * f[0], sigma * f[1], sigma * f[2]]),
            Err(e) => {
                err = Some(e);
                None
            }
        }
    };
    let mut st = Stepper::new(start, tol);
    let mut out = vec![start];
    let done = |s: &[f64; 3]| if sigma < 0.0 { s[0].abs() <= x_stop } else { s[0].abs() >= x_stop };
    for _ in 0..100_000 {
        let step = match st.step(&mut field) {
            Ok(s) => s,
            Err(_) => return err.map_or(Ok(out), Err),
        };
        let k = 16;
        for i in 1..=k {
            let s = step.at(i as f64 / k as f64);
            if !domain.contains(s[0], s[1]) {
                return Ok(out);
            }
            if done(&s) {
                // Finish exactly on |x| = x_stop.
                let prev = *out.last().unwrap();
                let th = crate::ode::bisect(
                    |th| step.at(th)[0].abs() - x_stop,
                    ((i - 1) as f64 / k as f64).min(1.0),
                    i as f64 / k as f64,
                    1e-14,
                );
                let s = step.at(th);
                if prev != s {
                    out.push(s);
                }
                return Ok(out);
            }
            out.push(s);
        }
    }
    Ok(out)
}

/// Bivariate polynomial with terms `c x^i y^j`, used by the adapted-chart helper.
#[derive(Debug, Clone, PartialEq, Default)]
struct Bivariate(BTreeMap<(u32, u32), f64>);

impl Bivariate {
    fn from_expr(e: &Expr) -> Option<Self> {
        let mut out = BTreeMap::new();
        match e {
            Expr::Const(c) => {
                out.insert((0, 0), *c);
            }
            Expr::Var(Var::X) => {
                out.insert((1, 0), 1.0);
            }
            Expr::Var(Var::Y) => {
                out.insert((0, 1), 1.0);
            }
            Expr::Add(a, b) => return Some(Self::from_expr(a)?.add(&Self::from_expr(b)?)),
            Expr::Mul(a, b) => return Some(Self::from_expr(a)?.mul(&Self::from_expr(b)?)),
            Expr::Neg(a) => return Some(Self::from_expr(a)?.scale(-1.0)),
            Expr::Pow(a, k) if *k >= 0 => {
                let base = Self::from_expr(a)?;
                let mut acc = Self::from_expr(&Expr::Const(1.0))?;
                for _ in 0..*k {
                    acc = acc.mul(&base);
                }
                return Some(acc);
            }
            Expr::Div(a, b) => {
                let c = Self::from_expr(b)?.as_const()?;
                return (c != 0.0).then(|| Self::from_expr(a)).flatten().map(|p| p.scale(1.0 / c));
            }
            Expr::Pow(..) => return None,
        }
        Some(Self(out).trimmed())
    }

    fn trimmed(mut self) -> Self {
        self.0.retain(|_, c| *c != 0.0);
        self
    }

    fn as_const(&self) -> Option<f64> {
        match self.0.len() {
            0 => Some(0.0),
            1 => self.0.get(&(0, 0)).copied(),
            _ => None,
        }
    }

    fn add(&self, o: &Self) -> Self {
        let mut m = self.0.clone();
        for (k, c) in &o.0 {
            *m.entry(*k).or_insert(0.0) += c;
        }
        Self(m).trimmed()
    }

    fn mul(&self, o: &Self) -> Self {
        let mut m = BTreeMap::new();
        for ((i, j), c) in &self.0 {
            for ((k, l), d) in &o.0 {
                *m.entry((i + k, j + l)).or_insert(0.0) += c * d;
            }
        }
        Self(m).trimmed()
    }

    fn scale(&self, s: f64) -> Self {
        Self(self.0.iter().map(|(k, c)| (*k, c * s)).collect()).trimmed()
    }

    fn div_x(&self) -> Option<Self> {
        self.0.keys().all(|(i, _)| *i >= 1).then(|| Self(self.0.iter().map(|((i, j), c)| ((i - 1, *j), *c)).collect()))
    }

    fn to_expr(&self) -> Expr {
        self.0.iter().fold(Expr::constant(0.0), |acc, ((i, j), c)| {
            let term = Expr::mul(
                Expr::constant(*c),
                Expr::mul(Expr::pow(Expr::x(), *i as i32), Expr::pow(Expr::y(), *j as i32)),
            );
            Expr::add(acc, term)
        })
    }
}

/// Best-effort adapted chart for an immersion already in adapted position:
/// some component equals `y`, another has `f_ix` divisible by `x` (as a
/// polynomial) with `f_iy` nonzero at the origin; the remaining components
/// become the factors of `G`. Returns the adapted metric together with the
/// component indices used (1-based) and the largest residual between the
/// induced metric and the adapted one on a probe grid.
pub fn adapted_from_immersion(imm: &SurfaceImmersion) -> Result<(AdaptedLocalMetric, (usize, usize), f64), BmError> {
    let n = imm.n();
    let is_y = |f: &ScalarField| {
        Bivariate::from_expr(f.expr()).is_some_and(|p| p.0.len() == 1 && p.0.get(&(0, 1)) == Some(&1.0))
    };
    let Some(j) = (0..n).find(|&j| is_y(&imm.f[j])) else {
        return Err(BmError::NotAdapted("no component equal to y".into()));
    };
    for i in (0..n).filter(|&i| i != j) {
        let fi = &imm.f[i];
        let Some(fx) = Bivariate::from_expr(fi.dx().expr()) else { continue };
        if fx.0.is_empty() {
            continue;
        }
        let Some(a) = fx.div_x() else { continue };
        let b = fi.dy().clone();
        if b.eval(0.0, 0.0).map_or(true, |v| v.abs() < 1e-12) {
            continue;
        }
        let g: Vec<(ScalarField, ScalarField)> = (0..n)
            .filter(|&k| k != i && k != j)
            .map(|k| (imm.f[k].dx().clone(), imm.f[k].dy().clone()))
            .collect();
        let alm = AdaptedLocalMetric::new(ScalarField::new(a.to_expr()), b, g);
        let residual = adapted_residual(imm, &alm)?;
        return Ok((alm, (i + 1, j + 1), residual));
    }
    Err(BmError::NotAdapted("no component with f_x divisible by x".into()))
}

fn adapted_residual(imm: &SurfaceImmersion, alm: &AdaptedLocalMetric) -> Result<f64, BmError> {
    let m1 = induced_metric(imm)?;
    let m2 = alm.to_metric()?;
    let mut worst: f64 = 0.0;
    for i in -3..=3 {
        for k in -3..=3 {
            let (x, y, p) = (0.1 * i as f64, 0.1 * k as f64, 0.3 * (i + k) as f64);
            worst = worst.max((m1.eval_f(x, y, p)? - m2.eval_f(x, y, p)?).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tongue() -> AdaptedLocalMetric {
        AdaptedLocalMetric::parse("-4", "1", &[("1", "0")]).unwrap()
    }

    #[test]
    fn induced_metric_of_the_tongue_surface() {
        let imm = SurfaceImmersion::parse(&["x", "y", "y - 2*x^2"]).unwrap();
        let m = induced_metric(&imm).unwrap();
        for &(x, y) in &[(0.0, 0.0), (0.3, -1.0), (-2.5, 4.0)] {
            let a = m.coeff_values(x, y).unwrap();
            assert_eq!(a, vec![0.0, -4.0 * x, 1.0, 0.0]);
        }
    }

    #[test]
    fn constant_component_is_rejected() {
        assert!(matches!(
            SurfaceImmersion::parse(&["x", "y", "3"]),
            Err(BmError::Degenerate { index: 3, at: None })
        ));
        let imm = SurfaceImmersion::parse(&["x", "y", "x^2"]).unwrap();
        assert!(imm.validate_on(BBox::square(1.0), 4).is_err());
    }

    #[test]
    fn adapted_helper_recovers_the_tongue() {
        let imm = SurfaceImmersion::parse(&["x", "y", "y - 2*x^2"]).unwrap();
        let (alm, pair, residual) = adapted_from_immersion(&imm).unwrap();
        assert_eq!(pair, (3, 2));
        assert_eq!(residual, 0.0);
        assert_eq!(alm.a.eval(0.7, 0.1).unwrap(), -4.0);
        assert_eq!(alm.b.eval(0.7, 0.1).unwrap(), 1.0);
        assert_eq!(alm.admissible_u(0.0, 0.0).unwrap(), [0.0, 2.0, 4.0]);
    }

    #[test]
    fn reduced_quantities_match_direct_division() {
        let alm = AdaptedLocalMetric::parse("-4 + y", "1 + x*y", &[("1 + x", "0.5*y"), ("y", "2 - x")]).unwrap();
        let m = alm.to_metric().unwrap();
        for &(x, y, u) in &[(0.3, 0.2, 1.5), (-0.2, 0.4, -0.7)] {
            let (dh, ph) = alm.reduced_delta_p(x, y, u).unwrap();
            let d = m.delta_poly(x, y).unwrap().eval(x * u) / (x * x);
            let p = m.p_poly(x, y).unwrap().eval(x * u) / (x * x);
            assert!((dh - d).abs() < 1e-10 * (1.0 + d.abs()), "{dh} {d}");
            assert!((ph - p).abs() < 1e-10 * (1.0 + p.abs()), "{ph} {p}");
        }
    }

    #[test]
    fn du_vanishes_exactly_at_admissible_values() {
        let alm = tongue();
        for u in [0.0, 2.0, 4.0] {
            assert!(alm.blowup_field_at(0.0, 0.3, u).unwrap()[2].abs() < 1e-12);
        }
        let f = alm.blowup_field_at(0.0, 0.3, 1.0).unwrap();
        assert_eq!((f[0], f[1]), (0.0, 0.0));
        assert!(f[2].abs() > 0.1);
    }

    #[test]
    fn blowup_spectra_at_admissible_values() {
        let alm = tongue();
        let s1 = alm.blowup_spectrum(0.0, 1).unwrap();
        assert!((s1.normalized[1] - 1.0 / 3.0).abs() < 1e-8 && s1.normalized[2].abs() < 1e-8);
        for which in [0, 2] {
            let s = alm.blowup_spectrum(0.0, which).unwrap();
            assert!((s.normalized[1] + 0.5).abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn guard_refuses_degenerate_data() {
        let alm = AdaptedLocalMetric::parse("0", "1", &[("1", "0")]).unwrap();
        assert!(matches!(alm.blowup_field_at(0.0, 0.0, 1.0), Err(BmError::DenominatorGuard { .. })));
        let alm = AdaptedLocalMetric::parse("1", "0", &[("1", "0")]).unwrap();
        assert!(matches!(alm.admissible_u(0.0, 0.0), Err(BmError::BVanishes { .. })));
    }
}
