//! Singular points of the geodesic field, their spectra and kinds, implicit
//! curve tracing for the discriminant curve and the curves `S_i`, and
//! admissible directions for quadratic metrics.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{Complex, Matrix2x3, Matrix3, Vector3};
use thiserror::Error;

use crate::algebra::Dual;
use crate::flow::{chart_values, BBox, PtmPoint};
use crate::metric::{delta_and_p, Chart, MetricError, PseudoFinslerMetric, Stratum};
use crate::poly::{resultant, RealPolynomial};

/// Relative band for calling an eigenvalue real or imaginary.
pub const KIND_TOL: f64 = 1e-6;
/// `‖(Δ, P)‖ < SINGULAR_TOL (1 + scale)²` counts as a singular point.
pub const SINGULAR_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SingularError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("point ({x}, {y}) is in {stratum}, expected M-")]
    WrongStratum { x: f64, y: f64, stratum: Stratum },
    #[error("operation requires a quadratic metric, got degree {0}")]
    RequiresQuadratic(usize),
    #[error("point is off the discriminant curve (D_F = {disc})")]
    OffDiscriminant { disc: f64 },
    #[error("P vanishes identically at ({x}, {y})")]
    DegenerateP { x: f64, y: f64 },
    #[error("Newton polish did not converge")]
    Polish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SingularKind {
    /// Nonzero real pair with `λ₁ + λ₂ = 0` (saddle-type).
    RealPair,
    /// Nonzero imaginary pair.
    ImaginaryPair,
    /// Real pair in ratio 3:2 at a transverse point of the discriminant curve.
    Resonant32,
    /// Anything else, including the triple-zero spectrum.
    Degenerate,
    /// The point is not a singular point of the field.
    NotApplicable,
}

impl fmt::Display for SingularKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SingularKind::RealPair => "real-pair",
            SingularKind::ImaginaryPair => "imaginary-pair",
            SingularKind::Resonant32 => "resonant-3:2",
            SingularKind::Degenerate => "degenerate",
            SingularKind::NotApplicable => "not-applicable",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularPoint {
    pub point: PtmPoint,
    pub jacobian: Matrix3<f64>,
    /// Sorted by modulus, smallest first.
    pub eigenvalues: [Complex<f64>; 3],
    pub kind: SingularKind,
}

impl SingularPoint {
    /// The two eigenvalues of largest modulus.
    pub fn pair(&self) -> (Complex<f64>, Complex<f64>) {
        (self.eigenvalues[1], self.eigenvalues[2])
    }
}

/// The two real roots of Δ at a point of `M−`, ascending.
pub fn singular_roots(m: &PseudoFinslerMetric, x: f64, y: f64) -> Result<(f64, f64), SingularError> {
    let stratum = m.classify_point(x, y)?;
    if stratum != Stratum::MMinus {
        return Err(SingularError::WrongStratum { x, y, stratum });
    }
    let roots = m.delta_poly(x, y)?.real_roots();
    match roots.as_slice() {
        [a, b] => Ok((a.value, b.value)),
        _ => Err(SingularError::WrongStratum { x, y, stratum }),
    }
}

/// Derivative of the chart field with respect to `(x, y, slope)`.
pub fn jacobian_at(m: &PseudoFinslerMetric, pt: PtmPoint) -> Result<Matrix3<f64>, MetricError> {
    let x = Dual::<3>::var(pt.x, 0);
    let y = Dual::<3>::var(pt.y, 1);
    let s = Dual::<3>::var(pt.slope, 2);
    let jet = m.jet_generic(pt.chart, &x, &y)?;
    let (d, p) = delta_and_p(m.degree(), &jet, &s);
    let sd = s * d;
    let rows = match pt.chart {
        Chart::P => [d, sd, p],
        Chart::Q => [sd, d, p],
    };
    Ok(Matrix3::from_fn(|i, j| rows[i].d[j]))
}

/// Eigenvalues sorted by modulus.
pub fn eigenvalues(j: &Matrix3<f64>) -> [Complex<f64>; 3] {
    let ev = j.complex_eigenvalues();
    let mut v = [ev[0], ev[1], ev[2]];
    v.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    v
}

/// Real eigenvalues (real parts) with unit eigenvectors, sorted by modulus.
pub fn real_eigenpairs(j: &Matrix3<f64>) -> [(f64, Vector3<f64>); 3] {
    eigenvalues(j).map(|l| (l.re, null_vector(&(j - Matrix3::identity() * l.re))))
}

fn null_vector(a: &Matrix3<f64>) -> Vector3<f64> {
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    vt.row(k).transpose()
}

pub fn classify_singular(m: &PseudoFinslerMetric, pt: PtmPoint) -> Result<SingularPoint, MetricError> {
    let jacobian = jacobian_at(m, pt)?;
    let eigenvalues = eigenvalues(&jacobian);
    let v = chart_values(m, pt.chart, pt.x, pt.y, pt.slope)?;
    let kind = if v.delta.hypot(v.p) >= SINGULAR_TOL * (1.0 + v.scale).powi(2) {
        SingularKind::NotApplicable
    } else {
        kind_of(m, pt, &eigenvalues, v.scale)?
    };
    Ok(SingularPoint { point: pt, jacobian, eigenvalues, kind })
}

fn kind_of(m: &PseudoFinslerMetric, pt: PtmPoint, ev: &[Complex<f64>; 3], scale: f64) -> Result<SingularKind, MetricError> {
    let (l0, l1, l2) = (ev[0], ev[1], ev[2]);
    let big = l2.norm();
    if big <= 1e-9 * (1.0 + scale).powi(2) || l0.norm() > 1e-7 * big || l1.norm() <= 1e-7 * big {
        return Ok(SingularKind::Degenerate);
    }
    let real = l1.im.abs() < KIND_TOL * l1.norm() && l2.im.abs() < KIND_TOL * l2.norm();
    let imaginary = l1.re.abs() < KIND_TOL * l1.norm() && l2.re.abs() < KIND_TOL * l2.norm();
    if imaginary {
        return Ok(SingularKind::ImaginaryPair);
    }
    if !real {
        return Ok(SingularKind::Degenerate);
    }
    if (l1.re + l2.re).abs() < KIND_TOL * big {
        return Ok(SingularKind::RealPair);
    }
    let ratio = l2.re / l1.re;
    if (ratio - 1.5).abs() < KIND_TOL && m.degree() == 3 && pt.chart == Chart::P {
        if m.classify_point(pt.x, pt.y)? != Stratum::M01 {
            return Ok(SingularKind::Degenerate);
        }
        let g = m.disc_f_gradient(pt.x, pt.y)?;
        if (g[0] + pt.slope * g[1]).abs() > 1e-6 * scale.powi(4) {
            return Ok(SingularKind::Resonant32);
        }
    }
    Ok(SingularKind::Degenerate)
}

/// `res_p(Δ, P)` at `(x, y)`.
pub fn res_delta_p(m: &PseudoFinslerMetric, x: f64, y: f64) -> Result<f64, MetricError> {
    Ok(resultant(&m.delta_poly(x, y)?, &m.p_poly(x, y)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveLabel {
    M0,
    S1,
    S2,
    SingularLineNet,
    DoubleDirection,
    Isotropic,
    Geodesic,
}

impl fmt::Display for CurveLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CurveLabel::M0 => "M0",
            CurveLabel::S1 => "S1",
            CurveLabel::S2 => "S2",
            CurveLabel::SingularLineNet => "singular-line",
            CurveLabel::DoubleDirection => "double-direction",
            CurveLabel::Isotropic => "isotropic",
            CurveLabel::Geodesic => "geodesic",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSamples {
    pub label: CurveLabel,
    pub points: Vec<[f64; 2]>,
    /// Slope attached to each sample, when the curve lives in the PTM.
    pub slopes: Option<Vec<f64>>,
}

impl CurveSamples {
    /// CSV rows `label,x,y[,p]`, without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.points.iter().enumerate() {
            match &self.slopes {
                Some(s) => out.push_str(&format!("{},{:.12e},{:.12e},{:.12e}\n", self.label, p[0], p[1], s[i])),
                None => out.push_str(&format!("{},{:.12e},{:.12e},\n", self.label, p[0], p[1])),
            }
        }
        out
    }
}

/// Zero set of `g` in `domain` by marching squares on an `res × res` grid,
/// with every vertex Newton-polished onto `g = 0` along the gradient.
/// Vertices that do not polish below `tol` (sign changes across poles) are
/// dropped together with their segments.
pub fn trace_implicit_curve<G>(g: G, domain: BBox, res: usize, tol: f64, label: CurveLabel) -> Vec<CurveSamples>
where
    G: Fn(f64, f64) -> Option<f64>,
{
    let n = res.max(2);
    let hx = (domain.xmax - domain.xmin) / n as f64;
    let hy = (domain.ymax - domain.ymin) / n as f64;
    let gx = |i: usize| domain.xmin + i as f64 * hx;
    let gy = |j: usize| domain.ymin + j as f64 * hy;
    // Corners where g is undefined (e.g. removable 0/0) are nudged slightly.
    let sample = |x: f64, y: f64| {
        g(x, y)
            .filter(|v| v.is_finite())
            .or_else(|| g(x + 1.3e-7 * hx, y + 0.7e-7 * hy).filter(|v| v.is_finite()))
    };
    let vals: Vec<Vec<Option<f64>>> = (0..=n).map(|i| (0..=n).map(|j| sample(gx(i), gy(j))).collect()).collect();

    // Edge keys: (i, j, 0) horizontal edge from (i,j) to (i+1,j); (i, j, 1) vertical to (i,j+1).
    type Key = (usize, usize, u8);
    let mut vertex: HashMap<Key, Option<[f64; 2]>> = HashMap::new();
    let mut crossing = |k: Key| -> Option<[f64; 2]> {
        *vertex.entry(k).or_insert_with(|| {
            let (i, j, d) = k;
            let (i2, j2) = if d == 0 { (i + 1, j) } else { (i, j + 1) };
            let (a, b) = (vals[i][j]?, vals[i2][j2]?);
            let t = if a == b { 0.5 } else { a / (a - b) };
            let p = [gx(i) + t * (gx(i2) - gx(i)), gy(j) + t * (gy(j2) - gy(j))];
            polish_point(&g, p, hx.max(hy), tol)
        })
    };

    let mut segments: Vec<(Key, Key)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let corners = [vals[i][j], vals[i + 1][j], vals[i + 1][j + 1], vals[i][j + 1]];
            let Some(c) = corners.iter().copied().collect::<Option<Vec<f64>>>() else { continue };
            let edges: [Key; 4] = [(i, j, 0), (i + 1, j, 1), (i, j + 1, 0), (i, j, 1)];
            let cut: Vec<Key> = (0..4)
                .filter(|&e| (c[e] > 0.0) != (c[(e + 1) % 4] > 0.0))
                .map(|e| edges[e])
                .collect();
            match cut.len() {
                2 => segments.push((cut[0], cut[1])),
                4 => {
                    let center = g(gx(i) + 0.5 * hx, gy(j) + 0.5 * hy).unwrap_or(0.0);
                    // cut[k] is the edge after corner k; pair to keep the center's sign region connected.
                    if (center > 0.0) == (c[0] > 0.0) {
                        segments.push((cut[0], cut[1]));
                        segments.push((cut[2], cut[3]));
                    } else {
                        segments.push((cut[0], cut[3]));
                        segments.push((cut[1], cut[2]));
                    }
                }
                _ => {}
            }
        }
    }
    let segments: Vec<(Key, Key)> =
        segments.into_iter().filter(|&(a, b)| crossing(a).is_some() && crossing(b).is_some()).collect();

    // Chain segments into polylines.
    let mut adj: HashMap<Key, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        adj.entry(a).or_default().push(s);
        adj.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut curves = Vec::new();
    let mut order: Vec<usize> = (0..segments.len()).collect();
    // Start from open ends first so open curves come out whole.
    order.sort_by_key(|&s| {
        let (a, b) = segments[s];
        usize::from(adj[&a].len() != 1 && adj[&b].len() != 1)
    });
    for s0 in order {
        if used[s0] {
            continue;
        }
        used[s0] = true;
        let (a, b) = segments[s0];
        let mut keys = vec![a, b];
        for forward in [true, false] {
            loop {
                let end = if forward { *keys.last().unwrap() } else { keys[0] };
                let next = adj[&end].iter().copied().find(|&s| !used[s]);
                let Some(s) = next else { break };
                used[s] = true;
                let (c, d) = segments[s];
                let other = if c == end { d } else { c };
                if forward {
                    keys.push(other);
                } else {
                    keys.insert(0, other);
                }
            }
        }
        let points: Vec<[f64; 2]> = keys.iter().filter_map(|&k| crossing(k)).collect();
        curves.push(CurveSamples { label, points, slopes: None });
    }
    curves
}

fn polish_point<G: Fn(f64, f64) -> Option<f64>>(g: &G, mut p: [f64; 2], cell: f64, tol: f64) -> Option<[f64; 2]> {
    let start = p;
    for _ in 0..30 {
        let v = g(p[0], p[1])?;
        if v.abs() <= tol {
            return Some(p);
        }
        let h = 1e-7 * (1.0 + p[0].abs().max(p[1].abs()));
        let gxv = (g(p[0] + h, p[1])? - g(p[0] - h, p[1])?) / (2.0 * h);
        let gyv = (g(p[0], p[1] + h)? - g(p[0], p[1] - h)?) / (2.0 * h);
        let n2 = gxv * gxv + gyv * gyv;
        if n2 == 0.0 || !n2.is_finite() {
            return None;
        }
        let step = [v * gxv / n2, v * gyv / n2];
        p = [p[0] - step[0], p[1] - step[1]];
        if (p[0] - start[0]).hypot(p[1] - start[1]) > 2.0 * cell {
            return None;
        }
        // Converged to rounding level of g.
        if step[0].hypot(step[1]) <= 1e-14 * (1.0 + p[0].abs().max(p[1].abs())) {
            return Some(p);
        }
    }
    (g(p[0], p[1])?.abs() <= tol).then_some(p)
}

/// Newton with minimum-norm steps onto `Δ = P = 0` in `(x, y, p)`.
pub fn polish_on_s(m: &PseudoFinslerMetric, x: f64, y: f64, p: f64) -> Result<[f64; 3], SingularError> {
    let mut z = Vector3::new(x, y, p);
    for _ in 0..40 {
        let (r, j) = delta_p_jacobian(m, z)?;
        let scale = chart_values(m, Chart::P, z[0], z[1], z[2])?.scale;
        if r.norm() <= 1e-13 * (1.0 + scale).powi(2) {
            return Ok([z[0], z[1], z[2]]);
        }
        let jjt = j * j.transpose();
        let Some(inv) = jjt.try_inverse() else { return Err(SingularError::Polish) };
        z -= j.transpose() * (inv * r);
    }
    let (r, _) = delta_p_jacobian(m, z)?;
    let scale = chart_values(m, Chart::P, z[0], z[1], z[2])?.scale;
    if r.norm() <= 1e-10 * (1.0 + scale).powi(2) {
        Ok([z[0], z[1], z[2]])
    } else {
        Err(SingularError::Polish)
    }
}

fn delta_p_jacobian(
    m: &PseudoFinslerMetric,
    z: Vector3<f64>,
) -> Result<(nalgebra::Vector2<f64>, Matrix2x3<f64>), MetricError> {
    let x = Dual::<3>::var(z[0], 0);
    let y = Dual::<3>::var(z[1], 1);
    let s = Dual::<3>::var(z[2], 2);
    let jet = m.jet_generic(Chart::P, &x, &y)?;
    let (d, p) = delta_and_p(m.degree(), &jet, &s);
    Ok((
        nalgebra::Vector2::new(d.v, p.v),
        Matrix2x3::new(d.d[0], d.d[1], d.d[2], p.d[0], p.d[1], p.d[2]),
    ))
}

/// The curves `S_i ⊂ M−` where a root `p_i` of Δ is also a root of P.
///
/// `res_p(Δ, P)` also vanishes on the discriminant curve (the double
/// isotropic direction is a singular direction there), so the traced function
/// is `res_p(Δ, P) / D_F`, normalized by coefficient scales. Zero-set samples
/// are lifted to the Δ-root minimizing `|P|`, polished onto `Δ = P = 0` and
/// kept only in `M−`. Labels follow the order of the Δ-roots.
pub fn trace_s_curves(m: &PseudoFinslerMetric, domain: BBox, res: usize) -> Result<Vec<CurveSamples>, SingularError> {
    let g = |x: f64, y: f64| -> Option<f64> {
        let d = m.delta_poly(x, y).ok()?;
        let p = m.p_poly(x, y).ok()?;
        let disc = m.disc_f(x, y).ok()?;
        let a = m.coeff_values(x, y).ok()?;
        let scale = a.iter().fold(0.0f64, |mx, c| mx.max(c.abs()));
        let norm = |q: &RealPolynomial| q.coeffs().iter().map(|c| c * c).sum::<f64>().sqrt();
        let s = norm(&d).powi(p.degree().unwrap_or(0) as i32) * norm(&p).powi(d.degree().unwrap_or(0) as i32)
            / scale.powi(4);
        (s > 0.0 && disc != 0.0).then(|| resultant(&d, &p) / (disc * s))
    };
    let raw = trace_implicit_curve(g, domain, res, 1e-12, CurveLabel::S1);
    let mut out: Vec<CurveSamples> = Vec::new();
    for curve in raw {
        let mut pieces: [Vec<([f64; 2], f64)>; 2] = [Vec::new(), Vec::new()];
        let flush = |pieces: &mut [Vec<([f64; 2], f64)>; 2], out: &mut Vec<CurveSamples>, which: usize| {
            let piece = std::mem::take(&mut pieces[which]);
            if piece.len() >= 2 {
                out.push(CurveSamples {
                    label: if which == 0 { CurveLabel::S1 } else { CurveLabel::S2 },
                    points: piece.iter().map(|(q, _)| *q).collect(),
                    slopes: Some(piece.iter().map(|(_, s)| *s).collect()),
                });
            }
        };
        let mut current: Option<usize> = None;
        for q in curve.points {
            let Ok((r1, r2)) = singular_roots(m, q[0], q[1]) else { continue };
            let pp = m.p_poly(q[0], q[1])?;
            let which = usize::from(pp.eval(r2).abs() < pp.eval(r1).abs());
            let root = if which == 0 { r1 } else { r2 };
            let Ok(z) = polish_on_s(m, q[0], q[1], root) else { continue };
            if current.is_some_and(|c| c != which) {
                flush(&mut pieces, &mut out, current.unwrap());
            }
            current = Some(which);
            pieces[which].push(([z[0], z[1]], z[2]));
        }
        if let Some(c) = current {
            flush(&mut pieces, &mut out, c);
        }
    }
    Ok(out)
}

/// Direction data at a point of a curve `S_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangencyReport {
    pub x: f64,
    pub y: f64,
    pub p_i: f64,
    /// Unit tangent of the projected curve `S_i`.
    pub tangent: [f64; 2],
    /// Sine of the angle between `(1, p_i)` and the tangent.
    pub sine: f64,
    pub transverse: bool,
    /// Whether the product of the two nonzero eigenvalues is bounded away from 0.
    pub eigen_nonzero: bool,
}

/// Transversality of the direction `p_i` to `S_i` at a point polished onto
/// `Δ = P = 0`. The projected tangent is that of the intersection curve
/// `{Δ = 0} ∩ {P = 0}`.
pub fn tangency_direction_on_s(m: &PseudoFinslerMetric, x: f64, y: f64, p: f64) -> Result<TangencyReport, SingularError> {
    let [x, y, p] = polish_on_s(m, x, y, p)?;
    let (_, j) = delta_p_jacobian(m, Vector3::new(x, y, p))?;
    let t3 = j.row(0).transpose().cross(&j.row(1).transpose());
    let tn = t3[0].hypot(t3[1]);
    let tangent = if tn > 0.0 { [t3[0] / tn, t3[1] / tn] } else { [0.0, 0.0] };
    let dn = 1.0f64.hypot(p);
    let sine = (tangent[1] - p * tangent[0]) / dn;
    let sp = classify_singular(m, PtmPoint::p_chart(x, y, p))?;
    let scale = chart_values(m, Chart::P, x, y, p)?.scale;
    // λ₁λ₂ vanishes linearly at a tangency while each eigenvalue only
    // vanishes like a square root, so the product is the sharper test.
    let eigen_nonzero = sp.eigenvalues[1].norm() * sp.eigenvalues[2].norm() > 1e-8 * (1.0 + scale).powi(4);
    Ok(TangencyReport { x, y, p_i: p, tangent, sine, transverse: sine.abs() > 1e-6, eigen_nonzero })
}

/// Points along a traced `S_i` curve where the direction `p_i` becomes
/// tangent (sign changes of the signed sine), refined by bisection along the
/// polyline and re-polished.
pub fn locate_tangencies(m: &PseudoFinslerMetric, curve: &CurveSamples) -> Result<Vec<TangencyReport>, SingularError> {
    let Some(slopes) = &curve.slopes else { return Ok(Vec::new()) };
    let reports: Vec<Option<TangencyReport>> = curve
        .points
        .iter()
        .zip(slopes)
        .map(|(q, &s)| tangency_direction_on_s(m, q[0], q[1], s).ok())
        .collect();
    let mut out = Vec::new();
    for k in 0..reports.len().saturating_sub(1) {
        let (Some(a), Some(b)) = (&reports[k], &reports[k + 1]) else { continue };
        if (a.sine > 0.0) == (b.sine > 0.0) {
            continue;
        }
        let (mut lo, mut hi) = (a.clone(), b.clone());
        for _ in 0..60 {
            let mid = tangency_direction_on_s(m, 0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), 0.5 * (lo.p_i + hi.p_i))?;
            if (mid.sine > 0.0) == (lo.sine > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            if (lo.x - hi.x).hypot(lo.y - hi.y) < 1e-12 {
                break;
            }
        }
        out.push(if lo.sine.abs() < hi.sine.abs() { lo } else { hi });
    }
    Ok(out)
}

/// Real roots of the cubic `P(x, y; ·)` at a point of the discriminant curve
/// of a quadratic metric.
pub fn admissible_directions_n2(m: &PseudoFinslerMetric, x: f64, y: f64) -> Result<Vec<f64>, SingularError> {
    if m.degree() != 2 {
        return Err(SingularError::RequiresQuadratic(m.degree()));
    }
    let f = m.f_poly(x, y)?;
    let scale = f.max_abs_coeff();
    let disc = f.coeff(1).powi(2) - 4.0 * f.coeff(0) * f.coeff(2);
    if disc.abs() > 1e-10 * scale * scale {
        return Err(SingularError::OffDiscriminant { disc });
    }
    let p = m.p_poly(x, y)?;
    if p.max_abs_coeff() <= 1e-14 * (1.0 + scale * scale) {
        return Err(SingularError::DegenerateP { x, y });
    }
    Ok(p.real_roots().iter().map(|r| r.value).collect())
}

/// `D_F` as an implicit function, for tracing the discriminant curve.
pub fn trace_discriminant_curve(m: &PseudoFinslerMetric, domain: BBox, res: usize) -> Vec<CurveSamples> {
    let g = |x: f64, y: f64| -> Option<f64> {
        let a = m.coeff_values(x, y).ok()?;
        let s = a.iter().fold(0.0f64, |mx, c| mx.max(c.abs()));
        let d = m.disc_f(x, y).ok()?;
        Some(if s > 0.0 { d / s.powi(4) } else { d })
    };
    trace_implicit_curve(g, domain, res, 1e-13, CurveLabel::M0)
}

/// Helper for callers holding a polynomial in `p` only.
pub fn real_root_values(p: &RealPolynomial) -> Vec<f64> {
    p.real_roots().iter().map(|r| r.value).collect()
}
