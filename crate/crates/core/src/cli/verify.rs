//! Identity and oracle checks run by the `verify` command.

use rand::Rng;

use crate::expr::{Expr, ScalarField};
use crate::flow::{field_in_p_coords, BBox, PtmPoint};
use crate::metric::{Chart, MetricError, PseudoFinslerMetric, Stratum};
use crate::polyanalysis::{check_multiple_roots, RootedPolynomial};
use crate::singular::classify_singular;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub max_residual: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, max_residual: f64, threshold: f64, detail: String) -> Self {
        Self { name, passed: max_residual < threshold, max_residual, threshold, detail }
    }
}

/// Random polynomial in `x, y` of total degree `≤ deg` with coefficients in `[-1, 1]`.
pub fn random_polynomial_field<R: Rng>(rng: &mut R, deg: usize) -> ScalarField {
    let mut e = Expr::constant(0.0);
    for i in 0..=deg {
        for j in 0..=deg - i {
            let c: f64 = rng.gen_range(-1.0..1.0);
            let term = Expr::mul(Expr::constant(c), Expr::mul(Expr::pow(Expr::x(), i as i32), Expr::pow(Expr::y(), j as i32)));
            e = Expr::add(e, term);
        }
    }
    ScalarField::new(e)
}

pub fn random_metric<R: Rng>(rng: &mut R, n: usize, deg: usize) -> PseudoFinslerMetric {
    let coeffs = (0..=n).map(|_| random_polynomial_field(rng, deg)).collect();
    PseudoFinslerMetric::new(n, coeffs).expect("random coefficients are not all zero")
}

fn point<R: Rng>(rng: &mut R, d: BBox) -> (f64, f64) {
    (rng.gen_range(d.xmin..d.xmax), rng.gen_range(d.ymin..d.ymax))
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    let den = a.abs().max(b.abs()).max(scale);
    if den == 0.0 {
        0.0
    } else {
        (a - b).abs() / den
    }
}

/// Largest relative deviation of `H̄ = ẋ^{2n−4}(n−1)Δ` and
/// `H̄₂ − pH̄₁ = ẋ^{2n−2}(n−1)P`, relative to the size of the terms of Δ and P.
pub fn flow_identity_residual<R: Rng>(m: &PseudoFinslerMetric, rng: &mut R, domain: BBox, points: usize) -> Result<f64, MetricError> {
    let n = m.degree();
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (x, y) = point(rng, domain);
        let p: f64 = rng.gen_range(-2.0..2.0);
        let xdot: f64 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (h, h1, h2) = m.oracle_h(x, y, xdot, p * xdot)?;
        let d = m.delta_poly(x, y)?.eval(p);
        let pp = m.p_poly(x, y)?.eval(p);
        let (ds, ps) = term_scales(m, x, y, p)?;
        let k1 = xdot.powi(2 * n as i32 - 4) * (nf - 1.0);
        let k2 = xdot.powi(2 * n as i32 - 2) * (nf - 1.0);
        worst = worst.max(rel(h, k1 * d, k1 * ds)).max(rel(h2 - p * h1, k2 * pp, k2 * ps));
    }
    Ok(worst)
}

/// Magnitudes of the terms making up Δ and P at a point.
fn term_scales(m: &PseudoFinslerMetric, x: f64, y: f64, s: f64) -> Result<(f64, f64), MetricError> {
    let jet = m.jet(Chart::P, x, y)?;
    let nf = m.degree() as f64;
    let h = |c: &[f64]| -> (f64, f64, f64) {
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &a in c.iter().rev() {
            d2 = d2 * s + 2.0 * d1;
            d1 = d1 * s + f;
            f = f * s + a;
        }
        (f, d1, d2)
    };
    let (f, fs, fss) = h(&jet.a);
    let (fu, fus, _) = h(&jet.a_u);
    let (fv, fvs, _) = h(&jet.a_v);
    let ds = nf * (f * fss).abs() + (nf - 1.0) * fs * fs;
    let ps = nf * f.abs() * (fv.abs() + fus.abs() + (s * fvs).abs()) + (nf - 1.0) * fs.abs() * (fu.abs() + (s * fv).abs());
    Ok((ds, ps))
}

/// Largest relative deviation of `D_Δ = −12 D_F` (cubic metrics).
pub fn discriminant_residual<R: Rng>(m: &PseudoFinslerMetric, rng: &mut R, domain: BBox, points: usize) -> Result<f64, MetricError> {
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (x, y) = point(rng, domain);
        let a = m.coeff_values(x, y)?;
        let (d, c, b, aa) = (a[0], a[1], a[2], a[3]);
        let scale = 12.0
            * ((b * c).powi(2)
                + 4.0 * (aa * c.powi(3)).abs()
                + 4.0 * (b.powi(3) * d).abs()
                + 27.0 * (aa * d).powi(2)
                + 18.0 * (aa * b * c * d).abs());
        let dd = m.disc_delta(x, y)?;
        let df = m.disc_f(x, y)?;
        worst = worst.max(rel(dd, -12.0 * df, scale));
    }
    Ok(worst)
}

/// Largest relative deviation between the Q-chart field mapped to
/// `(dx, dy, dp)` and `q^{2n−3}` times the P-chart field.
pub fn chart_residual<R: Rng>(m: &PseudoFinslerMetric, rng: &mut R, domain: BBox, points: usize) -> Result<f64, MetricError> {
    let mut worst: f64 = 0.0;
    let e = 2 * m.degree() as i32 - 3;
    for _ in 0..points {
        let (x, y) = point(rng, domain);
        let p = rng.gen_range(0.3..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let q = 1.0 / p;
        let fp = field_in_p_coords(m, PtmPoint::p_chart(x, y, p))?;
        let fq = field_in_p_coords(m, PtmPoint::q_chart(x, y, q))?;
        let k = q.powi(e);
        let scale = fp.iter().fold(0.0f64, |a, v| a.max((k * v).abs()));
        for i in 0..3 {
            worst = worst.max(rel(fq[i], k * fp[i], scale));
        }
    }
    Ok(worst)
}

/// Number of random root configurations (with forced repeated roots) for
/// which the multiple-root relations between `Φ` and `Δ` fail.
pub fn root_correspondence_failures<R: Rng>(rng: &mut R, n: usize, count: usize) -> usize {
    let mut failures = 0;
    for _ in 0..count {
        let mut gammas: Vec<f64> = Vec::new();
        while gammas.len() < n {
            let g = (rng.gen_range(-40..=40) as f64) / 8.0;
            let mult = rng.gen_range(1..=(n - gammas.len()).min(3));
            if gammas.contains(&g) {
                continue;
            }
            gammas.extend(std::iter::repeat_n(g, mult));
        }
        let Ok(rp) = RootedPolynomial::new(gammas) else { continue };
        if !check_multiple_roots(&rp).holds() {
            failures += 1;
        }
    }
    failures
}

/// Points `(x, y, p0)` of the discriminant curve with a finite double
/// direction, found on horizontal lines and polished by Newton on
/// `F = F_p = 0` in `(x, p)`.
pub fn find_m01_points(m: &PseudoFinslerMetric, domain: BBox, lines: usize, samples: usize) -> Vec<[f64; 3]> {
    let mut out = Vec::new();
    for j in 0..lines {
        let y = domain.ymin + (domain.ymax - domain.ymin) * (j as f64 + 0.5) / lines as f64;
        let g = |x: f64| m.disc_f(x, y).ok();
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=samples {
            let x = domain.xmin + (domain.xmax - domain.xmin) * i as f64 / samples as f64;
            let Some(v) = g(x) else {
                prev = None;
                continue;
            };
            if v == 0.0 {
                // A sample exactly on the curve.
                out.extend(polish_double_root(m, x, y));
            } else if let Some((x0, v0)) = prev {
                if v0 != 0.0 && (v0 > 0.0) != (v > 0.0) {
                    let xr = crate::ode::bisect(|t| g(t).unwrap_or(f64::NAN), x0, x, 1e-15);
                    if let Some(pt) = polish_double_root(m, xr, y) {
                        out.push(pt);
                    }
                }
            }
            prev = Some((x, v));
        }
    }
    out
}

fn polish_double_root(m: &PseudoFinslerMetric, x: f64, y: f64) -> Option<[f64; 3]> {
    let f = m.f_poly(x, y).ok()?;
    let p0 = f.real_roots().into_iter().find(|r| r.multiplicity >= 2)?.value;
    if p0.abs() > 10.0 {
        return None;
    }
    let (mut x, mut p) = (x, p0);
    for _ in 0..20 {
        let jet = m.jet(Chart::P, x, y).ok()?;
        let ev = |c: &[f64], k: usize| -> f64 {
            // k-th p-derivative.
            c.iter()
                .enumerate()
                .skip(k)
                .map(|(i, a)| a * (0..k).map(|t| (i - t) as f64).product::<f64>() * p.powi((i - k) as i32))
                .sum()
        };
        let (f0, fp, fpp) = (ev(&jet.a, 0), ev(&jet.a, 1), ev(&jet.a, 2));
        let (fx, fxp) = (ev(&jet.a_u, 0), ev(&jet.a_u, 1));
        let det = fx * fpp - fp * fxp;
        if det == 0.0 {
            break;
        }
        let dx = (-f0 * fpp + fp * fp) / det;
        let dp = (-fx * fp + fxp * f0) / det;
        x += dx;
        p += dp;
        if dx.abs() + dp.abs() < 1e-15 * (1.0 + x.abs() + p.abs()) {
            break;
        }
    }
    Some([x, y, p])
}

/// `|λ₂/λ₁ − 3/2|` at transverse discriminant points, with the number of points used.
pub fn m01_spectrum_residual(m: &PseudoFinslerMetric, points: &[[f64; 3]]) -> Result<(f64, usize), MetricError> {
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for &[x, y, p0] in points {
        if m.classify_point(x, y)? != Stratum::M01 {
            continue;
        }
        let g = m.disc_f_gradient(x, y)?;
        let dot = (g[0] + p0 * g[1]).abs();
        if dot <= 1e-3 * g[0].hypot(g[1]) * 1.0f64.hypot(p0) {
            continue;
        }
        let sp = classify_singular(m, PtmPoint::p_chart(x, y, p0))?;
        let (l1, l2) = sp.pair();
        if l1.norm() == 0.0 {
            continue;
        }
        worst = worst.max((l2.re / l1.re - 1.5).abs()).max(l1.im.abs() / l1.norm()).max(l2.im.abs() / l2.norm());
        used += 1;
    }
    Ok((worst, used))
}

/// The full suite on one metric. Thresholds: 1e-9 for the algebraic
/// identities, 1e-10 for chart consistency, 1e-7 for the spectrum ratio.
pub fn run_verify<R: Rng>(m: &PseudoFinslerMetric, domain: BBox, rng: &mut R) -> Result<Vec<CheckResult>, MetricError> {
    let mut out = Vec::new();
    let r = flow_identity_residual(m, rng, domain, 200)?;
    out.push(CheckResult::new("flow-identity", r, 1e-9, "200 random points and velocities".into()));
    let f = root_correspondence_failures(rng, m.degree().max(2), 50);
    out.push(CheckResult::new("root-correspondence", f as f64, 0.5, format!("{f} of 50 root configurations fail")));
    if m.degree() == 3 {
        let r = discriminant_residual(m, rng, domain, 200)?;
        out.push(CheckResult::new("discriminant-identity", r, 1e-9, "D_Delta = -12 D_F at 200 points".into()));
    }
    let r = chart_residual(m, rng, domain, 200)?;
    out.push(CheckResult::new("chart-consistency", r, 1e-10, "200 random points and slopes".into()));
    if m.degree() == 3 {
        let pts = find_m01_points(m, domain, 8, 200);
        let (r, used) = m01_spectrum_residual(m, &pts)?;
        out.push(CheckResult::new("m01-spectrum", r, 1e-7, format!("{used} transverse discriminant points")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fold_passes_everything() {
        let m = PseudoFinslerMetric::parse(3, &["-x", "0", "1", "0"]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let res = run_verify(&m, BBox::square(1.0), &mut rng).unwrap();
        assert!(res.iter().all(|c| c.passed), "{res:?}");
        assert!(res.iter().any(|c| c.name == "m01-spectrum" && c.detail.starts_with("8 ")), "{res:?}");
    }
}
