//! Δ for polynomials with prescribed roots, and a checker for the relation
//! between multiple roots of `Φ` and real roots of `Δ = nΦΦ'' − (n−1)Φ'²`.

use thiserror::Error;

use crate::poly::RealPolynomial;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyAnalysisError {
    #[error("need at least two roots, got {0}")]
    TooFewRoots(usize),
    #[error("polynomial degree {degree} exceeds n = {n}")]
    DegreeTooHigh { degree: usize, n: usize },
}

/// `Φ(p) = Π (p + γ_i)` with real `γ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedPolynomial {
    gammas: Vec<f64>,
}

impl RootedPolynomial {
    pub fn new(gammas: Vec<f64>) -> Result<Self, PolyAnalysisError> {
        if gammas.len() < 2 {
            return Err(PolyAnalysisError::TooFewRoots(gammas.len()));
        }
        Ok(Self { gammas })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn n(&self) -> usize {
        self.gammas.len()
    }

    pub fn phi(&self) -> RealPolynomial {
        RealPolynomial::from_negated_roots(&self.gammas)
    }

    /// Distinct roots `p = −γ` of `Φ` with multiplicities, ascending.
    pub fn roots(&self) -> Vec<(f64, usize)> {
        let mut r: Vec<f64> = self.gammas.iter().map(|g| -g).collect();
        r.sort_by(f64::total_cmp);
        let mut out: Vec<(f64, usize)> = Vec::new();
        for v in r {
            match out.last_mut() {
                Some((w, m)) if (v - *w).abs() <= 1e-9 * (1.0 + w.abs()) => *m += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

/// `nΦΦ'' − (n−1)Φ'²`.
pub fn delta_from_phi(phi: &RealPolynomial, n: usize) -> Result<RealPolynomial, PolyAnalysisError> {
    if let Some(d) = phi.degree().filter(|&d| d > n) {
        return Err(PolyAnalysisError::DegreeTooHigh { degree: d, n });
    }
    let d1 = phi.derivative();
    let d2 = d1.derivative();
    let nf = n as f64;
    Ok((phi.clone() * d2).scaled(nf) - (d1.clone() * d1).scaled(nf - 1.0))
}

/// `n Σ α_i² − (Σ α_i)²`, nonnegative by Cauchy–Schwarz.
pub fn varphi(alphas: &[f64]) -> f64 {
    let n = alphas.len() as f64;
    let s: f64 = alphas.iter().sum();
    let s2: f64 = alphas.iter().map(|a| a * a).sum();
    n * s2 - s * s
}

/// Whether a polynomial's roots are all real (where the root correspondence applies) or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    FullyReal,
    /// Complex roots present; the root correspondence is not claimed.
    ComplexRoots,
}

pub fn regime(phi: &RealPolynomial) -> Regime {
    let radius = phi.complex_roots().iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let real = phi
        .complex_roots()
        .iter()
        .all(|z| z.im.abs() <= 1e-6 * (1.0 + radius));
    if real {
        Regime::FullyReal
    } else {
        Regime::ComplexRoots
    }
}

/// Second-derivative check at a double root of `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleRootCheck {
    pub root: f64,
    pub delta: f64,
    pub delta_d1: f64,
    pub delta_d2: f64,
    /// `(2 − n) Φ''(root)²`.
    pub expected_d2: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipleRootReport {
    pub delta: RealPolynomial,
    pub all_roots_equal: bool,
    pub delta_vanishes: bool,
    /// Δ ≡ 0 exactly when all roots coincide.
    pub part_a: bool,
    pub delta_real_roots: Vec<f64>,
    pub phi_multiple_roots: Vec<f64>,
    /// Real roots of Δ are exactly the multiple roots of Φ.
    pub part_b: bool,
    pub double_roots: Vec<DoubleRootCheck>,
    /// Every double root of Φ is a double root of Δ with the predicted Δ''.
    pub part_c: bool,
}

impl MultipleRootReport {
    pub fn holds(&self) -> bool {
        self.part_a && self.part_b && self.part_c
    }
}

/// Real roots of `Δ` compared with the multiple real roots of `phi`, both
/// within `1e-6` (relative to `1 + |root|`).
pub fn delta_roots_match_multiple_roots(delta: &RealPolynomial, phi_multiple: &[f64], scale: f64) -> bool {
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs());
    let delta_roots: Vec<f64> = delta.real_roots().iter().map(|r| r.value).collect();
    let forward = delta_roots.iter().all(|&r| phi_multiple.iter().any(|&m| near(m, r)));
    let backward = phi_multiple
        .iter()
        .all(|&m| delta.eval(m).abs() <= 1e-8 * scale || delta_roots.iter().any(|&r| near(m, r)));
    forward && backward
}

pub fn check_multiple_roots(rp: &RootedPolynomial) -> MultipleRootReport {
    let n = rp.n();
    let phi = rp.phi();
    let delta = delta_from_phi(&phi, n).expect("degree of Φ equals n");
    let roots = rp.roots();
    let scale = phi.max_abs_coeff().powi(2).max(1.0);

    let all_roots_equal = roots.len() == 1;
    let delta_vanishes = delta.max_abs_coeff() <= 1e-12 * scale;
    let part_a = all_roots_equal == delta_vanishes;

    let phi_multiple_roots: Vec<f64> = roots.iter().filter(|(_, m)| *m >= 2).map(|(r, _)| *r).collect();
    let delta_real_roots: Vec<f64> = if delta_vanishes {
        Vec::new()
    } else {
        delta.real_roots().iter().map(|r| r.value).collect()
    };
    let part_b = delta_vanishes || delta_roots_match_multiple_roots(&delta, &phi_multiple_roots, scale);

    let d1 = delta.derivative();
    let d2 = d1.derivative();
    let phi2 = phi.derivative().derivative();
    let double_roots: Vec<DoubleRootCheck> = roots
        .iter()
        .filter(|(_, m)| *m == 2 && n >= 3)
        .map(|&(r, _)| {
            let expected_d2 = (2.0 - n as f64) * phi2.eval(r).powi(2);
            let (dv, dv1, dv2) = (delta.eval(r), d1.eval(r), d2.eval(r));
            let holds = dv.abs() <= 1e-9 * scale
                && dv1.abs() <= 1e-9 * scale
                && (dv2 - expected_d2).abs() <= 1e-9 * scale
                && expected_d2 != 0.0;
            DoubleRootCheck { root: r, delta: dv, delta_d1: dv1, delta_d2: dv2, expected_d2, holds }
        })
        .collect();
    let part_c = double_roots.iter().all(|c| c.holds);

    MultipleRootReport {
        delta,
        all_roots_equal,
        delta_vanishes,
        part_a,
        delta_real_roots,
        phi_multiple_roots,
        part_b,
        double_roots,
        part_c,
    }
}
