//! Dense real polynomials in one variable (the slope `p`), with real-root
//! extraction, resultants and formal discriminants.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, DMatrix};

use crate::algebra::Scalar;

/// Imaginary-part cutoff, relative to the spectral radius, for a root to count as real.
pub const IMAG_CUTOFF: f64 = 1e-8;
/// Finest clustering radius for root multiplicities.
pub const CLUSTER_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

/// A real root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealRoot {
    pub value: f64,
    pub multiplicity: usize,
}

impl RealPolynomial {
    /// Coefficients in ascending degree; trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `p`.
    pub fn identity() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Π (p + γ_i).
    pub fn from_negated_roots(gammas: &[f64]) -> Self {
        gammas
            .iter()
            .fold(Self::constant(1.0), |acc, &g| acc * Self::new(vec![g, 1.0]))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `p^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * p + c)
    }

    pub fn eval_complex(&self, z: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |d, _| d.derivative())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drops leading coefficients below `rel * max|c|`.
    pub fn trimmed(&self, rel: f64) -> Self {
        let tol = rel * self.max_abs_coeff();
        let mut coeffs = self.coeffs.clone();
        while coeffs.last().is_some_and(|c| c.abs() <= tol) {
            coeffs.pop();
        }
        Self::new(coeffs)
    }

    /// All complex roots (eigenvalues of the companion matrix), with leading
    /// coefficients negligible at 1e-14 relative dropped first.
    pub fn complex_roots(&self) -> Vec<Complex<f64>> {
        let p = self.trimmed(1e-14);
        let Some(deg) = p.degree() else { return Vec::new() };
        let zeros = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
        let mut roots = vec![Complex::new(0.0, 0.0); zeros];
        let reduced = &p.coeffs[zeros..];
        let d = deg - zeros;
        if d == 0 {
            return roots;
        }
        let lead = reduced[d];
        let mut companion = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..d {
            companion[(i, d - 1)] = -reduced[i] / lead;
        }
        roots.extend(companion.complex_eigenvalues().iter().copied());
        roots
    }

    /// Real roots with multiplicities, ascending.
    ///
    /// Companion eigenvalues are grouped by single-linkage clustering; a group
    /// is accepted as one multiple root when the polynomial and its first
    /// derivatives are numerically zero at the group centroid, otherwise it is
    /// re-split at a tenth of the radius down to [`CLUSTER_RADIUS`]. Real
    /// groups get a Newton polish on the matching derivative.
    pub fn real_roots(&self) -> Vec<RealRoot> {
        let roots = self.complex_roots();
        if roots.is_empty() {
            return Vec::new();
        }
        let radius = roots.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let mut groups = Vec::new();
        self.cluster(&roots, 0.1, &mut groups);
        let im_tol = IMAG_CUTOFF * radius.max(f64::MIN_POSITIVE);
        let mut out: Vec<RealRoot> = groups
            .into_iter()
            .filter(|(c, _)| c.im.abs() <= im_tol)
            .map(|(c, m)| RealRoot { value: self.polish(c.re, m), multiplicity: m })
            .collect();
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        out
    }

    fn cluster(&self, pts: &[Complex<f64>], rel_radius: f64, out: &mut Vec<(Complex<f64>, usize)>) {
        for comp in single_linkage(pts, rel_radius) {
            let members: Vec<Complex<f64>> = comp.iter().map(|&i| pts[i]).collect();
            let m = members.len();
            let centroid = members.iter().fold(Complex::new(0.0, 0.0), |a, z| a + z) / m as f64;
            if m == 1 || rel_radius <= CLUSTER_RADIUS || self.is_multiple_root(centroid, m) {
                out.push((centroid, m));
            } else {
                self.cluster(&members, rel_radius / 10.0, out);
            }
        }
    }

    fn is_multiple_root(&self, c: Complex<f64>, m: usize) -> bool {
        const TOL0: f64 = 1e-11;
        let r = c.norm();
        let mut deriv = self.clone();
        let mut factorial = 1.0;
        for j in 0..m {
            if j > 0 {
                deriv = deriv.derivative();
                factorial *= j as f64;
            }
            let scale: f64 = self
                .coeffs
                .iter()
                .enumerate()
                .skip(j)
                .map(|(k, a)| a.abs() * binomial(k, j) * r.powi((k - j) as i32))
                .sum();
            let tol = TOL0.powf((m - j) as f64 / m as f64);
            if deriv.eval_complex(c).norm() / factorial > tol * scale {
                return false;
            }
        }
        true
    }

    fn polish(&self, start: f64, multiplicity: usize) -> f64 {
        let g = self.nth_derivative(multiplicity - 1);
        let dg = g.derivative();
        let mut p = start;
        let mut best = g.eval(p).abs();
        for _ in 0..3 {
            let slope = dg.eval(p);
            if slope == 0.0 {
                break;
            }
            let cand = p - g.eval(p) / slope;
            let r = g.eval(cand).abs();
            if !cand.is_finite() || r >= best {
                break;
            }
            p = cand;
            best = r;
        }
        p
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn single_linkage(pts: &[Complex<f64>], rel_radius: f64) -> Vec<Vec<usize>> {
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        parent[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let tol = rel_radius * (1.0 + pts[i].norm().max(pts[j].norm()));
            if (pts[i] - pts[j]).norm() <= tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if index[r] == usize::MAX {
            index[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[index[r]].push(i);
    }
    groups
}

impl Add for RealPolynomial {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for RealPolynomial {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for RealPolynomial {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        if self.is_zero() || o.is_zero() {
            return Self::zero();
        }
        let mut c = vec![0.0; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }
}

impl Neg for RealPolynomial {
    type Output = Self;
    fn neg(self) -> Self {
        self.scaled(-1.0)
    }
}

impl Scalar for RealPolynomial {
    fn lift(&self, c: f64) -> Self {
        Self::constant(c)
    }

    fn recip(&self) -> Option<Self> {
        match self.degree() {
            Some(0) => Scalar::recip(&self.coeffs[0]).map(Self::constant),
            _ => None,
        }
    }

    fn value(&self) -> f64 {
        self.coeff(0)
    }
}

impl fmt::Display for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 {
                continue;
            }
            let sign = if c.is_sign_negative() { "-" } else { "+" };
            if first {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}*p", c.abs())?,
                _ => write!(f, "{}*p^{k}", c.abs())?,
            }
        }
        Ok(())
    }
}

/// Sylvester-matrix resultant of two polynomials in `p`.
///
/// Returns 0 when either argument is the zero polynomial and `1` when both
/// are nonzero constants.
pub fn resultant(a: &RealPolynomial, b: &RealPolynomial) -> f64 {
    let (Some(m), Some(n)) = (a.degree(), b.degree()) else { return 0.0 };
    if m == 0 {
        return a.coeff(0).powi(n as i32);
    }
    if n == 0 {
        return b.coeff(0).powi(m as i32);
    }
    let size = m + n;
    let mut s = DMatrix::<f64>::zeros(size, size);
    // Rows hold coefficients in descending degree.
    for row in 0..n {
        for k in 0..=m {
            s[(row, row + k)] = a.coeff(m - k);
        }
    }
    for row in 0..m {
        for k in 0..=n {
            s[(n + row, row + k)] = b.coeff(n - k);
        }
    }
    s.determinant()
}

/// Discriminant of `poly` read as a polynomial of formal degree `degree`
/// (leading coefficients may vanish). Degrees 1 to 3 use the closed forms;
/// higher degrees go through `res(f, f')`.
pub fn formal_discriminant(poly: &RealPolynomial, degree: usize) -> f64 {
    let c = |k: usize| poly.coeff(k);
    match degree {
        0 | 1 => 1.0,
        2 => {
            let (a, b, cc) = (c(2), c(1), c(0));
            b * b - 4.0 * a * cc
        }
        3 => {
            let (a, b, cc, d) = (c(3), c(2), c(1), c(0));
            b * b * cc * cc - 4.0 * a * cc.powi(3) - 4.0 * b.powi(3) * d - 27.0 * a * a * d * d
                + 18.0 * a * b * cc * d
        }
        _ => {
            let deg = degree as i32;
            let lead = c(degree);
            if lead == 0.0 {
                // Root at infinity of multiplicity >= 1: fall back on the
                // homogeneous identity disc = lc_{d-1}^2 * disc_{d-1} when the
                // formal leading coefficient vanishes.
                let next = formal_discriminant(poly, degree - 1);
                return c(degree - 1).powi(2) * next;
            }
            let sign = if (deg * (deg - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            sign * resultant(poly, &poly.derivative()) / lead
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resultant_examples() {
        let a = RealPolynomial::new(vec![-1.0, 0.0, 1.0]);
        let b = RealPolynomial::new(vec![-1.0, 1.0]);
        assert!(resultant(&a, &b).abs() < 1e-14);
        let a = RealPolynomial::new(vec![0.0, 0.0, 1.0]);
        let b = RealPolynomial::new(vec![-2.0, 1.0]);
        assert!((resultant(&a, &b) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn resultant_matches_product_formula() {
        // res(f, g) = lc(f)^deg g * prod g(r_i) over roots r_i of f.
        let f = RealPolynomial::from_negated_roots(&[1.0, -2.0, 0.5]).scaled(3.0);
        let g = RealPolynomial::new(vec![2.0, -1.0, 0.0, 1.5]);
        let expected = 3.0f64.powi(3) * [-1.0, 2.0, -0.5].iter().map(|&r| g.eval(r)).product::<f64>();
        assert!((resultant(&f, &g) - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn real_roots_with_multiplicity() {
        let f = RealPolynomial::from_negated_roots(&[-2.0, -2.0, 1.0, 3.0, 3.0, 3.0]);
        let r = f.real_roots();
        let got: Vec<(f64, usize)> = r.iter().map(|r| (r.value, r.multiplicity)).collect();
        assert_eq!(got.len(), 3, "{got:?}");
        assert!((got[0].0 + 3.0).abs() < 1e-8 && got[0].1 == 3);
        assert!((got[1].0 + 1.0).abs() < 1e-10 && got[1].1 == 1);
        assert!((got[2].0 - 2.0).abs() < 1e-8 && got[2].1 == 2);
    }

    #[test]
    fn close_but_distinct_roots_are_kept_apart() {
        let f = RealPolynomial::from_negated_roots(&[-1.0, -1.0001]);
        assert_eq!(f.real_roots().len(), 2);
    }

    #[test]
    fn complex_pairs_are_not_real() {
        let f = RealPolynomial::new(vec![0.0, 1.0, 0.0, 1.0]); // p^3 + p
        let r = f.real_roots();
        assert_eq!(r, vec![RealRoot { value: 0.0, multiplicity: 1 }]);
        let g = RealPolynomial::new(vec![1.0, 0.0, 6.0, 0.0, 1.0]);
        assert!(g.real_roots().is_empty());
    }

    #[test]
    fn cubic_discriminant_matches_generic_route() {
        let f = RealPolynomial::new(vec![0.3, -1.2, 0.7, 2.0]);
        let generic = -resultant(&f, &f.derivative()) / f.leading();
        assert!((formal_discriminant(&f, 3) - generic).abs() < 1e-12);
        let q = RealPolynomial::new(vec![0.3, -1.2, 0.7, 2.0, -0.4]);
        let d4 = formal_discriminant(&q, 4);
        let d4_generic = resultant(&q, &q.derivative()) / q.leading();
        assert!((d4 - d4_generic).abs() < 1e-10 * d4.abs());
    }

    #[test]
    fn formal_degree_with_vanishing_leading_coefficient() {
        // a p^2 + 2 b p + c read as a cubic: 4 a^2 (b^2 - a c).
        let (a, b, c) = (1.5, -0.4, 0.9);
        let f = RealPolynomial::new(vec![c, 2.0 * b, a]);
        let d = formal_discriminant(&f, 3);
        assert!((d - 4.0 * a * a * (b * b - a * c)).abs() < 1e-14);
    }
}
