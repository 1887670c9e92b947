//! Minimal ring abstraction shared by every evaluator in the crate.
//!
//! Expressions, metric quantities (Δ, P) and the blow-up field are written once
//! against [`Scalar`] and evaluated over plain `f64`, forward-mode [`Dual`]
//! numbers (exact Jacobians), polynomials in the slope and truncated power
//! series.

use std::ops::{Add, Mul, Neg, Sub};

/// Absolute threshold below which a value is treated as zero when dividing.
pub const ZERO_TOL: f64 = 1e-12;

pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// A constant with the same shape (truncation order, etc.) as `self`.
    fn lift(&self, c: f64) -> Self;

    /// Multiplicative inverse, `None` when the leading value is numerically zero.
    fn recip(&self) -> Option<Self>;

    /// Leading real value, used for diagnostics.
    fn value(&self) -> f64;

    fn scale(&self, c: f64) -> Self {
        self.clone() * self.lift(c)
    }

    fn powi(&self, k: i32) -> Option<Self> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.lift(1.0);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * sq.clone();
            }
            e >>= 1;
            if e > 0 {
                sq = sq.clone() * sq;
            }
        }
        Some(acc)
    }
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> Self {
        c
    }

    fn recip(&self) -> Option<Self> {
        if self.abs() < ZERO_TOL {
            None
        } else {
            Some(1.0 / self)
        }
    }

    fn value(&self) -> f64 {
        *self
    }

    fn powi(&self, k: i32) -> Option<Self> {
        if k < 0 && self.abs() < ZERO_TOL {
            return None;
        }
        Some(f64::powi(*self, k))
    }
}

/// Forward-mode dual number carrying `N` partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// The `i`-th independent variable with value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut d = [0.0; N];
        d[i] = 1.0;
        Self { v, d }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a += b;
        }
        Self { v: self.v + o.v, d }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for (a, b) in d.iter_mut().zip(o.d) {
            *a -= b;
        }
        Self { v: self.v - o.v, d }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for (i, di) in d.iter_mut().enumerate() {
            *di = self.d[i] * o.v + self.v * o.d[i];
        }
        Self { v: self.v * o.v, d }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut d = self.d;
        for a in d.iter_mut() {
            *a = -*a;
        }
        Self { v: -self.v, d }
    }
}

impl<const N: usize> Scalar for Dual<N> {
    fn lift(&self, c: f64) -> Self {
        Self::constant(c)
    }

    fn recip(&self) -> Option<Self> {
        if self.v.abs() < ZERO_TOL {
            return None;
        }
        let inv = 1.0 / self.v;
        let mut d = self.d;
        for a in d.iter_mut() {
            *a *= -inv * inv;
        }
        Some(Self { v: inv, d })
    }

    fn value(&self) -> f64 {
        self.v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_product_rule() {
        let x = Dual::<2>::var(3.0, 0);
        let y = Dual::<2>::var(2.0, 1);
        let f = x * x * y - y.recip().unwrap();
        assert_eq!(f.v, 18.0 - 0.5);
        assert_eq!(f.d, [12.0, 9.0 + 0.25]);
    }

    #[test]
    fn powi_negative_and_zero_base() {
        assert_eq!(Scalar::powi(&2.0f64, -2), Some(0.25));
        assert_eq!(Scalar::powi(&0.0f64, -1), None);
        let x = Dual::<1>::var(2.0, 0);
        let c = x.powi(3).unwrap();
        assert_eq!((c.v, c.d[0]), (8.0, 12.0));
    }
}
