//! Puiseux-type series solutions of the geodesic equation through a
//! degenerate point, solved order by order.
//!
//! A geodesic is sought as `x = x₀ + t^s`, `p = Σ a_k t^k`, with
//! `y = y₀ + ∫ p dx`. Substituting into `t(Δ·dp/dt − P·dx/dt) = 0` (the Euler
//! form keeps the order shift nonnegative at regular points) gives, at each
//! new order `k`, a linear condition `L_k a_k + f_k = 0` on the first
//! undetermined coefficient. Orders with `L_k ≠ 0` are forced; orders with
//! `L_k = f_k = 0` are free parameters of the family; `L_k = 0 ≠ f_k` is an
//! obstruction.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::algebra::{Scalar, ZERO_TOL};
use crate::metric::{delta_and_p, Chart, MetricError, PseudoFinslerMetric};

/// Power series `Σ c_k t^k` known through `t^order`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    c: Vec<f64>,
}

impl TruncatedSeries {
    /// Series with the given leading coefficients, padded with zeros.
    pub fn new(coeffs: &[f64], order: usize) -> Self {
        let mut c = vec![0.0; order + 1];
        for (dst, src) in c.iter_mut().zip(coeffs) {
            *dst = *src;
        }
        Self { c }
    }

    pub fn constant(v: f64, order: usize) -> Self {
        Self::new(&[v], order)
    }

    /// `t^k` to the given order.
    pub fn monomial(k: usize, order: usize) -> Self {
        let mut s = Self::new(&[], order);
        if k <= order {
            s.c[k] = 1.0;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.c.get(k).copied().unwrap_or(0.0)
    }

    pub fn truncated(&self, order: usize) -> Self {
        Self::new(&self.c, order.min(self.order()))
    }

    /// Index of the first coefficient exceeding `tol` in magnitude.
    pub fn valuation(&self, tol: f64) -> Option<usize> {
        self.c.iter().position(|v| v.abs() > tol)
    }

    /// `d/dt`, known one order less.
    pub fn derive(&self) -> Self {
        if self.c.len() == 1 {
            return Self::constant(0.0, 0);
        }
        Self { c: (1..self.c.len()).map(|k| k as f64 * self.c[k]).collect() }
    }

    /// `∫₀ᵗ`, known one order more.
    pub fn integrate(&self) -> Self {
        let mut c = vec![0.0];
        c.extend(self.c.iter().enumerate().map(|(k, v)| v / (k + 1) as f64));
        Self { c }
    }

    /// `s(λt)`.
    pub fn rescale(&self, lambda: f64) -> Self {
        let mut f = 1.0;
        let c = self
            .c
            .iter()
            .map(|v| {
                let out = v * f;
                f *= lambda;
                out
            })
            .collect();
        Self { c }
    }

    /// `self(g(t))` for `g` without constant term.
    pub fn compose(&self, g: &Self) -> Option<Self> {
        if g.coeff(0) != 0.0 {
            return None;
        }
        let order = self.order().min(g.order());
        let g = g.truncated(order);
        let mut acc = Self::constant(0.0, order);
        for v in self.c.iter().take(order + 1).rev() {
            acc = acc * g.clone() + Self::constant(*v, order);
        }
        Some(acc)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, v| acc * t + v)
    }

    pub fn eval_derivative(&self, t: f64) -> f64 {
        self.derive().eval(t)
    }
}

impl Add for TruncatedSeries {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let n = self.c.len().min(o.c.len());
        Self { c: (0..n).map(|k| self.c[k] + o.c[k]).collect() }
    }
}

impl Sub for TruncatedSeries {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let n = self.c.len().min(o.c.len());
        Self { c: (0..n).map(|k| self.c[k] - o.c[k]).collect() }
    }
}

impl Mul for TruncatedSeries {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let n = self.c.len().min(o.c.len());
        let mut c = vec![0.0; n];
        for (i, a) in self.c.iter().take(n).enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in o.c.iter().take(n - i).enumerate() {
                c[i + j] += a * b;
            }
        }
        Self { c }
    }
}

impl Neg for TruncatedSeries {
    type Output = Self;
    fn neg(self) -> Self {
        Self { c: self.c.into_iter().map(|v| -v).collect() }
    }
}

impl Scalar for TruncatedSeries {
    fn lift(&self, c: f64) -> Self {
        Self::constant(c, self.order())
    }

    fn recip(&self) -> Option<Self> {
        let c0 = self.c[0];
        if c0.abs() < ZERO_TOL {
            return None;
        }
        let mut r = vec![0.0; self.c.len()];
        r[0] = 1.0 / c0;
        for k in 1..r.len() {
            let s: f64 = (1..=k).map(|j| self.c[j] * r[k - j]).sum();
            r[k] = -s / c0;
        }
        Some(Self { c: r })
    }

    fn value(&self) -> f64 {
        self.c[0]
    }

    fn scale(&self, c: f64) -> Self {
        Self { c: self.c.iter().map(|v| v * c).collect() }
    }
}

impl fmt::Display for TruncatedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in self.c.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{v}")?,
                1 => write!(f, "{v}*t")?,
                _ => write!(f, "{v}*t^{k}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O(t^{})", self.order() + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PuiseuxError {
    #[error("x exponent must be at least 1")]
    BadExponent,
    #[error("seed has no coefficients")]
    EmptySeed,
    #[error("requested order {order} does not exceed the seed order {seed}")]
    OrderTooLow { order: usize, seed: usize },
    #[error("seed does not satisfy the equation: residual {residual:e} at t^{index}")]
    InconsistentSeed { index: usize, residual: f64 },
    #[error("the coefficient perturbations never enter the residual")]
    NoValuation,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderStatus {
    Forced,
    Free,
    Obstructed,
}

impl fmt::Display for OrderStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Forced => "FORCED",
            Self::Free => "FREE",
            Self::Obstructed => "OBSTRUCTED",
        })
    }
}

/// One row of the order-by-order table. `linear` and `forcing` are divided
/// by the normalization of the report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub order: usize,
    pub linear: f64,
    pub forcing: f64,
    pub status: OrderStatus,
    pub value: f64,
}

/// Input for [`solve_geodesic_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesProblem {
    /// Base point `(x₀, y₀)`.
    pub base: (f64, f64),
    /// Exponent `s` in `x = x₀ + t^s`.
    pub s: usize,
    /// Known leading coefficients `a_0, …, a_{k₀}` of `p`.
    pub seed: Vec<f64>,
    /// Highest order of `p` to determine.
    pub order: usize,
    /// Values for free orders; unspecified free orders are set to zero.
    pub free: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReport {
    pub problem: SeriesProblem,
    /// Offset between the order of a coefficient and the residual order it
    /// first enters: `a_k` enters at `t^{k+σ}`.
    pub sigma: usize,
    /// Leading p-coefficient of `Δ` at the base point; rows are divided by it.
    pub normalization: f64,
    pub rows: Vec<OrderRow>,
    /// `p(t)` through `t^order`.
    pub p: TruncatedSeries,
    /// Largest residual coefficient through `t^{order+σ}`, normalized.
    pub max_residual: f64,
}

impl SeriesReport {
    pub fn first_obstruction(&self) -> Option<usize> {
        self.rows.iter().find(|r| r.status == OrderStatus::Obstructed).map(|r| r.order)
    }

    pub fn free_orders(&self) -> Vec<usize> {
        self.rows.iter().filter(|r| r.status == OrderStatus::Free).map(|r| r.order).collect()
    }

    /// `(x(t), y(t), p(t))` as series through `t^order`.
    pub fn curve(&self) -> (TruncatedSeries, TruncatedSeries, TruncatedSeries) {
        series_to_curve(&self.p, self.problem.base, self.problem.s, self.problem.order)
    }
}

/// `x = x₀ + t^s`, `y = y₀ + ∫ p·s t^{s−1} dt`, truncated at `order`.
pub fn series_to_curve(
    p: &TruncatedSeries,
    base: (f64, f64),
    s: usize,
    order: usize,
) -> (TruncatedSeries, TruncatedSeries, TruncatedSeries) {
    let w = order + s;
    let mut x = TruncatedSeries::monomial(s, w);
    x.c[0] = base.0;
    let xdot = x.derive();
    let p = p.truncated(p.order().min(w));
    let mut y = (p.clone() * xdot).integrate();
    y.c[0] = base.1;
    (x.truncated(order), y.truncated(order), p.truncated(order))
}

/// `Δ·p′ − P·x′` as a series through `t^{w−1}`.
fn residual(m: &PseudoFinslerMetric, base: (f64, f64), s: usize, a: &[f64], w: usize) -> Result<TruncatedSeries, PuiseuxError> {
    let p = TruncatedSeries::new(a, w);
    let (x, y, p) = series_to_curve(&p, base, s, w);
    let jet = m.jet_generic(Chart::P, &x, &y)?;
    let (delta, pp) = delta_and_p(m.degree(), &jet, &p);
    let r = delta * p.derive() - pp * x.derive();
    Ok(TruncatedSeries::monomial(1, w) * r)
}

/// Solves the recurrence order by order. See the module docs.
pub fn solve_geodesic_series(m: &PseudoFinslerMetric, problem: SeriesProblem) -> Result<SeriesReport, PuiseuxError> {
    if problem.s == 0 {
        return Err(PuiseuxError::BadExponent);
    }
    if problem.seed.is_empty() {
        return Err(PuiseuxError::EmptySeed);
    }
    let k0 = problem.seed.len() - 1;
    let order = problem.order;
    if order <= k0 {
        return Err(PuiseuxError::OrderTooLow { order, seed: k0 });
    }
    let (base, s) = (problem.base, problem.s);
    let delta0 = m.delta_poly(base.0, base.1)?;
    let normalization = if delta0.is_zero() { 1.0 } else { delta0.leading() };

    // Working order: generous enough for the valuation shift of typical
    // degenerate points.
    let w = 2 * order + 4 * s + 2 * m.degree() + 4;
    let base_res = residual(m, base, s, &problem.seed, w)?;

    // Shift σ: smallest valuation gap between a perturbation t^k and the
    // residual change it causes, over all orders to be solved.
    let mut sigma = None::<usize>;
    for k in k0 + 1..=order {
        let mut a = problem.seed.clone();
        a.resize(k + 1, 0.0);
        a[k] = 1.0;
        let d = residual(m, base, s, &a, w)? - base_res.clone();
        let scale = d.coeffs().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if let Some(v) = d.valuation(1e-10 * scale.max(f64::MIN_POSITIVE)) {
            if scale > 0.0 && v >= k {
                sigma = Some(sigma.map_or(v - k, |sg: usize| sg.min(v - k)));
            }
        }
    }
    let sigma = sigma.ok_or(PuiseuxError::NoValuation)?;
    if order + sigma >= w {
        return Err(PuiseuxError::NoValuation);
    }

    let tol = 1e-9;
    for (i, r) in base_res.coeffs().iter().enumerate().take(k0 + 1 + sigma) {
        if (r / normalization).abs() > tol {
            return Err(PuiseuxError::InconsistentSeed { index: i, residual: *r });
        }
    }

    let mut a = problem.seed.clone();
    let mut rows = Vec::new();
    for k in k0 + 1..=order {
        a.resize(k + 1, 0.0);
        a[k] = 0.0;
        let r0 = residual(m, base, s, &a, w)?;
        a[k] = 1.0;
        let r1 = residual(m, base, s, &a, w)?;
        let idx = k + sigma;
        let forcing = r0.coeff(idx) / normalization;
        let linear = (r1.coeff(idx) - r0.coeff(idx)) / normalization;
        let lin_scale = 1.0 + (k as f64).powi(2);
        let (status, value) = if linear.abs() > tol * lin_scale {
            (OrderStatus::Forced, -forcing / linear)
        } else if forcing.abs() <= tol * lin_scale {
            (OrderStatus::Free, problem.free.get(&k).copied().unwrap_or(0.0))
        } else {
            (OrderStatus::Obstructed, 0.0)
        };
        a[k] = value;
        rows.push(OrderRow { order: k, linear, forcing, status, value });
    }

    let res = residual(m, base, s, &a, w)?;
    let max_residual = res.coeffs().iter().take(order + sigma + 1).fold(0.0f64, |acc, v| acc.max((v / normalization).abs()));
    Ok(SeriesReport { p: TruncatedSeries::new(&a, order), problem, sigma, normalization, rows, max_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_arithmetic() {
        let a = TruncatedSeries::new(&[1.0, 1.0], 5);
        let inv = a.recip().unwrap();
        assert_eq!(inv.coeffs(), &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]);
        assert_eq!((a.clone() * inv).coeffs(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let sq = TruncatedSeries::new(&[0.0, 1.0, 0.0], 3);
        let c = a.compose(&(sq.clone() * sq)).unwrap();
        assert_eq!(c.coeffs(), &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(a.derive().order(), 4);
        assert_eq!(a.integrate().coeffs()[2], 0.5);
        assert_eq!(a.rescale(2.0).coeff(1), 2.0);
        assert!(TruncatedSeries::monomial(1, 3).recip().is_none());
    }

    #[test]
    fn regular_point_has_forced_orders_only() {
        // F = p^3 - 1 has straight-line geodesics.
        let m = PseudoFinslerMetric::parse(3, &["-1", "0", "0", "1"]).unwrap();
        let problem = SeriesProblem { base: (0.0, 0.0), s: 1, seed: vec![0.5], order: 6, free: BTreeMap::new() };
        let r = solve_geodesic_series(&m, problem).unwrap();
        assert!(r.rows.iter().all(|row| row.status == OrderStatus::Forced));
        assert!(r.p.coeffs()[1..].iter().all(|v| v.abs() < 1e-12));
        assert_eq!(r.sigma, 0);
    }
}
