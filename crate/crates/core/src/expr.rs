//! Scalar expressions in the surface coordinates `x` and `y`.
//!
//! Grammar: real literals, `x`, `y`, `+ - * /`, `^` with an integer literal
//! exponent, and parentheses. Differentiation is exact and symbolic; the only
//! simplification performed is constant folding in the node constructors.

use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::algebra::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("non-integer exponent at offset {offset}")]
    NonIntegerExponent { offset: usize },
    #[error("division by zero in `{denominator}` at (x, y) = ({x}, {y})")]
    DivisionByZero { x: f64, y: f64, denominator: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Var::X => "x",
            Var::Y => "y",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn x() -> Self {
        Expr::Var(Var::X)
    }

    pub fn y() -> Self {
        Expr::Var(Var::Y)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(u), Some(v)) => Expr::Const(u + v),
            (Some(0.0), _) => b,
            (_, Some(0.0)) => a,
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::add(a, Expr::neg(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(u), Some(v)) => Expr::Const(u * v),
            (Some(0.0), _) => Expr::Const(0.0),
            (_, Some(0.0)) => Expr::Const(0.0),
            (Some(1.0), _) => b,
            (_, Some(1.0)) => a,
            (Some(-1.0), _) => Expr::neg(b),
            (_, Some(-1.0)) => Expr::neg(a),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(u), Some(v)) if v != 0.0 => Expr::Const(u / v),
            (_, Some(1.0)) => a,
            (Some(0.0), _) => Expr::Const(0.0),
            _ => Expr::Div(Box::new(a), Box::new(b)),
        }
    }

    pub fn pow(a: Expr, k: i32) -> Expr {
        match (a.as_const(), k) {
            (_, 0) => Expr::Const(1.0),
            (_, 1) => a,
            (Some(c), _) if c != 0.0 || k > 0 => Expr::Const(c.powi(k)),
            _ => Expr::Pow(Box::new(a), k),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Expr {
        match a {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        Parser::new(text).parse()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.eval_generic(&x, &y)
    }

    /// Evaluates over any [`Scalar`]; `x` and `y` may be dual numbers,
    /// polynomials or truncated series.
    pub fn eval_generic<T: Scalar>(&self, x: &T, y: &T) -> Result<T, ExprError> {
        Ok(match self {
            Expr::Const(c) => x.lift(*c),
            Expr::Var(Var::X) => x.clone(),
            Expr::Var(Var::Y) => y.clone(),
            Expr::Add(a, b) => a.eval_generic(x, y)? + b.eval_generic(x, y)?,
            Expr::Mul(a, b) => a.eval_generic(x, y)? * b.eval_generic(x, y)?,
            Expr::Neg(a) => -a.eval_generic(x, y)?,
            Expr::Div(a, b) => {
                let num = a.eval_generic(x, y)?;
                let den = b.eval_generic(x, y)?;
                let inv = den.recip().ok_or_else(|| zero_division(b, x, y))?;
                num * inv
            }
            Expr::Pow(a, k) => {
                let base = a.eval_generic(x, y)?;
                base.powi(*k).ok_or_else(|| zero_division(a, x, y))?
            }
        })
    }

    pub fn diff(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => Expr::add(a.diff(var), b.diff(var)),
            Expr::Neg(a) => Expr::neg(a.diff(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.diff(var), (**b).clone()),
                Expr::mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let num = Expr::sub(
                    Expr::mul(a.diff(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.diff(var)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(a, k) => Expr::mul(
                Expr::mul(Expr::Const(*k as f64), Expr::pow((**a).clone(), k - 1)),
                a.diff(var),
            ),
        }
    }

    /// Replaces every occurrence of `var` by `with`.
    pub fn substitute(&self, var: Var, with: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(v) if *v == var => with.clone(),
            Expr::Var(v) => Expr::Var(*v),
            Expr::Add(a, b) => Expr::add(a.substitute(var, with), b.substitute(var, with)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(var, with), b.substitute(var, with)),
            Expr::Div(a, b) => Expr::div(a.substitute(var, with), b.substitute(var, with)),
            Expr::Pow(a, k) => Expr::pow(a.substitute(var, with), *k),
            Expr::Neg(a) => Expr::neg(a.substitute(var, with)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(..) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn zero_division<T: Scalar>(den: &Expr, x: &T, y: &T) -> ExprError {
    ExprError::DivisionByZero { x: x.value(), y: y.value(), denominator: den.to_string() }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => {
                a.write_child(f, 1)?;
                if let Expr::Neg(inner) = b.as_ref() {
                    f.write_str(" - ")?;
                    inner.write_child(f, 2)
                } else {
                    f.write_str(" + ")?;
                    b.write_child(f, 2)
                }
            }
            Expr::Mul(a, b) => {
                a.write_child(f, 2)?;
                f.write_str("*")?;
                b.write_child(f, 3)
            }
            Expr::Div(a, b) => {
                a.write_child(f, 2)?;
                f.write_str("/")?;
                b.write_child(f, 3)
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.write_child(f, 4)
            }
            Expr::Pow(a, k) => {
                a.write_child(f, 5)?;
                write!(f, "^{k}")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self { src: text.as_bytes(), pos: 0 }
    }

    fn parse(mut self) -> Result<Expr, ExprError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error(format!("unexpected `{}`", self.src[self.pos] as char)));
        }
        Ok(e)
    }

    fn error(&self, message: String) -> ExprError {
        ExprError::Syntax { offset: self.pos, message }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == b'+' { Expr::add(lhs, rhs) } else { Expr::sub(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == b'*' { Expr::mul(lhs, rhs) } else { Expr::div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::neg(self.unary()?))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.exponent()?;
            return Ok(Expr::pow(base, k));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, ExprError> {
        let parenthesized = self.peek() == Some(b'(');
        if parenthesized {
            self.pos += 1;
        }
        let start = {
            self.skip_ws();
            self.pos
        };
        let mut sign = 1i32;
        if let Some(s @ (b'-' | b'+')) = self.peek() {
            self.pos += 1;
            if s == b'-' {
                sign = -1;
            }
        }
        self.skip_ws();
        let digits_start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(ExprError::NonIntegerExponent { offset: start });
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return Err(ExprError::NonIntegerExponent { offset: start });
        }
        let text = std::str::from_utf8(&self.src[digits_start..self.pos]).unwrap_or("");
        let k: i32 = text
            .parse()
            .map_err(|_| ExprError::Syntax { offset: digits_start, message: "exponent out of range".into() })?;
        if parenthesized {
            if self.peek() != Some(b')') {
                return Err(self.error("expected `)`".into()));
            }
            self.pos += 1;
        }
        Ok(sign * k)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input".into())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`".into()));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(Expr::x())
            }
            Some(b'y') => {
                self.pos += 1;
                Ok(Expr::y())
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&bytes[start..i]).unwrap_or("");
        let value: f64 = text
            .parse()
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })?;
        self.pos = i;
        Ok(Expr::Const(value))
    }
}

/// An expression together with lazily cached exact partial derivatives.
///
/// The caches are `OnceLock`s, so a field can be shared across threads.
#[derive(Debug, Clone)]
pub struct ScalarField {
    expr: Expr,
    dx: OnceLock<Arc<ScalarField>>,
    dy: OnceLock<Arc<ScalarField>>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

impl From<Expr> for ScalarField {
    fn from(expr: Expr) -> Self {
        Self::new(expr)
    }
}

impl ScalarField {
    pub fn new(expr: Expr) -> Self {
        Self { expr, dx: OnceLock::new(), dy: OnceLock::new() }
    }

    pub fn parse(text: &str) -> Result<Self, ExprError> {
        Expr::parse(text).map(Self::new)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(Expr::Const(c))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_identically_zero(&self) -> bool {
        self.expr.is_zero()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, ExprError> {
        self.expr.eval(x, y)
    }

    pub fn eval_generic<T: Scalar>(&self, x: &T, y: &T) -> Result<T, ExprError> {
        self.expr.eval_generic(x, y)
    }

    pub fn partial(&self, var: Var) -> &ScalarField {
        let cell = match var {
            Var::X => &self.dx,
            Var::Y => &self.dy,
        };
        cell.get_or_init(|| Arc::new(ScalarField::new(self.expr.diff(var))))
    }

    pub fn dx(&self) -> &ScalarField {
        self.partial(Var::X)
    }

    pub fn dy(&self) -> &ScalarField {
        self.partial(Var::Y)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64, y: f64) -> f64 {
        Expr::parse(s).unwrap().eval(x, y).unwrap()
    }

    #[test]
    fn parse_and_eval_examples() {
        assert_eq!(ev("y^2 - x", 1.0, 2.0), 3.0);
        assert_eq!(ev("0.25*y^2 - x", 0.0, 2.0), 1.0);
        assert_eq!(ev("x*y", 3.0, 4.0), 12.0);
        assert_eq!(ev("-x", 5.0, 0.0), -5.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2*3^2", 0.0, 0.0), 19.0);
        assert_eq!(ev("-x^2", 3.0, 0.0), -9.0);
        assert_eq!(ev("8/4/2", 0.0, 0.0), 1.0);
        assert_eq!(ev("2 - 3 - 4", 0.0, 0.0), -5.0);
        assert_eq!(ev("x^-2", 2.0, 0.0), 0.25);
        assert_eq!(ev("(x+y)^(2)", 1.0, 2.0), 9.0);
        assert_eq!(ev("1e-3*x", 2.0, 0.0), 2e-3);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        assert_eq!(
            Expr::parse("x*("),
            Err(ExprError::Syntax { offset: 3, message: "unexpected end of input".into() })
        );
        assert!(matches!(Expr::parse("x + * y"), Err(ExprError::Syntax { offset: 4, .. })));
        assert!(matches!(Expr::parse("(x"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(Expr::parse("x y"), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(Expr::parse("z"), Err(ExprError::Syntax { offset: 0, .. })));
    }

    #[test]
    fn non_integer_exponent_rejected() {
        assert_eq!(Expr::parse("x^2.5"), Err(ExprError::NonIntegerExponent { offset: 2 }));
        assert_eq!(Expr::parse("x^y"), Err(ExprError::NonIntegerExponent { offset: 2 }));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let e = Expr::parse("1/x").unwrap();
        match e.eval(0.0, 1.0) {
            Err(ExprError::DivisionByZero { x, y, denominator }) => {
                assert_eq!((x, y), (0.0, 1.0));
                assert_eq!(denominator, "x");
            }
            other => panic!("expected division by zero, got {other:?}"),
        }
        assert!(Expr::parse("x^-1").unwrap().eval(0.0, 0.0).is_err());
    }

    #[test]
    fn derivatives() {
        let alpha = 0.7;
        let c = Expr::parse(&format!("{alpha}*y^2 - x")).unwrap();
        let cy = c.diff(Var::Y);
        for &(x, y) in &[(0.3, -1.2), (2.0, 0.5)] {
            assert!((cy.eval(x, y).unwrap() - 2.0 * alpha * y).abs() < 1e-14);
        }
        assert_eq!(c.diff(Var::X), Expr::Const(-1.0));
        assert_eq!(Expr::parse("x^2").unwrap().diff(Var::X).eval(3.0, 0.0).unwrap(), 6.0);
        let q = Expr::parse("x/(1 + y^2)").unwrap();
        let qxy = q.diff(Var::X).diff(Var::Y);
        let (x, y) = (0.4f64, 1.5f64);
        let exact = -2.0 * y / (1.0 + y * y).powi(2);
        assert!((qxy.eval(x, y).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn constant_folding() {
        assert_eq!(Expr::parse("2*3 + 0*x").unwrap(), Expr::Const(6.0));
        assert_eq!(Expr::parse("x^0").unwrap(), Expr::Const(1.0));
        assert_eq!(Expr::parse("--x").unwrap(), Expr::x());
    }

    #[test]
    fn scalar_field_caches_partials() {
        let f = ScalarField::parse("x^3*y").unwrap();
        let fxx = f.dx().dx();
        assert_eq!(fxx.eval(2.0, 3.0).unwrap(), 36.0);
        assert!(std::ptr::eq(f.dx(), f.dx()));
        assert_eq!(f.dy().dx().eval(1.0, 5.0).unwrap(), 3.0);
    }

    #[test]
    fn display_round_trips() {
        for s in ["x - (y - 2)", "-(x + y)^3/(x*y - 1)", "2/(x*y)*x", "(-2.5)*x^-3 - -y", "x^2^1"] {
            let Ok(e) = Expr::parse(s) else { continue };
            let back = Expr::parse(&e.to_string()).unwrap();
            for &(x, y) in &[(0.3, 1.7), (-1.1, 0.4)] {
                assert_eq!(e.eval(x, y).unwrap(), back.eval(x, y).unwrap(), "{s} -> {e}");
            }
        }
    }
}
