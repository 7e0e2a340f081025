//! A small expression language for coefficient functions, initial data and
//! source terms.
//!
//! Grammar (whitespace-insensitive, left-associative, `^` binds tightest):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' uint)*
//! atom   := number | variable | func '(' expr ')' | '(' expr ')'
//! func   := sqrt | exp | sin | cos
//! variable := 'x'<k> | 'y'<k> | 't'      (1-based k, checked against (n, m))
//! ```
//!
//! Differentiation is symbolic and total on this set, so oracle derivatives
//! never depend on finite differences. No simplification pass is promised:
//! derivative expressions are compared by pointwise evaluation, not syntax.
//! The printer emits a string that re-parses to an equal tree.

use crate::error::{Error, Result};
use crate::geometry::{Dims, SpatialPoint};
use std::fmt;

/// A variable of the ambient space: degenerate `x_i`, tangent `y_l`, or time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// 0-based index into the x coordinates.
    X(usize),
    /// 0-based index into the y coordinates.
    Y(usize),
    T,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(l) => write!(f, "y{}", l + 1),
            Var::T => write!(f, "t"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// Integer power, exponent ≥ 0.
    Pow(Box<Expr>, u32),
    Sqrt(Box<Expr>),
    Exp(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dims: Dims,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn syntax<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.bump();
            let inner = self.unary()?;
            // Fold a literal so printed negative constants round-trip to an
            // equal tree.
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.atom()?;
        while self.peek() == Some(b'^') {
            self.bump();
            self.skip_ws();
            let start = self.pos;
            let exp = self.uint(start)?;
            base = Expr::Pow(Box::new(base), exp);
        }
        Ok(base)
    }

    fn uint(&mut self, start: usize) -> Result<u32> {
        let mut end = self.pos;
        while end < self.src.len() && self.src[end].is_ascii_digit() {
            end += 1;
        }
        if end == self.pos {
            return self.syntax(start, "expected a nonnegative integer exponent");
        }
        let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
        let val: u32 = text
            .parse()
            .map_err(|_| Error::Syntax {
                offset: start,
                message: format!("integer exponent `{text}` out of range"),
            })?;
        self.pos = end;
        Ok(val)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => self.syntax(start, "unexpected end of input"),
            Some(b'(') => {
                self.bump();
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.syntax(self.pos, "expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(start),
            Some(c) if c.is_ascii_alphabetic() => self.identifier(start),
            Some(c) => self.syntax(start, format!("unexpected character `{}`", c as char)),
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let mut end = self.pos;
        let mut seen_dot = false;
        while end < self.src.len() {
            let c = self.src[end];
            if c.is_ascii_digit() {
                end += 1;
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
                end += 1;
            } else if (c == b'e' || c == b'E')
                && end + 1 < self.src.len()
                && (self.src[end + 1].is_ascii_digit()
                    || ((self.src[end + 1] == b'+' || self.src[end + 1] == b'-')
                        && end + 2 < self.src.len()
                        && self.src[end + 2].is_ascii_digit()))
            {
                end += 2;
                while end < self.src.len() && self.src[end].is_ascii_digit() {
                    end += 1;
                }
                break;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[self.pos..end]).unwrap();
        let val: f64 = text.parse().map_err(|_| Error::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        self.pos = end;
        Ok(Expr::Const(val))
    }

    fn identifier(&mut self, start: usize) -> Result<Expr> {
        let mut end = self.pos;
        while end < self.src.len()
            && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
        {
            end += 1;
        }
        let name = std::str::from_utf8(&self.src[self.pos..end]).unwrap().to_owned();
        self.pos = end;
        match name.as_str() {
            "t" => Ok(Expr::Var(Var::T)),
            "sqrt" | "exp" | "sin" | "cos" => {
                if self.peek() != Some(b'(') {
                    return self.syntax(self.pos, format!("expected `(` after `{name}`"));
                }
                self.bump();
                let arg = Box::new(self.expr()?);
                if self.peek() != Some(b')') {
                    return self.syntax(self.pos, "expected `)`");
                }
                self.bump();
                Ok(match name.as_str() {
                    "sqrt" => Expr::Sqrt(arg),
                    "exp" => Expr::Exp(arg),
                    "sin" => Expr::Sin(arg),
                    _ => Expr::Cos(arg),
                })
            }
            _ => {
                let (head, tail) = name.split_at(1);
                let index: Option<usize> = tail.parse().ok().filter(|&k| k >= 1);
                match (head, index) {
                    ("x", Some(k)) => {
                        if k > self.dims.n {
                            Err(Error::VariableOutOfRange {
                                offset: start,
                                name,
                                n: self.dims.n,
                                m: self.dims.m,
                            })
                        } else {
                            Ok(Expr::Var(Var::X(k - 1)))
                        }
                    }
                    ("y", Some(k)) => {
                        if k > self.dims.m {
                            Err(Error::VariableOutOfRange {
                                offset: start,
                                name,
                                n: self.dims.n,
                                m: self.dims.m,
                            })
                        } else {
                            Ok(Expr::Var(Var::Y(k - 1)))
                        }
                    }
                    _ => Err(Error::UnknownIdentifier {
                        offset: start,
                        name,
                    }),
                }
            }
        }
    }
}

/// Parse `text` against the configured dimensions.
pub fn parse(text: &str, dims: Dims) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dims,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(Error::Syntax {
            offset: p.pos,
            message: "trailing input".into(),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

impl Expr {
    /// Evaluate at `(t, z)`. Division by zero and square roots of negative
    /// values are reported as errors rather than producing non-finite values.
    pub fn eval(&self, t: f64, z: &SpatialPoint) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X(i)) => *z.x.get(*i).ok_or_else(|| {
                Error::Eval(format!("point has no x{} coordinate", i + 1))
            })?,
            Expr::Var(Var::Y(l)) => *z.y.get(*l).ok_or_else(|| {
                Error::Eval(format!("point has no y{} coordinate", l + 1))
            })?,
            Expr::Var(Var::T) => t,
            Expr::Add(a, b) => a.eval(t, z)? + b.eval(t, z)?,
            Expr::Sub(a, b) => a.eval(t, z)? - b.eval(t, z)?,
            Expr::Mul(a, b) => a.eval(t, z)? * b.eval(t, z)?,
            Expr::Div(a, b) => {
                let den = b.eval(t, z)?;
                if den == 0.0 {
                    return Err(Error::Eval("division by zero".into()));
                }
                a.eval(t, z)? / den
            }
            Expr::Neg(a) => -a.eval(t, z)?,
            Expr::Pow(a, k) => a.eval(t, z)?.powi(*k as i32),
            Expr::Sqrt(a) => {
                let v = a.eval(t, z)?;
                if v < 0.0 {
                    return Err(Error::Eval(format!("sqrt of negative value {v}")));
                }
                v.sqrt()
            }
            Expr::Exp(a) => a.eval(t, z)?.exp(),
            Expr::Sin(a) => a.eval(t, z)?.sin(),
            Expr::Cos(a) => a.eval(t, z)?.cos(),
        })
    }

    /// Evaluate a spatial-only expression (errors if `t` occurs).
    pub fn eval_spatial(&self, z: &SpatialPoint) -> Result<f64> {
        if self.uses_time() {
            return Err(Error::Eval(
                "expression uses t where a spatial-only expression is required".into(),
            ));
        }
        self.eval(0.0, z)
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(v) => *v == Var::T,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_time() || b.uses_time()
            }
            Expr::Neg(a) | Expr::Sqrt(a) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) => {
                a.uses_time()
            }
            Expr::Pow(a, _) => a.uses_time(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
            Expr::Neg(a) | Expr::Sqrt(a) | Expr::Exp(a) | Expr::Sin(a) | Expr::Cos(a) => {
                a.is_constant()
            }
            Expr::Pow(a, _) => a.is_constant(),
        }
    }
}

// ---------------------------------------------------------------------------
// Differentiation
// ---------------------------------------------------------------------------

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(c), b) if c == 0.0 => b,
        (a, Expr::Const(c)) if c == 0.0 => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, Expr::Const(c)) if c == 0.0 => a,
        (Expr::Const(c), b) if c == 0.0 => Expr::Neg(Box::new(b)),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(c), _) | (_, Expr::Const(c)) if c == 0.0 => Expr::Const(0.0),
        (Expr::Const(c), b) if c == 1.0 => b,
        (a, Expr::Const(c)) if c == 1.0 => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(c), _) if *c == 0.0 => Expr::Const(0.0),
        (_, Expr::Const(c)) if *c == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

/// Symbolically exact partial derivative with respect to `v`.
pub fn differentiate(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(w) => Expr::Const(if *w == v { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => add(differentiate(a, v), differentiate(b, v)),
        Expr::Sub(a, b) => sub(differentiate(a, v), differentiate(b, v)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a, v), (**b).clone()),
            mul((**a).clone(), differentiate(b, v)),
        ),
        Expr::Div(a, b) => div(
            sub(
                mul(differentiate(a, v), (**b).clone()),
                mul((**a).clone(), differentiate(b, v)),
            ),
            Expr::Pow(b.clone(), 2),
        ),
        Expr::Neg(a) => match differentiate(a, v) {
            Expr::Const(c) => Expr::Const(-c),
            d => Expr::Neg(Box::new(d)),
        },
        Expr::Pow(a, k) => {
            if *k == 0 {
                Expr::Const(0.0)
            } else if *k == 1 {
                differentiate(a, v)
            } else {
                mul(
                    mul(Expr::Const(*k as f64), Expr::Pow(a.clone(), k - 1)),
                    differentiate(a, v),
                )
            }
        }
        Expr::Sqrt(a) => div(
            differentiate(a, v),
            mul(Expr::Const(2.0), Expr::Sqrt(a.clone())),
        ),
        Expr::Exp(a) => mul(differentiate(a, v), Expr::Exp(a.clone())),
        Expr::Sin(a) => mul(differentiate(a, v), Expr::Cos(a.clone())),
        Expr::Cos(a) => mul(
            differentiate(a, v),
            Expr::Neg(Box::new(Expr::Sin(a.clone()))),
        ),
    }
}

// ---------------------------------------------------------------------------
// Printing (round-trips through `parse` to an equal tree)
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 => 3,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(child) < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 4)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 3)
            }
            Expr::Pow(a, k) => {
                write_child(f, a, 5)?;
                write!(f, "^{k}")
            }
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dims(n: usize, m: usize) -> Dims {
        Dims::new(n, m)
    }

    fn sp1(x: f64) -> SpatialPoint {
        SpatialPoint::new(vec![x], vec![]).unwrap()
    }

    #[test]
    fn parse_product_structure() {
        let e = parse("x1*(1 - x1)", dims(1, 0)).unwrap();
        assert_eq!(
            e,
            Expr::Mul(
                Box::new(Expr::Var(Var::X(0))),
                Box::new(Expr::Sub(
                    Box::new(Expr::Const(1.0)),
                    Box::new(Expr::Var(Var::X(0)))
                ))
            )
        );
    }

    #[test]
    fn parse_literal() {
        assert_eq!(parse("0.5", dims(0, 0)).unwrap(), Expr::Const(0.5));
    }

    #[test]
    fn parse_out_of_range_variable() {
        let e = parse("x3", dims(2, 0));
        assert!(matches!(e, Err(Error::VariableOutOfRange { .. })));
    }

    #[test]
    fn parse_unknown_identifier_with_offset() {
        match parse("1 + foo", dims(0, 0)) {
            Err(Error::UnknownIdentifier { offset, name }) => {
                assert_eq!(offset, 4);
                assert_eq!(name, "foo");
            }
            other => panic!("expected unknown identifier, got {other:?}"),
        }
    }

    #[test]
    fn parse_syntax_error_offset() {
        match parse("1 + ", dims(0, 0)) {
            Err(Error::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn precedence_pow_over_neg() {
        // -x1^2 parses as -(x1^2)
        let e = parse("-x1^2", dims(1, 0)).unwrap();
        let v = e.eval(0.0, &sp1(3.0)).unwrap();
        assert_eq!(v, -9.0);
    }

    #[test]
    fn eval_logistic() {
        let e = parse("x1*(1-x1)", dims(1, 0)).unwrap();
        assert_abs_diff_eq!(e.eval(0.0, &sp1(0.25)).unwrap(), 0.1875);
    }

    #[test]
    fn eval_sqrt() {
        let e = parse("sqrt(x1)", dims(1, 0)).unwrap();
        assert_eq!(e.eval(0.0, &sp1(4.0)).unwrap(), 2.0);
    }

    #[test]
    fn eval_division_by_zero() {
        let e = parse("1/x1", dims(1, 0)).unwrap();
        assert!(matches!(e.eval(0.0, &sp1(0.0)), Err(Error::Eval(_))));
    }

    #[test]
    fn eval_sqrt_negative() {
        let e = parse("sqrt(x1 - 2)", dims(1, 0)).unwrap();
        assert!(matches!(e.eval(0.0, &sp1(0.5)), Err(Error::Eval(_))));
    }

    #[test]
    fn diff_square() {
        let d = differentiate(&parse("x1^2", dims(1, 0)).unwrap(), Var::X(0));
        for &x in &[0.0, 0.3, 1.7] {
            assert_abs_diff_eq!(d.eval(0.0, &sp1(x)).unwrap(), 2.0 * x, epsilon = 1e-15);
        }
    }

    #[test]
    fn diff_wrt_absent_variable_is_zero() {
        let d = differentiate(&parse("x1", dims(1, 1)).unwrap(), Var::Y(0));
        assert_eq!(d, Expr::Const(0.0));
    }

    /// Central finite difference, the independent oracle for derivatives.
    fn central_diff(e: &Expr, v: Var, t: f64, z: &SpatialPoint, h: f64) -> f64 {
        let mut zp = z.clone();
        let mut zm = z.clone();
        let (tp, tm) = match v {
            Var::X(i) => {
                zp.x[i] += h;
                zm.x[i] -= h;
                (t, t)
            }
            Var::Y(l) => {
                zp.y[l] += h;
                zm.y[l] -= h;
                (t, t)
            }
            Var::T => (t + h, t - h),
        };
        (e.eval(tp, &zp).unwrap() - e.eval(tm, &zm).unwrap()) / (2.0 * h)
    }

    #[test]
    fn diff_sqrt_matches_central_difference() {
        let e = parse("sqrt(x1)", dims(1, 0)).unwrap();
        let d = differentiate(&e, Var::X(0));
        let exact = d.eval(0.0, &sp1(0.25)).unwrap();
        assert_abs_diff_eq!(exact, 1.0, epsilon = 1e-15);
        let fd = central_diff(&e, Var::X(0), 0.0, &sp1(0.25), 1e-6);
        assert!((exact - fd).abs() <= 1e-8);
    }

    #[test]
    fn finite_difference_consistency_on_smooth_family() {
        let exprs = [
            "x1^3 + 2*x1*y1",
            "sin(2*x1)*cos(y1)",
            "exp(-x1)*(1 + y1^2)",
            "x1*(1-x1)*exp(t)",
        ];
        let z = SpatialPoint::new(vec![0.6], vec![-0.4]).unwrap();
        for s in exprs {
            let e = parse(s, dims(1, 1)).unwrap();
            for v in [Var::X(0), Var::Y(0), Var::T] {
                let d = differentiate(&e, v);
                let exact = d.eval(0.7, &z).unwrap();
                // Two step sizes confirm O(h^2) behaviour of the residual.
                let f1 = central_diff(&e, v, 0.7, &z, 1e-4);
                let f2 = central_diff(&e, v, 0.7, &z, 5e-5);
                let e1 = (exact - f1).abs();
                let e2 = (exact - f2).abs();
                assert!(e1 <= 1e-6, "{s} d{v:?}: err {e1}");
                assert!(e2 <= e1 * 0.5 + 1e-12, "{s} d{v:?}: no h^2 decay");
            }
        }
    }

    #[test]
    fn diff_linearity_on_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let e1 = parse("sin(x1)*x1^2", dims(1, 0)).unwrap();
        let e2 = parse("exp(-x1) + x1^4", dims(1, 0)).unwrap();
        let a = 2.75;
        let combo = Expr::Add(
            Box::new(Expr::Mul(Box::new(Expr::Const(a)), Box::new(e1.clone()))),
            Box::new(e2.clone()),
        );
        let dc = differentiate(&combo, Var::X(0));
        let d1 = differentiate(&e1, Var::X(0));
        let d2 = differentiate(&e2, Var::X(0));
        for _ in 0..100 {
            let z = sp1(rng.gen_range(0.0..2.0));
            let lhs = dc.eval(0.0, &z).unwrap();
            let rhs = a * d1.eval(0.0, &z).unwrap() + d2.eval(0.0, &z).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-4.0f64..4.0).prop_map(Expr::Const),
            Just(Expr::Var(Var::X(0))),
            Just(Expr::Var(Var::Y(0))),
            Just(Expr::Var(Var::T)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone())
                    .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| match a {
                    Expr::Const(c) => Expr::Const(-c),
                    a => Expr::Neg(Box::new(a)),
                }),
                (inner.clone(), 0u32..5).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
                inner.clone().prop_map(|a| Expr::Sqrt(Box::new(a))),
                inner.clone().prop_map(|a| Expr::Exp(Box::new(a))),
                inner.clone().prop_map(|a| Expr::Sin(Box::new(a))),
                inner.prop_map(|a| Expr::Cos(Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse(&printed, dims(1, 1)).unwrap();
            prop_assert_eq!(reparsed, e);
        }
    }
}
