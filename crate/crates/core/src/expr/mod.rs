//! Exact symbolic scalar functions on an n-dimensional coordinate chart.
//!
//! An [`Expr`] is an immutable tree of sums, products, quotients, integer
//! powers and the elementary functions `exp`, `log`, `sqrt`, `sin`, `cos`,
//! over rational constants and chart variables `x1..xn`. Trees are shared
//! (`Arc`), so cloning subtrees during differentiation is cheap and values
//! can be evaluated from many threads at once.
//!
//! `abs(xi)` is allowed in the surface syntax but carries no calculus: it
//! must be resolved to `±xi` against a sign-definite chart before anything
//! differentiates it (see [`Expr::resolve_abs`]).

mod parse;

pub use parse::{parse, parse_with_params, ParamMap, ParseError};

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::chart::Sign;
use crate::float;

/// Exact rational constant with a cached f64 approximation for evaluation.
#[derive(Debug, Clone)]
pub struct Rat {
    exact: BigRational,
    approx: f64,
}

impl Rat {
    pub fn new(exact: BigRational) -> Self {
        let approx = exact.to_f64().unwrap_or(f64::NAN);
        Rat { exact, approx }
    }

    pub fn from_int(n: i64) -> Self {
        Rat::new(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn exact(&self) -> &BigRational {
        &self.exact
    }

    pub fn to_f64(&self) -> f64 {
        self.approx
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Self) -> bool {
        self.exact == other.exact
    }
}

/// Expression tree node. Variables are 0-based internally; the surface
/// syntax uses `x1..xn`.
#[derive(Debug, PartialEq)]
pub enum Node {
    Const(Rat),
    /// Chart variable by 0-based index.
    Var(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    /// Integer power; the only power form with exact differentiation.
    Pow(Expr, i32),
    Exp(Expr),
    Log(Expr),
    Sqrt(Expr),
    Sin(Expr),
    Cos(Expr),
    /// `abs(xi)` before sign resolution; rejected by `diff`.
    Abs(usize),
}

#[derive(Clone)]
pub struct Expr {
    node: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.node, &other.node) || *self.node == *other.node
    }
}

/// Out-of-domain evaluation. Reported instead of silently producing NaN.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable of index {index} used but point has dimension {dim}")]
    DimMismatch { index: usize, dim: usize },
    #[error("log of non-positive value {arg}")]
    LogDomain { arg: f64 },
    #[error("sqrt of negative value {arg}")]
    SqrtDomain { arg: f64 },
    #[error("division by zero")]
    DivByZero,
}

/// Differentiation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("cannot differentiate a signed-abs node on a sign-indefinite chart (variable index {index}); declare a sign for the variable")]
    SignedAbs { index: usize },
}

/// Sign-resolution failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AbsError {
    #[error("abs of variable index {index} needs a sign declaration on this chart")]
    UndeclaredSign { index: usize },
}

impl Expr {
    fn new(node: Node) -> Self {
        Expr {
            node: Arc::new(node),
        }
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    // ---- constructors ----------------------------------------------------

    pub fn int(n: i64) -> Self {
        Expr::new(Node::Const(Rat::from_int(n)))
    }

    pub fn rational(q: BigRational) -> Self {
        Expr::new(Node::Const(Rat::new(q)))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    /// Chart variable by 0-based index.
    pub fn var(index: usize) -> Self {
        Expr::new(Node::Var(index))
    }

    pub fn add(terms: Vec<Expr>) -> Self {
        Expr::new(Node::Add(terms)).simplify()
    }

    pub fn mul(factors: Vec<Expr>) -> Self {
        Expr::new(Node::Mul(factors)).simplify()
    }

    pub fn div(num: Expr, den: Expr) -> Self {
        Expr::new(Node::Div(num, den)).simplify()
    }

    pub fn pow(base: Expr, n: i32) -> Self {
        Expr::new(Node::Pow(base, n)).simplify()
    }

    pub fn exp(e: Expr) -> Self {
        Expr::new(Node::Exp(e)).simplify()
    }

    pub fn log(e: Expr) -> Self {
        Expr::new(Node::Log(e)).simplify()
    }

    pub fn sqrt(e: Expr) -> Self {
        Expr::new(Node::Sqrt(e)).simplify()
    }

    pub fn sin(e: Expr) -> Self {
        Expr::new(Node::Sin(e)).simplify()
    }

    pub fn cos(e: Expr) -> Self {
        Expr::new(Node::Cos(e)).simplify()
    }

    pub fn abs_var(index: usize) -> Self {
        Expr::new(Node::Abs(index))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::mul(vec![Expr::int(-1), e])
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn is_zero(&self) -> bool {
        matches!(&*self.node, Node::Const(q) if q.exact.is_zero())
    }

    pub fn as_const(&self) -> Option<&Rat> {
        match &*self.node {
            Node::Const(q) => Some(q),
            _ => None,
        }
    }

    // ---- evaluation ------------------------------------------------------

    /// IEEE-faithful evaluation of the tree at a point. Out-of-domain
    /// operations (log/sqrt of non-positive, division by zero) are errors.
    pub fn eval(&self, p: &[f64]) -> Result<f64, EvalError> {
        match &*self.node {
            Node::Const(q) => Ok(q.approx),
            Node::Var(i) => p
                .get(*i)
                .copied()
                .ok_or(EvalError::DimMismatch { index: *i, dim: p.len() }),
            Node::Add(ts) => {
                let mut acc = 0.0;
                for t in ts {
                    acc += t.eval(p)?;
                }
                Ok(acc)
            }
            Node::Mul(fs) => {
                let mut acc = 1.0;
                for f in fs {
                    acc *= f.eval(p)?;
                }
                Ok(acc)
            }
            Node::Div(a, b) => {
                let den = b.eval(p)?;
                if den == 0.0 {
                    return Err(EvalError::DivByZero);
                }
                Ok(a.eval(p)? / den)
            }
            Node::Pow(b, n) => {
                let base = b.eval(p)?;
                if base == 0.0 && *n < 0 {
                    return Err(EvalError::DivByZero);
                }
                Ok(float::powi(base, *n))
            }
            Node::Exp(e) => Ok(float::exp(e.eval(p)?)),
            Node::Log(e) => {
                let arg = e.eval(p)?;
                if arg <= 0.0 {
                    return Err(EvalError::LogDomain { arg });
                }
                Ok(float::ln(arg))
            }
            Node::Sqrt(e) => {
                let arg = e.eval(p)?;
                if arg < 0.0 {
                    return Err(EvalError::SqrtDomain { arg });
                }
                Ok(float::sqrt(arg))
            }
            Node::Sin(e) => Ok(float::sin(e.eval(p)?)),
            Node::Cos(e) => Ok(float::cos(e.eval(p)?)),
            Node::Abs(i) => {
                let v = p
                    .get(*i)
                    .copied()
                    .ok_or(EvalError::DimMismatch { index: *i, dim: p.len() })?;
                Ok(float::abs(v))
            }
        }
    }

    // ---- differentiation -------------------------------------------------

    /// Exact symbolic partial derivative with respect to variable `var`
    /// (0-based).
    pub fn diff(&self, var: usize) -> Result<Expr, DiffError> {
        let d = match &*self.node {
            Node::Const(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(ts) => {
                let mut parts = Vec::with_capacity(ts.len());
                for t in ts {
                    parts.push(t.diff(var)?);
                }
                Expr::add(parts)
            }
            Node::Mul(fs) => {
                let mut terms = Vec::with_capacity(fs.len());
                for (i, fi) in fs.iter().enumerate() {
                    let mut factors = Vec::with_capacity(fs.len());
                    for (j, fj) in fs.iter().enumerate() {
                        if i == j {
                            factors.push(fi.diff(var)?);
                        } else {
                            factors.push(fj.clone());
                        }
                    }
                    terms.push(Expr::mul(factors));
                }
                Expr::add(terms)
            }
            Node::Div(a, b) => {
                let da = a.diff(var)?;
                let db = b.diff(var)?;
                // (a'b - ab') / b^2
                Expr::div(
                    Expr::sub(
                        Expr::mul(vec![da, b.clone()]),
                        Expr::mul(vec![a.clone(), db]),
                    ),
                    Expr::pow(b.clone(), 2),
                )
            }
            Node::Pow(b, n) => {
                let db = b.diff(var)?;
                Expr::mul(vec![Expr::int(*n as i64), Expr::pow(b.clone(), n - 1), db])
            }
            Node::Exp(e) => Expr::mul(vec![self.clone(), e.diff(var)?]),
            Node::Log(e) => Expr::div(e.diff(var)?, e.clone()),
            Node::Sqrt(e) => Expr::div(
                e.diff(var)?,
                Expr::mul(vec![Expr::int(2), self.clone()]),
            ),
            Node::Sin(e) => Expr::mul(vec![Expr::cos(e.clone()), e.diff(var)?]),
            Node::Cos(e) => Expr::neg(Expr::mul(vec![Expr::sin(e.clone()), e.diff(var)?])),
            Node::Abs(i) => return Err(DiffError::SignedAbs { index: *i }),
        };
        Ok(d)
    }

    // ---- abs resolution ----------------------------------------------------

    pub fn contains_abs(&self) -> bool {
        match &*self.node {
            Node::Abs(_) => true,
            Node::Const(_) | Node::Var(_) => false,
            Node::Add(ts) | Node::Mul(ts) => ts.iter().any(Expr::contains_abs),
            Node::Div(a, b) => a.contains_abs() || b.contains_abs(),
            Node::Pow(b, _) => b.contains_abs(),
            Node::Exp(e) | Node::Log(e) | Node::Sqrt(e) | Node::Sin(e) | Node::Cos(e) => {
                e.contains_abs()
            }
        }
    }

    /// Rewrite each `abs(xi)` to `xi` or `-xi` according to the chart's sign
    /// declarations. Errors on a variable declared `Free`.
    pub fn resolve_abs(&self, signs: &[Sign]) -> Result<Expr, AbsError> {
        if !self.contains_abs() {
            return Ok(self.clone());
        }
        let e = match &*self.node {
            Node::Abs(i) => match signs.get(*i).copied().unwrap_or(Sign::Free) {
                Sign::Positive => Expr::var(*i),
                Sign::Negative => Expr::neg(Expr::var(*i)),
                Sign::Free => return Err(AbsError::UndeclaredSign { index: *i }),
            },
            Node::Const(_) | Node::Var(_) => self.clone(),
            Node::Add(ts) => {
                let mut out = Vec::with_capacity(ts.len());
                for t in ts {
                    out.push(t.resolve_abs(signs)?);
                }
                Expr::add(out)
            }
            Node::Mul(ts) => {
                let mut out = Vec::with_capacity(ts.len());
                for t in ts {
                    out.push(t.resolve_abs(signs)?);
                }
                Expr::mul(out)
            }
            Node::Div(a, b) => Expr::div(a.resolve_abs(signs)?, b.resolve_abs(signs)?),
            Node::Pow(b, n) => Expr::pow(b.resolve_abs(signs)?, *n),
            Node::Exp(e) => Expr::exp(e.resolve_abs(signs)?),
            Node::Log(e) => Expr::log(e.resolve_abs(signs)?),
            Node::Sqrt(e) => Expr::sqrt(e.resolve_abs(signs)?),
            Node::Sin(e) => Expr::sin(e.resolve_abs(signs)?),
            Node::Cos(e) => Expr::cos(e.resolve_abs(signs)?),
        };
        Ok(e)
    }

    // ---- simplification ----------------------------------------------------

    /// Constant folding, 0/1 identities and flattening of nested sums and
    /// products. No canonical forms: equality of expressions is a numeric
    /// question, not a structural one.
    pub fn simplify(&self) -> Expr {
        match &*self.node {
            Node::Const(_) | Node::Var(_) | Node::Abs(_) => self.clone(),
            Node::Add(ts) => {
                let mut flat: Vec<Expr> = Vec::new();
                let mut acc = BigRational::zero();
                for t in ts {
                    let t = t.simplify();
                    match &*t.node {
                        Node::Add(inner) => {
                            for u in inner {
                                match u.as_const() {
                                    Some(q) => acc += q.exact(),
                                    None => flat.push(u.clone()),
                                }
                            }
                        }
                        Node::Const(q) => acc += q.exact(),
                        _ => flat.push(t),
                    }
                }
                if !acc.is_zero() {
                    flat.push(Expr::rational(acc));
                }
                match flat.len() {
                    0 => Expr::zero(),
                    1 => flat.pop().unwrap(),
                    _ => Expr::new(Node::Add(flat)),
                }
            }
            Node::Mul(fs) => {
                let mut flat: Vec<Expr> = Vec::new();
                let mut acc = BigRational::from_integer(BigInt::from(1));
                for f in fs {
                    let f = f.simplify();
                    match &*f.node {
                        Node::Mul(inner) => {
                            for u in inner {
                                match u.as_const() {
                                    Some(q) => acc *= q.exact(),
                                    None => flat.push(u.clone()),
                                }
                            }
                        }
                        Node::Const(q) => acc *= q.exact(),
                        _ => flat.push(f),
                    }
                }
                if acc.is_zero() {
                    return Expr::zero();
                }
                let drop_unit = acc == BigRational::from_integer(BigInt::from(1));
                if !drop_unit {
                    flat.insert(0, Expr::rational(acc));
                }
                match flat.len() {
                    0 => Expr::one(),
                    1 => flat.pop().unwrap(),
                    _ => Expr::new(Node::Mul(flat)),
                }
            }
            Node::Div(a, b) => {
                let a = a.simplify();
                let b = b.simplify();
                if let (Some(qa), Some(qb)) = (a.as_const(), b.as_const()) {
                    if !qb.exact().is_zero() {
                        return Expr::rational(qa.exact() / qb.exact());
                    }
                }
                if let Some(qb) = b.as_const() {
                    if *qb.exact() == BigRational::from_integer(BigInt::from(1)) {
                        return a;
                    }
                }
                if a.is_zero() {
                    return Expr::zero();
                }
                Expr::new(Node::Div(a, b))
            }
            Node::Pow(b, n) => {
                let b = b.simplify();
                if *n == 0 {
                    return Expr::one();
                }
                if *n == 1 {
                    return b;
                }
                if let Some(q) = b.as_const() {
                    if *n > 0 || !q.exact().is_zero() {
                        let mut p = BigRational::from_integer(BigInt::from(1));
                        let e = q.exact();
                        for _ in 0..n.unsigned_abs() {
                            p *= e;
                        }
                        if *n < 0 {
                            p = p.recip();
                        }
                        return Expr::rational(p);
                    }
                }
                Expr::new(Node::Pow(b, *n))
            }
            Node::Exp(e) => {
                let e = e.simplify();
                if e.is_zero() {
                    return Expr::one();
                }
                Expr::new(Node::Exp(e))
            }
            Node::Log(e) => {
                let e = e.simplify();
                if let Some(q) = e.as_const() {
                    if *q.exact() == BigRational::from_integer(BigInt::from(1)) {
                        return Expr::zero();
                    }
                }
                Expr::new(Node::Log(e))
            }
            Node::Sqrt(e) => {
                let e = e.simplify();
                if let Some(q) = e.as_const() {
                    if !q.exact().is_negative() {
                        if let Some(r) = exact_rational_sqrt(q.exact()) {
                            return Expr::rational(r);
                        }
                    }
                }
                Expr::new(Node::Sqrt(e))
            }
            Node::Sin(e) => {
                let e = e.simplify();
                if e.is_zero() {
                    return Expr::zero();
                }
                Expr::new(Node::Sin(e))
            }
            Node::Cos(e) => {
                let e = e.simplify();
                if e.is_zero() {
                    return Expr::one();
                }
                Expr::new(Node::Cos(e))
            }
        }
    }

    /// Largest variable index used, plus one.
    pub fn min_dim(&self) -> usize {
        match &*self.node {
            Node::Const(_) => 0,
            Node::Var(i) | Node::Abs(i) => i + 1,
            Node::Add(ts) | Node::Mul(ts) => ts.iter().map(Expr::min_dim).max().unwrap_or(0),
            Node::Div(a, b) => a.min_dim().max(b.min_dim()),
            Node::Pow(b, _) => b.min_dim(),
            Node::Exp(e) | Node::Log(e) | Node::Sqrt(e) | Node::Sin(e) | Node::Cos(e) => {
                e.min_dim()
            }
        }
    }
}

fn exact_rational_sqrt(q: &BigRational) -> Option<BigRational> {
    let num = q.numer();
    let den = q.denom();
    let sn = num.sqrt();
    let sd = den.sqrt();
    if &sn * &sn == *num && &sd * &sd == *den {
        Some(BigRational::new(sn, sd))
    } else {
        None
    }
}

// ---- printing --------------------------------------------------------------

fn prec(node: &Node) -> u8 {
    match node {
        Node::Add(_) => 1,
        Node::Mul(_) | Node::Div(_, _) => 2,
        Node::Pow(_, _) => 3,
        _ => 4,
    }
}

fn fmt_child(f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8) -> fmt::Result {
    let needs_paren = match &*e.node {
        Node::Const(q) => q.exact().is_negative() || !q.exact().is_integer(),
        n => prec(n) < parent,
    };
    if needs_paren {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.node {
            Node::Const(q) => {
                if q.exact().is_integer() {
                    write!(f, "{}", q.exact().numer())
                } else {
                    write!(f, "{}/{}", q.exact().numer(), q.exact().denom())
                }
            }
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Abs(i) => write!(f, "abs(x{})", i + 1),
            Node::Add(ts) => {
                for (k, t) in ts.iter().enumerate() {
                    if k > 0 {
                        write!(f, " + ")?;
                    }
                    fmt_child(f, t, 1)?;
                }
                Ok(())
            }
            Node::Mul(fs) => {
                for (k, t) in fs.iter().enumerate() {
                    if k > 0 {
                        write!(f, "*")?;
                    }
                    fmt_child(f, t, 2)?;
                }
                Ok(())
            }
            Node::Div(a, b) => {
                fmt_child(f, a, 2)?;
                write!(f, "/")?;
                // Denominator binds tighter: never print a/b*c for a/(b*c).
                fmt_child(f, b, 3)
            }
            Node::Pow(b, n) => {
                fmt_child(f, b, 4)?;
                if *n < 0 {
                    write!(f, "^({})", n)
                } else {
                    write!(f, "^{}", n)
                }
            }
            Node::Exp(e) => write!(f, "exp({})", e),
            Node::Log(e) => write!(f, "log({})", e),
            Node::Sqrt(e) => write!(f, "sqrt({})", e),
            Node::Sin(e) => write!(f, "sin({})", e),
            Node::Cos(e) => write!(f, "cos({})", e),
        }
    }
}

/// Central finite difference of `eval` in variable `var`, used as the
/// independent oracle for `diff` in tests and diagnostics.
pub fn central_fd(e: &Expr, var: usize, p: &[f64], h: f64) -> Result<f64, EvalError> {
    let mut hi = p.to_vec();
    let mut lo = p.to_vec();
    hi[var] += h;
    lo[var] -= h;
    Ok((e.eval(&hi)? - e.eval(&lo)?) / (2.0 * h))
}

pub fn print_expr(e: &Expr) -> String {
    use alloc::format;
    format!("{}", e)
}
