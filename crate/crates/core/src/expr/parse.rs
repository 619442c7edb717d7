//! Recursive-descent parser for the expression grammar.
//!
//! Grammar (whitespace insignificant, offsets reported in bytes of the
//! original text):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          -- exponent must fold to an integer
//! atom   := number | name '(' expr ')' | name | '(' expr ')'
//! ```
//!
//! Names are the functions `exp log sqrt sin cos abs`, the chart variables
//! `x1..xn`, or declared model parameters (substituted as exact rationals).
//! Number literals (`2`, `0.5`, `2.5e-3`) are parsed as exact rationals.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::{Expr, Node, Rat};

/// Named rational parameters substituted at parse time.
pub type ParamMap = BTreeMap<String, Rat>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

fn err<T>(offset: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        offset,
        message: message.into(),
    })
}

pub fn parse(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let empty = ParamMap::new();
    parse_with_params(text, dim, &empty)
}

pub fn parse_with_params(text: &str, dim: usize, params: &ParamMap) -> Result<Expr, ParseError> {
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
        dim,
        params,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return err(p.pos, "unexpected trailing input");
    }
    Ok(e.simplify())
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    dim: usize,
    params: &'a ParamMap,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    acc = Expr::new(Node::Add(vec![acc, rhs]));
                }
                Some(b'-') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.term()?;
                    acc = Expr::new(Node::Add(vec![acc, Expr::new(Node::Mul(vec![Expr::int(-1), rhs]))]));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.unary()?;
                    acc = Expr::new(Node::Mul(vec![acc, rhs]));
                }
                Some(b'/') => {
                    self.pos += 1;
                    self.skip_ws();
                    let rhs = self.unary()?;
                    acc = Expr::new(Node::Div(acc, rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.skip_ws();
            let e = self.unary()?;
            return Ok(Expr::new(Node::Mul(vec![Expr::int(-1), e])));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let exp_offset = self.pos;
            let e = self.unary()?;
            let folded = e.simplify();
            let n = match folded.as_const() {
                Some(q) if q.exact().is_integer() => {
                    q.exact().numer().to_i32().ok_or(ParseError {
                        offset: exp_offset,
                        message: "exponent too large".to_string(),
                    })?
                }
                _ => {
                    return err(
                        exp_offset,
                        "exponent must be an integer constant (use sqrt/exp/log for fractional powers)",
                    )
                }
            };
            return Ok(Expr::new(Node::Pow(base, n)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        match self.peek() {
            None => err(self.pos, "unexpected end of input"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return err(self.pos, "expected ')'");
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            Some(c) => err(self.pos, alloc::format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let mut int_digits = String::new();
        let mut frac_digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                int_digits.push(c as char);
                self.pos += 1;
            } else {
                break;
            }
        }
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    frac_digits.push(c as char);
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        if int_digits.is_empty() && frac_digits.is_empty() {
            return err(start, "malformed number");
        }
        let mut exp10: i64 = -(frac_digits.len() as i64);
        // optional exponent part: e / E followed by signed digits
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1i64;
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                if self.peek() == Some(b'-') {
                    sign = -1;
                }
                self.pos += 1;
            }
            let mut digits = String::new();
            while let Some(c) = self.peek() {
                if c.is_ascii_digit() {
                    digits.push(c as char);
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if digits.is_empty() {
                // not an exponent after all (e.g. a name follows); back off
                self.pos = save;
            } else {
                let e: i64 = digits.parse().map_err(|_| ParseError {
                    offset: save,
                    message: "malformed exponent".to_string(),
                })?;
                exp10 += sign * e;
            }
        }
        let mantissa: BigInt = {
            let mut all = int_digits;
            all.push_str(&frac_digits);
            if all.is_empty() {
                return err(start, "malformed number");
            }
            all.parse().map_err(|_| ParseError {
                offset: start,
                message: "malformed number".to_string(),
            })?
        };
        let ten = BigInt::from(10);
        let mut q = BigRational::from_integer(mantissa);
        if exp10 >= 0 {
            let mut scale = BigInt::from(1);
            for _ in 0..exp10 {
                scale *= &ten;
            }
            q *= BigRational::from_integer(scale);
        } else {
            let mut scale = BigInt::from(1);
            for _ in 0..(-exp10) {
                scale *= &ten;
            }
            q /= BigRational::from_integer(scale);
        }
        Ok(Expr::new(Node::Const(Rat::new(q))))
    }

    fn name(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = core::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        self.skip_ws();
        let is_call = self.peek() == Some(b'(');
        if is_call {
            if let Some(f) = function_name(name) {
                self.pos += 1; // consume '('
                let arg_offset = self.pos;
                let arg = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return err(self.pos, "expected ')'");
                }
                self.pos += 1;
                return self.apply(f, arg, arg_offset);
            }
        }
        // variable x<k>
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().map_err(|_| ParseError {
                    offset: start,
                    message: "variable index too large".to_string(),
                })?;
                if idx == 0 || idx > self.dim {
                    return err(
                        start,
                        alloc::format!("variable x{idx} out of range for dimension {}", self.dim),
                    );
                }
                return Ok(Expr::new(Node::Var(idx - 1)));
            }
        }
        if let Some(q) = self.params.get(name) {
            return Ok(Expr::new(Node::Const(q.clone())));
        }
        err(start, alloc::format!("unknown identifier '{name}'"))
    }

    fn apply(&self, f: Func, arg: Expr, arg_offset: usize) -> Result<Expr, ParseError> {
        let node = match f {
            Func::Exp => Node::Exp(arg),
            Func::Log => Node::Log(arg),
            Func::Sqrt => Node::Sqrt(arg),
            Func::Sin => Node::Sin(arg),
            Func::Cos => Node::Cos(arg),
            Func::Abs => match &*arg.node {
                Node::Var(i) => Node::Abs(*i),
                _ => {
                    return err(
                        arg_offset,
                        "abs() takes a single chart variable (declare the sign of composite quantities instead)",
                    )
                }
            },
        };
        Ok(Expr::new(node))
    }
}

#[derive(Clone, Copy)]
enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
}

fn function_name(s: &str) -> Option<Func> {
    match s {
        "exp" => Some(Func::Exp),
        "log" => Some(Func::Log),
        "sqrt" => Some(Func::Sqrt),
        "sin" => Some(Func::Sin),
        "cos" => Some(Func::Cos),
        "abs" => Some(Func::Abs),
        _ => None,
    }
}
