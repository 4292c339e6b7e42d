//! A tiny expression language in one variable `x`: numbers, `+ - * / ^`,
//! parentheses, `exp`, `log` (natural), `sqrt`, and the constants `pi`
//! and `e`. Expressions can be differentiated symbolically.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
}

use Expr::*;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Const(c) => *c,
            X => x,
            Neg(a) => -a.eval(x),
            Add(a, b) => a.eval(x) + b.eval(x),
            Sub(a, b) => a.eval(x) - b.eval(x),
            Mul(a, b) => a.eval(x) * b.eval(x),
            Div(a, b) => a.eval(x) / b.eval(x),
            Pow(a, b) => match **b {
                Const(k) if k.fract() == 0.0 && k.abs() < 64.0 => a.eval(x).powi(k as i32),
                _ => a.eval(x).powf(b.eval(x)),
            },
            Exp(a) => a.eval(x).exp(),
            Log(a) => a.eval(x).ln(),
            Sqrt(a) => a.eval(x).sqrt(),
        }
    }

    fn is_const(&self) -> Option<f64> {
        match self {
            Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Expr {
        match self {
            Const(_) => Const(0.0),
            X => Const(1.0),
            Neg(a) => neg(a.derivative()),
            Add(a, b) => add(a.derivative(), b.derivative()),
            Sub(a, b) => sub(a.derivative(), b.derivative()),
            Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                ),
                pow((**b).clone(), Const(2.0)),
            ),
            Pow(a, b) => match b.is_const() {
                Some(k) => mul(
                    mul(Const(k), pow((**a).clone(), Const(k - 1.0))),
                    a.derivative(),
                ),
                None => mul(
                    self.clone(),
                    add(
                        mul(b.derivative(), Log(a.clone())),
                        div(mul((**b).clone(), a.derivative()), (**a).clone()),
                    ),
                ),
            },
            Exp(a) => mul(self.clone(), a.derivative()),
            Log(a) => div(a.derivative(), (**a).clone()),
            Sqrt(a) => div(a.derivative(), mul(Const(2.0), self.clone())),
        }
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Const(c) => Const(-c),
        a => Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Const(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(x), Some(y)) => Const(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.is_const(), b.is_const()) {
        (Some(0.0), _) => Const(0.0),
        (_, Some(1.0)) => a,
        _ => Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match b.is_const() {
        Some(0.0) => Const(1.0),
        Some(1.0) => a,
        _ => Pow(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => write!(f, "{c}"),
            X => f.write_str("x"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Exp(a) => write!(f, "exp({a})"),
            Log(a) => write!(f, "log({a})"),
            Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            offset: self.pos,
            message: message.to_string(),
        }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "x" => Ok(X),
                    "pi" => Ok(Const(std::f64::consts::PI)),
                    "e" => Ok(Const(std::f64::consts::E)),
                    "exp" | "log" | "ln" | "sqrt" => {
                        if !self.eat(b'(') {
                            return Err(self.error("expected `(` after function name"));
                        }
                        let arg = Box::new(self.expr()?);
                        if !self.eat(b')') {
                            return Err(self.error("expected `)`"));
                        }
                        Ok(match name {
                            "exp" => Exp(arg),
                            "sqrt" => Sqrt(arg),
                            _ => Log(arg),
                        })
                    }
                    _ => {
                        self.pos = start;
                        Err(self.error(&format!("unknown identifier `{name}`")))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && (p.src[p.pos].is_ascii_digit() || p.src[p.pos] == b'.') {
                p.pos += 1;
            }
        };
        digits(self);
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().map(Const).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}
