//! A small arithmetic and trigonometric expression language for analytic
//! fields, initial data and driver paths.
//!
//! Grammar: numbers, named variables, `pi`, `+ - * / ^`, unary minus,
//! parentheses and the functions `sin cos tan exp log sqrt tanh`.
//! Expressions are differentiated symbolically so that Jacobians are exact.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{TimeVectorField, VectorField};
use crate::rough_path::SmoothPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Tanh => x.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

use Expr::*;

fn num(x: f64) -> Expr {
    Num(x)
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => Num(-x),
        Neg(b) => *b,
        a => Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (a, Num(z)) if z == 0.0 => a,
        (Num(z), b) if z == 0.0 => neg(b),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
        (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x / y),
        (Num(z), _) if z == 0.0 => Num(0.0),
        (a, Num(o)) if o == 1.0 => a,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x.powf(y)),
        (_, Num(z)) if z == 0.0 => Num(1.0),
        (a, Num(o)) if o == 1.0 => a,
        (a, b) => Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Num(x) => Num(f.apply(x)),
        a => Call(f, Box::new(a)),
    }
}

impl Expr {
    /// Parse `src` with the given variable names; `vars[i]` becomes `Var(i)`.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            vars,
            src,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Num(x) => *x,
            Var(i) => v[*i],
            Neg(a) => -a.eval(v),
            Add(a, b) => a.eval(v) + b.eval(v),
            Sub(a, b) => a.eval(v) - b.eval(v),
            Mul(a, b) => a.eval(v) * b.eval(v),
            Div(a, b) => a.eval(v) / b.eval(v),
            Pow(a, b) => {
                let base = a.eval(v);
                match **b {
                    Num(e) if e == e.round() && e.abs() <= 64.0 => base.powi(e as i32),
                    _ => base.powf(b.eval(v)),
                }
            }
            Call(f, a) => f.apply(a.eval(v)),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Num(_) => true,
            Var(_) => false,
            Neg(a) | Call(_, a) => a.is_constant(),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Partial derivative with respect to `Var(var)`.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Num(_) => num(0.0),
            Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), num(2.0)),
            ),
            Pow(a, b) => {
                let da = a.derivative(var);
                if b.is_constant() {
                    let c = b.eval(&[]);
                    mul(mul(num(c), pow((**a).clone(), num(c - 1.0))), da)
                } else {
                    let db = b.derivative(var);
                    mul(
                        self.clone(),
                        add(
                            mul(db, call(Func::Log, (**a).clone())),
                            div(mul((**b).clone(), da), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(num(1.0), pow(call(Func::Cos, inner), num(2.0))),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(num(1.0), inner),
                    Func::Sqrt => div(num(0.5), call(Func::Sqrt, inner)),
                    Func::Tanh => sub(num(1.0), pow(call(Func::Tanh, inner), num(2.0))),
                };
                mul(outer, a.derivative(var))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Num(x) => write!(f, "{x}"),
            Var(i) => write!(f, "v{i}"),
            Neg(a) => write!(f, "(-{a})"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Pow(a, b) => write!(f, "({a} ^ {b})"),
            Call(g, a) => write!(f, "{}({a})", g.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{text}' at {start} in '{src}'")))?;
            out.push((start, Token::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Token::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^()".contains(c) {
            out.push((i, Token::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse(format!(
                "unexpected character '{c}' at {i} in '{src}'"
            )));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    vars: &'a [&'a str],
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        let at = self
            .tokens
            .get(self.pos)
            .map_or(self.src.chars().count(), |t| t.0);
        Error::Parse(format!("{msg} at {at} in '{}'", self.src))
    }

    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some((_, Token::Op(c))) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' { add(lhs, rhs) } else { sub(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' { mul(lhs, rhs) } else { div(lhs, rhs) };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(neg(self.unary()?))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(pow(base, exp));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        match tok {
            Token::Num(v) => {
                self.pos += 1;
                Ok(num(v))
            }
            Token::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    self.pos += 1;
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    return Ok(call(f, e));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    self.pos += 1;
                    return Ok(Var(i));
                }
                if name == "pi" {
                    self.pos += 1;
                    return Ok(num(std::f64::consts::PI));
                }
                Err(self.error(&format!(
                    "unknown name '{name}' (variables: {})",
                    self.vars.join(", ")
                )))
            }
            Token::Op(_) => Err(self.error("unexpected operator")),
        }
    }
}

/// Variable names for a field on `ℝ^d`: `x, y, z` when `d ≤ 3`, also
/// `x1..xd` in every dimension.
fn space_vars(d: usize) -> Vec<String> {
    let mut v: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    v.extend(["x", "y", "z"].iter().take(d).map(|s| s.to_string()));
    v
}

fn parse_components(src: &[String], names: &[String]) -> Result<Vec<Expr>> {
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    src.iter().map(|s| Expr::parse(s, &refs)).collect()
}

/// Parse one scalar expression in the coordinates of `ℝ^d`.
pub fn parse_scalar(src: &str, d: usize) -> Result<Expr> {
    let names = space_vars(d);
    let mut e = parse_components(&[src.to_string()], &names)?;
    Ok(fold_aliases(e.remove(0), d))
}

/// Map the `x, y, z` aliases onto `x1..xd`.
fn fold_aliases(e: Expr, d: usize) -> Expr {
    let f = |a: Box<Expr>| Box::new(fold_aliases(*a, d));
    match e {
        Var(i) if i >= d => Var(i - d),
        Num(_) | Var(_) => e,
        Neg(a) => Neg(f(a)),
        Add(a, b) => Add(f(a), f(b)),
        Sub(a, b) => Sub(f(a), f(b)),
        Mul(a, b) => Mul(f(a), f(b)),
        Div(a, b) => Div(f(a), f(b)),
        Pow(a, b) => Pow(f(a), f(b)),
        Call(g, a) => Call(g, f(a)),
    }
}

/// Autonomous field given componentwise; the Jacobian is symbolic.
#[derive(Debug, Clone)]
pub struct ExprField {
    components: Vec<Expr>,
    jacobian: Vec<Expr>,
}

impl ExprField {
    pub fn parse(components: &[String]) -> Result<Self> {
        let d = components.len();
        if d == 0 {
            return Err(Error::Config("a vector field needs at least one component".into()));
        }
        let names = space_vars(d);
        let components: Vec<Expr> = parse_components(components, &names)?
            .into_iter()
            .map(|e| fold_aliases(e, d))
            .collect();
        let jacobian = components
            .iter()
            .flat_map(|c| (0..d).map(move |j| c.derivative(j)))
            .collect();
        Ok(Self {
            components,
            jacobian,
        })
    }
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) {
        for (o, c) in jac.iter_mut().zip(&self.jacobian) {
            *o = c.eval(x);
        }
    }
}

/// Time-dependent field in the variables `t` and the coordinates.
#[derive(Debug, Clone)]
pub struct ExprTimeField {
    components: Vec<Expr>,
    jacobian: Vec<Expr>,
}

impl ExprTimeField {
    pub fn parse(components: &[String]) -> Result<Self> {
        let d = components.len();
        if d == 0 {
            return Err(Error::Config("a vector field needs at least one component".into()));
        }
        let mut names = space_vars(d);
        names.push("t".into());
        let components: Vec<Expr> = parse_components(components, &names)?
            .into_iter()
            .map(|e| time_last(e, d))
            .collect();
        let jacobian = components
            .iter()
            .flat_map(|c| (0..d).map(move |j| c.derivative(j)))
            .collect();
        Ok(Self {
            components,
            jacobian,
        })
    }

    fn with_time(t: f64, x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        v.push(t);
        v
    }
}

/// Variables `[x1..xd, x, y, z (aliases), t]` become `[x1..xd, t]`.
fn time_last(e: Expr, d: usize) -> Expr {
    let aliases = d.min(3);
    let f = |a: Box<Expr>| Box::new(time_last(*a, d));
    match e {
        Var(i) if i >= d && i < d + aliases => Var(i - d),
        Var(i) if i == d + aliases => Var(d),
        Num(_) | Var(_) => e,
        Neg(a) => Neg(f(a)),
        Add(a, b) => Add(f(a), f(b)),
        Sub(a, b) => Sub(f(a), f(b)),
        Mul(a, b) => Mul(f(a), f(b)),
        Div(a, b) => Div(f(a), f(b)),
        Pow(a, b) => Pow(f(a), f(b)),
        Call(g, a) => Call(g, f(a)),
    }
}

impl TimeVectorField for ExprTimeField {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let v = Self::with_time(t, x);
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(&v);
        }
    }
    fn jacobian(&self, t: f64, x: &[f64], jac: &mut [f64]) {
        let v = Self::with_time(t, x);
        for (o, c) in jac.iter_mut().zip(&self.jacobian) {
            *o = c.eval(&v);
        }
    }
}

/// Driver path `t ↦ (Z_1(t)..Z_K(t))` from expressions in `t`.
#[derive(Debug, Clone)]
pub struct ExprPath {
    components: Vec<Expr>,
    derivatives: Vec<Expr>,
}

impl ExprPath {
    pub fn parse(components: &[String]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("an analytic driver needs at least one component".into()));
        }
        let components = components
            .iter()
            .map(|s| Expr::parse(s, &["t"]))
            .collect::<Result<Vec<_>>>()?;
        let derivatives = components.iter().map(|c| c.derivative(0)).collect();
        Ok(Self {
            components,
            derivatives,
        })
    }
}

impl SmoothPath for ExprPath {
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn value(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(&[t]);
        }
    }
    fn derivative(&self, t: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.derivatives) {
            *o = c.eval(&[t]);
        }
    }
}
