//! Scalar coefficient expressions.
//!
//! Grammar (whitespace insignificant):
//!
//! ```txt
//! expr   ::= term (('+' | '-') term)*
//! term   ::= unary (('*' | '/') unary)*
//! unary  ::= '-' unary | power
//! power  ::= atom ('^' unary)?
//! atom   ::= number | ident | func '(' expr ')' | '(' expr ')'
//! func   ::= sin | cos | exp | log | sqrt | tanh
//! ```
//!
//! Identifiers are the coordinate names (`x1`..`xN` by default) or the
//! constant `pi`. Unary minus binds looser than `^`, so `-x1^2` is `-(x1^2)`.
//!
//! Evaluation comes in three flavours: plain `f64`, forward-mode dual
//! numbers carrying the full gradient, and truncated Taylor jets for higher
//! derivatives. None of them rewrites the tree.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use std::sync::Arc;

use thiserror::Error;

use crate::jet::{Jet, JetLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable index {index} at byte {offset} exceeds dimension {dimension}")]
    VariableOutOfRange {
        index: usize,
        dimension: usize,
        offset: usize,
    },
    #[error("domain error in '{op}' at point {point:?}")]
    Domain { op: &'static str, point: Vec<f64> },
    #[error("binding has {got} values, expression expects {expected}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Var(usize),
    Num(f64),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression over `dimension` real variables. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dimension: usize,
}

/// Point at which an expression is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    values: Vec<f64>,
}

impl Binding {
    pub fn new(values: Vec<f64>) -> Self {
        Binding { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl From<&[f64]> for Binding {
    fn from(v: &[f64]) -> Self {
        Binding::new(v.to_vec())
    }
}

/// Parse `text` with variables `x1..xN`, `N = dimension`.
pub fn parse_expression(text: &str, dimension: usize) -> Result<Expression, ExprError> {
    let mut parser = Parser::new(text, Names::Indexed(dimension));
    let root = parser.parse()?;
    Ok(Expression { root, dimension })
}

/// Parse `text` with custom coordinate names; `names[i]` refers to coordinate `i`.
/// The indexed names `x1..xN` are accepted as well.
pub fn parse_with_names(text: &str, names: &[String]) -> Result<Expression, ExprError> {
    let mut parser = Parser::new(text, Names::Custom(names));
    let root = parser.parse()?;
    Ok(Expression {
        root,
        dimension: names.len(),
    })
}

impl Expression {
    pub fn constant(value: f64, dimension: usize) -> Self {
        Expression {
            root: Node::Num(value),
            dimension,
        }
    }

    pub fn variable(index: usize, dimension: usize) -> Self {
        assert!(index < dimension);
        Expression {
            root: Node::Var(index),
            dimension,
        }
    }

    pub fn from_node(root: Node, dimension: usize) -> Self {
        Expression { root, dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// True when the tree is a literal zero (used to skip work, not for algebra).
    pub fn is_zero_literal(&self) -> bool {
        matches!(self.root, Node::Num(v) if v == 0.0)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, ExprError> {
        self.check_arity(p.len())?;
        eval_node(&self.root, p, &|i: usize| p[i], &|v| v)
    }

    pub fn eval_binding(&self, b: &Binding) -> Result<f64, ExprError> {
        self.eval(b.values())
    }

    /// Value and gradient by forward-mode dual numbers.
    pub fn eval_with_gradient(&self, p: &[f64]) -> Result<(f64, Vec<f64>), ExprError> {
        self.check_arity(p.len())?;
        let n = self.dimension;
        let d = eval_node(
            &self.root,
            p,
            &|i: usize| Dual::variable(p[i], i, n),
            &|v| Dual::constant(v, n),
        )?;
        Ok((d.value, d.grad))
    }

    /// Taylor coefficients of degree ≤ `degree` at p.
    pub fn taylor(&self, p: &[f64], degree: usize) -> Result<Jet, ExprError> {
        self.taylor_with(p, &JetLayout::new(self.dimension, degree))
    }

    /// As [`Expression::taylor`] with a prebuilt layout (reuse it across points).
    pub fn taylor_with(&self, p: &[f64], layout: &Arc<JetLayout>) -> Result<Jet, ExprError> {
        self.check_arity(p.len())?;
        eval_node(
            &self.root,
            p,
            &|i: usize| Jet::variable(layout, p[i], i),
            &|v| Jet::constant(layout, v),
        )
    }

    fn check_arity(&self, got: usize) -> Result<(), ExprError> {
        if got != self.dimension {
            return Err(ExprError::Arity {
                expected: self.dimension,
                got,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Var(i) => write!(f, "x{}", i + 1),
        Node::Num(v) => {
            if *v < 0.0 {
                write!(f, "(-{})", -v)
            } else {
                write!(f, "{v}")
            }
        }
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) => write_binary(a, "+", b, f),
        Node::Sub(a, b) => write_binary(a, "-", b, f),
        Node::Mul(a, b) => write_binary(a, "*", b, f),
        Node::Div(a, b) => write_binary(a, "/", b, f),
        Node::Pow(a, b) => write_binary(a, "^", b, f),
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            write!(f, ")")
        }
    }
}

fn write_binary(a: &Node, op: &str, b: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "(")?;
    write_node(a, f)?;
    write!(f, " {op} ")?;
    write_node(b, f)?;
    write!(f, ")")
}

// ---------------------------------------------------------------------------
// evaluation

trait Number:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn value(&self) -> f64;
    fn is_constant(&self) -> bool;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn powi(self, n: i32) -> Self;
}

impl Number for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// First-order dual number carrying a full gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, n: usize) -> Self {
        Dual {
            value,
            grad: vec![0.0; n],
        }
    }

    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut grad = vec![0.0; n];
        grad[index] = 1.0;
        Dual { value, grad }
    }

    fn chain(self, value: f64, slope: f64) -> Self {
        let grad = self.grad.into_iter().map(|g| g * slope).collect();
        Dual { value, grad }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, rhs: Dual) -> Dual {
        self.value += rhs.value;
        self.grad.iter_mut().zip(&rhs.grad).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: Dual) -> Dual {
        self.value -= rhs.value;
        self.grad.iter_mut().zip(&rhs.grad).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(mut self, rhs: Dual) -> Dual {
        let (u, v) = (self.value, rhs.value);
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a = *a * v + u * b);
        self.value = u * v;
        self
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(mut self, rhs: Dual) -> Dual {
        let (u, v) = (self.value, rhs.value);
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a = (*a * v - u * b) / (v * v));
        self.value = u / v;
        self
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(mut self) -> Dual {
        self.value = -self.value;
        self.grad.iter_mut().for_each(|a| *a = -*a);
        self
    }
}

impl Number for Dual {
    fn value(&self) -> f64 {
        self.value
    }
    fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0)
    }
    fn sin(self) -> Self {
        let v = self.value;
        self.chain(v.sin(), v.cos())
    }
    fn cos(self) -> Self {
        let v = self.value;
        self.chain(v.cos(), -v.sin())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn ln(self) -> Self {
        let v = self.value;
        self.chain(v.ln(), 1.0 / v)
    }
    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.chain(s, 0.5 / s)
    }
    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.chain(t, 1.0 - t * t)
    }
    fn powi(self, n: i32) -> Self {
        let v = self.value;
        let slope = if n == 0 { 0.0 } else { n as f64 * v.powi(n - 1) };
        self.chain(v.powi(n), slope)
    }
}

impl Number for Jet {
    fn value(&self) -> f64 {
        Jet::value(self)
    }
    fn is_constant(&self) -> bool {
        Jet::is_constant(self)
    }
    fn sin(self) -> Self {
        Jet::sin(&self)
    }
    fn cos(self) -> Self {
        Jet::cos(&self)
    }
    fn exp(self) -> Self {
        Jet::exp(&self)
    }
    fn ln(self) -> Self {
        Jet::ln(&self)
    }
    fn sqrt(self) -> Self {
        Jet::sqrt(&self)
    }
    fn tanh(self) -> Self {
        Jet::tanh(&self)
    }
    fn powi(self, n: i32) -> Self {
        Jet::powi(&self, n)
    }
}

fn domain(op: &'static str, p: &[f64]) -> ExprError {
    ExprError::Domain {
        op,
        point: p.to_vec(),
    }
}

fn eval_node<T: Number>(
    node: &Node,
    p: &[f64],
    var: &dyn Fn(usize) -> T,
    lit: &dyn Fn(f64) -> T,
) -> Result<T, ExprError> {
    Ok(match node {
        Node::Var(i) => var(*i),
        Node::Num(v) => lit(*v),
        Node::Neg(a) => -eval_node(a, p, var, lit)?,
        Node::Add(a, b) => eval_node(a, p, var, lit)? + eval_node(b, p, var, lit)?,
        Node::Sub(a, b) => eval_node(a, p, var, lit)? - eval_node(b, p, var, lit)?,
        Node::Mul(a, b) => eval_node(a, p, var, lit)? * eval_node(b, p, var, lit)?,
        Node::Div(a, b) => {
            let num = eval_node(a, p, var, lit)?;
            let den = eval_node(b, p, var, lit)?;
            if den.value() == 0.0 {
                return Err(domain("/", p));
            }
            num / den
        }
        Node::Pow(a, b) => {
            let base = eval_node(a, p, var, lit)?;
            let exponent = eval_node(b, p, var, lit)?;
            let e = exponent.value();
            if exponent.is_constant() && e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                if base.value() == 0.0 && e < 0.0 {
                    return Err(domain("^", p));
                }
                base.powi(e as i32)
            } else {
                if base.value() <= 0.0 {
                    return Err(domain("^", p));
                }
                (exponent * base.ln()).exp()
            }
        }
        Node::Call(func, a) => {
            let x = eval_node(a, p, var, lit)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Tanh => x.tanh(),
                Func::Log => {
                    if x.value() <= 0.0 {
                        return Err(domain("log", p));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    let v = x.value();
                    // sqrt(0) is defined but its derivative is not; only the
                    // plain-value path may pass through zero
                    if v < 0.0 || (v == 0.0 && !x.is_constant()) {
                        return Err(domain("sqrt", p));
                    }
                    x.sqrt()
                }
            }
        }
    })
}

// ---------------------------------------------------------------------------
// parsing

enum Names<'a> {
    Indexed(usize),
    Custom(&'a [String]),
}

impl Names<'_> {
    fn dimension(&self) -> usize {
        match self {
            Names::Indexed(n) => *n,
            Names::Custom(names) => names.len(),
        }
    }

    fn lookup(&self, name: &str, offset: usize) -> Result<Node, ExprError> {
        if let Names::Custom(names) = self {
            if let Some(i) = names.iter().position(|n| n == name) {
                return Ok(Node::Var(i));
            }
        }
        if name == "pi" {
            return Ok(Node::Num(std::f64::consts::PI));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().map_err(|_| ExprError::Syntax {
                    offset,
                    message: "variable index too large".into(),
                })?;
                let dimension = self.dimension();
                if index == 0 || index > dimension {
                    return Err(ExprError::VariableOutOfRange {
                        index,
                        dimension,
                        offset,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        Err(ExprError::UnknownIdentifier {
            name: name.to_string(),
            offset,
        })
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    names: Names<'a>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, names: Names<'a>) -> Self {
        Parser { src, pos: 0, names }
    }

    fn parse(&mut self) -> Result<Node, ExprError> {
        let node = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error("unexpected trailing input"));
        }
        Ok(node)
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.as_bytes().get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                let bytes = self.src.as_bytes();
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = &self.src[start..self.pos];
                if let Some(func) = Func::from_name(name) {
                    if !self.eat(b'(') {
                        return Err(self.error("expected '(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected ')'"));
                    }
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                self.names.lookup(name, start)
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let digits = |p: &mut usize| {
            while *p < bytes.len() && bytes[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut p = self.pos + 1;
            if p < bytes.len() && (bytes[p] == b'+' || bytes[p] == b'-') {
                p += 1;
            }
            if p < bytes.len() && bytes[p].is_ascii_digit() {
                digits(&mut p);
                self.pos = p;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Node::Num)
            .map_err(|_| ExprError::Syntax {
                offset: start,
                message: "malformed number".into(),
            })
    }
}
