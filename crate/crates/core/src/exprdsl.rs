//! A small arithmetic expression language for model files.
//!
//! Expressions are parsed against a [`Scope`] that declares the admissible
//! variable names and any named constants. Derivatives are produced
//! symbolically once, and hot loops evaluate a [`Compiled`] stack program
//! bound to a fixed slot layout instead of walking the tree with a map.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("missing binding for `{0}`")]
    MissingBinding(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Unary functions understood by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: f64) -> Result<f64, ExprError> {
        match self {
            Func::Sin => Ok(x.sin()),
            Func::Cos => Ok(x.cos()),
            Func::Exp => finite(x.exp(), "exp overflow"),
            Func::Ln => {
                if x <= 0.0 {
                    Err(ExprError::Domain(format!("ln of non-positive value {x}")))
                } else {
                    Ok(x.ln())
                }
            }
            Func::Sqrt => {
                if x < 0.0 {
                    Err(ExprError::Domain(format!("sqrt of negative value {x}")))
                } else {
                    Ok(x.sqrt())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

/// Variable bindings for [`Expr::evaluate`].
pub type Env = HashMap<String, f64>;

/// Names an expression may refer to: free variables and fixed constants.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    variables: Vec<String>,
    constants: HashMap<String, f64>,
}

impl Scope {
    pub fn new<S: AsRef<str>>(variables: &[S]) -> Self {
        Scope {
            variables: variables.iter().map(|s| s.as_ref().to_string()).collect(),
            constants: HashMap::new(),
        }
    }

    /// The model-file default: `p`, `q`, `z1..zk`, `eps` and `tau`.
    pub fn model(dim_z: usize) -> Self {
        let mut vars = vec!["p".to_string(), "q".to_string()];
        vars.extend((1..=dim_z).map(|k| format!("z{k}")));
        vars.push("eps".into());
        vars.push("tau".into());
        Scope::new(&vars)
    }

    pub fn with_constant(mut self, name: &str, value: f64) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn declares(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v == name)
    }
}

fn finite(x: f64, what: &str) -> Result<f64, ExprError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ExprError::Domain(what.to_string()))
    }
}

// ---------------------------------------------------------------------------
// Constructors with constant folding.

fn c(x: f64) -> Expr {
    Expr::Const(x)
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(x) if *x == v)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(x) => c(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => c(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => c(x / y),
        _ if is_const(&b, 1.0) => a,
        _ if is_const(&a, 0.0) && !is_const(&b, 0.0) => c(0.0),
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: f64) -> Expr {
    if n == 0.0 {
        return c(1.0);
    }
    if n == 1.0 {
        return a;
    }
    match a {
        Expr::Const(x) if x > 0.0 || n.fract() == 0.0 => c(x.powf(n)),
        other => Expr::Pow(Box::new(other), n),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a {
        Expr::Const(x) => match f.apply(x) {
            Ok(v) => c(v),
            Err(_) => Expr::Call(f, Box::new(c(x))),
        },
        other => Expr::Call(f, Box::new(other)),
    }
}

// ---------------------------------------------------------------------------
// Lexer and parser.

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((Tok::End, start));
        }
        let ch = bytes[start] as char;
        if ch.is_ascii_digit() || ch == '.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((Tok::Num(value), start));
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((Tok::Ident(self.src[start..end].to_string()), start));
        }
        self.pos += ch.len_utf8();
        match ch {
            '+' | '-' | '*' | '/' | '^' => Ok((Tok::Op(ch), start)),
            '(' => Ok((Tok::LParen, start)),
            ')' => Ok((Tok::RParen, start)),
            _ => Err(ExprError::Syntax {
                offset: start,
                message: format!("unexpected character `{ch}`"),
            }),
        }
    }
}

struct Parser<'s> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    scope: &'s Scope,
}

impl<'s> Parser<'s> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    // sum := product (('+' | '-') product)*
    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Tok::Op(op @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.product()?;
            lhs = if op == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // product := unary (('*' | '/') unary)*
    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        if *self.peek() == Tok::Op('+') {
            self.bump();
            return self.unary();
        }
        self.power()
    }

    // power := atom ('^' exponent)*, exponent folds to a constant
    fn power(&mut self) -> Result<Expr, ExprError> {
        let mut base = self.atom()?;
        while *self.peek() == Tok::Op('^') {
            self.bump();
            let at = self.offset();
            let exponent = if *self.peek() == Tok::Op('-') {
                self.bump();
                neg(fold(self.atom()?))
            } else {
                fold(self.atom()?)
            };
            match exponent {
                Expr::Const(n) => base = Expr::Pow(Box::new(base), n),
                _ => {
                    return Err(ExprError::Syntax {
                        offset: at,
                        message: "exponent must be a constant".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(x) => Ok(Expr::Const(x)),
            Tok::LParen => {
                let inner = self.sum()?;
                if *self.peek() != Tok::RParen {
                    return self.syntax("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    let Some(f) = Func::from_name(&name) else {
                        return Err(ExprError::UnknownFunction { name, offset: at });
                    };
                    self.bump();
                    let arg = self.sum()?;
                    if *self.peek() != Tok::RParen {
                        return self.syntax("expected `)` after function argument");
                    }
                    self.bump();
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if self.scope.declares(&name) {
                    Ok(Expr::Var(name))
                } else if let Some(&v) = self.scope.constants.get(&name) {
                    Ok(Expr::Const(v))
                } else if name == "pi" {
                    Ok(Expr::Const(std::f64::consts::PI))
                } else {
                    Err(ExprError::UnknownIdentifier { name, offset: at })
                }
            }
            Tok::End => Err(ExprError::Syntax {
                offset: at,
                message: "unexpected end of input".into(),
            }),
            Tok::Op(op) => Err(ExprError::Syntax {
                offset: at,
                message: format!("unexpected operator `{op}`"),
            }),
            Tok::RParen => Err(ExprError::Syntax {
                offset: at,
                message: "unexpected `)`".into(),
            }),
        }
    }
}

/// Parse `text` against `scope`. Precedence from loosest to tightest is
/// `+ -`, `* /`, unary minus, `^`; equal precedence associates to the left.
pub fn parse(text: &str, scope: &Scope) -> Result<Expr, ExprError> {
    if text.trim().is_empty() {
        return Err(ExprError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let toks = Lexer::tokens(text)?;
    let mut parser = Parser { toks, at: 0, scope };
    let e = parser.sum()?;
    if *parser.peek() != Tok::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(e)
}

/// Constant folding, the only simplification performed.
pub fn fold(e: Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e,
        Expr::Neg(a) => neg(fold(*a)),
        Expr::Add(a, b) => add(fold(*a), fold(*b)),
        Expr::Sub(a, b) => sub(fold(*a), fold(*b)),
        Expr::Mul(a, b) => mul(fold(*a), fold(*b)),
        Expr::Div(a, b) => div(fold(*a), fold(*b)),
        Expr::Pow(a, n) => pow(fold(*a), n),
        Expr::Call(f, a) => call(f, fold(*a)),
    }
}

impl Expr {
    /// Top-level additive terms, e.g. 4 for `p^2/2 - q^2/2 + q^4/4 + 1`.
    pub fn additive_terms(&self) -> usize {
        match self {
            Expr::Add(a, b) | Expr::Sub(a, b) => a.additive_terms() + b.additive_terms(),
            _ => 1,
        }
    }

    /// Replace variable names according to `map`; unmapped names are kept.
    pub fn rename(&self, map: &HashMap<String, String>) -> Expr {
        let r = |e: &Expr| Box::new(e.rename(map));
        match self {
            Expr::Const(x) => Expr::Const(*x),
            Expr::Var(v) => Expr::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
            Expr::Neg(a) => Expr::Neg(r(a)),
            Expr::Add(a, b) => Expr::Add(r(a), r(b)),
            Expr::Sub(a, b) => Expr::Sub(r(a), r(b)),
            Expr::Mul(a, b) => Expr::Mul(r(a), r(b)),
            Expr::Div(a, b) => Expr::Div(r(a), r(b)),
            Expr::Pow(a, n) => Expr::Pow(r(a), *n),
            Expr::Call(f, a) => Expr::Call(*f, r(a)),
        }
    }

    pub fn free_variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(v.clone()),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Exact partial derivative with respect to `var`. The result is
    /// constant-folded but otherwise unsimplified.
    pub fn differentiate(&self, var: &str, scope: &Scope) -> Result<Expr, ExprError> {
        if !scope.declares(var) {
            return Err(ExprError::UnknownVariable(var.to_string()));
        }
        Ok(self.derive(var))
    }

    fn derive(&self, v: &str) -> Expr {
        match self {
            Expr::Const(_) => c(0.0),
            Expr::Var(name) => c(if name == v { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.derive(v)),
            Expr::Add(a, b) => add(a.derive(v), b.derive(v)),
            Expr::Sub(a, b) => sub(a.derive(v), b.derive(v)),
            Expr::Mul(a, b) => add(
                mul(a.derive(v), (**b).clone()),
                mul((**a).clone(), b.derive(v)),
            ),
            Expr::Div(a, b) => div(
                sub(
                    mul(a.derive(v), (**b).clone()),
                    mul((**a).clone(), b.derive(v)),
                ),
                pow((**b).clone(), 2.0),
            ),
            Expr::Pow(a, n) => mul(mul(c(*n), pow((**a).clone(), n - 1.0)), a.derive(v)),
            Expr::Call(f, a) => {
                let inner = a.derive(v);
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => div(c(1.0), u),
                    Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
                };
                mul(outer, inner)
            }
        }
    }

    pub fn evaluate(&self, env: &Env) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Const(x) => *x,
            Expr::Var(name) => *env
                .get(name)
                .ok_or_else(|| ExprError::MissingBinding(name.clone()))?,
            Expr::Neg(a) => -a.evaluate(env)?,
            Expr::Add(a, b) => a.evaluate(env)? + b.evaluate(env)?,
            Expr::Sub(a, b) => a.evaluate(env)? - b.evaluate(env)?,
            Expr::Mul(a, b) => a.evaluate(env)? * b.evaluate(env)?,
            Expr::Div(a, b) => checked_div(a.evaluate(env)?, b.evaluate(env)?)?,
            Expr::Pow(a, n) => checked_pow(a.evaluate(env)?, *n)?,
            Expr::Call(f, a) => f.apply(a.evaluate(env)?)?,
        };
        finite(v, "non-finite result")
    }

    /// Compile to a stack program reading variables from `slots` order.
    pub fn compile(&self, slots: &[&str]) -> Result<Compiled, ExprError> {
        let mut code = Vec::new();
        self.emit(slots, &mut code)?;
        Ok(Compiled { code })
    }

    fn emit(&self, slots: &[&str], code: &mut Vec<Op>) -> Result<(), ExprError> {
        match self {
            Expr::Const(x) => code.push(Op::Const(*x)),
            Expr::Var(name) => {
                let k = slots
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| ExprError::UnknownVariable(name.clone()))?;
                code.push(Op::Load(k));
            }
            Expr::Neg(a) => {
                a.emit(slots, code)?;
                code.push(Op::Neg);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.emit(slots, code)?;
                b.emit(slots, code)?;
                code.push(match self {
                    Expr::Add(..) => Op::Add,
                    Expr::Sub(..) => Op::Sub,
                    Expr::Mul(..) => Op::Mul,
                    _ => Op::Div,
                });
            }
            Expr::Pow(a, n) => {
                a.emit(slots, code)?;
                code.push(Op::Pow(*n));
            }
            Expr::Call(f, a) => {
                a.emit(slots, code)?;
                code.push(Op::Call(*f));
            }
        }
        Ok(())
    }
}

fn checked_div(a: f64, b: f64) -> Result<f64, ExprError> {
    if b == 0.0 {
        Err(ExprError::Domain("division by zero".into()))
    } else {
        Ok(a / b)
    }
}

fn checked_pow(base: f64, n: f64) -> Result<f64, ExprError> {
    if n.fract() == 0.0 && n.abs() < i32::MAX as f64 {
        if base == 0.0 && n < 0.0 {
            return Err(ExprError::Domain("division by zero in negative power".into()));
        }
        Ok(base.powi(n as i32))
    } else if base <= 0.0 {
        Err(ExprError::Domain(format!(
            "non-integer power {n} of non-positive base {base}"
        )))
    } else {
        Ok(base.powf(n))
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow(f64),
    Call(Func),
}

/// Slot-bound stack program; evaluation reuses no heap allocation beyond a
/// small fixed stack.
#[derive(Debug, Clone)]
pub struct Compiled {
    code: Vec<Op>,
}

impl Compiled {
    pub fn eval(&self, slots: &[f64]) -> Result<f64, ExprError> {
        let mut stack = [0.0f64; 64];
        let mut sp = 0usize;
        let mut heap: Vec<f64> = Vec::new();
        macro_rules! push {
            ($v:expr) => {{
                let v = $v;
                if sp < stack.len() {
                    stack[sp] = v;
                } else {
                    heap.push(v);
                }
                sp += 1;
            }};
        }
        macro_rules! pop {
            () => {{
                sp -= 1;
                if sp < stack.len() {
                    stack[sp]
                } else {
                    heap.pop().unwrap()
                }
            }};
        }
        for op in &self.code {
            match *op {
                Op::Const(x) => push!(x),
                Op::Load(k) => push!(slots[k]),
                Op::Neg => {
                    let a = pop!();
                    push!(-a)
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = pop!();
                    let a = pop!();
                    push!(match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => checked_div(a, b)?,
                    })
                }
                Op::Pow(n) => {
                    let a = pop!();
                    push!(checked_pow(a, n)?)
                }
                Op::Call(f) => {
                    let a = pop!();
                    push!(f.apply(a)?)
                }
            }
        }
        finite(pop!(), "non-finite result")
    }
}

// ---------------------------------------------------------------------------
// Printing. The output re-parses to an expression with identical values.

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(x) if *x < 0.0 => 3,
        _ => 5,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if prec(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(x) => {
                if *x < 0.0 {
                    write!(f, "-{:?}", -x)
                } else {
                    write!(f, "{x:?}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 4)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { '+' } else { '-' })?;
                write_operand(f, b, 2)
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, " {} ", if matches!(self, Expr::Mul(..)) { '*' } else { '/' })?;
                write_operand(f, b, 3)
            }
            Expr::Pow(a, n) => {
                write_operand(f, a, 5)?;
                if *n < 0.0 {
                    write!(f, "^(-{:?})", -n)
                } else {
                    write!(f, "^{n:?}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
