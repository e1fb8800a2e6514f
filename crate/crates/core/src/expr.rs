//! Expression mini-language for coefficients, right-hand sides, weights and
//! test functions in config files.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! expr      := term (('+' | '-') term)*
//! term      := unary (('*' | '/') unary)*
//! unary     := ('-' | '+') unary | primary
//! primary   := number | 'pi' | var
//!            | ('sin' | 'cos') '(' expr ')'
//!            | '(' expr ')'
//!            | piecewise
//! piecewise := 'piecewise' ('(' var ')')? ':' '[' number (',' number)* ']'
//! var       := 'x1' | 'x2' | 'y1' | 'y2' | 'z1' | 'z2' | 't'
//! ```
//!
//! `piecewise:[v0, ..., vk-1]` is periodic with period 1: the unit cell
//! `[-1/2, 1/2)` along the chosen variable is split into `k` equal pieces
//! taking the listed values. Without an explicit variable it follows the
//! default variable of the context (`y1` for Y coefficients, `z1` for Z
//! coefficients, `x1` otherwise).

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X1,
    X2,
    Y1,
    Y2,
    Z1,
    Z2,
    T,
}

impl Var {
    fn parse(name: &str) -> Option<Var> {
        Some(match name {
            "x1" => Var::X1,
            "x2" => Var::X2,
            "y1" => Var::Y1,
            "y2" => Var::Y2,
            "z1" => Var::Z1,
            "z2" => Var::Z2,
            "t" => Var::T,
            _ => return None,
        })
    }
}

/// Point at which an expression is evaluated.
#[derive(Clone, Copy, Debug, Default)]
pub struct Vars {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub t: f64,
}

impl Vars {
    pub fn at_x(x: [f64; 2]) -> Self {
        Vars { x, ..Default::default() }
    }

    pub fn at_y(y: [f64; 2]) -> Self {
        Vars { y, ..Default::default() }
    }

    pub fn at_z(z: [f64; 2]) -> Self {
        Vars { z, ..Default::default() }
    }

    pub fn at_t(t: f64) -> Self {
        Vars { t, ..Default::default() }
    }

    fn get(&self, v: Var) -> f64 {
        match v {
            Var::X1 => self.x[0],
            Var::X2 => self.x[1],
            Var::Y1 => self.y[0],
            Var::Y2 => self.y[1],
            Var::Z1 => self.z[0],
            Var::Z2 => self.z[1],
            Var::T => self.t,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
    Piecewise(Var, Vec<f64>),
}

/// Periodic piece index of `s` for `k` equal pieces of `[-1/2, 1/2)`.
fn piece_of(s: f64, k: usize) -> usize {
    let frac = s - (s + 0.5).floor();
    (((frac + 0.5) * k as f64).floor() as usize).min(k - 1)
}

impl Node {
    fn eval(&self, v: &Vars) -> f64 {
        match self {
            Node::Num(c) => *c,
            Node::Var(x) => v.get(*x),
            Node::Neg(a) => -a.eval(v),
            Node::Add(a, b) => a.eval(v) + b.eval(v),
            Node::Sub(a, b) => a.eval(v) - b.eval(v),
            Node::Mul(a, b) => a.eval(v) * b.eval(v),
            Node::Div(a, b) => a.eval(v) / b.eval(v),
            Node::Sin(a) => a.eval(v).sin(),
            Node::Cos(a) => a.eval(v).cos(),
            Node::Piecewise(x, vals) => vals[piece_of(v.get(*x), vals.len())],
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Node)) {
        f(self);
        match self {
            Node::Neg(a) | Node::Sin(a) | Node::Cos(a) => a.visit(f),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.visit(f);
                b.visit(f)
            }
            _ => {}
        }
    }
}

/// A parsed expression. Cheap to clone; evaluation is pure.
#[derive(Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    /// Parses with `x1` as the default piecewise variable.
    pub fn parse(src: &str) -> Result<Self> {
        Self::parse_with_default(src, Var::X1)
    }

    pub fn parse_with_default(src: &str, default_var: Var) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, default_var };
        let root = p.expr()?;
        if let Some((pos, tok)) = p.tokens.get(p.pos) {
            return Err(Error::Parse { pos: *pos, message: format!("unexpected {tok:?}") });
        }
        Ok(Expr { source: src.trim().to_string(), root })
    }

    pub fn constant(c: f64) -> Self {
        Expr { source: format!("{c}"), root: Node::Num(c) }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, v: &Vars) -> f64 {
        self.root.eval(v)
    }

    pub fn uses(&self, var: Var) -> bool {
        let mut found = false;
        self.root.visit(&mut |n| match n {
            Node::Var(x) | Node::Piecewise(x, _) if *x == var => found = true,
            _ => {}
        });
        found
    }

    pub fn has_piecewise(&self) -> bool {
        let mut found = false;
        self.root.visit(&mut |n| {
            if matches!(n, Node::Piecewise(..)) {
                found = true
            }
        });
        found
    }

    /// True when every piecewise sub-expression selects the same piece at
    /// `a` and `b`, i.e. the segment between them crosses no interface.
    pub fn same_piece(&self, a: &Vars, b: &Vars) -> bool {
        let mut same = true;
        self.root.visit(&mut |n| {
            if let Node::Piecewise(x, vals) = n {
                if piece_of(a.get(*x), vals.len()) != piece_of(b.get(*x), vals.len()) {
                    same = false;
                }
            }
        });
        same
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
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
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                pos: start,
                message: format!("bad number {text:?}"),
            })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/()[],:".contains(c) {
            out.push((i, Tok::Op(c)));
            i += 1;
        } else {
            return Err(Error::Parse { pos: i, message: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    default_var: Var,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.tokens.get(self.pos).map(|(p, _)| *p).unwrap_or(usize::MAX)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), message: message.into() })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Op('+')) => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Op('-')) => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn signed_number(&mut self) -> Result<f64> {
        let sign = match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(sign * v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn primary(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "sin" | "cos" => {
                        self.expect('(')?;
                        let e = Box::new(self.expr()?);
                        self.expect(')')?;
                        Ok(if name == "sin" { Node::Sin(e) } else { Node::Cos(e) })
                    }
                    "piecewise" => {
                        let mut var = self.default_var;
                        if self.peek() == Some(&Tok::Op('(')) {
                            self.pos += 1;
                            var = match self.peek().cloned() {
                                Some(Tok::Ident(v)) => match Var::parse(&v) {
                                    Some(x) => x,
                                    None => return self.err(format!("unknown variable {v:?}")),
                                },
                                _ => return self.err("expected a variable"),
                            };
                            self.pos += 1;
                            self.expect(')')?;
                        }
                        self.expect(':')?;
                        self.expect('[')?;
                        let mut vals = vec![self.signed_number()?];
                        while self.peek() == Some(&Tok::Op(',')) {
                            self.pos += 1;
                            vals.push(self.signed_number()?);
                        }
                        self.expect(']')?;
                        Ok(Node::Piecewise(var, vals))
                    }
                    other => match Var::parse(other) {
                        Some(v) => Ok(Node::Var(v)),
                        None => {
                            self.pos -= 1;
                            self.err(format!("unknown identifier {other:?}"))
                        }
                    },
                }
            }
            Some(t) => self.err(format!("unexpected {t:?}")),
            None => self.err("unexpected end of expression"),
        }
    }
}
