//! Arithmetic expression DSL for Hamiltonians, metric factors and
//! potentials.
//!
//! Grammar (recursive descent, precedence climbing):
//!
//! ```text
//! expr   := term  (('+' | '-') term)*          left-associative
//! term   := unary (('*' | '/') unary)*         left-associative
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?                  right-associative, binds
//!                                              tighter than unary '-'
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Numbers are decimal literals with an optional exponent. Known
//! functions: exp, sinh, cosh, tanh, log, sqrt, sinhc, sin, cos — all of
//! arity one.

use crate::scalar::Scalar;
use num_traits::ToPrimitive;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Number,
    Identifier,
    Operator,
    Paren,
    Comma,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub position: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sinh,
    Cosh,
    Tanh,
    Log,
    Sqrt,
    Sinhc,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinhc => "sinhc",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinhc" => Func::Sinhc,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Const(f64),
    Symbol(String),
    Neg(Box<Ast>),
    Binary(BinOp, Box<Ast>, Box<Ast>),
    Call(Func, Box<Ast>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {position}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        position: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown function `{name}` at byte {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("invalid number literal at byte {position}")]
    BadNumber { position: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound symbols: {}", .0.join(", "))]
    Unbound(Vec<String>),
    #[error("domain error: {func} of {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("division by zero")]
    DivideByZero,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            tokens.push(Token {
                kind: TokenKind::Number,
                lexeme: src[start..i].to_string(),
                position: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Identifier,
                lexeme: src[start..i].to_string(),
                position: start,
            });
        } else if matches!(c, '+' | '-' | '*' | '/' | '^') {
            i += 1;
            tokens.push(Token {
                kind: TokenKind::Operator,
                lexeme: c.to_string(),
                position: start,
            });
        } else if c == '(' || c == ')' {
            i += 1;
            tokens.push(Token {
                kind: TokenKind::Paren,
                lexeme: c.to_string(),
                position: start,
            });
        } else if c == ',' {
            i += 1;
            tokens.push(Token {
                kind: TokenKind::Comma,
                lexeme: c.to_string(),
                position: start,
            });
        } else {
            return Err(ParseError::Syntax {
                position: start,
                expected: vec!["number", "identifier", "operator", "parenthesis"],
                found: format!("`{c}`"),
            });
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    idx: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.idx)
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(t) => format!("`{}`", t.lexeme),
            None => "end of input".to_string(),
        }
    }

    fn pos(&self) -> usize {
        self.peek().map(|t| t.position).unwrap_or(self.end)
    }

    fn err(&self, expected: Vec<&'static str>) -> ParseError {
        ParseError::Syntax {
            position: self.pos(),
            expected,
            found: self.found(),
        }
    }

    fn eat_op(&mut self, ops: &[&str]) -> Option<String> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Operator && ops.contains(&t.lexeme.as_str()) {
                let s = t.lexeme.clone();
                self.idx += 1;
                return Some(s);
            }
        }
        None
    }

    fn expect_paren(&mut self, which: &'static str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Paren && t.lexeme == which => {
                self.idx += 1;
                Ok(())
            }
            _ => Err(self.err(vec![if which == "(" { "`(`" } else { "`)`" }])),
        }
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&["+", "-"]) {
            let rhs = self.term()?;
            let b = if op == "+" { BinOp::Add } else { BinOp::Sub };
            lhs = Ast::Binary(b, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&["*", "/"]) {
            let rhs = self.unary()?;
            let b = if op == "*" { BinOp::Mul } else { BinOp::Div };
            lhs = Ast::Binary(b, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.eat_op(&["-"]).is_some() {
            Ok(Ast::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Ast, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&["^"]).is_some() {
            let exponent = self.unary()?;
            Ok(Ast::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let tok = match self.peek() {
            Some(t) => t.clone(),
            None => return Err(self.err(vec!["number", "identifier", "`(`"])),
        };
        match tok.kind {
            TokenKind::Number => {
                self.idx += 1;
                let v: f64 = tok
                    .lexeme
                    .parse()
                    .map_err(|_| ParseError::BadNumber { position: tok.position })?;
                Ok(Ast::Const(v))
            }
            TokenKind::Identifier => {
                self.idx += 1;
                let is_call = matches!(self.peek(),
                    Some(t) if t.kind == TokenKind::Paren && t.lexeme == "(");
                if is_call {
                    let func = Func::from_name(&tok.lexeme).ok_or(ParseError::UnknownFunction {
                        name: tok.lexeme.clone(),
                        position: tok.position,
                    })?;
                    self.expect_paren("(")?;
                    let arg = self.expr()?;
                    self.expect_paren(")")?;
                    Ok(Ast::Call(func, Box::new(arg)))
                } else {
                    Ok(Ast::Symbol(tok.lexeme))
                }
            }
            TokenKind::Paren if tok.lexeme == "(" => {
                self.idx += 1;
                let inner = self.expr()?;
                self.expect_paren(")")?;
                Ok(inner)
            }
            _ => Err(self.err(vec!["number", "identifier", "`(`"])),
        }
    }
}

pub fn parse(src: &str) -> Result<Ast, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser {
        tokens,
        idx: 0,
        end: src.len(),
    };
    let ast = p.expr()?;
    if p.peek().is_some() {
        return Err(p.err(vec!["operator", "end of input"]));
    }
    Ok(ast)
}

/// Evaluate an AST against a symbol binding. The scalar kind `S` selects
/// plain values, first derivatives or higher derivatives.
pub fn eval<S, F>(ast: &Ast, bind: &F) -> Result<S, EvalError>
where
    S: Scalar,
    F: Fn(&str) -> Option<S>,
{
    match eval_node(ast, bind) {
        Err(EvalError::Unbound(_)) => {
            // Re-scan the whole tree so the error lists every missing name.
            let missing: Vec<String> = free_symbols(ast)
                .into_iter()
                .filter(|s| bind(s).is_none())
                .collect();
            Err(EvalError::Unbound(missing))
        }
        other => other,
    }
}

fn eval_node<S, F>(ast: &Ast, bind: &F) -> Result<S, EvalError>
where
    S: Scalar,
    F: Fn(&str) -> Option<S>,
{
    match ast {
        Ast::Const(c) => Ok(S::from_real(
            num_traits::cast(*c).expect("constant fits the real type"),
        )),
        Ast::Symbol(name) => {
            bind(name).ok_or_else(|| EvalError::Unbound(vec![name.clone()]))
        }
        Ast::Neg(a) => Ok(-eval_node(a, bind)?),
        Ast::Binary(op, a, b) => {
            let x: S = eval_node(a, bind)?;
            match op {
                BinOp::Add => Ok(x + eval_node(b, bind)?),
                BinOp::Sub => Ok(x - eval_node(b, bind)?),
                BinOp::Mul => Ok(x * eval_node(b, bind)?),
                BinOp::Div => {
                    let y: S = eval_node(b, bind)?;
                    if y.re() == num_traits::Zero::zero() {
                        return Err(EvalError::DivideByZero);
                    }
                    Ok(x / y)
                }
                BinOp::Pow => {
                    // Constant integer exponents use repeated multiplication,
                    // which is defined for negative bases and exact for
                    // symbol-free exponent subtrees like 3^2.
                    if let Some(c) = fold_const(b) {
                        if c.fract() == 0.0 && c.abs() <= 1e9 {
                            return Ok(x.powi(c as i32));
                        }
                    }
                    let y: S = eval_node(b, bind)?;
                    let base = x.re().to_f64().unwrap_or(f64::NAN);
                    if base <= 0.0 {
                        return Err(EvalError::Domain {
                            func: "non-integer power",
                            value: base,
                        });
                    }
                    Ok(x.powf(y))
                }
            }
        }
        Ast::Call(func, a) => {
            let x: S = eval_node(a, bind)?;
            let v = x.re().to_f64().unwrap_or(f64::NAN);
            match func {
                Func::Exp => Ok(x.exp()),
                Func::Sinh => Ok(x.sinh()),
                Func::Cosh => Ok(x.cosh()),
                Func::Tanh => Ok(x.tanh()),
                Func::Sin => Ok(x.sin()),
                Func::Cos => Ok(x.cos()),
                Func::Sinhc => Ok(x.sinhc()),
                Func::Log => {
                    if v <= 0.0 {
                        Err(EvalError::Domain { func: "log", value: v })
                    } else {
                        Ok(x.ln())
                    }
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        Err(EvalError::Domain { func: "sqrt", value: v })
                    } else {
                        Ok(x.sqrt())
                    }
                }
            }
        }
    }
}

/// All symbol names appearing in the tree.
pub fn free_symbols(ast: &Ast) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_symbols(ast, &mut out);
    out
}

fn collect_symbols(ast: &Ast, out: &mut BTreeSet<String>) {
    match ast {
        Ast::Const(_) => {}
        Ast::Symbol(s) => {
            out.insert(s.clone());
        }
        Ast::Neg(a) | Ast::Call(_, a) => collect_symbols(a, out),
        Ast::Binary(_, a, b) => {
            collect_symbols(a, out);
            collect_symbols(b, out);
        }
    }
}

/// Replace symbols by subtrees.
pub fn subst(ast: &Ast, map: &BTreeMap<String, Ast>) -> Ast {
    match ast {
        Ast::Const(_) => ast.clone(),
        Ast::Symbol(s) => map.get(s).cloned().unwrap_or_else(|| ast.clone()),
        Ast::Neg(a) => Ast::Neg(Box::new(subst(a, map))),
        Ast::Binary(op, a, b) => {
            Ast::Binary(*op, Box::new(subst(a, map)), Box::new(subst(b, map)))
        }
        Ast::Call(f, a) => Ast::Call(*f, Box::new(subst(a, map))),
    }
}

/// Evaluate a symbol-free subtree of +,-,*,/,^,neg to a plain constant.
/// Returns `None` as soon as a symbol or function call appears.
fn fold_const(ast: &Ast) -> Option<f64> {
    match ast {
        Ast::Const(c) => Some(*c),
        Ast::Neg(a) => fold_const(a).map(|v| -v),
        Ast::Binary(op, a, b) => {
            let x = fold_const(a)?;
            let y = fold_const(b)?;
            Some(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => x.powf(y),
            })
        }
        _ => None,
    }
}

fn precedence(ast: &Ast) -> u8 {
    match ast {
        Ast::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
        Ast::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
        Ast::Neg(_) => 3,
        Ast::Binary(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn fmt_child(ast: &Ast, min: u8, out: &mut String) {
    if precedence(ast) < min {
        out.push('(');
        fmt_ast(ast, out);
        out.push(')');
    } else {
        fmt_ast(ast, out);
    }
}

fn fmt_ast(ast: &Ast, out: &mut String) {
    match ast {
        Ast::Const(c) => {
            if *c < 0.0 || c.is_nan() {
                out.push_str(&format!("({c:?})"));
            } else {
                out.push_str(&format!("{c:?}"));
            }
        }
        Ast::Symbol(s) => out.push_str(s),
        Ast::Neg(a) => {
            out.push('-');
            fmt_child(a, 3, out);
        }
        Ast::Binary(op, a, b) => {
            let p = precedence(ast);
            match op {
                BinOp::Pow => {
                    // right-associative: parenthesize an exponent-shaped base
                    fmt_child(a, p + 1, out);
                    out.push('^');
                    fmt_child(b, 3, out);
                }
                BinOp::Add | BinOp::Mul => {
                    fmt_child(a, p, out);
                    out.push_str(op.symbol());
                    fmt_child(b, p + 1, out);
                }
                BinOp::Sub | BinOp::Div => {
                    fmt_child(a, p, out);
                    out.push_str(op.symbol());
                    fmt_child(b, p + 1, out);
                }
            }
        }
        Ast::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            fmt_ast(a, out);
            out.push(')');
        }
    }
}

/// Render an AST back to source. Re-parsing the result gives a
/// structurally identical tree for parser-produced ASTs.
pub fn pretty(ast: &Ast) -> String {
    let mut s = String::new();
    fmt_ast(ast, &mut s);
    s
}

impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

// Builder conveniences for programmatic AST construction.

pub fn sym(name: &str) -> Ast {
    Ast::Symbol(name.to_string())
}

pub fn con(v: f64) -> Ast {
    Ast::Const(v)
}

pub fn call(f: Func, a: Ast) -> Ast {
    Ast::Call(f, Box::new(a))
}

/// `a^n` with a constant integer exponent.
pub fn powi(a: Ast, n: i32) -> Ast {
    Ast::Binary(BinOp::Pow, Box::new(a), Box::new(Ast::Const(n as f64)))
}

impl Add for Ast {
    type Output = Ast;
    fn add(self, o: Ast) -> Ast {
        Ast::Binary(BinOp::Add, Box::new(self), Box::new(o))
    }
}

impl Sub for Ast {
    type Output = Ast;
    fn sub(self, o: Ast) -> Ast {
        Ast::Binary(BinOp::Sub, Box::new(self), Box::new(o))
    }
}

impl Mul for Ast {
    type Output = Ast;
    fn mul(self, o: Ast) -> Ast {
        Ast::Binary(BinOp::Mul, Box::new(self), Box::new(o))
    }
}

impl Div for Ast {
    type Output = Ast;
    fn div(self, o: Ast) -> Ast {
        Ast::Binary(BinOp::Div, Box::new(self), Box::new(o))
    }
}

impl Neg for Ast {
    type Output = Ast;
    fn neg(self) -> Ast {
        Ast::Neg(Box::new(self))
    }
}
