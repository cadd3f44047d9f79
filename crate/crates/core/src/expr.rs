//! A tiny arithmetic-expression evaluator in one variable `x`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals,
//! the variable `x`, and the functions `exp(..)` and `log(..)` (natural log).
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! parses as `-(x^2)`.
//!
//! Expressions can be differentiated symbolically, which is how custom flows
//! and boost branches obtain their derivative when none is supplied.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Exp(Box<Node>),
    Log(Box<Node>),
}

/// A parsed scalar expression `x -> f(x)`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Expr {
    source: String,
    node: Node,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut parser = Parser { tokens, pos: 0 };
        let node = parser.expr()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Expr(format!(
                "unexpected trailing input in {source:?} at token {}",
                parser.pos
            )));
        }
        Ok(Self {
            source: source.trim().to_string(),
            node,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, x: f64) -> f64 {
        eval(&self.node, x)
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Expr {
        let node = simplify(diff(&self.node));
        Expr {
            source: render(&node),
            node,
        }
    }
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

impl TryFrom<String> for Expr {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        Expr::parse(&s)
    }
}

impl From<Expr> for String {
    fn from(e: Expr) -> String {
        e.source
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' | '*' | '/' | '^' => {
                out.push(Tok::Op(c));
                i += 1;
            }
            // accept the unicode minus as well
            '-' | '\u{2212}' => {
                out.push(Tok::Op('-'));
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
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
                let lit: String = chars[start..i].iter().collect();
                let v = lit
                    .parse::<f64>()
                    .map_err(|_| Error::Expr(format!("bad numeric literal {lit:?}")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
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
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Node::X),
                "exp" | "log" => {
                    if self.next() != Some(Tok::LParen) {
                        return Err(Error::Expr(format!("expected '(' after {name}")));
                    }
                    let arg = self.expr()?;
                    if self.next() != Some(Tok::RParen) {
                        return Err(Error::Expr(format!("unclosed call to {name}")));
                    }
                    Ok(if name == "exp" {
                        Node::Exp(Box::new(arg))
                    } else {
                        Node::Log(Box::new(arg))
                    })
                }
                other => Err(Error::Expr(format!("unknown identifier {other:?}"))),
            },
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                if self.next() != Some(Tok::RParen) {
                    return Err(Error::Expr("unbalanced parentheses".into()));
                }
                Ok(inner)
            }
            Some(t) => Err(Error::Expr(format!("unexpected token {t:?}"))),
            None => Err(Error::Expr("unexpected end of expression".into())),
        }
    }
}

fn eval(n: &Node, x: f64) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::X => x,
        Node::Neg(a) => -eval(a, x),
        Node::Add(a, b) => eval(a, x) + eval(b, x),
        Node::Sub(a, b) => eval(a, x) - eval(b, x),
        Node::Mul(a, b) => eval(a, x) * eval(b, x),
        Node::Div(a, b) => eval(a, x) / eval(b, x),
        Node::Pow(a, b) => {
            let base = eval(a, x);
            match **b {
                Node::Num(k) if k.fract() == 0.0 && k.abs() < 64.0 => base.powi(k as i32),
                _ => base.powf(eval(b, x)),
            }
        }
        Node::Exp(a) => eval(a, x).exp(),
        Node::Log(a) => eval(a, x).ln(),
    }
}

fn is_const(n: &Node) -> bool {
    match n {
        Node::Num(_) => true,
        Node::X => false,
        Node::Neg(a) | Node::Exp(a) | Node::Log(a) => is_const(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            is_const(a) && is_const(b)
        }
    }
}

fn b(n: Node) -> Box<Node> {
    Box::new(n)
}

fn diff(n: &Node) -> Node {
    use Node::*;
    match n {
        Num(_) => Num(0.0),
        X => Num(1.0),
        Neg(a) => Neg(b(diff(a))),
        Add(u, v) => Add(b(diff(u)), b(diff(v))),
        Sub(u, v) => Sub(b(diff(u)), b(diff(v))),
        Mul(u, v) => Add(
            b(Mul(b(diff(u)), v.clone())),
            b(Mul(u.clone(), b(diff(v)))),
        ),
        Div(u, v) => Div(
            b(Sub(
                b(Mul(b(diff(u)), v.clone())),
                b(Mul(u.clone(), b(diff(v)))),
            )),
            b(Pow(v.clone(), b(Num(2.0)))),
        ),
        Pow(u, v) if is_const(v) => Mul(
            b(Mul(v.clone(), b(Pow(u.clone(), b(Sub(v.clone(), b(Num(1.0)))))))),
            b(diff(u)),
        ),
        Pow(u, v) => Mul(
            b(n.clone()),
            b(Add(
                b(Mul(b(diff(v)), b(Log(u.clone())))),
                b(Div(b(Mul(v.clone(), b(diff(u)))), u.clone())),
            )),
        ),
        Exp(u) => Mul(b(n.clone()), b(diff(u))),
        Log(u) => Div(b(diff(u)), u.clone()),
    }
}

fn simplify(n: Node) -> Node {
    use Node::*;
    match n {
        Neg(a) => match simplify(*a) {
            Num(v) => Num(-v),
            Neg(inner) => *inner,
            other => Neg(b(other)),
        },
        Add(l, r) => match (simplify(*l), simplify(*r)) {
            (Num(p), Num(q)) => Num(p + q),
            (Num(z), o) | (o, Num(z)) if z == 0.0 => o,
            (l, r) => Add(b(l), b(r)),
        },
        Sub(l, r) => match (simplify(*l), simplify(*r)) {
            (Num(p), Num(q)) => Num(p - q),
            (o, Num(z)) if z == 0.0 => o,
            (Num(z), o) if z == 0.0 => Neg(b(o)),
            (l, r) => Sub(b(l), b(r)),
        },
        Mul(l, r) => match (simplify(*l), simplify(*r)) {
            (Num(p), Num(q)) => Num(p * q),
            (Num(z), _) | (_, Num(z)) if z == 0.0 => Num(0.0),
            (Num(o), e) | (e, Num(o)) if o == 1.0 => e,
            (l, r) => Mul(b(l), b(r)),
        },
        Div(l, r) => match (simplify(*l), simplify(*r)) {
            (Num(p), Num(q)) if q != 0.0 => Num(p / q),
            (Num(z), _) if z == 0.0 => Num(0.0),
            (e, Num(o)) if o == 1.0 => e,
            (l, r) => Div(b(l), b(r)),
        },
        Pow(l, r) => match (simplify(*l), simplify(*r)) {
            (Num(p), Num(q)) => Num(p.powf(q)),
            (_, Num(z)) if z == 0.0 => Num(1.0),
            (e, Num(o)) if o == 1.0 => e,
            (l, r) => Pow(b(l), b(r)),
        },
        Exp(a) => Exp(b(simplify(*a))),
        Log(a) => Log(b(simplify(*a))),
        other => other,
    }
}

fn render(n: &Node) -> String {
    use Node::*;
    match n {
        Num(v) => {
            if *v < 0.0 {
                format!("({v})")
            } else {
                format!("{v}")
            }
        }
        X => "x".into(),
        Neg(a) => format!("(-{})", render(a)),
        Add(a, c) => format!("({} + {})", render(a), render(c)),
        Sub(a, c) => format!("({} - {})", render(a), render(c)),
        Mul(a, c) => format!("({} * {})", render(a), render(c)),
        Div(a, c) => format!("({} / {})", render(a), render(c)),
        Pow(a, c) => format!("({} ^ {})", render(a), render(c)),
        Exp(a) => format!("exp({})", render(a)),
        Log(a) => format!("log({})", render(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn precedence_and_associativity() {
        let e = Expr::parse("1 + 2*x^2").unwrap();
        assert_relative_eq!(e.eval(3.0), 19.0);
        let e = Expr::parse("-x^2").unwrap();
        assert_relative_eq!(e.eval(3.0), -9.0);
        let e = Expr::parse("2^3^2").unwrap();
        assert_relative_eq!(e.eval(0.0), 512.0);
        let e = Expr::parse("x/2/2").unwrap();
        assert_relative_eq!(e.eval(8.0), 2.0);
        let e = Expr::parse("x^-1").unwrap();
        assert_relative_eq!(e.eval(4.0), 0.25);
    }

    #[test]
    fn functions_and_literals() {
        let e = Expr::parse("exp(log(x)) + 1.5e-1").unwrap();
        assert_relative_eq!(e.eval(2.0), 2.15, epsilon = 1e-14);
        let e = Expr::parse("\u{2212}x").unwrap();
        assert_relative_eq!(e.eval(2.0), -2.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x +").is_err());
        assert!(Expr::parse("sin(x)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x x").is_err());
        assert!(Expr::parse("y").is_err());
        assert!(Expr::parse("x $ 2").is_err());
    }

    #[test]
    fn derivative_matches_finite_differences() {
        for src in [
            "-x",
            "-x^2",
            "-0.3*x^1.5 - x/(1+x)",
            "x + 0.5*(10 - x)",
            "exp(-x)*x",
            "log(1+x^2)",
            "x^x",
        ] {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            for &x in &[0.3, 1.0, 2.7] {
                let h = 1e-6;
                let fd = (e.eval(x + h) - e.eval(x - h)) / (2.0 * h);
                assert_relative_eq!(d.eval(x), fd, max_relative = 1e-6, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn serde_uses_source_string() {
        let e: Expr = serde_json::from_str("\"-x^2\"").unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "\"-x^2\"");
        assert!(serde_json::from_str::<Expr>("\"-x^\"").is_err());
    }
}
