//! Scalar expressions in the real coordinates `x1..x2n` and time `t`.
//!
//! Grammar: `+ - * / ^`, parentheses, numbers, `pi`, and the functions
//! `sin cos tan exp log sqrt abs`. `^` binds tighter than unary minus and is
//! right-associative.

use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("unexpected character {ch:?} at offset {pos}")]
    Char { ch: char, pos: usize },
    #[error("unexpected {found} at offset {pos}")]
    Syntax { found: String, pos: usize },
    #[error("unknown identifier {0:?}")]
    Ident(String),
    #[error("coordinate x{index} out of range (dimension allows x1..x{max})")]
    Coord { index: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Coord(usize),
    Time,
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    src: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

fn lex(s: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                i += 1;
            }
            // exponent part
            if i < chars.len() && (chars[i].1 == 'e' || chars[i].1 == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j].1 == '+' || chars[j].1 == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].1.is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].1.is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().map(|c| c.1).collect();
            let v = text.parse().map_err(|_| ExprError::Syntax { found: text.clone(), pos })?;
            out.push((Tok::Num(v), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_ascii_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().map(|c| c.1).collect()), pos));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Op(c), pos));
            i += 1;
        } else {
            return Err(ExprError::Char { ch: c, pos });
        }
    }
    out.push((Tok::End, s.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn fail<T>(&self) -> Result<T, ExprError> {
        let (t, pos) = &self.toks[self.at];
        let found = match t {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Op(c) => format!("{c:?}"),
            Tok::End => "end of input".into(),
        };
        Err(ExprError::Syntax { found, pos: *pos })
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if *self.peek() == Tok::Op(c) {
            self.at += 1;
            Ok(())
        } else {
            self.fail()
        }
    }

    fn sum(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.product()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.at += 1;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.at += 1;
            lhs = Node::Bin(c, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.at += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.at += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.at += 1;
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.at += 1;
                Ok(Node::Num(v))
            }
            Tok::Op('(') => {
                self.at += 1;
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.at += 1;
                let func = match name.as_str() {
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "tan" => Some(Func::Tan),
                    "exp" => Some(Func::Exp),
                    "log" | "ln" => Some(Func::Log),
                    "sqrt" => Some(Func::Sqrt),
                    "abs" => Some(Func::Abs),
                    _ => None,
                };
                if let Some(f) = func {
                    self.expect('(')?;
                    let arg = self.sum()?;
                    self.expect(')')?;
                    return Ok(Node::Call(f, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "t" => Ok(Node::Time),
                    _ => match name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        Some(k) if k >= 1 => Ok(Node::Coord(k - 1)),
                        _ => Err(ExprError::Ident(name)),
                    },
                }
            }
            _ => self.fail(),
        }
    }
}

fn eval(node: &Node, x: &[f64], t: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Coord(k) => x[*k],
        Node::Time => t,
        Node::Neg(a) => -eval(a, x, t),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, x, t), eval(b, x, t));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, x, t);
            match f {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Tan => v.tan(),
                Func::Exp => v.exp(),
                Func::Log => v.ln(),
                Func::Sqrt => v.sqrt(),
                Func::Abs => v.abs(),
            }
        }
    }
}

fn max_coord(node: &Node) -> Option<usize> {
    match node {
        Node::Coord(k) => Some(*k),
        Node::Neg(a) | Node::Call(_, a) => max_coord(a),
        Node::Bin(_, a, b) => max_coord(a).max(max_coord(b)),
        _ => None,
    }
}

fn uses_time(node: &Node) -> bool {
    match node {
        Node::Time => true,
        Node::Neg(a) | Node::Call(_, a) => uses_time(a),
        Node::Bin(_, a, b) => uses_time(a) || uses_time(b),
        _ => false,
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let mut p = Parser { toks: lex(src)?, at: 0 };
        let root = p.sum()?;
        if *p.peek() != Tok::End {
            return p.fail();
        }
        Ok(Self { src: src.trim().to_string(), root })
    }

    /// Rejects coordinates beyond `x_{2n}`.
    pub fn check_dimension(&self, n: usize) -> Result<(), ExprError> {
        match max_coord(&self.root) {
            Some(k) if k >= 2 * n => Err(ExprError::Coord { index: k + 1, max: 2 * n }),
            _ => Ok(()),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        uses_time(&self.root)
    }

    /// Evaluates at real coordinates `x` (0-based slice, `x[0]` is `x1`) and time `t`.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        eval(&self.root, x, t)
    }

    pub fn source(&self) -> &str {
        &self.src
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}
