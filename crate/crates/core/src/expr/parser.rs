use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Arity, BinOp, Node, Params, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    text: String,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // exponent part, only if followed by digits
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                position: start,
                token: text.to_string(),
                message: "malformed number".to_string(),
            })?;
            out.push(Token {
                tok: Tok::Num(value),
                pos: start,
                text: text.to_string(),
            });
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let text = &src[start..i];
            out.push(Token {
                tok: Tok::Ident(text.to_string()),
                pos: start,
                text: text.to_string(),
            });
        } else if matches!(c, b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' | b',') {
            i += 1;
            out.push(Token {
                tok: Tok::Sym(c as char),
                pos: start,
                text: (c as char).to_string(),
            });
        } else {
            let ch = src[start..].chars().next().unwrap_or('?');
            return Err(Error::Syntax {
                position: start,
                token: ch.to_string(),
                message: "unexpected character".to_string(),
            });
        }
    }
    out.push(Token {
        tok: Tok::End,
        pos: src.len(),
        text: "<end>".to_string(),
    });
    Ok(out)
}

/// Matches `x<k>` / `u<k>` with a decimal suffix without leading zeros.
fn indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || rest.starts_with('0') || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok()
}

const FUNCTIONS: [&str; 3] = ["exp", "log", "pow"];

pub(super) fn is_reserved(name: &str, arity: Arity) -> bool {
    name == "t"
        || (arity.with_s && name == "s")
        || FUNCTIONS.contains(&name)
        || indexed(name, 'x').is_some()
        || indexed(name, 'u').is_some()
}

pub(super) struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    arity: Arity,
    params: &'a Params,
}

impl<'a> Parser<'a> {
    pub(super) fn new(src: &str, arity: Arity, params: &'a Params) -> Result<Self> {
        Ok(Parser {
            tokens: lex(src)?,
            pos: 0,
            arity,
            params,
        })
    }

    pub(super) fn parse(mut self) -> Result<Node> {
        let node = self.expr()?;
        let t = self.peek();
        if t.tok != Tok::End {
            return Err(self.unexpected("expected operator or end of input"));
        }
        Ok(node)
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(match c {
                ')' => "expected `)`",
                '(' => "expected `(`",
                ',' => "expected `,`",
                _ => "unexpected token",
            }))
        }
    }

    fn unexpected(&self, message: &str) -> Error {
        let t = self.peek();
        Error::Syntax {
            position: t.pos,
            token: t.text.clone(),
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // `^` binds tighter than unary minus on its left and is right-associative:
    // -a^b = -(a^b), a^b^c = a^(b^c), a^-b = a^(-b).
    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let tok = self.peek().clone();
        match tok.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(ref name) => {
                self.bump();
                if self.peek().tok == Tok::Sym('(') {
                    return self.call(name, tok.pos);
                }
                self.identifier(name, tok.pos)
            }
            Tok::End => Err(self.unexpected("unexpected end of input")),
            Tok::Sym(_) => Err(self.unexpected("expected a number, variable or `(`")),
        }
    }

    fn call(&mut self, name: &str, position: usize) -> Result<Node> {
        self.expect('(')?;
        let mut args = Vec::new();
        if self.peek().tok != Tok::Sym(')') {
            args.push(self.expr()?);
            while self.eat(',') {
                args.push(self.expr()?);
            }
        }
        self.expect(')')?;
        let want = match name {
            "exp" | "log" => 1,
            "pow" => 2,
            _ => {
                return Err(Error::UnknownIdentifier {
                    name: name.to_string(),
                    position,
                })
            }
        };
        if args.len() != want {
            return Err(Error::ArityMismatch {
                what: alloc::format!("call to `{name}`"),
                expected: want,
                found: args.len(),
            });
        }
        let mut args = args.into_iter();
        let a = Box::new(args.next().unwrap());
        Ok(match name {
            "exp" => Node::Exp(a),
            "log" => Node::Log(a),
            _ => Node::Binary(BinOp::Pow, a, Box::new(args.next().unwrap())),
        })
    }

    fn identifier(&self, name: &str, position: usize) -> Result<Node> {
        if name == "t" {
            return Ok(Node::Var(Var::T));
        }
        if name == "s" && self.arity.with_s {
            return Ok(Node::Var(Var::S));
        }
        if let Some(k) = indexed(name, 'x') {
            if (1..=self.arity.n).contains(&k) {
                return Ok(Node::Var(Var::X(k - 1)));
            }
        } else if let Some(k) = indexed(name, 'u') {
            if (1..=self.arity.r).contains(&k) {
                return Ok(Node::Var(Var::U(k - 1)));
            }
        } else if let Some(&value) = self.params.get(name) {
            return Ok(Node::Param {
                name: name.to_string(),
                value,
            });
        }
        Err(Error::UnknownIdentifier {
            name: name.to_string(),
            position,
        })
    }
}
