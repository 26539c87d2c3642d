//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr    := term (('+'|'-') term)* ;
//! term    := unary (('*'|'/') unary)* ;
//! unary   := '-' unary | power ;
//! power   := atom ('^' unary)? ;
//! atom    := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')' ;
//! ```
//!
//! Whitespace between tokens is ignored. Numbers are decimal integers or
//! decimal fractions and become exact rationals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use super::{Expr, Func};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Unexpected token or end of input; lists what would have been accepted.
    Syntax {
        expected: Vec<&'static str>,
    },
    UnknownFunction(String),
    TooDeep,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax { expected } => {
                write!(
                    f,
                    "syntax error at offset {}: expected {}",
                    self.offset,
                    expected.join(" or ")
                )
            }
            ParseErrorKind::UnknownFunction(name) => {
                write!(f, "unknown function `{name}` at offset {}", self.offset)
            }
            ParseErrorKind::TooDeep => {
                write!(f, "expression nested too deeply at offset {}", self.offset)
            }
        }
    }
}

/// Parses `text` into a canonical expression.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    depth: usize,
}

const ATOM_START: &[&str] = &["number", "identifier", "'('", "'-'"];

impl Parser<'_> {
    fn error(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.pos,
            kind: ParseErrorKind::Syntax {
                expected: expected.to_vec(),
            },
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

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                offset: self.pos,
                kind: ParseErrorKind::TooDeep,
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    terms.push(self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(Expr::add_all(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.unary()?];
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    factors.push(self.unary()?);
                }
                Some(b'/') => {
                    self.pos += 1;
                    factors.push(self.unary()?.recip());
                }
                _ => break,
            }
        }
        Ok(Expr::mul_all(factors))
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            self.enter()?;
            let inner = self.unary()?;
            self.depth -= 1;
            return Ok(inner.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.enter()?;
            let exponent = self.unary()?;
            self.depth -= 1;
            return Ok(base.pow(&exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_close()?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.error(ATOM_START)),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(b')') {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&["')'", "operator"]))
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            &p.src[s..p.pos]
        };
        let int_part = digits(self).to_vec();
        let mut frac_part = Vec::new();
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            frac_part = digits(self).to_vec();
        }
        if int_part.is_empty() && frac_part.is_empty() {
            self.pos = start;
            return Err(self.error(&["number"]));
        }
        let to_int = |ds: &[u8]| -> BigInt {
            if ds.is_empty() {
                BigInt::zero()
            } else {
                BigInt::parse_bytes(ds, 10).expect("ascii digits")
            }
        };
        let mut value = BigRational::from_integer(to_int(&int_part));
        if !frac_part.is_empty() {
            let scale = num_traits::pow(BigInt::from(10), frac_part.len());
            value += BigRational::new(to_int(&frac_part), scale);
        }
        Ok(Expr::num(value))
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let arg = self.expr()?;
            self.expect_close()?;
            return match name {
                "sqrt" => Ok(arg.sqrt()),
                _ => match Func::from_name(name) {
                    Some(f) => Ok(Expr::apply(f, &arg)),
                    None => Err(ParseError {
                        offset: start,
                        kind: ParseErrorKind::UnknownFunction(name.to_string()),
                    }),
                },
            };
        }
        match name {
            "pi" => Ok(Expr::pi()),
            "sqrt" | "sin" | "cos" | "tan" | "exp" | "log" | "abs" | "sign" => {
                Err(self.error(&["'('"]))
            }
            _ => Ok(Expr::sym(name)),
        }
    }
}

impl Expr {
    /// Parses with [`parse`], panicking on malformed input. For literals in code and tests.
    pub fn parse_lit(text: &str) -> Expr {
        parse(text).unwrap_or_else(|e| panic!("bad expression literal {text:?}: {e}"))
    }
}
