//! Text grammar for expressions.
//!
//! Numbers are integers or decimals (parsed exactly as rationals),
//! identifiers are coordinate tokens `q<i>_<A>` / `p<i>_<A>` or declared
//! parameter names, and the operators are `+ - * /`, integer powers `^`
//! (right-associative, binding tighter than unary minus), the functions
//! `sin cos exp log sqrt`, and parentheses.

use std::collections::BTreeSet;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::pow::Pow;
use thiserror::Error;

use super::ast::{Expr, UnaryFun, VarId};

/// Which symbols an expression is allowed to mention: coordinate index
/// bounds plus the set of declared parameter names.
#[derive(Clone, Debug)]
pub struct SymbolScope {
    /// Number of configuration coordinates (`A` ranges over `1..=coords`).
    pub coords: u32,
    /// Highest admissible jet order (inclusive).
    pub max_jet_order: u32,
    /// Highest admissible momentum order (inclusive).
    pub max_momentum_order: u32,
    pub params: BTreeSet<String>,
}

impl SymbolScope {
    pub fn new(coords: u32, max_jet_order: u32, max_momentum_order: u32) -> Self {
        SymbolScope {
            coords,
            max_jet_order,
            max_momentum_order,
            params: BTreeSet::new(),
        }
    }

    pub fn with_params<S: Into<String>>(mut self, params: impl IntoIterator<Item = S>) -> Self {
        self.params.extend(params.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("coordinate token `{token}` out of range at offset {pos}: {detail}")]
    CoordOutOfRange {
        token: String,
        pos: usize,
        detail: String,
    },
    #[error("exponent overflow at offset {pos}")]
    ExponentOverflow { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut out = Vec::new();
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let c = self.bytes[self.pos];
            match c {
                b' ' | b'\t' | b'\r' | b'\n' => {
                    self.pos += 1;
                    continue;
                }
                b'+' => out.push((Tok::Plus, start)),
                b'-' => out.push((Tok::Minus, start)),
                b'*' => out.push((Tok::Star, start)),
                b'/' => out.push((Tok::Slash, start)),
                b'^' => out.push((Tok::Caret, start)),
                b'(' => out.push((Tok::LParen, start)),
                b')' => out.push((Tok::RParen, start)),
                b'0'..=b'9' => {
                    out.push((Tok::Num(self.lex_number()?), start));
                    continue;
                }
                b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                    out.push((Tok::Ident(self.lex_ident()), start));
                    continue;
                }
                _ => {
                    return Err(ParseError::Syntax {
                        pos: start,
                        msg: format!(
                            "unexpected character `{}`",
                            &self.src[start..self.src.len().min(start + 1)]
                        ),
                    })
                }
            }
            self.pos += 1;
        }
        Ok(out)
    }

    fn lex_number(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.bytes.len() && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            let frac_start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(ParseError::Syntax {
                    pos: self.pos,
                    msg: "expected digits after decimal point".into(),
                });
            }
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn lex_ident(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        self.src[start..self.pos].to_string()
    }
}

/// Parses `text` against the given scope, returning the normalized tree.
pub fn parse_expr(text: &str, scope: &SymbolScope) -> Result<Expr, ParseError> {
    let tokens = Lexer::new(text).tokens()?;
    let mut parser = Parser {
        tokens,
        idx: 0,
        end: text.len(),
        scope,
    };
    let expr = parser.parse_sum()?;
    if let Some((_, pos)) = parser.peek_with_pos() {
        return Err(ParseError::Syntax {
            pos,
            msg: "unexpected trailing input".into(),
        });
    }
    Ok(expr)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    idx: usize,
    end: usize,
    scope: &'a SymbolScope,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.idx).map(|(t, _)| t)
    }

    fn peek_with_pos(&self) -> Option<(&Tok, usize)> {
        self.tokens.get(self.idx).map(|(t, p)| (t, *p))
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.idx).map_or(self.end, |(_, p)| *p)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let item = self.tokens.get(self.idx).cloned();
        if item.is_some() {
            self.idx += 1;
        }
        item
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if t == tok => Ok(()),
            Some((_, pos)) => Err(ParseError::Syntax {
                pos,
                msg: format!("expected {what}"),
            }),
            None => Err(ParseError::Syntax {
                pos: self.end,
                msg: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.parse_term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    terms.push(self.parse_term()?);
                }
                Some(Tok::Minus) => {
                    self.bump();
                    terms.push(self.parse_term()?.neg());
                }
                _ => break,
            }
        }
        Ok(Expr::add(terms))
    }

    // factors are collected and normalized in one n-ary `mul`, so a
    // parenthesized sum keeps its written coefficient instead of being
    // folded pairwise
    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let mut factors = vec![self.parse_unary()?];
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    factors.push(self.parse_unary()?);
                }
                Some(Tok::Slash) => {
                    self.bump();
                    factors.push(self.parse_unary()?.powi(-1));
                }
                _ => break,
            }
        }
        Ok(Expr::mul(factors))
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(self.parse_unary()?.neg());
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let exp = self.parse_exponent()?;
            return Ok(base.powi(exp));
        }
        Ok(base)
    }

    /// Integer-literal exponent with an optional sign; `x^2^3` associates
    /// to the right, so the tower is folded into a single integer here.
    fn parse_exponent(&mut self) -> Result<i32, ParseError> {
        let neg = if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            true
        } else {
            false
        };
        let pos = self.pos();
        let digits = match self.bump() {
            Some((Tok::Num(text), _)) if !text.contains('.') => text,
            _ => {
                return Err(ParseError::Syntax {
                    pos,
                    msg: "expected integer exponent".into(),
                })
            }
        };
        let mut value: i64 = digits
            .parse()
            .map_err(|_| ParseError::ExponentOverflow { pos })?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let upper = self.parse_exponent()?;
            if upper < 0 {
                return Err(ParseError::Syntax {
                    pos: self.pos(),
                    msg: "negative exponent in a power tower".into(),
                });
            }
            value = value
                .checked_pow(upper as u32)
                .ok_or(ParseError::ExponentOverflow { pos })?;
        }
        if neg {
            value = -value;
        }
        i32::try_from(value).map_err(|_| ParseError::ExponentOverflow { pos })
    }

    fn parse_atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Some((Tok::LParen, _)) => {
                let inner = self.parse_sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some((Tok::Num(text), _)) => Ok(Expr::num(rational_from_decimal(&text))),
            Some((Tok::Ident(name), pos)) => self.resolve_ident(name, pos),
            Some((_, pos)) => Err(ParseError::Syntax {
                pos,
                msg: "expected a number, identifier or `(`".into(),
            }),
            None => Err(ParseError::Syntax {
                pos,
                msg: "unexpected end of input".into(),
            }),
        }
    }

    fn resolve_ident(&mut self, name: String, pos: usize) -> Result<Expr, ParseError> {
        if let Some(fun) = UnaryFun::from_name(&name) {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.parse_sum()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::fun(fun, arg));
        }
        if let Some((kind, order, coord)) = split_coordinate_token(&name) {
            let var = self.check_coordinate(kind, order, coord, &name, pos)?;
            return Ok(Expr::var(var));
        }
        if self.scope.params.contains(&name) {
            return Ok(Expr::param(name));
        }
        Err(ParseError::UnknownIdentifier { name, pos })
    }

    fn check_coordinate(
        &self,
        kind: u8,
        order: u64,
        coord: u64,
        token: &str,
        pos: usize,
    ) -> Result<VarId, ParseError> {
        let oob = |detail: String| ParseError::CoordOutOfRange {
            token: token.to_string(),
            pos,
            detail,
        };
        if coord < 1 || coord > u64::from(self.scope.coords) {
            return Err(oob(format!(
                "coordinate index must lie in 1..={}",
                self.scope.coords
            )));
        }
        let max_order = if kind == b'q' {
            self.scope.max_jet_order
        } else {
            self.scope.max_momentum_order
        };
        if order > u64::from(max_order) {
            return Err(oob(format!("order must lie in 0..={max_order}")));
        }
        let (order, coord) = (order as u32, coord as u32);
        Ok(if kind == b'q' {
            VarId::jet(order, coord)
        } else {
            VarId::momentum(order, coord)
        })
    }
}

/// Splits `q12_3`-shaped tokens into (kind, order, coord); anything else
/// (including overlong index digits) is treated as a parameter name.
fn split_coordinate_token(name: &str) -> Option<(u8, u64, u64)> {
    let mut bytes = name.bytes();
    let kind = bytes.next()?;
    if kind != b'q' && kind != b'p' {
        return None;
    }
    let rest = &name[1..];
    let (order, coord) = rest.split_once('_')?;
    if order.is_empty() || coord.is_empty() {
        return None;
    }
    if !order.bytes().all(|b| b.is_ascii_digit()) || !coord.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    Some((kind, order.parse().ok()?, coord.parse().ok()?))
}

/// Exact rational value of an integer or decimal literal.
fn rational_from_decimal(text: &str) -> BigRational {
    match text.split_once('.') {
        None => BigRational::from_integer(text.parse::<BigInt>().expect("lexed integer")),
        Some((int_part, frac_part)) => {
            let scale = BigInt::from(10u32).pow(frac_part.len());
            let int_part: BigInt = if int_part.is_empty() {
                BigInt::from(0)
            } else {
                int_part.parse().expect("lexed integer part")
            };
            let frac_part: BigInt = frac_part.parse().expect("lexed fraction part");
            BigRational::new(int_part * &scale + frac_part, scale)
        }
    }
}
