//! Recursive-descent parser for the map-expression grammar:
//!
//! ```text
//! expr  := leaf | "xor(" expr "," expr ")" | "and(" expr "," expr ")"
//!        | "or(" expr "," expr ")" | "mirror(" expr ")"
//! leaf  := name | name "(" param ("," param)* ")"
//! param := ident "=" decimal
//! ```
//!
//! Whitespace between tokens is ignored.

use thiserror::Error;

use super::{and, mirror, or, xor, CatalogId, CatalogMap, MapExpr};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    pub message: String,
}

pub fn parse_map_expr(text: &str) -> Result<MapExpr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let expr = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(expr)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => Err(self.error(format!("expected '{c}', found '{found}'"))),
                None => Err(self.error(format!("expected '{c}', found end of input"))),
            }
        }
    }

    fn ident(&mut self) -> Result<(usize, &'a str), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(self.src.len() - start);
        if len == 0 {
            return Err(self.error("expected identifier"));
        }
        self.pos += len;
        Ok((start, &self.src[start..start + len]))
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let len = self.src[start..]
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.src.len() - start);
        let token = &self.src[start..start + len];
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() && len > 0 => {
                self.pos += len;
                Ok(v)
            }
            _ => Err(self.error("expected decimal number")),
        }
    }

    fn expr(&mut self) -> Result<MapExpr, ParseError> {
        let (start, name) = self.ident()?;
        match name {
            "xor" | "and" | "or" => {
                self.expect('(')?;
                let l = self.expr()?;
                self.expect(',')?;
                let r = self.expr()?;
                self.expect(')')?;
                Ok(match name {
                    "xor" => xor(l, r),
                    "and" => and(l, r),
                    _ => or(l, r),
                })
            }
            "mirror" => {
                self.expect('(')?;
                let c = self.expr()?;
                self.expect(')')?;
                Ok(mirror(c))
            }
            _ => {
                let id: CatalogId = name.parse().map_err(|_| ParseError {
                    offset: start,
                    message: format!("unknown map `{name}`"),
                })?;
                let mut params: Vec<(&str, f64)> = Vec::new();
                if self.eat('(') {
                    loop {
                        let (_, key) = self.ident()?;
                        self.expect('=')?;
                        let value = self.number()?;
                        params.push((key, value));
                        if !self.eat(',') {
                            break;
                        }
                    }
                    self.expect(')')?;
                }
                CatalogMap::with_params(id, &params)
                    .map(MapExpr::Leaf)
                    .map_err(|e| ParseError {
                        offset: start,
                        message: e.to_string(),
                    })
            }
        }
    }
}
