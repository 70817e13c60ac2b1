//! Text form of supercycles.
//!
//! ```text
//! sequence := term+
//! term     := '~' term | atom count?
//! atom     := NAME | '(' sequence ')'
//! count    := [0-9]+   (may be separated from its atom by whitespace)
//! ```
//!
//! Names are `R2` and `R3`. Juxtaposition concatenates, `~` inverts the phase
//! of every pulse in its operand and a trailing count repeats it. Whitespace
//! is insignificant except as a separator.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BlockKind, BlockRef};
use crate::error::{Error, Result};

/// Ceiling on the flattened length, against runaway nested repetition.
pub const MAX_EXPANDED_BLOCKS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
enum Expr {
    Block(BlockKind),
    Invert(Box<Expr>),
    Repeat(Box<Expr>, usize),
    Seq(Vec<Expr>),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn sequence(&mut self, nested: bool) -> Result<Expr> {
        let mut terms = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                None if nested => return Err(self.syntax("unclosed `(`")),
                None => break,
                Some(')') if nested => break,
                Some(')') => return Err(self.syntax("unmatched `)`")),
                Some(_) => terms.push(self.term()?),
            }
        }
        if terms.is_empty() {
            return Err(self.syntax(if nested {
                "empty group"
            } else {
                "empty sequence"
            }));
        }
        Ok(Expr::Seq(terms))
    }

    fn term(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.peek() == Some('~') {
            self.pos += 1;
            self.skip_ws();
            if self.peek().is_none() {
                return Err(self.syntax("`~` must be followed by a block or group"));
            }
            return Ok(Expr::Invert(Box::new(self.term()?)));
        }
        let atom = self.atom()?;
        self.skip_ws();
        let start = self.pos;
        let digits: String = self.src[self.pos..]
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if digits.is_empty() {
            return Ok(atom);
        }
        self.pos += digits.len();
        let count: usize = digits.parse().map_err(|_| Error::Syntax {
            position: start,
            message: format!("repeat count `{digits}` is too large"),
        })?;
        if count == 0 {
            return Err(Error::Syntax {
                position: start,
                message: "repeat count must be at least 1".to_string(),
            });
        }
        Ok(Expr::Repeat(Box::new(atom), count))
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = self.pos;
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let inner = self.sequence(true)?;
                self.pos += 1; // the `)` seen by `sequence`
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let name: String = self.src[self.pos..]
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                self.pos += name.len();
                match name.as_str() {
                    "R2" => Ok(Expr::Block(BlockKind::R2)),
                    "R3" => Ok(Expr::Block(BlockKind::R3)),
                    _ => Err(Error::UnknownBlock {
                        name,
                        position: start,
                    }),
                }
            }
            Some(c) => Err(self.syntax(format!("unexpected `{c}`"))),
            None => Err(self.syntax("unexpected end of input")),
        }
    }
}

fn expand(expr: &Expr, inverted: bool, out: &mut Vec<BlockRef>) -> Result<()> {
    match expr {
        Expr::Block(kind) => {
            if out.len() >= MAX_EXPANDED_BLOCKS {
                return Err(Error::Precondition(format!(
                    "sequence expands to more than {MAX_EXPANDED_BLOCKS} blocks"
                )));
            }
            out.push(BlockRef {
                kind: *kind,
                inverted,
            });
        }
        Expr::Invert(inner) => expand(inner, !inverted, out)?,
        Expr::Repeat(inner, n) => {
            for _ in 0..*n {
                expand(inner, inverted, out)?;
            }
        }
        Expr::Seq(terms) => {
            for t in terms {
                expand(t, inverted, out)?;
            }
        }
    }
    Ok(())
}

/// Parses and flattens a sequence expression.
pub(crate) fn parse_blocks(text: &str) -> Result<Vec<BlockRef>> {
    let mut parser = Parser { src: text, pos: 0 };
    let ast = parser.sequence(false)?;
    let mut out = Vec::new();
    expand(&ast, false, &mut out)?;
    Ok(out)
}
