//! Recursive-descent parser for field-scoped boolean queries.
//!
//! ```text
//! query  := or_q
//! or_q   := and_q (OR and_q)*
//! and_q  := not_q (AND not_q)*
//! not_q  := clause (NOT clause)*
//! clause := FIELD '=' ( '(' expr ')' | term ) | '(' query ')'
//! expr   := or_e ;  or_e := and_e (OR and_e)*
//! and_e  := not_e ((AND)? not_e)*      adjacent terms are an implicit AND
//! not_e  := term (NOT term)*
//! term   := '"' phrase '"' | bareword | '(' expr ')'
//! ```
//! Operators are case-insensitive. Backslashes are dropped, so `\$` reads
//! as the `$` wildcard.

use thiserror::Error;

use super::ast::{BoolExpr, Field, FieldClause, Query};
use super::pattern::PhrasePattern;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" | "))]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown field {name:?} at byte {offset}")]
    UnknownField { name: String, offset: usize },
    #[error("unbalanced parenthesis at byte {offset}")]
    UnbalancedParen { offset: usize },
    #[error("empty phrase at byte {offset}")]
    EmptyPhrase { offset: usize },
    #[error("invalid {field} value {value:?} at byte {offset}")]
    InvalidValue {
        field: Field,
        value: String,
        offset: usize,
    },
}

impl QueryError {
    pub fn offset(&self) -> usize {
        match self {
            QueryError::Syntax { offset, .. }
            | QueryError::UnknownField { offset, .. }
            | QueryError::UnbalancedParen { offset }
            | QueryError::EmptyPhrase { offset }
            | QueryError::InvalidValue { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    LParen,
    RParen,
    Eq,
    Quoted(String),
    Word(String),
    Or,
    And,
    Not,
    End,
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Lexeme>, QueryError> {
    let mut out = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < bytes.len() {
        let (off, c) = bytes[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push(Lexeme { tok: Tok::LParen, offset: off });
                i += 1;
            }
            ')' => {
                out.push(Lexeme { tok: Tok::RParen, offset: off });
                i += 1;
            }
            '=' => {
                out.push(Lexeme { tok: Tok::Eq, offset: off });
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(QueryError::Syntax {
                                offset: text.len(),
                                expected: vec!["closing '\"'".into()],
                            })
                        }
                        Some((_, '"')) => {
                            i += 1;
                            break;
                        }
                        Some((_, '\\')) => {
                            i += 1;
                        }
                        Some((_, ch)) => {
                            s.push(*ch);
                            i += 1;
                        }
                    }
                }
                out.push(Lexeme { tok: Tok::Quoted(s), offset: off });
            }
            _ => {
                let mut s = String::new();
                while let Some(&(_, ch)) = bytes.get(i) {
                    if ch.is_whitespace() || matches!(ch, '(' | ')' | '"' | '=') {
                        break;
                    }
                    if ch != '\\' {
                        s.push(ch);
                    }
                    i += 1;
                }
                let tok = match s.to_ascii_lowercase().as_str() {
                    "or" => Tok::Or,
                    "and" => Tok::And,
                    "not" => Tok::Not,
                    _ => Tok::Word(s),
                };
                out.push(Lexeme { tok, offset: off });
            }
        }
    }
    out.push(Lexeme { tok: Tok::End, offset: text.len() });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexeme>,
    pos: usize,
    open: Vec<usize>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Lexeme {
        let l = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        l
    }

    fn unexpected(&self, expected: &[&str]) -> QueryError {
        match self.peek() {
            Tok::End if !self.open.is_empty() => QueryError::UnbalancedParen {
                offset: *self.open.last().unwrap(),
            },
            Tok::RParen if self.open.is_empty() => QueryError::UnbalancedParen {
                offset: self.offset(),
            },
            _ => QueryError::Syntax {
                offset: self.offset(),
                expected: expected.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    fn open_paren(&mut self) -> Result<(), QueryError> {
        match self.peek() {
            Tok::LParen => {
                let off = self.bump().offset;
                self.open.push(off);
                Ok(())
            }
            _ => Err(self.unexpected(&["'('"])),
        }
    }

    fn close_paren(&mut self, expected: &[&str]) -> Result<(), QueryError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                self.open.pop();
                Ok(())
            }
            _ => Err(self.unexpected(expected)),
        }
    }

    // query level

    fn query(&mut self) -> Result<BoolExpr<FieldClause>, QueryError> {
        let mut xs = vec![self.and_q()?];
        while *self.peek() == Tok::Or {
            self.bump();
            xs.push(self.and_q()?);
        }
        Ok(BoolExpr::or(xs))
    }

    fn and_q(&mut self) -> Result<BoolExpr<FieldClause>, QueryError> {
        let mut xs = vec![self.not_q()?];
        while *self.peek() == Tok::And {
            self.bump();
            xs.push(self.not_q()?);
        }
        Ok(BoolExpr::and(xs))
    }

    fn not_q(&mut self) -> Result<BoolExpr<FieldClause>, QueryError> {
        let mut xs = vec![self.clause()?];
        while *self.peek() == Tok::Not {
            self.bump();
            xs.push(BoolExpr::Not(Box::new(self.clause()?)));
        }
        Ok(BoolExpr::and(xs))
    }

    fn clause(&mut self) -> Result<BoolExpr<FieldClause>, QueryError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.open_paren()?;
                let q = self.query()?;
                self.close_paren(&["')'", "OR", "AND", "NOT"])?;
                Ok(q)
            }
            Tok::Word(name) => {
                let off = self.offset();
                self.bump();
                if *self.peek() != Tok::Eq {
                    return Err(QueryError::Syntax {
                        offset: self.offset(),
                        expected: vec!["'='".into()],
                    });
                }
                let field = Field::parse(&name).ok_or(QueryError::UnknownField {
                    name: name.clone(),
                    offset: off,
                })?;
                self.bump();
                let patterns = if *self.peek() == Tok::LParen {
                    self.open_paren()?;
                    let e = self.expr()?;
                    self.close_paren(&["')'", "OR", "AND", "NOT", "term"])?;
                    e
                } else {
                    self.term()?
                };
                validate_values(field, &patterns, off)?;
                Ok(BoolExpr::Leaf(FieldClause { field, patterns }))
            }
            _ => Err(self.unexpected(&["FIELD=", "'('"])),
        }
    }

    // phrase level

    fn expr(&mut self) -> Result<BoolExpr<PhrasePattern>, QueryError> {
        let mut xs = vec![self.and_e()?];
        while *self.peek() == Tok::Or {
            self.bump();
            xs.push(self.and_e()?);
        }
        Ok(BoolExpr::or(xs))
    }

    fn and_e(&mut self) -> Result<BoolExpr<PhrasePattern>, QueryError> {
        let mut xs = vec![self.not_e()?];
        loop {
            match self.peek() {
                Tok::And => {
                    self.bump();
                }
                Tok::Quoted(_) | Tok::Word(_) | Tok::LParen => {}
                _ => break,
            }
            xs.push(self.not_e()?);
        }
        Ok(BoolExpr::and(xs))
    }

    fn not_e(&mut self) -> Result<BoolExpr<PhrasePattern>, QueryError> {
        let mut xs = vec![self.term()?];
        while *self.peek() == Tok::Not {
            self.bump();
            xs.push(BoolExpr::Not(Box::new(self.term()?)));
        }
        Ok(BoolExpr::and(xs))
    }

    fn term(&mut self) -> Result<BoolExpr<PhrasePattern>, QueryError> {
        match self.peek().clone() {
            Tok::Quoted(s) | Tok::Word(s) => {
                let off = self.bump().offset;
                PhrasePattern::new(&s)
                    .map(BoolExpr::Leaf)
                    .ok_or(QueryError::EmptyPhrase { offset: off })
            }
            Tok::LParen => {
                self.open_paren()?;
                let e = self.expr()?;
                self.close_paren(&["')'", "OR", "AND", "NOT", "term"])?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["'\"'", "word", "'('"])),
        }
    }
}

fn validate_values(
    field: Field,
    patterns: &BoolExpr<PhrasePattern>,
    offset: usize,
) -> Result<(), QueryError> {
    let bad = |p: &PhrasePattern| QueryError::InvalidValue {
        field,
        value: p.raw.clone(),
        offset,
    };
    match field {
        Field::PY => {
            for p in patterns.leaves() {
                parse_year_range(&p.raw).ok_or_else(|| bad(p))?;
            }
        }
        Field::CT => {
            for p in patterns.leaves() {
                let ok = !p.raw.is_empty()
                    && p.raw
                        .split('.')
                        .all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_ascii_digit()));
                if !ok {
                    return Err(bad(p));
                }
            }
        }
        _ => {}
    }
    Ok(())
}

/// `2020` or `2013-2022` (inclusive).
pub fn parse_year_range(raw: &str) -> Option<(i32, i32)> {
    let raw = raw.trim();
    match raw.split_once('-') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (a <= b).then_some((a, b))
        }
        None => raw.parse().ok().map(|y| (y, y)),
    }
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        open: Vec::new(),
    };
    let root = p.query()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(&["OR", "AND", "NOT", "end of query"]));
    }
    Ok(Query { root })
}
