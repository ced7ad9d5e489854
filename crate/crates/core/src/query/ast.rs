use std::fmt;

use serde::{Deserialize, Serialize};

use super::pattern::PhrasePattern;

/// Boolean expression over leaves of type `T`.
///
/// The parser only emits `Not` as the right operand of a binary `a NOT b`,
/// which it represents as `And([a, Not(b)])`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoolExpr<T> {
    Leaf(T),
    And(Vec<BoolExpr<T>>),
    Or(Vec<BoolExpr<T>>),
    Not(Box<BoolExpr<T>>),
}

impl<T> BoolExpr<T> {
    pub fn eval(&self, leaf: &mut impl FnMut(&T) -> bool) -> bool {
        match self {
            BoolExpr::Leaf(t) => leaf(t),
            BoolExpr::And(xs) => xs.iter().all(|x| x.eval(leaf)),
            BoolExpr::Or(xs) => xs.iter().any(|x| x.eval(leaf)),
            BoolExpr::Not(x) => !x.eval(leaf),
        }
    }

    pub fn leaves(&self) -> Vec<&T> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a T>) {
        match self {
            BoolExpr::Leaf(t) => out.push(t),
            BoolExpr::And(xs) | BoolExpr::Or(xs) => xs.iter().for_each(|x| x.collect_leaves(out)),
            BoolExpr::Not(x) => x.collect_leaves(out),
        }
    }

    /// Builds an n-ary node, collapsing single-element lists.
    pub(crate) fn and(mut xs: Vec<Self>) -> Self {
        if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            BoolExpr::And(xs)
        }
    }

    pub(crate) fn or(mut xs: Vec<Self>) -> Self {
        if xs.len() == 1 {
            xs.pop().unwrap()
        } else {
            BoolExpr::Or(xs)
        }
    }
}

/// Field selector for a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    /// Topic: title, abstract, author keywords and keywords plus.
    TS,
    TI,
    AB,
    WC,
    /// Citation topic id, matched by dotted prefix.
    CT,
    /// Publication year or inclusive range.
    PY,
}

impl Field {
    pub fn parse(name: &str) -> Option<Field> {
        Some(match name.to_ascii_uppercase().as_str() {
            "TS" => Field::TS,
            "TI" => Field::TI,
            "AB" => Field::AB,
            "WC" => Field::WC,
            "CT" => Field::CT,
            "PY" => Field::PY,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::TS => "TS",
            Field::TI => "TI",
            Field::AB => "AB",
            Field::WC => "WC",
            Field::CT => "CT",
            Field::PY => "PY",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A leaf of a query: one field and a boolean combination of phrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldClause {
    pub field: Field,
    pub patterns: BoolExpr<PhrasePattern>,
}

/// A parsed query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub root: BoolExpr<FieldClause>,
}
