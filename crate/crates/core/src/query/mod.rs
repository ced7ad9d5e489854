//! Field-scoped boolean search over records.

mod ast;
mod parser;
mod pattern;
mod strategy;

pub use ast::{BoolExpr, Field, FieldClause, Query};
pub use parser::{parse_query, parse_year_range, QueryError};
pub use pattern::{tokenize, PhrasePattern, TokenPattern};
pub use strategy::{bundled_strategy, run_strategy, NamedQuery, Strategy, StrategyError, BUNDLED_STRATEGIES};

use crate::record::Record;

/// A record with its searchable fields tokenized once.
#[derive(Debug, Clone)]
pub struct NormalizedRecord {
    title: Vec<String>,
    abstract_text: Vec<String>,
    keywords: Vec<Vec<String>>,
    categories: Vec<Vec<String>>,
    category_tails: Vec<Vec<String>>,
    topic: Option<String>,
    year: Option<i32>,
}

impl NormalizedRecord {
    pub fn new(r: &Record) -> Self {
        NormalizedRecord {
            title: tokenize(&r.title),
            abstract_text: tokenize(&r.abstract_text),
            keywords: r
                .author_keywords
                .iter()
                .chain(&r.keywords_plus)
                .map(|k| tokenize(k))
                .collect(),
            categories: r.categories.iter().map(|c| tokenize(c)).collect(),
            // "Computer Science, Artificial Intelligence" also answers to
            // "Artificial Intelligence".
            category_tails: r
                .categories
                .iter()
                .filter_map(|c| c.rsplit_once(',').map(|(_, t)| tokenize(t)))
                .collect(),
            topic: r.citation_topic.as_ref().map(|t| t.trim().to_string()),
            year: r.year,
        }
    }

    fn phrase_in_field(&self, field: Field, p: &PhrasePattern) -> bool {
        match field {
            Field::TS => {
                p.matches_within(&self.title)
                    || p.matches_within(&self.abstract_text)
                    || self.keywords.iter().any(|k| p.matches_within(k))
            }
            Field::TI => p.matches_within(&self.title),
            Field::AB => p.matches_within(&self.abstract_text),
            Field::WC => self
                .categories
                .iter()
                .chain(&self.category_tails)
                .any(|c| p.matches_exactly(c)),
            Field::CT => match &self.topic {
                Some(topic) => {
                    topic == &p.raw
                        || (topic.starts_with(&p.raw)
                            && topic.as_bytes().get(p.raw.len()) == Some(&b'.'))
                }
                None => false,
            },
            Field::PY => match (self.year, parse_year_range(&p.raw)) {
                (Some(y), Some((lo, hi))) => lo <= y && y <= hi,
                _ => false,
            },
        }
    }
}

impl FieldClause {
    pub fn matches(&self, r: &NormalizedRecord) -> bool {
        self.patterns
            .eval(&mut |p: &PhrasePattern| r.phrase_in_field(self.field, p))
    }
}

impl Query {
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        parse_query(text)
    }

    pub fn matches_normalized(&self, r: &NormalizedRecord) -> bool {
        self.root.eval(&mut |c: &FieldClause| c.matches(r))
    }

    pub fn matches(&self, r: &Record) -> bool {
        self.matches_normalized(&NormalizedRecord::new(r))
    }
}

/// Whether `q` matches `r`.
pub fn match_record(q: &Query, r: &Record) -> bool {
    q.matches(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> Record {
        Record {
            ut: "W1".into(),
            title: "Graph Neural Networks for molecules".into(),
            abstract_text: "We study expert systems.".into(),
            author_keywords: vec!["Machine-Learning".into()],
            keywords_plus: vec!["DRUG DISCOVERY".into()],
            categories: vec!["Computer Science, Artificial Intelligence".into()],
            citation_topic: Some("4.61.2".into()),
            year: Some(2020),
            ..Default::default()
        }
    }

    fn m(q: &str) -> bool {
        match_record(&parse_query(q).unwrap(), &rec())
    }

    #[test]
    fn ts_scope() {
        assert!(m(r#"TS=("neural net*")"#));
        assert!(m(r#"TS=("expert system$")"#));
        assert!(m(r#"TS=("machine learning")"#));
        assert!(m(r#"TS=("drug discovery")"#));
        assert!(!m(r#"TS=("molecules we")"#), "phrases do not span fields");
        assert!(m(r#"TI=("graph")"#));
        assert!(!m(r#"AB=("graph")"#));
    }

    #[test]
    fn ts_and_across_subfields() {
        assert!(m(r#"TS=("graph" AND "expert system*")"#));
        assert!(!m(r#"TS=("graph" NOT "expert system*")"#));
    }

    #[test]
    fn wc_equality() {
        assert!(m(r#"WC=("Artificial Intelligence")"#));
        assert!(m(r#"WC=("computer science, artificial intelligence")"#));
        assert!(!m(r#"WC=("Artificial")"#));
    }

    #[test]
    fn ct_prefix() {
        assert!(m(r#"CT=("4.61")"#));
        assert!(m(r#"CT=("4.61.2")"#));
        assert!(m(r#"CT=("4")"#));
        assert!(!m(r#"CT=("4.6")"#));
        assert!(!m(r#"CT=("4.61.23")"#));
        let mut r = rec();
        r.citation_topic = Some("4.61".into());
        assert!(match_record(&parse_query(r#"CT=("4.61")"#).unwrap(), &r));
        r.citation_topic = None;
        assert!(!match_record(&parse_query(r#"CT=("4.61")"#).unwrap(), &r));
    }

    #[test]
    fn py_range() {
        assert!(m("PY=(2013-2022)"));
        assert!(m("PY=(2020)"));
        assert!(!m("PY=(2021-2022)"));
    }

    #[test]
    fn clause_not() {
        assert!(m(r#"TS=("graph") NOT PY=(2019)"#));
        assert!(!m(r#"TS=("graph") NOT PY=(2020)"#));
    }
}
