//! Strategy files: named sections, each holding one query.
//!
//! ```text
//! # comment
//! [core_lexical]
//! TS=("deep learning" OR
//!     "machine learning")
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use thiserror::Error;

use super::{parse_query, NormalizedRecord, Query, QueryError};
use crate::record::Record;
use crate::store::{Corpus, StoreError};

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error("{name}: section [{section}] (line {line}): {source}")]
    Query {
        name: String,
        section: String,
        line: usize,
        #[source]
        source: QueryError,
    },
    #[error("{name}:{line}: query text outside a [section]")]
    MissingSection { name: String, line: usize },
    #[error("{name}: section [{section}] is empty")]
    EmptySection { name: String, section: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown bundled strategy {0:?}")]
    UnknownBundled(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedQuery {
    pub name: String,
    pub text: String,
    pub query: Query,
}

/// A named list of queries whose result is the union of their matches.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Strategy {
    pub name: String,
    pub queries: Vec<NamedQuery>,
}

pub const BUNDLED_STRATEGIES: [(&str, &str); 7] = [
    ("liu_core", include_str!("../../strategies/liu_core.strategy")),
    ("liu_expanded1", include_str!("../../strategies/liu_expanded1.strategy")),
    ("liu_expanded2", include_str!("../../strategies/liu_expanded2.strategy")),
    ("ai_lexical", include_str!("../../strategies/ai_lexical.strategy")),
    ("core_final", include_str!("../../strategies/core_final.strategy")),
    ("citation_topics", include_str!("../../strategies/citation_topics.strategy")),
    ("category", include_str!("../../strategies/category.strategy")),
];

/// Parses one of the strategies shipped with the crate.
pub fn bundled_strategy(name: &str) -> Result<Strategy, StrategyError> {
    let (_, text) = BUNDLED_STRATEGIES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| StrategyError::UnknownBundled(name.to_string()))?;
    Strategy::parse(name, text)
}

impl Strategy {
    pub fn parse(name: &str, text: &str) -> Result<Self, StrategyError> {
        let mut sections: Vec<(String, usize, String)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if t.starts_with('[') && t.ends_with(']') {
                sections.push((t[1..t.len() - 1].trim().to_string(), i + 1, String::new()));
                continue;
            }
            match sections.last_mut() {
                Some((_, _, body)) => {
                    if !body.is_empty() {
                        body.push(' ');
                    }
                    body.push_str(t);
                }
                None => {
                    return Err(StrategyError::MissingSection {
                        name: name.to_string(),
                        line: i + 1,
                    })
                }
            }
        }
        let queries = sections
            .into_iter()
            .map(|(section, line, body)| {
                if body.is_empty() {
                    return Err(StrategyError::EmptySection {
                        name: name.to_string(),
                        section,
                    });
                }
                let query = parse_query(&body).map_err(|source| StrategyError::Query {
                    name: name.to_string(),
                    section: section.clone(),
                    line,
                    source,
                })?;
                Ok(NamedQuery {
                    name: section,
                    text: body,
                    query,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Strategy {
            name: name.to_string(),
            queries,
        })
    }

    /// Loads a strategy file, or a bundled one when `spec` is `bundled:<name>`.
    pub fn load(spec: &str, base: Option<&Path>) -> Result<Self, StrategyError> {
        if let Some(name) = spec.strip_prefix("bundled:") {
            return bundled_strategy(name);
        }
        let path = match base {
            Some(b) if Path::new(spec).is_relative() => b.join(spec),
            _ => Path::new(spec).to_path_buf(),
        };
        let text = std::fs::read_to_string(&path).map_err(|source| StrategyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        Self::parse(&name, &text)
    }

    /// Union of several strategies, keeping section order.
    pub fn union<'a>(name: &str, parts: impl IntoIterator<Item = &'a Strategy>) -> Strategy {
        Strategy {
            name: name.to_string(),
            queries: parts
                .into_iter()
                .flat_map(|s| s.queries.iter().cloned())
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn matches_normalized(&self, r: &NormalizedRecord) -> bool {
        self.queries.iter().any(|q| q.query.matches_normalized(r))
    }

    pub fn matches(&self, r: &Record) -> bool {
        !self.is_empty() && self.matches_normalized(&NormalizedRecord::new(r))
    }

    /// Union of the queries' match sets over a stored corpus, streaming.
    pub fn run(&self, corpus: &Corpus) -> Result<BTreeSet<String>, StoreError> {
        let mut out = BTreeSet::new();
        if self.is_empty() {
            return Ok(out);
        }
        for r in corpus.iter()? {
            let r = r?;
            if self.matches_normalized(&NormalizedRecord::new(&r)) {
                out.insert(r.ut);
            }
        }
        Ok(out)
    }

    /// Union of match sets over in-memory records, split across `workers`
    /// threads.
    pub fn run_on(&self, records: &[Record], workers: usize) -> BTreeSet<String> {
        if self.is_empty() || records.is_empty() {
            return BTreeSet::new();
        }
        let workers = workers.max(1).min(records.len());
        let chunk = records.len().div_ceil(workers);
        std::thread::scope(|s| {
            let handles: Vec<_> = records
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .filter(|r| self.matches_normalized(&NormalizedRecord::new(r)))
                            .map(|r| r.ut.clone())
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("strategy worker panicked"))
                .collect()
        })
    }
}

/// Union of the strategy's match sets over a stored corpus.
pub fn run_strategy(strategy: &Strategy, corpus: &Corpus) -> Result<BTreeSet<String>, StoreError> {
    strategy.run(corpus)
}
