//! Python bindings for the `delineate` library.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use delineate::analytics;
use delineate::classifier::{self as clf, Label, LabeledExample, ReplayClassifier, TrainingSet};
use delineate::eval::{self, Adjudication, GoldLabel};
use delineate::formats;
use delineate::pipeline::{self, RunOptions, StageDefs};
use delineate::query;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_label(s: &str) -> PyResult<Label> {
    s.parse().map_err(value_err)
}

/// One bibliographic record.
#[pyclass(name = "Record", from_py_object)]
#[derive(Clone)]
pub struct PyRecord {
    inner: delineate::Record,
}

#[pymethods]
impl PyRecord {
    #[new]
    #[pyo3(signature = (ut, title = String::new(), abstract_text = String::new(), author_keywords = vec![], keywords_plus = vec![], categories = vec![], citation_topic = None, year = None, citation_count = 0, addresses = vec![]))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        ut: String,
        title: String,
        abstract_text: String,
        author_keywords: Vec<String>,
        keywords_plus: Vec<String>,
        categories: Vec<String>,
        citation_topic: Option<String>,
        year: Option<i32>,
        citation_count: u64,
        addresses: Vec<String>,
    ) -> Self {
        let mut inner = delineate::Record {
            ut,
            title,
            abstract_text,
            author_keywords,
            keywords_plus,
            categories,
            citation_topic,
            year,
            citation_count,
            addresses,
            ..Default::default()
        };
        inner.derive_affiliations();
        PyRecord { inner }
    }

    #[getter]
    fn ut(&self) -> &str {
        &self.inner.ut
    }
    #[getter]
    fn title(&self) -> &str {
        &self.inner.title
    }
    #[getter]
    fn abstract_text(&self) -> &str {
        &self.inner.abstract_text
    }
    #[getter]
    fn author_keywords(&self) -> Vec<String> {
        self.inner.author_keywords.clone()
    }
    #[getter]
    fn keywords_plus(&self) -> Vec<String> {
        self.inner.keywords_plus.clone()
    }
    #[getter]
    fn categories(&self) -> Vec<String> {
        self.inner.categories.clone()
    }
    #[getter]
    fn citation_topic(&self) -> Option<String> {
        self.inner.citation_topic.clone()
    }
    #[getter]
    fn year(&self) -> Option<i32> {
        self.inner.year
    }
    #[getter]
    fn citation_count(&self) -> u64 {
        self.inner.citation_count
    }
    #[getter]
    fn countries(&self) -> Vec<String> {
        self.inner.countries.clone()
    }
    #[getter]
    fn institutions(&self) -> Vec<String> {
        self.inner.institutions.clone()
    }

    fn __repr__(&self) -> String {
        format!("Record(ut={:?}, title={:?})", self.inner.ut, self.inner.title)
    }
}

fn unwrap_records(records: Vec<PyRecord>) -> Vec<delineate::Record> {
    records.into_iter().map(|r| r.inner).collect()
}

fn wrap_records(records: Vec<delineate::Record>) -> Vec<PyRecord> {
    records.into_iter().map(|inner| PyRecord { inner }).collect()
}

/// Parses a tagged (field-tag per line) export.
#[pyfunction]
fn parse_tagged(text: &str) -> PyResult<Vec<PyRecord>> {
    let out = formats::parse_tagged(text.as_bytes()).map_err(value_err)?;
    Ok(wrap_records(out.records))
}

/// Parses a tab-delimited export.
#[pyfunction]
fn parse_tabular(text: &str) -> PyResult<Vec<PyRecord>> {
    let out = formats::parse_tabular(text.as_bytes()).map_err(value_err)?;
    Ok(wrap_records(out.records))
}

#[pyfunction]
fn write_tagged(records: Vec<PyRecord>) -> String {
    formats::write_tagged(&unwrap_records(records))
}

#[pyfunction]
fn write_tabular(records: Vec<PyRecord>) -> String {
    formats::write_tabular(&unwrap_records(records))
}

/// A parsed search query.
#[pyclass(name = "Query")]
pub struct PyQuery {
    inner: query::Query,
    text: String,
}

#[pymethods]
impl PyQuery {
    #[new]
    fn new(text: String) -> PyResult<Self> {
        let inner = query::Query::parse(&text).map_err(value_err)?;
        Ok(PyQuery { inner, text })
    }

    fn matches(&self, record: &PyRecord) -> bool {
        self.inner.matches(&record.inner)
    }

    fn __repr__(&self) -> String {
        format!("Query({:?})", self.text)
    }
}

/// A named collection of queries; a record matches if any query does.
#[pyclass(name = "Strategy")]
pub struct PyStrategy {
    inner: query::Strategy,
}

#[pymethods]
impl PyStrategy {
    #[new]
    fn new(name: &str, text: &str) -> PyResult<Self> {
        Ok(PyStrategy {
            inner: query::Strategy::parse(name, text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        Ok(PyStrategy {
            inner: query::bundled_strategy(name).map_err(value_err)?,
        })
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    fn __len__(&self) -> usize {
        self.inner.queries.len()
    }

    /// Sorted uts of the matching records.
    #[pyo3(signature = (records, workers = 1))]
    fn run(&self, py: Python<'_>, records: Vec<PyRecord>, workers: usize) -> Vec<String> {
        let rs = unwrap_records(records);
        py.detach(|| self.inner.run_on(&rs, workers.max(1)).into_iter().collect())
    }
}

#[pyfunction]
fn bundled_strategy_names() -> Vec<&'static str> {
    query::BUNDLED_STRATEGIES.iter().map(|(n, _)| *n).collect()
}

/// Tags each record with the stage that admits it, using the bundled stage
/// queries. `verdicts` maps ut to a replayed classifier reply for records no
/// query admits. Returns `(tags, summary)`.
#[pyfunction]
#[pyo3(signature = (records, verdicts = None, workers = 1, batch_size = 256))]
fn run_pipeline(
    py: Python<'_>,
    records: Vec<PyRecord>,
    verdicts: Option<HashMap<String, String>>,
    workers: usize,
    batch_size: usize,
) -> PyResult<(BTreeMap<String, String>, BTreeMap<String, u64>)> {
    let rs = unwrap_records(records);
    let stages = StageDefs::bundled().map_err(value_err)?;
    let replay = verdicts.map(ReplayClassifier::from_pairs);
    let opts = RunOptions {
        workers: workers.max(1),
        batch_size: batch_size.max(1),
        checkpoint: None,
    };
    let ledger = py
        .detach(|| {
            pipeline::run_pipeline(&rs, &stages, replay.as_ref().map(|r| r as &dyn clf::Classifier), &opts)
        })
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let tags = ledger
        .tags()
        .iter()
        .map(|(u, t)| (u.clone(), t.as_str().to_string()))
        .collect();
    let s = ledger.summary();
    let mut summary: BTreeMap<String, u64> = s
        .stage_counts
        .iter()
        .map(|(t, c)| (t.as_str().to_string(), *c))
        .collect();
    summary.insert("initial_size".into(), s.initial_size);
    summary.insert("final_size".into(), s.final_size);
    Ok((tags, summary))
}

fn training_set(examples: Vec<(String, String)>) -> PyResult<TrainingSet> {
    let mut ts = TrainingSet::new();
    for (p, l) in examples {
        ts.insert(LabeledExample::seed(p, parse_label(&l)?));
    }
    Ok(ts)
}

/// Multinomial naive Bayes over title tokens with add-one smoothing.
#[pyclass(name = "NaiveBayes")]
pub struct PyNaiveBayes {
    inner: clf::NaiveBayes,
}

#[pymethods]
impl PyNaiveBayes {
    /// Trains on `(prompt, label)` pairs, labels being `"ai"` or `"other"`.
    #[new]
    fn new(examples: Vec<(String, String)>) -> PyResult<Self> {
        let ts = training_set(examples)?;
        Ok(PyNaiveBayes {
            inner: clf::NaiveBayes::train(&ts).map_err(value_err)?,
        })
    }

    fn posterior_ai(&self, text: &str) -> f64 {
        self.inner.posterior_ai(text)
    }

    fn predict(&self, text: &str) -> (String, f64) {
        let (l, p) = self.inner.predict(text);
        (l.as_str().to_string(), p)
    }

    #[getter]
    fn vocabulary_size(&self) -> usize {
        self.inner.vocabulary_size()
    }
}

/// Fine-tuning JSONL for `(prompt, label)` pairs.
#[pyfunction]
fn format_training_jsonl(examples: Vec<(String, String)>) -> PyResult<String> {
    clf::format_training_jsonl(&training_set(examples)?).map_err(value_err)
}

/// Reads fine-tuning JSONL back into `(prompt, label)` pairs.
#[pyfunction]
fn parse_training_jsonl(text: &str) -> PyResult<Vec<(String, String)>> {
    let ts = clf::parse_training_jsonl(text, std::path::Path::new("<string>")).map_err(value_err)?;
    Ok(ts
        .examples()
        .iter()
        .map(|e| (e.prompt.clone(), e.label.as_str().to_string()))
        .collect())
}

fn gold_labels(gold: HashMap<String, String>) -> PyResult<Vec<GoldLabel>> {
    let mut out: Vec<GoldLabel> = gold
        .into_iter()
        .map(|(ut, l)| {
            Ok(GoldLabel {
                ut,
                label: parse_label(&l)?,
                adjudication: Adjudication::Unanimous,
            })
        })
        .collect::<PyResult<_>>()?;
    out.sort_by(|a, b| a.ut.cmp(&b.ut));
    Ok(out)
}

/// Confusion counts and precision, recall and F1 of `predicted` against
/// `gold` (ut to label).
#[pyfunction]
fn score(predicted: BTreeSet<String>, gold: HashMap<String, String>) -> PyResult<BTreeMap<String, Option<f64>>> {
    let r = eval::score(&predicted, &gold_labels(gold)?).map_err(value_err)?;
    Ok(BTreeMap::from([
        ("tp".to_string(), Some(r.tp as f64)),
        ("fp".to_string(), Some(r.fp as f64)),
        ("fn".to_string(), Some(r.fn_ as f64)),
        ("tn".to_string(), Some(r.tn as f64)),
        ("precision".to_string(), r.precision),
        ("recall".to_string(), r.recall),
        ("f1".to_string(), r.f1),
    ]))
}

#[pyfunction]
#[pyo3(signature = (k, n, z = eval::Z_95))]
fn wilson_interval(k: u64, n: u64, z: f64) -> PyResult<(f64, f64)> {
    if n == 0 || k > n {
        return Err(PyValueError::new_err("need 0 <= k <= n and n > 0"));
    }
    Ok(eval::wilson_interval(k, n, z))
}

/// Share of the gold sample's `ai` records found in `members`, with a 95%
/// interval: `(captured, relevant, fraction, low, high)`.
#[pyfunction]
fn estimate_corpus_recall(
    gold: HashMap<String, String>,
    members: BTreeSet<String>,
) -> PyResult<(u64, u64, f64, f64, f64)> {
    let e = eval::estimate_corpus_recall(&gold_labels(gold)?, |u| members.contains(u)).map_err(value_err)?;
    Ok((e.captured, e.relevant, e.fraction, e.ci_low, e.ci_high))
}

/// Region sizes of a 2- or 3-set Venn diagram, keyed by `&`-joined names.
#[pyfunction]
fn venn(sets: Vec<(String, BTreeSet<String>)>) -> PyResult<BTreeMap<String, u64>> {
    let args: Vec<(&str, &BTreeSet<String>)> = sets.iter().map(|(n, s)| (n.as_str(), s)).collect();
    let v = eval::venn(&args).map_err(value_err)?;
    Ok((1..v.regions.len()).map(|m| (v.region_name(m), v.regions[m])).collect())
}

#[pyfunction]
fn h_index(citations: Vec<u64>) -> u64 {
    analytics::h_index(&citations)
}

/// Keyword counts at or above `min_count`, most frequent first.
#[pyfunction]
fn keyword_frequency(records: Vec<PyRecord>, min_count: u64) -> Vec<(String, u64)> {
    analytics::keyword_frequency(&unwrap_records(records), min_count)
}

/// Uts in the top `pct` percent of their publication year by citations.
#[pyfunction]
fn top_cited_uts(records: Vec<PyRecord>, pct: u32) -> Vec<String> {
    let rs = unwrap_records(records);
    let t = analytics::TopThresholds::compute(&rs, pct);
    rs.iter().filter(|r| t.is_top(r)).map(|r| r.ut.clone()).collect()
}

/// Label co-occurrence: `(nodes, edges)` with edges keyed by label pair.
#[pyfunction]
#[pyo3(signature = (labels, threshold = 1))]
fn cooccurrence(
    labels: BTreeMap<String, Vec<String>>,
    threshold: u64,
) -> (BTreeMap<String, u64>, BTreeMap<(String, String), u64>) {
    let g = analytics::cooccurrence(&labels, threshold);
    (g.nodes, g.edges)
}

#[pymodule]
fn delineate_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function of the extension module to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("PROMPT_SEPARATOR", clf::PROMPT_SEPARATOR)?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyQuery>()?;
    m.add_class::<PyStrategy>()?;
    m.add_class::<PyNaiveBayes>()?;
    m.add_function(wrap_pyfunction!(parse_tagged, m)?)?;
    m.add_function(wrap_pyfunction!(parse_tabular, m)?)?;
    m.add_function(wrap_pyfunction!(write_tagged, m)?)?;
    m.add_function(wrap_pyfunction!(write_tabular, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_strategy_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(format_training_jsonl, m)?)?;
    m.add_function(wrap_pyfunction!(parse_training_jsonl, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_corpus_recall, m)?)?;
    m.add_function(wrap_pyfunction!(venn, m)?)?;
    m.add_function(wrap_pyfunction!(h_index, m)?)?;
    m.add_function(wrap_pyfunction!(keyword_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(top_cited_uts, m)?)?;
    m.add_function(wrap_pyfunction!(cooccurrence, m)?)?;
    Ok(())
}
