//! The staged admission pipeline: citation topics, core lexical query,
//! category, then the classifier on whatever is left.

mod checkpoint;
mod ledger;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use checkpoint::{Checkpoint, CheckpointEntry};
pub use ledger::{
    parse_ledger_csv, parse_summary, validate_ledger, validate_summary, write_ledger_csv,
    write_summary, AdmissionLedger, LedgerSummary, Violation,
};

use crate::classifier::{Classifier, ClassifyError, Unmappable};
use crate::query::{NormalizedRecord, Strategy, StrategyError};
use crate::record::Record;
use crate::store::{Corpus, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageTag {
    CitationTopic,
    CoreLexical,
    Category,
    Classifier,
    Rejected,
}

impl StageTag {
    pub const ALL: [StageTag; 5] = [
        StageTag::CitationTopic,
        StageTag::CoreLexical,
        StageTag::Category,
        StageTag::Classifier,
        StageTag::Rejected,
    ];

    pub const ADMITTING: [StageTag; 4] = [
        StageTag::CitationTopic,
        StageTag::CoreLexical,
        StageTag::Category,
        StageTag::Classifier,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageTag::CitationTopic => "citation_topic",
            StageTag::CoreLexical => "core_lexical",
            StageTag::Category => "category",
            StageTag::Classifier => "classifier",
            StageTag::Rejected => "rejected",
        }
    }

    pub fn parse(s: &str) -> Option<StageTag> {
        StageTag::ALL.into_iter().find(|t| t.as_str() == s.trim())
    }

    pub fn is_admitting(self) -> bool {
        self != StageTag::Rejected
    }
}

impl std::fmt::Display for StageTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three query-based stages, in their fixed order.
#[derive(Debug, Clone, Default)]
pub struct StageDefs {
    pub citation_topic: Strategy,
    pub core_lexical: Strategy,
    pub category: Strategy,
}

impl StageDefs {
    /// The strategies shipped with the crate.
    pub fn bundled() -> Result<Self, StrategyError> {
        Ok(StageDefs {
            citation_topic: crate::query::bundled_strategy("citation_topics")?,
            core_lexical: crate::query::bundled_strategy("core_final")?,
            category: crate::query::bundled_strategy("category")?,
        })
    }

    pub fn load(spec: &StageSpec, base: Option<&Path>) -> Result<Self, StrategyError> {
        Ok(StageDefs {
            citation_topic: Strategy::load(&spec.citation_topic, base)?,
            core_lexical: Strategy::load(&spec.core_lexical, base)?,
            category: Strategy::load(&spec.category, base)?,
        })
    }

    fn ordered(&self) -> [(StageTag, &Strategy); 3] {
        [
            (StageTag::CitationTopic, &self.citation_topic),
            (StageTag::CoreLexical, &self.core_lexical),
            (StageTag::Category, &self.category),
        ]
    }

    /// Every query stage whose criterion the record satisfies.
    pub fn matching(&self, r: &NormalizedRecord) -> Vec<StageTag> {
        self.ordered()
            .into_iter()
            .filter(|(_, s)| s.matches_normalized(r))
            .map(|(t, _)| t)
            .collect()
    }

    pub fn first_match(&self, r: &NormalizedRecord) -> Option<StageTag> {
        self.ordered()
            .into_iter()
            .find(|(_, s)| s.matches_normalized(r))
            .map(|(t, _)| t)
    }

    fn fingerprint(&self, h: &mut Sha256) {
        for (tag, s) in self.ordered() {
            h.update(tag.as_str().as_bytes());
            for q in &s.queries {
                h.update(b"\x1f");
                h.update(q.text.as_bytes());
            }
            h.update(b"\x1e");
        }
    }
}

/// Strategy locations per stage, as written in a config file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub citation_topic: String,
    pub core_lexical: String,
    pub category: String,
}

impl Default for StageSpec {
    fn default() -> Self {
        StageSpec {
            citation_topic: "bundled:citation_topics".into(),
            core_lexical: "bundled:core_final".into(),
            category: "bundled:category".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub batch_size: usize,
    pub checkpoint: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: 1,
            batch_size: 100,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("initial corpus is empty")]
    EmptyInitial,
    #[error(
        "classifier unavailable after {committed} records were tagged ({pending} still pending): {source}"
    )]
    ClassifierUnavailable {
        committed: usize,
        pending: usize,
        #[source]
        source: ClassifyError,
    },
    #[error("checkpoint {path} was written for different inputs (expected {expected}, found {found})")]
    ChecksumMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Union of the preliminary strategy's matches over a stored corpus.
pub fn build_initial(corpus: &Corpus, preliminary: &Strategy) -> Result<BTreeSet<String>, StoreError> {
    preliminary.run(corpus)
}

/// Same as [`build_initial`] over in-memory records.
pub fn build_initial_records(
    records: &[Record],
    preliminary: &Strategy,
    workers: usize,
) -> BTreeSet<String> {
    preliminary.run_on(records, workers)
}

fn input_checksum(records: &[Record], stages: &StageDefs, classifier: Option<&dyn Classifier>) -> String {
    let mut uts: Vec<&str> = records.iter().map(|r| r.ut.as_str()).collect();
    uts.sort_unstable();
    let mut h = Sha256::new();
    for u in uts {
        h.update(u.as_bytes());
        h.update(b"\n");
    }
    stages.fingerprint(&mut h);
    h.update(
        classifier
            .map(|c| c.identity())
            .unwrap_or_else(|| "none".into())
            .as_bytes(),
    );
    hex::encode(h.finalize())
}

fn tag_query_stages(
    records: &[Record],
    stages: &StageDefs,
    workers: usize,
) -> BTreeMap<String, Option<StageTag>> {
    let workers = workers.max(1).min(records.len().max(1));
    let chunk = records.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = records
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|r| (r.ut.clone(), stages.first_match(&NormalizedRecord::new(r))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("stage worker panicked"))
            .collect()
    })
}

/// Tags every initial-corpus record with the first stage that admits it.
/// The classifier sees only records no query stage matched, in batches;
/// with a checkpoint path the run resumes after the last finished batch.
pub fn run_pipeline(
    records: &[Record],
    stages: &StageDefs,
    classifier: Option<&dyn Classifier>,
    opts: &RunOptions,
) -> Result<AdmissionLedger, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::EmptyInitial);
    }
    let checksum = input_checksum(records, stages, classifier);
    let mut ckpt = match &opts.checkpoint {
        Some(p) => Some(Checkpoint::open(p, &checksum)?),
        None => None,
    };

    let mut tags: BTreeMap<String, StageTag> = BTreeMap::new();
    let mut unresolved: Vec<Unmappable> = Vec::new();
    let resumed = ckpt.as_ref().map(|c| !c.entries().is_empty()).unwrap_or(false);
    if resumed {
        let c = ckpt.as_ref().expect("checked");
        for e in c.entries() {
            tags.insert(e.ut.clone(), e.stage);
            if let Some(resp) = &e.response {
                unresolved.push(Unmappable {
                    ut: e.ut.clone(),
                    response: resp.clone(),
                });
            }
        }
        log::info!("resuming from checkpoint with {} tagged records", tags.len());
    }

    // Stages 1-3 are cheap and pure, so they are recomputed on resume.
    let query_tags = tag_query_stages(records, stages, opts.workers);
    let mut remainder: Vec<&Record> = Vec::new();
    let mut committed = Vec::new();
    let by_ut: BTreeMap<&str, &Record> = records.iter().map(|r| (r.ut.as_str(), r)).collect();
    for (ut, t) in &query_tags {
        match t {
            Some(t) => {
                if !tags.contains_key(ut) {
                    committed.push(CheckpointEntry::new(ut, *t));
                }
                tags.insert(ut.clone(), *t);
            }
            None if !tags.contains_key(ut) => remainder.push(by_ut[ut.as_str()]),
            None => {}
        }
    }
    if let Some(c) = ckpt.as_mut() {
        c.append(&committed)?;
    }

    if !remainder.is_empty() {
        let Some(clf) = classifier else {
            return Err(PipelineError::ClassifierUnavailable {
                committed: tags.len(),
                pending: remainder.len(),
                source: ClassifyError::Unavailable("no classifier configured".into()),
            });
        };
        let batch = opts.batch_size.max(1);
        let mut done = 0;
        for part in remainder.chunks(batch) {
            let owned: Vec<Record> = part.iter().map(|r| (*r).clone()).collect();
            let out = clf.classify(&owned).map_err(|source| {
                PipelineError::ClassifierUnavailable {
                    committed: tags.len(),
                    pending: remainder.len() - done,
                    source,
                }
            })?;
            let mut entries = Vec::with_capacity(part.len());
            for v in &out.verdicts {
                let t = match v.label {
                    crate::classifier::Label::Ai => StageTag::Classifier,
                    crate::classifier::Label::Other => StageTag::Rejected,
                };
                entries.push(CheckpointEntry::new(&v.ut, t));
            }
            for u in &out.unmappable {
                entries.push(CheckpointEntry {
                    ut: u.ut.clone(),
                    stage: StageTag::Rejected,
                    response: Some(u.response.clone()),
                });
            }
            for r in part {
                if !entries.iter().any(|e| e.ut == r.ut) {
                    return Err(PipelineError::ClassifierUnavailable {
                        committed: tags.len(),
                        pending: remainder.len() - done,
                        source: ClassifyError::BadResponse(format!("no verdict for {}", r.ut)),
                    });
                }
            }
            if let Some(c) = ckpt.as_mut() {
                c.append(&entries)?;
            }
            for e in entries {
                if let Some(resp) = e.response {
                    unresolved.push(Unmappable {
                        ut: e.ut.clone(),
                        response: resp,
                    });
                }
                tags.insert(e.ut, e.stage);
            }
            done += part.len();
            log::debug!("classified {done}/{} remaining records", remainder.len());
        }
    }

    unresolved.sort_by(|a, b| a.ut.cmp(&b.ut));
    unresolved.dedup_by(|a, b| a.ut == b.ut);
    Ok(AdmissionLedger::from_tags(tags, unresolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{Label, ReplayClassifier};

    fn rec(ut: &str, title: &str, topic: Option<&str>, cat: &str) -> Record {
        Record {
            ut: ut.into(),
            title: title.into(),
            citation_topic: topic.map(str::to_string),
            categories: if cat.is_empty() { vec![] } else { vec![cat.into()] },
            ..Default::default()
        }
    }

    fn stages() -> StageDefs {
        StageDefs {
            citation_topic: Strategy::parse("ct", "[t]\nCT=(\"4.61\")").unwrap(),
            core_lexical: Strategy::parse("lex", "[l]\nTS=(\"deep learning\")").unwrap(),
            category: Strategy::parse("cat", "[c]\nWC=(\"Artificial Intelligence\")").unwrap(),
        }
    }

    fn corpus() -> Vec<Record> {
        vec![
            rec("W1", "deep learning", Some("4.61.1"), ""),
            rec("W2", "deep learning", None, ""),
            rec("W3", "fuzzy", None, "Computer Science, Artificial Intelligence"),
            rec("W4", "robots", None, ""),
            rec("W5", "oil", None, ""),
        ]
    }

    fn replay() -> ReplayClassifier {
        ReplayClassifier::from_labels([
            ("W4".to_string(), Label::Ai),
            ("W5".to_string(), Label::Other),
        ])
    }

    #[test]
    fn first_stage_wins_and_classifier_sees_remainder() {
        let l = run_pipeline(&corpus(), &stages(), Some(&replay()), &RunOptions::default()).unwrap();
        let got: Vec<(&str, StageTag)> = l.tags().iter().map(|(u, t)| (u.as_str(), *t)).collect();
        assert_eq!(
            got,
            vec![
                ("W1", StageTag::CitationTopic),
                ("W2", StageTag::CoreLexical),
                ("W3", StageTag::Category),
                ("W4", StageTag::Classifier),
                ("W5", StageTag::Rejected),
            ]
        );
        assert_eq!(l.final_size(), 4);
        assert!(validate_ledger(&l, &corpus(), &stages()).is_empty());
    }

    #[test]
    fn empty_initial_refused() {
        assert!(matches!(
            run_pipeline(&[], &stages(), None, &RunOptions::default()),
            Err(PipelineError::EmptyInitial)
        ));
    }

    #[test]
    fn missing_classifier_aborts_stage_four() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            checkpoint: Some(dir.path().join("ck")),
            ..Default::default()
        };
        match run_pipeline(&corpus(), &stages(), None, &opts) {
            Err(PipelineError::ClassifierUnavailable {
                committed: 3,
                pending: 2,
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
        let text = std::fs::read_to_string(dir.path().join("ck")).unwrap();
        assert_eq!(text.lines().count(), 4, "{text}");
    }

    struct Flaky {
        inner: ReplayClassifier,
        fail_after: std::sync::atomic::AtomicUsize,
    }

    impl Classifier for Flaky {
        fn kind(&self) -> crate::classifier::BackendKind {
            self.inner.kind()
        }
        fn identity(&self) -> String {
            self.inner.identity()
        }
        fn classify(&self, records: &[Record]) -> Result<crate::classifier::ClassifyOutput, ClassifyError> {
            let left = self.fail_after.load(std::sync::atomic::Ordering::SeqCst);
            if left == 0 {
                return Err(ClassifyError::Unavailable("down".into()));
            }
            self.fail_after.store(left - 1, std::sync::atomic::Ordering::SeqCst);
            self.inner.classify(records)
        }
    }

    #[test]
    fn resume_after_failure_matches_clean_run() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            batch_size: 1,
            checkpoint: Some(dir.path().join("ck")),
            workers: 2,
        };
        let flaky = Flaky {
            inner: replay(),
            fail_after: 1.into(),
        };
        assert!(run_pipeline(&corpus(), &stages(), Some(&flaky), &opts).is_err());
        let resumed = run_pipeline(&corpus(), &stages(), Some(&replay()), &opts).unwrap();
        let clean = run_pipeline(&corpus(), &stages(), Some(&replay()), &RunOptions::default()).unwrap();
        assert_eq!(resumed, clean);
    }

    #[test]
    fn checksum_mismatch_on_changed_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            checkpoint: Some(dir.path().join("ck")),
            ..Default::default()
        };
        run_pipeline(&corpus(), &stages(), Some(&replay()), &opts).unwrap();
        let fewer = &corpus()[..4];
        assert!(matches!(
            run_pipeline(fewer, &stages(), Some(&replay()), &opts),
            Err(PipelineError::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn unmappable_goes_to_rejected_and_unresolved() {
        let clf = ReplayClassifier::from_pairs([
            ("W4".to_string(), "ai".to_string()),
            ("W5".to_string(), "dunno".to_string()),
        ]);
        let l = run_pipeline(&corpus(), &stages(), Some(&clf), &RunOptions::default()).unwrap();
        assert_eq!(l.tag("W5"), Some(StageTag::Rejected));
        assert_eq!(l.unresolved().len(), 1);
        assert_eq!(l.unresolved()[0].response, "dunno");
    }

    #[test]
    fn workers_and_batches_do_not_change_ledger() {
        let base = run_pipeline(&corpus(), &stages(), Some(&replay()), &RunOptions::default()).unwrap();
        for (w, b) in [(1, 1), (8, 2), (3, 100)] {
            let o = RunOptions {
                workers: w,
                batch_size: b,
                checkpoint: None,
            };
            assert_eq!(run_pipeline(&corpus(), &stages(), Some(&replay()), &o).unwrap(), base);
        }
    }
}
