//! Admission ledger, its on-disk forms and the consistency validator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{StageDefs, StageTag};
use crate::classifier::Unmappable;
use crate::query::NormalizedRecord;
use crate::record::Record;

/// Stage totals without per-record tags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub initial_size: u64,
    pub final_size: u64,
    pub stage_counts: BTreeMap<StageTag, u64>,
}

impl LedgerSummary {
    pub fn count(&self, tag: StageTag) -> u64 {
        self.stage_counts.get(&tag).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdmissionLedger {
    tags: BTreeMap<String, StageTag>,
    summary: LedgerSummary,
    unresolved: Vec<Unmappable>,
}

fn tally(tags: &BTreeMap<String, StageTag>) -> BTreeMap<StageTag, u64> {
    let mut counts: BTreeMap<StageTag, u64> = StageTag::ALL.iter().map(|t| (*t, 0)).collect();
    for t in tags.values() {
        *counts.get_mut(t).expect("all tags present") += 1;
    }
    counts
}

impl AdmissionLedger {
    /// Builds a ledger whose totals are computed from the tags.
    pub fn from_tags(tags: BTreeMap<String, StageTag>, unresolved: Vec<Unmappable>) -> Self {
        let stage_counts = tally(&tags);
        let final_size = tags.values().filter(|t| t.is_admitting()).count() as u64;
        AdmissionLedger {
            summary: LedgerSummary {
                initial_size: tags.len() as u64,
                final_size,
                stage_counts,
            },
            tags,
            unresolved,
        }
    }

    /// Builds a ledger from separately stored tags and totals, which may
    /// disagree; [`validate_ledger`] reports any disagreement.
    pub fn from_parts(
        tags: BTreeMap<String, StageTag>,
        summary: LedgerSummary,
        unresolved: Vec<Unmappable>,
    ) -> Self {
        AdmissionLedger {
            tags,
            summary,
            unresolved,
        }
    }

    pub fn tags(&self) -> &BTreeMap<String, StageTag> {
        &self.tags
    }

    pub fn tag(&self, ut: &str) -> Option<StageTag> {
        self.tags.get(ut).copied()
    }

    pub fn summary(&self) -> &LedgerSummary {
        &self.summary
    }

    pub fn initial_size(&self) -> u64 {
        self.summary.initial_size
    }

    pub fn final_size(&self) -> u64 {
        self.summary.final_size
    }

    pub fn stage_count(&self, tag: StageTag) -> u64 {
        self.summary.count(tag)
    }

    /// Records whose classifier reply could not be mapped to a label.
    pub fn unresolved(&self) -> &[Unmappable] {
        &self.unresolved
    }

    pub fn members(&self, tag: StageTag) -> BTreeSet<&str> {
        self.tags
            .iter()
            .filter(|(_, t)| **t == tag)
            .map(|(u, _)| u.as_str())
            .collect()
    }

    /// Uts of the final corpus.
    pub fn admitted(&self) -> BTreeSet<&str> {
        self.tags
            .iter()
            .filter(|(_, t)| t.is_admitting())
            .map(|(u, _)| u.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    SumMismatch { sum: u64, final_size: u64 },
    InitialMismatch { final_size: u64, rejected: u64, initial_size: u64 },
    CountMismatch { stage: StageTag, recorded: u64, actual: u64 },
    PrecedenceViolation { ut: String, tagged: StageTag, earlier: StageTag },
    CriterionNotMet { ut: String, stage: StageTag },
    UnknownUt { ut: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SumMismatch { sum, final_size } => {
                write!(f, "admitting stage counts sum to {sum}, final size is {final_size}")
            }
            Violation::InitialMismatch { final_size, rejected, initial_size } => write!(
                f,
                "final {final_size} + rejected {rejected} != initial {initial_size}"
            ),
            Violation::CountMismatch { stage, recorded, actual } => {
                write!(f, "{stage}: recorded {recorded}, tagged {actual}")
            }
            Violation::PrecedenceViolation { ut, tagged, earlier } => {
                write!(f, "{ut}: tagged {tagged} but matches earlier stage {earlier}")
            }
            Violation::CriterionNotMet { ut, stage } => {
                write!(f, "{ut}: tagged {stage} but does not match it")
            }
            Violation::UnknownUt { ut } => write!(f, "{ut}: not in the corpus"),
        }
    }
}

/// Arithmetic checks on stage totals alone.
pub fn validate_summary(s: &LedgerSummary) -> Vec<Violation> {
    let mut out = Vec::new();
    let sum: u64 = StageTag::ADMITTING.iter().map(|t| s.count(*t)).sum();
    if sum != s.final_size {
        out.push(Violation::SumMismatch {
            sum,
            final_size: s.final_size,
        });
    }
    let rejected = s.count(StageTag::Rejected);
    if s.final_size + rejected != s.initial_size {
        out.push(Violation::InitialMismatch {
            final_size: s.final_size,
            rejected,
            initial_size: s.initial_size,
        });
    }
    out
}

/// Full check: totals, totals against tags, ut existence, and stage
/// precedence re-evaluated against `records`.
pub fn validate_ledger(
    ledger: &AdmissionLedger,
    records: &[Record],
    stages: &StageDefs,
) -> Vec<Violation> {
    let mut out = validate_summary(ledger.summary());
    let actual = tally(ledger.tags());
    for t in StageTag::ALL {
        let (recorded, actual) = (ledger.stage_count(t), actual[&t]);
        if recorded != actual {
            out.push(Violation::CountMismatch {
                stage: t,
                recorded,
                actual,
            });
        }
    }
    let by_ut: HashMap<&str, &Record> = records.iter().map(|r| (r.ut.as_str(), r)).collect();
    for (ut, tag) in ledger.tags() {
        let Some(r) = by_ut.get(ut.as_str()) else {
            out.push(Violation::UnknownUt { ut: ut.clone() });
            continue;
        };
        let matching = stages.matching(&NormalizedRecord::new(r));
        if let Some(&earlier) = matching.first() {
            if earlier < *tag {
                out.push(Violation::PrecedenceViolation {
                    ut: ut.clone(),
                    tagged: *tag,
                    earlier,
                });
                continue;
            }
        }
        if *tag < StageTag::Classifier && !matching.contains(tag) {
            out.push(Violation::CriterionNotMet {
                ut: ut.clone(),
                stage: *tag,
            });
        }
    }
    out
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn write_ledger_csv(ledger: &AdmissionLedger) -> String {
    let mut s = String::from("ut,stage\n");
    for (ut, t) in ledger.tags() {
        s.push_str(ut);
        s.push(',');
        s.push_str(t.as_str());
        s.push('\n');
    }
    s
}

pub fn parse_ledger_csv(text: &str) -> Result<BTreeMap<String, StageTag>, String> {
    let mut out = BTreeMap::new();
    for (n, line) in data_lines(text) {
        if line == "ut,stage" {
            continue;
        }
        let (ut, stage) = line
            .split_once(',')
            .ok_or_else(|| format!("line {n}: expected ut,stage"))?;
        let tag = StageTag::parse(stage).ok_or_else(|| format!("line {n}: unknown stage {stage:?}"))?;
        if out.insert(ut.trim().to_string(), tag).is_some() {
            return Err(format!("line {n}: duplicate ut {ut}"));
        }
    }
    Ok(out)
}

pub fn write_summary(s: &LedgerSummary) -> String {
    let mut out = format!("initial_size={}\n", s.initial_size);
    for t in StageTag::ALL {
        out.push_str(&format!("{}={}\n", t.as_str(), s.count(t)));
    }
    out.push_str(&format!("final_size={}\n", s.final_size));
    out
}

pub fn parse_summary(text: &str) -> Result<LedgerSummary, String> {
    let mut s = LedgerSummary::default();
    let (mut seen_initial, mut seen_final) = (false, false);
    for (n, line) in data_lines(text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {n}: expected key=value"))?;
        let v: u64 = v
            .trim()
            .replace(['_', ','], "")
            .parse()
            .map_err(|_| format!("line {n}: bad count {v:?}"))?;
        match k.trim() {
            "initial_size" => {
                s.initial_size = v;
                seen_initial = true;
            }
            "final_size" => {
                s.final_size = v;
                seen_final = true;
            }
            other => {
                let t = StageTag::parse(other).ok_or_else(|| format!("line {n}: unknown key {other:?}"))?;
                s.stage_counts.insert(t, v);
            }
        }
    }
    if !seen_initial || !seen_final {
        return Err("summary needs initial_size and final_size".into());
    }
    Ok(s)
}
