//! Precision/recall against expert labels, corpus recall estimates and
//! strategy overlap counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Label;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold label set is empty")]
    EmptyGold,
    #[error("sample contains no relevant records")]
    NoRelevantInSample,
    #[error("venn needs 2 or 3 sets, got {0}")]
    BadSetCount(usize),
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjudication {
    Unanimous,
    Majority,
    FullTextReview,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLabel {
    pub ut: String,
    pub label: Label,
    pub adjudication: Adjudication,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpertLabel {
    pub ut: String,
    pub expert_id: String,
    pub label: Label,
}

/// Reads `ut,expert_id,label` rows. A header row and `#` lines are skipped.
pub fn parse_gold_csv(text: &str) -> Result<Vec<ExpertLabel>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(EvalError::Csv {
                line: i + 1,
                message: "expected ut,expert_id,label".into(),
            });
        }
        if cols[0].eq_ignore_ascii_case("ut") && out.is_empty() {
            continue;
        }
        let label = Label::from_response(cols[2]).ok_or_else(|| EvalError::Csv {
            line: i + 1,
            message: format!("unknown label {:?}", cols[2]),
        })?;
        out.push(ExpertLabel {
            ut: cols[0].to_string(),
            expert_id: cols[1].to_string(),
            label,
        });
    }
    Ok(out)
}

/// Adjudicated labels plus the records that cannot be scored yet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjudicated {
    pub gold: Vec<GoldLabel>,
    /// Ties still waiting for a full-text resolution.
    pub pending: Vec<String>,
    /// Records labeled by fewer than two experts.
    pub insufficient: Vec<String>,
}

/// Unanimous or majority vote per record. Exact ties need an entry in
/// `resolutions`; until then they are listed as pending and left out of
/// `gold`. A repeated (ut, expert) keeps the later label.
pub fn adjudicate(labels: &[ExpertLabel], resolutions: &BTreeMap<String, Label>) -> Adjudicated {
    let mut by_ut: BTreeMap<&str, BTreeMap<&str, Label>> = BTreeMap::new();
    for l in labels {
        by_ut
            .entry(&l.ut)
            .or_default()
            .insert(&l.expert_id, l.label);
    }
    let mut out = Adjudicated::default();
    for (ut, votes) in by_ut {
        if votes.len() < 2 {
            out.insufficient.push(ut.to_string());
            continue;
        }
        let ai = votes.values().filter(|l| **l == Label::Ai).count();
        let other = votes.len() - ai;
        let (label, adjudication) = if ai == 0 || other == 0 {
            (if ai > 0 { Label::Ai } else { Label::Other }, Adjudication::Unanimous)
        } else if ai != other {
            (if ai > other { Label::Ai } else { Label::Other }, Adjudication::Majority)
        } else {
            match resolutions.get(ut) {
                Some(l) => (*l, Adjudication::FullTextReview),
                None => {
                    out.pending.push(ut.to_string());
                    continue;
                }
            }
        };
        out.gold.push(GoldLabel {
            ut: ut.to_string(),
            label,
            adjudication,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(a: u64, b: u64) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

impl EvalReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        EvalReport {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
        }
    }

    /// `metric,value` rows; undefined ratios are left blank.
    pub fn to_csv(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        format!(
            "metric,value\ntp,{}\nfp,{}\nfn,{}\ntn,{}\nprecision,{}\nrecall,{}\nf1,{}\n",
            self.tp,
            self.fp,
            self.fn_,
            self.tn,
            f(self.precision),
            f(self.recall),
            f(self.f1)
        )
    }

    pub fn summary(&self) -> String {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into());
        format!(
            "precision {}  recall {}  F1 {}  (tp {}, fp {}, fn {}, tn {})",
            f(self.precision),
            f(self.recall),
            f(self.f1),
            self.tp,
            self.fp,
            self.fn_,
            self.tn
        )
    }
}

/// Confusion counts over the gold records only. A gold `ai` record that is
/// not predicted is a false negative whether or not it was ever a candidate.
pub fn score(predicted: &BTreeSet<String>, gold: &[GoldLabel]) -> Result<EvalReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for g in gold {
        match (predicted.contains(&g.ut), g.label) {
            (true, Label::Ai) => tp += 1,
            (true, Label::Other) => fp += 1,
            (false, Label::Ai) => fn_ += 1,
            (false, Label::Other) => tn += 1,
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_, tn))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallEstimate {
    pub relevant: u64,
    pub captured: u64,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n);
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Share of the sample's relevant records that `member` accepts, with a
/// 95% Wilson interval.
pub fn estimate_corpus_recall(
    sample_gold: &[GoldLabel],
    member: impl Fn(&str) -> bool,
) -> Result<RecallEstimate, EvalError> {
    let relevant: Vec<&GoldLabel> = sample_gold.iter().filter(|g| g.label == Label::Ai).collect();
    if relevant.is_empty() {
        return Err(EvalError::NoRelevantInSample);
    }
    let n = relevant.len() as u64;
    let k = relevant.iter().filter(|g| member(&g.ut)).count() as u64;
    let (ci_low, ci_high) = wilson_interval(k, n, Z_95);
    Ok(RecallEstimate {
        relevant: n,
        captured: k,
        fraction: k as f64 / n as f64,
        ci_low,
        ci_high,
    })
}

/// Sizes of every nonempty region of a 2- or 3-set Venn diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VennCounts {
    pub names: Vec<String>,
    /// Indexed by membership bitmask; entry 0 is unused.
    pub regions: Vec<u64>,
}

impl VennCounts {
    /// Region name: the member set names joined by `&`.
    pub fn region_name(&self, mask: usize) -> String {
        self.names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, n)| n.as_str())
            .collect::<Vec<_>>()
            .join("&")
    }

    /// Size of the region where exactly the named sets contain a record.
    pub fn region(&self, members: &[&str]) -> u64 {
        let mask = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| members.contains(&n.as_str()))
            .fold(0, |m, (i, _)| m | (1 << i));
        self.regions.get(mask).copied().unwrap_or(0)
    }

    pub fn union_size(&self) -> u64 {
        self.regions[1..].iter().sum()
    }

    pub fn set_size(&self, i: usize) -> u64 {
        (1..self.regions.len())
            .filter(|m| m & (1 << i) != 0)
            .map(|m| self.regions[m])
            .sum()
    }

    /// `region,count`, ordered by bitmask.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("region,count\n");
        for m in 1..self.regions.len() {
            s.push_str(&format!("{},{}\n", self.region_name(m), self.regions[m]));
        }
        s
    }
}

pub fn venn<S: AsRef<str> + Ord>(sets: &[(&str, &BTreeSet<S>)]) -> Result<VennCounts, EvalError> {
    let k = sets.len();
    if !(2..=3).contains(&k) {
        return Err(EvalError::BadSetCount(k));
    }
    let mut membership: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, (_, s)) in sets.iter().enumerate() {
        for ut in s.iter() {
            *membership.entry(ut.as_ref()).or_insert(0) |= 1 << i;
        }
    }
    let mut regions = vec![0u64; 1 << k];
    for mask in membership.values() {
        regions[*mask] += 1;
    }
    Ok(VennCounts {
        names: sets.iter().map(|(n, _)| n.to_string()).collect(),
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold(ut: &str, label: Label) -> GoldLabel {
        GoldLabel {
            ut: ut.into(),
            label,
            adjudication: Adjudication::Unanimous,
        }
    }

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn count_arithmetic() {
        let r = EvalReport::from_counts(9, 1, 3, 0);
        assert_eq!(r.precision, Some(0.9));
        assert_eq!(r.recall, Some(0.75));
    }

    #[test]
    fn undefined_ratios_absent() {
        let r = EvalReport::from_counts(0, 0, 0, 5);
        assert_eq!((r.precision, r.recall, r.f1), (None, None, None));
        assert!(r.to_csv().contains("precision,\n"));
        let r = EvalReport::from_counts(0, 2, 2, 0);
        assert_eq!(r.precision, Some(0.0));
        assert_eq!(r.f1, None);
    }

    #[test]
    fn perfect_prediction() {
        let g = vec![gold("a", Label::Ai), gold("b", Label::Other)];
        let r = score(&set(&["a", "zzz"]), &g).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (Some(1.0), Some(1.0), Some(1.0)));
        assert_eq!(score(&set(&[]), &[]), Err(EvalError::EmptyGold));
    }

    #[test]
    fn adjudication_rules() {
        let l = |ut: &str, e: &str, lab| ExpertLabel {
            ut: ut.into(),
            expert_id: e.into(),
            label: lab,
        };
        let labels = vec![
            l("u", "1", Label::Ai),
            l("u", "2", Label::Ai),
            l("m", "1", Label::Ai),
            l("m", "2", Label::Other),
            l("m", "3", Label::Ai),
            l("t", "1", Label::Ai),
            l("t", "2", Label::Other),
            l("s", "1", Label::Ai),
        ];
        let a = adjudicate(&labels, &BTreeMap::new());
        assert_eq!(a.pending, vec!["t"]);
        assert_eq!(a.insufficient, vec!["s"]);
        assert_eq!(a.gold.len(), 2);
        assert_eq!(a.gold[0].adjudication, Adjudication::Majority);
        assert_eq!(a.gold[1].adjudication, Adjudication::Unanimous);
        let a = adjudicate(&labels, &[("t".to_string(), Label::Other)].into());
        assert!(a.pending.is_empty());
        let t = a.gold.iter().find(|g| g.ut == "t").unwrap();
        assert_eq!((t.label, t.adjudication), (Label::Other, Adjudication::FullTextReview));
    }

    #[test]
    fn gold_csv() {
        let rows = parse_gold_csv("ut,expert_id,label\nW1,e1,ai\nW1,e2,Other\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert!(parse_gold_csv("W1,e1\n").is_err());
        assert!(parse_gold_csv("W1,e1,maybe\n").is_err());
    }

    #[test]
    fn wilson_all_captured() {
        let g: Vec<GoldLabel> = (0..20).map(|i| gold(&i.to_string(), Label::Ai)).collect();
        let e = estimate_corpus_recall(&g, |_| true).unwrap();
        assert_eq!((e.fraction, e.ci_high), (1.0, 1.0));
        assert!(e.ci_low < 1.0 && e.ci_low > 0.8);
        assert_eq!(
            estimate_corpus_recall(&[gold("x", Label::Other)], |_| true),
            Err(EvalError::NoRelevantInSample)
        );
    }

    #[test]
    fn wilson_known_value() {
        // 8 of 10: center 0.71693..., interval [0.4902, 0.9433].
        let (lo, hi) = wilson_interval(8, 10, Z_95);
        assert!((lo - 0.490_162).abs() < 1e-5, "{lo}");
        assert!((hi - 0.943_317).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn venn_enumeration() {
        let (a, b, c) = (set(&["1", "2", "3"]), set(&["2", "3", "4"]), set(&["3"]));
        let v = venn(&[("A", &a), ("B", &b), ("C", &c)]).unwrap();
        assert_eq!(v.region(&["A"]), 1);
        assert_eq!(v.region(&["B"]), 1);
        assert_eq!(v.region(&["A", "B"]), 1);
        assert_eq!(v.region(&["A", "B", "C"]), 1);
        assert_eq!(v.region(&["C"]), 0);
        assert_eq!(v.union_size(), 4);
        assert!(v.to_csv().starts_with("region,count\nA,1\nB,1\nA&B,1\nC,0\n"));
        let v = venn(&[("A", &a), ("B", &a)]).unwrap();
        assert_eq!((v.region(&["A"]), v.region(&["B"])), (0, 0));
        assert_eq!(venn(&[("A", &a)]), Err(EvalError::BadSetCount(1)));
    }
}
