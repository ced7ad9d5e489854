//! Subfield labeling through a free-text model and yearly subfield counts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::OnceLock;

use super::{build_trend, Dimension, TrendTable};
use crate::classifier::{ClassifyError, Completer, Unmappable};
use crate::record::Record;

const INSTRUCTION: &str = "Which subfields of artificial intelligence does the following article belong to? Reply only with the subfield names, separated by commas.";

/// Maps model replies to canonical subfield names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubfieldAliases(HashMap<String, String>);

impl SubfieldAliases {
    /// Reads `alias,canonical` rows; a header row and `#` lines are skipped.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "alias,canonical" {
                continue;
            }
            let (a, c) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected alias,canonical", i + 1))?;
            m.insert(a.trim().to_lowercase(), c.trim().to_lowercase());
        }
        Ok(SubfieldAliases(m))
    }

    pub fn bundled() -> &'static SubfieldAliases {
        static CELL: OnceLock<SubfieldAliases> = OnceLock::new();
        CELL.get_or_init(|| {
            SubfieldAliases::parse(include_str!("../../data/subfield_aliases.csv"))
                .expect("bundled subfield aliases parse")
        })
    }

    pub fn canonical(&self, label: &str) -> Option<&str> {
        self.0.get(label).map(String::as_str)
    }
}

/// Prompt text for one record, without the separator.
pub fn subfield_prompt(r: &Record) -> String {
    let squash = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut p = format!("{INSTRUCTION}\nTitle: {}", squash(&r.title));
    if !r.abstract_text.trim().is_empty() {
        p.push_str("\nAbstract: ");
        p.push_str(&squash(&r.abstract_text));
    }
    p
}

/// Splits a reply on commas and newlines, normalizes each label and maps it
/// through the alias table. Returns the labels (deduplicated, in reply
/// order) and the labels the table did not know, which are kept verbatim.
pub fn parse_subfield_response(text: &str, aliases: &SubfieldAliases) -> (Vec<String>, Vec<String>) {
    let mut labels = Vec::new();
    let mut unknown = Vec::new();
    for part in text.split([',', '\n', ';']) {
        let l = part
            .trim()
            .trim_start_matches(['-', '*', '•'])
            .trim()
            .trim_end_matches('.')
            .trim()
            .to_lowercase();
        if l.is_empty() {
            continue;
        }
        let canon = match aliases.canonical(&l) {
            Some(c) => c.to_string(),
            None => {
                unknown.push(l.clone());
                l
            }
        };
        if !labels.contains(&canon) {
            labels.push(canon);
        }
    }
    (labels, unknown)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubfieldLabels {
    pub labels: BTreeMap<String, Vec<String>>,
    /// Records whose reply yielded no label.
    pub unresolved: Vec<Unmappable>,
    /// Labels missing from the alias table, with their frequency.
    pub unknown: BTreeMap<String, u64>,
}

pub fn label_subfields(
    records: &[Record],
    completer: &dyn Completer,
    aliases: &SubfieldAliases,
) -> Result<SubfieldLabels, ClassifyError> {
    let items: Vec<(String, String)> = records
        .iter()
        .map(|r| (r.ut.clone(), subfield_prompt(r)))
        .collect();
    let mut out = SubfieldLabels::default();
    for ((ut, _), reply) in items.iter().zip(completer.complete(&items)) {
        let reply = reply?;
        let (labels, unknown) = parse_subfield_response(&reply, aliases);
        for u in unknown {
            log::info!("{ut}: subfield {u:?} is not in the alias table");
            *out.unknown.entry(u).or_insert(0) += 1;
        }
        if labels.is_empty() {
            out.unresolved.push(Unmappable {
                ut: ut.clone(),
                response: reply,
            });
        } else {
            out.labels.insert(ut.clone(), labels);
        }
    }
    Ok(out)
}

/// Yearly counts per subfield, each record credited to each of its labels.
/// Labeled uts absent from `records` or without a year are skipped.
pub fn subfield_trend(labels: &BTreeMap<String, Vec<String>>, records: &[Record]) -> TrendTable {
    let years: HashMap<&str, i32> = records
        .iter()
        .filter_map(|r| r.year.map(|y| (r.ut.as_str(), y)))
        .collect();
    build_trend(
        Dimension::Subfield,
        labels.iter().filter_map(|(ut, ls)| {
            years
                .get(ut.as_str())
                .map(|y| (*y, ls.iter().cloned().collect::<BTreeSet<_>>()))
        }),
    )
}
