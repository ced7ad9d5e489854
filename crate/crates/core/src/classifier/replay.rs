//! Cached verdicts and responses keyed by record id.

use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{
    BackendKind, Classifier, ClassifyError, ClassifyOutput, Completer, Label, Unmappable, Verdict,
};
use crate::record::Record;

fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, ClassifyError> {
    let load_err = |message: String| ClassifyError::Load {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| load_err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| load_err(e.to_string()))?;
        if row.len() < 2 {
            return Err(load_err(format!("row {}: expected 2 columns", i + 1)));
        }
        let (ut, value) = (row[0].trim(), row[1].to_string());
        if i == 0 && ut.eq_ignore_ascii_case("ut") {
            continue;
        }
        out.push((ut.to_string(), value));
    }
    Ok(out)
}

/// Replays verdicts from a `ut,label` CSV. Cells that are not a label are
/// reported as unmappable, exactly like a bad model reply.
#[derive(Debug, Clone, Default)]
pub struct ReplayClassifier {
    cache: HashMap<String, String>,
    digest: String,
}

impl ReplayClassifier {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut cache: HashMap<String, String> = pairs.into_iter().collect();
        cache.shrink_to_fit();
        let mut keys: Vec<_> = cache.iter().collect();
        keys.sort();
        let mut h = Sha256::new();
        for (k, v) in keys {
            h.update(k.as_bytes());
            h.update(b"\t");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        ReplayClassifier {
            cache,
            digest: hex::encode(h.finalize()),
        }
    }

    pub fn from_labels(pairs: impl IntoIterator<Item = (String, Label)>) -> Self {
        Self::from_pairs(pairs.into_iter().map(|(u, l)| (u, l.as_str().to_string())))
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        Ok(Self::from_pairs(read_pairs(path)?))
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

impl Classifier for ReplayClassifier {
    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }

    fn identity(&self) -> String {
        format!("replay:{}", self.digest)
    }

    fn classify(&self, records: &[Record]) -> Result<ClassifyOutput, ClassifyError> {
        let mut out = ClassifyOutput::default();
        for r in records {
            let raw = self
                .cache
                .get(&r.ut)
                .ok_or_else(|| ClassifyError::ReplayMiss { ut: r.ut.clone() })?;
            match Label::from_response(raw) {
                Some(label) => out.verdicts.push(Verdict {
                    ut: r.ut.clone(),
                    label,
                    score: None,
                    backend: BackendKind::Replay,
                }),
                None => out.unmappable.push(Unmappable {
                    ut: r.ut.clone(),
                    response: raw.clone(),
                }),
            }
        }
        Ok(out)
    }
}

/// Replays free-text replies from a `ut,response` CSV.
#[derive(Debug, Clone, Default)]
pub struct ReplayResponses {
    cache: HashMap<String, String>,
}

impl ReplayResponses {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        ReplayResponses {
            cache: pairs.into_iter().collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        Ok(Self::from_pairs(read_pairs(path)?))
    }
}

impl Completer for ReplayResponses {
    fn complete(&self, items: &[(String, String)]) -> Vec<Result<String, ClassifyError>> {
        items
            .iter()
            .map(|(ut, _)| {
                self.cache
                    .get(ut)
                    .cloned()
                    .ok_or_else(|| ClassifyError::ReplayMiss { ut: ut.clone() })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ut: &str) -> Record {
        Record::new(ut)
    }

    #[test]
    fn lookup_and_miss() {
        let c = ReplayClassifier::from_labels([("W1".to_string(), Label::Ai)]);
        let out = c.classify(&[rec("W1")]).unwrap();
        assert_eq!(
            out.verdicts,
            vec![Verdict {
                ut: "W1".into(),
                label: Label::Ai,
                score: None,
                backend: BackendKind::Replay
            }]
        );
        assert!(matches!(
            c.classify(&[rec("W2")]),
            Err(ClassifyError::ReplayMiss { ut }) if ut == "W2"
        ));
    }

    #[test]
    fn load_csv_with_header_and_unmappable() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        std::fs::write(&p, "ut,label\nW1, AI\nW2,other\nW3,unsure\n").unwrap();
        let c = ReplayClassifier::load(&p).unwrap();
        assert_eq!(c.len(), 3);
        let out = c.classify(&[rec("W1"), rec("W2"), rec("W3")]).unwrap();
        assert_eq!(out.verdicts.len(), 2);
        assert_eq!(out.unmappable[0].ut, "W3");
        assert_eq!(c.identity(), ReplayClassifier::load(&p).unwrap().identity());
    }
}
