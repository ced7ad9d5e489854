//! Labeled examples, the training set, and the prompt/completion JSONL
//! format used for fine-tuning.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Label, PROMPT_SEPARATOR};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set needs at least one example of each label")]
    SingleClassTrainingSet,
    #[error("example prompt is empty")]
    EmptyPrompt,
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Seed,
    ReviewCorrection,
    Augmentation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub ut: Option<String>,
    pub prompt: String,
    pub label: Label,
    pub origin: Origin,
    pub round: u32,
}

impl LabeledExample {
    pub fn seed(prompt: impl Into<String>, label: Label) -> Self {
        LabeledExample {
            ut: None,
            prompt: prompt.into(),
            label,
            origin: Origin::Seed,
            round: 0,
        }
    }

    fn sort_key(&self) -> (u32, &str, Label) {
        (self.round, &self.prompt, self.label)
    }
}

/// Examples kept in canonical order (round, then prompt), without duplicate
/// (prompt, label) pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingSet {
    examples: Vec<LabeledExample>,
    positive_count: usize,
    negative_count: usize,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_examples(examples: impl IntoIterator<Item = LabeledExample>) -> Self {
        let mut ts = TrainingSet::new();
        ts.extend(examples);
        ts
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn negative_count(&self) -> usize {
        self.negative_count
    }

    pub fn positive_share(&self) -> f64 {
        if self.examples.is_empty() {
            0.0
        } else {
            self.positive_count as f64 / self.examples.len() as f64
        }
    }

    pub fn max_round(&self) -> u32 {
        self.examples.iter().map(|e| e.round).max().unwrap_or(0)
    }

    pub fn contains(&self, prompt: &str, label: Label) -> bool {
        self.examples
            .iter()
            .any(|e| e.prompt == prompt && e.label == label)
    }

    pub fn prompts(&self) -> HashSet<&str> {
        self.examples.iter().map(|e| e.prompt.as_str()).collect()
    }

    /// Adds an example unless its (prompt, label) pair is already present or
    /// its prompt is blank. Returns whether it was added.
    pub fn insert(&mut self, ex: LabeledExample) -> bool {
        if ex.prompt.trim().is_empty() || self.contains(&ex.prompt, ex.label) {
            return false;
        }
        let pos = self
            .examples
            .partition_point(|e| e.sort_key() <= ex.sort_key());
        match ex.label {
            Label::Ai => self.positive_count += 1,
            Label::Other => self.negative_count += 1,
        }
        self.examples.insert(pos, ex);
        true
    }

    pub fn extend(&mut self, examples: impl IntoIterator<Item = LabeledExample>) -> usize {
        examples.into_iter().filter(|e| self.insert(e.clone())).count()
    }

    /// Checks the count and uniqueness invariants.
    pub fn check(&self) -> bool {
        let pos = self.examples.iter().filter(|e| e.label == Label::Ai).count();
        let unique: HashSet<_> = self.examples.iter().map(|e| (&e.prompt, e.label)).collect();
        pos == self.positive_count
            && self.positive_count + self.negative_count == self.examples.len()
            && unique.len() == self.examples.len()
            && self.examples.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
    }

    /// Saves every field of every example, one JSON object per line.
    pub fn save(&self, path: &Path) -> Result<(), TrainingError> {
        let mut s = String::new();
        for e in &self.examples {
            s.push_str(&serde_json::to_string(e).expect("example serializes"));
            s.push('\n');
        }
        fs::write(path, s).map_err(|source| TrainingError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TrainingError> {
        let text = read(path)?;
        let mut ts = TrainingSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ex: LabeledExample =
                serde_json::from_str(line).map_err(|e| TrainingError::Malformed {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            ts.insert(ex);
        }
        Ok(ts)
    }

    /// Loads either the full example store or a prompt/completion file.
    pub fn load_any(path: &Path) -> Result<Self, TrainingError> {
        let text = read(path)?;
        let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        if first.contains("\"completion\"") {
            parse_training_jsonl(&text, path)
        } else {
            Self::load(path)
        }
    }
}

fn read(path: &Path) -> Result<String, TrainingError> {
    fs::read_to_string(path).map_err(|source| TrainingError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

/// Fine-tuning lines: `{"prompt": "<text>\n\n###\n\n", "completion": " ai"}`,
/// in canonical example order.
pub fn format_training_jsonl(ts: &TrainingSet) -> Result<String, TrainingError> {
    if ts.is_empty() {
        return Err(TrainingError::EmptyTrainingSet);
    }
    let mut out = String::new();
    for e in ts.examples() {
        out.push_str(&format!(
            "{{\"prompt\": {}, \"completion\": {}}}\n",
            json_str(&format!("{}{}", e.prompt, PROMPT_SEPARATOR)),
            json_str(&e.label.completion())
        ));
    }
    Ok(out)
}

pub fn export_training(ts: &TrainingSet, path: &Path) -> Result<(), TrainingError> {
    let text = format_training_jsonl(ts)?;
    fs::write(path, text).map_err(|source| TrainingError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Deserialize)]
struct PromptCompletion {
    prompt: String,
    completion: String,
}

/// Reads prompt/completion lines back into seed examples (round 0).
pub fn parse_training_jsonl(text: &str, path: &Path) -> Result<TrainingSet, TrainingError> {
    let mut ts = TrainingSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| TrainingError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let pc: PromptCompletion = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let prompt = pc
            .prompt
            .strip_suffix(PROMPT_SEPARATOR)
            .ok_or_else(|| bad("prompt lacks the separator suffix".into()))?;
        let label = Label::from_response(&pc.completion)
            .ok_or_else(|| bad(format!("unknown completion {:?}", pc.completion)))?;
        if prompt.trim().is_empty() {
            return Err(bad("empty prompt".into()));
        }
        ts.insert(LabeledExample::seed(prompt, label));
    }
    Ok(ts)
}

pub fn import_training(path: &Path) -> Result<TrainingSet, TrainingError> {
    parse_training_jsonl(&read(path)?, path)
}
