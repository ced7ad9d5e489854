//! Binary AI/other classification: training data, the review loop and three
//! interchangeable backends (external HTTP model, local naive Bayes, replay
//! cache).

mod external;
mod local;
mod replay;
mod review;
mod training;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{
    ExternalClassifier, ExternalClient, HttpResponse, RequestShape, RetryPolicy, Transport,
    UreqTransport,
};
pub use local::{LocalClassifier, NaiveBayes};
pub use replay::{ReplayClassifier, ReplayResponses};
pub use review::{augment, jaccard, review_round, sample_for_review, ReviewError};
pub use training::{
    export_training, format_training_jsonl, import_training, parse_training_jsonl,
    LabeledExample, Origin, TrainingError, TrainingSet,
};

use crate::record::Record;

/// Appended to every prompt sent to a model or written to training data.
pub const PROMPT_SEPARATOR: &str = "\n\n###\n\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Ai,
    Other,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Ai => "ai",
            Label::Other => "other",
        }
    }

    /// Exact match against `ai` / `other` after trimming and case folding.
    pub fn from_response(text: &str) -> Option<Label> {
        match text.trim().to_lowercase().as_str() {
            "ai" => Some(Label::Ai),
            "other" => Some(Label::Other),
            _ => None,
        }
    }

    pub fn completion(self) -> String {
        format!(" {}", self.as_str())
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Label::from_response(s).ok_or_else(|| format!("invalid label {s:?} (expected ai or other)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    External,
    Local,
    Replay,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::External => "external",
            BackendKind::Local => "local",
            BackendKind::Replay => "replay",
        }
    }
}

/// What part of a record is shown to the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    #[default]
    Title,
    TitleAbstractKeywords,
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Prompt text for a record, without the separator.
pub fn prompt_text(r: &Record, style: PromptStyle) -> String {
    match style {
        PromptStyle::Title => squash(&r.title),
        PromptStyle::TitleAbstractKeywords => {
            let mut s = squash(&r.title);
            if !r.abstract_text.is_empty() {
                s.push('\n');
                s.push_str(&squash(&r.abstract_text));
            }
            let kws: Vec<&str> = r
                .author_keywords
                .iter()
                .chain(&r.keywords_plus)
                .map(String::as_str)
                .collect();
            if !kws.is_empty() {
                s.push_str("\nKeywords: ");
                s.push_str(&squash(&kws.join("; ")));
            }
            s
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub ut: String,
    pub label: Label,
    /// Positive-class posterior; always present for the local backend.
    pub score: Option<f64>,
    pub backend: BackendKind,
}

/// A model reply that is neither `ai` nor `other`. Never coerced to a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unmappable {
    pub ut: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifyOutput {
    pub verdicts: Vec<Verdict>,
    pub unmappable: Vec<Unmappable>,
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("classifier unavailable: {0}")]
    Unavailable(String),
    #[error("HTTP request failed after {attempts} attempt(s): {message}")]
    Http {
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    #[error("malformed model response: {0}")]
    BadResponse(String),
    #[error("no cached verdict for {ut}")]
    ReplayMiss { ut: String },
    #[error("invalid classifier configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error(transparent)]
    Training(#[from] TrainingError),
}

/// A backend that labels records as AI-related or other.
pub trait Classifier: Send + Sync {
    fn kind(&self) -> BackendKind;

    /// Stable description of the backend's behavior, used in checkpoints.
    fn identity(&self) -> String;

    fn classify(&self, records: &[Record]) -> Result<ClassifyOutput, ClassifyError>;
}

/// A backend that returns free-text replies, used for subfield labeling.
pub trait Completer: Send + Sync {
    fn complete(&self, items: &[(String, String)]) -> Vec<Result<String, ClassifyError>>;
}

fn default_rate() -> f64 {
    3.0
}

fn default_in_flight() -> usize {
    4
}

/// Classifier configuration as written in a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierRef {
    pub kind: BackendKind,
    /// Fine-tuned model id for the external backend.
    #[serde(default)]
    pub model: Option<String>,
    /// Training JSONL (local) or `ut,label` CSV (replay).
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub request_shape: RequestShape,
    #[serde(default)]
    pub prompt_style: PromptStyle,
    #[serde(default = "default_rate")]
    pub rate_limit_per_sec: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl ClassifierRef {
    pub fn new(kind: BackendKind) -> Self {
        ClassifierRef {
            kind,
            model: None,
            path: None,
            endpoint: None,
            credential_env: None,
            request_shape: RequestShape::default(),
            prompt_style: PromptStyle::default(),
            rate_limit_per_sec: default_rate(),
            max_in_flight: default_in_flight(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let missing = |what: &str| {
            Err(ClassifyError::Config(format!(
                "{} backend requires `{what}`",
                self.kind.as_str()
            )))
        };
        match self.kind {
            BackendKind::External => {
                if self.endpoint.is_none() {
                    return missing("endpoint");
                }
                if self.credential_env.is_none() {
                    return missing("credential_env");
                }
                if self.model.is_none() {
                    return missing("model");
                }
            }
            BackendKind::Local | BackendKind::Replay => {
                if self.path.is_none() {
                    return missing("path");
                }
            }
        }
        if self.max_in_flight == 0 {
            return Err(ClassifyError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    fn resolve(&self, base: Option<&Path>) -> Option<PathBuf> {
        self.path.as_ref().map(|p| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.clone(),
        })
    }

    /// Constructs the backend. Relative paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Box<dyn Classifier>, ClassifyError> {
        self.validate()?;
        Ok(match self.kind {
            BackendKind::Replay => {
                Box::new(ReplayClassifier::load(&self.resolve(base).expect("validated"))?)
            }
            BackendKind::Local => {
                let ts = TrainingSet::load_any(&self.resolve(base).expect("validated"))?;
                Box::new(LocalClassifier::new(NaiveBayes::train(&ts)?, self.prompt_style))
            }
            BackendKind::External => Box::new(ExternalClassifier::new(
                ExternalClient::from_ref(self, Box::new(UreqTransport::new()))?,
                self.prompt_style,
            )),
        })
    }

    /// Constructs a free-text backend for subfield labeling.
    pub fn build_completer(&self, base: Option<&Path>) -> Result<Box<dyn Completer>, ClassifyError> {
        self.validate()?;
        match self.kind {
            BackendKind::Replay => Ok(Box::new(ReplayResponses::load(
                &self.resolve(base).expect("validated"),
            )?)),
            BackendKind::External => Ok(Box::new(ExternalClient::from_ref(
                self,
                Box::new(UreqTransport::new()),
            )?)),
            BackendKind::Local => Err(ClassifyError::Config(
                "subfield labeling needs an external or replay backend".into(),
            )),
        }
    }
}

pub(crate) fn backoff_delay(policy: &RetryPolicy, attempt: u32) -> Duration {
    let ms = policy.base_delay_ms as f64 * policy.factor.powi(attempt as i32 - 1);
    Duration::from_millis(ms.round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn response_mapping() {
        assert_eq!(Label::from_response(" AI\n"), Some(Label::Ai));
        assert_eq!(Label::from_response("Other"), Some(Label::Other));
        assert_eq!(Label::from_response("ai-related"), None);
        assert_eq!(Label::from_response(""), None);
    }

    #[test]
    fn prompt_styles() {
        let r = Record {
            ut: "W".into(),
            title: "Deep  nets".into(),
            abstract_text: "We train.".into(),
            author_keywords: vec!["cnn".into()],
            ..Default::default()
        };
        assert_eq!(prompt_text(&r, PromptStyle::Title), "Deep nets");
        assert_eq!(
            prompt_text(&r, PromptStyle::TitleAbstractKeywords),
            "Deep nets\nWe train.\nKeywords: cnn"
        );
    }

    #[test]
    fn ref_validation() {
        let mut r = ClassifierRef::new(BackendKind::External);
        assert!(r.validate().is_err());
        r.endpoint = Some("http://x".into());
        r.credential_env = Some("KEY".into());
        assert!(r.validate().is_err());
        r.model = Some("ada:ft".into());
        assert!(r.validate().is_ok());
        assert!(ClassifierRef::new(BackendKind::Replay).validate().is_err());
    }

    #[test]
    fn ref_from_toml() {
        let r: ClassifierRef = toml::from_str(
            "kind = \"external\"\nmodel = \"m\"\nendpoint = \"http://h/v1/chat/completions\"\ncredential_env = \"K\"\nrequest_shape = \"completion\"\n[retry]\nmax_tries = 3\n",
        )
        .unwrap();
        assert_eq!(r.request_shape, RequestShape::Completion);
        assert_eq!(r.retry.max_tries, 3);
        assert_eq!(r.retry.base_delay_ms, 1000);
        assert_eq!(r.max_in_flight, 4);
    }

    #[test]
    fn backoff_schedule() {
        let p = RetryPolicy::default();
        let d: Vec<u64> = (1..5).map(|a| backoff_delay(&p, a).as_millis() as u64).collect();
        assert_eq!(d, vec![1000, 2000, 4000, 8000]);
    }
}
