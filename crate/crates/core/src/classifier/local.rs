//! Multinomial naive Bayes over normalized prompt tokens.

use std::collections::BTreeMap;

use super::{
    prompt_text, BackendKind, Classifier, ClassifyError, ClassifyOutput, Label, PromptStyle,
    TrainingError, TrainingSet, Verdict,
};
use crate::query::tokenize;
use crate::record::Record;

const AI: usize = 0;
const OTHER: usize = 1;

fn idx(l: Label) -> usize {
    match l {
        Label::Ai => AI,
        Label::Other => OTHER,
    }
}

/// Add-one smoothed multinomial naive Bayes. Tokens never seen in training
/// are ignored at prediction time.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayes {
    counts: BTreeMap<String, [u64; 2]>,
    docs: [u64; 2],
    tokens: [u64; 2],
}

impl NaiveBayes {
    pub fn train(ts: &TrainingSet) -> Result<Self, TrainingError> {
        if ts.is_empty() {
            return Err(TrainingError::EmptyTrainingSet);
        }
        if ts.positive_count() == 0 || ts.negative_count() == 0 {
            return Err(TrainingError::SingleClassTrainingSet);
        }
        let mut nb = NaiveBayes {
            counts: BTreeMap::new(),
            docs: [0; 2],
            tokens: [0; 2],
        };
        for e in ts.examples() {
            let c = idx(e.label);
            nb.docs[c] += 1;
            for t in tokenize(&e.prompt) {
                nb.counts.entry(t).or_insert([0; 2])[c] += 1;
                nb.tokens[c] += 1;
            }
        }
        Ok(nb)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len()
    }

    /// Unnormalized log joint probabilities `[ai, other]`.
    pub fn log_joint(&self, text: &str) -> [f64; 2] {
        let total = (self.docs[AI] + self.docs[OTHER]) as f64;
        let v = self.counts.len() as f64;
        let mut lp = [
            (self.docs[AI] as f64 / total).ln(),
            (self.docs[OTHER] as f64 / total).ln(),
        ];
        for t in tokenize(text) {
            if let Some(n) = self.counts.get(&t) {
                for c in [AI, OTHER] {
                    lp[c] += ((n[c] + 1) as f64 / (self.tokens[c] as f64 + v)).ln();
                }
            }
        }
        lp
    }

    /// Posterior probability of the `ai` class.
    pub fn posterior_ai(&self, text: &str) -> f64 {
        let [a, o] = self.log_joint(text);
        1.0 / (1.0 + (o - a).exp())
    }

    pub fn predict(&self, text: &str) -> (Label, f64) {
        let [a, o] = self.log_joint(text);
        let label = if a > o { Label::Ai } else { Label::Other };
        (label, 1.0 / (1.0 + (o - a).exp()))
    }
}

#[derive(Debug, Clone)]
pub struct LocalClassifier {
    model: NaiveBayes,
    style: PromptStyle,
}

impl LocalClassifier {
    pub fn new(model: NaiveBayes, style: PromptStyle) -> Self {
        LocalClassifier { model, style }
    }

    pub fn model(&self) -> &NaiveBayes {
        &self.model
    }
}

impl Classifier for LocalClassifier {
    fn kind(&self) -> BackendKind {
        BackendKind::Local
    }

    fn identity(&self) -> String {
        format!(
            "local:nb:docs={}/{}:tokens={}/{}:vocab={}:{:?}",
            self.model.docs[AI],
            self.model.docs[OTHER],
            self.model.tokens[AI],
            self.model.tokens[OTHER],
            self.model.counts.len(),
            self.style
        )
    }

    fn classify(&self, records: &[Record]) -> Result<ClassifyOutput, ClassifyError> {
        let verdicts = records
            .iter()
            .map(|r| {
                let (label, score) = self.model.predict(&prompt_text(r, self.style));
                Verdict {
                    ut: r.ut.clone(),
                    label,
                    score: Some(score),
                    backend: BackendKind::Local,
                }
            })
            .collect();
        Ok(ClassifyOutput {
            verdicts,
            unmappable: Vec::new(),
        })
    }
}
