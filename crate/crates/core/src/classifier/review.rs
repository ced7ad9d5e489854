//! The active-learning loop: sample, compare with human corrections, and
//! grow the training set with similar titles.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    prompt_text, Classifier, ClassifyError, LabeledExample, Label, Origin, PromptStyle,
    TrainingSet,
};
use crate::query::tokenize;
use crate::record::Record;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("cannot sample {n} records from a corpus of {size}")]
    NTooLarge { n: usize, size: usize },
    #[error("correction for {0} which is not in the review sample")]
    UnknownCorrection(String),
    #[error("per_example must be at least 1")]
    ZeroPerExample,
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// Uniform sample without replacement, in shuffled order, reproducible from
/// `seed`.
pub fn sample_for_review(
    corpus: &[Record],
    n: usize,
    seed: u64,
) -> Result<Vec<Record>, ReviewError> {
    if n > corpus.len() {
        return Err(ReviewError::NTooLarge {
            n,
            size: corpus.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, corpus.len(), n)
        .into_iter()
        .map(|i| corpus[i].clone())
        .collect())
}

/// Classifies the sample and returns a correction example for every record
/// whose human label disagrees with the verdict. Records the classifier
/// could not label count as disagreements. Returned examples carry round
/// `previous_round + 1`.
pub fn review_round(
    sample: &[Record],
    classifier: &dyn Classifier,
    corrections: &BTreeMap<String, Label>,
    previous_round: u32,
    style: PromptStyle,
) -> Result<Vec<LabeledExample>, ReviewError> {
    let uts: HashSet<&str> = sample.iter().map(|r| r.ut.as_str()).collect();
    if let Some(ut) = corrections.keys().find(|u| !uts.contains(u.as_str())) {
        return Err(ReviewError::UnknownCorrection(ut.clone()));
    }
    if corrections.is_empty() {
        return Ok(Vec::new());
    }
    let out = classifier.classify(sample)?;
    let verdicts: HashMap<&str, Label> = out
        .verdicts
        .iter()
        .map(|v| (v.ut.as_str(), v.label))
        .collect();
    Ok(sample
        .iter()
        .filter_map(|r| {
            let want = *corrections.get(&r.ut)?;
            (verdicts.get(r.ut.as_str()) != Some(&want)).then(|| LabeledExample {
                ut: Some(r.ut.clone()),
                prompt: prompt_text(r, style),
                label: want,
                origin: Origin::ReviewCorrection,
                round: previous_round + 1,
            })
        })
        .collect())
}

pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

fn token_set(s: &str) -> BTreeSet<String> {
    tokenize(s).into_iter().collect()
}

/// For each correction example, adds the `per_example` most similar corpus
/// titles (Jaccard over normalized tokens, ties broken by ut) with the same
/// label. Titles whose prompt is already in the set are skipped, not
/// replaced by the next candidate.
pub fn augment(
    ts: &TrainingSet,
    corpus: &[Record],
    per_example: usize,
    style: PromptStyle,
) -> Result<Vec<LabeledExample>, ReviewError> {
    if per_example == 0 {
        return Err(ReviewError::ZeroPerExample);
    }
    let pool: Vec<(&Record, String)> = corpus
        .iter()
        .map(|r| (r, prompt_text(r, style)))
        .filter(|(_, p)| !p.trim().is_empty())
        .collect();
    // Inverted index from token to the pool entries containing it, so only
    // entries sharing a token with the example are scored.
    let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
    let mut sizes = Vec::with_capacity(pool.len());
    for (i, (_, p)) in pool.iter().enumerate() {
        let toks = token_set(p);
        sizes.push(toks.len());
        for t in toks {
            postings.entry(t).or_default().push(i as u32);
        }
    }
    let mut shared = vec![0usize; pool.len()];
    let mut seen: HashSet<String> = ts.prompts().into_iter().map(str::to_string).collect();
    let mut delta = Vec::new();
    for ex in ts
        .examples()
        .iter()
        .filter(|e| e.origin == Origin::ReviewCorrection)
    {
        let toks = token_set(&ex.prompt);
        let mut touched = Vec::new();
        for t in &toks {
            for &i in postings.get(t).map(Vec::as_slice).unwrap_or(&[]) {
                if shared[i as usize] == 0 {
                    touched.push(i as usize);
                }
                shared[i as usize] += 1;
            }
        }
        let mut scored: Vec<(f64, &str, &String)> = touched
            .iter()
            .map(|&i| {
                let inter = shared[i];
                shared[i] = 0;
                let sim = inter as f64 / (toks.len() + sizes[i] - inter) as f64;
                (sim, pool[i].0.ut.as_str(), &pool[i].1)
            })
            .filter(|(_, _, p)| **p != ex.prompt)
            .collect();
        let order = |a: &(f64, &str, &String), b: &(f64, &str, &String)| {
            b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
        };
        if scored.len() > per_example {
            scored.select_nth_unstable_by(per_example, order);
            scored.truncate(per_example);
        }
        scored.sort_by(order);
        for (_, ut, p) in scored {
            if !seen.insert(p.clone()) {
                continue;
            }
            delta.push(LabeledExample {
                ut: Some(ut.to_string()),
                prompt: p.clone(),
                label: ex.label,
                origin: Origin::Augmentation,
                round: ex.round,
            });
        }
    }
    Ok(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ReplayClassifier;

    fn rec(ut: &str, title: &str) -> Record {
        Record {
            ut: ut.into(),
            title: title.into(),
            ..Default::default()
        }
    }

    fn corpus(n: usize) -> Vec<Record> {
        (0..n).map(|i| rec(&format!("W{i:04}"), &format!("title {i}"))).collect()
    }

    #[test]
    fn sampling_is_seeded() {
        let c = corpus(500);
        let a = sample_for_review(&c, 200, 7).unwrap();
        assert_eq!(a, sample_for_review(&c, 200, 7).unwrap());
        assert_ne!(a, sample_for_review(&c, 200, 8).unwrap());
        let uts: HashSet<_> = a.iter().map(|r| &r.ut).collect();
        assert_eq!(uts.len(), 200);
    }

    #[test]
    fn whole_corpus_is_a_permutation() {
        let c = corpus(50);
        let s = sample_for_review(&c, 50, 1).unwrap();
        assert_ne!(s, c);
        let mut sorted = s.clone();
        sorted.sort_by(|a, b| a.ut.cmp(&b.ut));
        assert_eq!(sorted, c);
        assert!(matches!(
            sample_for_review(&c, 51, 1),
            Err(ReviewError::NTooLarge { n: 51, size: 50 })
        ));
    }

    #[test]
    fn inclusion_rate_is_uniform() {
        let c = corpus(100);
        let mut hits = vec![0u32; 100];
        for seed in 0..1000 {
            for r in sample_for_review(&c, 10, seed).unwrap() {
                hits[r.ut[1..].parse::<usize>().unwrap()] += 1;
            }
        }
        for h in hits {
            let rate = h as f64 / 1000.0;
            assert!((rate - 0.1).abs() <= 0.02 + 0.015, "rate {rate}");
        }
    }

    #[test]
    fn disagreements_only() {
        let sample = vec![rec("a", "A title"), rec("b", "B title")];
        let clf = ReplayClassifier::from_labels([
            ("a".to_string(), Label::Ai),
            ("b".to_string(), Label::Other),
        ]);
        let corr: BTreeMap<String, Label> =
            [("a".to_string(), Label::Other), ("b".to_string(), Label::Other)].into();
        let delta = review_round(&sample, &clf, &corr, 0, PromptStyle::Title).unwrap();
        assert_eq!(delta.len(), 1);
        assert_eq!(delta[0].ut.as_deref(), Some("a"));
        assert_eq!(delta[0].label, Label::Other);
        assert_eq!(delta[0].round, 1);
        assert_eq!(delta[0].origin, Origin::ReviewCorrection);
        assert!(review_round(&sample, &clf, &BTreeMap::new(), 0, PromptStyle::Title)
            .unwrap()
            .is_empty());
        let stray: BTreeMap<String, Label> = [("z".to_string(), Label::Ai)].into();
        assert!(matches!(
            review_round(&sample, &clf, &stray, 0, PromptStyle::Title),
            Err(ReviewError::UnknownCorrection(_))
        ));
    }

    #[test]
    fn augment_adds_nearest_title() {
        let mut ex = LabeledExample::seed("deep learning for X", Label::Ai);
        ex.origin = Origin::ReviewCorrection;
        ex.round = 1;
        let ts = TrainingSet::from_examples([ex]);
        let pool = vec![
            rec("1", "deep learning for Y"),
            rec("2", "oil drilling"),
            rec("3", "deep learning for X"),
        ];
        let d = augment(&ts, &pool, 1, PromptStyle::Title).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].prompt, "deep learning for Y");
        assert_eq!(d[0].label, Label::Ai);
        assert_eq!(d[0].origin, Origin::Augmentation);
        assert!(matches!(
            augment(&ts, &pool, 0, PromptStyle::Title),
            Err(ReviewError::ZeroPerExample)
        ));
    }

    #[test]
    fn jaccard_values() {
        let a = token_set("a b c");
        let b = token_set("b c d");
        assert_eq!(jaccard(&a, &b), 0.5);
        assert_eq!(jaccard(&a, &a), 1.0);
    }
}
