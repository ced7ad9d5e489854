//! Shared generators and oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use delineate::classifier::{
    augment, import_training, review_round, sample_for_review, Label, LocalClassifier, NaiveBayes,
    PromptStyle, ReplayClassifier, TrainingSet,
};
use delineate::pipeline::{run_pipeline, AdmissionLedger, RunOptions, StageDefs};
use delineate::Record;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Synthetic records

pub const WORDS: [&str; 16] = [
    "deep", "learning", "neural", "network", "networks", "soil", "river", "vision", "robot", "model",
    "graph", "fuzzy", "logic", "data", "mining", "control",
];

pub const CATEGORIES: [&str; 5] = [
    "Computer Science, Artificial Intelligence",
    "Computer Science, Information Systems",
    "Engineering, Electrical & Electronic",
    "Water Resources",
    "Artificial Intelligence",
];

pub const TOPICS: [&str; 6] = ["4.17.128", "4.17.118", "4.61.9", "4.61", "1.2.3", "6.10.200"];

pub const COUNTRIES: [&str; 6] = ["USA", "Peoples R China", "England", "Germany", "India", "Japan"];

fn phrase(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
    let n = rng.gen_range(lo..=hi);
    (0..n)
        .map(|_| {
            let w = WORDS[rng.gen_range(0..WORDS.len())];
            // Occasional punctuation and case noise exercise normalization.
            match rng.gen_range(0..10) {
                0 => w.to_uppercase(),
                1 => format!("{w}-"),
                _ => w.to_string(),
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn random_record(rng: &mut ChaCha8Rng, ut: String) -> Record {
    let kw = |rng: &mut ChaCha8Rng| (0..rng.gen_range(0..3)).map(|_| phrase(rng, 1, 2)).collect::<Vec<_>>();
    let mut r = Record {
        ut,
        title: phrase(rng, 2, 7),
        abstract_text: if rng.gen_bool(0.7) { phrase(rng, 4, 12) } else { String::new() },
        author_keywords: kw(rng),
        keywords_plus: kw(rng),
        categories: (0..rng.gen_range(0..3))
            .map(|_| CATEGORIES[rng.gen_range(0..CATEGORIES.len())].to_string())
            .collect(),
        citation_topic: rng
            .gen_bool(0.5)
            .then(|| TOPICS[rng.gen_range(0..TOPICS.len())].to_string()),
        year: rng.gen_bool(0.95).then(|| rng.gen_range(2013..=2022)),
        citation_count: if rng.gen_bool(0.1) { 0 } else { rng.gen_range(0..200) },
        addresses: (0..rng.gen_range(0..3))
            .map(|i| {
                format!(
                    "Inst {}, Dept {i}, City, {}",
                    rng.gen_range(0..8),
                    COUNTRIES[rng.gen_range(0..COUNTRIES.len())]
                )
            })
            .collect(),
        ..Default::default()
    };
    r.derive_affiliations();
    r
}

pub fn random_corpus(seed: u64, n: usize) -> Vec<Record> {
    let mut g = rng(seed);
    (0..n).map(|i| random_record(&mut g, format!("WOS:{i:09}"))).collect()
}

// ---------------------------------------------------------------------------
// Query oracle: random boolean queries rendered to text, evaluated with
// regular expressions over space-joined normalized text.

#[derive(Debug, Clone)]
pub enum Q {
    /// Field name and phrase source.
    Leaf(&'static str, String),
    And(Vec<Q>),
    Or(Vec<Q>),
    /// `a NOT b`.
    Not(Box<Q>, Box<Q>),
}

fn random_token(rng: &mut ChaCha8Rng) -> String {
    let w = WORDS[rng.gen_range(0..WORDS.len())];
    let chars: Vec<char> = w.chars().collect();
    match rng.gen_range(0..8) {
        0 => format!("{}*", &w[..rng.gen_range(1..=chars.len())]),
        1 => format!("{w}$"),
        2 => {
            let i = rng.gen_range(0..chars.len());
            chars.iter().enumerate().map(|(j, c)| if j == i { '?' } else { *c }).collect()
        }
        3 => format!("{}*{}", &w[..1], &w[w.len() - 1..]),
        _ => w.to_string(),
    }
}

pub fn random_query(rng: &mut ChaCha8Rng, depth: u32) -> Q {
    if depth == 0 || rng.gen_bool(0.35) {
        let field = ["TS", "TI", "AB"][rng.gen_range(0..3)];
        let n = rng.gen_range(1..=3);
        let toks: Vec<String> = (0..n).map(|_| random_token(rng)).collect();
        return Q::Leaf(field, toks.join(" "));
    }
    match rng.gen_range(0..3) {
        0 => Q::And((0..rng.gen_range(2..=3)).map(|_| random_query(rng, depth - 1)).collect()),
        1 => Q::Or((0..rng.gen_range(2..=3)).map(|_| random_query(rng, depth - 1)).collect()),
        _ => Q::Not(
            Box::new(random_query(rng, depth - 1)),
            Box::new(random_query(rng, depth - 1)),
        ),
    }
}

fn prec(q: &Q) -> u8 {
    match q {
        Q::Or(_) => 0,
        Q::And(_) => 1,
        Q::Not(..) => 2,
        Q::Leaf(..) => 3,
    }
}

/// Renders with parentheses only where precedence (NOT > AND > OR)
/// requires them, or everywhere when `full`.
pub fn render(q: &Q, full: bool) -> String {
    let wrap = |c: &Q, need: bool| {
        let s = render(c, full);
        if need || (full && !matches!(c, Q::Leaf(..))) {
            format!("({s})")
        } else {
            s
        }
    };
    match q {
        Q::Leaf(f, p) => format!("{f}=\"{p}\""),
        Q::Or(xs) => xs.iter().map(|x| wrap(x, false)).collect::<Vec<_>>().join(" OR "),
        Q::And(xs) => xs.iter().map(|x| wrap(x, prec(x) < 1)).collect::<Vec<_>>().join(" AND "),
        Q::Not(a, b) => format!("{} NOT {}", wrap(a, prec(a) < 2), wrap(b, prec(b) < 3)),
    }
}

fn norm(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn phrase_regex(p: &str) -> Regex {
    let toks: Vec<String> = p
        .split_whitespace()
        .map(|t| {
            t.chars()
                .map(|c| match c {
                    '*' => "[^ ]*".to_string(),
                    '$' => "[^ ]?".to_string(),
                    '?' => "[^ ]".to_string(),
                    c => regex::escape(&c.to_string()),
                })
                .collect()
        })
        .collect();
    Regex::new(&format!("(^| ){}( |$)", toks.join(" "))).unwrap()
}

pub fn oracle(q: &Q, r: &Record) -> bool {
    match q {
        Q::Leaf(field, p) => {
            let re = phrase_regex(p);
            let hit = |s: &str| re.is_match(&norm(s));
            match *field {
                "TI" => hit(&r.title),
                "AB" => hit(&r.abstract_text),
                _ => {
                    hit(&r.title)
                        || hit(&r.abstract_text)
                        || r.author_keywords.iter().chain(&r.keywords_plus).any(|k| hit(k))
                }
            }
        }
        Q::And(xs) => xs.iter().all(|x| oracle(x, r)),
        Q::Or(xs) => xs.iter().any(|x| oracle(x, r)),
        Q::Not(a, b) => oracle(a, r) && !oracle(b, r),
    }
}

// ---------------------------------------------------------------------------
// Active-learning fixture loop

pub struct LoopOutcome {
    pub training: TrainingSet,
    pub rounds: u32,
}

pub fn load_pool() -> (Vec<Record>, BTreeMap<String, Label>) {
    let text = std::fs::read_to_string(fixtures().join("active_learning/pool.csv")).unwrap();
    let mut records = Vec::new();
    let mut truth = BTreeMap::new();
    for line in text.lines().skip(1) {
        let mut cols = line.splitn(3, ',');
        let (ut, title, label) = (cols.next().unwrap(), cols.next().unwrap(), cols.next().unwrap());
        records.push(Record {
            ut: ut.into(),
            title: title.into(),
            ..Default::default()
        });
        truth.insert(ut.to_string(), label.parse().unwrap());
    }
    (records, truth)
}

/// Rounds of 200 sampled titles: the reviewer corrects every disagreement
/// with the true label, each correction pulls in its nearest pool title, and
/// the local model is retrained. Stops once the set reaches `target`.
pub fn run_labeling_loop(target: usize) -> LoopOutcome {
    let (pool, truth) = load_pool();
    let mut ts = import_training(&fixtures().join("active_learning/seed.jsonl")).unwrap();
    let mut rounds = 0;
    while ts.len() < target && rounds < 200 {
        let model = NaiveBayes::train(&ts).unwrap();
        let clf = LocalClassifier::new(model, PromptStyle::Title);
        let sample = sample_for_review(&pool, 200, u64::from(rounds)).unwrap();
        let corrections: BTreeMap<String, Label> =
            sample.iter().map(|r| (r.ut.clone(), truth[&r.ut])).collect();
        let delta = review_round(&sample, &clf, &corrections, ts.max_round(), PromptStyle::Title).unwrap();
        ts.extend(delta);
        let extra = augment(&ts, &pool, 1, PromptStyle::Title).unwrap();
        ts.extend(extra);
        assert!(ts.check());
        rounds += 1;
    }
    LoopOutcome { training: ts, rounds }
}

// ---------------------------------------------------------------------------
// Misc

pub fn uts(records: &[Record]) -> BTreeSet<String> {
    records.iter().map(|r| r.ut.clone()).collect()
}

pub fn shuffled<T: Clone>(xs: &[T], seed: u64) -> Vec<T> {
    let mut v = xs.to_vec();
    v.shuffle(&mut rng(seed));
    v
}

/// Copies a fixture directory into a fresh temporary directory.
pub fn copy_fixture(name: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixtures().join(name), dir.path());
    dir
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dest = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dest);
        } else {
            std::fs::copy(e.path(), dest).unwrap();
        }
    }
}

/// Output text without `#` metadata lines.
pub fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

// ---------------------------------------------------------------------------
// Pipeline helpers

/// Replay verdicts for every record: mostly labels, a few unmappable.
pub fn random_replay(records: &[Record], seed: u64) -> ReplayClassifier {
    let mut g = rng(seed);
    ReplayClassifier::from_pairs(records.iter().map(|r| {
        let v = match g.gen_range(0..20) {
            0 => "unsure",
            1..=8 => "ai",
            _ => "other",
        };
        (r.ut.clone(), v.to_string())
    }))
}

pub fn run_with(records: &[Record], replay: &ReplayClassifier, workers: usize, batch: usize) -> AdmissionLedger {
    let opts = RunOptions {
        workers,
        batch_size: batch,
        checkpoint: None,
    };
    run_pipeline(records, &StageDefs::bundled().unwrap(), Some(replay), &opts).unwrap()
}

/// Region sizes from `fixtures/venn_approaches.txt`, keyed by `&`-joined names.
pub fn venn_approaches_regions() -> BTreeMap<String, u64> {
    let text = std::fs::read_to_string(fixtures().join("venn_approaches.txt")).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

/// Builds liu, ours and category sets whose regions have exactly the sizes
/// in `regions`, using consecutive integer ids.
pub fn venn_approaches_sets(regions: &BTreeMap<String, u64>) -> [BTreeSet<String>; 3] {
    let names = ["liu", "ours", "category"];
    let mut sets: [BTreeSet<String>; 3] = Default::default();
    let mut next = 0u64;
    for (key, &n) in regions {
        let members: Vec<usize> = key
            .split('&')
            .map(|k| names.iter().position(|n| *n == k).unwrap())
            .collect();
        for _ in 0..n {
            let id = format!("{next:08}");
            next += 1;
            for &i in &members {
                sets[i].insert(id.clone());
            }
        }
    }
    sets
}
