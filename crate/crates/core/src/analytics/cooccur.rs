//! Label co-occurrence network.

use std::collections::{BTreeMap, BTreeSet};

use super::csv_field;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CooccurrenceGraph {
    /// Records per label.
    pub nodes: BTreeMap<String, u64>,
    /// Records carrying both labels, keyed with the smaller label first.
    pub edges: BTreeMap<(String, String), u64>,
    pub threshold: u64,
}

/// Counts, for every unordered pair of distinct labels, the records that
/// carry both. Edges lighter than `threshold` are dropped; every label stays
/// as a node.
pub fn cooccurrence<L: AsRef<[String]>>(
    labels: &BTreeMap<String, L>,
    threshold: u64,
) -> CooccurrenceGraph {
    let mut g = CooccurrenceGraph {
        threshold,
        ..Default::default()
    };
    for ls in labels.values() {
        let distinct: BTreeSet<&String> = ls.as_ref().iter().collect();
        let v: Vec<&String> = distinct.into_iter().collect();
        for (i, a) in v.iter().enumerate() {
            *g.nodes.entry((*a).clone()).or_insert(0) += 1;
            for b in &v[i + 1..] {
                *g.edges.entry(((*a).clone(), (*b).clone())).or_insert(0) += 1;
            }
        }
    }
    g.edges.retain(|_, w| *w >= threshold);
    g
}

impl CooccurrenceGraph {
    pub fn weight(&self, a: &str, b: &str) -> u64 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.edges
            .get(&(key.0.to_string(), key.1.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// `a,b,weight`, heaviest first, then by label.
    pub fn edges_csv(&self) -> String {
        let mut e: Vec<(&(String, String), &u64)> = self.edges.iter().collect();
        e.sort_by(|x, y| y.1.cmp(x.1).then_with(|| x.0.cmp(y.0)));
        let mut s = String::from("a,b,weight\n");
        for ((a, b), w) in e {
            s.push_str(&format!("{},{},{w}\n", csv_field(a), csv_field(b)));
        }
        s
    }

    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("label,count\n");
        for (l, c) in &self.nodes {
            s.push_str(&format!("{},{c}\n", csv_field(l)));
        }
        s
    }

    pub fn to_dot(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut s = String::from("graph cooccurrence {\n");
        for (l, c) in &self.nodes {
            s.push_str(&format!("  {} [count={c}];\n", q(l)));
        }
        for ((a, b), w) in &self.edges {
            s.push_str(&format!("  {} -- {} [weight={w}];\n", q(a), q(b)));
        }
        s.push_str("}\n");
        s
    }
}
