//! Text normalization and wildcard phrase patterns.
//!
//! Text is lower-cased and split on every non-alphanumeric character, so
//! `artificial-intelligence` and `artificial intelligence` both become
//! `[artificial, intelligence]`. Pattern tokens additionally keep the
//! wildcards `*` (zero or more characters), `$` (zero or one) and `?`
//! (exactly one). Wildcards never cross a token boundary.

use serde::{Deserialize, Serialize};

fn is_wildcard(c: char) -> bool {
    matches!(c, '*' | '$' | '?')
}

fn split_tokens(text: &str, keep: impl Fn(char) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if keep(c) {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Normalized token sequence of free text.
pub fn tokenize(text: &str) -> Vec<String> {
    split_tokens(text, char::is_alphanumeric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum Elem {
    Lit(char),
    Star,
    Opt,
    One,
}

/// One token of a phrase pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPattern {
    elems: Vec<Elem>,
    literal: Option<String>,
}

impl TokenPattern {
    pub fn new(token: &str) -> Self {
        let elems: Vec<Elem> = token
            .chars()
            .map(|c| match c {
                '*' => Elem::Star,
                '$' => Elem::Opt,
                '?' => Elem::One,
                c => Elem::Lit(c),
            })
            .collect();
        let literal = elems
            .iter()
            .all(|e| matches!(e, Elem::Lit(_)))
            .then(|| token.to_string());
        TokenPattern { elems, literal }
    }

    pub fn is_literal(&self) -> bool {
        self.literal.is_some()
    }

    /// Whole-token match.
    pub fn matches(&self, token: &str) -> bool {
        if let Some(lit) = &self.literal {
            return lit == token;
        }
        let text: Vec<char> = token.chars().collect();
        // reach[j]: pattern prefix consumed so far can end at text position j.
        let mut reach = vec![false; text.len() + 1];
        reach[0] = true;
        for e in &self.elems {
            let mut next = vec![false; text.len() + 1];
            match e {
                Elem::Lit(c) => {
                    for j in 0..text.len() {
                        if reach[j] && text[j] == *c {
                            next[j + 1] = true;
                        }
                    }
                }
                Elem::One => {
                    for j in 0..text.len() {
                        if reach[j] {
                            next[j + 1] = true;
                        }
                    }
                }
                Elem::Opt => {
                    for j in 0..=text.len() {
                        if reach[j] {
                            next[j] = true;
                            if j < text.len() {
                                next[j + 1] = true;
                            }
                        }
                    }
                }
                Elem::Star => {
                    let mut on = false;
                    for j in 0..=text.len() {
                        on |= reach[j];
                        next[j] = on;
                    }
                }
            }
            reach = next;
            if !reach.iter().any(|&b| b) {
                return false;
            }
        }
        reach[text.len()]
    }
}

/// A quoted phrase or bare word from a query, as an ordered token list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhrasePattern {
    /// Source text with escapes removed, used by the CT and PY fields.
    pub raw: String,
    pub tokens: Vec<TokenPattern>,
}

impl PhrasePattern {
    /// Returns `None` when the text has no token characters.
    pub fn new(raw: &str) -> Option<Self> {
        let tokens: Vec<TokenPattern> =
            split_tokens(raw, |c| c.is_alphanumeric() || is_wildcard(c))
                .iter()
                .map(|t| TokenPattern::new(t))
                .collect();
        (!tokens.is_empty()).then(|| PhrasePattern {
            raw: raw.trim().to_string(),
            tokens,
        })
    }

    /// True when the pattern aligns with consecutive tokens somewhere in `text`.
    pub fn matches_within(&self, text: &[String]) -> bool {
        let k = self.tokens.len();
        if k > text.len() {
            return false;
        }
        (0..=text.len() - k).any(|start| self.aligns(&text[start..start + k]))
    }

    /// True when the pattern aligns with the whole of `text`.
    pub fn matches_exactly(&self, text: &[String]) -> bool {
        self.tokens.len() == text.len() && self.aligns(text)
    }

    fn aligns(&self, window: &[String]) -> bool {
        self.tokens.iter().zip(window).all(|(p, t)| p.matches(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PhrasePattern {
        PhrasePattern::new(s).unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(
            tokenize("Graph Neural-Networks, for molecules!"),
            vec!["graph", "neural", "networks", "for", "molecules"]
        );
        assert_eq!(p("artificial-intelligen*").tokens, p("artificial intelligen*").tokens);
    }

    #[test]
    fn star_suffix() {
        assert!(p("neural net*").matches_within(&tokenize("Graph Neural Networks for molecules")));
        assert!(p("neural net*").matches_within(&tokenize("neural net")));
        assert!(!p("neural net*").matches_within(&tokenize("neural")));
    }

    #[test]
    fn dollar_is_zero_or_one() {
        let pat = p("expert system$");
        assert!(pat.matches_within(&tokenize("expert systems")));
        assert!(pat.matches_within(&tokenize("expert system")));
        assert!(!pat.matches_within(&tokenize("expert systemic")));
    }

    #[test]
    fn question_is_exactly_one() {
        let t = TokenPattern::new("wom?n");
        assert!(t.matches("woman"));
        assert!(t.matches("women"));
        assert!(!t.matches("womn"));
    }

    #[test]
    fn inner_star() {
        let t = TokenPattern::new("machine*");
        assert!(t.matches("machines"));
        let t = TokenPattern::new("a*b*c");
        assert!(t.matches("abc"));
        assert!(t.matches("axxbyyc"));
        assert!(!t.matches("axxbyy"));
    }

    #[test]
    fn no_stemming() {
        assert!(!p("neural network").matches_within(&tokenize("neural networks")));
    }

    #[test]
    fn exact_alignment() {
        let pat = p("artificial intelligence");
        assert!(pat.matches_exactly(&tokenize("Artificial Intelligence")));
        assert!(!pat.matches_exactly(&tokenize("Computer Science, Artificial Intelligence")));
    }

    #[test]
    fn empty_phrase() {
        assert!(PhrasePattern::new(" - ").is_none());
    }
}
