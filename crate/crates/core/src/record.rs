//! Bibliographic record model and address-derived fields.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Earliest and latest publication year accepted on ingest.
pub const YEAR_RANGE: std::ops::RangeInclusive<i32> = 1900..=2100;

/// One bibliographic document as exported by the citation index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    /// Accession number (`UT`), the unique key.
    pub ut: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub author_keywords: Vec<String>,
    pub keywords_plus: Vec<String>,
    pub categories: Vec<String>,
    /// Dotted citation-topic id such as `4.17.128`, from a side file.
    pub citation_topic: Option<String>,
    pub year: Option<i32>,
    pub citation_count: u64,
    pub addresses: Vec<String>,
    pub countries: Vec<String>,
    pub institutions: Vec<String>,
}

impl Record {
    pub fn new(ut: impl Into<String>) -> Self {
        Record {
            ut: ut.into(),
            ..Default::default()
        }
    }

    /// Recomputes `countries` and `institutions` from `addresses` using the
    /// bundled alias table.
    pub fn derive_affiliations(&mut self) -> usize {
        let (countries, unparsed) = default_aliases().extract(&self.addresses);
        self.countries = countries;
        self.institutions = extract_institutions(&self.addresses);
        unparsed
    }
}

/// Country alias table: maps address spellings to canonical names.
#[derive(Debug, Clone, Default)]
pub struct CountryAliases {
    map: HashMap<String, String>,
}

static BUNDLED_ALIASES: &str = include_str!("../data/country_aliases.csv");

pub fn default_aliases() -> &'static CountryAliases {
    static TABLE: OnceLock<CountryAliases> = OnceLock::new();
    TABLE.get_or_init(|| CountryAliases::parse(BUNDLED_ALIASES))
}

impl CountryAliases {
    /// Parses `alias,country` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let map = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once(','))
            .filter(|(a, _)| !a.trim().eq_ignore_ascii_case("alias"))
            .map(|(a, c)| (a.trim().to_lowercase(), c.trim().to_string()))
            .collect();
        CountryAliases { map }
    }

    pub fn lookup(&self, name: &str) -> Option<&str> {
        self.map.get(&name.trim().to_lowercase()).map(String::as_str)
    }

    fn resolve(&self, segment: &str) -> String {
        if let Some(c) = self.lookup(segment) {
            return c.to_string();
        }
        // US and some other addresses end with "<state> <zip> USA".
        if let Some(last) = segment.split_whitespace().last() {
            if let Some(c) = self.lookup(last) {
                return c.to_string();
            }
        }
        segment.to_string()
    }

    /// Returns the deduplicated country list (first occurrence order) and the
    /// number of entries that yielded no country.
    pub fn extract(&self, addresses: &[String]) -> (Vec<String>, usize) {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut unparsed = 0;
        for addr in addresses {
            match country_segment(addr) {
                Some(seg) => {
                    let country = self.resolve(seg);
                    if seen.insert(country.clone()) {
                        out.push(country);
                    }
                }
                None => unparsed += 1,
            }
        }
        (out, unparsed)
    }
}

fn strip_author_prefix(addr: &str) -> &str {
    let t = addr.trim();
    if t.starts_with('[') {
        if let Some(end) = t.find(']') {
            return t[end + 1..].trim_start();
        }
    }
    t
}

fn country_segment(addr: &str) -> Option<&str> {
    let body = strip_author_prefix(addr);
    let (_, tail) = body.rsplit_once(',')?;
    let seg = tail.trim().trim_end_matches('.').trim();
    (!seg.is_empty()).then_some(seg)
}

/// Country names for a list of `C1` addresses, using the bundled alias table.
pub fn extract_countries(addresses: &[String]) -> Vec<String> {
    default_aliases().extract(addresses).0
}

/// First comma-separated segment of each address, deduplicated.
pub fn extract_institutions(addresses: &[String]) -> Vec<String> {
    let mut seen = HashSet::new();
    addresses
        .iter()
        .filter_map(|a| {
            let body = strip_author_prefix(a);
            let inst = body.split(',').next()?.trim().trim_end_matches('.').trim();
            (!inst.is_empty()).then(|| inst.to_string())
        })
        .filter(|i| seen.insert(i.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn china_alias() {
        assert_eq!(
            extract_countries(&s(&["Tsinghua Univ, Beijing, Peoples R China."])),
            vec!["China"]
        );
    }

    #[test]
    fn usa_zip_codes_dedup() {
        assert_eq!(
            extract_countries(&s(&[
                "MIT, Cambridge, MA 02139 USA",
                "Harvard Univ, Boston, MA USA"
            ])),
            vec!["USA"]
        );
    }

    #[test]
    fn empty_addresses() {
        assert!(extract_countries(&[]).is_empty());
    }

    #[test]
    fn table_countries_producible() {
        let addrs = s(&[
            "A, Beijing 100084, Peoples R China",
            "B, New York, NY 10027 USA",
            "C, Delhi, India",
            "D, Seoul, South Korea",
            "E, Tehran, Iran",
            "F, London WC1E 6BT, England",
            "G, Berlin, Germany",
            "H, Madrid, Spain",
            "I, Rome, Italy",
            "J, Toronto, ON, Canada",
        ]);
        assert_eq!(
            extract_countries(&addrs),
            s(&[
                "China",
                "USA",
                "India",
                "South Korea",
                "Iran",
                "England",
                "Germany",
                "Spain",
                "Italy",
                "Canada"
            ])
        );
    }

    #[test]
    fn author_bracket_and_unparseable() {
        let addrs = s(&["[Li, X; Wang, Y] Zhejiang Univ, Hangzhou, Peoples R China.", "nowhere"]);
        let (c, bad) = default_aliases().extract(&addrs);
        assert_eq!(c, vec!["China"]);
        assert_eq!(bad, 1);
        assert_eq!(extract_institutions(&addrs), s(&["Zhejiang Univ", "nowhere"]));
    }

    #[test]
    fn idempotent_on_canonical_names() {
        let once = extract_countries(&s(&["X, Y, Peoples R China", "X, England"]));
        let again: Vec<String> = once.iter().map(|c| format!("Inst, {c}")).collect();
        assert_eq!(extract_countries(&again), once);
    }
}
