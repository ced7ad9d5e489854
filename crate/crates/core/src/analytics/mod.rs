//! Landscape statistics: keyword rankings, yearly trends and world shares,
//! citation profiles, subfield labels and their co-occurrence network.

mod cooccur;
mod subfields;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cooccur::{cooccurrence, CooccurrenceGraph};
pub use subfields::{
    label_subfields, parse_subfield_response, subfield_prompt, subfield_trend, SubfieldAliases,
    SubfieldLabels,
};

use crate::record::Record;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalyticsError {
    #[error("world shares need a denominator")]
    MissingDenominator,
    #[error("denominator has no total for year {0}")]
    MissingDenominatorYear(i32),
    #[error("no records carry a {0} key")]
    EmptyGroup(&'static str),
    #[error("n must be at least 1")]
    ZeroN,
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
}

/// Keyword counts pooled over author keywords and Keywords Plus. Keywords
/// are only trimmed and lower-cased, so plural variants stay distinct.
/// Sorted by count descending, then keyword ascending.
pub fn keyword_frequency(records: &[Record], min_count: u64) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for r in records {
        for k in r.author_keywords.iter().chain(&r.keywords_plus) {
            let k = k.trim().to_lowercase();
            if !k.is_empty() {
                *counts.entry(k).or_insert(0) += 1;
            }
        }
    }
    let mut out: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c >= min_count).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Year,
    Country,
    Institution,
    Category,
    Subfield,
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Year => "year",
            Dimension::Country => "country",
            Dimension::Institution => "institution",
            Dimension::Category => "category",
            Dimension::Subfield => "subfield",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Dimension::Year,
            Dimension::Country,
            Dimension::Institution,
            Dimension::Category,
            Dimension::Subfield,
        ]
        .into_iter()
        .find(|d| d.as_str() == s)
    }

    /// Distinct keys a record contributes to; `all` for the year dimension.
    fn keys(self, r: &Record) -> BTreeSet<String> {
        let from = |xs: &[String]| {
            xs.iter()
                .map(|x| x.trim())
                .filter(|x| !x.is_empty())
                .map(str::to_string)
                .collect()
        };
        match self {
            Dimension::Year => BTreeSet::from(["all".to_string()]),
            Dimension::Country => from(&r.countries),
            Dimension::Institution => from(&r.institutions),
            Dimension::Category => from(&r.categories),
            Dimension::Subfield => BTreeSet::new(),
        }
    }
}

/// Records per publication year, the denominator for shares.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct YearTotals(pub BTreeMap<i32, u64>);

impl YearTotals {
    pub fn from_records(records: &[Record]) -> Self {
        let mut m = BTreeMap::new();
        for y in records.iter().filter_map(|r| r.year) {
            *m.entry(y).or_insert(0) += 1;
        }
        YearTotals(m)
    }

    /// Reads `year,count` rows; a header row and `#` lines are skipped.
    pub fn parse_csv(text: &str) -> Result<Self, AnalyticsError> {
        let mut m = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("year,count") {
                continue;
            }
            let bad = || AnalyticsError::Csv {
                line: i + 1,
                message: "expected year,count".into(),
            };
            let (y, c) = line.split_once(',').ok_or_else(bad)?;
            m.insert(
                y.trim().parse().map_err(|_| bad())?,
                c.trim().parse().map_err(|_| bad())?,
            );
        }
        Ok(YearTotals(m))
    }

    pub fn get(&self, year: i32) -> Option<u64> {
        self.0.get(&year).copied()
    }
}

/// Counts per (key, year), credited once per record per key.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendTable {
    pub dimension: Dimension,
    pub cells: BTreeMap<(String, i32), u64>,
    pub world_share: Option<BTreeMap<(String, i32), f64>>,
}

impl TrendTable {
    pub fn count(&self, key: &str, year: i32) -> u64 {
        self.cells.get(&(key.to_string(), year)).copied().unwrap_or(0)
    }

    pub fn share(&self, key: &str, year: i32) -> Option<f64> {
        self.world_share
            .as_ref()
            .and_then(|s| s.get(&(key.to_string(), year)).copied())
    }

    fn with_shares(mut self, denominator: &YearTotals) -> Result<Self, AnalyticsError> {
        let mut shares = BTreeMap::new();
        for ((k, y), c) in &self.cells {
            let total = denominator
                .get(*y)
                .filter(|t| *t > 0)
                .ok_or(AnalyticsError::MissingDenominatorYear(*y))?;
            shares.insert((k.clone(), *y), *c as f64 / total as f64);
        }
        self.world_share = Some(shares);
        Ok(self)
    }

    /// `key,year,count[,share]` sorted by key then year.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("key,year,count");
        if self.world_share.is_some() {
            s.push_str(",share");
        }
        s.push('\n');
        for ((k, y), c) in &self.cells {
            s.push_str(&format!("{},{y},{c}", csv_field(k)));
            if let Some(sh) = &self.world_share {
                s.push_str(&format!(",{:.6}", sh[&(k.clone(), *y)]));
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn build_trend<'a>(
    dimension: Dimension,
    items: impl Iterator<Item = (i32, BTreeSet<String>)> + 'a,
) -> TrendTable {
    let mut cells = BTreeMap::new();
    for (y, keys) in items {
        for k in keys {
            *cells.entry((k, y)).or_insert(0) += 1;
        }
    }
    TrendTable {
        dimension,
        cells,
        world_share: None,
    }
}

/// Yearly counts per key. With `shares`, each cell is also divided by the
/// denominator's total for that year. Records without a year are skipped.
pub fn trend(
    records: &[Record],
    dimension: Dimension,
    denominator: Option<&YearTotals>,
    shares: bool,
) -> Result<TrendTable, AnalyticsError> {
    if shares && denominator.is_none() {
        return Err(AnalyticsError::MissingDenominator);
    }
    let t = build_trend(
        dimension,
        records
            .iter()
            .filter_map(|r| r.year.map(|y| (y, dimension.keys(r)))),
    );
    match (shares, denominator) {
        (true, Some(d)) => t.with_shares(d),
        _ => Ok(t),
    }
}

pub fn h_index(citations: &[u64]) -> u64 {
    let mut c = citations.to_vec();
    c.sort_unstable_by(|a, b| b.cmp(a));
    c.iter()
        .enumerate()
        .take_while(|(i, &x)| x > *i as u64)
        .count() as u64
}

/// Per-year citation thresholds for the top `pct` percent of the corpus.
/// The threshold is the count at rank `ceil(pct% * N_y)` among that year's
/// records, so every record tied with it is included. Records with no
/// citations are never counted as top cited.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopThresholds {
    pub pct: u32,
    pub by_year: BTreeMap<i32, u64>,
}

impl TopThresholds {
    pub fn compute(records: &[Record], pct: u32) -> Self {
        let mut per_year: BTreeMap<i32, Vec<u64>> = BTreeMap::new();
        for r in records {
            if let Some(y) = r.year {
                per_year.entry(y).or_default().push(r.citation_count);
            }
        }
        let by_year = per_year
            .into_iter()
            .map(|(y, mut v)| {
                v.sort_unstable_by(|a, b| b.cmp(a));
                let n = v.len() as u64;
                let rank = ((n * pct as u64).div_ceil(100)).max(1) as usize;
                (y, v[rank - 1])
            })
            .collect();
        TopThresholds { pct, by_year }
    }

    pub fn is_top(&self, r: &Record) -> bool {
        match r.year.and_then(|y| self.by_year.get(&y)) {
            Some(&t) => r.citation_count >= t && r.citation_count >= 1,
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupBy {
    Country,
    Institution,
}

impl GroupBy {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupBy::Country => "country",
            GroupBy::Institution => "institution",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitationProfile {
    pub key: String,
    pub publications: u64,
    pub total_citations: u64,
    pub h_index: u64,
    pub top1_count: u64,
    pub top10_count: u64,
    pub avg_citation: f64,
}

/// Profiles per country or institution (whole counting), sorted by
/// publications descending, then key. Top-cited baselines are per year over
/// all of `records`.
pub fn citation_profile(
    records: &[Record],
    group_by: GroupBy,
) -> Result<Vec<CitationProfile>, AnalyticsError> {
    let top1 = TopThresholds::compute(records, 1);
    let top10 = TopThresholds::compute(records, 10);
    let dim = match group_by {
        GroupBy::Country => Dimension::Country,
        GroupBy::Institution => Dimension::Institution,
    };
    let mut groups: BTreeMap<String, (Vec<u64>, u64, u64)> = BTreeMap::new();
    for r in records {
        let (t1, t10) = (top1.is_top(r) as u64, top10.is_top(r) as u64);
        for k in dim.keys(r) {
            let g = groups.entry(k).or_default();
            g.0.push(r.citation_count);
            g.1 += t1;
            g.2 += t10;
        }
    }
    if groups.is_empty() {
        return Err(AnalyticsError::EmptyGroup(group_by.as_str()));
    }
    let mut out: Vec<CitationProfile> = groups
        .into_iter()
        .map(|(key, (cites, t1, t10))| {
            let total: u64 = cites.iter().sum();
            CitationProfile {
                key,
                publications: cites.len() as u64,
                total_citations: total,
                h_index: h_index(&cites),
                top1_count: t1,
                top10_count: t10,
                avg_citation: total as f64 / cites.len() as f64,
            }
        })
        .collect();
    out.sort_by(|a, b| b.publications.cmp(&a.publications).then_with(|| a.key.cmp(&b.key)));
    Ok(out)
}

pub fn citation_profiles_csv(profiles: &[CitationProfile]) -> String {
    let mut s = String::from(
        "key,publications,total_citations,h_index,top1_count,top10_count,avg_citation\n",
    );
    for p in profiles {
        s.push_str(&format!(
            "{},{},{},{},{},{},{:.6}\n",
            csv_field(&p.key),
            p.publications,
            p.total_citations,
            p.h_index,
            p.top1_count,
            p.top10_count,
            p.avg_citation
        ));
    }
    s
}

/// The `n` most cited records; ties go to the earlier year, then the lower
/// ut. Records without a year sort after dated ones on a tie.
pub fn top_cited(records: &[Record], n: usize) -> Result<Vec<&Record>, AnalyticsError> {
    if n == 0 {
        return Err(AnalyticsError::ZeroN);
    }
    let mut v: Vec<&Record> = records.iter().collect();
    v.sort_by(|a, b| {
        b.citation_count
            .cmp(&a.citation_count)
            .then_with(|| a.year.unwrap_or(i32::MAX).cmp(&b.year.unwrap_or(i32::MAX)))
            .then_with(|| a.ut.cmp(&b.ut))
    });
    v.truncate(n);
    Ok(v)
}

pub fn top_cited_csv(records: &[&Record]) -> String {
    let mut s = String::from("rank,ut,year,citations,title\n");
    for (i, r) in records.iter().enumerate() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            i + 1,
            r.ut,
            r.year.map(|y| y.to_string()).unwrap_or_default(),
            r.citation_count,
            csv_field(&r.title)
        ));
    }
    s
}

pub fn keyword_csv(rows: &[(String, u64)]) -> String {
    let mut s = String::from("rank,keyword,count\n");
    for (i, (k, c)) in rows.iter().enumerate() {
        s.push_str(&format!("{},{},{c}\n", i + 1, csv_field(k)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ut: &str, year: i32, cites: u64, countries: &[&str]) -> Record {
        Record {
            ut: ut.into(),
            year: Some(year),
            citation_count: cites,
            countries: countries.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn keyword_case_fold() {
        let mut a = Record::new("1");
        a.author_keywords = vec!["Deep Learning".into()];
        let mut b = Record::new("2");
        b.author_keywords = vec!["deep learning".into(), "CNN".into()];
        assert_eq!(
            keyword_frequency(&[a, b], 1),
            vec![("deep learning".to_string(), 2), ("cnn".to_string(), 1)]
        );
    }

    #[test]
    fn plural_variants_distinct() {
        let mut a = Record::new("1");
        a.author_keywords = vec!["Neural networks".into()];
        a.keywords_plus = vec!["NEURAL NETWORK".into()];
        let kf = keyword_frequency(&[a], 1);
        assert_eq!(kf.len(), 2);
    }

    #[test]
    fn share_of_single_country() {
        let mut rs: Vec<Record> = (0..3).map(|i| rec(&i.to_string(), 2020, 0, &["A"])).collect();
        rs.extend((3..10).map(|i| rec(&i.to_string(), 2020, 0, &["B"])));
        let d = YearTotals::from_records(&rs);
        let t = trend(&rs, Dimension::Country, Some(&d), true).unwrap();
        assert_eq!(t.share("A", 2020), Some(0.3));
        assert!(t.to_csv().contains("A,2020,3,0.300000\n"));
        assert_eq!(
            trend(&rs, Dimension::Country, None, true),
            Err(AnalyticsError::MissingDenominator)
        );
    }

    #[test]
    fn whole_counting() {
        let rs = vec![rec("1", 2021, 0, &["China", "USA"])];
        let t = trend(&rs, Dimension::Country, None, false).unwrap();
        assert_eq!(t.count("China", 2021) + t.count("USA", 2021), 2);
        let y = trend(&rs, Dimension::Year, None, false).unwrap();
        assert_eq!(y.count("all", 2021), 1);
    }

    #[test]
    fn missing_denominator_year() {
        let rs = vec![rec("1", 2021, 0, &["A"])];
        let d = YearTotals::parse_csv("year,count\n2020,5\n").unwrap();
        assert_eq!(
            trend(&rs, Dimension::Country, Some(&d), true),
            Err(AnalyticsError::MissingDenominatorYear(2021))
        );
    }

    #[test]
    fn h_index_examples() {
        assert_eq!(h_index(&[10, 8, 5, 4, 3]), 4);
        assert_eq!(h_index(&[5, 4, 4, 2, 0]), 3);
        assert_eq!(h_index(&[0, 0]), 0);
        assert_eq!(h_index(&[]), 0);
    }

    #[test]
    fn profiles() {
        let rs = vec![
            rec("1", 2020, 10, &["A"]),
            rec("2", 2020, 0, &["A", "B"]),
            rec("3", 2020, 3, &["B"]),
        ];
        let p = citation_profile(&rs, GroupBy::Country).unwrap();
        assert_eq!(p[0].key, "A");
        assert_eq!((p[0].total_citations, p[0].h_index, p[0].top1_count), (10, 1, 1));
        assert_eq!(p[1].avg_citation, 1.5);
        assert_eq!(
            citation_profile(&[Record::new("x")], GroupBy::Institution),
            Err(AnalyticsError::EmptyGroup("institution"))
        );
        let zero = vec![rec("1", 2020, 0, &["A"])];
        let p = citation_profile(&zero, GroupBy::Country).unwrap();
        assert_eq!((p[0].h_index, p[0].avg_citation, p[0].top10_count), (0, 0.0, 0));
    }

    #[test]
    fn top_threshold_ties_included() {
        let rs: Vec<Record> = [9, 7, 7, 1, 1, 1, 1, 1, 1, 1]
            .iter()
            .enumerate()
            .map(|(i, c)| rec(&i.to_string(), 2019, *c, &[]))
            .collect();
        let t = TopThresholds::compute(&rs, 20);
        assert_eq!(t.by_year[&2019], 7);
        assert_eq!(rs.iter().filter(|r| t.is_top(r)).count(), 3);
    }

    #[test]
    fn top_cited_tie_rule() {
        let rs = vec![rec("b", 2021, 7, &[]), rec("a", 2021, 7, &[]), rec("c", 2019, 3, &[]), rec("d", 2018, 7, &[])];
        let top: Vec<&str> = top_cited(&rs, 3).unwrap().iter().map(|r| r.ut.as_str()).collect();
        assert_eq!(top, vec!["d", "a", "b"]);
        assert_eq!(top_cited(&rs, 10).unwrap().len(), 4);
        assert!(top_cited(&rs, 0).is_err());
    }
}
