//! Readers and writers for the two citation-index export layouts: the tagged
//! plain-text format (`FN`/`VR`, `PT`..`ER` blocks, `EF`) and the
//! tab-delimited format with a header row of two-letter tags.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;

use thiserror::Error;

use crate::record::{Record, YEAR_RANGE};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("input is not valid UTF-8")]
    NotUtf8,
    #[error("missing FN header line")]
    MissingHeader,
    #[error("malformed block starting at line {line}: missing ER")]
    MalformedBlock { line: usize },
    #[error("tabular header has no UT column")]
    HeaderMissingUT,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WarningKind {
    MissingUT,
    RowArity { expected: usize, found: usize },
    BadYear(String),
    BadCitationCount(String),
    UnparsedAddresses(usize),
    StrayLine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub kind: WarningKind,
}

impl std::fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            WarningKind::MissingUT => write!(f, "record without UT skipped"),
            WarningKind::RowArity { expected, found } => {
                write!(f, "row has {found} cells, header has {expected}; skipped")
            }
            WarningKind::BadYear(v) => write!(f, "publication year {v:?} ignored"),
            WarningKind::BadCitationCount(v) => write!(f, "citation count {v:?} read as 0"),
            WarningKind::UnparsedAddresses(n) => write!(f, "{n} address(es) without a country"),
            WarningKind::StrayLine => write!(f, "line outside a record block ignored"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<Record>,
    pub warnings: Vec<ParseWarning>,
}

fn read_text(mut stream: impl Read) -> Result<String, FormatError> {
    let mut buf = Vec::new();
    stream.read_to_end(&mut buf)?;
    let mut text = String::from_utf8(buf).map_err(|_| FormatError::NotUtf8)?;
    if text.starts_with('\u{feff}') {
        text.drain(..3);
    }
    Ok(text)
}

fn split_list(v: &str) -> Vec<String> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Splits on `;` except inside `[...]` author groups.
fn split_addresses(v: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in v.chars() {
        match c {
            '[' => {
                depth += 1;
                cur.push(c);
            }
            ']' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            ';' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    out.push(cur);
    out.into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Applies one tag's lines to a record. Returns an optional warning.
fn apply_field(rec: &mut Record, tag: &str, lines: &[String]) -> Option<WarningKind> {
    let joined = || one_line(&lines.join(" "));
    match tag {
        "UT" => rec.ut = joined(),
        "TI" => rec.title = joined(),
        "AB" => rec.abstract_text = joined(),
        "DE" => rec.author_keywords = split_list(&joined()),
        "ID" => rec.keywords_plus = split_list(&joined()),
        "WC" => rec.categories = split_list(&joined()),
        "C1" => {
            rec.addresses = lines
                .iter()
                .flat_map(|l| split_addresses(&one_line(l)))
                .collect()
        }
        "PY" => {
            let v = joined();
            if v.is_empty() {
                return None;
            }
            match v.parse::<i32>() {
                Ok(y) if YEAR_RANGE.contains(&y) => rec.year = Some(y),
                _ => return Some(WarningKind::BadYear(v)),
            }
        }
        "TC" => {
            let v = joined();
            if v.is_empty() {
                return None;
            }
            match v.parse::<u64>() {
                Ok(n) => rec.citation_count = n,
                Err(_) => return Some(WarningKind::BadCitationCount(v)),
            }
        }
        _ => {}
    }
    None
}

fn finish_record(mut rec: Record, line: usize, warnings: &mut Vec<ParseWarning>) -> Option<Record> {
    if rec.ut.is_empty() {
        warnings.push(ParseWarning {
            line,
            kind: WarningKind::MissingUT,
        });
        return None;
    }
    let unparsed = rec.derive_affiliations();
    if unparsed > 0 {
        warnings.push(ParseWarning {
            line,
            kind: WarningKind::UnparsedAddresses(unparsed),
        });
    }
    Some(rec)
}

struct Block {
    start: usize,
    fields: Vec<(String, Vec<String>)>,
}

impl Block {
    fn into_record(self, warnings: &mut Vec<ParseWarning>) -> Option<Record> {
        let mut rec = Record::default();
        for (tag, lines) in &self.fields {
            if let Some(kind) = apply_field(&mut rec, tag, lines) {
                warnings.push(ParseWarning {
                    line: self.start,
                    kind,
                });
            }
        }
        finish_record(rec, self.start, warnings)
    }
}

/// Parses a tagged plain-text export.
pub fn parse_tagged(stream: impl Read) -> Result<ParseOutcome, FormatError> {
    let text = read_text(stream)?;
    let mut out = ParseOutcome::default();
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));

    match lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
        Some((_, l)) if l.starts_with("FN") => {}
        _ => return Err(FormatError::MissingHeader),
    }

    let mut block: Option<Block> = None;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(cont) = line.strip_prefix("   ") {
            match block.as_mut().and_then(|b| b.fields.last_mut()) {
                Some((_, vals)) => vals.push(cont.trim().to_string()),
                None => out.warnings.push(ParseWarning {
                    line: no,
                    kind: WarningKind::StrayLine,
                }),
            }
            continue;
        }
        let tag = line.get(..2).unwrap_or(line);
        let value = line.get(3..).unwrap_or("").trim().to_string();
        match (tag, block.is_some()) {
            ("PT", false) => {
                block = Some(Block {
                    start: no,
                    fields: Vec::new(),
                })
            }
            ("PT", true) => {
                let start = block.map(|b| b.start).unwrap_or(no);
                return Err(FormatError::MalformedBlock { line: start });
            }
            ("ER", true) => {
                if let Some(rec) = block.take().and_then(|b| b.into_record(&mut out.warnings)) {
                    out.records.push(rec);
                }
            }
            ("EF", false) => break,
            ("EF", true) => {
                let start = block.map(|b| b.start).unwrap_or(no);
                return Err(FormatError::MalformedBlock { line: start });
            }
            ("VR", false) | ("FN", false) => {}
            (_, true) => {
                let b = block.as_mut().expect("inside block");
                b.fields.push((tag.to_string(), vec![value]));
            }
            (_, false) => out.warnings.push(ParseWarning {
                line: no,
                kind: WarningKind::StrayLine,
            }),
        }
    }
    if let Some(b) = block {
        return Err(FormatError::MalformedBlock { line: b.start });
    }
    Ok(out)
}

/// Serializes records in the tagged layout accepted by [`parse_tagged`].
/// Derived fields (countries, institutions) and citation topics are not
/// written; they are recomputed or supplied from side files on read.
pub fn write_tagged(records: &[Record]) -> String {
    let mut s = String::from("FN Clarivate Analytics Web of Science\nVR 1.0\n");
    for r in records {
        s.push_str("PT J\n");
        let mut field = |tag: &str, v: &str| {
            if !v.is_empty() {
                let _ = writeln!(s, "{tag} {}", one_line(v));
            }
        };
        field("TI", &r.title);
        field("AB", &r.abstract_text);
        field("DE", &r.author_keywords.join("; "));
        field("ID", &r.keywords_plus.join("; "));
        field("WC", &r.categories.join("; "));
        for (i, a) in r.addresses.iter().enumerate() {
            let tag = if i == 0 { "C1" } else { "  " };
            let _ = writeln!(s, "{tag} {}", one_line(a));
        }
        if let Some(y) = r.year {
            let _ = writeln!(s, "PY {y}");
        }
        let _ = writeln!(s, "TC {}", r.citation_count);
        let _ = writeln!(s, "UT {}", one_line(&r.ut));
        s.push_str("ER\n\n");
    }
    s.push_str("EF\n");
    s
}

fn one_line(v: &str) -> String {
    v.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses a tab-delimited export whose first row holds the field tags.
pub fn parse_tabular(stream: impl Read) -> Result<ParseOutcome, FormatError> {
    let text = read_text(stream)?;
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty());
    let header: Vec<String> = match rows.next() {
        Some((_, h)) => h.split('\t').map(|c| c.trim().to_string()).collect(),
        None => return Err(FormatError::HeaderMissingUT),
    };
    if !header.iter().any(|h| h == "UT") {
        return Err(FormatError::HeaderMissingUT);
    }
    let mut out = ParseOutcome::default();
    for (no, row) in rows {
        let mut cells: Vec<&str> = row.split('\t').collect();
        // Some exporters end every row with a tab.
        if cells.len() == header.len() + 1 && cells.last() == Some(&"") {
            cells.pop();
        }
        if cells.len() != header.len() {
            out.warnings.push(ParseWarning {
                line: no,
                kind: WarningKind::RowArity {
                    expected: header.len(),
                    found: cells.len(),
                },
            });
            continue;
        }
        let mut rec = Record::default();
        let mut fields: HashMap<&str, Vec<String>> = HashMap::new();
        for (tag, cell) in header.iter().zip(&cells) {
            fields.insert(tag.as_str(), vec![cell.trim().to_string()]);
        }
        for (tag, vals) in &fields {
            if let Some(kind) = apply_field(&mut rec, tag, vals) {
                out.warnings.push(ParseWarning { line: no, kind });
            }
        }
        if let Some(rec) = finish_record(rec, no, &mut out.warnings) {
            out.records.push(rec);
        }
    }
    Ok(out)
}

const TABULAR_COLUMNS: [&str; 9] = ["UT", "TI", "AB", "DE", "ID", "WC", "PY", "TC", "C1"];

/// Serializes records in the tab-delimited layout accepted by [`parse_tabular`].
pub fn write_tabular(records: &[Record]) -> String {
    let mut s = TABULAR_COLUMNS.join("\t");
    s.push('\n');
    for r in records {
        let cells = [
            one_line(&r.ut),
            one_line(&r.title),
            one_line(&r.abstract_text),
            one_line(&r.author_keywords.join("; ")),
            one_line(&r.keywords_plus.join("; ")),
            one_line(&r.categories.join("; ")),
            r.year.map(|y| y.to_string()).unwrap_or_default(),
            r.citation_count.to_string(),
            one_line(&r.addresses.join("; ")),
        ];
        s.push_str(&cells.join("\t"));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE_BLOCKS: &str = "\u{feff}FN Clarivate Analytics Web of Science
VR 1.0
PT J
TI Deep learning
   for images
DE Machine learning; Robotics
ID CONVOLUTIONAL NETWORKS; VISION
WC Computer Science, Artificial Intelligence
C1 [Li, X; Wang, Y] Tsinghua Univ, Beijing, Peoples R China.
   MIT, Cambridge, MA 02139 USA
PY 2020
TC 12
UT WOS:000000000000001
ER

PT J
TI No accession number here
PY 2019
ER

PT J
TI Oil drilling in shale
AB Drilling
   rates.
PY 2018
UT WOS:000000000000003
ER

EF
";

    #[test]
    fn tagged_three_blocks_one_missing_ut() {
        let out = parse_tagged(THREE_BLOCKS.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.warnings.len(), 1);
        assert_eq!(out.warnings[0].kind, WarningKind::MissingUT);
        assert_eq!(out.warnings[0].line, 16);
        let r = &out.records[0];
        assert_eq!(r.title, "Deep learning for images");
        assert_eq!(r.author_keywords, vec!["Machine learning", "Robotics"]);
        assert_eq!(r.keywords_plus, vec!["CONVOLUTIONAL NETWORKS", "VISION"]);
        assert_eq!(r.categories, vec!["Computer Science, Artificial Intelligence"]);
        assert_eq!(r.addresses.len(), 2);
        assert_eq!(r.countries, vec!["China", "USA"]);
        assert_eq!(r.institutions, vec!["Tsinghua Univ", "MIT"]);
        assert_eq!(r.year, Some(2020));
        assert_eq!(r.citation_count, 12);
        assert_eq!(out.records[1].abstract_text, "Drilling rates.");
    }

    #[test]
    fn missing_er_reports_line() {
        let text = "FN x\nVR 1.0\nPT J\nTI a\nUT W1\nPT J\nTI b\nUT W2\nER\nEF\n";
        match parse_tagged(text.as_bytes()) {
            Err(FormatError::MalformedBlock { line }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "FN x\nPT J\nTI a\nUT W1\n";
        assert!(matches!(
            parse_tagged(text.as_bytes()),
            Err(FormatError::MalformedBlock { line: 2 })
        ));
    }

    #[test]
    fn header_required() {
        assert!(matches!(
            parse_tagged("PT J\nER\n".as_bytes()),
            Err(FormatError::MissingHeader)
        ));
    }

    #[test]
    fn year_out_of_range_warns() {
        let text = "FN x\nPT J\nUT W1\nPY 1800\nTC many\nER\nEF\n";
        let out = parse_tagged(text.as_bytes()).unwrap();
        assert_eq!(out.records[0].year, None);
        assert_eq!(out.records[0].citation_count, 0);
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn tabular_basic() {
        let out = parse_tabular("UT\tTI\tPY\nW1\tA study\t2020\n".as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert_eq!(r.ut, "W1");
        assert_eq!(r.title, "A study");
        assert_eq!(r.year, Some(2020));
    }

    #[test]
    fn tabular_empty_abstract_and_unknown_column() {
        let out = parse_tabular("UT\tAB\tZZ\nW1\t\tjunk\n".as_bytes()).unwrap();
        assert_eq!(out.records[0].abstract_text, "");
    }

    #[test]
    fn tabular_errors() {
        assert!(matches!(
            parse_tabular("TI\tPY\nx\t2020\n".as_bytes()),
            Err(FormatError::HeaderMissingUT)
        ));
        let out = parse_tabular("UT\tTI\nW1\tok\nW2\ttoo\tmany\n".as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(
            out.warnings[0].kind,
            WarningKind::RowArity {
                expected: 2,
                found: 3
            }
        );
    }

    #[test]
    fn both_layouts_agree() {
        let tagged = parse_tagged(THREE_BLOCKS.as_bytes()).unwrap().records;
        let tab = parse_tabular(write_tabular(&tagged).as_bytes()).unwrap().records;
        assert_eq!(tagged, tab);
    }
}
