mod common;

use std::collections::BTreeSet;

use common::{fixtures, random_corpus};
use delineate::formats::{parse_tabular, parse_tagged, write_tabular, write_tagged, FormatError, WarningKind};
use delineate::store::{Corpus, StoreError};
use delineate::Record;
use proptest::prelude::*;

fn without_topic(mut rs: Vec<Record>) -> Vec<Record> {
    rs.iter_mut().for_each(|r| r.citation_topic = None);
    rs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tagged_round_trip(seed in any::<u64>(), n in 0usize..40) {
        let rs = without_topic(random_corpus(seed, n));
        let back = parse_tagged(write_tagged(&rs).as_bytes()).unwrap();
        prop_assert!(back.warnings.iter().all(|w| matches!(w.kind, WarningKind::UnparsedAddresses(_))));
        prop_assert_eq!(back.records, rs);
    }

    #[test]
    fn tabular_round_trip(seed in any::<u64>(), n in 0usize..40) {
        let rs = without_topic(random_corpus(seed, n));
        let back = parse_tabular(write_tabular(&rs).as_bytes()).unwrap();
        prop_assert_eq!(back.records, rs);
    }
}

#[test]
fn thousand_rows_round_trip_through_tabular() {
    let rs = without_topic(random_corpus(1000, 1000));
    assert_eq!(parse_tabular(write_tabular(&rs).as_bytes()).unwrap().records, rs);
}

#[test]
fn both_layouts_of_one_export_agree() {
    let text = std::fs::read_to_string(fixtures().join("e2e/export_a.txt")).unwrap();
    let tagged = parse_tagged(text.as_bytes()).unwrap();
    assert_eq!(tagged.records.len(), 250);
    let tabular = parse_tabular(write_tabular(&tagged.records).as_bytes()).unwrap();
    assert_eq!(tabular.records, tagged.records);
    let r = &tagged.records[1];
    assert_eq!(r.countries, vec!["China"]);
    assert!(r.keywords_plus.iter().all(|k| k == &k.to_uppercase()));
}

#[test]
fn block_without_ut_is_skipped_with_a_warning() {
    let text = "FN x\nVR 1.0\nPT J\nTI a\nUT W1\nER\nPT J\nTI b\nER\nPT J\nTI c\nUT W3\nER\nEF\n";
    let out = parse_tagged(text.as_bytes()).unwrap();
    assert_eq!(out.records.len(), 2);
    assert_eq!(out.warnings.len(), 1);
    assert_eq!(out.warnings[0].kind, WarningKind::MissingUT);
    assert_eq!(out.warnings[0].line, 7);
}

#[test]
fn malformed_inputs() {
    assert!(matches!(parse_tagged("PT J\n".as_bytes()), Err(FormatError::MissingHeader)));
    assert!(matches!(
        parse_tagged("FN x\nPT J\nTI a\n".as_bytes()),
        Err(FormatError::MalformedBlock { line: 2 })
    ));
    assert!(matches!(parse_tabular("TI\tAB\nx\ty\n".as_bytes()), Err(FormatError::HeaderMissingUT)));
}

#[test]
fn store_keeps_one_record_per_ut() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Corpus::open_or_create(dir.path(), "main").unwrap();
    let rs = random_corpus(3, 50);
    c.store(rs[..30].to_vec(), None).unwrap();
    let mut changed = rs[10].clone();
    changed.title = "replaced".into();
    c.store([rs[20..].to_vec(), vec![changed.clone()]].concat(), None).unwrap();
    let reopened = Corpus::open(dir.path(), "main").unwrap();
    assert_eq!(reopened.len(), 50);
    assert_eq!(reopened.get(&rs[10].ut).unwrap().unwrap(), changed);
    let all = reopened.load_all().unwrap();
    let uts: BTreeSet<_> = all.iter().map(|r| r.ut.clone()).collect();
    assert_eq!(uts.len(), all.len());
    let sub: BTreeSet<String> = [rs[0].ut.clone(), rs[49].ut.clone()].into();
    assert_eq!(reopened.load_subset(&sub).unwrap().len(), 2);
}

#[test]
fn opening_a_missing_corpus_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(Corpus::open(dir.path(), "nope"), Err(StoreError::NotFound(_))));
}
