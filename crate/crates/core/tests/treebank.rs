use proptest::prelude::*;

use semmap_core::treebank::{
    emit_proiel, emit_rows, extract_all, inject_annotations, parse_treebank, strip_placeholders,
    EditRules, ExtractOptions, Kind, Position,
};

const FIXTURE: &str = include_str!("fixtures/constructions.xml");

const EXPECTED: &str = "\
s01\tconjunct\t2\t4\tpre-matrix\tovert:3\tVS\tpfv\tsentence-initial
s02\tconjunct\t2\t3\tpre-matrix\tnull\tnone\tpfv\tsentence-initial
s03\tconjunct\t1\t4\tpre-matrix\tnull\tnone\tpfv\tsentence-initial
s03\tconjunct\t3\t4\tpre-matrix\tnull\tnone\tpfv\tshared
s04\tabsolute\t2\t5\tpre-matrix\tovert:3\tVS\tipfv\tsentence-initial
s05\tabsolute\t2\t5\tpre-matrix\tnull\tnone\tpfv\tnon-canonical,sentence-initial
s06\tjegda\t1,2\t4\tpre-matrix\tovert:3\tVS\tunknown\tsentence-initial
s07\tjegda\t1,2\t6\tpre-matrix\tnull\tnone\tunknown\tsentence-initial
s07\tjegda\t4,5\t6\tpre-matrix\tnull\tnone\tunknown\t-
s09\tjegda\t4,5\t2\tpost-matrix\tnull\tnone\tunknown\t-
s10\tabsolute\t2\t4\tpre-matrix\tovert:3\tVS\tipfv\taugmented,sentence-initial
s11\tconjunct\t3\t2\tpost-matrix\tovert:1\tSV\tipfv\tshared,subj-nonadjacent
s12\tconjunct\t1\t5\tpre-matrix\timpersonal\tnone\tpfv\tnon-canonical,sentence-initial
";

fn rows(tsv: &str) -> String {
    tsv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("sentence-id"))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[test]
fn fixture_yields_expected_constructions() {
    let sentences = parse_treebank(FIXTURE).unwrap();
    assert_eq!(sentences.len(), 12);
    let found = extract_all(&sentences, &ExtractOptions::default());
    let got = rows(&semmap_core::treebank::write_constructions_tsv(&found, ""));
    assert_eq!(got, EXPECTED);
}

#[test]
fn dative_absolute_subject_is_dative_sub_child() {
    let sentences = parse_treebank(FIXTURE).unwrap();
    let s = sentences.iter().find(|s| s.id == "s04").unwrap();
    let subj = s.token(3).unwrap();
    assert_eq!(subj.relation, "SUB");
    assert_eq!(subj.feat("Case"), Some("Dat"));
    let ptcp = s.token(subj.head).unwrap();
    assert!(ptcp.is_participle());
    assert_eq!(ptcp.feat("Case"), Some("Dat"));
    assert_eq!(ptcp.relation, "ADV");
}

#[test]
fn both_dialects_agree() {
    let xml = parse_treebank(FIXTURE).unwrap();
    let via_rows = parse_treebank(&emit_rows(&xml)).unwrap();
    assert_eq!(via_rows, xml);
    let via_xml = parse_treebank(&emit_proiel(&xml)).unwrap();
    assert_eq!(via_xml, xml);
    let opts = ExtractOptions::default();
    assert_eq!(extract_all(&via_rows, &opts), extract_all(&xml, &opts));
}

#[test]
fn extraction_is_independent_of_sentence_order() {
    let mut sentences = parse_treebank(FIXTURE).unwrap();
    let opts = ExtractOptions::default();
    let forward = extract_all(&sentences, &opts);
    sentences.reverse();
    assert_eq!(extract_all(&sentences, &opts), forward);
}

#[test]
fn positions_follow_linear_order() {
    let sentences = parse_treebank(FIXTURE).unwrap();
    for c in extract_all(&sentences, &ExtractOptions::default()) {
        let s = sentences.iter().find(|s| s.id == c.sentence).unwrap();
        for t in &c.trigger {
            assert!(s.token(*t).is_some());
        }
        let head = *c.trigger.last().unwrap();
        match c.matrix {
            None => assert_eq!(c.position, Position::NA),
            Some(m) => {
                let pre = s.linear(head) <= s.linear(m);
                assert_eq!(c.position == Position::PreMatrix, pre, "{c:?}");
            }
        }
    }
}

#[test]
fn dangling_head_is_rejected_with_sentence_id() {
    let bad = FIXTURE.replace(
        r#"<token id="5" form="tъštǫ" lemma="tъšta" part-of-speech="Nb" morphology="-s---fa--i" head-id="4""#,
        r#"<token id="5" form="tъštǫ" lemma="tъšta" part-of-speech="Nb" morphology="-s---fa--i" head-id="40""#,
    );
    let err = parse_treebank(&bad).unwrap_err().to_string();
    assert!(err.contains("s01"), "{err}");
}

#[test]
fn placeholders_before_constructions() {
    let rules = EditRules::default();
    let out = inject_annotations("i prišedъ isъ vidě", &[(1, Kind::Conjunct)], &rules).unwrap();
    assert_eq!(out, "xadv prišedъ isъ vidě");
    let out = inject_annotations("pozdě byvъšu i pride", &[(1, Kind::Absolute)], &rules).unwrap();
    assert_eq!(out, "pozdě absoluteadv byvъšu pride");
}

#[test]
fn suffix_rules_mark_switch_reference() {
    let rules = EditRules {
        suffix_rules: vec![("-cu".into(), "DS".into()), ("-ca".into(), "SS".into())],
        ..EditRules::default()
    };
    let out = inject_annotations("me'u'axüacu pexeca", &[], &rules).unwrap();
    assert_eq!(out, "DS me'u'axüacu SS pexeca");
}

proptest! {
    #[test]
    fn strip_undoes_injection(
        words in prop::collection::vec(prop::sample::select(vec!["i", "že", "jegda", "pride", "vidě", "byvъšu", "onъ"]), 1..15),
        marks in prop::collection::btree_map(0usize..15, prop::bool::ANY, 0..4),
    ) {
        let rules = EditRules::default();
        let text = words.join(" ");
        let marks: Vec<(usize, Kind)> = marks
            .into_iter()
            .filter(|(i, _)| *i < words.len() && !rules.stopwords.contains(words[*i]))
            .map(|(i, c)| (i, if c { Kind::Conjunct } else { Kind::Absolute }))
            .collect();
        let edited = inject_annotations(&text, &marks, &rules).unwrap();
        let expect: Vec<&str> = words.iter().copied().filter(|w| !rules.stopwords.contains(*w)).collect();
        prop_assert_eq!(strip_placeholders(&edited, &rules), expect.join(" "));
    }
}
