use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use semmap_core::align::NULL_FORM;
use semmap_core::stats::{fisher_exact, Tails};
use semmap_core::typology::{
    build_dictionary, classify_pattern, score_means, AreaDictionary, CoreCounts, Group, Pattern,
    SUBPATTERNS,
};

fn dict(groups: [Vec<String>; 3]) -> AreaDictionary {
    AreaDictionary(
        Group::ALL
            .iter()
            .zip(groups)
            .map(|(g, v)| (*g, v.into_iter().collect()))
            .collect(),
    )
}

/// Pattern of a one-means-per-group dictionary straight from the equalities.
fn basic_oracle(tl: &str, ml: &str, bl: &str) -> Pattern {
    if tl == ml && ml == bl {
        Pattern::A
    } else if tl == ml {
        Pattern::B
    } else if ml == bl {
        Pattern::C
    } else if tl == bl {
        Pattern::E
    } else {
        Pattern::D
    }
}

#[test]
fn basic_patterns_over_all_equalities() {
    let names = ["na", "ko", "NULL"];
    for tl in names {
        for ml in names {
            for bl in names {
                let d = AreaDictionary::from_lists(&[tl], &[ml], &[bl]);
                let a = classify_pattern(&d);
                assert_eq!(a.pattern, basic_oracle(tl, ml, bl), "{tl} {ml} {bl}");
                assert_eq!(a.subpattern, None);
                assert_eq!(
                    a.null_flags,
                    [tl == NULL_FORM, ml == NULL_FORM, bl == NULL_FORM]
                );
            }
        }
    }
}

/// Builds a dictionary from a template such as `X YW Z`, naming letters via `names`.
fn from_template(t: &str, names: &BTreeMap<char, String>) -> AreaDictionary {
    let parts: Vec<&str> = t.split(' ').collect();
    let groups = std::array::from_fn(|g| {
        parts[g]
            .chars()
            .filter(|c| *c != '?')
            .map(|c| names[&c].clone())
            .collect()
    });
    dict(groups)
}

#[test]
fn every_subpattern_template_is_recognised() {
    let names: BTreeMap<char, String> = [('X', "zu"), ('Y', "am"), ('Z', "NULL"), ('W', "be")]
        .iter()
        .map(|(c, s)| (*c, s.to_string()))
        .collect();
    for (template, label) in SUBPATTERNS {
        let a = classify_pattern(&from_template(template, &names));
        assert_eq!(a.subpattern.as_deref(), Some(label), "{template}");
        if template.contains('?') {
            assert_eq!(a.pattern, Pattern::UnclassifiedNoArea);
        } else {
            let lead = label.chars().next().unwrap().to_string();
            assert_eq!(a.pattern.to_string(), lead, "{template}");
        }
    }
}

#[test]
fn unlisted_shapes_are_unclassified() {
    let d = AreaDictionary::from_lists(&["a", "b"], &["c", "d"], &["e"]);
    assert_eq!(classify_pattern(&d).pattern, Pattern::UnclassifiedOther);
    let d = AreaDictionary::from_lists(&[], &[], &["e"]);
    assert_eq!(classify_pattern(&d).pattern, Pattern::UnclassifiedNoArea);
}

fn counts(k: usize, rows: &[(Group, &str, usize)]) -> CoreCounts {
    let mut c: BTreeMap<Group, BTreeMap<String, usize>> = BTreeMap::new();
    for &(g, m, n) in rows {
        c.entry(g).or_default().insert(m.to_string(), n);
    }
    CoreCounts { k, counts: c }
}

#[test]
fn dictionary_heuristics() {
    // Null dropped when a lexical area also contains the group.
    let c = counts(
        30,
        &[
            (Group::TL, "bong", 30),
            (Group::TL, NULL_FORM, 30),
            (Group::ML, "bong", 30),
            (Group::BL, NULL_FORM, 20),
        ],
    );
    let d = build_dictionary(&c, 0.01);
    assert_eq!(
        d,
        AreaDictionary::from_lists(&["bong"], &["bong"], &["NULL"])
    );

    // Shared competitor in ML loses against a significantly richer one.
    let c = counts(
        30,
        &[
            (Group::TL, "ken", 30),
            (Group::ML, "ken", 28),
            (Group::ML, "ka", 6),
            (Group::BL, "ka", 30),
        ],
    );
    assert!(fisher_exact(28, 2, 6, 24, Tails::Two).p_value < 0.01);
    assert_eq!(
        build_dictionary(&c, 0.01),
        AreaDictionary::from_lists(&["ken"], &["ken"], &["ka"])
    );

    // Comparable counts keep both.
    let c = counts(
        30,
        &[
            (Group::TL, "ken", 30),
            (Group::ML, "ken", 20),
            (Group::ML, "ka", 18),
            (Group::BL, "ka", 30),
        ],
    );
    assert_eq!(
        build_dictionary(&c, 0.01),
        AreaDictionary::from_lists(&["ken"], &["ka", "ken"], &["ka"])
    );

    // A unique area is kept even when poorer than a shared one.
    let c = counts(
        30,
        &[
            (Group::TL, "a", 30),
            (Group::ML, "a", 29),
            (Group::ML, "b", 3),
            (Group::BL, "a", 30),
        ],
    );
    assert_eq!(
        build_dictionary(&c, 0.01),
        AreaDictionary::from_lists(&["a"], &["a", "b"], &["a"])
    );

    // A unique area significantly richer than a shared one removes it.
    let c = counts(
        30,
        &[
            (Group::TL, "a", 30),
            (Group::ML, "a", 3),
            (Group::ML, "b", 29),
            (Group::BL, "c", 30),
        ],
    );
    assert_eq!(
        build_dictionary(&c, 0.01),
        AreaDictionary::from_lists(&["a"], &["b"], &["c"])
    );

    // No containing area leaves the group empty.
    let c = counts(30, &[(Group::TL, "a", 30), (Group::ML, "a", 30)]);
    assert_eq!(
        build_dictionary(&c, 0.01),
        AreaDictionary::from_lists(&["a"], &["a"], &[])
    );
}

fn brute_scores(
    assign: &[usize],
    labels: &[String],
    cluster: usize,
) -> BTreeMap<String, (usize, usize, usize, f64)> {
    let members: Vec<usize> = (0..assign.len())
        .filter(|&i| assign[i] == cluster)
        .collect();
    let names: BTreeSet<&String> = members.iter().map(|&i| &labels[i]).collect();
    names
        .into_iter()
        .map(|m| {
            let tp = members.iter().filter(|&&i| &labels[i] == m).count();
            let fp = (0..assign.len())
                .filter(|&i| &labels[i] == m && assign[i] != cluster)
                .count();
            let fn_ = members.len() - tp;
            let p = tp as f64 / (tp + fp) as f64;
            let r = tp as f64 / (tp + fn_) as f64;
            (m.clone(), (tp, fp, fn_, 2.0 * p * r / (p + r)))
        })
        .collect()
}

proptest! {
    #[test]
    fn classification_ignores_means_names(
        shape in prop::array::uniform3(prop::collection::btree_set(0usize..5, 0..3)),
        names in prop::sample::subsequence(vec!["a", "ba", "NULL", "ze", "mo", "qi", "xu"], 5).prop_shuffle(),
        rename in prop::sample::subsequence(vec!["ta", "ab", "NULL", "ow", "ik", "pu", "ee"], 5).prop_shuffle(),
    ) {
        let build = |ns: &[&str]| dict(std::array::from_fn(|g| shape[g].iter().map(|&i| ns[i].to_string()).collect()));
        let a = classify_pattern(&build(&names));
        let b = classify_pattern(&build(&rename));
        prop_assert_eq!(a.pattern, b.pattern);
        prop_assert_eq!(a.subpattern, b.subpattern);
        prop_assert_eq!(a.template, b.template);
    }

    #[test]
    fn score_means_matches_brute_force(
        data in prop::collection::vec((0usize..3, 0usize..4), 1..60),
        cluster in 0usize..3,
    ) {
        let assign: Vec<usize> = data.iter().map(|d| d.0).collect();
        let labels: Vec<String> = data.iter().map(|d| ["NULL", "a", "b", "c"][d.1].to_string()).collect();
        let expect = brute_scores(&assign, &labels, cluster);
        match score_means(&assign, &labels, cluster) {
            Err(_) => prop_assert!(expect.is_empty()),
            Ok((scores, best)) => {
                prop_assert_eq!(scores.len(), expect.len());
                for s in &scores {
                    let (tp, fp, fn_, f1) = expect[&s.means];
                    prop_assert_eq!((s.tp, s.fp, s.fn_), (tp, fp, fn_));
                    prop_assert!((s.f1 - f1).abs() < 1e-12);
                }
                let top = expect.values().map(|v| v.3).fold(f64::MIN, f64::max);
                let first = expect.iter().find(|(_, v)| v.3 == top).unwrap().0;
                prop_assert_eq!(&scores[best].means, first);
            }
        }
    }
}
