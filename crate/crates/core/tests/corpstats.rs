use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use semmap_core::corpstats::{
    anaphoric_distance, mattr, pickup_rate, score_sentence, ten_mfl, topic_score, Animacy,
    Distance, Givenness, Mention, Realization, ReferentRecord, TopicCandidate, TopicWeights,
};

fn naive_mattr(series: &[String], window: usize) -> f64 {
    if series.len() < window {
        let t: BTreeSet<&String> = series.iter().collect();
        return t.len() as f64 / series.len() as f64;
    }
    let ratios: Vec<f64> = series
        .windows(window)
        .map(|w| w.iter().collect::<BTreeSet<_>>().len() as f64 / window as f64)
        .collect();
    ratios.iter().sum::<f64>() / ratios.len() as f64
}

fn naive_ten_mfl(series: &[String]) -> f64 {
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for s in series {
        *counts.entry(s).or_default() += 1;
    }
    let mut freqs: Vec<usize> = counts.values().copied().collect();
    freqs.sort_unstable_by(|a, b| b.cmp(a));
    // Tie order among equal frequencies cannot change the covered total.
    freqs.iter().take(10).sum::<usize>() as f64 / series.len() as f64
}

fn lemma_series() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0u8..30).prop_map(|i| format!("l{i}")), 1..200)
}

#[test]
fn mattr_fixed_points() {
    let same = vec!["byti"; 100];
    let m = mattr(&same, 40).unwrap();
    assert_eq!(m.value, 0.025);
    assert!(!m.fallback);
    let distinct: Vec<String> = (0..100).map(|i| format!("w{i}")).collect();
    assert_eq!(mattr(&distinct, 40).unwrap().value, 1.0);
    let short = mattr(&["a", "b", "a"], 40).unwrap();
    assert!(short.fallback);
    assert!((short.value - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn ten_mfl_fixed_points() {
    let few: Vec<String> = (0..50).map(|i| format!("w{}", i % 10)).collect();
    assert_eq!(ten_mfl(&few).unwrap(), 1.0);
    let twenty: Vec<String> = (0..100).map(|i| format!("w{:02}", i % 20)).collect();
    assert_eq!(ten_mfl(&twenty).unwrap(), 0.5);
}

fn record(id: &str, at: &[(usize, usize)]) -> ReferentRecord {
    ReferentRecord {
        id: id.into(),
        mentions: at
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| Mention {
                sentence: s,
                token: t,
                antecedent: i.checked_sub(1),
            })
            .collect(),
    }
}

#[test]
fn distances_and_pickups_on_a_small_document() {
    // Sentences of lengths 6, 4, 9, 5 starting at tokens 0, 6, 10, 19.
    let r = record("isus", &[(0, 2), (0, 3), (1, 8), (2, 18), (3, 19)]);
    r.validate().unwrap();
    assert_eq!(anaphoric_distance(&r, 0).unwrap(), Distance::NoAntecedent);
    assert_eq!(anaphoric_distance(&r, 1).unwrap(), Distance::Tokens(0));
    assert_eq!(anaphoric_distance(&r, 2).unwrap(), Distance::Tokens(4));
    assert_eq!(anaphoric_distance(&r, 3).unwrap(), Distance::Tokens(9));
    assert_eq!(anaphoric_distance(&r, 4).unwrap(), Distance::Tokens(0));
    assert_eq!(pickup_rate(&r, 0, 1).unwrap(), 0);
    assert_eq!(pickup_rate(&r, 1, 1).unwrap(), 2);
    assert_eq!(pickup_rate(&r, 3, 1).unwrap(), 1);
    assert_eq!(pickup_rate(&r, 3, 5).unwrap(), 4);
    assert_eq!(pickup_rate(&r, 4, 60).unwrap(), 5);
}

#[test]
fn antecedent_fifteen_back() {
    let r = record("x", &[(0, 5), (1, 20)]);
    assert_eq!(anaphoric_distance(&r, 1).unwrap(), Distance::Tokens(14));
}

fn full_candidate() -> TopicCandidate {
    TopicCandidate {
        givenness: Some(Givenness::Old),
        animacy: Some(Animacy::Human),
        realization: Some(Realization::Null),
        relation: Some("SUB".into()),
        first: true,
        top_saliency: true,
        antecedent_outranks: true,
    }
}

#[test]
fn topic_scores_are_hand_sums() {
    let w = TopicWeights::default();
    assert_eq!(
        topic_score(&full_candidate(), &w).unwrap(),
        15 + 30 + 10 + 10 + 15 + 10 + 2
    );
    let low = TopicCandidate {
        givenness: Some(Givenness::New),
        animacy: Some(Animacy::Time),
        realization: Some(Realization::CommonNoun),
        relation: Some("OBL".into()),
        ..TopicCandidate::default()
    };
    assert_eq!(topic_score(&low, &w).unwrap(), 2);
}

#[test]
fn removing_a_feature_removes_its_weight() {
    let w = TopicWeights::default();
    let full = topic_score(&full_candidate(), &w).unwrap();
    let drop = |f: fn(&mut TopicCandidate)| {
        let mut c = full_candidate();
        f(&mut c);
        full - topic_score(&c, &w).unwrap()
    };
    assert_eq!(drop(|c| c.first = false), w.first);
    assert_eq!(drop(|c| c.top_saliency = false), w.top_saliency);
    assert_eq!(
        drop(|c| c.antecedent_outranks = false),
        w.antecedent_outranks
    );
    assert_eq!(drop(|c| c.relation = Some("ATR".into())), w.sub);
    assert_eq!(drop(|c| c.realization = Some(Realization::Other)), w.null);
    assert_eq!(drop(|c| c.animacy = Some(Animacy::Veh)), w.human);
    let zeroed = TopicWeights {
        null: 0,
        ..TopicWeights::default()
    };
    assert_eq!(
        full - topic_score(&full_candidate(), &zeroed).unwrap(),
        w.null
    );
}

#[test]
fn missing_labels_are_listed() {
    let c = TopicCandidate {
        givenness: Some(Givenness::Old),
        ..TopicCandidate::default()
    };
    let err = topic_score(&c, &TopicWeights::default())
        .unwrap_err()
        .to_string();
    for label in ["animacy", "realization", "relation"] {
        assert!(err.contains(label), "{err}");
    }
}

#[test]
fn identical_candidates_differ_only_by_order_bonus() {
    let base = TopicCandidate {
        first: false,
        top_saliency: false,
        ..full_candidate()
    };
    let mut cands = vec![(4, 3, base.clone()), (2, 3, base)];
    let s = score_sentence(&mut cands, &TopicWeights::default()).unwrap();
    assert_eq!(s[1] - s[0], 15);
    assert!(cands[0].2.top_saliency && cands[1].2.top_saliency);
}

proptest! {
    #[test]
    fn mattr_matches_windowed_recount(series in lemma_series(), window in 1usize..60) {
        let got = mattr(&series, window).unwrap();
        prop_assert!((got.value - naive_mattr(&series, window)).abs() < 1e-12);
        prop_assert_eq!(got.fallback, series.len() < window);
        if !got.fallback {
            prop_assert!(got.value >= 1.0 / window as f64 - 1e-12 && got.value <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn mattr_never_drops_with_a_fresh_type(series in lemma_series(), window in 1usize..40, at in 0usize..200) {
        let at = at % series.len();
        let mut fresh = series.clone();
        fresh[at] = "novum".into();
        let before = mattr(&series, window).unwrap().value;
        prop_assert!(mattr(&fresh, window).unwrap().value >= before - 1e-12);
    }

    #[test]
    fn ten_mfl_matches_tally(series in lemma_series()) {
        let got = ten_mfl(&series).unwrap();
        prop_assert!((got - naive_ten_mfl(&series)).abs() < 1e-12);
        prop_assert!(got > 0.0 && got <= 1.0);
        let mut reversed = series.clone();
        reversed.reverse();
        prop_assert_eq!(ten_mfl(&reversed).unwrap(), got);
    }

    #[test]
    fn pickup_matches_scan(sents in prop::collection::btree_set(0usize..80, 1..20), at in 0usize..90, wi in 0usize..4) {
        let window = [1, 5, 30, 60][wi];
        let at_list: Vec<(usize, usize)> = sents.iter().map(|&s| (s, s * 10)).collect();
        let r = record("r", &at_list);
        let expect = sents.iter().filter(|&&s| s < at && s + window >= at).count();
        prop_assert_eq!(pickup_rate(&r, at, window).unwrap(), expect);
    }
}
