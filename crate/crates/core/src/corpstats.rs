//! Lexical-variation and information-structure metrics over extracted
//! constructions: MATTR, 10MFL, anaphoric distance, pick-up rates and topic
//! scores.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MATTR_WINDOW: usize = 40;
pub const SALIENCY_WINDOWS: [usize; 4] = [1, 5, 30, 60];
pub const TOPIC_SALIENCY_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mattr {
    pub value: f64,
    /// The series was shorter than the window; `value` is the plain TTR.
    pub fallback: bool,
}

/// Moving-average type-token ratio.
pub fn mattr<S: AsRef<str>>(series: &[S], window: usize) -> Result<Mattr> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("MATTR of an empty series".into()));
    }
    if window == 0 {
        return Err(Error::InvalidArgument(
            "MATTR window must be positive".into(),
        ));
    }
    if series.len() < window {
        let types: BTreeSet<&str> = series.iter().map(AsRef::as_ref).collect();
        return Ok(Mattr {
            value: types.len() as f64 / series.len() as f64,
            fallback: true,
        });
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &series[..window] {
        *counts.entry(s.as_ref()).or_default() += 1;
    }
    let mut total = counts.len();
    for i in window..series.len() {
        let out = series[i - window].as_ref();
        let c = counts.get_mut(out).expect("window member");
        *c -= 1;
        if *c == 0 {
            counts.remove(out);
        }
        *counts.entry(series[i].as_ref()).or_default() += 1;
        total += counts.len();
    }
    let windows = series.len() - window + 1;
    Ok(Mattr {
        value: total as f64 / (windows * window) as f64,
        fallback: false,
    })
}

/// Share of occurrences covered by the ten most frequent lemmas; equal
/// frequencies are ranked lexicographically.
pub fn ten_mfl<S: AsRef<str>>(series: &[S]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("10MFL of an empty series".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in series {
        *counts.entry(s.as_ref()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let covered: usize = ranked.iter().take(10).map(|x| x.1).sum();
    Ok(covered as f64 / series.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Givenness {
    Old,
    New,
    AccInf,
    AccGen,
    AccSit,
    NonSpec,
    Kind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Animacy {
    Human,
    Org,
    Animal,
    Concrete,
    Time,
    Place,
    NonConc,
    Veh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Realization {
    Null,
    PersonalPronoun,
    ProperNoun,
    CommonNoun,
    Other,
}

fn parse_label<T: for<'de> Deserialize<'de>>(s: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase()))
        .map_err(|_| Error::InvalidArgument(format!("unknown {what} label {s:?}")))
}

impl FromStr for Givenness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(s, "givenness")
    }
}

impl FromStr for Animacy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(s, "animacy")
    }
}

impl FromStr for Realization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_label(s, "realization")
    }
}

/// One mention; `token` is the position in document order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub sentence: usize,
    pub token: usize,
    /// Index of the antecedent mention within the same record.
    pub antecedent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferentRecord {
    pub id: String,
    pub mentions: Vec<Mention>,
}

impl ReferentRecord {
    pub fn validate(&self) -> Result<()> {
        for w in self.mentions.windows(2) {
            if (w[1].sentence, w[1].token) <= (w[0].sentence, w[0].token)
                || w[1].token <= w[0].token
            {
                return Err(Error::Data(format!(
                    "mentions of {} are not strictly increasing",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distance {
    Tokens(usize),
    NoAntecedent,
}

/// Tokens strictly between a mention and its antecedent.
pub fn anaphoric_distance(record: &ReferentRecord, mention: usize) -> Result<Distance> {
    let m = record
        .mentions
        .get(mention)
        .ok_or_else(|| Error::InvalidArgument(format!("mention {mention} out of range")))?;
    let Some(a) = m.antecedent else {
        return Ok(Distance::NoAntecedent);
    };
    let a = record
        .mentions
        .get(a)
        .ok_or_else(|| Error::Data(format!("antecedent {a} of {} missing", record.id)))?;
    if a.token >= m.token {
        return Err(Error::Data(format!(
            "antecedent of {} follows its anaphor",
            record.id
        )));
    }
    Ok(Distance::Tokens(m.token - a.token - 1))
}

/// Mentions in the `window` sentences before `at`, excluding `at` itself.
pub fn pickup_rate(record: &ReferentRecord, at: usize, window: usize) -> Result<usize> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "pick-up window must be positive".into(),
        ));
    }
    let lo = at.saturating_sub(window);
    Ok(record
        .mentions
        .iter()
        .filter(|m| m.sentence >= lo && m.sentence < at)
        .count())
}

/// Topic-score weights. Setting a weight to zero disables that bonus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicWeights {
    pub old: i64,
    pub acc_inf: i64,
    pub acc_sit: i64,
    pub acc_gen: i64,
    pub new: i64,
    pub top_saliency: i64,
    pub first: i64,
    pub null: i64,
    /// Givenness statuses that forfeit the null-realization bonus.
    pub null_exceptions: BTreeSet<Givenness>,
    pub personal_pronoun: i64,
    pub human_proper_noun: i64,
    pub sub: i64,
    pub obj: i64,
    pub obl: i64,
    pub comp_adv: i64,
    pub human: i64,
    pub org: i64,
    pub animal: i64,
    pub concrete: i64,
    pub antecedent_outranks: i64,
}

impl Default for TopicWeights {
    fn default() -> Self {
        TopicWeights {
            old: 15,
            acc_inf: 10,
            acc_sit: 13,
            acc_gen: 5,
            new: 0,
            top_saliency: 10,
            first: 15,
            null: 30,
            null_exceptions: BTreeSet::from([Givenness::NonSpec]),
            personal_pronoun: 5,
            human_proper_noun: 5,
            sub: 10,
            obj: 5,
            obl: 2,
            comp_adv: 1,
            human: 10,
            org: 5,
            animal: 3,
            concrete: 3,
            antecedent_outranks: 2,
        }
    }
}

impl TopicWeights {
    pub fn givenness(&self, g: Givenness) -> i64 {
        match g {
            Givenness::Old => self.old,
            Givenness::AccInf => self.acc_inf,
            Givenness::AccSit => self.acc_sit,
            Givenness::AccGen => self.acc_gen,
            Givenness::New => self.new,
            Givenness::NonSpec | Givenness::Kind => 0,
        }
    }

    pub fn relation(&self, r: &str) -> i64 {
        match r {
            "SUB" => self.sub,
            "OBJ" => self.obj,
            "OBL" => self.obl,
            "COMP" | "ADV" => self.comp_adv,
            _ => 0,
        }
    }

    pub fn animacy(&self, a: Animacy) -> i64 {
        match a {
            Animacy::Human => self.human,
            Animacy::Org => self.org,
            Animacy::Animal => self.animal,
            Animacy::Concrete => self.concrete,
            Animacy::Time | Animacy::Place | Animacy::NonConc | Animacy::Veh => 0,
        }
    }
}

/// A topic candidate in one sentence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TopicCandidate {
    pub givenness: Option<Givenness>,
    pub animacy: Option<Animacy>,
    pub realization: Option<Realization>,
    pub relation: Option<String>,
    /// Linearly first candidate of its sentence.
    pub first: bool,
    /// Highest 30-sentence saliency among the sentence's candidates.
    pub top_saliency: bool,
    /// Immediate antecedent outranks intervening candidates.
    pub antecedent_outranks: bool,
}

pub fn topic_score(c: &TopicCandidate, w: &TopicWeights) -> Result<i64> {
    let mut missing = Vec::new();
    if c.givenness.is_none() {
        missing.push("givenness");
    }
    if c.animacy.is_none() {
        missing.push("animacy");
    }
    if c.realization.is_none() {
        missing.push("realization");
    }
    if c.relation.is_none() {
        missing.push("relation");
    }
    let (Some(g), Some(a), Some(r), Some(rel)) =
        (c.givenness, c.animacy, c.realization, c.relation.as_deref())
    else {
        return Err(Error::InvalidArgument(format!(
            "topic candidate lacks {}",
            missing.join(", ")
        )));
    };
    let realization = match r {
        Realization::Null if !w.null_exceptions.contains(&g) => w.null,
        Realization::PersonalPronoun => w.personal_pronoun,
        Realization::ProperNoun if a == Animacy::Human => w.human_proper_noun,
        _ => 0,
    };
    Ok(w.givenness(g)
        + realization
        + w.relation(rel)
        + w.animacy(a)
        + if c.first { w.first } else { 0 }
        + if c.top_saliency { w.top_saliency } else { 0 }
        + if c.antecedent_outranks {
            w.antecedent_outranks
        } else {
            0
        })
}

/// Hierarchy ranks used for the antecedent comparison (higher outranks).
fn ranks(g: Givenness, a: Animacy, rel: &str, w: &TopicWeights) -> [i64; 3] {
    [w.relation(rel), w.animacy(a), w.givenness(g)]
}

/// True when the antecedent strictly outranks every intervening candidate on
/// relation, animacy and givenness. Vacuously true without intervening
/// candidates.
pub fn antecedent_outranks(
    antecedent: (Givenness, Animacy, &str),
    intervening: &[(Givenness, Animacy, &str)],
    w: &TopicWeights,
) -> bool {
    let a = ranks(antecedent.0, antecedent.1, antecedent.2, w);
    intervening.iter().all(|&(g, an, r)| {
        let b = ranks(g, an, r, w);
        a.iter().zip(&b).all(|(x, y)| x > y)
    })
}

/// Fills `first` (lowest position) and `top_saliency` (highest saliency,
/// all ties, only when positive) for one sentence's candidates, then scores
/// them.
pub fn score_sentence(
    cands: &mut [(usize, usize, TopicCandidate)],
    w: &TopicWeights,
) -> Result<Vec<i64>> {
    let first = cands.iter().map(|c| c.0).min();
    let top = cands.iter().map(|c| c.1).max().unwrap_or(0);
    let mut first_taken = false;
    let mut out = Vec::with_capacity(cands.len());
    for (pos, sal, c) in cands.iter_mut() {
        c.first = Some(*pos) == first && !first_taken;
        first_taken |= c.first;
        c.top_saliency = top > 0 && *sal == top;
        out.push(topic_score(c, w)?);
    }
    Ok(out)
}

fn is_vowel(c: char) -> bool {
    "aeiouyěęǫъьыꙑ".contains(c)
}

fn is_consonant(c: char) -> bool {
    c.is_alphabetic() && !is_vowel(c) && c != 'j'
}

/// Merges Old Church Slavonic and Old East Slavic lemma spellings.
pub fn normalize_orthography(lemma: &str) -> String {
    let mut s = lemma.to_lowercase();
    for (from, to) in [
        ("ję", "ja"),
        ("ę", "ja"),
        ("jǫ", "ju"),
        ("ǫ", "u"),
        ("je", "e"),
        ("ě", "e"),
    ] {
        s = s.replace(from, to);
    }
    if let Some(rest) = s.strip_prefix('a') {
        s = format!("ja{rest}");
    }
    if let Some(stem) = s.strip_suffix("ii") {
        s = format!("{stem}ь");
    } else if let Some(stem) = s.strip_suffix("yi") {
        s = format!("{stem}ъ");
    }
    s = s.replace(['y', 'ꙑ'], "ы");
    let mut c: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i + 3 < c.len() {
        if is_consonant(c[i])
            && (c[i + 1] == 'ъ' || c[i + 1] == 'ь')
            && (c[i + 2] == 'r' || c[i + 2] == 'l')
            && is_consonant(c[i + 3])
        {
            c.swap(i + 1, i + 2);
            i += 3;
        } else {
            i += 1;
        }
    }
    c.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub subset: String,
    pub n: usize,
    pub mattr: f64,
    pub ten_mfl: f64,
    pub notes: String,
}

/// MATTR and 10MFL for one subset, optionally after orthographic
/// normalization.
pub fn metric_row<S: AsRef<str>>(
    subset: &str,
    series: &[S],
    window: usize,
    normalize: bool,
) -> Result<MetricRow> {
    let lemmas: Vec<String> = series
        .iter()
        .map(|s| {
            if normalize {
                normalize_orthography(s.as_ref())
            } else {
                s.as_ref().to_string()
            }
        })
        .collect();
    let m = mattr(&lemmas, window)?;
    let mut notes = vec![
        if normalize { "N" } else { "non-N" }.to_string(),
        "ties=lexicographic".into(),
    ];
    if m.fallback {
        notes.push(format!("ttr-fallback(n<{window})"));
    }
    Ok(MetricRow {
        subset: subset.to_string(),
        n: lemmas.len(),
        mattr: m.value,
        ten_mfl: ten_mfl(&lemmas)?,
        notes: notes.join(";"),
    })
}

pub fn write_metrics_tsv(rows: &[MetricRow], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("subset\tn\tmattr\tten_mfl\tnotes\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.6}\t{:.6}\t{}",
            r.subset, r.n, r.mattr, r.ten_mfl, r.notes
        );
    }
    out
}
