//! Dependency treebanks in a PROIEL-style schema: parsing, extraction of
//! conjunct participles, dative absolutes and jegda-clauses, and placeholder
//! injection for annotated re-alignment.
//!
//! Two input dialects are read:
//!
//! * PROIEL XML: `<sentence id=..>` elements holding `<token>` elements with
//!   `id`, `form`, `lemma`, `part-of-speech`, `morphology`, `head-id`,
//!   `relation`, optional `empty-token-sort`, and nested `<slash>` elements.
//! * A 10-column row format, one token per line:
//!   `ID FORM LEMMA POS MORPH FEATS HEAD REL SLASHES MISC`, where `SLASHES`
//!   lists `target:label` pairs separated by `|` and `MISC` carries
//!   `Empty=Yes` for empty nodes. Sentences start with `# sent_id = ..` and
//!   end with a blank line.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slash {
    pub target: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TbToken {
    pub id: u64,
    /// `None` for empty nodes.
    pub form: Option<String>,
    pub lemma: String,
    pub pos: String,
    /// Positional PROIEL morphology string, or `_`.
    pub morph: String,
    pub feats: BTreeMap<String, String>,
    /// 0 for the root.
    pub head: u64,
    /// Upper-case relation label (PRED, SUB, XADV, ...).
    pub relation: String,
    pub slashes: Vec<Slash>,
    pub empty: bool,
}

impl TbToken {
    pub fn feat(&self, k: &str) -> Option<&str> {
        self.feats.get(k).map(String::as_str)
    }

    pub fn is_verb(&self) -> bool {
        self.pos.starts_with('V') || self.pos == "AUX"
    }

    pub fn is_conjunction(&self) -> bool {
        self.pos == "C-" || self.pos == "CCONJ"
    }

    pub fn is_subjunction(&self) -> bool {
        self.pos == "G-" || self.pos == "SCONJ"
    }

    pub fn is_participle(&self) -> bool {
        self.feat("VerbForm") == Some("Part")
    }

    pub fn is_resultative(&self) -> bool {
        self.feat("Resultative") == Some("Yes")
    }

    pub fn is_punct(&self) -> bool {
        self.pos == "PUNCT"
            || self
                .form
                .as_deref()
                .is_some_and(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_punctuation()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<TbToken>,
}

impl Sentence {
    pub fn token(&self, id: u64) -> Option<&TbToken> {
        self.tokens.iter().find(|t| t.id == id)
    }

    fn idx(&self, id: u64) -> Option<usize> {
        self.tokens.iter().position(|t| t.id == id)
    }

    pub fn children(&self, id: u64) -> impl Iterator<Item = &TbToken> {
        self.tokens.iter().filter(move |t| t.head == id)
    }

    /// Linear position. An empty node takes the position of its nearest overt
    /// ancestor, or sorts after every token when it has none.
    pub fn linear(&self, id: u64) -> usize {
        let mut cur = id;
        for _ in 0..=self.tokens.len() {
            match self.token(cur) {
                Some(t) if !t.empty => return self.idx(cur).expect("token exists"),
                Some(t) => cur = t.head,
                None => break,
            }
        }
        self.tokens.len()
    }

    /// Linear span `[min, max]` of the overt tokens in the subtree of `id`.
    pub fn span(&self, id: u64) -> Option<(usize, usize)> {
        let mut stack = vec![id];
        let mut seen = BTreeSet::new();
        let (mut lo, mut hi) = (usize::MAX, 0);
        while let Some(cur) = stack.pop() {
            if !seen.insert(cur) {
                continue;
            }
            if let Some(i) = self.idx(cur) {
                if !self.tokens[i].empty {
                    lo = lo.min(i);
                    hi = hi.max(i);
                }
            }
            stack.extend(self.children(cur).map(|t| t.id));
        }
        (lo != usize::MAX).then_some((lo, hi))
    }

    /// Checks head/slash references, unique ids, acyclicity and empty-node
    /// forms.
    pub fn validate(&self) -> Result<()> {
        let loc = || format!("sentence {}", self.id);
        let ids: BTreeSet<u64> = self.tokens.iter().map(|t| t.id).collect();
        if ids.len() != self.tokens.len() {
            return Err(Error::parse(loc(), "duplicate token id"));
        }
        for t in &self.tokens {
            if t.id == 0 {
                return Err(Error::parse(loc(), "token id 0 is reserved for the root"));
            }
            if t.head != 0 && !ids.contains(&t.head) {
                return Err(Error::parse(
                    loc(),
                    format!("token {} has dangling head {}", t.id, t.head),
                ));
            }
            if let Some(s) = t.slashes.iter().find(|s| !ids.contains(&s.target)) {
                return Err(Error::parse(
                    loc(),
                    format!("token {} has dangling slash to {}", t.id, s.target),
                ));
            }
            if t.empty && t.form.is_some() {
                return Err(Error::parse(
                    loc(),
                    format!("empty node {} carries a form", t.id),
                ));
            }
            let mut cur = t.head;
            for _ in 0..=self.tokens.len() {
                if cur == 0 {
                    break;
                }
                if cur == t.id {
                    return Err(Error::parse(loc(), format!("cycle through token {}", t.id)));
                }
                cur = self.token(cur).map_or(0, |h| h.head);
            }
        }
        Ok(())
    }
}

fn parse_feats(s: &str) -> Result<BTreeMap<String, String>> {
    if s == "_" || s.is_empty() {
        return Ok(BTreeMap::new());
    }
    s.split('|')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::InvalidArgument(format!("feature {kv:?} lacks '='")))
        })
        .collect()
}

fn emit_feats(f: &BTreeMap<String, String>) -> String {
    if f.is_empty() {
        return "_".into();
    }
    f.iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join("|")
}

/// Features implied by a PROIEL positional morphology string
/// (person, number, tense, mood, voice, gender, case, degree, strength,
/// inflection).
pub fn proiel_features(morph: &str) -> BTreeMap<String, String> {
    let c: Vec<char> = morph.chars().collect();
    let mut f = BTreeMap::new();
    if c.len() < 7 {
        return f;
    }
    if c[3] == 'p' {
        f.insert("VerbForm".into(), "Part".into());
    }
    if c[2] == 's' {
        f.insert("Resultative".into(), "Yes".into());
    }
    let case = match c[6] {
        'n' => Some("Nom"),
        'a' => Some("Acc"),
        'g' => Some("Gen"),
        'd' => Some("Dat"),
        'i' => Some("Ins"),
        'l' => Some("Loc"),
        'v' => Some("Voc"),
        _ => None,
    };
    if let Some(cs) = case {
        f.insert("Case".into(), cs.into());
    }
    f
}

/// Parses the 10-column row dialect.
pub fn parse_rows(text: &str) -> Result<Vec<Sentence>> {
    let mut out = Vec::new();
    let mut cur: Option<Sentence> = None;
    let finish = |s: Option<Sentence>, out: &mut Vec<Sentence>| -> Result<()> {
        if let Some(s) = s {
            s.validate()?;
            out.push(s);
        }
        Ok(())
    };
    for (n, line) in text.lines().enumerate() {
        let loc = || format!("line {}", n + 1);
        let line = line.trim_end_matches('\r');
        if let Some(id) = line.strip_prefix("# sent_id =") {
            finish(cur.take(), &mut out)?;
            cur = Some(Sentence {
                id: id.trim().to_string(),
                tokens: Vec::new(),
            });
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if line.trim().is_empty() {
            finish(cur.take(), &mut out)?;
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                loc(),
                format!("expected 10 columns, got {}", cols.len()),
            ));
        }
        let s = cur.get_or_insert_with(|| Sentence {
            id: format!("s{}", out.len() + 1),
            tokens: Vec::new(),
        });
        let num = |v: &str, what: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::parse(loc(), format!("bad {what} {v:?}")))
        };
        let empty = cols[9].split('|').any(|m| m == "Empty=Yes");
        let slashes = if cols[8] == "_" {
            Vec::new()
        } else {
            cols[8]
                .split('|')
                .map(|e| {
                    let (t, l) = e
                        .split_once(':')
                        .ok_or_else(|| Error::parse(loc(), format!("bad slash {e:?}")))?;
                    Ok(Slash {
                        target: num(t, "slash target")?,
                        label: l.to_uppercase(),
                    })
                })
                .collect::<Result<_>>()?
        };
        s.tokens.push(TbToken {
            id: num(cols[0], "token id")?,
            form: (!empty).then(|| cols[1].to_string()),
            lemma: cols[2].to_string(),
            pos: cols[3].to_string(),
            morph: cols[4].to_string(),
            feats: parse_feats(cols[5]).map_err(|e| Error::parse(loc(), e.to_string()))?,
            head: num(cols[6], "head")?,
            relation: cols[7].to_uppercase(),
            slashes,
            empty,
        });
    }
    finish(cur, &mut out)?;
    Ok(out)
}

pub fn emit_rows(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "# sent_id = {}", s.id);
        for t in &s.tokens {
            let slashes = if t.slashes.is_empty() {
                "_".to_string()
            } else {
                t.slashes
                    .iter()
                    .map(|x| format!("{}:{}", x.target, x.label))
                    .collect::<Vec<_>>()
                    .join("|")
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                t.id,
                t.form.as_deref().unwrap_or("_"),
                t.lemma,
                t.pos,
                t.morph,
                emit_feats(&t.feats),
                t.head,
                t.relation,
                slashes,
                if t.empty { "Empty=Yes" } else { "_" }
            );
        }
        out.push('\n');
    }
    out
}

/// Parses PROIEL XML. Features come from the morphology string, overridden
/// by an optional `features` attribute in `K=V|K=V` form.
pub fn parse_proiel(xml: &str) -> Result<Vec<Sentence>> {
    let mut reader = Reader::from_str(xml);
    let mut out = Vec::new();
    let mut cur: Option<Sentence> = None;
    let mut in_token: Option<usize> = None;
    loop {
        let pos = reader.buffer_position();
        let loc = || format!("byte {pos}");
        let ev = reader
            .read_event()
            .map_err(|e| Error::parse(loc(), e.to_string()))?;
        match ev {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty_el = matches!(ev, Event::Empty(_));
                let mut attrs = BTreeMap::new();
                for a in e.attributes() {
                    let a = a.map_err(|err| Error::parse(loc(), err.to_string()))?;
                    let v = a
                        .normalized_value(quick_xml::XmlVersion::Implicit1_0)
                        .map_err(|err| Error::parse(loc(), err.to_string()))?;
                    attrs.insert(a.key.as_ref().to_string(), v.into_owned());
                }
                let sid = cur.as_ref().map_or("?".to_string(), |s| s.id.clone());
                let num = |k: &str| -> Result<Option<u64>> {
                    attrs
                        .get(k)
                        .map(|v| {
                            v.parse::<u64>().map_err(|_| {
                                Error::parse(format!("sentence {sid}"), format!("bad {k} {v:?}"))
                            })
                        })
                        .transpose()
                };
                match e.name().as_ref() {
                    "sentence" => {
                        if let Some(s) = cur.take() {
                            s.validate()?;
                            out.push(s);
                        }
                        cur = Some(Sentence {
                            id: attrs
                                .get("id")
                                .cloned()
                                .unwrap_or_else(|| format!("s{}", out.len() + 1)),
                            tokens: Vec::new(),
                        });
                        if is_empty_el {
                            let s = cur.take().expect("just set");
                            out.push(s);
                        }
                    }
                    "token" => {
                        let s = cur
                            .as_mut()
                            .ok_or_else(|| Error::parse(loc(), "token outside sentence"))?;
                        let empty = attrs.contains_key("empty-token-sort");
                        let morph = attrs
                            .get("morphology")
                            .cloned()
                            .unwrap_or_else(|| "_".into());
                        let mut feats = proiel_features(&morph);
                        if let Some(f) = attrs.get("features") {
                            feats.extend(
                                parse_feats(f)
                                    .map_err(|err| Error::parse(loc(), err.to_string()))?,
                            );
                        }
                        let pos = match (attrs.get("part-of-speech"), attrs.get("empty-token-sort"))
                        {
                            (Some(p), _) => p.clone(),
                            (None, Some(sort)) => format!("{sort}-"),
                            (None, None) => "_".into(),
                        };
                        let id =
                            num("id")?.ok_or_else(|| Error::parse(loc(), "token without id"))?;
                        let head = num("head-id")?.unwrap_or(0);
                        s.tokens.push(TbToken {
                            id,
                            form: if empty {
                                None
                            } else {
                                attrs.get("form").cloned()
                            },
                            lemma: attrs.get("lemma").cloned().unwrap_or_else(|| "_".into()),
                            pos,
                            morph,
                            feats,
                            head,
                            relation: attrs
                                .get("relation")
                                .map(|r| r.to_uppercase())
                                .unwrap_or_else(|| "_".into()),
                            slashes: Vec::new(),
                            empty,
                        });
                        in_token = (!is_empty_el).then(|| s.tokens.len() - 1);
                    }
                    "slash" => {
                        let (s, t) = match (cur.as_mut(), in_token) {
                            (Some(s), Some(t)) => (s, t),
                            _ => return Err(Error::parse(loc(), "slash outside token")),
                        };
                        let target = num("target-id")?
                            .ok_or_else(|| Error::parse(loc(), "slash without target-id"))?;
                        s.tokens[t].slashes.push(Slash {
                            target,
                            label: attrs
                                .get("relation")
                                .map(|r| r.to_uppercase())
                                .unwrap_or_default(),
                        });
                    }
                    _ => {}
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                "token" => in_token = None,
                "sentence" => {
                    if let Some(s) = cur.take() {
                        s.validate()?;
                        out.push(s);
                    }
                }
                _ => {}
            },
            _ => {}
        }
    }
    if let Some(s) = cur.take() {
        s.validate()?;
        out.push(s);
    }
    Ok(out)
}

pub fn emit_proiel(sentences: &[Sentence]) -> String {
    use quick_xml::escape::escape;
    let mut out =
        String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<proiel>\n<source>\n<div>\n");
    for s in sentences {
        let _ = writeln!(out, "<sentence id=\"{}\">", escape(s.id.as_str()));
        for t in &s.tokens {
            let _ = write!(out, "<token id=\"{}\"", t.id);
            if let Some(f) = &t.form {
                let _ = write!(out, " form=\"{}\"", escape(f.as_str()));
            }
            if t.empty {
                let sort = t.pos.trim_end_matches('-');
                let _ = write!(out, " empty-token-sort=\"{}\"", escape(sort));
            } else {
                let _ = write!(out, " part-of-speech=\"{}\"", escape(t.pos.as_str()));
            }
            let _ = write!(
                out,
                " lemma=\"{}\" morphology=\"{}\" features=\"{}\"",
                escape(t.lemma.as_str()),
                escape(t.morph.as_str()),
                escape(emit_feats(&t.feats))
            );
            if t.head != 0 {
                let _ = write!(out, " head-id=\"{}\"", t.head);
            }
            let _ = write!(out, " relation=\"{}\"", escape(t.relation.to_lowercase()));
            if t.slashes.is_empty() {
                out.push_str("/>\n");
            } else {
                out.push_str(">\n");
                for sl in &t.slashes {
                    let _ = writeln!(
                        out,
                        "<slash target-id=\"{}\" relation=\"{}\"/>",
                        sl.target,
                        escape(sl.label.to_lowercase())
                    );
                }
                out.push_str("</token>\n");
            }
        }
        out.push_str("</sentence>\n");
    }
    out.push_str("</div>\n</source>\n</proiel>\n");
    out
}

/// Parses either dialect, sniffing for XML.
pub fn parse_treebank(source: &str) -> Result<Vec<Sentence>> {
    if source.trim_start().starts_with('<') {
        parse_proiel(source)
    } else {
        parse_rows(source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Kind {
    Conjunct,
    Absolute,
    Jegda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Position {
    PreMatrix,
    PostMatrix,
    NA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subject {
    Overt(u64),
    Null,
    Impersonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SubjPosition {
    SV,
    VS,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Aspect {
    Pfv,
    Ipfv,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Flag {
    /// Matrix is an empty node standing in for a coordinated clause.
    NonCanonical,
    /// Introduced by a subjunction such as jako or ašte.
    Augmented,
    /// Conjunct participle that is not the leftmost pre-matrix one; its
    /// subject is attributed to another conjunct.
    Shared,
    /// Overt subject outside the participle clause span ±1.
    SubjNonadjacent,
    SentenceInitial,
}

macro_rules! labels {
    ($t:ty { $($v:path => $s:literal),* $(,)? }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($v => $s),* })
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)*
                    _ => Err(Error::InvalidArgument(format!("unknown label {s:?}"))),
                }
            }
        }
    };
}

labels!(Kind { Kind::Conjunct => "conjunct", Kind::Absolute => "absolute", Kind::Jegda => "jegda" });
labels!(Position { Position::PreMatrix => "pre-matrix", Position::PostMatrix => "post-matrix", Position::NA => "NA" });
labels!(SubjPosition { SubjPosition::SV => "SV", SubjPosition::VS => "VS", SubjPosition::None => "none" });
labels!(Aspect { Aspect::Pfv => "pfv", Aspect::Ipfv => "ipfv", Aspect::Unknown => "unknown" });
labels!(Flag {
    Flag::NonCanonical => "non-canonical",
    Flag::Augmented => "augmented",
    Flag::Shared => "shared",
    Flag::SubjNonadjacent => "subj-nonadjacent",
    Flag::SentenceInitial => "sentence-initial",
});

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Overt(id) => write!(f, "overt:{id}"),
            Subject::Null => f.write_str("null"),
            Subject::Impersonal => f.write_str("impersonal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Construction {
    pub sentence: String,
    pub kind: Kind,
    pub trigger: Vec<u64>,
    pub matrix: Option<u64>,
    pub position: Position,
    pub subject: Subject,
    pub subj_position: SubjPosition,
    pub aspect: Aspect,
    pub flags: BTreeSet<Flag>,
}

impl Construction {
    pub fn sentence_initial(&self) -> bool {
        self.flags.contains(&Flag::SentenceInitial)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    /// Tokens ignored when deciding sentence-initial position.
    pub particles: Vec<String>,
    /// Lemma spellings normalized to jegda.
    pub jegda_lemmas: Vec<String>,
    /// Subjunctions that augment an absolute or conjunct.
    pub augmenting: Vec<String>,
    /// Lemma that keeps post-matrix null-subject absolutes.
    pub copula: String,
    /// Aspect for finite verbs by lemma.
    pub aspect_lexicon: BTreeMap<String, Aspect>,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            particles: ["že", "bo", "li", "i"].map(String::from).to_vec(),
            jegda_lemmas: ["jegda", "egda", "jegъda", "egъda", "kogda"]
                .map(String::from)
                .to_vec(),
            augmenting: ["jako", "ašte"].map(String::from).to_vec(),
            copula: "byti".into(),
            aspect_lexicon: BTreeMap::new(),
        }
    }
}

fn aspect_of(t: &TbToken, opts: &ExtractOptions) -> Aspect {
    match t.feat("Aspect") {
        Some("Perf") => Aspect::Pfv,
        Some("Imp") => Aspect::Ipfv,
        _ => opts
            .aspect_lexicon
            .get(&t.lemma)
            .copied()
            .unwrap_or(Aspect::Unknown),
    }
}

/// The relation a participle bears for extraction: its own, or, when it is
/// the PRED of a subjunction, the subjunction's.
fn clause_relation<'a>(s: &'a Sentence, t: &'a TbToken) -> &'a str {
    if t.relation == "PRED" {
        if let Some(h) = s.token(t.head) {
            if h.is_subjunction() {
                return &h.relation;
            }
        }
    }
    &t.relation
}

/// Follows the head chain of `id` to its matrix: a verb head is the matrix;
/// a conjunction bearing the same relation passes to its own head; an
/// augmenting subjunction passes through; an empty verbal node is the matrix
/// itself (non-canonical).
fn resolve_matrix(
    s: &Sentence,
    id: u64,
    relation: &str,
    opts: &ExtractOptions,
    flags: &mut BTreeSet<Flag>,
) -> Option<u64> {
    let mut cur = s.token(id)?;
    for _ in 0..s.tokens.len() {
        let h = s.token(cur.head)?;
        if h.empty && !h.is_conjunction() {
            flags.insert(Flag::NonCanonical);
            return Some(h.id);
        }
        if h.is_verb() {
            return Some(h.id);
        }
        if h.is_conjunction() && h.relation == relation {
            cur = h;
            continue;
        }
        if h.is_subjunction() {
            if opts.augmenting.contains(&h.lemma) {
                flags.insert(Flag::Augmented);
            }
            cur = h;
            continue;
        }
        return None;
    }
    None
}

fn position(s: &Sentence, trigger: u64, matrix: Option<u64>) -> Position {
    match matrix {
        None => Position::NA,
        Some(m) if s.linear(trigger) <= s.linear(m) => Position::PreMatrix,
        Some(_) => Position::PostMatrix,
    }
}

/// Linearly first conjunct when `id` is a coordinating node with `relation`
/// children, else `id` itself.
fn first_conjunct(s: &Sentence, id: u64, relation: &str) -> u64 {
    match s.token(id) {
        Some(t) if t.is_conjunction() => s
            .children(id)
            .filter(|c| c.relation == relation)
            .min_by_key(|c| s.linear(c.id))
            .map_or(id, |c| first_conjunct(s, c.id, relation)),
        _ => id,
    }
}

fn subj_position(s: &Sentence, subj: Subject, verb: u64) -> SubjPosition {
    match subj {
        Subject::Overt(id) if s.linear(id) < s.linear(verb) => SubjPosition::SV,
        Subject::Overt(_) => SubjPosition::VS,
        _ => SubjPosition::None,
    }
}

fn mark_initial(s: &Sentence, c: &mut Construction, opts: &ExtractOptions) {
    // A participle that is the PRED of a subjunction starts at the subjunction.
    let top = |id: u64| match s.token(id) {
        Some(t) if t.relation == "PRED" && s.token(t.head).is_some_and(TbToken::is_subjunction) => {
            t.head
        }
        _ => id,
    };
    let mut lo = c
        .trigger
        .iter()
        .filter_map(|&t| s.span(top(t)))
        .map(|(a, _)| a)
        .min()
        .unwrap_or(usize::MAX);
    if let Subject::Overt(id) = c.subject {
        if !c.flags.contains(&Flag::SubjNonadjacent) && !c.flags.contains(&Flag::Shared) {
            lo = lo.min(s.linear(id));
        }
    }
    let clear = s.tokens[..lo.min(s.tokens.len())].iter().all(|t| {
        t.empty
            || t.is_punct()
            || t.form
                .as_deref()
                .is_some_and(|f| opts.particles.iter().any(|p| p == &f.to_lowercase()))
    });
    if clear {
        c.flags.insert(Flag::SentenceInitial);
    }
}

pub fn extract_conjuncts(s: &Sentence, opts: &ExtractOptions) -> Vec<Construction> {
    let mut out: Vec<Construction> = Vec::new();
    for t in &s.tokens {
        if t.empty || !t.is_participle() || t.is_resultative() || clause_relation(s, t) != "XADV" {
            continue;
        }
        let mut flags = BTreeSet::new();
        let matrix = resolve_matrix(s, t.id, "XADV", opts, &mut flags);
        let subject = match t.slashes.iter().find(|x| x.label == "XSUB") {
            None => Subject::Impersonal,
            Some(x) if Some(x.target) == matrix => Subject::Null,
            Some(x) if s.token(x.target).is_some_and(|v| v.is_verb() && v.empty) => Subject::Null,
            Some(x) => Subject::Overt(first_conjunct(s, x.target, "SUB")),
        };
        if let Subject::Overt(id) = subject {
            let (lo, hi) = s.span(t.id).unwrap_or((s.linear(t.id), s.linear(t.id)));
            let at = s.linear(id);
            if at + 1 < lo || at > hi + 1 {
                flags.insert(Flag::SubjNonadjacent);
            }
        }
        out.push(Construction {
            sentence: s.id.clone(),
            kind: Kind::Conjunct,
            trigger: vec![t.id],
            matrix,
            position: position(s, t.id, matrix),
            subject,
            subj_position: subj_position(s, subject, t.id),
            aspect: aspect_of(t, opts),
            flags,
        });
    }
    // Only the leftmost pre-matrix conjunct of each matrix heads its subject.
    let mut leftmost: BTreeMap<u64, usize> = BTreeMap::new();
    for c in &out {
        if let (Some(m), Position::PreMatrix) = (c.matrix, c.position) {
            let at = s.linear(c.trigger[0]);
            leftmost
                .entry(m)
                .and_modify(|v| *v = (*v).min(at))
                .or_insert(at);
        }
    }
    for c in &mut out {
        let lead = c
            .matrix
            .and_then(|m| leftmost.get(&m))
            .is_some_and(|&l| l == s.linear(c.trigger[0]));
        if !lead && c.position != Position::NA && c.subject != Subject::Impersonal {
            c.flags.insert(Flag::Shared);
        }
    }
    for c in &mut out {
        mark_initial(s, c, opts);
    }
    out
}

pub fn extract_absolutes(s: &Sentence, opts: &ExtractOptions) -> Vec<Construction> {
    let mut out = Vec::new();
    for t in &s.tokens {
        if t.empty
            || !t.is_participle()
            || t.is_resultative()
            || t.feat("Case") != Some("Dat")
            || clause_relation(s, t) != "ADV"
        {
            continue;
        }
        let mut flags = BTreeSet::new();
        let matrix = resolve_matrix(s, t.id, "ADV", opts, &mut flags);
        let subject = s
            .children(t.id)
            .filter(|c| c.relation == "SUB")
            .min_by_key(|c| s.linear(c.id))
            .map(|c| first_conjunct(s, c.id, "SUB"))
            .filter(|&id| {
                s.token(id)
                    .is_some_and(|x| x.is_conjunction() || x.feat("Case") == Some("Dat"))
            })
            .map_or(Subject::Null, Subject::Overt);
        let pos = position(s, t.id, matrix);
        if pos == Position::PostMatrix && subject == Subject::Null && t.lemma != opts.copula {
            continue;
        }
        let mut c = Construction {
            sentence: s.id.clone(),
            kind: Kind::Absolute,
            trigger: vec![t.id],
            matrix,
            position: pos,
            subject,
            subj_position: subj_position(s, subject, t.id),
            aspect: aspect_of(t, opts),
            flags,
        };
        mark_initial(s, &mut c, opts);
        out.push(c);
    }
    out
}

pub fn extract_jegda(s: &Sentence, opts: &ExtractOptions) -> Vec<Construction> {
    let mut out = Vec::new();
    for j in &s.tokens {
        if !opts.jegda_lemmas.contains(&j.lemma.to_lowercase()) {
            continue;
        }
        // Subjunction heading its clause verb, or a clause verb heading the
        // subjunction.
        let dependent = s
            .children(j.id)
            .filter(|c| c.relation == "PRED" && c.is_verb())
            .min_by_key(|c| s.linear(c.id));
        let (verb, clause_node) = match dependent {
            Some(v) => (v, j),
            None => match s.token(j.head) {
                Some(h) if h.is_verb() => (h, h),
                _ => continue,
            },
        };
        let mut flags = BTreeSet::new();
        let mut rels = vec![clause_node.relation.as_str()];
        let mut head = s.token(clause_node.head);
        while let Some(h) = head {
            if !h.is_conjunction() {
                break;
            }
            rels.push(&h.relation);
            head = s.token(h.head);
        }
        if rels.iter().any(|r| *r == "ATR" || *r == "APOS") {
            continue;
        }
        let matrix = head.map(|h| {
            if h.empty {
                flags.insert(Flag::NonCanonical);
            }
            h.id
        });
        let subject = s
            .children(verb.id)
            .filter(|c| c.relation == "SUB")
            .min_by_key(|c| s.linear(c.id))
            .map_or(Subject::Null, |c| {
                Subject::Overt(first_conjunct(s, c.id, "SUB"))
            });
        let mut c = Construction {
            sentence: s.id.clone(),
            kind: Kind::Jegda,
            trigger: vec![j.id, verb.id],
            matrix,
            position: position(s, verb.id, matrix),
            subject,
            subj_position: subj_position(s, subject, verb.id),
            aspect: aspect_of(verb, opts),
            flags,
        };
        mark_initial(s, &mut c, opts);
        out.push(c);
    }
    out
}

/// All three extractors over all sentences, sorted by sentence id and
/// trigger id.
pub fn extract_all(sentences: &[Sentence], opts: &ExtractOptions) -> Vec<Construction> {
    let mut out: Vec<Construction> = sentences
        .iter()
        .flat_map(|s| {
            let mut v = extract_conjuncts(s, opts);
            v.extend(extract_absolutes(s, opts));
            v.extend(extract_jegda(s, opts));
            v
        })
        .collect();
    out.sort_by(|a, b| {
        a.sentence
            .cmp(&b.sentence)
            .then(a.trigger.cmp(&b.trigger))
            .then(a.kind.cmp(&b.kind))
    });
    out
}

pub fn write_constructions_tsv(cs: &[Construction], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("sentence-id\tkind\ttrigger-ids\tmatrix-id\tposition\tsubj-kind\tsubj-position\taspect\tflags\n");
    for c in cs {
        let flags: Vec<String> = c.flags.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            c.sentence,
            c.kind,
            c.trigger
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            c.matrix.map_or("-".to_string(), |m| m.to_string()),
            c.position,
            c.subject,
            c.subj_position,
            c.aspect,
            if flags.is_empty() {
                "-".to_string()
            } else {
                flags.join(",")
            }
        );
    }
    out
}

/// Text edits applied before re-alignment of an annotated corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditRules {
    /// Whole-token rewrites (e.g. spelling variants of a lemma).
    pub rewrites: BTreeMap<String, String>,
    pub stopwords: BTreeSet<String>,
    pub conjunct_placeholder: String,
    pub absolute_placeholder: String,
    /// `(suffix, marker)`: insert `marker` before any token ending in
    /// `suffix`. A leading `-` on the suffix is ignored.
    pub suffix_rules: Vec<(String, String)>,
}

impl Default for EditRules {
    fn default() -> Self {
        EditRules {
            rewrites: BTreeMap::new(),
            stopwords: ["že", "i"].map(String::from).into_iter().collect(),
            conjunct_placeholder: "xadv".into(),
            absolute_placeholder: "absoluteadv".into(),
            suffix_rules: Vec::new(),
        }
    }
}

impl EditRules {
    fn markers(&self) -> BTreeSet<&str> {
        let mut m: BTreeSet<&str> = self.suffix_rules.iter().map(|(_, v)| v.as_str()).collect();
        m.insert(&self.conjunct_placeholder);
        m.insert(&self.absolute_placeholder);
        m
    }
}

/// Applies rewrites, stopword deletion, construction placeholders and suffix
/// markers to a whitespace-tokenized verse. `marks` pairs a token index of
/// the original text with the kind of construction starting there.
pub fn inject_annotations(
    text: &str,
    marks: &[(usize, Kind)],
    rules: &EditRules,
) -> Result<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut inserts: BTreeMap<usize, String> = BTreeMap::new();
    for &(i, kind) in marks {
        if i >= tokens.len() {
            return Err(Error::InvalidArgument(format!(
                "mark at token {i} beyond {} tokens",
                tokens.len()
            )));
        }
        let p = match kind {
            Kind::Conjunct => &rules.conjunct_placeholder,
            Kind::Absolute => &rules.absolute_placeholder,
            Kind::Jegda => {
                return Err(Error::InvalidArgument(
                    "jegda-clauses take no placeholder".into(),
                ))
            }
        };
        if inserts.insert(i, p.clone()).is_some() {
            return Err(Error::InvalidArgument(format!(
                "overlapping edits at token {i}"
            )));
        }
    }
    let mut out: Vec<String> = Vec::with_capacity(tokens.len() + inserts.len());
    for (i, tok) in tokens.iter().enumerate() {
        let word = rules.rewrites.get(*tok).map_or(*tok, String::as_str);
        if rules.stopwords.contains(word) {
            if inserts.contains_key(&i) {
                return Err(Error::InvalidArgument(format!(
                    "overlapping edits: token {i} is both marked and deleted"
                )));
            }
            continue;
        }
        let suffix = rules.suffix_rules.iter().find(|(suf, _)| {
            word.ends_with(suf.trim_start_matches('-'))
                && word.len() > suf.trim_start_matches('-').len()
        });
        match (inserts.get(&i), suffix) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "overlapping edits: token {i} gets a placeholder and a suffix marker"
                )))
            }
            (Some(p), None) => out.push(p.clone()),
            (None, Some((_, m))) => out.push(m.clone()),
            (None, None) => {}
        }
        out.push(word.to_string());
    }
    Ok(out.join(" "))
}

/// Removes every inserted marker token.
pub fn strip_placeholders(text: &str, rules: &EditRules) -> String {
    let markers = rules.markers();
    text.split_whitespace()
        .filter(|t| !markers.contains(t))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "# sent_id = t1\n\
        1\tIsusъ\tIsusъ\tNe\t_\tCase=Nom\t2\tSUB\t_\t_\n\
        2\treče\treŝi\tV-\t_\tAspect=Perf\t0\tPRED\t_\t_\n\n";

    #[test]
    fn two_token_sentence() {
        let s = parse_treebank(TWO).unwrap();
        assert_eq!(s.len(), 1);
        let root: Vec<_> = s[0].tokens.iter().filter(|t| t.head == 0).collect();
        assert_eq!(root.len(), 1);
        assert!(root[0].is_verb());
    }

    #[test]
    fn rows_round_trip() {
        let s = parse_rows(TWO).unwrap();
        assert_eq!(parse_rows(&emit_rows(&s)).unwrap(), s);
    }

    #[test]
    fn xml_round_trip() {
        let s = parse_rows(TWO).unwrap();
        assert_eq!(parse_proiel(&emit_proiel(&s)).unwrap(), s);
    }

    #[test]
    fn proiel_morphology_features() {
        let xml = r#"<proiel><source><div><sentence id="9">
            <token id="1" form="glagoljuštju" lemma="glagolati" part-of-speech="V-" morphology="-sppamdn-i" head-id="3" relation="adv"/>
            <token id="2" form="jemu" lemma="jь" part-of-speech="Pp" morphology="3s---md--i" head-id="1" relation="sub"/>
            <token id="3" form="pride" lemma="priti" part-of-speech="V-" morphology="3sasia---i" relation="pred">
              <slash target-id="2" relation="xsub"/>
            </token>
        </sentence></div></source></proiel>"#;
        let s = parse_proiel(xml).unwrap();
        assert_eq!(s[0].tokens[0].feat("VerbForm"), Some("Part"));
        assert_eq!(s[0].tokens[0].feat("Case"), Some("Dat"));
        assert_eq!(
            s[0].tokens[2].slashes,
            vec![Slash {
                target: 2,
                label: "XSUB".into()
            }]
        );
    }

    #[test]
    fn dangling_head_rejected() {
        let bad = "# sent_id = x\n1\ta\ta\tV-\t_\t_\t7\tPRED\t_\t_\n";
        match parse_rows(bad) {
            Err(Error::Parse { location, .. }) => assert!(location.contains('x')),
            other => panic!("{other:?}"),
        }
        let bad = "# sent_id = y\n1\ta\ta\tV-\t_\t_\t0\tPRED\t4:xsub\t_\n";
        assert!(parse_rows(bad).is_err());
    }

    #[test]
    fn stopword_and_placeholder() {
        let r = EditRules::default();
        let out = inject_annotations("i prišedъ isъ vidě", &[(1, Kind::Conjunct)], &r).unwrap();
        assert_eq!(out, "xadv prišedъ isъ vidě");
        assert_eq!(strip_placeholders(&out, &r), "prišedъ isъ vidě");
    }

    #[test]
    fn identity_without_edits() {
        let r = EditRules {
            stopwords: BTreeSet::new(),
            ..Default::default()
        };
        assert_eq!(inject_annotations("a b c", &[], &r).unwrap(), "a b c");
    }

    #[test]
    fn suffix_rules() {
        let r = EditRules {
            suffix_rules: vec![("-cu".into(), "DS".into()), ("-ca".into(), "SS".into())],
            ..Default::default()
        };
        assert_eq!(
            inject_annotations("me'u'axüacu", &[], &r).unwrap(),
            "DS me'u'axüacu"
        );
    }

    #[test]
    fn overlapping_edits_rejected() {
        let r = EditRules::default();
        assert!(inject_annotations("i prišedъ", &[(0, Kind::Conjunct)], &r).is_err());
        assert!(
            inject_annotations("a b", &[(1, Kind::Conjunct), (1, Kind::Absolute)], &r).is_err()
        );
    }

    #[test]
    fn rewrites_apply() {
        let r = EditRules {
            rewrites: BTreeMap::from([("egda".to_string(), "jegda".to_string())]),
            ..Default::default()
        };
        assert_eq!(
            inject_annotations("egda že pride", &[], &r).unwrap(),
            "jegda pride"
        );
    }
}
