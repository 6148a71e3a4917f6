//! Verse-aligned parallel corpus: loading, translation selection, normalization.
//!
//! Corpus files are named `<iso>[-variant].txt` and hold one verse per line as
//! `BOOK:CHAPTER:VERSE<TAB>text`. Language metadata comes from a TSV with the
//! columns `iso name family macroarea year`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_properties::{GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::{Error, Result};

/// Candidates whose coverage is within this many verses of the best one are
/// considered equally complete, and the most recent of them wins.
pub const COVERAGE_TIE_GAP: usize = 2000;

/// `BOOK:CHAPTER:VERSE`, e.g. `MAT:8:14` or `1CO:15:28`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerseId(String);

impl VerseId {
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let (Some(book), Some(ch), Some(v), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Data(format!("malformed verse id {s:?}")));
        };
        let book_ok = book.len() == 3
            && book
                .chars()
                .all(|c| c.is_ascii_uppercase() || c.is_ascii_digit());
        let num_ok = |p: &str| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit());
        if !book_ok || !num_ok(ch) || !num_ok(v) {
            return Err(Error::Data(format!("malformed verse id {s:?}")));
        }
        Ok(VerseId(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VerseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One language variety as attested in one translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doculect {
    pub iso: String,
    /// File stem the text came from (`iso` or `iso-variant`).
    pub source: String,
    pub name: String,
    pub family: String,
    pub macroarea: String,
    pub year: Option<i32>,
    pub verses: BTreeMap<VerseId, String>,
}

impl Doculect {
    pub fn new(iso: impl Into<String>, source: impl Into<String>) -> Self {
        Doculect {
            iso: iso.into(),
            source: source.into(),
            name: "unknown".into(),
            family: "unknown".into(),
            macroarea: "unknown".into(),
            year: None,
            verses: BTreeMap::new(),
        }
    }

    pub fn coverage(&self) -> usize {
        self.verses.len()
    }

    /// Parses `verse-id<TAB>text` lines. Blank lines and `#` comments are skipped.
    pub fn parse_text(iso: &str, source: &str, text: &str) -> Result<Self> {
        let mut doc = Doculect::new(iso, source);
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (id, body) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(format!("{source}:{}", lineno + 1), "missing TAB"))?;
            let id = VerseId::parse(id.trim())
                .map_err(|e| Error::parse(format!("{source}:{}", lineno + 1), e.to_string()))?;
            if doc.verses.insert(id.clone(), body.to_string()).is_some() {
                return Err(Error::parse(
                    format!("{source}:{}", lineno + 1),
                    format!("duplicate verse id {id}"),
                ));
            }
        }
        if doc.iso.is_empty() {
            return Err(Error::Data(format!("{source}: empty iso code")));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageMeta {
    pub name: String,
    pub family: String,
    pub macroarea: String,
    pub year: Option<i32>,
}

/// Reads the metadata TSV. A header row starting with `iso` is skipped; an
/// empty, `NA` or `unknown` year is treated as missing.
pub fn parse_metadata(text: &str) -> Result<BTreeMap<String, LanguageMeta>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty()
            || line.starts_with('#')
            || (lineno == 0 && line.starts_with("iso\t"))
        {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 4 {
            return Err(Error::parse(
                format!("metadata:{}", lineno + 1),
                "expected at least 4 columns",
            ));
        }
        let year = match cols.get(4).map(|s| s.trim()) {
            None | Some("") | Some("NA") | Some("unknown") => None,
            Some(y) => Some(y.parse::<i32>().map_err(|_| {
                Error::parse(
                    format!("metadata:{}", lineno + 1),
                    format!("bad year {y:?}"),
                )
            })?),
        };
        let or_unknown = |s: &str| {
            if s.trim().is_empty() {
                "unknown".to_string()
            } else {
                s.trim().to_string()
            }
        };
        out.insert(
            cols[0].trim().to_string(),
            LanguageMeta {
                name: or_unknown(cols[1]),
                family: or_unknown(cols[2]),
                macroarea: or_unknown(cols[3]),
                year,
            },
        );
    }
    Ok(out)
}

/// Picks one translation among several for the same language.
///
/// The widest-coverage candidate wins, unless other candidates fall short of it
/// by fewer than [`COVERAGE_TIE_GAP`] verses; among that near-tie group the
/// newest text wins (undated texts lose). Remaining ties go to the larger
/// coverage and then the lexicographically smallest source name, so the result
/// does not depend on candidate order.
pub fn select_translation(candidates: &[Doculect]) -> Result<&Doculect> {
    let best_cov = candidates
        .iter()
        .map(Doculect::coverage)
        .max()
        .ok_or_else(|| Error::InvalidArgument("no translations".into()))?;
    candidates
        .iter()
        .filter(|d| best_cov - d.coverage() < COVERAGE_TIE_GAP)
        .max_by(|a, b| {
            a.year
                .unwrap_or(i32::MIN)
                .cmp(&b.year.unwrap_or(i32::MIN))
                .then(a.coverage().cmp(&b.coverage()))
                .then(b.source.cmp(&a.source))
        })
        .ok_or_else(|| Error::InvalidArgument("no translations".into()))
}

/// Lowercases and tokenizes on whitespace, stripping Unicode punctuation (P*)
/// from token edges. Word-internal punctuation such as apostrophes marking
/// glottal stops is kept.
pub fn normalize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed = raw.trim_matches(is_punctuation);
            (!trimmed.is_empty()).then(|| trimmed.to_lowercase())
        })
        .collect()
}

fn is_punctuation(c: char) -> bool {
    c.general_category_group() == GeneralCategoryGroup::Punctuation
}

/// A loaded and selected parallel corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub pivot_iso: String,
    /// Selected doculects keyed by iso code; the pivot is included.
    pub doculects: BTreeMap<String, Doculect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub pivot_iso: String,
    pub doculects: Vec<DoculectEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoculectEntry {
    pub iso: String,
    pub source: String,
    pub name: String,
    pub family: String,
    pub macroarea: String,
    pub year: Option<i32>,
    pub coverage: usize,
}

impl Corpus {
    /// Groups candidates by iso, selects one translation per language and
    /// checks the pivot is present.
    pub fn from_candidates(pivot_iso: &str, candidates: Vec<Doculect>) -> Result<Self> {
        let mut by_iso: BTreeMap<String, Vec<Doculect>> = BTreeMap::new();
        for d in candidates {
            by_iso.entry(d.iso.clone()).or_default().push(d);
        }
        let mut doculects = BTreeMap::new();
        for (iso, group) in by_iso {
            let chosen = select_translation(&group)?.clone();
            doculects.insert(iso, chosen);
        }
        if !doculects.contains_key(pivot_iso) {
            return Err(Error::Data(format!(
                "pivot doculect {pivot_iso:?} not in corpus"
            )));
        }
        Ok(Corpus {
            pivot_iso: pivot_iso.to_string(),
            doculects,
        })
    }

    /// Loads every `*.txt` file of `dir`, applying metadata when given.
    pub fn load(dir: &Path, metadata: Option<&Path>, pivot_iso: &str) -> Result<Self> {
        let meta = match metadata {
            Some(p) => parse_metadata(&fs::read_to_string(p)?)?,
            None => BTreeMap::new(),
        };
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let mut candidates = Vec::with_capacity(paths.len());
        for path in paths {
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let iso = stem.split('-').next().unwrap_or_default().to_string();
            let mut doc = Doculect::parse_text(&iso, &stem, &fs::read_to_string(&path)?)?;
            if let Some(m) = meta.get(&iso) {
                doc.name = m.name.clone();
                doc.family = m.family.clone();
                doc.macroarea = m.macroarea.clone();
                doc.year = m.year;
            }
            candidates.push(doc);
        }
        Corpus::from_candidates(pivot_iso, candidates)
    }

    pub fn pivot(&self) -> &Doculect {
        &self.doculects[&self.pivot_iso]
    }

    /// Non-pivot doculects in iso order.
    pub fn targets(&self) -> impl Iterator<Item = &Doculect> {
        self.doculects
            .values()
            .filter(move |d| d.iso != self.pivot_iso)
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            pivot_iso: self.pivot_iso.clone(),
            doculects: self
                .doculects
                .values()
                .map(|d| DoculectEntry {
                    iso: d.iso.clone(),
                    source: d.source.clone(),
                    name: d.name.clone(),
                    family: d.family.clone(),
                    macroarea: d.macroarea.clone(),
                    year: d.year,
                    coverage: d.coverage(),
                })
                .collect(),
        }
    }
}
