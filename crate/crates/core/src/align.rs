//! Lexical word alignment between a pivot text and one target text.
//!
//! Two position-independent lexical translation models are trained by EM, one
//! per direction. Their Viterbi links are intersected into a one-to-one
//! alignment; pivot tokens left without a link are NULL-aligned.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize, Doculect, VerseId};
use crate::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 5;
pub const DEFAULT_MIN_COUNT: usize = 3;
pub const NULL_FORM: &str = "NULL";

/// (pivot index, target index) within one verse.
pub type Link = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    PivotToTarget,
    TargetToPivot,
}

/// A trained lexical table `t(target | source)`, including the NULL source.
#[derive(Debug, Clone)]
pub struct TranslationModel {
    pub direction: Direction,
    pub iterations: usize,
    src_vocab: Vec<String>,
    tgt_vocab: Vec<String>,
    src_index: HashMap<String, u32>,
    tgt_index: HashMap<String, u32>,
    /// Per source id (0 = NULL): (target id, probability), sorted by target id.
    table: Vec<Vec<(u32, f64)>>,
    /// Bitext log-likelihood (up to a constant) before each M-step.
    pub loglik_trace: Vec<f64>,
}

const NULL_ID: u32 = 0;

impl TranslationModel {
    pub fn source_types(&self) -> impl Iterator<Item = &str> {
        self.src_vocab.iter().skip(1).map(String::as_str)
    }

    /// `t(target | source)`; pass `None` as source for the NULL word.
    pub fn prob(&self, source: Option<&str>, target: &str) -> f64 {
        let s = match source {
            None => NULL_ID,
            Some(s) => match self.src_index.get(s) {
                Some(&id) => id,
                None => return 0.0,
            },
        };
        let Some(&t) = self.tgt_index.get(target) else {
            return 0.0;
        };
        self.lookup(s, t)
    }

    fn lookup(&self, s: u32, t: u32) -> f64 {
        let row = &self.table[s as usize];
        row.binary_search_by_key(&t, |&(id, _)| id)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// Distribution over target types for `source` (or NULL), as (form, prob).
    pub fn distribution(&self, source: Option<&str>) -> Vec<(&str, f64)> {
        let s = match source {
            None => Some(NULL_ID),
            Some(s) => self.src_index.get(s).copied(),
        };
        s.map(|s| {
            self.table[s as usize]
                .iter()
                .map(|&(t, p)| (self.tgt_vocab[t as usize].as_str(), p))
                .collect()
        })
        .unwrap_or_default()
    }

    /// Most probable translation of `source`; ties go to the lexicographically
    /// smallest target form.
    pub fn argmax(&self, source: &str) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (form, p) in self.distribution(Some(source)) {
            match best {
                Some((bf, bp)) if p < bp || (p == bp && form >= bf) => {}
                _ => best = Some((form, p)),
            }
        }
        best.map(|(f, _)| f)
    }

    /// For every target token, the source position with the highest
    /// `t(target | source)`, or `None` when the NULL word wins. NULL wins ties,
    /// then the leftmost source position.
    pub fn viterbi(&self, source: &[String], target: &[String]) -> Vec<Option<usize>> {
        let src_ids: Vec<Option<u32>> = source
            .iter()
            .map(|s| self.src_index.get(s).copied())
            .collect();
        target
            .iter()
            .map(|f| {
                let &t = self.tgt_index.get(f)?;
                let mut best = (None, self.lookup(NULL_ID, t));
                for (i, s) in src_ids.iter().enumerate() {
                    if let Some(s) = *s {
                        let p = self.lookup(s, t);
                        if p > best.1 {
                            best = (Some(i), p);
                        }
                    }
                }
                best.0
            })
            .collect()
    }
}

fn intern(vocab: &mut Vec<String>, index: &mut HashMap<String, u32>, tok: &str) -> u32 {
    if let Some(&id) = index.get(tok) {
        return id;
    }
    let id = vocab.len() as u32;
    vocab.push(tok.to_string());
    index.insert(tok.to_string(), id);
    id
}

/// Trains a lexical translation table `t(target | source)` by EM from a
/// uniform start. Each pair is (source tokens, target tokens); a NULL source
/// word is implicit in every sentence.
///
/// The start point is uniform, so the result depends only on the bitext and
/// the iteration count; `seed` is accepted for interface stability and
/// recorded by callers.
pub fn train_em(
    bitext: &[(Vec<String>, Vec<String>)],
    iterations: usize,
    direction: Direction,
    _seed: u64,
) -> Result<TranslationModel> {
    if bitext.is_empty() {
        return Err(Error::InvalidArgument("empty bitext".into()));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let mut src_vocab = vec![NULL_FORM.to_string()];
    let mut src_index = HashMap::new();
    let mut tgt_vocab = Vec::new();
    let mut tgt_index = HashMap::new();

    // Pair ids in first-seen order keep all float accumulation deterministic.
    let mut pair_index: HashMap<(u32, u32), usize> = HashMap::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    // Per sentence: target-major matrix of pair ids, (src_len + 1) per target token.
    let mut sentences: Vec<(usize, Vec<usize>)> = Vec::with_capacity(bitext.len());
    for (src, tgt) in bitext {
        let mut s_ids = vec![NULL_ID];
        s_ids.extend(
            src.iter()
                .map(|s| intern(&mut src_vocab, &mut src_index, s)),
        );
        let mut cells = Vec::with_capacity(s_ids.len() * tgt.len());
        for f in tgt {
            let t = intern(&mut tgt_vocab, &mut tgt_index, f);
            for &s in &s_ids {
                let next = pairs.len();
                let id = *pair_index.entry((s, t)).or_insert(next);
                if id == next {
                    pairs.push((s, t));
                }
                cells.push(id);
            }
        }
        sentences.push((s_ids.len(), cells));
    }
    if tgt_vocab.is_empty() {
        return Err(Error::InvalidArgument("bitext has no target tokens".into()));
    }

    let uniform = 1.0 / tgt_vocab.len() as f64;
    let mut prob = vec![uniform; pairs.len()];
    let mut counts = vec![0.0; pairs.len()];
    let mut totals = vec![0.0; src_vocab.len()];
    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        counts.iter_mut().for_each(|c| *c = 0.0);
        let mut loglik = 0.0;
        for (width, cells) in &sentences {
            for row in cells.chunks(*width) {
                let z: f64 = row.iter().map(|&id| prob[id]).sum();
                loglik += (z / *width as f64).ln();
                for &id in row {
                    counts[id] += prob[id] / z;
                }
            }
        }
        trace.push(loglik);
        totals.iter_mut().for_each(|t| *t = 0.0);
        for (id, &(s, _)) in pairs.iter().enumerate() {
            totals[s as usize] += counts[id];
        }
        for (id, &(s, _)) in pairs.iter().enumerate() {
            prob[id] = counts[id] / totals[s as usize];
        }
    }

    let mut table: Vec<Vec<(u32, f64)>> = vec![Vec::new(); src_vocab.len()];
    for (id, &(s, t)) in pairs.iter().enumerate() {
        if prob[id] > 0.0 {
            table[s as usize].push((t, prob[id]));
        }
    }
    for row in &mut table {
        row.sort_by_key(|&(t, _)| t);
    }
    Ok(TranslationModel {
        direction,
        iterations,
        src_vocab,
        tgt_vocab,
        src_index,
        tgt_index,
        table,
        loglik_trace: trace,
    })
}

/// Intersects forward and reverse Viterbi links verse by verse.
pub fn symmetrize(
    fwd: &BTreeMap<VerseId, BTreeSet<Link>>,
    rev: &BTreeMap<VerseId, BTreeSet<Link>>,
) -> Result<BTreeMap<VerseId, BTreeSet<Link>>> {
    if let Some(v) = fwd.keys().find(|k| !rev.contains_key(*k)) {
        return Err(Error::Data(format!(
            "asymmetric input: verse {v} missing in reverse links"
        )));
    }
    if let Some(v) = rev.keys().find(|k| !fwd.contains_key(*k)) {
        return Err(Error::Data(format!(
            "asymmetric input: verse {v} missing in forward links"
        )));
    }
    Ok(fwd
        .iter()
        .map(|(v, f)| (v.clone(), f.intersection(&rev[v]).copied().collect()))
        .collect())
}

/// One verse of a symmetrized alignment with its tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedVerse {
    pub pivot: Vec<String>,
    pub target: Vec<String>,
    pub links: BTreeSet<Link>,
}

impl AlignedVerse {
    pub fn target_of(&self, pivot_index: usize) -> Option<&str> {
        self.links
            .range((pivot_index, 0)..=(pivot_index, usize::MAX))
            .next()
            .map(|&(_, j)| self.target[j].as_str())
    }
}

/// One-to-one alignment for one (pivot, target) pair.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignmentTable {
    pub verses: BTreeMap<VerseId, AlignedVerse>,
}

impl AlignmentTable {
    pub fn is_one_to_one(&self) -> bool {
        self.verses.values().all(|v| {
            let ps: BTreeSet<_> = v.links.iter().map(|l| l.0).collect();
            let ts: BTreeSet<_> = v.links.iter().map(|l| l.1).collect();
            ps.len() == v.links.len() && ts.len() == v.links.len()
        })
    }

    /// How many times each target type is linked to `pivot_type`, corpus-wide.
    pub fn counts_for(&self, pivot_type: &str) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for v in self.verses.values() {
            for &(i, j) in &v.links {
                if v.pivot[i] == pivot_type {
                    *counts.entry(v.target[j].clone()).or_insert(0) += 1;
                }
            }
        }
        counts
    }
}

/// Drops links from `pivot_type` to target types linked to it fewer than
/// `min_count` times in the whole table; those occurrences become NULL.
pub fn reassign_nulls(
    table: &AlignmentTable,
    pivot_type: &str,
    min_count: usize,
) -> Result<AlignmentTable> {
    if min_count < 1 {
        return Err(Error::InvalidArgument("min_count must be >= 1".into()));
    }
    let counts = table.counts_for(pivot_type);
    let mut out = table.clone();
    for v in out.verses.values_mut() {
        let (pivot, target) = (&v.pivot, &v.target);
        v.links.retain(|&(i, j)| {
            pivot[i] != pivot_type || counts.get(&target[j]).copied().unwrap_or(0) >= min_count
        });
    }
    Ok(out)
}

/// The aligned counterpart of one pivot-token occurrence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Parallel {
    pub verse: VerseId,
    pub pivot_index: usize,
    /// `None` means NULL-aligned.
    pub form: Option<String>,
}

/// Every occurrence of one of `pivot_types` with its aligned form.
pub fn pivot_parallels(table: &AlignmentTable, pivot_types: &[String]) -> Vec<Parallel> {
    let mut out = Vec::new();
    for (verse, v) in &table.verses {
        for (i, tok) in v.pivot.iter().enumerate() {
            if pivot_types.iter().any(|p| p == tok) {
                out.push(Parallel {
                    verse: verse.clone(),
                    pivot_index: i,
                    form: v.target_of(i).map(str::to_string),
                });
            }
        }
    }
    out
}

/// Share of gold items whose aligned form matches (both NULL counts as a match).
/// Gold items without a parallel in `parallels` are treated as NULL-aligned.
pub fn evaluate_alignment(
    parallels: &[Parallel],
    gold: &BTreeMap<(VerseId, usize), Option<String>>,
) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::InvalidArgument("empty gold sample".into()));
    }
    let found: BTreeMap<(&VerseId, usize), &Option<String>> = parallels
        .iter()
        .map(|p| ((&p.verse, p.pivot_index), &p.form))
        .collect();
    let matches = gold
        .iter()
        .filter(|((v, i), g)| found.get(&(v, *i)).copied().unwrap_or(&None) == *g)
        .count();
    Ok(matches as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    pub iterations: usize,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            iterations: DEFAULT_ITERATIONS,
            min_count: DEFAULT_MIN_COUNT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub iso: String,
    /// Pivot verses used for training (present in both texts).
    pub shared_verses: usize,
    /// Target verses with no pivot counterpart; never become rows.
    pub dropped_target_verses: usize,
    pub fwd_loglik: Vec<f64>,
    pub rev_loglik: Vec<f64>,
}

/// Aligns `target` to `pivot`, returning the NULL-reassigned parallels of
/// `pivot_types`. Pivot verses absent from the target yield NULL parallels.
pub fn align_doculect(
    pivot: &Doculect,
    target: &Doculect,
    pivot_types: &[String],
    params: &AlignParams,
) -> Result<(AlignmentTable, Vec<Parallel>, AlignReport)> {
    let mut ids = Vec::new();
    let mut bitext = Vec::new();
    for (v, text) in &pivot.verses {
        if let Some(t) = target.verses.get(v) {
            ids.push(v.clone());
            bitext.push((normalize(text), normalize(t)));
        }
    }
    let dropped = target
        .verses
        .keys()
        .filter(|v| !pivot.verses.contains_key(*v))
        .count();
    if bitext.is_empty() {
        return Err(Error::Data(format!(
            "{}: no verses shared with pivot",
            target.iso
        )));
    }
    let fwd_model = train_em(
        &bitext,
        params.iterations,
        Direction::PivotToTarget,
        params.seed,
    )?;
    let reversed: Vec<_> = bitext.iter().map(|(p, t)| (t.clone(), p.clone())).collect();
    let rev_model = train_em(
        &reversed,
        params.iterations,
        Direction::TargetToPivot,
        params.seed,
    )?;

    let mut fwd = BTreeMap::new();
    let mut rev = BTreeMap::new();
    for (v, (p, t)) in ids.iter().zip(&bitext) {
        let f: BTreeSet<Link> = fwd_model
            .viterbi(p, t)
            .into_iter()
            .enumerate()
            .filter_map(|(j, i)| i.map(|i| (i, j)))
            .collect();
        let r: BTreeSet<Link> = rev_model
            .viterbi(t, p)
            .into_iter()
            .enumerate()
            .filter_map(|(i, j)| j.map(|j| (i, j)))
            .collect();
        fwd.insert(v.clone(), f);
        rev.insert(v.clone(), r);
    }
    let links = symmetrize(&fwd, &rev)?;
    let mut table = AlignmentTable::default();
    for (v, (p, t)) in ids.iter().zip(bitext) {
        table.verses.insert(
            v.clone(),
            AlignedVerse {
                pivot: p,
                target: t,
                links: links[v].clone(),
            },
        );
    }
    for pt in pivot_types {
        table = reassign_nulls(&table, pt, params.min_count)?;
    }
    let mut parallels = pivot_parallels(&table, pivot_types);
    // Pivot verses the target lacks still contribute NULL rows.
    for (v, text) in &pivot.verses {
        if target.verses.contains_key(v) {
            continue;
        }
        for (i, tok) in normalize(text).iter().enumerate() {
            if pivot_types.iter().any(|p| p == tok) {
                parallels.push(Parallel {
                    verse: v.clone(),
                    pivot_index: i,
                    form: None,
                });
            }
        }
    }
    parallels.sort();
    let report = AlignReport {
        iso: target.iso.clone(),
        shared_verses: ids.len(),
        dropped_target_verses: dropped,
        fwd_loglik: fwd_model.loglik_trace.clone(),
        rev_loglik: rev_model.loglik_trace.clone(),
    };
    Ok((table, parallels, report))
}

/// Renders the per-doculect dump: `verse-id<TAB>pivot-index<TAB>form-or-NULL`.
pub fn write_dump(parallels: &[Parallel], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    for p in parallels {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            p.verse,
            p.pivot_index,
            p.form.as_deref().unwrap_or(NULL_FORM)
        );
    }
    out
}

pub fn parse_dump(text: &str) -> Result<Vec<Parallel>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::parse(
                format!("dump:{}", n + 1),
                "expected 3 columns",
            ));
        }
        let idx = cols[1]
            .parse()
            .map_err(|_| Error::parse(format!("dump:{}", n + 1), "bad pivot index"))?;
        out.push(Parallel {
            verse: VerseId::parse(cols[0])?,
            pivot_index: idx,
            form: (cols[2] != NULL_FORM).then(|| cols[2].to_string()),
        });
    }
    Ok(out)
}
