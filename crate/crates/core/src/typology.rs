//! Area dictionaries, coexpression patterns and per-cluster means scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::NULL_FORM;
use crate::matrix::UsageMatrix;
use crate::stats::{fisher_exact, Tails};
use crate::surface::{contains, Point, Polygon};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.01;

/// The three regions of the map whose coexpression is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    TL,
    ML,
    BL,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::TL, Group::ML, Group::BL];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::TL => "TL",
            Group::ML => "ML",
            Group::BL => "BL",
        })
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "TL" => Ok(Group::TL),
            "ML" => Ok(Group::ML),
            "BL" => Ok(Group::BL),
            _ => Err(Error::InvalidArgument(format!(
                "unknown group {s:?} (expected TL, ML or BL)"
            ))),
        }
    }
}

/// Meaningful means per group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaDictionary(pub BTreeMap<Group, BTreeSet<String>>);

impl AreaDictionary {
    pub fn from_lists(tl: &[&str], ml: &[&str], bl: &[&str]) -> Self {
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
        AreaDictionary(BTreeMap::from([
            (Group::TL, set(tl)),
            (Group::ML, set(ml)),
            (Group::BL, set(bl)),
        ]))
    }

    pub fn get(&self, g: Group) -> &BTreeSet<String> {
        static EMPTY: BTreeSet<String> = BTreeSet::new();
        self.0.get(&g).unwrap_or(&EMPTY)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dictionary serializes")
    }
}

/// Number of a group's `k` core points inside each means' area.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreCounts {
    pub k: usize,
    pub counts: BTreeMap<Group, BTreeMap<String, usize>>,
}

impl CoreCounts {
    /// Tallies containment of each group's core points in each area.
    pub fn tally(
        core: &BTreeMap<Group, Vec<Point>>,
        areas: &BTreeMap<String, Vec<Polygon>>,
    ) -> Result<Self> {
        let sizes: BTreeSet<usize> = core.values().map(Vec::len).collect();
        if sizes.len() > 1 {
            return Err(Error::InvalidArgument(
                "core point sets differ in size".into(),
            ));
        }
        let counts = core
            .iter()
            .map(|(g, pts)| {
                let c = areas
                    .iter()
                    .map(|(m, polys)| {
                        (
                            m.clone(),
                            pts.iter().filter(|p| contains(polys, **p)).count(),
                        )
                    })
                    .filter(|(_, n)| *n > 0)
                    .collect();
                (*g, c)
            })
            .collect();
        Ok(CoreCounts {
            k: sizes.into_iter().next().unwrap_or(0),
            counts,
        })
    }

    fn of(&self, g: Group) -> impl Iterator<Item = (&String, usize)> {
        self.counts
            .get(&g)
            .into_iter()
            .flatten()
            .map(|(m, &n)| (m, n))
            .filter(|(_, n)| *n > 0)
    }
}

/// `a` holds Fisher-significantly more core points than `b`.
fn richer(k: usize, a: usize, b: usize, alpha: f64) -> bool {
    let k = k as u64;
    let (a, b) = (a as u64, b as u64);
    a > b && fisher_exact(a, k - a, b, k - b, Tails::Two).p_value < alpha
}

/// Applies the dictionary heuristics to core-point containment counts:
/// NULL is kept only when it is a group's sole containing area; an area
/// unique to a group is always kept and a shared competitor survives unless
/// the unique area is significantly richer; without unique areas the richest
/// area is kept along with any area not significantly poorer.
pub fn build_dictionary(counts: &CoreCounts, alpha: f64) -> AreaDictionary {
    let k = counts.k;
    let mut dict = BTreeMap::new();
    for g in Group::ALL {
        let mut here: Vec<(&String, usize)> = counts.of(g).collect();
        if here.iter().any(|(m, _)| m.as_str() != NULL_FORM) {
            here.retain(|(m, _)| m.as_str() != NULL_FORM);
        }
        let unique = |m: &String| {
            Group::ALL
                .iter()
                .filter(|&&o| o != g)
                .all(|&o| counts.of(o).all(|(x, _)| x != m))
        };
        let (uniq, shared): (Vec<_>, Vec<_>) = here.iter().partition(|(m, _)| unique(m));
        let mut keep = BTreeSet::new();
        if let Some(top) = uniq.iter().map(|(_, n)| *n).max() {
            keep.extend(uniq.iter().map(|(m, _)| (*m).clone()));
            keep.extend(
                shared
                    .iter()
                    .filter(|(_, n)| !richer(k, top, *n, alpha))
                    .map(|(m, _)| (*m).clone()),
            );
        } else if let Some(top) = here.iter().map(|(_, n)| *n).max() {
            keep.extend(
                here.iter()
                    .filter(|(_, n)| !richer(k, top, *n, alpha))
                    .map(|(m, _)| (*m).clone()),
            );
        }
        dict.insert(g, keep);
    }
    AreaDictionary(dict)
}

/// Tallies containment and applies [`build_dictionary`].
pub fn dictionary_from_areas(
    core: &BTreeMap<Group, Vec<Point>>,
    areas: &BTreeMap<String, Vec<Polygon>>,
    alpha: f64,
) -> Result<AreaDictionary> {
    Ok(build_dictionary(&CoreCounts::tally(core, areas)?, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    A,
    B,
    C,
    D,
    E,
    UnclassifiedNoArea,
    UnclassifiedOther,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::A => "A",
            Pattern::B => "B",
            Pattern::C => "C",
            Pattern::D => "D",
            Pattern::E => "E",
            Pattern::UnclassifiedNoArea => "unclassified-no-area",
            Pattern::UnclassifiedOther => "unclassified-other",
        })
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "A" => Pattern::A,
            "B" => Pattern::B,
            "C" => Pattern::C,
            "D" => Pattern::D,
            "E" => Pattern::E,
            "unclassified-no-area" => Pattern::UnclassifiedNoArea,
            "unclassified-other" => Pattern::UnclassifiedOther,
            _ => return Err(Error::InvalidArgument(format!("unknown pattern {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternAssignment {
    pub pattern: Pattern,
    pub subpattern: Option<String>,
    /// TL, ML, BL: whether NULL realizes the group.
    pub null_flags: [bool; 3],
    /// Letter template of the dictionary, e.g. `X XY Y`.
    pub template: String,
}

impl PatternAssignment {
    pub fn null_groups(&self) -> String {
        let g: Vec<String> = Group::ALL
            .iter()
            .filter(|g| self.null_flags[g.index()])
            .map(ToString::to_string)
            .collect();
        if g.is_empty() {
            "-".into()
        } else {
            g.join(",")
        }
    }
}

/// Subpattern table: configuration (TL ML BL) and label.
pub const SUBPATTERNS: [(&str, &str); 33] = [
    ("XY Y X", "BxE"),
    ("X XY Y", "BxC"),
    ("X Y XY", "CxE"),
    ("XW Y Z", "D2a"),
    ("X YW Z", "D2b"),
    ("X Y ZW", "D2c"),
    ("XZ Y Y", "C3"),
    ("X YZ X", "E3"),
    ("X X YZ", "B3"),
    ("XY X X", "CxA"),
    ("X XY X", "ExA"),
    ("X X XY", "BxA"),
    ("X YX Z", "DxX"),
    ("X Y ZX", "DxX"),
    ("XY Y Z", "DxX"),
    ("X Y ZY", "DxX"),
    ("XZ Y Z", "DxX"),
    ("X XY XY", "AxC"),
    ("XY X XY", "AxE"),
    ("XY XY X", "AxB"),
    ("XYZ X X", "AxC3"),
    ("X XYZ X", "AxE3"),
    ("X X XYZ", "AxB3"),
    ("XYZ X Y", "D-Other"),
    ("X XYZ Y", "D-Other"),
    ("X Y XYZ", "D-Other"),
    ("XY XY XY", "A2"),
    ("? X X", "A?C"),
    ("? X Y", "B?D?E"),
    ("X ? X", "A?E"),
    ("X ? Y", "B?C?D"),
    ("X X ?", "A?B"),
    ("X Y ?", "C?D?E"),
];

const LETTERS: [char; 8] = ['X', 'Y', 'Z', 'W', 'V', 'U', 'T', 'S'];
const MAX_RELABEL: usize = LETTERS.len();

/// Group slots as sets of small integers.
type Shape = [BTreeSet<usize>; 3];

fn parse_template(t: &str) -> Shape {
    let mut slots: Shape = Default::default();
    for (g, part) in t.split(' ').enumerate() {
        if part != "?" {
            slots[g] = part
                .chars()
                .map(|c| {
                    LETTERS
                        .iter()
                        .position(|&l| l == c)
                        .expect("template letter")
                })
                .collect();
        }
    }
    slots
}

fn render(shape: &Shape) -> String {
    shape
        .iter()
        .map(|s| {
            if s.is_empty() {
                "?".to_string()
            } else {
                s.iter().map(|&i| LETTERS[i]).collect()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Label-independent form: the lexicographically smallest rendering over all
/// relabelings of the letters.
fn canonical(shape: &Shape) -> String {
    let letters: BTreeSet<usize> = shape.iter().flatten().copied().collect();
    let letters: Vec<usize> = letters.into_iter().collect();
    if letters.len() > MAX_RELABEL {
        return render(shape);
    }
    permutations(letters.len())
        .into_iter()
        .map(|perm| {
            let relabel = |x: &usize| perm[letters.iter().position(|l| l == x).expect("letter")];
            let s: Shape = std::array::from_fn(|g| shape[g].iter().map(relabel).collect());
            render(&s)
        })
        .min()
        .unwrap_or_else(|| render(shape))
}

fn subpattern_index() -> BTreeMap<String, &'static str> {
    SUBPATTERNS
        .iter()
        .map(|(t, label)| (canonical(&parse_template(t)), *label))
        .collect()
}

/// Assigns the basic pattern, or the subpattern for multi-means and
/// empty-group dictionaries. NULL is treated as an ordinary means.
pub fn classify_pattern(dict: &AreaDictionary) -> PatternAssignment {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let shape: Shape = std::array::from_fn(|g| {
        dict.get(Group::ALL[g])
            .iter()
            .map(|m| {
                let next = ids.len();
                *ids.entry(m.as_str()).or_insert(next)
            })
            .collect()
    });
    let null_flags = std::array::from_fn(|g| dict.get(Group::ALL[g]).contains(NULL_FORM));
    let template = if ids.len() <= MAX_RELABEL {
        canonical(&shape)
    } else {
        render(&shape)
    };

    if shape.iter().all(|s| s.len() == 1) {
        let v: Vec<usize> = shape
            .iter()
            .map(|s| *s.iter().next().expect("singleton"))
            .collect();
        let pattern = match (v[0] == v[1], v[1] == v[2], v[0] == v[2]) {
            (true, true, _) => Pattern::A,
            (true, false, _) => Pattern::B,
            (false, true, _) => Pattern::C,
            (false, false, true) => Pattern::E,
            (false, false, false) => Pattern::D,
        };
        return PatternAssignment {
            pattern,
            subpattern: None,
            null_flags,
            template,
        };
    }
    let any_empty = shape.iter().any(BTreeSet::is_empty);
    let (pattern, subpattern) = match subpattern_index().get(&template) {
        Some(label) if any_empty => (Pattern::UnclassifiedNoArea, Some(label.to_string())),
        Some(label) => (main_pattern(label), Some(label.to_string())),
        None if any_empty => (Pattern::UnclassifiedNoArea, None),
        None => (Pattern::UnclassifiedOther, None),
    };
    PatternAssignment {
        pattern,
        subpattern,
        null_flags,
        template,
    }
}

fn main_pattern(label: &str) -> Pattern {
    match label.as_bytes()[0] {
        b'A' => Pattern::A,
        b'B' => Pattern::B,
        b'C' => Pattern::C,
        b'D' => Pattern::D,
        b'E' => Pattern::E,
        _ => Pattern::UnclassifiedOther,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeansScore {
    pub means: String,
    pub cluster: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Precision/recall/F1 of every means attested in `cluster`; the second
/// value indexes the best (max F1, ties by label).
pub fn score_means(
    assignments: &[usize],
    labels: &[String],
    cluster: usize,
) -> Result<(Vec<MeansScore>, usize)> {
    if assignments.len() != labels.len() {
        return Err(Error::InvalidArgument(
            "labels do not cover the embedded points".into(),
        ));
    }
    let mut inside: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    for (&a, l) in assignments.iter().zip(labels) {
        *total.entry(l).or_default() += 1;
        if a == cluster {
            *inside.entry(l).or_default() += 1;
        }
    }
    let size: usize = inside.values().sum();
    if size == 0 {
        return Err(Error::InvalidArgument(format!(
            "cluster {cluster} is empty"
        )));
    }
    let scores: Vec<MeansScore> = inside
        .iter()
        .map(|(&m, &tp)| {
            let fp = total[m] - tp;
            let fn_ = size - tp;
            let (p, r) = (ratio(tp, tp + fp), ratio(tp, tp + fn_));
            let f1 = if p + r > 0.0 {
                2.0 * p * r / (p + r)
            } else {
                0.0
            };
            MeansScore {
                means: m.to_string(),
                cluster,
                tp,
                fp,
                fn_,
                precision: p,
                recall: r,
                f1,
            }
        })
        .collect();
    // Scores are in label order, so the first maximum wins ties.
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.f1 > scores[best].f1 {
            best = i;
        }
    }
    Ok((scores, best))
}

/// For each usage point of `cluster`, the number of doculects realizing it
/// with their best means for the cluster. Sorted by score descending, then
/// row order.
pub fn prototypicality(
    cluster: usize,
    assignments: &[usize],
    best: &BTreeMap<String, String>,
    m: &UsageMatrix,
) -> Result<Vec<(usize, usize)>> {
    if assignments.len() != m.n_rows() {
        return Err(Error::InvalidArgument(
            "assignments do not match matrix rows".into(),
        ));
    }
    let cols: Vec<(usize, &str)> = best
        .iter()
        .map(|(iso, means)| {
            m.column_index(iso)
                .map(|c| (c, means.as_str()))
                .ok_or_else(|| Error::InvalidArgument(format!("doculect {iso} not in matrix")))
        })
        .collect::<Result<_>>()?;
    let mut scores: Vec<(usize, usize)> = (0..m.n_rows())
        .filter(|&r| assignments[r] == cluster)
        .map(|r| {
            let s = cols
                .iter()
                .filter(|(c, means)| m.form(r, *c).unwrap_or(NULL_FORM) == *means)
                .count();
            (r, s)
        })
        .collect();
    scores.sort_by(|a, b| b.1.cmp(&a.1).then(m.rows()[a.0].cmp(&m.rows()[b.0])));
    Ok(scores)
}

/// One line per doculect:
/// `iso pattern subpattern null_flags dictionary-json`.
pub fn write_classification_tsv(
    rows: &BTreeMap<String, (AreaDictionary, PatternAssignment)>,
    header: &str,
) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("iso\tpattern\tsubpattern\tnull_flags\tdictionary\n");
    for (iso, (dict, pa)) in rows {
        let _ = writeln!(
            out,
            "{iso}\t{}\t{}\t{}\t{}",
            pa.pattern,
            pa.subpattern.as_deref().unwrap_or("-"),
            pa.null_groups(),
            dict.to_json()
        );
    }
    out
}

/// Reads the dictionaries back from a classification TSV.
pub fn parse_classification_tsv(text: &str) -> Result<BTreeMap<String, AreaDictionary>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with("iso\t") || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(5, '\t').collect();
        if parts.len() != 5 {
            return Err(Error::parse(
                format!("classification:{}", n + 1),
                "expected 5 columns",
            ));
        }
        let dict: AreaDictionary = serde_json::from_str(parts[4])
            .map_err(|e| Error::parse(format!("classification:{}", n + 1), e.to_string()))?;
        out.insert(parts[0].to_string(), dict);
    }
    Ok(out)
}

/// Pattern counts in `A, B, C, D, E, unclassified` order.
pub fn pattern_frequencies<'a>(
    assignments: impl IntoIterator<Item = &'a PatternAssignment>,
) -> BTreeMap<Pattern, usize> {
    let mut f = BTreeMap::new();
    for a in assignments {
        *f.entry(a.pattern).or_default() += 1;
    }
    f
}

pub fn write_scores_tsv(iso: &str, scores: &[MeansScore], best: usize, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("iso\tcluster\tmeans\ttp\tfp\tfn\tprecision\trecall\tf1\tbest\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(
            out,
            "{iso}\t{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            s.cluster,
            s.means,
            s.tp,
            s.fp,
            s.fn_,
            s.precision,
            s.recall,
            s.f1,
            i == best
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(k: usize, rows: &[(Group, &str, usize)]) -> CoreCounts {
        let mut c: BTreeMap<Group, BTreeMap<String, usize>> = BTreeMap::new();
        for &(g, m, n) in rows {
            c.entry(g).or_default().insert(m.to_string(), n);
        }
        CoreCounts { k, counts: c }
    }

    #[test]
    fn table_templates_are_pairwise_distinct() {
        let mut seen = BTreeMap::new();
        for (t, label) in SUBPATTERNS {
            let c = canonical(&parse_template(t));
            assert!(
                seen.insert(c.clone(), label).is_none(),
                "{t} duplicates {c}"
            );
        }
    }

    #[test]
    fn every_table_entry_classifies_to_its_label() {
        for (t, label) in SUBPATTERNS {
            let shape = parse_template(t);
            let names = ["kan", "bo", "zi", "wu"];
            let dict = AreaDictionary(
                Group::ALL
                    .iter()
                    .zip(&shape)
                    .map(|(g, s)| (*g, s.iter().map(|&i| names[i].to_string()).collect()))
                    .collect(),
            );
            let pa = classify_pattern(&dict);
            assert_eq!(pa.subpattern.as_deref(), Some(label), "{t}");
        }
    }

    #[test]
    fn basic_patterns() {
        let cases = [
            (["a", "a", "a"], Pattern::A),
            (["a", "a", "b"], Pattern::B),
            (["a", "b", "b"], Pattern::C),
            (["a", "b", "c"], Pattern::D),
            (["a", "b", "a"], Pattern::E),
        ];
        for (d, p) in cases {
            let pa = classify_pattern(&AreaDictionary::from_lists(&[d[0]], &[d[1]], &[d[2]]));
            assert_eq!(pa.pattern, p);
            assert_eq!(pa.subpattern, None);
        }
    }

    #[test]
    fn dxx_template() {
        let pa = classify_pattern(&AreaDictionary::from_lists(&["a"], &["b"], &["c", "b"]));
        assert_eq!(pa.subpattern.as_deref(), Some("DxX"));
        assert_eq!(pa.pattern, Pattern::D);
    }

    #[test]
    fn empty_groups() {
        let pa = classify_pattern(&AreaDictionary::from_lists(&[], &["a"], &["a"]));
        assert_eq!(
            (pa.pattern, pa.subpattern.as_deref()),
            (Pattern::UnclassifiedNoArea, Some("A?C"))
        );
        let pa = classify_pattern(&AreaDictionary::from_lists(&[], &[], &["a"]));
        assert_eq!(
            (pa.pattern, pa.subpattern),
            (Pattern::UnclassifiedNoArea, None)
        );
        let pa = classify_pattern(&AreaDictionary::from_lists(
            &["a", "b", "c", "d"],
            &["a"],
            &["b"],
        ));
        assert_eq!(pa.pattern, Pattern::UnclassifiedOther);
    }

    #[test]
    fn patep_keeps_both() {
        use Group::*;
        let c = counts(
            30,
            &[
                (TL, "obêc", 26),
                (TL, "buc", 21),
                (ML, "buc", 30),
                (BL, NULL_FORM, 30),
            ],
        );
        let d = build_dictionary(&c, DEFAULT_ALPHA);
        assert_eq!(d.get(TL).len(), 2);
    }

    #[test]
    fn unique_area_beats_poor_shared_one() {
        use Group::*;
        let c = counts(
            30,
            &[(TL, "a", 29), (TL, "b", 3), (ML, "b", 30), (BL, "b", 30)],
        );
        let d = build_dictionary(&c, DEFAULT_ALPHA);
        assert_eq!(d.get(TL), &BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn manam_drops_null() {
        use Group::*;
        let c = counts(
            30,
            &[
                (TL, "bong", 20),
                (TL, NULL_FORM, 25),
                (ML, "bong", 30),
                (BL, "bong", 12),
                (BL, NULL_FORM, 30),
            ],
        );
        let d = build_dictionary(&c, DEFAULT_ALPHA);
        assert_eq!(
            d,
            AreaDictionary::from_lists(&["bong"], &["bong"], &["bong"])
        );
    }

    #[test]
    fn scores_and_best() {
        let assign = [0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
        let labels: Vec<String> = ["a", "a", "b", "a", "c", "c", "c", "c", "c", "c"]
            .map(String::from)
            .to_vec();
        let (s, best) = score_means(&assign, &labels, 0).unwrap();
        assert_eq!(s[best].means, "a");
        assert_eq!((s[0].tp, s[0].fp, s[0].fn_), (2, 1, 1));
        assert!(score_means(&assign, &labels, 5).is_err());
    }

    #[test]
    fn whole_map_means_recall_one() {
        let assign: Vec<usize> = (0..100).map(|i| usize::from(i >= 10)).collect();
        let labels = vec!["when".to_string(); 100];
        let (s, _) = score_means(&assign, &labels, 0).unwrap();
        assert_eq!(s[0].recall, 1.0);
        assert!((s[0].precision - 0.1).abs() < 1e-15);
    }
}
