//! Synthetic verse-aligned corpus with planted coexpression schemes.
//!
//! Every target doculect translates the pivot's filler words through its own
//! bijective dictionary and renders `when` by a scheme over the three usage
//! groups, e.g. `X X -` (one form for TL and ML, NULL for BL) or `XY X X`
//! (two competing forms in TL). The usage groups give the usage matrix a
//! three-blob geometry.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use semmap_core::typology::{Group, Pattern};

use crate::config::PipelineConfig;

/// `(iso, scheme, expected label)`; `-` in a scheme is NULL.
pub const SCHEMES: [(&str, &str, &str); 8] = [
    ("aaa", "X X X", "A"),
    ("bbb", "X X -", "B"),
    ("ccc", "X Y Y", "C"),
    ("ddd", "X Y Z", "D"),
    ("eee", "X Y X", "E"),
    ("cxa", "XY X X", "CxA"),
    ("dtb", "X YW Z", "D2b"),
    ("bth", "X X YZ", "B3"),
];

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub verses: usize,
    /// Only every this-many-th verse contains the pivot token.
    pub pivot_every: usize,
    /// Chance that a doculect leaves a `when` occurrence untranslated.
    pub null_noise: f64,
    pub vocab: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            verses: 300,
            pivot_every: 3,
            null_noise: 0.1,
            vocab: 60,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    pub iso: String,
    pub scheme: String,
    pub pattern: Pattern,
    pub subpattern: Option<String>,
}

pub struct SynthCorpus {
    pub config_path: PathBuf,
    pub planted: Vec<Planted>,
    /// First usage point of each group.
    pub anchors: BTreeMap<Group, String>,
    /// Usage-point row id to planted group.
    pub truth: BTreeMap<String, Group>,
}

/// Expected pattern for a label such as `B` or `D2b`.
pub fn expected(label: &str) -> (Pattern, Option<String>) {
    let lead: Pattern = label[..1]
        .parse()
        .expect("label starts with a pattern letter");
    let sub = (label.len() > 1).then(|| label.to_string());
    (lead, sub)
}

fn form(letter: char, iso: &str) -> String {
    format!("{}{iso}", letter.to_ascii_lowercase())
}

/// Writes `corpus/*.txt`, `metadata.tsv`, `planted.tsv` and `semmap.toml`
/// under `dir`.
pub fn write_corpus(dir: &Path, spec: &SynthSpec) -> io::Result<SynthCorpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let corpus = dir.join("corpus");
    fs::create_dir_all(&corpus)?;
    let schemes: Vec<(&str, Vec<Vec<char>>)> = SCHEMES
        .iter()
        .map(|(iso, s, _)| (*iso, s.split(' ').map(|g| g.chars().collect()).collect()))
        .collect();

    let mut pivot = String::new();
    let mut targets: Vec<String> = vec![String::new(); schemes.len()];
    let mut anchors = BTreeMap::new();
    let mut truth = BTreeMap::new();
    let mut when_count = 0;
    for i in 0..spec.verses {
        let verse = format!("MAT:{}:{}", i / 40 + 1, i % 40 + 1);
        let len = rng.random_range(4..=8);
        let mut words: Vec<String> = (0..len)
            .map(|_| format!("w{}", rng.random_range(0..spec.vocab)))
            .collect();
        let group = if i % spec.pivot_every.max(1) != 0 {
            None
        } else {
            let g = Group::ALL[when_count % 3];
            when_count += 1;
            let at = rng.random_range(0..=len);
            words.insert(at, "when".into());
            let row = format!("{verse}#{at}");
            anchors.entry(g).or_insert_with(|| row.clone());
            truth.insert(row, g);
            Some(g)
        };
        let _ = writeln!(pivot, "{verse}\t{}", words.join(" "));
        for ((iso, scheme), text) in schemes.iter().zip(&mut targets) {
            let mut out: Vec<String> = Vec::with_capacity(words.len());
            for w in &words {
                if w == "when" {
                    let g = group.expect("when only in group verses");
                    let options = &scheme[g.index()];
                    let pick = options[rng.random_range(0..options.len())];
                    let dropped = rng.random_bool(spec.null_noise);
                    if pick != '-' && !dropped {
                        out.push(form(pick, iso));
                    }
                } else {
                    out.push(format!("{iso}{}", &w[1..]));
                }
            }
            out.shuffle(&mut rng);
            let _ = writeln!(text, "{verse}\t{}", out.join(" "));
        }
    }
    fs::write(corpus.join("eng.txt"), pivot)?;
    let mut meta = String::from(
        "iso\tname\tfamily\tmacroarea\tyear\neng\tEnglish\tIndo-European\tEurasia\t2001\n",
    );
    let mut planted_tsv = String::from("iso\tscheme\tlabel\n");
    let mut planted = Vec::new();
    for ((iso, scheme, label), text) in SCHEMES.iter().zip(&targets) {
        fs::write(corpus.join(format!("{iso}.txt")), text)?;
        let _ = writeln!(meta, "{iso}\tPlanted {label}\tSynthetic\tNowhere\tNA");
        let _ = writeln!(planted_tsv, "{iso}\t{scheme}\t{label}");
        let (pattern, subpattern) = expected(label);
        planted.push(Planted {
            iso: iso.to_string(),
            scheme: scheme.to_string(),
            pattern,
            subpattern,
        });
    }
    fs::write(dir.join("metadata.tsv"), meta)?;
    fs::write(dir.join("planted.tsv"), planted_tsv)?;

    let cfg = PipelineConfig {
        corpus_dir: Some("corpus".into()),
        metadata: Some("metadata.tsv".into()),
        k_min: 3,
        k_max: 3,
        grid: 100,
        group_anchors: anchors
            .iter()
            .map(|(g, a)| (g.to_string(), a.clone()))
            .collect(),
        output_dir: "out".into(),
        ..PipelineConfig::default()
    };
    let config_path = dir.join("semmap.toml");
    fs::write(&config_path, cfg.to_toml())?;
    Ok(SynthCorpus {
        config_path,
        planted,
        anchors,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use semmap_core::corpus::Corpus;

    #[test]
    fn corpus_loads_with_planted_forms() {
        let dir = tempfile::tempdir().unwrap();
        let s = write_corpus(dir.path(), &SynthSpec::default()).unwrap();
        let cfg = PipelineConfig::from_file(&s.config_path).unwrap();
        let c = Corpus::load(
            cfg.corpus_dir.as_deref().unwrap(),
            cfg.metadata.as_deref(),
            "eng",
        )
        .unwrap();
        assert_eq!(c.doculects.len(), 9);
        assert_eq!(c.pivot().coverage(), 300);
        assert_eq!(s.truth.len(), 100);
        assert_eq!(s.anchors.len(), 3);
        let b = &c.doculects["bbb"];
        assert!(b.verses.values().any(|t| t.contains("xbbb")));
        assert!(!b.verses.values().any(|t| t.contains("ybbb")));
        assert_eq!(c.doculects["cxa"].name, "Planted CxA");
    }

    #[test]
    fn same_seed_same_bytes() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_corpus(a.path(), &SynthSpec::default()).unwrap();
        write_corpus(b.path(), &SynthSpec::default()).unwrap();
        for f in ["corpus/eng.txt", "corpus/dtb.txt", "semmap.toml"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn labels_map_to_patterns() {
        assert_eq!(expected("B"), (Pattern::B, None));
        assert_eq!(expected("D2b"), (Pattern::D, Some("D2b".into())));
    }
}
