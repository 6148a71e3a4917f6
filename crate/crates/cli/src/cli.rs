//! Argument parsing and the subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use semmap_core::align::parse_dump;
use semmap_core::corpstats::{metric_row, write_metrics_tsv};
use semmap_core::corpus::VerseId;
use semmap_core::stats::{binomial_test, chi_square_2x2, fisher_exact, Tails};
use semmap_core::typology::{
    classify_pattern, write_classification_tsv, AreaDictionary, PatternAssignment,
};

use crate::config::{Needs, Overrides, PipelineConfig};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{OutputDir, RunHeader};
use crate::pipeline::{
    self, align_corpus, load_map_inputs, read_dictionaries, read_intermediate, write_align_report,
};
use crate::synth::{write_corpus, SynthSpec};

#[derive(Debug, Parser)]
#[command(
    name = "semmap",
    version,
    about = "Probabilistic semantic maps from parallel texts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

impl Common {
    pub fn resolve(self) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        self.overrides.apply(&mut cfg)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every stage and write all artifacts plus manifest.json.
    Run(Common),
    /// Align every doculect to the pivot; score against a gold file if given.
    AlignEval {
        #[command(flatten)]
        common: Common,
        /// TSV `iso verse-id pivot-index form-or-NULL`.
        #[arg(long)]
        gold: Option<PathBuf>,
    },
    /// Fit surfaces and draw maps from a stored matrix and embedding.
    Map {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long)]
        embedding: Option<PathBuf>,
        /// Restrict to these doculects.
        #[arg(long, value_delimiter = ',')]
        doculects: Vec<String>,
    },
    /// Classify stored area dictionaries.
    Classify {
        #[command(flatten)]
        common: Common,
        /// TSV whose first column is the iso code and last the dictionary JSON.
        #[arg(long)]
        dictionaries: Option<PathBuf>,
    },
    /// Extract participle and jegda constructions from treebanks.
    TreebankExtract(Common),
    /// Contingency tests over extracted constructions and ad hoc inputs.
    StatsReport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        constructions: Option<PathBuf>,
        /// Extra 2x2 table `a,b,c,d`.
        #[arg(long = "table")]
        tables: Vec<String>,
        /// Binomial test `k,n,p0`.
        #[arg(long = "binomial")]
        binomials: Vec<String>,
        /// Lemma series, `subset<TAB>lemma` or one lemma per line.
        #[arg(long)]
        lemmas: Option<PathBuf>,
    },
    /// Write a synthetic corpus with planted schemes and its config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        verses: usize,
        /// Only every n-th verse contains the pivot token.
        #[arg(long, default_value_t = 3)]
        pivot_every: usize,
    },
}

/// Parses, runs and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = pipeline::thread_pool().and_then(|pool| pool.install(|| execute(cli.command)));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("semmap: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Run(common) => {
            let cfg = common.resolve()?;
            let m = pipeline::run(&cfg)?;
            println!(
                "wrote {} artifacts to {}",
                m.artifacts.len() + 1,
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::AlignEval { common, gold } => align_eval(&common.resolve()?, gold.as_deref()),
        Command::Map {
            common,
            matrix,
            embedding,
            doculects,
        } => {
            let cfg = common.resolve()?;
            map(&cfg, matrix.as_deref(), embedding.as_deref(), &doculects)
        }
        Command::Classify {
            common,
            dictionaries,
        } => {
            let cfg = common.resolve()?;
            classify(&cfg, dictionaries.as_deref())
        }
        Command::TreebankExtract(common) => {
            let cfg = common.resolve()?;
            cfg.validate(Needs {
                treebanks: true,
                ..Needs::default()
            })?;
            let header = RunHeader::new("treebank-extract", &cfg);
            let out = OutputDir::create(&cfg.output_dir)?;
            let found = pipeline::treebank_stage(&cfg, &header, &out)?;
            out.write_manifest("treebank-extract.manifest.json", &header, BTreeMap::new())?;
            println!("{} constructions", found.len());
            Ok(())
        }
        Command::StatsReport {
            common,
            constructions,
            tables,
            binomials,
            lemmas,
        } => {
            let cfg = common.resolve()?;
            stats_report(
                &cfg,
                constructions.as_deref(),
                &tables,
                &binomials,
                lemmas.as_deref(),
            )
        }
        Command::Synth {
            out,
            seed,
            verses,
            pivot_every,
        } => {
            let spec = SynthSpec {
                seed,
                verses,
                pivot_every,
                ..SynthSpec::default()
            };
            let s = write_corpus(&out, &spec).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            println!("wrote {}", s.config_path.display());
            Ok(())
        }
    }
}

fn align_eval(cfg: &PipelineConfig, gold: Option<&Path>) -> CliResult<()> {
    cfg.validate(Needs {
        corpus: true,
        ..Needs::default()
    })?;
    let header = RunHeader::new("align-eval", cfg);
    let head = header.text();
    let out = OutputDir::create(&cfg.output_dir)?;
    let corpus = pipeline::load_corpus(cfg)?;
    let alignment = align_corpus(cfg, &corpus)?;
    for (iso, p) in &alignment.parallels {
        out.write(
            &format!("align/{iso}.tsv"),
            semmap_core::align::write_dump(p, &head).as_bytes(),
        )?;
    }
    out.write(
        "align_report.tsv",
        write_align_report(&alignment.reports, &head).as_bytes(),
    )?;
    if let Some(gold) = gold {
        let gold = read_gold(&read_intermediate(gold, "align-eval")?)?;
        let mut tsv = String::new();
        for line in head.lines() {
            let _ = writeln!(tsv, "# {line}");
        }
        tsv.push_str("iso\tgold_points\taccuracy\n");
        for (iso, g) in &gold {
            let p = alignment
                .parallels
                .get(iso)
                .ok_or_else(|| CliError::Stage {
                    stage: "align-eval",
                    source: semmap_core::Error::Data(format!("gold doculect {iso} not aligned")),
                })?;
            let acc = semmap_core::align::evaluate_alignment(p, g).stage("align-eval")?;
            let _ = writeln!(tsv, "{iso}\t{}\t{acc:.6}", g.len());
            println!("{iso}\t{acc:.4}");
        }
        out.write("align_eval.tsv", tsv.as_bytes())?;
    }
    out.write_manifest("align-eval.manifest.json", &header, BTreeMap::new())?;
    Ok(())
}

type Gold = BTreeMap<String, BTreeMap<(VerseId, usize), Option<String>>>;

fn read_gold(text: &str) -> CliResult<Gold> {
    let mut out: Gold = BTreeMap::new();
    for line in text
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
    {
        let (iso, rest) = line.split_once('\t').unwrap_or((line, ""));
        for p in parse_dump(rest).stage("align-eval")? {
            out.entry(iso.to_string())
                .or_default()
                .insert((p.verse, p.pivot_index), p.form);
        }
    }
    Ok(out)
}

fn map(
    cfg: &PipelineConfig,
    matrix: Option<&Path>,
    embedding: Option<&Path>,
    only: &[String],
) -> CliResult<()> {
    cfg.validate(Needs::default())?;
    let header = RunHeader::new("map", cfg);
    let matrix = matrix.map_or_else(|| cfg.output_dir.join("matrix.tsv"), Path::to_path_buf);
    let embedding =
        embedding.map_or_else(|| cfg.output_dir.join("embedding.tsv"), Path::to_path_buf);
    let (m, points) = load_map_inputs(&matrix, &embedding)?;
    let out = OutputDir::create(&cfg.output_dir)?;
    let maps = pipeline::map_all(cfg, &m, &points, only, None, &header, &out)?;
    out.write_manifest("map.manifest.json", &header, BTreeMap::new())?;
    println!("{} maps", maps.len());
    Ok(())
}

fn classify(cfg: &PipelineConfig, dictionaries: Option<&Path>) -> CliResult<()> {
    cfg.validate(Needs::default())?;
    let header = RunHeader::new("classify", cfg);
    let head = header.text();
    let path = dictionaries.map_or_else(
        || cfg.output_dir.join("classification.tsv"),
        Path::to_path_buf,
    );
    let dicts = read_dictionaries(&read_intermediate(&path, "run")?)?;
    let rows: BTreeMap<String, (AreaDictionary, PatternAssignment)> = dicts
        .into_iter()
        .map(|(iso, d)| {
            let pa = classify_pattern(&d);
            (iso, (d, pa))
        })
        .collect();
    let out = OutputDir::create(&cfg.output_dir)?;
    out.write(
        "classification.tsv",
        write_classification_tsv(&rows, &head).as_bytes(),
    )?;
    out.write(
        "patterns.tsv",
        pipeline::write_patterns_tsv(&rows, &head).as_bytes(),
    )?;
    out.write_manifest("classify.manifest.json", &header, BTreeMap::new())?;
    for (iso, (_, pa)) in &rows {
        println!(
            "{iso}\t{}\t{}\t{}",
            pa.pattern,
            pa.subpattern.as_deref().unwrap_or("-"),
            pa.null_groups()
        );
    }
    Ok(())
}

fn numbers<T: std::str::FromStr>(s: &str, n: usize, what: &str) -> CliResult<Vec<T>> {
    let v: Vec<T> = s
        .split(',')
        .map(|x| x.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Config(format!(
                "{what} {s:?}: expected {n} comma-separated numbers"
            ))
        })?;
    if v.len() != n {
        return Err(CliError::Config(format!(
            "{what} {s:?}: expected {n} comma-separated numbers"
        )));
    }
    Ok(v)
}

/// One report line for a 2x2 table: Yates χ², Cramér's V, odds ratio and
/// two-sided Fisher p. Tables with an empty margin report NA.
pub fn table_line(label: &str, t: [u64; 4]) -> String {
    let [a, b, c, d] = t;
    let fisher = fisher_exact(a, b, c, d, Tails::Two).p_value;
    let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.6}"));
    match chi_square_2x2(a, b, c, d, true) {
        Ok(r) => format!(
            "{label}\t{a}\t{b}\t{c}\t{d}\t{:.6}\t{:.6e}\t{}\t{}\t{:.6e}",
            r.statistic,
            r.p_value,
            f(r.cramers_v),
            f(r.odds_ratio),
            fisher
        ),
        Err(_) => format!("{label}\t{a}\t{b}\t{c}\t{d}\tNA\tNA\tNA\tNA\t{fisher:.6e}"),
    }
}

/// Counts per construction kind and the aspect/position tables of a
/// constructions TSV.
pub fn construction_tables(tsv: &str) -> Vec<(String, [u64; 4])> {
    let mut count: BTreeMap<(String, String, String), u64> = BTreeMap::new();
    for line in tsv.lines() {
        if line.starts_with('#') || line.starts_with("sentence-id") || line.is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() < 8 {
            continue;
        }
        *count
            .entry((c[1].to_string(), c[4].to_string(), c[7].to_string()))
            .or_default() += 1;
    }
    let n = |kind: Option<&str>, pos: &str, aspect: Option<&str>| -> u64 {
        count
            .iter()
            .filter(|((k, p, a), _)| {
                kind.is_none_or(|x| x == k) && p == pos && aspect.is_none_or(|x| x == a)
            })
            .map(|(_, v)| v)
            .sum()
    };
    let mut out = Vec::new();
    for kind in ["conjunct", "absolute"] {
        out.push((
            format!("{kind} aspect(pfv,ipfv) x position(pre,post)"),
            [
                n(Some(kind), "pre-matrix", Some("pfv")),
                n(Some(kind), "post-matrix", Some("pfv")),
                n(Some(kind), "pre-matrix", Some("ipfv")),
                n(Some(kind), "post-matrix", Some("ipfv")),
            ],
        ));
    }
    out.push((
        "kind(conjunct,absolute) x position(pre,post)".into(),
        [
            n(Some("conjunct"), "pre-matrix", None),
            n(Some("conjunct"), "post-matrix", None),
            n(Some("absolute"), "pre-matrix", None),
            n(Some("absolute"), "post-matrix", None),
        ],
    ));
    out
}

fn stats_report(
    cfg: &PipelineConfig,
    constructions: Option<&Path>,
    tables: &[String],
    binomials: &[String],
    lemmas: Option<&Path>,
) -> CliResult<()> {
    cfg.validate(Needs::default())?;
    let header = RunHeader::new("stats-report", cfg);
    let head = header.text();
    let mut rows: Vec<(String, [u64; 4])> = Vec::new();
    let explicit = constructions.is_some();
    let path = constructions.map_or_else(
        || cfg.output_dir.join("constructions.tsv"),
        Path::to_path_buf,
    );
    if explicit || (tables.is_empty() && binomials.is_empty() && lemmas.is_none()) {
        rows.extend(construction_tables(&read_intermediate(
            &path,
            "treebank-extract",
        )?));
    }
    for t in tables {
        let v: Vec<u64> = numbers(t, 4, "table")?;
        rows.push((format!("table {t}"), [v[0], v[1], v[2], v[3]]));
    }
    let mut report = String::new();
    for line in head.lines() {
        let _ = writeln!(report, "# {line}");
    }
    report.push_str("test\ta\tb\tc\td\tchi2_yates\tp_chi2\tcramers_v\todds_ratio\tp_fisher\n");
    for (label, t) in &rows {
        let _ = writeln!(report, "{}", table_line(label, *t));
    }
    for b in binomials {
        let v: Vec<f64> = numbers(b, 3, "binomial")?;
        if v[0] < 0.0
            || v[1] < v[0]
            || v[0].fract() != 0.0
            || v[1].fract() != 0.0
            || !(0.0..=1.0).contains(&v[2])
        {
            return Err(CliError::Config(format!(
                "binomial {b:?}: need integers 0 <= k <= n and p0 in [0,1]"
            )));
        }
        let r = binomial_test(v[0] as u64, v[1] as u64, v[2], Tails::Two);
        let _ = writeln!(
            report,
            "# binomial k={} n={} p0={} two-sided p={:.6e}",
            v[0], v[1], v[2], r.p_value
        );
    }
    let out = OutputDir::create(&cfg.output_dir)?;
    out.write("stats_report.tsv", report.as_bytes())?;
    if let Some(l) = lemmas {
        let text = read_intermediate(l, "treebank-extract")?;
        let mut series: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for line in text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        {
            let (subset, lemma) = line.split_once('\t').unwrap_or(("all", line));
            series
                .entry(subset.to_string())
                .or_default()
                .push(lemma.trim().to_string());
        }
        let metrics = series
            .iter()
            .map(|(s, v)| metric_row(s, v, cfg.mattr_window, cfg.normalize_orthography))
            .collect::<semmap_core::Result<Vec<_>>>()
            .stage("metrics")?;
        out.write("metrics.tsv", write_metrics_tsv(&metrics, &head).as_bytes())?;
    }
    out.write_manifest("stats-report.manifest.json", &header, BTreeMap::new())?;
    print!(
        "{}",
        report
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_use_kebab_case() {
        let cli = Cli::try_parse_from([
            "semmap",
            "run",
            "--corpus-dir",
            "c",
            "--k-min",
            "3",
            "--levels",
            "0.4,0.3",
            "--group-anchors",
            "TL=MAT:1:1#0,ML=MAT:1:2#0,BL=MAT:1:3#1",
        ])
        .unwrap();
        let Command::Run(common) = cli.command else {
            panic!()
        };
        let cfg = common.resolve().unwrap();
        assert_eq!(cfg.k_min, 3);
        assert_eq!(cfg.levels, [0.4, 0.3]);
        assert_eq!(cfg.group_anchors["BL"], "MAT:1:3#1");
    }

    #[test]
    fn construction_tables_count_cells() {
        let tsv = "# h\nsentence-id\tkind\n\
s1\tconjunct\t2\t4\tpre-matrix\tnull\tnone\tpfv\t-\n\
s2\tconjunct\t2\t4\tpost-matrix\tnull\tnone\tipfv\t-\n\
s3\tconjunct\t2\t4\tpre-matrix\tnull\tnone\tpfv\t-\n\
s4\tabsolute\t2\t4\tpre-matrix\tnull\tnone\tipfv\t-\n";
        let t = construction_tables(tsv);
        assert_eq!(t[0].1, [2, 0, 0, 1]);
        assert_eq!(t[1].1, [0, 0, 1, 0]);
        assert_eq!(t[2].1, [2, 1, 1, 0]);
    }

    #[test]
    fn empty_margins_report_na() {
        let line = table_line("x", [0, 0, 3, 4]);
        assert!(line.contains("\tNA\t"), "{line}");
    }

    #[test]
    fn bad_numbers_are_config_errors() {
        assert!(matches!(
            numbers::<u64>("1,2,x,4", 4, "table"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            numbers::<u64>("1,2,3", 4, "table"),
            Err(CliError::Config(_))
        ));
    }
}
