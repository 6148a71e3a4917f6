//! The end-to-end pipeline and the stage functions the subcommands reuse.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use semmap_core::align::{align_doculect, write_dump, AlignParams, AlignReport, Parallel};
use semmap_core::corpus::{normalize, Corpus, Doculect};
use semmap_core::matrix::{build_matrix, hamming, RowId, UsageMatrix};
use semmap_core::mds::{classical_mds, write_embedding_tsv, EmbeddedMap};
use semmap_core::mixture::{
    core_points, fit_gmm, select_k, write_assignment_tsv, write_model_tsv, write_selection_tsv,
    CorePointSet, GmmModel, Selection,
};
use semmap_core::surface::{
    contour_field, null_heat, write_surface_tsv, HeatLayer, KrigSurface, KrigingSystem, Point,
};
use semmap_core::treebank::{
    extract_all, inject_annotations, parse_treebank, write_constructions_tsv, Construction, Kind,
    Sentence,
};
use semmap_core::typology::{
    classify_pattern, dictionary_from_areas, pattern_frequencies, prototypicality, score_means,
    write_classification_tsv, write_scores_tsv, AreaDictionary, Group, PatternAssignment,
};

use crate::config::{GroupMap, Needs, PipelineConfig};
use crate::error::{CliError, CliResult, StageExt};
use crate::output::{Manifest, OutputDir, RunHeader};
use crate::svg::{render_map, MapSpec};

/// Worker pool capped by `SEMMAP_THREADS` when set.
pub fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SEMMAP_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
            CliError::Config(format!(
                "SEMMAP_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Prefixes an error message with the offending input id, keeping its kind.
fn within(id: &str, e: semmap_core::Error) -> semmap_core::Error {
    use semmap_core::Error::*;
    match e {
        InvalidArgument(m) => InvalidArgument(format!("{id}: {m}")),
        Data(m) => Data(format!("{id}: {m}")),
        Numerical(m) => Numerical(format!("{id}: {m}")),
        Parse { location, message } => Parse {
            location: format!("{id}: {location}"),
            message,
        },
        Io(e) => Data(format!("{id}: {e}")),
    }
}

fn data(m: impl Into<String>) -> semmap_core::Error {
    semmap_core::Error::Data(m.into())
}

/// Writes a file under `out` after stage `stage` produced its contents.
fn put(out: &OutputDir, rel: &str, text: &str) -> CliResult<()> {
    out.write(rel, text.as_bytes()).map(|_| ())
}

pub fn load_corpus(cfg: &PipelineConfig) -> CliResult<Corpus> {
    let dir = cfg
        .corpus_dir
        .as_deref()
        .ok_or_else(|| CliError::Config("corpus_dir is not set".into()))?;
    Corpus::load(dir, cfg.metadata.as_deref(), &cfg.pivot_iso).stage("corpus")
}

pub fn write_corpus_tsv(corpus: &Corpus, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("iso\tsource\tname\tfamily\tmacroarea\tyear\tcoverage\n");
    for d in corpus.manifest().doculects {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.iso,
            d.source,
            d.name,
            d.family,
            d.macroarea,
            d.year.map_or("NA".to_string(), |y| y.to_string()),
            d.coverage
        );
    }
    out
}

pub struct Alignment {
    /// Per target iso, the pivot-token parallels.
    pub parallels: BTreeMap<String, Vec<Parallel>>,
    pub reports: Vec<AlignReport>,
}

pub fn align_corpus(cfg: &PipelineConfig, corpus: &Corpus) -> CliResult<Alignment> {
    let params = AlignParams {
        iterations: cfg.align_iterations,
        min_count: cfg.min_count,
        seed: cfg.align_seed,
    };
    let targets: Vec<&Doculect> = corpus.targets().collect();
    if targets.is_empty() {
        return Err(CliError::Stage {
            stage: "align",
            source: data("corpus holds no doculect besides the pivot"),
        });
    }
    let results: Vec<_> = targets
        .par_iter()
        .map(|t| {
            align_doculect(corpus.pivot(), t, &cfg.pivot_tokens, &params)
                .map_err(|e| within(&t.iso, e))
        })
        .collect::<semmap_core::Result<_>>()
        .stage("align")?;
    let mut parallels = BTreeMap::new();
    let mut reports = Vec::new();
    for (t, (_, p, r)) in targets.iter().zip(results) {
        parallels.insert(t.iso.clone(), p);
        reports.push(r);
    }
    Ok(Alignment { parallels, reports })
}

pub fn write_align_report(reports: &[AlignReport], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("iso\tshared_verses\tdropped_target_verses\tfwd_loglik\trev_loglik\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.6}\t{:.6}",
            r.iso,
            r.shared_verses,
            r.dropped_target_verses,
            r.fwd_loglik.last().copied().unwrap_or(f64::NAN),
            r.rev_loglik.last().copied().unwrap_or(f64::NAN)
        );
    }
    out
}

/// One usage point per pivot-token occurrence, in verse order.
pub fn pivot_rows(pivot: &Doculect, tokens: &[String]) -> Vec<RowId> {
    let mut rows = Vec::new();
    for (v, text) in &pivot.verses {
        for (i, tok) in normalize(text).iter().enumerate() {
            if tokens.iter().any(|t| t.to_lowercase() == *tok) {
                rows.push(RowId {
                    verse: v.clone(),
                    pivot_index: i,
                });
            }
        }
    }
    rows
}

pub fn embed(cfg: &PipelineConfig, m: &UsageMatrix) -> CliResult<EmbeddedMap> {
    if m.n_rows() < 3 {
        return Err(CliError::Stage {
            stage: "mds",
            source: data(format!("only {} usage points", m.n_rows())),
        });
    }
    let d = hamming(m).stage("matrix")?;
    classical_mds(&d, cfg.mds_dims.min(m.n_rows() - 1)).stage("mds")
}

pub struct Clustering {
    pub selection: Selection,
    pub model: GmmModel,
    /// Component index per group.
    pub groups: BTreeMap<Group, usize>,
    pub core: BTreeMap<Group, CorePointSet>,
}

pub fn cluster(cfg: &PipelineConfig, points: &[Point], rows: &[RowId]) -> CliResult<Clustering> {
    let k_max = cfg.k_max.min(points.len() / 3);
    if k_max < cfg.k_min {
        return Err(CliError::Stage {
            stage: "gmm",
            source: data(format!(
                "{} usage points are too few for K >= {}",
                points.len(),
                cfg.k_min
            )),
        });
    }
    let selection = select_k(points, cfg.k_min..=k_max, cfg.gmm_seed).stage("gmm")?;
    let model = fit_gmm(points, selection.chosen, cfg.gmm_seed).stage("gmm")?;
    let groups: BTreeMap<Group, usize> = match cfg.group_map()? {
        GroupMap::Clusters(m) => m,
        GroupMap::Anchors(m) => m
            .into_iter()
            .map(|(g, a)| {
                let id = RowId::parse(&a).stage("groups")?;
                let r = rows
                    .iter()
                    .position(|r| *r == id)
                    .ok_or_else(|| CliError::Stage {
                        stage: "groups",
                        source: data(format!("anchor {a} for {g} is not a usage point")),
                    })?;
                Ok((g, model.assignments[r]))
            })
            .collect::<CliResult<_>>()?,
    };
    let mut seen: Vec<usize> = groups.values().copied().collect();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != groups.len() {
        return Err(CliError::Stage {
            stage: "groups",
            source: data(format!("two groups share a cluster: {groups:?}")),
        });
    }
    if let Some((g, c)) = groups.iter().find(|(_, c)| **c >= model.k()) {
        return Err(CliError::Stage {
            stage: "groups",
            source: data(format!("{g} maps to component {c} but K = {}", model.k())),
        });
    }
    let core_k = cfg.core_k.min(points.len());
    let core = groups
        .iter()
        .map(|(g, &c)| {
            Ok((
                *g,
                core_points(&model, c, core_k, points).map_err(|e| within(&g.to_string(), e))?,
            ))
        })
        .collect::<semmap_core::Result<_>>()
        .stage("core-points")?;
    Ok(Clustering {
        selection,
        model,
        groups,
        core,
    })
}

pub fn write_core_tsv(c: &Clustering, rows: &[RowId], header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("group\tcluster\trank\trow-id\tdistance\n");
    for (g, set) in &c.core {
        for (rank, (&m, d)) in set.members.iter().zip(&set.distances).enumerate() {
            let _ = writeln!(
                out,
                "{g}\t{}\t{}\t{}\t{d:.9}",
                set.cluster,
                rank + 1,
                rows[m]
            );
        }
    }
    out
}

pub fn write_heat_tsv(rows: &[RowId], heat: &HeatLayer, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "# doculects={}", heat.doculects);
    out.push_str("row-id\tnull_count\n");
    for (r, c) in rows.iter().zip(&heat.counts) {
        let _ = writeln!(out, "{r}\t{c}");
    }
    out
}

/// Outcome of mapping one doculect.
#[derive(Debug, Clone, PartialEq)]
pub struct DoculectMap {
    pub iso: String,
    pub surfaces: Vec<KrigSurface>,
    pub classification: Option<(AreaDictionary, PatternAssignment)>,
}

/// Means labels in sorted order.
fn means_of(labels: &[String]) -> Vec<String> {
    let mut m = labels.to_vec();
    m.sort();
    m.dedup();
    m
}

/// Fits every means surface of one doculect, writes its surface TSV and SVG
/// map and, given core points, classifies it.
#[allow(clippy::too_many_arguments)]
pub fn map_doculect(
    cfg: &PipelineConfig,
    sys: &KrigingSystem,
    iso: &str,
    points: &[Point],
    labels: &[String],
    core: Option<&BTreeMap<Group, Vec<Point>>>,
    heat: Option<&HeatLayer>,
    header: &RunHeader,
    out: &OutputDir,
) -> CliResult<DoculectMap> {
    let means = means_of(labels);
    let mut surfaces = sys
        .fit_many(labels, &means)
        .map_err(|e| within(iso, e))
        .stage("surfaces")?;
    if cfg.levels != semmap_core::surface::LEVELS {
        for s in &mut surfaces {
            s.contours = cfg
                .levels
                .iter()
                .map(|&l| (l, contour_field(&s.grid, &s.prob, l)))
                .collect();
        }
    }
    let head = header.text();
    let mut tsv = String::new();
    for (i, s) in surfaces.iter().enumerate() {
        tsv.push_str(&write_surface_tsv(s, if i == 0 { &head } else { "" }));
    }
    put(out, &format!("surfaces/{iso}.tsv"), &tsv)?;
    let svg = render_map(&MapSpec {
        title: iso,
        header: &head,
        points,
        labels,
        surfaces: &surfaces,
        levels: &cfg.levels,
        heat,
    });
    put(out, &format!("maps/{iso}.svg"), &svg)?;
    let classification = match core {
        None => None,
        Some(core) => {
            let level = cfg.area_level();
            let areas: BTreeMap<String, Vec<_>> = surfaces
                .iter()
                .map(|s| (s.means.clone(), s.area(level).unwrap_or_default().to_vec()))
                .collect();
            let dict = dictionary_from_areas(core, &areas, cfg.alpha)
                .map_err(|e| within(iso, e))
                .stage("dictionaries")?;
            let pa = classify_pattern(&dict);
            Some((dict, pa))
        }
    };
    Ok(DoculectMap {
        iso: iso.to_string(),
        surfaces,
        classification,
    })
}

/// Maps every column of `m` in parallel; results in column order.
#[allow(clippy::too_many_arguments)]
pub fn map_all(
    cfg: &PipelineConfig,
    m: &UsageMatrix,
    points: &[Point],
    only: &[String],
    core: Option<&BTreeMap<Group, Vec<Point>>>,
    header: &RunHeader,
    out: &OutputDir,
) -> CliResult<Vec<DoculectMap>> {
    let sys = KrigingSystem::new(points, &cfg.krig_params()).stage("surfaces")?;
    let heat = cfg.heat_layer.then(|| null_heat(m));
    let cols: Vec<usize> = (0..m.n_cols())
        .filter(|&c| only.is_empty() || only.contains(&m.columns()[c]))
        .collect();
    if let Some(missing) = only.iter().find(|iso| m.column_index(iso).is_none()) {
        return Err(CliError::Stage {
            stage: "surfaces",
            source: data(format!("doculect {missing} is not in the usage matrix")),
        });
    }
    cols.par_iter()
        .map(|&c| {
            let labels = m.labels(c);
            map_doculect(
                cfg,
                &sys,
                &m.columns()[c],
                points,
                &labels,
                core,
                heat.as_ref(),
                header,
                out,
            )
        })
        .collect()
}

pub fn write_patterns_tsv(
    rows: &BTreeMap<String, (AreaDictionary, PatternAssignment)>,
    header: &str,
) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("pattern\tcount\n");
    for (p, n) in pattern_frequencies(rows.values().map(|(_, pa)| pa)) {
        let _ = writeln!(out, "{p}\t{n}");
    }
    out
}

/// Means scores per (doculect, group cluster) plus prototypicality rankings.
pub fn score_all(c: &Clustering, m: &UsageMatrix, header: &str) -> CliResult<(String, String)> {
    let mut scores = String::new();
    for line in header.lines() {
        let _ = writeln!(scores, "# {line}");
    }
    let mut best: BTreeMap<Group, BTreeMap<String, String>> = BTreeMap::new();
    let mut first = true;
    for col in 0..m.n_cols() {
        let iso = &m.columns()[col];
        let labels = m.labels(col);
        for (g, &cl) in &c.groups {
            let (s, b) = score_means(&c.model.assignments, &labels, cl)
                .map_err(|e| within(iso, e))
                .stage("scores")?;
            let text = write_scores_tsv(iso, &s, b, "");
            let body = if first {
                text.as_str()
            } else {
                text.split_once('\n').map_or("", |x| x.1)
            };
            first = false;
            scores.push_str(body);
            best.entry(*g)
                .or_default()
                .insert(iso.clone(), s[b].means.clone());
        }
    }
    let mut proto = String::new();
    for line in header.lines() {
        let _ = writeln!(proto, "# {line}");
    }
    proto.push_str("group\tcluster\trow-id\tscore\n");
    for (g, &cl) in &c.groups {
        let ranked =
            prototypicality(cl, &c.model.assignments, &best[g], m).stage("prototypicality")?;
        for (r, s) in ranked {
            let _ = writeln!(proto, "{g}\t{cl}\t{}\t{s}", m.rows()[r]);
        }
    }
    Ok((scores, proto))
}

pub fn read_treebanks(cfg: &PipelineConfig) -> CliResult<Vec<Sentence>> {
    let mut all = Vec::new();
    for p in &cfg.treebanks {
        let text = fs::read_to_string(p).map_err(|e| CliError::Stage {
            stage: "treebank",
            source: data(format!("{}: {e}", p.display())),
        })?;
        let mut s = parse_treebank(&text)
            .map_err(|e| within(&p.display().to_string(), e))
            .stage("treebank")?;
        all.append(&mut s);
    }
    Ok(all)
}

/// Sentences as overt-token text with placeholders before each conjunct and
/// absolute clause, one `sentence-id<TAB>text` line each.
pub fn annotate(
    sentences: &[Sentence],
    found: &[Construction],
    cfg: &PipelineConfig,
) -> CliResult<String> {
    let mut out = String::new();
    for s in sentences {
        let overt: Vec<usize> = (0..s.tokens.len())
            .filter(|&i| !s.tokens[i].empty)
            .collect();
        let words: Vec<&str> = overt
            .iter()
            .map(|&i| s.tokens[i].form.as_deref().unwrap_or("_"))
            .collect();
        let mut marks: BTreeMap<usize, Kind> = BTreeMap::new();
        for c in found
            .iter()
            .filter(|c| c.sentence == s.id && c.kind != Kind::Jegda)
        {
            let head = *c.trigger.last().expect("constructions have a trigger");
            let Some((lo, _)) = s.span(head) else {
                continue;
            };
            let mut at = overt.iter().position(|&i| i >= lo).unwrap_or(0);
            while at + 1 < words.len() && cfg.edit_rules.stopwords.contains(words[at]) {
                at += 1;
            }
            marks.entry(at).or_insert(c.kind);
        }
        let marks: Vec<(usize, Kind)> = marks.into_iter().collect();
        let text = inject_annotations(&words.join(" "), &marks, &cfg.edit_rules)
            .map_err(|e| within(&s.id, e))
            .stage("annotate")?;
        let _ = writeln!(out, "{}\t{text}", s.id);
    }
    Ok(out)
}

/// Extraction plus optional annotated text, written under `out`.
pub fn treebank_stage(
    cfg: &PipelineConfig,
    header: &RunHeader,
    out: &OutputDir,
) -> CliResult<Vec<Construction>> {
    let sentences = read_treebanks(cfg)?;
    let found = extract_all(&sentences, &cfg.extract);
    put(
        out,
        "constructions.tsv",
        &write_constructions_tsv(&found, &header.text()),
    )?;
    if cfg.annotate_text {
        let mut text = String::new();
        for line in header.text().lines() {
            let _ = writeln!(text, "# {line}");
        }
        text.push_str(&annotate(&sentences, &found, cfg)?);
        put(out, "annotated.txt", &text)?;
    }
    Ok(found)
}

/// Runs every stage and writes the manifest last.
pub fn run(cfg: &PipelineConfig) -> CliResult<Manifest> {
    cfg.validate(Needs {
        corpus: true,
        treebanks: !cfg.treebanks.is_empty(),
    })?;
    let header = RunHeader::new("run", cfg);
    let head = header.text();
    let out = OutputDir::create(&cfg.output_dir)?;
    let mut summary = BTreeMap::new();

    let corpus = load_corpus(cfg)?;
    put(&out, "corpus.tsv", &write_corpus_tsv(&corpus, &head))?;
    let alignment = align_corpus(cfg, &corpus)?;
    for (iso, p) in &alignment.parallels {
        put(&out, &format!("align/{iso}.tsv"), &write_dump(p, &head))?;
    }
    put(
        &out,
        "align_report.tsv",
        &write_align_report(&alignment.reports, &head),
    )?;

    let rows = pivot_rows(corpus.pivot(), &cfg.pivot_tokens);
    if rows.is_empty() {
        return Err(CliError::Stage {
            stage: "matrix",
            source: data(format!(
                "pivot {} never contains {:?}",
                cfg.pivot_iso, cfg.pivot_tokens
            )),
        });
    }
    let matrix = build_matrix(&alignment.parallels, &rows).stage("matrix")?;
    put(&out, "matrix.tsv", &matrix.to_tsv(&head))?;
    let row_ids: Vec<String> = rows.iter().map(ToString::to_string).collect();
    let map = embed(cfg, &matrix)?;
    put(
        &out,
        "embedding.tsv",
        &write_embedding_tsv(&row_ids, &map, &head),
    )?;
    let points = map.xy();

    let clustering = cluster(cfg, &points, &rows)?;
    put(
        &out,
        "gmm_selection.tsv",
        &write_selection_tsv(&clustering.selection, &head),
    )?;
    put(
        &out,
        "gmm_model.tsv",
        &write_model_tsv(&clustering.model, &head),
    )?;
    put(
        &out,
        "gmm_assignments.tsv",
        &write_assignment_tsv(&row_ids, &clustering.model, &head),
    )?;
    put(
        &out,
        "core_points.tsv",
        &write_core_tsv(&clustering, &rows, &head),
    )?;
    put(
        &out,
        "null_heat.tsv",
        &write_heat_tsv(&rows, &null_heat(&matrix), &head),
    )?;

    let core: BTreeMap<Group, Vec<Point>> = clustering
        .core
        .iter()
        .map(|(g, s)| (*g, s.members.iter().map(|&i| points[i]).collect()))
        .collect();
    let maps = map_all(cfg, &matrix, &points, &[], Some(&core), &header, &out)?;
    let classified: BTreeMap<String, (AreaDictionary, PatternAssignment)> = maps
        .into_iter()
        .filter_map(|d| d.classification.map(|c| (d.iso, c)))
        .collect();
    put(
        &out,
        "classification.tsv",
        &write_classification_tsv(&classified, &head),
    )?;
    put(
        &out,
        "patterns.tsv",
        &write_patterns_tsv(&classified, &head),
    )?;
    let (scores, proto) = score_all(&clustering, &matrix, &head)?;
    put(&out, "scores.tsv", &scores)?;
    put(&out, "prototypicality.tsv", &proto)?;

    if !cfg.treebanks.is_empty() {
        let found = treebank_stage(cfg, &header, &out)?;
        summary.insert("constructions".into(), found.len().to_string());
    }

    summary.insert("doculects".into(), matrix.n_cols().to_string());
    summary.insert("usage_points".into(), matrix.n_rows().to_string());
    summary.insert("gmm_k".into(), clustering.model.k().to_string());
    summary.insert(
        "aic_agrees".into(),
        clustering.selection.aic_agrees.to_string(),
    );
    summary.insert(
        "silhouette_agrees".into(),
        clustering.selection.silhouette_agrees.to_string(),
    );
    for (g, c) in &clustering.groups {
        summary.insert(format!("cluster_{g}"), c.to_string());
    }
    out.write_manifest("manifest.json", &header, summary)
}

/// Reads a stored intermediate, naming the command that produces it.
pub fn read_intermediate(path: &Path, hint: &'static str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|_| CliError::Missing {
        path: path.to_path_buf(),
        hint,
    })
}

/// Pivot-token usage points of a matrix TSV with its embedding, checked to
/// share row ids.
pub fn load_map_inputs(matrix: &Path, embedding: &Path) -> CliResult<(UsageMatrix, Vec<Point>)> {
    let m = UsageMatrix::from_tsv(&read_intermediate(matrix, "run")?).stage("matrix")?;
    let (ids, coords) =
        semmap_core::mds::parse_embedding_tsv(&read_intermediate(embedding, "run")?)
            .stage("mds")?;
    if ids.len() != m.n_rows() || ids.iter().zip(m.rows()).any(|(a, b)| *a != b.to_string()) {
        return Err(CliError::Stage {
            stage: "map",
            source: data("embedding rows do not match the usage matrix rows"),
        });
    }
    Ok((m, coords.iter().map(|c| [c[0], c[1]]).collect()))
}

/// Dictionary of each stored row: the last column is the dictionary JSON.
pub fn read_dictionaries(text: &str) -> CliResult<BTreeMap<String, AreaDictionary>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') || line.starts_with("iso\t") {
            continue;
        }
        let (iso, rest) = line.split_once('\t').unwrap_or((line, ""));
        let json = rest.rsplit('\t').next().unwrap_or_default();
        let dict: AreaDictionary = serde_json::from_str(json).map_err(|e| CliError::Stage {
            stage: "classify",
            source: semmap_core::Error::Parse {
                location: format!("dictionaries:{}", n + 1),
                message: e.to_string(),
            },
        })?;
        out.insert(iso.to_string(), dict);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_pivot_occurrences() {
        let mut d = Doculect::new("eng", "eng");
        d.verses.insert(
            semmap_core::corpus::VerseId::parse("MAT:1:1").unwrap(),
            "When he came, when he saw".into(),
        );
        d.verses.insert(
            semmap_core::corpus::VerseId::parse("MAT:1:2").unwrap(),
            "and then".into(),
        );
        let rows: Vec<String> = pivot_rows(&d, &["when".into()])
            .iter()
            .map(ToString::to_string)
            .collect();
        assert_eq!(rows, ["MAT:1:1#0", "MAT:1:1#3"]);
    }

    #[test]
    fn dictionaries_read_from_two_or_five_columns() {
        let d = AreaDictionary::from_lists(&["a"], &["b"], &["b"]);
        let text = format!(
            "# c\niso\tdictionary\nxxx\t{}\nyyy\tC\t-\t-\t{}\n",
            d.to_json(),
            d.to_json()
        );
        let m = read_dictionaries(&text).unwrap();
        assert_eq!(m["xxx"], d);
        assert_eq!(m["yyy"], d);
        assert!(read_dictionaries("zzz\t{").is_err());
    }

    #[test]
    fn stage_errors_keep_kind_and_id() {
        let e = within("abc", semmap_core::Error::Numerical("x".into()));
        let c = CliError::Stage {
            stage: "gmm",
            source: e,
        };
        assert_eq!(c.exit_code(), 4);
        assert!(c.to_string().contains("abc"));
    }
}
