//! Pipeline configuration. Every key of the TOML file is also a
//! `--kebab-case` flag; flags override the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semmap_core::surface::KrigParams;
use semmap_core::treebank::{EditRules, ExtractOptions};
use semmap_core::typology::Group;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory of `<iso>[-variant].txt` verse files.
    pub corpus_dir: Option<PathBuf>,
    /// Language metadata TSV (`iso name family macroarea year`).
    pub metadata: Option<PathBuf>,
    pub pivot_iso: String,
    pub pivot_tokens: Vec<String>,
    pub align_iterations: usize,
    /// Target types linked to a pivot type fewer times become NULL.
    pub min_count: usize,
    pub align_seed: u64,
    pub mds_dims: usize,
    /// Kriging covariance range; unset uses the median pairwise distance.
    pub krig_range: Option<f64>,
    /// Nugget as a fraction of the sill.
    pub krig_nugget: f64,
    pub grid: usize,
    pub padding: f64,
    /// Contour levels, strictly descending; the last one delimits areas.
    pub levels: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    pub gmm_seed: u64,
    pub core_k: usize,
    pub alpha: f64,
    /// GMM component index per group (`TL`, `ML`, `BL`).
    pub cluster_groups: BTreeMap<String, usize>,
    /// Usage-point row ids per group; when set, a group is the component
    /// its anchor row is assigned to, and `cluster_groups` is ignored.
    pub group_anchors: BTreeMap<String, String>,
    /// Draw the NULL-construction heat layer under the scatter.
    pub heat_layer: bool,
    pub treebanks: Vec<PathBuf>,
    pub extract: ExtractOptions,
    pub edit_rules: EditRules,
    /// Write the treebank sentences with construction placeholders.
    pub annotate_text: bool,
    pub mattr_window: usize,
    pub normalize_orthography: bool,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let krig = KrigParams::default();
        PipelineConfig {
            corpus_dir: None,
            metadata: None,
            pivot_iso: "eng".into(),
            pivot_tokens: vec!["when".into()],
            align_iterations: 5,
            min_count: 3,
            align_seed: 0,
            mds_dims: 2,
            krig_range: krig.range,
            krig_nugget: krig.nugget,
            grid: krig.grid,
            padding: krig.padding,
            levels: semmap_core::surface::LEVELS.to_vec(),
            k_min: 2,
            k_max: 8,
            gmm_seed: 0,
            core_k: semmap_core::mixture::CORE_K,
            alpha: semmap_core::typology::DEFAULT_ALPHA,
            cluster_groups: [("TL", 3), ("ML", 2), ("BL", 4)]
                .map(|(g, c)| (g.to_string(), c))
                .into(),
            group_anchors: BTreeMap::new(),
            heat_layer: false,
            treebanks: Vec::new(),
            extract: ExtractOptions::default(),
            edit_rules: EditRules::default(),
            annotate_text: false,
            mattr_window: semmap_core::corpstats::MATTR_WINDOW,
            normalize_orthography: false,
            output_dir: PathBuf::from("semmap-out"),
        }
    }
}

/// How usage-point clusters become map groups.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupMap {
    Clusters(BTreeMap<Group, usize>),
    Anchors(BTreeMap<Group, String>),
}

/// What a command needs to exist on disk.
#[derive(Debug, Clone, Copy, Default)]
pub struct Needs {
    pub corpus: bool,
    pub treebanks: bool,
}

fn parse_group(s: &str) -> CliResult<Group> {
    s.parse()
        .map_err(|e: semmap_core::Error| CliError::Config(e.to_string()))
}

impl PipelineConfig {
    /// Reads a TOML file; relative paths in it resolve against its directory.
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.corpus_dir.as_mut().map(resolve);
        cfg.metadata.as_mut().map(resolve);
        cfg.treebanks.iter_mut().for_each(resolve);
        resolve(&mut cfg.output_dir);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn krig_params(&self) -> KrigParams {
        KrigParams {
            range: self.krig_range,
            nugget: self.krig_nugget,
            grid: self.grid,
            padding: self.padding,
        }
    }

    /// The level at which areas are read for dictionaries.
    pub fn area_level(&self) -> f64 {
        *self.levels.last().expect("validated levels")
    }

    pub fn group_map(&self) -> CliResult<GroupMap> {
        if !self.group_anchors.is_empty() {
            let m = self
                .group_anchors
                .iter()
                .map(|(g, a)| Ok((parse_group(g)?, a.clone())))
                .collect::<CliResult<BTreeMap<_, _>>>()?;
            return Ok(GroupMap::Anchors(m));
        }
        let m = self
            .cluster_groups
            .iter()
            .map(|(g, c)| Ok((parse_group(g)?, *c)))
            .collect::<CliResult<BTreeMap<_, _>>>()?;
        Ok(GroupMap::Clusters(m))
    }

    /// SHA-256 of the configuration with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex(&Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self, needs: Needs) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.pivot_tokens.is_empty() || self.pivot_tokens.iter().any(|t| t.trim().is_empty()) {
            return bad("pivot_tokens must list at least one non-empty token".into());
        }
        if self.pivot_iso.is_empty() {
            return bad("pivot_iso is empty".into());
        }
        if self.align_iterations == 0 {
            return bad("align_iterations must be at least 1".into());
        }
        if self.mds_dims < 2 {
            return bad(format!(
                "mds_dims must be at least 2, got {}",
                self.mds_dims
            ));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return bad(format!("levels must lie in (0,1), got {:?}", self.levels));
        }
        if self.levels.windows(2).any(|w| w[0] <= w[1]) {
            return bad(format!(
                "levels must be strictly descending, got {:?}",
                self.levels
            ));
        }
        if !(0.0..1.0).contains(&self.krig_nugget) {
            return bad(format!(
                "krig_nugget must be in [0,1), got {}",
                self.krig_nugget
            ));
        }
        if let Some(r) = self.krig_range {
            if !(r > 0.0 && r.is_finite()) {
                return bad(format!("krig_range must be positive, got {r}"));
            }
        }
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return bad(format!(
                "padding must be non-negative, got {}",
                self.padding
            ));
        }
        if self.k_min < 2 || self.k_min > self.k_max {
            return bad(format!(
                "need 2 <= k_min <= k_max, got {}..{}",
                self.k_min, self.k_max
            ));
        }
        if self.core_k == 0 {
            return bad("core_k must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must be in (0,1), got {}", self.alpha));
        }
        if self.mattr_window == 0 {
            return bad("mattr_window must be positive".into());
        }
        match self.group_map()? {
            GroupMap::Clusters(m) => {
                if m.len() != 3 {
                    return bad("cluster_groups must map TL, ML and BL".into());
                }
                let mut seen: Vec<usize> = m.values().copied().collect();
                seen.sort_unstable();
                seen.dedup();
                if seen.len() != 3 {
                    return bad("cluster_groups maps two groups to one cluster".into());
                }
                if let Some(c) = m.values().find(|&&c| c >= self.k_max) {
                    return bad(format!(
                        "cluster_groups uses component {c} but K <= {}",
                        self.k_max
                    ));
                }
            }
            GroupMap::Anchors(m) => {
                if m.len() != 3 {
                    return bad("group_anchors must give TL, ML and BL".into());
                }
                for a in m.values() {
                    semmap_core::matrix::RowId::parse(a)
                        .map_err(|e| CliError::Config(format!("group anchor {a:?}: {e}")))?;
                }
            }
        }
        let exists = |p: &Path, what: &str| {
            if p.exists() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        if needs.corpus {
            match &self.corpus_dir {
                Some(d) => exists(d, "corpus_dir")?,
                None => return bad("corpus_dir is not set".into()),
            }
            if let Some(m) = &self.metadata {
                exists(m, "metadata")?;
            }
        }
        if needs.treebanks {
            if self.treebanks.is_empty() {
                return bad("treebanks is empty".into());
            }
            for t in &self.treebanks {
                exists(t, "treebank")?;
            }
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// `KEY=VALUE` pair for map-valued flags.
fn key_value(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))
}

/// Flag overrides; each field mirrors the config key of the same name.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[arg(long)]
    pub pivot_iso: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub pivot_tokens: Option<Vec<String>>,
    #[arg(long)]
    pub align_iterations: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    #[arg(long)]
    pub align_seed: Option<u64>,
    #[arg(long)]
    pub mds_dims: Option<usize>,
    #[arg(long)]
    pub krig_range: Option<f64>,
    #[arg(long)]
    pub krig_nugget: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub padding: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub gmm_seed: Option<u64>,
    #[arg(long)]
    pub core_k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// e.g. `TL=3,ML=2,BL=4`
    #[arg(long, value_delimiter = ',', value_parser = key_value)]
    pub cluster_groups: Option<Vec<(String, String)>>,
    /// e.g. `TL=MAT:8:14#0,ML=...,BL=...`
    #[arg(long, value_delimiter = ',', value_parser = key_value)]
    pub group_anchors: Option<Vec<(String, String)>>,
    #[arg(long)]
    pub heat_layer: bool,
    #[arg(long, value_delimiter = ',')]
    pub treebanks: Option<Vec<PathBuf>>,
    /// Edit-rule stopwords, e.g. `že,i`
    #[arg(long, value_delimiter = ',')]
    pub stopwords: Option<Vec<String>>,
    /// Edit-rule suffix markers, e.g. `-cu=DS,-ca=SS`
    #[arg(long, value_delimiter = ',', value_parser = key_value)]
    pub suffix_rules: Option<Vec<(String, String)>>,
    #[arg(long)]
    pub annotate_text: bool,
    #[arg(long)]
    pub mattr_window: Option<usize>,
    #[arg(long)]
    pub normalize_orthography: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut PipelineConfig) -> CliResult<()> {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(
            pivot_iso,
            pivot_tokens,
            align_iterations,
            min_count,
            align_seed,
            mds_dims,
            krig_nugget,
            grid,
            padding,
            levels,
            k_min,
            k_max,
            gmm_seed,
            core_k,
            alpha,
            treebanks,
            mattr_window,
            output_dir
        );
        if self.corpus_dir.is_some() {
            cfg.corpus_dir = self.corpus_dir;
        }
        if self.metadata.is_some() {
            cfg.metadata = self.metadata;
        }
        if self.krig_range.is_some() {
            cfg.krig_range = self.krig_range;
        }
        if let Some(pairs) = self.cluster_groups {
            cfg.cluster_groups = pairs
                .into_iter()
                .map(|(g, c)| {
                    c.parse().map(|c| (g, c)).map_err(|_| {
                        CliError::Config(format!("cluster index {c:?} is not a number"))
                    })
                })
                .collect::<CliResult<_>>()?;
        }
        if let Some(pairs) = self.group_anchors {
            cfg.group_anchors = pairs.into_iter().collect();
        }
        if let Some(s) = self.stopwords {
            cfg.edit_rules.stopwords = s.into_iter().collect();
        }
        if let Some(r) = self.suffix_rules {
            cfg.edit_rules.suffix_rules = r;
        }
        cfg.heat_layer |= self.heat_layer;
        cfg.annotate_text |= self.annotate_text;
        cfg.normalize_orthography |= self.normalize_orthography;
        Ok(())
    }
}
