//! Artifact writing: atomic file replacement and the hash manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{hex, PipelineConfig};
use crate::error::{CliError, CliResult};

/// Provenance echoed at the top of every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub command: String,
    pub config_sha256: String,
    pub align_seed: u64,
    pub gmm_seed: u64,
}

impl RunHeader {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        RunHeader {
            tool: format!("semmap {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            config_sha256: cfg.hash(),
            align_seed: cfg.align_seed,
            gmm_seed: cfg.gmm_seed,
        }
    }

    /// Header lines without comment markers; writers prefix them.
    pub fn text(&self) -> String {
        format!(
            "{} {}\nconfig-sha256 {}\nseed align={} gmm={}",
            self.tool, self.command, self.config_sha256, self.align_seed, self.gmm_seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub header: RunHeader,
    /// Stage facts worth checking without opening artifacts.
    pub summary: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
}

/// An output directory that records what was written into it. Safe to share
/// across worker threads.
pub struct OutputDir {
    root: PathBuf,
    written: Mutex<BTreeMap<String, Artifact>>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rel` through a temporary sibling and a rename, so readers
    /// never see a partial file.
    pub fn write(&self, rel: &str, contents: &[u8]) -> CliResult<Artifact> {
        let path = self.root.join(rel);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let dir = path.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir).map_err(io)?;
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("artifact");
        let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(contents)?;
            f.sync_all()?;
            fs::rename(&tmp, &path)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(io(e));
        }
        let art = Artifact {
            path: rel.to_string(),
            sha256: hex(&Sha256::digest(contents)),
            bytes: contents.len(),
        };
        self.written
            .lock()
            .expect("artifact log")
            .insert(rel.to_string(), art.clone());
        Ok(art)
    }

    pub fn artifacts(&self) -> Vec<Artifact> {
        self.written
            .lock()
            .expect("artifact log")
            .values()
            .cloned()
            .collect()
    }

    /// Writes `name` listing every artifact so far, sorted by path.
    pub fn write_manifest(
        &self,
        name: &str,
        header: &RunHeader,
        summary: BTreeMap<String, String>,
    ) -> CliResult<Manifest> {
        let manifest = Manifest {
            header: header.clone(),
            summary,
            artifacts: self.artifacts(),
        };
        let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        json.push('\n');
        self.write(name, json.as_bytes())?;
        Ok(manifest)
    }
}

pub fn read_manifest(path: &Path) -> CliResult<Manifest> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_are_hashed_and_leave_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        let a = out.write("sub/x.tsv", b"abc").unwrap();
        assert_eq!(
            a.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        out.write("sub/x.tsv", b"abcd").unwrap();
        let names: Vec<_> = fs::read_dir(dir.path().join("sub"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.tsv")]);
        assert_eq!(fs::read(dir.path().join("sub/x.tsv")).unwrap(), b"abcd");
        assert_eq!(out.artifacts().len(), 1);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutputDir::create(dir.path()).unwrap();
        out.write("b.tsv", b"1").unwrap();
        out.write("a.tsv", b"2").unwrap();
        let h = RunHeader::new("run", &PipelineConfig::default());
        let m = out
            .write_manifest("manifest.json", &h, BTreeMap::new())
            .unwrap();
        assert_eq!(
            m.artifacts
                .iter()
                .map(|a| a.path.as_str())
                .collect::<Vec<_>>(),
            ["a.tsv", "b.tsv"]
        );
        assert_eq!(read_manifest(&dir.path().join("manifest.json")).unwrap(), m);
    }
}
