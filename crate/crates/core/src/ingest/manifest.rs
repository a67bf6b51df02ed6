use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dvfs_log::{read_dvfs_log, write_dvfs_log};
use super::em_file::{em_payload_path, read_em_trace, write_em_trace};
use crate::domain::{DvfsTrace, EmTrace, FrequencyTables};
use crate::error::{Error, Result};
use crate::sim::validate_label;

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "freqprint-corpus";
const VERSION: u32 = 1;

/// One capture in a corpus. Paths are relative to the corpus root and use `/`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub trace_id: usize,
    pub dvfs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub em: Option<String>,
}

/// Index of a corpus directory laid out as
/// `root/<label>/trace_NNN.cluster<c>.csv` plus optional
/// `root/<label>/trace_NNN.em.{hdr,bin}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    format: String,
    version: u32,
    pub tables: FrequencyTables,
    pub capture_duration_us: u64,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    root: PathBuf,
}

impl CorpusManifest {
    pub fn new(root: impl Into<PathBuf>, tables: FrequencyTables, capture_duration_us: u64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            tables,
            capture_duration_us,
            entries: Vec::new(),
            root: root.into(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Loads `root/manifest.json` and checks that every referenced file exists.
    pub fn load(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut manifest: CorpusManifest = serde_json::from_str(&text)?;
        if manifest.format != FORMAT {
            return Err(Error::Config(format!(
                "{} is not a corpus manifest",
                path.display()
            )));
        }
        if manifest.version != VERSION {
            return Err(Error::UnsupportedVersion {
                expected: VERSION,
                found: manifest.version,
            });
        }
        manifest.root = root.to_path_buf();
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entries {
            validate_label(&e.label)?;
            if !ids.insert((e.label.as_str(), e.trace_id)) {
                return Err(Error::Config(format!(
                    "duplicate trace id {} for `{}`",
                    e.trace_id, e.label
                )));
            }
            if e.dvfs.len() != self.tables.n_clusters() {
                return Err(Error::Config(format!(
                    "`{}` trace {} lists {} cluster logs for {} clusters",
                    e.label,
                    e.trace_id,
                    e.dvfs.len(),
                    self.tables.n_clusters()
                )));
            }
            for rel in e.dvfs.iter().chain(&e.em) {
                let p = self.root.join(rel);
                if !p.is_file() {
                    return Err(Error::io(
                        p,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file is missing"),
                    ));
                }
            }
            if let Some(em) = &e.em {
                let bin = em_payload_path(&self.root.join(em));
                if !bin.is_file() {
                    return Err(Error::io(
                        bin,
                        std::io::Error::new(std::io::ErrorKind::NotFound, "EM payload is missing"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let path = self.root.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Labels present in the corpus, sorted.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.label.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Writes one capture in the standard layout and records it.
    pub fn write_trace(&mut self, trace_id: usize, dvfs: &DvfsTrace, em: Option<&EmTrace>) -> Result<()> {
        let label = dvfs
            .label
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("corpus traces must be labelled".into()))?;
        validate_label(label)?;
        dvfs.validate(&self.tables)?;
        let dir = self.root.join(label);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

        let mut logs = Vec::with_capacity(dvfs.clusters.len());
        for (c, samples) in dvfs.clusters.iter().enumerate() {
            let rel = format!("{label}/trace_{trace_id:03}.cluster{c}.csv");
            write_dvfs_log(samples, &self.root.join(&rel))?;
            logs.push(rel);
        }
        let em_rel = match em {
            Some(em) => {
                let rel = format!("{label}/trace_{trace_id:03}.em.hdr");
                write_em_trace(em, &self.root.join(&rel))?;
                Some(rel)
            }
            None => None,
        };
        self.entries.push(ManifestEntry {
            label: label.to_owned(),
            trace_id,
            dvfs: logs,
            em: em_rel,
        });
        Ok(())
    }

    pub fn read_dvfs(&self, entry: &ManifestEntry) -> Result<DvfsTrace> {
        let clusters = entry
            .dvfs
            .iter()
            .zip(self.tables.iter())
            .map(|(rel, table)| read_dvfs_log(&self.root.join(rel), table))
            .collect::<Result<Vec<_>>>()?;
        DvfsTrace::new(
            Some(entry.label.clone()),
            clusters,
            self.capture_duration_us,
            &self.tables,
        )
    }

    pub fn read_em(&self, entry: &ManifestEntry) -> Result<EmTrace> {
        let rel = entry.em.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "`{}` trace {} has no EM capture",
                entry.label, entry.trace_id
            ))
        })?;
        let mut em = read_em_trace(&self.root.join(rel))?;
        if em.label.as_deref() != Some(entry.label.as_str()) {
            return Err(Error::HeaderMismatch(format!(
                "EM header label {:?} differs from manifest label `{}`",
                em.label, entry.label
            )));
        }
        em.label = Some(entry.label.clone());
        Ok(em)
    }
}
