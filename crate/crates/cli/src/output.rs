//! Output files: metrics CSVs, confusion matrices and the run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use memestream::engine::{EngineConfig, Snapshot};
use memestream::eval::WindowEvaluation;
use serde::{Deserialize, Serialize};

pub const SNAPSHOTS: &str = "snapshots.jsonl";
pub const METRICS: &str = "metrics.csv";
pub const MCR: &str = "mcr.csv";
pub const CONFUSION: &str = "confusion.jsonl";
pub const MANIFEST: &str = "manifest.json";

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<std::io::BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(std::io::BufReader::new(f))
}

pub struct SnapshotWriter {
    out: BufWriter<File>,
}

impl SnapshotWriter {
    pub fn create(dir: &Path) -> Result<Self> {
        Ok(Self {
            out: create(&dir.join(SNAPSHOTS))?,
        })
    }

    pub fn write(&mut self, s: &Snapshot) -> Result<()> {
        serde_json::to_writer(&mut self.out, s)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct MetricsRow {
    window_end: i64,
    lfk_nmi: f64,
    nmi: f64,
    n_clusters: usize,
    n_retired: usize,
    n_tweets: usize,
    cum_lfk_nmi: f64,
    cum_nmi: f64,
}

#[derive(Serialize)]
struct McrRow<'a> {
    window_end: i64,
    label: &'a str,
    mcr: f64,
    n_label_tweets: usize,
}

/// Per-window metrics, per-label MCR and confusion matrices. Files are
/// created on the first scored window.
pub struct MetricsWriter {
    dir: PathBuf,
    files: Option<(csv::Writer<File>, csv::Writer<File>, BufWriter<File>)>,
    cum_lfk: f64,
    cum_nmi: f64,
    pub scored: usize,
}

impl MetricsWriter {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: None,
            cum_lfk: 0.0,
            cum_nmi: 0.0,
            scored: 0,
        }
    }

    pub fn write(&mut self, e: &WindowEvaluation<f64>) -> Result<()> {
        if self.files.is_none() {
            let csv_at = |name: &str| -> Result<csv::Writer<File>> {
                let p = self.dir.join(name);
                csv::Writer::from_path(&p).with_context(|| format!("cannot create {}", p.display()))
            };
            self.files = Some((csv_at(METRICS)?, csv_at(MCR)?, create(&self.dir.join(CONFUSION))?));
        }
        let (metrics, mcr, confusion) = self.files.as_mut().expect("created above");
        self.cum_lfk += e.lfk_nmi;
        self.cum_nmi += e.nmi;
        self.scored += 1;
        metrics.serialize(MetricsRow {
            window_end: e.window_end,
            lfk_nmi: e.lfk_nmi,
            nmi: e.nmi,
            n_clusters: e.n_clusters,
            n_retired: e.n_retired,
            n_tweets: e.n_tweets,
            cum_lfk_nmi: self.cum_lfk,
            cum_nmi: self.cum_nmi,
        })?;
        for m in &e.mcr {
            mcr.serialize(McrRow {
                window_end: e.window_end,
                label: &m.label,
                mcr: m.mcr,
                n_label_tweets: m.n_label_tweets,
            })?;
        }
        serde_json::to_writer(&mut *confusion, &e.confusion)?;
        confusion.write_all(b"\n")?;
        Ok(())
    }

    /// Flushes and returns the names of the files written.
    pub fn finish(self) -> Result<Vec<String>> {
        let Some((mut metrics, mut mcr, mut confusion)) = self.files else {
            return Ok(Vec::new());
        };
        metrics.flush()?;
        mcr.flush()?;
        confusion.flush()?;
        Ok(vec![METRICS.into(), MCR.into(), CONFUSION.into()])
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: EngineConfig<f64>,
    pub rng_seed: u64,
    pub input: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub blind_labels: Option<PathBuf>,
    pub follower_graph: Option<PathBuf>,
    pub outputs: Vec<String>,
    /// Normalization used by the overlapping NMI.
    pub lfk_variant: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| crate::Usage(format!("invalid manifest {}: {e}", path.display())).into())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut out = create(&dir.join(MANIFEST))?;
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }
}
