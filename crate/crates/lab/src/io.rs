//! CSV result rows, debug dumps and run manifests.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use anderson_core::PathSample;
use anyhow::Context;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One moment estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub run_id: String,
    pub variant: String,
    pub kernel: String,
    #[serde(rename = "H")]
    pub h: f64,
    pub alpha: f64,
    pub n: usize,
    pub t: f64,
    /// Coordinates joined by `;`.
    pub x: String,
    #[serde(rename = "K")]
    pub steps: usize,
    pub samples: u64,
    pub seed: u64,
    pub log_moment: f64,
    pub stderr_log: f64,
    pub wall_time_s: f64,
}

/// One event frequency against its floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub event: String,
    pub t: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub x_j: f64,
    pub eps: f64,
    pub r: Option<f64>,
    #[serde(rename = "K")]
    pub steps: usize,
    pub samples: u64,
    pub p_hat: f64,
    pub stderr: f64,
    pub paper_floor: Option<f64>,
    pub pass: bool,
}

/// One realization of the solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRow {
    pub run_id: String,
    pub t: f64,
    pub x: f64,
    #[serde(rename = "K")]
    pub steps: usize,
    pub draw: u64,
    pub value: f64,
    pub log_value: f64,
    pub out_of_range: u64,
}

pub fn join_point(x: &[f64]) -> String {
    x.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_rows<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows: Result<Vec<T>, _> = rdr.deserialize().collect();
    rows.with_context(|| format!("parsing {}", path.display()))
}

/// Writes `(sample, coord, time, value)` for every grid node of every path.
pub fn write_path_dump(path: &Path, paths: &[(u64, &PathSample)]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample", "coord", "time", "value"])?;
    for (s, p) in paths {
        let g = p.grid();
        for k in 0..=g.steps() {
            for j in 0..p.dim() {
                w.serialize((s, j, g.time(k), p.coord(k, j)))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `(sample, i, j, value)` for row-major `n × n` Gram matrices.
pub fn write_gram_dump(path: &Path, grams: &[(u64, Vec<f64>)], n: usize) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample", "i", "j", "value"])?;
    for (s, g) in grams {
        for i in 0..n {
            for j in 0..n {
                w.serialize((s, i, j, g[i * n + j]))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub anderson_core: String,
    pub anderson_lab: String,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            anderson_core: anderson_core::VERSION.to_string(),
            anderson_lab: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub subcommand: String,
    /// SHA-256 over every config field.
    pub config_digest: String,
    pub config: ExperimentConfig,
    pub versions: Versions,
    pub threads: usize,
    pub wall_time_s: f64,
    pub outputs: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    pub success: bool,
}

impl Manifest {
    /// Writes `<output>/<run_id>.manifest.json` and returns its path.
    pub fn write(&self) -> anyhow::Result<PathBuf> {
        let dir = &self.config.output;
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.manifest.json", self.run_id));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize) -> MomentRow {
        MomentRow {
            run_id: "ab".into(),
            variant: "skorohod".into(),
            kernel: "constant:1".into(),
            h: 0.25,
            alpha: 1.0,
            n,
            t: 1.0,
            x: join_point(&[0.0, 0.5]),
            steps: 64,
            samples: 1,
            seed: 1,
            log_moment: 0.1 + 0.2,
            stderr_log: 0.0,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn append_writes_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/m.csv");
        append_rows(&p, &[row(2)]).unwrap();
        append_rows(&p, &[row(3), row(4)]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("run_id,variant,kernel,H,alpha,n,t,x,K,samples,seed,log_moment,stderr_log,wall_time_s\n"));
        let back: Vec<MomentRow> = read_rows(&p).unwrap();
        assert_eq!(back, vec![row(2), row(3), row(4)]);
    }

    #[test]
    fn event_header_and_empty_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let r = EventRow {
            event: "G_direct".into(),
            t: 1.0,
            m: 4.0,
            x_j: 0.5,
            eps: 0.25,
            r: None,
            steps: 512,
            samples: 10,
            p_hat: 0.0,
            stderr: 0.1,
            paper_floor: None,
            pass: true,
        };
        append_rows(&p, std::slice::from_ref(&r)).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "event,t,M,x_j,eps,r,K,samples,p_hat,stderr,paper_floor,pass");
        assert_eq!(read_rows::<EventRow>(&p).unwrap(), vec![r]);
    }
}
