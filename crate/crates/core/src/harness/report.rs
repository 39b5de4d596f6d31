//! Output files of an experiment.
//!
//! * `report.csv`: one row per (cell, trial), header [`REPORT_HEADER`].
//!   Columns that do not apply to a mechanism are left empty.
//! * `transcript_summary.csv`: communication per (cell, trial).
//! * `timing.csv`: wall time per (cell, trial). Kept apart from the report
//!   so that the report is byte-identical across re-runs.
//! * `manifest.json`: everything needed to re-run.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const REPORT_HEADER: &str =
    "mechanism,cell,trial,seed,n,p,epsilon,delta,k,h,d,t,gamma,error,objective,\
baseline_objective,excess_risk,max_query_error,mean_query_error,bits_per_player,reals_per_player,\
epsilon_spent,status,error_code,warnings";

pub const TRANSCRIPT_HEADER: &str =
    "mechanism,cell,trial,players,bits_per_player,reals_per_player,total_bits";

pub const TIMING_HEADER: &str = "cell,trial,wall_seconds";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReportRow {
    pub mechanism: String,
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub d: Option<usize>,
    pub t: Option<usize>,
    pub gamma: Option<f64>,
    /// Headline error of the mechanism: `|a - mean|` for averaging, excess
    /// risk for ERM, max query error for query release.
    pub error: Option<f64>,
    pub objective: Option<f64>,
    pub baseline_objective: Option<f64>,
    pub excess_risk: Option<f64>,
    pub max_query_error: Option<f64>,
    pub mean_query_error: Option<f64>,
    pub bits_per_player: Option<u64>,
    pub reals_per_player: Option<u64>,
    pub epsilon_spent: Option<f64>,
    pub status: String,
    pub error_code: String,
    pub warnings: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TranscriptRow {
    pub mechanism: String,
    pub cell: usize,
    pub trial: usize,
    pub players: usize,
    pub bits_per_player: u64,
    pub reals_per_player: u64,
    pub total_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub cell: usize,
    pub trial: usize,
    pub wall_seconds: f64,
}

fn write_rows<W: Write, T: Serialize>(out: W, header: &str, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(header.split(','))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    write_rows(out, REPORT_HEADER, rows)
}

pub fn write_transcript_summary_csv<W: Write>(out: W, rows: &[TranscriptRow]) -> Result<()> {
    write_rows(out, TRANSCRIPT_HEADER, rows)
}

pub fn write_timing_csv<W: Write>(out: W, rows: &[TimingRow]) -> Result<()> {
    write_rows(out, TIMING_HEADER, rows)
}

/// Run manifest. `config` is the fully resolved configuration, so loading it
/// back and running again reproduces `report.csv` byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub mechanism: String,
    pub master_seed: u64,
    pub cells: usize,
    pub trials: usize,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, cells: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            git_describe: git_describe(),
            mechanism: config.mechanism.map(|m| m.to_string()).unwrap_or_default(),
            master_seed: config.seed,
            cells,
            trials: config.trials,
            config: config.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

/// `git describe --always --dirty` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_headers() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{REPORT_HEADER}\n")
        );
        let mut buf = Vec::new();
        write_transcript_summary_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!("{TRANSCRIPT_HEADER}\n")
        );
    }

    #[test]
    fn row_width_matches_header() {
        let mut buf = Vec::new();
        let row = ReportRow {
            mechanism: "hinge".into(),
            status: "ok".into(),
            ..ReportRow::default()
        };
        write_report_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[1].split(',').count(),
            REPORT_HEADER.split(',').count()
        );
        assert!(lines[1].starts_with("hinge,0,0,0,0,0,,,"));
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_toml_str("mechanism = \"avg-bench\"\nseed = 3\n").unwrap();
        let m = Manifest::new(&cfg, 1);
        let path = dir.path().join("manifest.json");
        m.save(&path).unwrap();
        assert_eq!(Manifest::load(&path).unwrap(), m);
    }
}
