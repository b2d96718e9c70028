//! Result files.
//!
//! A run directory holds:
//!
//! - `curve_<model>_<shift>_<feedback>.csv`, one per cell, with header
//!   `condition,model,shift,feedback,trial,mean_correct,sd_correct,n_agents`
//! - `summary.csv` with header
//!   `model,shift,feedback,jumpstart,pre_asymptote,final_asymptote`
//! - `manifest.json` (resolved config, seed, version, wall time)
//! - `config.toml`, the resolved config
//!
//! Floats are written as shortest round-trip decimals, so reading a file back
//! yields the exact in-memory values.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::env::{FeedbackKind, ShiftKind};
use crate::harness::{ConditionResult, ModelKind};
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub condition: String,
    pub model: ModelKind,
    pub shift: ShiftKind,
    pub feedback: FeedbackKind,
    pub trial: usize,
    pub mean_correct: f64,
    pub sd_correct: f64,
    pub n_agents: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: ModelKind,
    pub shift: ShiftKind,
    pub feedback: FeedbackKind,
    pub jumpstart: f64,
    pub pre_asymptote: f64,
    pub final_asymptote: f64,
}

impl From<&ConditionResult> for SummaryRow {
    fn from(r: &ConditionResult) -> Self {
        Self {
            model: r.model,
            shift: r.shift,
            feedback: r.feedback,
            jumpstart: r.jumpstart,
            pre_asymptote: r.pre_shift_asymptote,
            final_asymptote: r.final_asymptote,
        }
    }
}

/// Intra- versus extra-dimensional comparison for one model and regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: ModelKind,
    pub feedback: FeedbackKind,
    pub jumpstart_intra: Option<f64>,
    pub jumpstart_extra: Option<f64>,
    /// `jumpstart_intra - jumpstart_extra`.
    pub jumpstart_difference: Option<f64>,
    pub pre_asymptote_intra: Option<f64>,
    pub pre_asymptote_extra: Option<f64>,
    pub final_asymptote_intra: Option<f64>,
    pub final_asymptote_extra: Option<f64>,
}

pub fn curve_file_name(model: ModelKind, shift: ShiftKind, feedback: FeedbackKind) -> String {
    format!("curve_{model}_{shift}_{feedback}.csv")
}

pub fn curve_rows(result: &ConditionResult) -> Vec<CurveRow> {
    let condition = result.id();
    result
        .mean_correct
        .iter()
        .zip(&result.sd_correct)
        .enumerate()
        .map(|(i, (&m, &s))| CurveRow {
            condition: condition.clone(),
            model: result.model,
            shift: result.shift,
            feedback: result.feedback,
            trial: i + 1,
            mean_correct: m,
            sd_correct: s,
            n_agents: result.n_agents,
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Results {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |e: csv::Error| Error::Results {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Writes every curve file and the summary; returns the paths written.
pub fn write_tables(dir: &Path, results: &[ConditionResult]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(results.len() + 1);
    for r in results {
        let path = dir.join(curve_file_name(r.model, r.shift, r.feedback));
        write_csv(&path, &curve_rows(r))?;
        written.push(path);
    }
    let summary: Vec<SummaryRow> = results.iter().map(SummaryRow::from).collect();
    let path = dir.join(SUMMARY_FILE);
    write_csv(&path, &summary)?;
    written.push(path);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    n_agents: usize,
    conditions: Vec<String>,
    wall_time_secs: f64,
    config: &'a RunConfig,
}

/// Writes the tables, the manifest and the resolved config.
pub fn write_run(
    dir: &Path,
    config: &RunConfig,
    results: &[ConditionResult],
    wall_time: Duration,
) -> Result<Vec<PathBuf>> {
    let mut written = write_tables(dir, results)?;

    let manifest = Manifest {
        tool: "dimshift",
        version: env!("CARGO_PKG_VERSION"),
        master_seed: config.master_seed,
        n_agents: config.n_agents,
        conditions: results.iter().map(ConditionResult::id).collect(),
        wall_time_secs: wall_time.as_secs_f64(),
        config,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

pub fn read_summary(dir: &Path) -> Result<Vec<SummaryRow>> {
    if !dir.is_dir() {
        return Err(Error::Results {
            path: dir.display().to_string(),
            message: "not a results directory".into(),
        });
    }
    read_csv(&dir.join(SUMMARY_FILE))
}

pub fn read_curve(path: &Path) -> Result<Vec<CurveRow>> {
    read_csv(path)
}

/// One row per (model, feedback), in order of first appearance.
pub fn metrics_table(summary: &[SummaryRow]) -> Vec<MetricsRow> {
    let mut keys: Vec<(ModelKind, FeedbackKind)> = Vec::new();
    for s in summary {
        if !keys.contains(&(s.model, s.feedback)) {
            keys.push((s.model, s.feedback));
        }
    }
    keys.into_iter()
        .map(|(model, feedback)| {
            let find = |shift| {
                summary
                    .iter()
                    .find(|s| s.model == model && s.feedback == feedback && s.shift == shift)
            };
            let intra = find(ShiftKind::Intra);
            let extra = find(ShiftKind::Extra);
            MetricsRow {
                model,
                feedback,
                jumpstart_intra: intra.map(|s| s.jumpstart),
                jumpstart_extra: extra.map(|s| s.jumpstart),
                jumpstart_difference: intra.zip(extra).map(|(i, e)| i.jumpstart - e.jumpstart),
                pre_asymptote_intra: intra.map(|s| s.pre_asymptote),
                pre_asymptote_extra: extra.map(|s| s.pre_asymptote),
                final_asymptote_intra: intra.map(|s| s.final_asymptote),
                final_asymptote_extra: extra.map(|s| s.final_asymptote),
            }
        })
        .collect()
}

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::Results {
            path: "<stdout>".into(),
            message: e.to_string(),
        })?;
    }
    w.flush().map_err(|e| Error::io("<stdout>", e))
}

pub fn write_metrics_json<W: Write>(mut out: W, rows: &[MetricsRow]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Results {
        path: "<stdout>".into(),
        message: e.to_string(),
    })?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}
