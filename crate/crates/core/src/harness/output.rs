use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, PolicyKind};
use super::run::{mean_sd, ExperimentResult, Failure, ResultRow, TunedAlpha};
use crate::error::{Error, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Exact column order of the results table.
pub const RESULTS_HEADER: [&str; 11] = [
    "policy",
    "rep",
    "trial",
    "cum_regret",
    "inst_regret",
    "cum_regret_realized",
    "uploads",
    "downloads",
    "scalars_sent",
    "selected_count",
    "als_nonconverged",
];

/// One row per policy: final cumulative regret over successful reps and
/// mean lifetime communication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    pub reps_ok: usize,
    pub reps_failed: usize,
    pub mean_cum_regret: f64,
    pub sd_cum_regret: f64,
    pub mean_uploads: f64,
    pub mean_downloads: f64,
    pub mean_scalars_sent: f64,
}

/// Run manifest: what was run, from which source revision, and when.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub budget: usize,
    pub seeds: Vec<u64>,
    pub tuned: Vec<TunedAlpha>,
    pub git_describe: String,
    pub started_unix: f64,
    pub elapsed_secs: f64,
    pub crate_version: String,
    pub failures: Vec<Failure>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes rows under the exact results header (header only when empty).
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(RESULTS_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a results table back, checking the header.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if let Some(missing) = RESULTS_HEADER.iter().find(|c| !header.iter().any(|h| h == **c)) {
        return Err(Error::MissingColumn {
            path: path.to_path_buf(),
            column: (*missing).to_owned(),
        });
    }
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn summarize(result: &ExperimentResult) -> Vec<SummaryRow> {
    let mut kinds: Vec<PolicyKind> = result.config.policy.clone();
    kinds.dedup();
    kinds
        .into_iter()
        .map(|kind| {
            let ok: Vec<_> = result
                .reps
                .iter()
                .filter(|r| r.policy == kind && r.failure.is_none())
                .collect();
            let failed = result
                .reps
                .iter()
                .filter(|r| r.policy == kind && r.failure.is_some())
                .count();
            let (mean, sd) = mean_sd(&ok.iter().map(|r| r.final_regret).collect::<Vec<_>>());
            let avg = |f: &dyn Fn(&super::run::RepResult) -> u64| {
                mean_sd(&ok.iter().map(|r| f(r) as f64).collect::<Vec<_>>()).0
            };
            SummaryRow {
                policy: kind.to_string(),
                reps_ok: ok.len(),
                reps_failed: failed,
                mean_cum_regret: mean,
                sd_cum_regret: sd,
                mean_uploads: avg(&|r| r.totals.uploads),
                mean_downloads: avg(&|r| r.totals.downloads),
                mean_scalars_sent: avg(&|r| r.totals.scalars),
            }
        })
        .collect()
}

fn write_serialized<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `git describe` of the working directory, or `unknown` outside a repository.
pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_owned())
}

pub fn manifest(result: &ExperimentResult) -> Manifest {
    Manifest {
        config: result.config.clone(),
        budget: result.budget,
        seeds: result.seeds.clone(),
        tuned: result.tuned.clone(),
        git_describe: git_describe(),
        started_unix: result.started_unix,
        elapsed_secs: result.elapsed_secs,
        crate_version: env!("CARGO_PKG_VERSION").to_owned(),
        failures: result.failures().into_iter().cloned().collect(),
    }
}

/// Writes the results table, per-policy summary, failure list and manifest
/// into `dir`; returns the paths written.
pub fn emit_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows: Vec<ResultRow> = result.reps.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    let results = dir.join(RESULTS_FILE);
    write_results_csv(&results, &rows)?;

    let summary = dir.join(SUMMARY_FILE);
    write_serialized(
        &summary,
        &summarize(result),
        &[
            "policy",
            "reps_ok",
            "reps_failed",
            "mean_cum_regret",
            "sd_cum_regret",
            "mean_uploads",
            "mean_downloads",
            "mean_scalars_sent",
        ],
    )?;

    let failures = dir.join(FAILURES_FILE);
    let failed: Vec<Failure> = result.failures().into_iter().cloned().collect();
    write_serialized(&failures, &failed, &["policy", "rep", "trial", "error"])?;

    let manifest_path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest(result)).map_err(|e| Error::Json {
        path: manifest_path.clone(),
        source: e,
    })?;
    std::fs::write(&manifest_path, text + "\n").map_err(|e| Error::io(&manifest_path, e))?;
    Ok(vec![results, summary, failures, manifest_path])
}
