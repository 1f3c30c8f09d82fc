//! Report files and aggregation.
//!
//! A run writes three files: `<name>.report.json` (the full deterministic
//! record: resolved config, per-trial outcomes, aggregate statistics,
//! experiment details), `<name>.summary.csv` (one flat row), and
//! `<name>.timing.json` (wall-clock sidecar; the one artifact allowed to
//! differ between reruns and worker counts).

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use subnet_core::verify::{wilson_interval, TrialOutcome, TrialReport};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// Fully resolved config: replaying it reproduces this report.
    pub config: ExperimentConfig,
    pub trial_report: TrialReport,
    pub outcomes: Vec<TrialOutcome>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingSidecar {
    pub wall_seconds: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunPaths {
    pub report: PathBuf,
    pub summary: PathBuf,
    pub timing: PathBuf,
}

pub fn run_basename(config: &ExperimentConfig) -> String {
    format!("{}-seed{}", config.experiment.as_str(), config.seed)
}

impl RunReport {
    pub fn to_json_bytes(&self) -> anyhow::Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "experiment,seed,{}\n{},{},{}\n",
            TrialReport::CSV_HEADER,
            self.config.experiment.as_str(),
            self.config.seed,
            self.trial_report.to_csv_row(),
        )
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading report {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed report {}", path.display()))
    }
}

pub fn write_run(
    report: &RunReport,
    out_dir: &Path,
    timing: &TimingSidecar,
) -> anyhow::Result<RunPaths> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let base = run_basename(&report.config);
    let paths = RunPaths {
        report: out_dir.join(format!("{base}.report.json")),
        summary: out_dir.join(format!("{base}.summary.csv")),
        timing: out_dir.join(format!("{base}.timing.json")),
    };
    std::fs::write(&paths.report, report.to_json_bytes()?)
        .with_context(|| format!("writing {}", paths.report.display()))?;
    std::fs::write(&paths.summary, report.summary_csv())
        .with_context(|| format!("writing {}", paths.summary.display()))?;
    let mut timing_bytes = serde_json::to_vec_pretty(timing)?;
    timing_bytes.push(b'\n');
    std::fs::write(&paths.timing, timing_bytes)
        .with_context(|| format!("writing {}", paths.timing.display()))?;
    Ok(paths)
}

/// One aggregated row: reports of the same experiment pool their trials.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub runs: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub error_median: Option<f64>,
    pub error_max: Option<f64>,
    pub active_weights_max: Option<u64>,
    pub active_weight_bound: Option<u64>,
    pub wall_seconds: Option<f64>,
}

pub const SUMMARY_HEADER: &str = "experiment,runs,trials,successes,success_rate,wilson_low,wilson_high,error_median,error_max,active_weights_max,active_weight_bound,wall_seconds";

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

impl SummaryRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.runs,
            self.trials,
            self.successes,
            self.success_rate,
            self.wilson_low,
            self.wilson_high,
            fmt_opt_f64(self.error_median),
            fmt_opt_f64(self.error_max),
            fmt_opt_u64(self.active_weights_max),
            fmt_opt_u64(self.active_weight_bound),
            fmt_opt_f64(self.wall_seconds),
        )
    }
}

fn timing_for(report_path: &Path) -> Option<TimingSidecar> {
    let name = report_path.file_name()?.to_str()?;
    let base = name.strip_suffix(".report.json")?;
    let sidecar = report_path.with_file_name(format!("{base}.timing.json"));
    let text = std::fs::read_to_string(sidecar).ok()?;
    serde_json::from_str(&text).ok()
}

/// Aggregate report files into one row per experiment id (pooled trials),
/// ordered by first appearance.
pub fn summarize(paths: &[PathBuf]) -> anyhow::Result<Vec<SummaryRow>> {
    struct Pool {
        experiment: String,
        runs: usize,
        successes: usize,
        trials: usize,
        errors: Vec<f64>,
        contract_epsilon: f64,
        active_max: Option<u64>,
        active_bound: Option<u64>,
        wall: Option<f64>,
    }
    let mut pools: Vec<Pool> = Vec::new();
    for path in paths {
        let report = RunReport::from_file(path)?;
        let name = report.config.experiment.as_str().to_string();
        let pool = match pools.iter_mut().find(|p| p.experiment == name) {
            Some(p) => p,
            None => {
                pools.push(Pool {
                    experiment: name,
                    runs: 0,
                    successes: 0,
                    trials: 0,
                    errors: Vec::new(),
                    contract_epsilon: report.trial_report.contract_epsilon,
                    active_max: None,
                    active_bound: None,
                    wall: None,
                });
                pools.last_mut().unwrap()
            }
        };
        pool.runs += 1;
        pool.trials += report.trial_report.trials;
        pool.successes += report.trial_report.successes;
        for outcome in &report.outcomes {
            if let TrialOutcome::Built { measured_error } = outcome {
                pool.errors.push(*measured_error);
            }
        }
        if let Some(v) = report.details.get("active_weights_max").and_then(Value::as_u64) {
            pool.active_max = Some(pool.active_max.unwrap_or(0).max(v));
        }
        if let Some(v) = report.details.get("active_weight_bound").and_then(Value::as_u64) {
            pool.active_bound = Some(v);
        }
        if let Some(t) = timing_for(path) {
            *pool.wall.get_or_insert(0.0) += t.wall_seconds;
        }
        let _ = pool.contract_epsilon;
    }

    Ok(pools
        .into_iter()
        .map(|mut pool| {
            pool.errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (wilson_low, wilson_high) = wilson_interval(pool.successes, pool.trials);
            SummaryRow {
                experiment: pool.experiment,
                runs: pool.runs,
                trials: pool.trials,
                successes: pool.successes,
                success_rate: if pool.trials == 0 {
                    0.0
                } else {
                    pool.successes as f64 / pool.trials as f64
                },
                wilson_low,
                wilson_high,
                error_median: if pool.errors.is_empty() {
                    None
                } else {
                    Some(pool.errors[(pool.errors.len() - 1) / 2])
                },
                error_max: pool.errors.last().copied(),
                active_weights_max: pool.active_max,
                active_weight_bound: pool.active_bound,
                wall_seconds: pool.wall,
            }
        })
        .collect())
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv());
        out.push('\n');
    }
    out
}

pub fn summary_to_markdown(rows: &[SummaryRow]) -> String {
    let headers: Vec<&str> = SUMMARY_HEADER.split(',').collect();
    let mut out = format!("| {} |\n", headers.join(" | "));
    out.push_str(&format!("|{}\n", "---|".repeat(headers.len())));
    for row in rows {
        out.push_str(&format!("| {} |\n", row.to_csv().replace(',', " | ")));
    }
    out
}
