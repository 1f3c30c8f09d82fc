//! Library surface of the experiment runner, so integration tests can run
//! experiments in-process (and pin worker counts) without spawning the
//! binary.

pub mod config;
pub mod datasets;
pub mod experiments;
pub mod report;

use std::path::Path;

use config::ExperimentConfig;
use report::{RunPaths, RunReport, TimingSidecar};

/// Resolve a config, run it on a dedicated pool of `workers` threads
/// (or the global pool when `None`), and write the three output files.
pub fn run_to_dir(
    config: &ExperimentConfig,
    out_dir: &Path,
    workers: Option<usize>,
) -> anyhow::Result<(RunReport, RunPaths)> {
    let mut resolved = config.resolve()?;
    // The report embeds the resolved config for replayability; the output
    // location is not part of the experiment, and dropping it keeps
    // reports byte-identical wherever they are written.
    resolved.out = None;
    let started = std::time::Instant::now();
    let output = match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| anyhow::anyhow!("building worker pool: {e}"))?;
            pool.install(|| experiments::run(&resolved))?
        }
        None => experiments::run(&resolved)?,
    };
    let report = RunReport {
        config: resolved,
        trial_report: output.trial_report,
        outcomes: output.outcomes,
        details: output.details,
    };
    let timing = TimingSidecar {
        wall_seconds: started.elapsed().as_secs_f64(),
        workers: workers.unwrap_or_else(rayon::current_num_threads),
    };
    let paths = report::write_run(&report, out_dir, &timing)?;
    Ok((report, paths))
}
