use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use subnet_cli::config::ExperimentConfig;
use subnet_cli::{report, run_to_dir};

/// Experiment runner for subnetwork constructions in random ReLU networks.
#[derive(Parser)]
#[command(name = "subnet", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write report files.
    Run(RunArgs),
    /// Aggregate report files into a summary table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (overrides the config's `out`, defaults to `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for trial parallelism (default: all cores). The
    /// report content is identical for any value.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report files (<name>.report.json) to aggregate.
    paths: Vec<PathBuf>,
    /// Emit a markdown table instead of CSV.
    #[arg(long)]
    markdown: bool,
    /// Write the table to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        config.trials = trials;
    }
    if let Some(out) = args.out {
        config.out = Some(out);
    }
    let out_dir = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let (report, paths) = run_to_dir(&config, &out_dir, args.workers)?;
    eprintln!(
        "{}: {}/{} successes (rate {:.3}, wilson [{:.3}, {:.3}]) -> {}",
        report.config.experiment.as_str(),
        report.trial_report.successes,
        report.trial_report.trials,
        report.trial_report.success_rate,
        report.trial_report.wilson_low,
        report.trial_report.wilson_high,
        paths.report.display(),
    );
    Ok(())
}

fn aggregate(args: ReportArgs) -> anyhow::Result<()> {
    let rows = report::summarize(&args.paths)?;
    let table = if args.markdown {
        report::summary_to_markdown(&rows)
    } else {
        report::summary_to_csv(&rows)
    };
    match args.out {
        Some(path) => std::fs::write(&path, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Report(args) => aggregate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
