//! The experiment catalog: each runner executes the configured number of
//! seeded trials and produces a [`TrialReport`] plus experiment-specific
//! details for the report file.

mod kernel;
mod neuron;
mod oracle;
mod weight;

use anyhow::bail;
use serde_json::Value;

use subnet_core::verify::{summarize_trials, TrialOutcome, TrialReport};
use subnet_core::RngStream;

use crate::config::{ExperimentConfig, ExperimentId};

pub struct ExperimentOutput {
    pub trial_report: TrialReport,
    pub outcomes: Vec<TrialOutcome>,
    pub details: Value,
}

pub(crate) fn finish(
    outcomes: Vec<TrialOutcome>,
    contract_epsilon: f64,
    details: Value,
) -> ExperimentOutput {
    let trial_report = summarize_trials(&outcomes, contract_epsilon);
    ExperimentOutput {
        trial_report,
        outcomes,
        details,
    }
}

/// Run a resolved config. The master seed fans out one stream per trial;
/// everything downstream is deterministic in (config, seed) regardless of
/// worker count.
pub fn run(config: &ExperimentConfig) -> anyhow::Result<ExperimentOutput> {
    let stream = RngStream::new(config.seed);
    match config.experiment {
        ExperimentId::LemmaOneCoord => weight::one_coord(config, stream),
        ExperimentId::LemmaLinear => weight::linear(config, stream),
        ExperimentId::LemmaNeuron => weight::neuron(config, stream),
        ExperimentId::Thm2Shallow => weight::shallow(config, stream),
        ExperimentId::Thm1Deep => weight::deep(config, stream),
        ExperimentId::FiniteDataset => neuron::finite_dataset(config, stream),
        ExperimentId::Rkhs => neuron::rkhs(config, stream),
        ExperimentId::KernelEigen => kernel::eigen_lemma(config, stream),
        ExperimentId::BruteForceOracle => oracle::planted_instances(config, stream),
    }
}

pub(crate) fn require_single_width(config: &ExperimentConfig) -> anyhow::Result<usize> {
    match config.widths {
        crate::config::WidthsSpec::Single { k } => Ok(k),
        _ => bail!("experiment {} needs a resolved single width", config.experiment.as_str()),
    }
}

pub(crate) fn require_width_pair(config: &ExperimentConfig) -> anyhow::Result<(usize, usize)> {
    match config.widths {
        crate::config::WidthsSpec::Pair { k1, k2 } => Ok((k1, k2)),
        _ => bail!("experiment {} needs a resolved width pair", config.experiment.as_str()),
    }
}

pub(crate) fn require_sampler(
    config: &ExperimentConfig,
) -> anyhow::Result<crate::config::SamplerConfig> {
    config
        .sampler
        .ok_or_else(|| anyhow::anyhow!("sampler not resolved; call ExperimentConfig::resolve"))
}
