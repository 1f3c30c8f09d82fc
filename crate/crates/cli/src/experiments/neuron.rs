//! Neuron-subnetwork experiments: dataset interpolation and kernel-space
//! approximation at desk-scale widths, with the guarantee's width demands
//! reported alongside the measured rates.

use rayon::prelude::*;
use serde::Serialize;

use subnet_core::neuron_prune::{
    prune_finite_dataset_unchecked, prune_rkhs, FiniteDatasetOptions, RkhsOptions, RkhsTarget,
};
use subnet_core::verify::TrialOutcome;
use subnet_core::{Error, RngStream};

use crate::config::ExperimentConfig;
use crate::datasets::load_dataset;

use super::{finish, require_sampler, require_width_pair, ExperimentOutput};

#[derive(Serialize)]
struct FiniteDetails {
    contract_epsilon: f64,
    /// Fraction of trials with sign(g~(x_i)) = sign(y_i) for every i.
    sign_agreement_rate: f64,
    contract_rate: f64,
    construction_failures: usize,
    mean_keep_fraction: f64,
    mean_scale: f64,
    kernel_lambda_min_first: f64,
    coefficient_bound_first: f64,
    mask_window_first: f64,
    paper_width_k1: f64,
    paper_width_k2: f64,
    dataset_size: usize,
}

pub fn finite_dataset(
    config: &ExperimentConfig,
    stream: RngStream,
) -> anyhow::Result<ExperimentOutput> {
    let dataset = load_dataset(
        config.dataset.as_ref().expect("validated"),
        stream.derive(u64::MAX),
    )?;
    let (k1, k2) = require_width_pair(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);
    let options = FiniteDatasetOptions {
        kernel_mc_samples: config.mc_samples.expect("resolved"),
        ..Default::default()
    };

    struct Trial {
        outcome: TrialOutcome,
        sign_agreement: bool,
        keep_fraction: f64,
        scale: f64,
        diag: Option<subnet_core::neuron_prune::FiniteDatasetDiagnostics>,
    }
    let trials: Vec<Trial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            match prune_finite_dataset_unchecked(
                &dataset.points,
                &dataset.labels,
                k1,
                k2,
                eps,
                delta,
                stream.derive(t),
                &options,
            ) {
                Ok((_, diag)) => Trial {
                    outcome: TrialOutcome::Built {
                        measured_error: diag.measured_sup_error,
                    },
                    sign_agreement: diag.sign_agreement,
                    keep_fraction: diag.keep_fraction,
                    scale: diag.scale,
                    diag: Some(diag),
                },
                Err(Error::SingularGram { .. }) | Err(Error::ConstructionFailed(_)) => Trial {
                    outcome: TrialOutcome::ConstructionFailed,
                    sign_agreement: false,
                    keep_fraction: 0.0,
                    scale: 0.0,
                    diag: None,
                },
                Err(other) => panic!("unexpected pipeline error: {other}"),
            }
        })
        .collect();

    let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.outcome).collect();
    let built: Vec<&Trial> = trials.iter().filter(|t| t.diag.is_some()).collect();
    let first_diag = built.first().and_then(|t| t.diag);
    let nb = built.len().max(1) as f64;
    let details = FiniteDetails {
        contract_epsilon: eps,
        sign_agreement_rate: trials.iter().filter(|t| t.sign_agreement).count() as f64
            / trials.len().max(1) as f64,
        contract_rate: trials
            .iter()
            .filter(|t| matches!(t.outcome, TrialOutcome::Built { measured_error } if measured_error <= eps))
            .count() as f64
            / trials.len().max(1) as f64,
        construction_failures: trials.len() - built.len(),
        mean_keep_fraction: built.iter().map(|t| t.keep_fraction).sum::<f64>() / nb,
        mean_scale: built.iter().map(|t| t.scale).sum::<f64>() / nb,
        kernel_lambda_min_first: first_diag.map_or(f64::NAN, |d| d.kernel_lambda_min),
        coefficient_bound_first: first_diag.map_or(f64::NAN, |d| d.coefficient_bound),
        mask_window_first: first_diag.map_or(f64::NAN, |d| d.mask_window),
        paper_width_k1: first_diag.map_or(f64::NAN, |d| d.paper_width_k1),
        paper_width_k2: first_diag.map_or(f64::NAN, |d| d.paper_width_k2),
        dataset_size: dataset.len(),
    };
    Ok(finish(outcomes, eps, serde_json::to_value(details)?))
}

#[derive(Serialize)]
struct RkhsDetails {
    contract_epsilon: f64,
    mean_keep_fraction: f64,
    mask_window: f64,
    scale: f64,
    sup_sample_points: usize,
    quadrature_nodes: usize,
    paper_width_k2: f64,
}

pub fn rkhs(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let rkhs_config = config.rkhs.as_ref().expect("validated");
    let target = RkhsTarget {
        dim: rkhs_config.dim,
        h: rkhs_config.h,
        activation: subnet_core::neuron_prune::Activation::Relu,
    };
    let (k1, k2) = require_width_pair(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);
    let sampler = require_sampler(config)?;
    let options = RkhsOptions {
        sup_sample_points: sampler.count,
        quadrature_nodes: config.mc_samples.expect("resolved"),
    };

    let results: Vec<(TrialOutcome, f64, f64, f64, usize)> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let (_, diag) = prune_rkhs(&target, k1, k2, eps, delta, stream.derive(t), &options)
                .expect("rkhs pipeline has no probabilistic failure modes");
            (
                TrialOutcome::Built {
                    measured_error: diag.sampled_sup_error,
                },
                diag.keep_fraction,
                diag.scale,
                diag.paper_width_k2,
                diag.quadrature_nodes,
            )
        })
        .collect();

    let outcomes: Vec<TrialOutcome> = results.iter().map(|r| r.0).collect();
    let details = RkhsDetails {
        contract_epsilon: eps,
        mean_keep_fraction: results.iter().map(|r| r.1).sum::<f64>() / results.len().max(1) as f64,
        mask_window: eps / (8.0 * k1 as f64),
        scale: results.first().map_or(f64::NAN, |r| r.2),
        sup_sample_points: options.sup_sample_points,
        quadrature_nodes: results.first().map_or(0, |r| r.4),
        paper_width_k2: results.first().map_or(f64::NAN, |r| r.3),
    };
    Ok(finish(outcomes, eps, serde_json::to_value(details)?))
}
