//! Weight-subnetwork experiments: the lemma ladder from single
//! coordinates to deep networks, measured as seeded success rates.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use subnet_core::net::{BinaryMask, MaskLayer, MaskedEvaluator};
use subnet_core::sample::{sample_random_net, sample_target_net, sample_two_layer_target};
use subnet_core::verify::{sup_error_on, DomainSampler, TrialOutcome};
use subnet_core::weight_prune::{
    prune_deep, prune_linear, prune_neuron, prune_scalar, prune_two_layer_target,
    PruneCertificate, ScalarSelection,
};
use subnet_core::{RngStream, TargetSpec};

use crate::config::ExperimentConfig;

use super::{finish, require_sampler, require_single_width, require_width_pair, ExperimentOutput};

const CERTIFICATE_SAMPLES: usize = 3;

#[derive(Serialize)]
struct WeightDetails<C: Serialize> {
    contract_epsilon: f64,
    active_weights_max: usize,
    active_weight_bound: usize,
    sample_certificates: Vec<C>,
}

#[derive(Serialize)]
struct DeepDetails {
    contract_epsilon: f64,
    active_weights_max: usize,
    active_weight_bound: usize,
    /// Max over successes and sampled points of drift / (i*eps/l).
    drift_max_ratio: f64,
    drift_violations: usize,
    sample_certificates: Vec<PruneCertificate>,
}

fn points_for(
    sampler: crate::config::SamplerConfig,
    dim: usize,
    stream: RngStream,
) -> Vec<Vec<f64>> {
    DomainSampler::new(sampler.mode, dim, sampler.count, stream).points()
}

pub fn one_coord(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap();
    let s = config.dims.s.unwrap();
    let k = require_single_width(config)?;
    let sampler = require_sampler(config)?;
    let eps = config.tolerances.epsilon;
    let contract = 2.0 * eps;

    struct Trial {
        outcome: TrialOutcome,
        selection: Option<ScalarSelection>,
    }
    let trials: Vec<Trial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let g = sample_random_net(&[d, k, 1], ts.derive(0)).expect("dims valid");
            let mut rng = ts.derive(1).rng();
            let bound = 1.0 / (s as f64).sqrt();
            let alpha = rng.random_range(-bound..=bound);
            let coord = rng.random_range(0..d);
            match prune_scalar(coord, alpha, g.layer(0), g.layer(1).row(0), eps) {
                Err(_) => Trial {
                    outcome: TrialOutcome::ConstructionFailed,
                    selection: None,
                },
                Ok(sel) => {
                    let points = points_for(sampler, d, ts.derive(2));
                    let (err, _) = sup_error_on(
                        &points,
                        |x| {
                            [sel.plus_index, sel.minus_index]
                                .into_iter()
                                .flatten()
                                .map(|j| {
                                    g.layer(1)[(0, j)]
                                        * (g.layer(0)[(j, coord)] * x[coord]).max(0.0)
                                })
                                .sum()
                        },
                        |x| alpha * x[coord],
                    );
                    Trial {
                        outcome: TrialOutcome::Built { measured_error: err },
                        selection: Some(sel),
                    }
                }
            }
        })
        .collect();

    let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.outcome).collect();
    let details = WeightDetails {
        contract_epsilon: contract,
        active_weights_max: trials
            .iter()
            .filter_map(|t| t.selection.as_ref().map(ScalarSelection::active_weights))
            .max()
            .unwrap_or(0),
        active_weight_bound: 2,
        sample_certificates: trials
            .iter()
            .filter_map(|t| t.selection.clone())
            .take(CERTIFICATE_SAMPLES)
            .collect(),
    };
    Ok(finish(outcomes, contract, serde_json::to_value(details)?))
}

struct BuiltTrial {
    outcome: TrialOutcome,
    active: usize,
    certificate: Option<PruneCertificate>,
}

fn weight_details_from(
    trials: &[BuiltTrial],
    contract: f64,
    bound: usize,
) -> anyhow::Result<serde_json::Value> {
    let details = WeightDetails {
        contract_epsilon: contract,
        active_weights_max: trials.iter().map(|t| t.active).max().unwrap_or(0),
        active_weight_bound: bound,
        sample_certificates: trials
            .iter()
            .filter_map(|t| t.certificate.clone())
            .take(CERTIFICATE_SAMPLES)
            .collect(),
    };
    Ok(serde_json::to_value(details)?)
}

pub fn linear(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap();
    let s = config.dims.s.unwrap();
    let k = require_single_width(config)?;
    let sampler = require_sampler(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);

    let trials: Vec<BuiltTrial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let g = sample_random_net(&[d, k, 1], ts.derive(0)).expect("dims valid");
            let mut rng = ts.derive(1).rng();
            let bound = 1.0 / (s as f64).sqrt();
            let mut w_star = vec![0.0; d];
            // s-sparse target vector on a random support.
            let mut support: Vec<usize> = (0..d).collect();
            for i in 0..s {
                let j = rng.random_range(i..d);
                support.swap(i, j);
            }
            for &c in support.iter().take(s) {
                w_star[c] = rng.random_range(-bound..=bound);
            }
            match prune_linear(&w_star, g.layer(0), g.layer(1).row(0), s, eps, delta) {
                Err(_) => BuiltTrial {
                    outcome: TrialOutcome::ConstructionFailed,
                    active: 0,
                    certificate: None,
                },
                Ok((mask, cert)) => {
                    let active = mask.active_count();
                    let full = BinaryMask::new(vec![mask, MaskLayer::ones(1, k)]);
                    let eval = MaskedEvaluator::new(&g, &full).expect("congruent");
                    let points = points_for(sampler, d, ts.derive(2));
                    let (err, _) = sup_error_on(
                        &points,
                        |x| eval.forward_scalar(x).expect("dims"),
                        |x| w_star.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
                    );
                    BuiltTrial {
                        outcome: TrialOutcome::Built { measured_error: err },
                        active,
                        certificate: Some(cert),
                    }
                }
            }
        })
        .collect();

    let outcomes = trials.iter().map(|t| t.outcome).collect();
    let details = weight_details_from(&trials, eps, 2 * s)?;
    Ok(finish(outcomes, eps, details))
}

pub fn neuron(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap();
    let s = config.dims.s.unwrap();
    let (k1, k2) = require_width_pair(config)?;
    let sampler = require_sampler(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);

    let trials: Vec<BuiltTrial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let g = sample_random_net(&[d, k1, k2, 1], ts.derive(0)).expect("dims valid");
            // Single-neuron target with the same admissibility as the
            // shallow experiment's rows.
            let target = sample_two_layer_target(d, 1, s, ts.derive(1)).expect("dims valid");
            let w_star = target.layer(0).row(0).to_vec();
            let v_star = target.layer(1)[(0, 0)];
            match prune_neuron(&w_star, v_star, &g, s, eps, delta) {
                Err(_) => BuiltTrial {
                    outcome: TrialOutcome::ConstructionFailed,
                    active: 0,
                    certificate: None,
                },
                Ok((mask, cert)) => {
                    let eval = MaskedEvaluator::new(&g, &mask).expect("congruent");
                    let points = points_for(sampler, d, ts.derive(2));
                    let (err, _) = sup_error_on(
                        &points,
                        |x| eval.forward_scalar(x).expect("dims"),
                        |x| target.forward_scalar(x).expect("dims"),
                    );
                    BuiltTrial {
                        outcome: TrialOutcome::Built { measured_error: err },
                        active: mask.active_count(),
                        certificate: Some(cert),
                    }
                }
            }
        })
        .collect();

    let outcomes = trials.iter().map(|t| t.outcome).collect();
    // First layer 2s, mixing row 2s, output pick 1.
    let details = weight_details_from(&trials, eps, 4 * s + 1)?;
    Ok(finish(outcomes, eps, details))
}

pub fn shallow(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap();
    let n = config.dims.n.unwrap();
    let s = config.dims.s.unwrap();
    let (k1, k2) = require_width_pair(config)?;
    let sampler = require_sampler(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);

    let trials: Vec<BuiltTrial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let target = sample_two_layer_target(d, n, s, ts.derive(0)).expect("dims valid");
            let g = sample_random_net(&[d, k1, k2, 1], ts.derive(1)).expect("dims valid");
            match prune_two_layer_target(&target, &g, s, eps, delta) {
                Err(_) => BuiltTrial {
                    outcome: TrialOutcome::ConstructionFailed,
                    active: 0,
                    certificate: None,
                },
                Ok((mask, cert)) => {
                    let eval = MaskedEvaluator::new(&g, &mask).expect("congruent");
                    let points = points_for(sampler, d, ts.derive(2));
                    let (err, _) = sup_error_on(
                        &points,
                        |x| eval.forward_scalar(x).expect("dims"),
                        |x| target.forward_scalar(x).expect("dims"),
                    );
                    BuiltTrial {
                        outcome: TrialOutcome::Built { measured_error: err },
                        active: mask.active_count(),
                        certificate: Some(cert),
                    }
                }
            }
        })
        .collect();

    let outcomes = trials.iter().map(|t| t.outcome).collect();
    let details = weight_details_from(&trials, eps, 4 * s * n + n)?;
    Ok(finish(outcomes, eps, details))
}

pub fn deep(config: &ExperimentConfig, stream: RngStream) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap();
    let n = config.dims.n.unwrap();
    let l = config.dims.l.unwrap();
    let s = config.dims.s.unwrap();
    let k = require_single_width(config)?;
    let sampler = require_sampler(config)?;
    let (eps, delta) = (config.tolerances.epsilon, config.tolerances.delta);

    struct DeepTrial {
        outcome: TrialOutcome,
        active: usize,
        certificate: Option<PruneCertificate>,
        drift_ratio: f64,
        drift_violation: bool,
    }

    let g_dims: Vec<usize> = {
        let mut dims = vec![d];
        for _ in 0..l - 1 {
            dims.push(k);
            dims.push(n);
        }
        dims.push(k);
        dims.push(1);
        dims
    };
    let spec = TargetSpec {
        input_dim: d,
        width: n,
        depth: l,
        sparsity: s,
    };

    let trials: Vec<DeepTrial> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let target = sample_target_net(&spec, ts.derive(0)).expect("spec valid");
            let g = sample_random_net(&g_dims, ts.derive(1)).expect("dims valid");
            match prune_deep(&target, &g, s, eps, delta) {
                Err(_) => DeepTrial {
                    outcome: TrialOutcome::ConstructionFailed,
                    active: 0,
                    certificate: None,
                    drift_ratio: 0.0,
                    drift_violation: false,
                },
                Ok((mask, cert)) => {
                    let eval = MaskedEvaluator::new(&g, &mask).expect("congruent");
                    let points = points_for(sampler, d, ts.derive(2));
                    // Taps after each stage pair (odd layer indices) except
                    // the final output, which the forward pass returns.
                    let taps: Vec<usize> = (0..l - 1).map(|i| 2 * i + 1).collect();
                    let mut worst = 0.0f64;
                    let mut drift_ratio = 0.0f64;
                    let mut violation = false;
                    for x in &points {
                        let f_trace = target.forward_trace(x).expect("dims");
                        let (out, stage_outputs) =
                            eval.forward_with_taps(x, &taps).expect("dims");
                        worst = worst.max((out[0] - f_trace[l - 1][0]).abs());
                        for (i, stage) in stage_outputs.iter().enumerate() {
                            let allowed = (i + 1) as f64 * eps / l as f64;
                            let drift: f64 = stage
                                .iter()
                                .zip(&f_trace[i])
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                                .sqrt();
                            drift_ratio = drift_ratio.max(drift / allowed);
                            violation |= drift > allowed + 1e-12;
                        }
                    }
                    DeepTrial {
                        outcome: TrialOutcome::Built { measured_error: worst },
                        active: mask.active_count(),
                        certificate: Some(cert),
                        drift_ratio,
                        drift_violation: violation,
                    }
                }
            }
        })
        .collect();

    let outcomes: Vec<TrialOutcome> = trials.iter().map(|t| t.outcome).collect();
    let details = DeepDetails {
        contract_epsilon: eps,
        active_weights_max: trials.iter().map(|t| t.active).max().unwrap_or(0),
        active_weight_bound: 4 * s * n * l + 2 * s,
        drift_max_ratio: trials.iter().map(|t| t.drift_ratio).fold(0.0, f64::max),
        drift_violations: trials.iter().filter(|t| t.drift_violation).count(),
        sample_certificates: trials
            .iter()
            .filter_map(|t| t.certificate.clone())
            .take(CERTIFICATE_SAMPLES)
            .collect(),
    };
    Ok(finish(outcomes, eps, serde_json::to_value(details)?))
}
