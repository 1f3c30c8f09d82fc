//! Brute-force oracle experiment: on planted tiny instances the exhaustive
//! best mask can only improve on the constructive one, and the
//! constructive error stays within its bound.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use subnet_core::verify::{brute_force_mask, sup_error_on, DomainSampler, TrialOutcome};
use subnet_core::weight_prune::prune_scalar;
use subnet_core::{DenseNetwork, Matrix, RngStream};

use crate::config::ExperimentConfig;

use super::{finish, require_sampler, require_single_width, ExperimentOutput};

#[derive(Serialize)]
struct OracleDetails {
    contract_epsilon: f64,
    instances: usize,
    oracle_never_worse: bool,
    max_constructive_error: f64,
    /// Largest constructive - oracle gap observed (always >= 0).
    max_gap: f64,
}

pub fn planted_instances(
    config: &ExperimentConfig,
    stream: RngStream,
) -> anyhow::Result<ExperimentOutput> {
    let d = config.dims.d.unwrap_or(2);
    let k = require_single_width(config)?;
    let sampler = require_sampler(config)?;
    let eps = config.tolerances.epsilon;
    let contract = 2.0 * eps;

    struct Instance {
        outcome: TrialOutcome,
        oracle_le_constructive: bool,
        gap: f64,
    }
    let instances: Vec<Instance> = (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let ts = stream.derive(t);
            let mut rng = ts.derive(0).rng();
            let coord = rng.random_range(0..d);
            let alpha = rng.random_range(0.2..0.5);
            let mut w = Matrix::zeros(k, d);
            let mut u = vec![0.0; k];
            for j in 0..k {
                for c in 0..d {
                    w[(j, c)] = rng.random_range(-0.1..0.1);
                }
                u[j] = rng.random_range(-0.2..0.2);
            }
            // Plant an admissible candidate pair on distinct rows.
            let plus_row = rng.random_range(0..k);
            let minus_row = (plus_row + 1 + rng.random_range(0..k - 1)) % k;
            w[(plus_row, coord)] = alpha + rng.random_range(-eps..eps);
            u[plus_row] = 1.0 - rng.random_range(0.0..eps);
            w[(minus_row, coord)] = -alpha + rng.random_range(-eps..eps);
            u[minus_row] = -1.0 + rng.random_range(0.0..eps);

            let selection = prune_scalar(coord, alpha, &w, &u, eps).expect("planted pair exists");
            let points =
                DomainSampler::new(sampler.mode, d, sampler.count, ts.derive(1)).points();
            let (constructive, _) = sup_error_on(
                &points,
                |x| {
                    [selection.plus_index, selection.minus_index]
                        .into_iter()
                        .flatten()
                        .map(|j| u[j] * (w[(j, coord)] * x[coord]).max(0.0))
                        .sum()
                },
                |x| alpha * x[coord],
            );
            let net = DenseNetwork::new(vec![
                w.clone(),
                Matrix::from_vec(1, k, u.clone()).expect("length"),
            ])
            .expect("chain");
            let (_, oracle) =
                brute_force_mask(&net, |x| alpha * x[coord], &points).expect("within budget");
            Instance {
                outcome: TrialOutcome::Built {
                    measured_error: constructive,
                },
                oracle_le_constructive: oracle <= constructive + 1e-12,
                gap: constructive - oracle,
            }
        })
        .collect();

    let outcomes: Vec<TrialOutcome> = instances.iter().map(|i| i.outcome).collect();
    let details = OracleDetails {
        contract_epsilon: contract,
        instances: instances.len(),
        oracle_never_worse: instances.iter().all(|i| i.oracle_le_constructive),
        max_constructive_error: instances
            .iter()
            .map(|i| match i.outcome {
                TrialOutcome::Built { measured_error } => measured_error,
                TrialOutcome::ConstructionFailed => 0.0,
            })
            .fold(0.0, f64::max),
        max_gap: instances.iter().map(|i| i.gap).fold(0.0, f64::max),
    };
    Ok(finish(outcomes, contract, serde_json::to_value(details)?))
}
