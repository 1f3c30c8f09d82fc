//! Measurement layer: sampled sup-norm estimation, seeded success-rate
//! trials with Wilson intervals, and a brute-force mask oracle for tiny
//! instances.
//!
//! Sup norms are reported as sampled lower bounds (deterministic extreme
//! points plus random fills), not certified global optima; the acceptance
//! tolerances are chosen so this is enough.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::norm2;
use crate::net::{apply_mask, BinaryMask, DenseNetwork};
use crate::rng::RngStream;

/// Domain to sample sup norms over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Euclidean unit ball.
    L2Ball,
    /// Unit cube under the max norm.
    LinfCube,
}

/// Deterministic-plus-random point set over the chosen domain.
///
/// The deterministic prefix holds the 2d signed axis points and up to 2^10
/// sign-pattern corners (scaled onto the sphere for the ball domain);
/// random fills follow, uniform over the domain.
#[derive(Debug, Clone)]
pub struct DomainSampler {
    pub domain: Domain,
    pub dim: usize,
    pub random_points: usize,
    pub stream: RngStream,
}

const MAX_CORNERS: usize = 1 << 10;

impl DomainSampler {
    pub fn new(domain: Domain, dim: usize, random_points: usize, stream: RngStream) -> Self {
        DomainSampler {
            domain,
            dim,
            random_points,
            stream,
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut pts = Vec::with_capacity(2 * d + MAX_CORNERS.min(1 << d) + self.random_points);
        for i in 0..d {
            for sign in [1.0, -1.0] {
                let mut x = vec![0.0; d];
                x[i] = sign;
                pts.push(x);
            }
        }
        let corner_scale = match self.domain {
            Domain::LinfCube => 1.0,
            Domain::L2Ball => 1.0 / (d as f64).sqrt(),
        };
        let corners = if d < 20 { (1usize << d).min(MAX_CORNERS) } else { MAX_CORNERS };
        for pattern in 0..corners {
            let x: Vec<f64> = (0..d)
                .map(|i| {
                    if pattern >> i & 1 == 1 {
                        -corner_scale
                    } else {
                        corner_scale
                    }
                })
                .collect();
            pts.push(x);
        }
        let mut rng = self.stream.rng();
        use rand::Rng;
        for _ in 0..self.random_points {
            let x = match self.domain {
                Domain::LinfCube => (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                Domain::L2Ball => {
                    // Uniform in the ball: gaussian direction, radius ~ U^(1/d).
                    let mut x: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
                    let n = norm2(&x);
                    let r: f64 = rng.random_range(0.0..1.0f64).powf(1.0 / d as f64);
                    if n > 0.0 {
                        x.iter_mut().for_each(|v| *v *= r / n);
                    }
                    x
                }
            };
            pts.push(x);
        }
        pts
    }
}

/// Marsaglia polar method; avoids pulling in a distributions crate for one
/// gaussian.
fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Sampled sup of |f - g| over the sampler's point set, with the argmax
/// point. A lower bound on the true sup.
pub fn sup_error<F, G>(f: F, g: G, sampler: &DomainSampler) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    sup_error_on(&sampler.points(), f, g)
}

/// Same estimator over an explicit point set.
pub fn sup_error_on<F, G>(points: &[Vec<f64>], f: F, g: G) -> (f64, Vec<f64>)
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let mut best = 0.0f64;
    let mut arg = points.first().cloned().unwrap_or_default();
    for x in points {
        let gap = (f(x) - g(x)).abs();
        if gap > best {
            best = gap;
            arg = x.clone();
        }
    }
    (best, arg)
}

/// Outcome of one seeded construction trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TrialOutcome {
    /// Construction produced a mask; carries the measured error.
    Built { measured_error: f64 },
    /// Candidate search failed (the probability-delta event).
    ConstructionFailed,
}

/// Aggregated trial statistics with a Wilson 95% interval on the success
/// rate. A trial succeeds iff construction succeeded and its measured
/// error is within the contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: usize,
    pub construction_failures: usize,
    pub contract_misses: usize,
    pub successes: usize,
    pub contract_epsilon: f64,
    pub success_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Quantiles of measured error over built trials (None if none built).
    pub error_median: Option<f64>,
    pub error_p95: Option<f64>,
    pub error_max: Option<f64>,
}

impl TrialReport {
    pub const CSV_HEADER: &'static str = "trials,construction_failures,contract_misses,successes,contract_epsilon,success_rate,wilson_low,wilson_high,error_median,error_p95,error_max";

    pub fn to_csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.trials,
            self.construction_failures,
            self.contract_misses,
            self.successes,
            self.contract_epsilon,
            self.success_rate,
            self.wilson_low,
            self.wilson_high,
            opt(self.error_median),
            opt(self.error_p95),
            opt(self.error_max),
        )
    }
}

/// Wilson score interval at 95% for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (
        ((center - spread) / denom).max(0.0),
        ((center + spread) / denom).min(1.0),
    )
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    Some(sorted[idx])
}

/// Run `trials` independent seeded trials of `experiment` in parallel.
///
/// Trial t receives `stream.derive(t)`; results are collected by index, so
/// the report is identical for any worker count and any execution order.
pub fn success_rate<F>(experiment: F, trials: usize, contract_epsilon: f64, stream: RngStream) -> TrialReport
where
    F: Fn(RngStream) -> TrialOutcome + Sync,
{
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .into_par_iter()
        .map(|t| experiment(stream.derive(t)))
        .collect();
    summarize_trials(&outcomes, contract_epsilon)
}

/// Sequential variant for memory-heavy trial bodies.
pub fn success_rate_serial<F>(
    mut experiment: F,
    trials: usize,
    contract_epsilon: f64,
    stream: RngStream,
) -> TrialReport
where
    F: FnMut(RngStream) -> TrialOutcome,
{
    let outcomes: Vec<TrialOutcome> = (0..trials as u64)
        .map(|t| experiment(stream.derive(t)))
        .collect();
    summarize_trials(&outcomes, contract_epsilon)
}

pub fn summarize_trials(outcomes: &[TrialOutcome], contract_epsilon: f64) -> TrialReport {
    let trials = outcomes.len();
    let mut construction_failures = 0;
    let mut contract_misses = 0;
    let mut successes = 0;
    let mut errors: Vec<f64> = Vec::new();
    for outcome in outcomes {
        match *outcome {
            TrialOutcome::ConstructionFailed => construction_failures += 1,
            TrialOutcome::Built { measured_error } => {
                errors.push(measured_error);
                if measured_error <= contract_epsilon {
                    successes += 1;
                } else {
                    contract_misses += 1;
                }
            }
        }
    }
    errors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (wilson_low, wilson_high) = wilson_interval(successes, trials);
    TrialReport {
        trials,
        construction_failures,
        contract_misses,
        successes,
        contract_epsilon,
        success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        wilson_low,
        wilson_high,
        error_median: quantile(&errors, 0.5),
        error_p95: quantile(&errors, 0.95),
        error_max: errors.last().copied(),
    }
}

/// Binomial 3-sigma slack on the failure count at rate `delta`: a
/// completed run at the guaranteed rate should fail at most
/// `delta*T + 3*sqrt(delta*(1-delta)*T)` times.
pub fn three_sigma_failure_budget(delta: f64, trials: usize) -> f64 {
    let t = trials as f64;
    delta * t + 3.0 * (delta * (1.0 - delta) * t).sqrt()
}

const BRUTE_FORCE_LIMIT: usize = 24;

/// Exhaustive search over all 2^w weight masks of a tiny network for the
/// mask minimizing the sampled sup error against `target`. Independent
/// oracle for the existence claims; any constructive mask is inside the
/// enumerated set, so the returned error is a lower bound on every
/// construction's error.
pub fn brute_force_mask<F>(
    net: &DenseNetwork,
    target: F,
    points: &[Vec<f64>],
) -> Result<(BinaryMask, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let weights = net.weight_count();
    if weights > BRUTE_FORCE_LIMIT {
        return Err(Error::BudgetExceeded {
            weights,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if net.output_dim() != 1 {
        return Err(Error::InvalidParam("oracle expects single-output networks".into()));
    }
    let target_values: Vec<f64> = points.iter().map(|x| target(x)).collect();

    let layer_shapes: Vec<(usize, usize)> = net
        .layers()
        .iter()
        .map(|l| (l.rows(), l.cols()))
        .collect();
    let decode = |bits: u64| -> BinaryMask {
        let mut mask = BinaryMask::zeros_like(net);
        let mut bit = 0;
        for (li, &(rows, cols)) in layer_shapes.iter().enumerate() {
            for r in 0..rows {
                for c in 0..cols {
                    if bits >> bit & 1 == 1 {
                        mask.layer_mut(li).set(r, c, true);
                    }
                    bit += 1;
                }
            }
        }
        mask
    };

    let best = (0u64..1 << weights)
        .into_par_iter()
        .map(|bits| {
            let mask = decode(bits);
            let pruned = apply_mask(net, &mask).expect("congruent by construction");
            let mut worst = 0.0f64;
            for (x, t) in points.iter().zip(&target_values) {
                let g = pruned.forward_scalar(x).expect("dims fixed");
                worst = worst.max((g - t).abs());
            }
            (bits, worst)
        })
        // Deterministic arg-min: smallest error, lowest bit pattern on ties.
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        .expect("at least the empty mask");

    Ok((decode(best.0), best.1))
}
