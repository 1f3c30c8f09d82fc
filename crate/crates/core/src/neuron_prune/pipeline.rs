//! End-to-end neuron-pruning pipelines: block initialization, per-block
//! fits, closeness masking, and assembly under the explicit scale
//! constant. Width formulas are computed and reported, never enforced;
//! the contract is checked empirically at whatever widths the caller
//! affords.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_dataset_features, rkhs_feature_coefficients, CubeQuadrature, RkhsTarget};
use super::kernel::kernel_matrix;
use super::subnetwork::{
    assemble_neuron_subnetwork, closeness_mask, NeuronSubnetwork, SubnetworkBlock,
};
use super::Activation;
use crate::error::{Error, Result};
use crate::matrix::{norm2, Matrix};
use crate::rng::RngStream;

const TAG_KERNEL: u64 = 0;
const TAG_BLOCKS: u64 = 1;
const TAG_EVAL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDatasetOptions {
    pub activation: Activation,
    /// Monte Carlo draws for the kernel matrix estimate.
    pub kernel_mc_samples: usize,
}

impl Default for FiniteDatasetOptions {
    fn default() -> Self {
        FiniteDatasetOptions {
            activation: Activation::Relu,
            kernel_mc_samples: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDatasetDiagnostics {
    /// lambda_min of the Monte Carlo kernel estimate (expectation scale).
    pub kernel_lambda_min: f64,
    /// M = 4 L m / (3 lambda), the coefficient normalization.
    pub coefficient_bound: f64,
    /// Mask window eps' = eps / M = 3 lambda eps / (4 L m).
    pub mask_window: f64,
    /// A window above 2 keeps every neuron; degenerate but valid.
    pub window_clipped: bool,
    /// Assembled scale c = (8 k1 L / eps) M / k2.
    pub scale: f64,
    pub keep_fraction: f64,
    pub block_gram_lambda_min: f64,
    pub block_gram_lambda_median: f64,
    pub block_residual_max: f64,
    /// sup_i |c g~(x_i) - y_i| over the dataset.
    pub measured_sup_error: f64,
    pub contract_met: bool,
    /// sign(g~(x_i)) = sign(y_i) for every i (scale-free check).
    pub sign_agreement: bool,
    /// The guarantee's width demands at these parameters, for the report.
    pub paper_width_k1: f64,
    pub paper_width_k2: f64,
}

fn draw_block(
    stream: RngStream,
    k1: usize,
    dim: usize,
    activation: Activation,
    points: &[Vec<f64>],
) -> (Matrix, Vec<f64>, Matrix) {
    let mut rng = stream.rng();
    let bound = 1.0 / (dim as f64).sqrt();
    let mut weights = Matrix::zeros(k1, dim);
    for v in weights.data_mut() {
        *v = rng.random_range(-bound..=bound);
    }
    let coeffs: Vec<f64> = (0..k1).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut features = Matrix::zeros(k1, points.len());
    for i in 0..k1 {
        for (j, x) in points.iter().enumerate() {
            features[(i, j)] = activation.value(crate::matrix::dot(weights.row(i), x));
        }
    }
    (weights, coeffs, features)
}

fn sign_agrees(g: f64, y: f64) -> bool {
    if y == 0.0 {
        g == 0.0
    } else {
        g * y > 0.0
    }
}

/// Build a neuron-subnetwork interpolating the dataset, without enforcing
/// the epsilon contract: diagnostics carry the measured sup error and
/// whether the contract held.
#[allow(clippy::too_many_arguments)]
pub fn prune_finite_dataset_unchecked(
    points: &[Vec<f64>],
    labels: &[f64],
    k1: usize,
    k2: usize,
    epsilon: f64,
    delta: f64,
    stream: RngStream,
    options: &FiniteDatasetOptions,
) -> Result<(NeuronSubnetwork, FiniteDatasetDiagnostics)> {
    let m = points.len();
    if m == 0 || labels.len() != m {
        return Err(Error::Dimension {
            expected: m.max(1),
            got: labels.len(),
        });
    }
    if labels.iter().any(|y| y.abs() > 1.0) {
        return Err(Error::InvalidParam("labels must lie in [-1, 1]".into()));
    }
    if points.iter().any(|x| norm2(x) > 1.0 + 1e-9) {
        return Err(Error::InvalidParam("points must lie in the unit ball".into()));
    }
    if k1 < m {
        return Err(Error::InvalidParam(format!(
            "block width k1 = {k1} cannot interpolate m = {m} points"
        )));
    }
    if k2 == 0 || epsilon <= 0.0 {
        return Err(Error::InvalidParam("need k2 >= 1 and epsilon > 0".into()));
    }
    let dim = points[0].len();
    let lipschitz = options.activation.lipschitz();

    let kernel = kernel_matrix(
        points,
        options.activation,
        options.kernel_mc_samples,
        stream.derive(TAG_KERNEL),
    )?;
    let lambda = kernel.lambda_min;
    let trace: f64 = (0..m).map(|i| kernel.h[(i, i)]).sum();
    if lambda <= 1e-8 * trace / m as f64 {
        return Err(Error::SingularGram { lambda_min: lambda });
    }

    let m_bound = super::fit::interpolation_coefficient_bound(lipschitz, m, lambda);
    let window = epsilon / m_bound;
    let block_stream = stream.derive(TAG_BLOCKS);

    let blocks: Vec<(SubnetworkBlock, f64, f64)> = (0..k2 as u64)
        .into_par_iter()
        .map(|j| -> Result<(SubnetworkBlock, f64, f64)> {
            let (weights, coeffs, features) =
                draw_block(block_stream.derive(j), k1, dim, options.activation, points);
            let fit = fit_dataset_features(&features, labels)?;
            if fit.coefficient_inf > m_bound {
                // The interpolant escaped the coefficient bound the keep
                // rule normalizes by: the probability-delta block event.
                return Err(Error::ConstructionFailed(crate::error::FailurePoint {
                    neuron: Some(j as usize),
                    stage: Some("block-coefficient-bound"),
                    ..Default::default()
                }));
            }
            let mask = closeness_mask(&coeffs, &fit.coefficients, m_bound, window)?;
            Ok((
                SubnetworkBlock {
                    weights,
                    coefficients: coeffs,
                    mask,
                },
                fit.gram_lambda_min,
                fit.residual_inf,
            ))
        })
        .collect::<Result<_>>()?;

    let mut gram_lambdas: Vec<f64> = blocks.iter().map(|(_, l, _)| *l).collect();
    gram_lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let block_residual_max = blocks.iter().map(|(_, _, r)| *r).fold(0.0, f64::max);

    let block_views: Vec<SubnetworkBlock> = blocks.into_iter().map(|(b, _, _)| b).collect();
    let subnet = assemble_neuron_subnetwork(&block_views, epsilon, options.activation, m_bound)?;

    let mut sup = 0.0f64;
    let mut signs = true;
    for (x, &y) in points.iter().zip(labels) {
        let raw = subnet.masked_sum(x);
        sup = sup.max((subnet.scale() * raw - y).abs());
        signs &= sign_agrees(raw, y);
    }

    let delta1 = delta / (2.0 * k2 as f64);
    let paper_width_k1 =
        64.0 * (m as f64).powi(2) * (m as f64 / delta1).ln().powi(2) / (lambda * lambda);
    let paper_width_k2 = 810.0
        * lipschitz.powi(8)
        * (m as f64).powi(4)
        * (k1 as f64).powi(4)
        * (2.0 * k1 as f64 / delta).ln()
        / (lambda.powi(4) * epsilon.powi(4));

    let diagnostics = FiniteDatasetDiagnostics {
        kernel_lambda_min: lambda,
        coefficient_bound: m_bound,
        mask_window: window,
        window_clipped: window > 2.0,
        scale: subnet.scale(),
        keep_fraction: subnet.keep_fraction(),
        block_gram_lambda_min: gram_lambdas[0],
        block_gram_lambda_median: gram_lambdas[gram_lambdas.len() / 2],
        block_residual_max,
        measured_sup_error: sup,
        contract_met: sup <= epsilon,
        sign_agreement: signs,
        paper_width_k1,
        paper_width_k2,
    };
    Ok((subnet, diagnostics))
}

/// [`prune_finite_dataset_unchecked`] with the epsilon contract enforced:
/// a missed contract is the probabilistic failure event and comes back as
/// [`Error::ConstructionDegraded`].
#[allow(clippy::too_many_arguments)]
pub fn prune_finite_dataset(
    points: &[Vec<f64>],
    labels: &[f64],
    k1: usize,
    k2: usize,
    epsilon: f64,
    delta: f64,
    stream: RngStream,
    options: &FiniteDatasetOptions,
) -> Result<(NeuronSubnetwork, FiniteDatasetDiagnostics)> {
    let (subnet, diagnostics) = prune_finite_dataset_unchecked(
        points, labels, k1, k2, epsilon, delta, stream, options,
    )?;
    if !diagnostics.contract_met {
        return Err(Error::ConstructionDegraded {
            measured_sup_error: diagnostics.measured_sup_error,
        });
    }
    Ok((subnet, diagnostics))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkhsOptions {
    /// Random unit-ball points for the sup diagnostic.
    pub sup_sample_points: usize,
    /// Quadrature nodes for evaluating the target.
    pub quadrature_nodes: usize,
}

impl Default for RkhsOptions {
    fn default() -> Self {
        RkhsOptions {
            sup_sample_points: 200,
            quadrature_nodes: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkhsDiagnostics {
    /// Mask window eps / (8 k1 L).
    pub mask_window: f64,
    pub window_clipped: bool,
    /// Assembled scale c = 8 k1 L / (eps k2).
    pub scale: f64,
    pub keep_fraction: f64,
    /// Per-block coefficient bound C / k1.
    pub block_coefficient_bound: f64,
    /// Sampled sup |c g~(x) - f(x)| against the quadrature-evaluated target.
    pub sampled_sup_error: f64,
    pub sup_sample_points: usize,
    pub quadrature_nodes: usize,
    pub paper_width_k2: f64,
}

/// Build a neuron-subnetwork approximating a kernel-space target: per
/// block the Monte Carlo coefficients `h(w_i)/k1` (already within the
/// normalized range), closeness mask with window eps/(8 k1 L), assembly
/// with unit coefficient bound.
pub fn prune_rkhs(
    target: &RkhsTarget,
    k1: usize,
    k2: usize,
    epsilon: f64,
    delta: f64,
    stream: RngStream,
    options: &RkhsOptions,
) -> Result<(NeuronSubnetwork, RkhsDiagnostics)> {
    if k1 == 0 || k2 == 0 || epsilon <= 0.0 {
        return Err(Error::InvalidParam("need k1, k2 >= 1 and epsilon > 0".into()));
    }
    let c_bound = target.sup_bound();
    if c_bound > k1 as f64 {
        return Err(Error::InvalidParam(format!(
            "coefficient bound {c_bound} exceeds k1 = {k1}; normalized coefficients would leave [-1,1]"
        )));
    }
    let lipschitz = target.activation.lipschitz();
    let window = epsilon / (8.0 * k1 as f64 * lipschitz);
    let block_stream = stream.derive(TAG_BLOCKS);
    let dim = target.dim;

    let blocks: Vec<SubnetworkBlock> = (0..k2 as u64)
        .into_par_iter()
        .map(|j| -> Result<SubnetworkBlock> {
            let mut rng = block_stream.derive(j).rng();
            let bound = 1.0 / (dim as f64).sqrt();
            let mut weights = Matrix::zeros(k1, dim);
            for v in weights.data_mut() {
                *v = rng.random_range(-bound..=bound);
            }
            let coeffs: Vec<f64> = (0..k1).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let fitted = rkhs_feature_coefficients(target, &weights)?;
            let mask = closeness_mask(&coeffs, &fitted, 1.0, window)?;
            Ok(SubnetworkBlock {
                weights,
                coefficients: coeffs,
                mask,
            })
        })
        .collect::<Result<_>>()?;

    let subnet = assemble_neuron_subnetwork(&blocks, epsilon, target.activation, 1.0)?;

    let quad = CubeQuadrature::new(target, options.quadrature_nodes);
    let mut rng = stream.derive(TAG_EVAL).rng();
    let mut sup = 0.0f64;
    for _ in 0..options.sup_sample_points {
        let x = ball_point(dim, &mut rng);
        let gap = (subnet.predict(&x) - quad.target_value(&x)).abs();
        sup = sup.max(gap);
    }

    let paper_width_k2 = 4010.0 * lipschitz.powi(4) * (k1 as f64).powi(4)
        * (2.0 * k1 as f64 / delta).ln()
        / epsilon.powi(4);

    let diagnostics = RkhsDiagnostics {
        mask_window: window,
        window_clipped: window > 2.0,
        scale: subnet.scale(),
        keep_fraction: subnet.keep_fraction(),
        block_coefficient_bound: c_bound / k1 as f64,
        sampled_sup_error: sup,
        sup_sample_points: options.sup_sample_points,
        quadrature_nodes: quad.node_count,
        paper_width_k2,
    };
    Ok((subnet, diagnostics))
}

pub(crate) fn ball_point(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let n = norm2(&x);
        if n <= 1.0 && (n > 0.0 || dim == 0) {
            return x;
        }
    }
}
