//! Neuron-level pruning of two-layer networks.
//!
//! A two-layer network with frozen first-layer weights is a random-features
//! predictor; keeping a neuron exactly when its random output weight lands
//! within a window of a fitted feature coefficient, then averaging many
//! independent width-k1 blocks under an explicit scale constant, turns that
//! predictor into a neuron-subnetwork. Two pipelines instantiate this:
//! exact interpolation of a finite dataset (gated by the kernel matrix's
//! minimum eigenvalue) and approximation of kernel-space targets with
//! bounded coefficient functions.

mod fit;
mod kernel;
mod pipeline;
mod subnetwork;

pub use fit::{
    fit_dataset_features, interpolation_coefficient_bound, rkhs_feature_coefficients,
    CoefficientFn, CubeQuadrature, DatasetFit, RkhsTarget,
};
pub use kernel::{kernel_matrix, min_eigenvalue, KernelMatrix};
pub use pipeline::{
    prune_finite_dataset, prune_finite_dataset_unchecked, prune_rkhs, FiniteDatasetDiagnostics,
    FiniteDatasetOptions, RkhsDiagnostics, RkhsOptions,
};
pub use subnetwork::{
    assemble_neuron_subnetwork, closeness_mask, FeatureModel, NeuronSubnetwork, SubnetworkBlock,
};

use serde::{Deserialize, Serialize};

/// Scalar activation for feature models. All variants are 1-Lipschitz with
/// sigma(0) = 0, which the coefficient bounds assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Relu,
    /// Linear features; gives the kernel a closed form, used as an oracle.
    Identity,
}

impl Activation {
    #[inline]
    pub fn value(self, t: f64) -> f64 {
        match self {
            Activation::Relu => t.max(0.0),
            Activation::Identity => t,
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }
}
