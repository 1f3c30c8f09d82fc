//! Constructive subnetwork extraction from randomly initialized ReLU
//! networks.
//!
//! Two families of constructions are implemented, plus the measurement
//! machinery to check their contracts empirically:
//!
//! - [`weight_prune`] — weight-level subnetworks: given a bounded target
//!   network of depth l and a wide-enough random network of depth 2l (or
//!   depth 3 for a depth-2 target), select a tiny set of weights whose
//!   masked subnetwork approximates the target uniformly. Each builder
//!   mirrors one rung of the ladder from a single coordinate up to deep
//!   networks, with explicit error budgets and exact sparsity accounting.
//! - [`neuron_prune`] — neuron-level subnetworks of two-layer networks:
//!   fit per-block feature coefficients (interpolating a dataset, or Monte
//!   Carlo coefficients for a kernel-space target), keep the neurons whose
//!   random output weights land close to the fit, and average many blocks
//!   under an explicit scale constant.
//! - [`verify`] — sampled sup-norm estimation, seeded success-rate trials
//!   with Wilson intervals, and a brute-force mask oracle for tiny
//!   instances.
//!
//! Everything is deterministic given a master seed: randomness flows
//! through splittable [`rng::RngStream`] values, so trials parallelize
//! without affecting results.

pub mod error;
pub mod linalg;
pub mod matrix;
pub mod net;
pub mod neuron_prune;
pub mod rng;
pub mod sample;
pub mod verify;
pub mod weight_prune;

pub use error::{Error, FailurePoint, Result, Side};
pub use matrix::Matrix;
pub use net::{apply_mask, BinaryMask, DenseNetwork, MaskLayer, MaskedEvaluator};
pub use rng::RngStream;
pub use sample::{sample_random_net, sample_target_net, sample_two_layer_target, TargetSpec};
