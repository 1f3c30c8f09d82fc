//! Seeded generation of random base networks and admissible target
//! networks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm_precise;
use crate::matrix::Matrix;
use crate::net::DenseNetwork;
use crate::rng::RngStream;

/// Shape and admissibility constraints for a target network: every row of
/// every layer has at most `sparsity` nonzero entries, entries stay within
/// `1/sqrt(n_in)`, and every layer's spectral norm is at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetSpec {
    /// Input dimension d.
    pub input_dim: usize,
    /// Hidden width n (ignored when depth == 1).
    pub width: usize,
    /// Depth l; the final layer is 1 x n (or 1 x d when l == 1).
    pub depth: usize,
    /// Row sparsity s, clamped per layer to that layer's input dimension.
    pub sparsity: usize,
}

impl TargetSpec {
    /// Layer shapes (rows, cols) for this spec.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let (d, n, l) = (self.input_dim, self.width, self.depth);
        if l == 1 {
            return vec![(1, d)];
        }
        let mut shapes = vec![(n, d)];
        for _ in 1..l - 1 {
            shapes.push((n, n));
        }
        shapes.push((1, n));
        shapes
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.depth == 0 || (self.depth > 1 && self.width == 0) {
            return Err(Error::InfeasibleTarget("dimensions must be positive".into()));
        }
        if self.sparsity == 0 {
            return Err(Error::InfeasibleTarget(
                "sparsity 0 only generates the zero network".into(),
            ));
        }
        Ok(())
    }
}

/// Draw `count` distinct indices from `0..n` by partial Fisher-Yates.
fn sample_support(n: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(count);
    idx.sort_unstable();
    idx
}

/// Every entry i.i.d. uniform on [-1, 1]; one independent stream per layer.
///
/// `dims` lists the value dimensions `[d, n_1, ..., n_out]`, so layer i has
/// shape `dims[i+1] x dims[i]`.
pub fn sample_random_net(dims: &[usize], stream: RngStream) -> Result<DenseNetwork> {
    if dims.len() < 2 {
        return Err(Error::InvalidParam("need input and output dims".into()));
    }
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, pair) in dims.windows(2).enumerate() {
        let (n_in, n_out) = (pair[0], pair[1]);
        let mut rng = stream.derive(i as u64).rng();
        let mut m = Matrix::zeros(n_out, n_in);
        for v in m.data_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        layers.push(m);
    }
    DenseNetwork::new(layers)
}

/// Generate an admissible target: s-sparse rows drawn uniform in
/// [-1/sqrt(n_in), 1/sqrt(n_in)], then the whole matrix rescaled by
/// min(1, 1/||W||_2). Rescaling (rather than rejection) keeps the spectral
/// and max-norm hypotheses exact without an unbounded retry loop.
pub fn sample_target_net(spec: &TargetSpec, stream: RngStream) -> Result<DenseNetwork> {
    spec.validate()?;
    let mut layers = Vec::new();
    for (li, (rows, cols)) in spec.layer_shapes().into_iter().enumerate() {
        let mut rng = stream.derive(li as u64).rng();
        let s_eff = spec.sparsity.min(cols);
        let bound = 1.0 / (cols as f64).sqrt();
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in sample_support(cols, s_eff, &mut rng) {
                m[(r, c)] = rng.random_range(-bound..=bound);
            }
        }
        let norm = spectral_norm_precise(&m);
        if norm > 1.0 {
            let scale = 1.0 / norm;
            m.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
        layers.push(m);
    }
    DenseNetwork::new(layers)
}

/// Depth-2 target for the shallow construction: n ReLU neurons with
/// s-sparse rows in [-1/sqrt(s), 1/sqrt(s)] (so each row has l2 norm at
/// most 1) and an output coefficient per neuron uniform in [-1, 1].
pub fn sample_two_layer_target(
    input_dim: usize,
    width: usize,
    sparsity: usize,
    stream: RngStream,
) -> Result<DenseNetwork> {
    if sparsity == 0 || sparsity > input_dim {
        return Err(Error::InfeasibleTarget(format!(
            "sparsity {sparsity} not in 1..={input_dim}"
        )));
    }
    let mut rng = stream.derive(0).rng();
    let bound = 1.0 / (sparsity as f64).sqrt();
    let mut w = Matrix::zeros(width, input_dim);
    for r in 0..width {
        for c in sample_support(input_dim, sparsity, &mut rng) {
            w[(r, c)] = rng.random_range(-bound..=bound);
        }
    }
    let mut rng_out = stream.derive(1).rng();
    let mut v = Matrix::zeros(1, width);
    for val in v.data_mut() {
        *val = rng_out.random_range(-1.0..=1.0);
    }
    DenseNetwork::new(vec![w, v])
}
