//! The closeness mask, block assembly, and the neuron-subnetwork /
//! feature-model pair.

use super::Activation;
use crate::error::{Error, Result};
use crate::matrix::{dot, norm_inf, Matrix};
use crate::net::DenseNetwork;

/// Keep rule `b_i = 1{ |u_i - v_i / m_bound| <= window }`: a neuron stays
/// exactly when its random output weight lands within the window of the
/// normalized fitted coefficient.
pub fn closeness_mask(
    u_random: &[f64],
    v_target: &[f64],
    m_bound: f64,
    window: f64,
) -> Result<Vec<bool>> {
    if m_bound <= 0.0 {
        return Err(Error::InvalidParam(format!(
            "normalization bound {m_bound} must be positive"
        )));
    }
    if u_random.len() != v_target.len() {
        return Err(Error::Dimension {
            expected: u_random.len(),
            got: v_target.len(),
        });
    }
    if norm_inf(v_target) > m_bound * (1.0 + 1e-12) {
        return Err(Error::InvalidParam(
            "target coefficients exceed the declared bound".into(),
        ));
    }
    Ok(u_random
        .iter()
        .zip(v_target)
        .map(|(u, v)| (u - v / m_bound).abs() <= window)
        .collect())
}

/// One width-k1 block: random first-layer weights, random output
/// coefficients, and the keep mask computed against its fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetworkBlock {
    /// k1 x d first-layer weights.
    pub weights: Matrix,
    /// Random output coefficients, length k1.
    pub coefficients: Vec<f64>,
    /// Keep mask, length k1.
    pub mask: Vec<bool>,
}

/// A masked two-layer network `x -> c * sum_i b_i u_i sigma(<w_i, x>)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSubnetwork {
    weights: Matrix,
    coefficients: Vec<f64>,
    mask: Vec<bool>,
    scale: f64,
    activation: Activation,
    kept: Vec<u32>,
}

impl NeuronSubnetwork {
    pub fn new(
        weights: Matrix,
        coefficients: Vec<f64>,
        mask: Vec<bool>,
        scale: f64,
        activation: Activation,
    ) -> Result<Self> {
        let k = weights.rows();
        if coefficients.len() != k || mask.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: coefficients.len().min(mask.len()),
            });
        }
        if scale <= 0.0 {
            return Err(Error::InvalidParam(format!("scale {scale} must be positive")));
        }
        let kept = mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i as u32)
            .collect();
        Ok(NeuronSubnetwork {
            weights,
            coefficients,
            mask,
            scale,
            activation,
            kept,
        })
    }

    pub fn width(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn kept_count(&self) -> usize {
        self.kept.len()
    }

    pub fn keep_fraction(&self) -> f64 {
        self.kept.len() as f64 / self.width().max(1) as f64
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// c * g~(x): masked neurons contribute exactly 0 and are skipped.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.scale * self.masked_sum(x)
    }

    /// g~(x) without the scale; sign(g~) = sign(c g~) for any c > 0.
    pub fn masked_sum(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for &i in &self.kept {
            let i = i as usize;
            acc += self.coefficients[i] * self.activation.value(dot(self.weights.row(i), x));
        }
        acc
    }

    /// The equivalent random-features model: coefficients `c * b_i * u_i`
    /// over the same frozen first layer, pointwise equal predictions.
    pub fn to_feature_model(&self) -> FeatureModel {
        let coefficients: Vec<f64> = self
            .coefficients
            .iter()
            .zip(&self.mask)
            .map(|(u, &b)| if b { self.scale * u } else { 0.0 })
            .collect();
        let bound = norm_inf(&coefficients);
        FeatureModel {
            weights: self.weights.clone(),
            coefficients,
            activation: self.activation,
            coefficient_bound: bound,
        }
    }

    /// Serialize as the dense two-layer network format plus scale and mask
    /// vector. Only meaningful for ReLU activations, which is what the
    /// network format evaluates.
    pub fn to_network_json(&self) -> Result<serde_json::Value> {
        if self.activation != Activation::Relu {
            return Err(Error::InvalidParam(
                "only relu subnetworks match the network JSON semantics".into(),
            ));
        }
        let net = DenseNetwork::new(vec![
            self.weights.clone(),
            Matrix::from_vec(1, self.coefficients.len(), self.coefficients.clone())?,
        ])?;
        Ok(serde_json::json!({
            "network": net,
            "scale": self.scale,
            "neuron_mask": self.mask.iter().map(|&b| u8::from(b)).collect::<Vec<u8>>(),
        }))
    }
}

/// Concatenate k2 width-k1 blocks into one width-(k1*k2) subnetwork with
/// scale `c = (8 k1 L / eps) * m_bound / k2` (`m_bound = 1` for the
/// kernel-space pipeline).
pub fn assemble_neuron_subnetwork(
    blocks: &[SubnetworkBlock],
    epsilon: f64,
    activation: Activation,
    m_bound: f64,
) -> Result<NeuronSubnetwork> {
    if blocks.is_empty() {
        return Err(Error::InvalidParam("no blocks to assemble".into()));
    }
    if epsilon <= 0.0 || m_bound <= 0.0 {
        return Err(Error::InvalidParam(
            "epsilon and the coefficient bound must be positive".into(),
        ));
    }
    let k1 = blocks[0].weights.rows();
    let d = blocks[0].weights.cols();
    let k2 = blocks.len();
    let mut weights = Matrix::zeros(k1 * k2, d);
    let mut coefficients = Vec::with_capacity(k1 * k2);
    let mut mask = Vec::with_capacity(k1 * k2);
    for (j, block) in blocks.iter().enumerate() {
        if block.weights.rows() != k1
            || block.weights.cols() != d
            || block.coefficients.len() != k1
            || block.mask.len() != k1
        {
            return Err(Error::Shape {
                expected_rows: k1,
                expected_cols: d,
                rows: block.weights.rows(),
                cols: block.weights.cols(),
            });
        }
        for i in 0..k1 {
            weights
                .row_mut(j * k1 + i)
                .copy_from_slice(block.weights.row(i));
        }
        coefficients.extend_from_slice(&block.coefficients);
        mask.extend_from_slice(&block.mask);
    }
    let lipschitz = activation.lipschitz();
    let scale = 8.0 * k1 as f64 * lipschitz / epsilon * m_bound / k2 as f64;
    NeuronSubnetwork::new(weights, coefficients, mask, scale, activation)
}

/// A random-features predictor: frozen first-layer weights with bounded
/// second-layer coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub weights: Matrix,
    pub coefficients: Vec<f64>,
    pub activation: Activation,
    /// Declared bound on ||coefficients||_inf.
    pub coefficient_bound: f64,
}

impl FeatureModel {
    pub fn new(
        weights: Matrix,
        coefficients: Vec<f64>,
        activation: Activation,
        coefficient_bound: f64,
    ) -> Result<Self> {
        if coefficients.len() != weights.rows() {
            return Err(Error::Dimension {
                expected: weights.rows(),
                got: coefficients.len(),
            });
        }
        if norm_inf(&coefficients) > coefficient_bound * (1.0 + 1e-12) {
            return Err(Error::InvalidParam(
                "coefficients exceed the declared bound".into(),
            ));
        }
        Ok(FeatureModel {
            weights,
            coefficients,
            activation,
            coefficient_bound,
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (i, u) in self.coefficients.iter().enumerate() {
            acc += u * self.activation.value(dot(self.weights.row(i), x));
        }
        acc
    }

    /// The dense two-layer network computing this predictor.
    pub fn to_dense_network(&self) -> Result<DenseNetwork> {
        if self.activation != Activation::Relu {
            return Err(Error::InvalidParam(
                "only relu feature models match the network semantics".into(),
            ));
        }
        DenseNetwork::new(vec![
            self.weights.clone(),
            Matrix::from_vec(1, self.coefficients.len(), self.coefficients.clone())?,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn wide_window_keeps_everything() {
        let u = vec![-0.9, 0.0, 0.8];
        let v = vec![0.5, -0.5, 0.0];
        let b = closeness_mask(&u, &v, 1.0, 2.0).unwrap();
        assert!(b.iter().all(|&x| x));
    }

    #[test]
    fn zero_window_keeps_nothing_when_apart() {
        let u = vec![-0.9, 0.0, 0.8];
        let v = vec![0.5, -0.5, 0.1];
        let b = closeness_mask(&u, &v, 1.0, 0.0).unwrap();
        assert!(b.iter().all(|&x| !x));
    }

    #[test]
    fn nonpositive_bound_rejected() {
        assert!(closeness_mask(&[0.0], &[0.0], 0.0, 0.1).is_err());
        assert!(closeness_mask(&[0.0], &[0.0], -1.0, 0.1).is_err());
    }

    /// Keep law measured by Monte Carlo: for u ~ U[-1,1] the keep
    /// probability is half the overlap of [vbar - w, vbar + w] with
    /// [-1, 1] -- equal to w for interior vbar, w/2 at the boundary.
    #[test]
    fn keep_fraction_matches_overlap_law() {
        let n = 100_000;
        let mut rng = RngStream::new(40).rng();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let window = 0.3;
        for vbar in [0.0, 0.4, -0.6, 1.0, -1.0] {
            let v = vec![vbar; n];
            let mask = closeness_mask(&u, &v, 1.0, window).unwrap();
            let frac = mask.iter().filter(|&&b| b).count() as f64 / n as f64;
            let overlap = (vbar + window).min(1.0) - (vbar - window).max(-1.0);
            let expected = overlap / 2.0;
            let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
            assert!(
                (frac - expected).abs() <= 3.0 * sigma + 1e-9,
                "vbar {vbar}: {frac} vs {expected}"
            );
        }
    }

    #[test]
    fn boundary_keep_fraction_is_half_window() {
        // At |vbar| = 1 the window is half clipped: keep probability
        // exactly window/2.
        let n = 100_000;
        let mut rng = RngStream::new(41).rng();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let window = 0.25;
        let v = vec![1.0; n];
        let mask = closeness_mask(&u, &v, 1.0, window).unwrap();
        let frac = mask.iter().filter(|&&b| b).count() as f64 / n as f64;
        let expected = window / 2.0;
        let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((frac - expected).abs() <= 3.0 * sigma);
    }

    fn block(seed: u64, k1: usize, d: usize, mask: Vec<bool>) -> SubnetworkBlock {
        let mut rng = RngStream::new(seed).rng();
        let bound = 1.0 / (d as f64).sqrt();
        let mut w = Matrix::zeros(k1, d);
        for v in w.data_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        let u: Vec<f64> = (0..k1).map(|_| rng.random_range(-1.0..=1.0)).collect();
        SubnetworkBlock {
            weights: w,
            coefficients: u,
            mask,
        }
    }

    #[test]
    fn single_block_unit_scale_is_raw_output() {
        // k1 = 4, L = 1, eps = 0.5 makes 8 k1 L / eps = 64; m_bound = 1/64
        // gives c = 1 exactly.
        let b = block(1, 4, 2, vec![true; 4]);
        let ns =
            assemble_neuron_subnetwork(std::slice::from_ref(&b), 0.5, Activation::Relu, 1.0 / 64.0)
                .unwrap();
        assert_eq!(ns.scale(), 1.0);
        let mut rng = RngStream::new(2).rng();
        for _ in 0..50 {
            let x = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let raw: f64 = (0..4)
                .map(|i| b.coefficients[i] * dot(b.weights.row(i), &x).max(0.0))
                .sum();
            assert!((ns.predict(&x) - raw).abs() <= 1e-15);
        }
    }

    #[test]
    fn fully_pruned_blocks_predict_zero() {
        let blocks = vec![block(3, 4, 2, vec![false; 4]), block(4, 4, 2, vec![false; 4])];
        let ns = assemble_neuron_subnetwork(&blocks, 0.5, Activation::Relu, 1.0).unwrap();
        assert_eq!(ns.kept_count(), 0);
        assert_eq!(ns.predict(&[0.3, -0.2]), 0.0);
    }

    #[test]
    fn feature_model_equivalence_pointwise() {
        let mut rng = RngStream::new(5).rng();
        let blocks = vec![
            block(6, 8, 3, (0..8).map(|i| i % 3 == 0).collect()),
            block(7, 8, 3, (0..8).map(|i| i % 2 == 0).collect()),
        ];
        let ns = assemble_neuron_subnetwork(&blocks, 0.4, Activation::Relu, 2.0).unwrap();
        let fm = ns.to_feature_model();
        for _ in 0..1000 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
            assert!((ns.predict(&x) - fm.predict(&x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn sign_is_scale_invariant() {
        let b = block(8, 6, 2, (0..6).map(|i| i % 2 == 0).collect());
        let mut rng = RngStream::new(9).rng();
        for _ in 0..200 {
            let x = [rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)];
            let raw = {
                let ns = assemble_neuron_subnetwork(std::slice::from_ref(&b), 0.5, Activation::Relu, 1.0)
                    .unwrap();
                ns.masked_sum(&x)
            };
            for m_bound in [0.01, 1.0, 50.0] {
                let ns =
                    assemble_neuron_subnetwork(std::slice::from_ref(&b), 0.5, Activation::Relu, m_bound)
                        .unwrap();
                assert_eq!(ns.predict(&x).signum(), raw.signum() * 1.0);
            }
        }
    }

    #[test]
    fn network_json_includes_scale() {
        let b = block(10, 4, 2, vec![true, false, true, false]);
        let ns = assemble_neuron_subnetwork(&[b], 0.5, Activation::Relu, 1.0).unwrap();
        let json = ns.to_network_json().unwrap();
        assert!(json["scale"].as_f64().unwrap() > 0.0);
        assert_eq!(json["neuron_mask"], serde_json::json!([1, 0, 1, 0]));
        assert_eq!(json["network"]["last_layer_linear"], serde_json::json!(true));
    }
}
