//! Feature-coefficient fitting: minimum-norm interpolation of a dataset
//! through the Gram matrix, and Monte Carlo coefficients for kernel-space
//! targets.

use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigenvalue, solve_spd};
use crate::matrix::{dot, norm_inf, Matrix};
use crate::rng::RngStream;

/// Minimum-norm interpolant of a dataset through fixed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFit {
    /// Coefficients u with sum_i u_i * X[i][j] = y[j].
    pub coefficients: Vec<f64>,
    /// max_j |<u, X[.][j]> - y_j| after refinement.
    pub residual_inf: f64,
    /// ||u||_inf.
    pub coefficient_inf: f64,
    /// Minimum eigenvalue of the (unnormalized) Gram matrix X^T X.
    pub gram_lambda_min: f64,
}

/// Interpolate `labels` through the feature matrix `features`
/// (k features x m points, `features[i][j] = sigma(<w_i, x_j>)`).
///
/// Solves the m x m normal system `X^T X z = y` and maps back with
/// `u = X z`, so `u` is the minimum-norm interpolant. One or two rounds of
/// iterative refinement keep the reported residual near machine precision
/// whenever the Gram matrix is comfortably invertible.
pub fn fit_dataset_features(features: &Matrix, labels: &[f64]) -> Result<DatasetFit> {
    let (k, m) = (features.rows(), features.cols());
    if labels.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: labels.len(),
        });
    }
    if k < m {
        return Err(Error::InvalidParam(format!(
            "{k} features cannot interpolate {m} points"
        )));
    }
    let gram = features.gram();
    let gram_lambda_min = min_symmetric_eigenvalue(&gram)?;
    let trace: f64 = (0..m).map(|i| gram[(i, i)]).sum();
    if gram_lambda_min <= 1e-10 * trace / m as f64 {
        return Err(Error::SingularGram {
            lambda_min: gram_lambda_min,
        });
    }

    let z = solve_spd(&gram, labels)?;
    let mut u = features.mul_vec(&z)?;
    let mut residual_inf = 0.0;
    for _round in 0..3 {
        let fitted = features.mul_vec_transposed(&u)?;
        let r: Vec<f64> = labels.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        residual_inf = norm_inf(&r);
        if residual_inf <= 1e-12 {
            break;
        }
        let dz = solve_spd(&gram, &r)?;
        let du = features.mul_vec(&dz)?;
        for (ui, di) in u.iter_mut().zip(&du) {
            *ui += di;
        }
    }
    let coefficient_inf = norm_inf(&u);
    Ok(DatasetFit {
        coefficients: u,
        residual_inf,
        coefficient_inf,
        gram_lambda_min,
    })
}

/// Coefficient bound `4 L m / (3 lambda)` that the interpolant satisfies
/// when the Gram matrix keeps at least 3/4 of the kernel eigenvalue.
pub fn interpolation_coefficient_bound(lipschitz: f64, m: usize, lambda: f64) -> f64 {
    4.0 * lipschitz * m as f64 / (3.0 * lambda)
}

/// Coefficient function h over the feature cube, sup-bounded by C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CoefficientFn {
    Zero,
    Const { c: f64 },
    /// C * sign(w_1).
    SignW1 { c: f64 },
    /// C * sqrt(d) * w_1, linear in the feature weight.
    LinearW1 { c: f64 },
}

impl CoefficientFn {
    pub fn sup_bound(&self) -> f64 {
        match *self {
            CoefficientFn::Zero => 0.0,
            CoefficientFn::Const { c } | CoefficientFn::SignW1 { c } | CoefficientFn::LinearW1 { c } => {
                c.abs()
            }
        }
    }

    pub fn value(&self, w: &[f64], dim: usize) -> f64 {
        match *self {
            CoefficientFn::Zero => 0.0,
            CoefficientFn::Const { c } => c,
            CoefficientFn::SignW1 { c } => {
                if w[0] >= 0.0 {
                    c
                } else {
                    -c
                }
            }
            CoefficientFn::LinearW1 { c } => c * (dim as f64).sqrt() * w[0],
        }
    }
}

/// A target of the form `f(x) = c_d * integral over the cube of
/// h(w) sigma(<w,x>) dw`, with `c_d = (sqrt(d)/2)^d` normalizing the cube
/// to unit mass, so f is exactly the mean of `h(w) sigma(<w,x>)` under
/// uniform w.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RkhsTarget {
    pub dim: usize,
    pub h: CoefficientFn,
    pub activation: Activation,
}

impl RkhsTarget {
    pub fn sup_bound(&self) -> f64 {
        self.h.sup_bound()
    }
}

/// Shared quadrature table for evaluating an [`RkhsTarget`]: the node set
/// is built once and reused across evaluation points.
///
/// Midpoint tensor grid over the cube for d <= 3 (1e6 nodes give ~1e-6
/// accuracy for the piecewise-smooth integrands here); seeded Monte Carlo
/// for higher dimension, where a tensor grid is useless.
pub struct CubeQuadrature {
    /// Flattened nodes, `dim` entries each.
    nodes: Vec<f64>,
    h_values: Vec<f64>,
    dim: usize,
    activation: Activation,
    pub node_count: usize,
}

impl CubeQuadrature {
    pub fn new(target: &RkhsTarget, requested_nodes: usize) -> Self {
        let d = target.dim;
        let bound = 1.0 / (d as f64).sqrt();
        let mut nodes = Vec::new();
        if d <= 3 {
            let per_dim = (requested_nodes as f64).powf(1.0 / d as f64).round().max(2.0) as usize;
            let step = 2.0 * bound / per_dim as f64;
            let mut idx = vec![0usize; d];
            loop {
                for (i, &ix) in idx.iter().enumerate() {
                    nodes.push(-bound + (ix as f64 + 0.5) * step);
                    let _ = i;
                }
                // Odometer increment over the d-dimensional grid.
                let mut carry = 0;
                loop {
                    idx[carry] += 1;
                    if idx[carry] < per_dim {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                    if carry == d {
                        break;
                    }
                }
                if carry == d {
                    break;
                }
            }
        } else {
            use rand::Rng;
            let mut rng = RngStream::new(0x71ad).rng();
            for _ in 0..requested_nodes {
                for _ in 0..d {
                    nodes.push(rng.random_range(-bound..=bound));
                }
            }
        }
        let node_count = nodes.len() / d;
        let h_values: Vec<f64> = nodes
            .chunks_exact(d)
            .map(|w| target.h.value(w, d))
            .collect();
        CubeQuadrature {
            nodes,
            h_values,
            dim: d,
            activation: target.activation,
            node_count,
        }
    }

    /// f(x) as the quadrature average of h(w) sigma(<w, x>).
    pub fn target_value(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (w, &h) in self.nodes.chunks_exact(self.dim).zip(&self.h_values) {
            acc += h * self.activation.value(dot(w, x));
        }
        acc / self.node_count as f64
    }
}

/// The Monte Carlo feature coefficients `u_i = h(w_i) / k` realizing an
/// RKHS target over sampled weights; `|u_i| <= C/k` by construction, and
/// the resulting feature model is an unbiased estimator of the target.
pub fn rkhs_feature_coefficients(target: &RkhsTarget, weights: &Matrix) -> Result<Vec<f64>> {
    if weights.cols() != target.dim {
        return Err(Error::Dimension {
            expected: target.dim,
            got: weights.cols(),
        });
    }
    let bound = 1.0 / (target.dim as f64).sqrt();
    if weights.max_abs() > bound + 1e-12 {
        return Err(Error::InvalidParam(
            "feature weights must lie in the cube [-1/sqrt(d), 1/sqrt(d)]^d".into(),
        ));
    }
    let k = weights.rows();
    Ok((0..k)
        .map(|i| target.h.value(weights.row(i), target.dim) / k as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn tiny_interpolation() {
        // k = m = 1, X = [2], y = [1] -> u = 0.5, residual 0.
        let x = Matrix::from_rows(&[&[2.0]]);
        let fit = fit_dataset_features(&x, &[1.0]).unwrap();
        assert!((fit.coefficients[0] - 0.5).abs() < 1e-14);
        assert!(fit.residual_inf <= 1e-14);
    }

    #[test]
    fn zero_labels_zero_coefficients() {
        let x = Matrix::from_rows(&[&[1.0, 0.2], &[0.3, 0.9], &[0.5, 0.1]]);
        let fit = fit_dataset_features(&x, &[0.0, 0.0]).unwrap();
        assert!(fit.coefficient_inf <= 1e-14);
    }

    /// Independent pseudoinverse route written with Gauss-Jordan, used as
    /// the oracle for the Cholesky path.
    fn pinv_solve(features: &Matrix, y: &[f64]) -> Vec<f64> {
        let m = features.cols();
        let gram = features.gram();
        let mut aug = Matrix::zeros(m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                aug[(i, j)] = gram[(i, j)];
            }
            aug[(i, m + i)] = 1.0;
        }
        for col in 0..m {
            let pivot = (col..m)
                .max_by(|&a, &b| aug[(a, col)].abs().partial_cmp(&aug[(b, col)].abs()).unwrap())
                .unwrap();
            for j in 0..2 * m {
                let t = aug[(col, j)];
                aug[(col, j)] = aug[(pivot, j)];
                aug[(pivot, j)] = t;
            }
            let p = aug[(col, col)];
            for j in 0..2 * m {
                aug[(col, j)] /= p;
            }
            for r in 0..m {
                if r != col {
                    let f = aug[(r, col)];
                    for j in 0..2 * m {
                        aug[(r, j)] -= f * aug[(col, j)];
                    }
                }
            }
        }
        // z = gram^{-1} y, u = X z.
        let z: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| aug[(i, m + j)] * y[j]).sum())
            .collect();
        features.mul_vec(&z).unwrap()
    }

    #[test]
    fn seeded_fit_matches_pseudoinverse_oracle() {
        let (k, m, d) = (50, 8, 8);
        let stream = RngStream::new(14);
        let mut rng = stream.rng();
        // Random unit sphere points and cube feature weights.
        let points: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let mut x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = crate::matrix::norm2(&x);
                x.iter_mut().for_each(|v| *v /= n);
                x
            })
            .collect();
        let bound = 1.0 / (d as f64).sqrt();
        let mut features = Matrix::zeros(k, m);
        for i in 0..k {
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(-bound..=bound)).collect();
            for (j, x) in points.iter().enumerate() {
                features[(i, j)] = dot(&w, x).max(0.0);
            }
        }
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let fit = fit_dataset_features(&features, &y).unwrap();
        assert!(fit.residual_inf <= 1e-8, "residual {}", fit.residual_inf);
        let oracle = pinv_solve(&features, &y);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn coefficient_bound_holds_for_relu_features() {
        let fit_bound = interpolation_coefficient_bound(1.0, 8, 2.0);
        assert!((fit_bound - 32.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn singular_gram_detected() {
        // Identical columns -> singular normal system.
        let x = Matrix::from_rows(&[&[1.0, 1.0], &[0.5, 0.5]]);
        assert!(matches!(
            fit_dataset_features(&x, &[1.0, 1.0]),
            Err(Error::SingularGram { .. })
        ));
    }

    #[test]
    fn rkhs_zero_and_const_coefficients() {
        let weights = Matrix::from_rows(&[&[0.1, -0.2], &[0.3, 0.0]]);
        let zero = RkhsTarget {
            dim: 2,
            h: CoefficientFn::Zero,
            activation: Activation::Relu,
        };
        assert_eq!(rkhs_feature_coefficients(&zero, &weights).unwrap(), vec![0.0, 0.0]);
        let constant = RkhsTarget {
            dim: 2,
            h: CoefficientFn::Const { c: 3.0 },
            activation: Activation::Relu,
        };
        assert_eq!(
            rkhs_feature_coefficients(&constant, &weights).unwrap(),
            vec![1.5, 1.5]
        );
    }

    #[test]
    fn rkhs_coefficients_bounded_by_c_over_k() {
        use rand::Rng;
        let target = RkhsTarget {
            dim: 2,
            h: CoefficientFn::SignW1 { c: 2.0 },
            activation: Activation::Relu,
        };
        let mut rng = RngStream::new(6).rng();
        let bound = 1.0 / (2.0f64).sqrt();
        let mut w = Matrix::zeros(100, 2);
        for v in w.data_mut() {
            *v = rng.random_range(-bound..=bound);
        }
        let u = rkhs_feature_coefficients(&target, &w).unwrap();
        assert!(u.iter().all(|v| v.abs() <= 2.0 / 100.0 + 1e-15));
    }

    #[test]
    fn quadrature_linear_activation_closed_form() {
        // Identity activation and h = C sign(w1):
        // f(x) = C * E[sign(w1) <w,x>] = C * x1 * E[|w1|] = C * x1 /(2 sqrt(d)).
        let d = 2;
        let target = RkhsTarget {
            dim: d,
            h: CoefficientFn::SignW1 { c: 1.0 },
            activation: Activation::Identity,
        };
        let quad = CubeQuadrature::new(&target, 1_000_000);
        for x in [[0.4, 0.3], [1.0, 0.0], [-0.6, 0.6]] {
            let expected = x[0] / (2.0 * (d as f64).sqrt());
            let got = quad.target_value(&x);
            assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
        }
    }
}
