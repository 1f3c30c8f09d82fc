//! Monte Carlo estimation of the feature kernel matrix
//! `H[i][j] = E_w[sigma(<w,x_i>) sigma(<w,x_j>)]` with w uniform on the
//! cube [-1/sqrt(d), 1/sqrt(d)]^d, and its minimum eigenvalue.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::linalg::min_symmetric_eigenvalue;
use crate::matrix::{dot, norm2, Matrix};
use crate::rng::RngStream;

/// Estimated kernel matrix with its provenance and minimum eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix {
    pub h: Matrix,
    pub mc_samples: usize,
    pub lambda_min: f64,
}

/// Fixed chunk size so the chunk-to-stream assignment (and therefore the
/// result, bit for bit) does not depend on the worker count.
const CHUNK: usize = 1 << 14;

/// Estimate H over `points` with `mc_samples` feature draws.
///
/// Duplicated points produce exactly identical rows (every sample
/// evaluates both points with the same w), so rank deficiency survives
/// Monte Carlo noise.
pub fn kernel_matrix(
    points: &[Vec<f64>],
    activation: Activation,
    mc_samples: usize,
    stream: RngStream,
) -> Result<KernelMatrix> {
    let m = points.len();
    if m == 0 || mc_samples == 0 {
        return Err(Error::InvalidParam("need at least one point and one sample".into()));
    }
    let d = points[0].len();
    for x in points {
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        if norm2(x) > 1.0 + 1e-9 {
            return Err(Error::InvalidParam(format!(
                "point norm {} exceeds the unit ball",
                norm2(x)
            )));
        }
    }

    let bound = 1.0 / (d as f64).sqrt();
    let chunks = mc_samples.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks as u64)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream.derive(chunk).rng();
            let count = CHUNK.min(mc_samples - chunk as usize * CHUNK);
            let mut acc = vec![0.0f64; m * (m + 1) / 2];
            let mut w = vec![0.0f64; d];
            let mut z = vec![0.0f64; m];
            for _ in 0..count {
                for wi in &mut w {
                    *wi = rng.random_range(-bound..=bound);
                }
                for (zi, x) in z.iter_mut().zip(points) {
                    *zi = activation.value(dot(&w, x));
                }
                let mut t = 0;
                for i in 0..m {
                    let zi = z[i];
                    for &zj in &z[i..] {
                        acc[t] += zi * zj;
                        t += 1;
                    }
                }
            }
            acc
        })
        .collect();

    // Sequential reduction in chunk order keeps the sum deterministic.
    let mut upper = vec![0.0f64; m * (m + 1) / 2];
    for part in &partials {
        for (a, b) in upper.iter_mut().zip(part) {
            *a += b;
        }
    }

    let scale = 1.0 / mc_samples as f64;
    let mut h = Matrix::zeros(m, m);
    let mut t = 0;
    for i in 0..m {
        for j in i..m {
            let v = upper[t] * scale;
            h[(i, j)] = v;
            h[(j, i)] = v;
            t += 1;
        }
    }
    let lambda_min = min_symmetric_eigenvalue(&h)?;
    Ok(KernelMatrix {
        h,
        mc_samples,
        lambda_min,
    })
}

/// Smallest eigenvalue of a symmetric matrix (full symmetric
/// eigendecomposition; the matrices here stay small).
pub fn min_eigenvalue(h: &Matrix) -> Result<f64> {
    min_symmetric_eigenvalue(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_point_relu_kernel_is_zero() {
        let k = kernel_matrix(&[vec![0.0, 0.0]], Activation::Relu, 1000, RngStream::new(0)).unwrap();
        assert_eq!(k.h[(0, 0)], 0.0);
        assert_eq!(k.lambda_min, 0.0);
    }

    #[test]
    fn duplicated_points_are_rank_deficient() {
        let x = vec![0.6, 0.3];
        let k = kernel_matrix(
            &[x.clone(), x.clone(), vec![0.1, -0.5]],
            Activation::Relu,
            50_000,
            RngStream::new(1),
        )
        .unwrap();
        assert_eq!(k.h[(0, 1)], k.h[(0, 0)]);
        assert_eq!(k.h[(1, 2)], k.h[(0, 2)]);
        assert!(k.lambda_min.abs() < 1e-12, "lambda {}", k.lambda_min);
    }

    #[test]
    fn identity_activation_matches_closed_form() {
        // With linear features H = (1/(3d)) <x_i, x_j> exactly.
        let pts = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.8, 0.0], vec![0.5, 0.5, 0.0]];
        let d = 3.0;
        let k = kernel_matrix(&pts, Activation::Identity, 2_000_000, RngStream::new(2)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = dot(&pts[i], &pts[j]) / (3.0 * d);
                assert!(
                    (k.h[(i, j)] - expected).abs() < 3e-4,
                    "H[{i}][{j}] = {} vs {expected}",
                    k.h[(i, j)]
                );
            }
        }
    }

    #[test]
    fn two_independent_estimates_agree() {
        // Second, independently seeded estimate as the oracle; agreement
        // within 3 * (sample std / sqrt(N)) entrywise.
        let pts = vec![vec![0.9, 0.1], vec![-0.3, 0.7], vec![0.2, -0.6]];
        let n1 = 1_000_000;
        let a = kernel_matrix(&pts, Activation::Relu, n1, RngStream::new(3)).unwrap();
        let b = kernel_matrix(&pts, Activation::Relu, 4_000_000, RngStream::new(991)).unwrap();

        // Entrywise standard error of the mixed moment, measured directly.
        let mut rng = RngStream::new(555).rng();
        let bound = 1.0 / (2.0f64).sqrt();
        let mut sums = [0.0f64; 9];
        let mut sq = [0.0f64; 9];
        let probes = 200_000;
        for _ in 0..probes {
            let w = [rng.random_range(-bound..=bound), rng.random_range(-bound..=bound)];
            let z: Vec<f64> = pts.iter().map(|x| dot(&w, x).max(0.0)).collect();
            for i in 0..3 {
                for j in 0..3 {
                    let v = z[i] * z[j];
                    sums[i * 3 + j] += v;
                    sq[i * 3 + j] += v * v;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                let mean = sums[i * 3 + j] / probes as f64;
                let var = sq[i * 3 + j] / probes as f64 - mean * mean;
                let se = (var / n1 as f64).sqrt();
                let gap = (a.h[(i, j)] - b.h[(i, j)]).abs();
                // Allow the oracle's own (smaller) noise on top of 3 se.
                assert!(gap <= 3.0 * se + 3.0 * se / 2.0, "gap {gap} vs se {se}");
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let pts = vec![vec![0.9, 0.1], vec![-0.3, 0.7]];
        let base = kernel_matrix(&pts, Activation::Relu, 100_000, RngStream::new(4)).unwrap();
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let k = pool
                .install(|| kernel_matrix(&pts, Activation::Relu, 100_000, RngStream::new(4)))
                .unwrap();
            assert_eq!(k, base);
        }
    }

    #[test]
    fn rejects_points_outside_ball() {
        let err = kernel_matrix(&[vec![2.0, 0.0]], Activation::Relu, 10, RngStream::new(0));
        assert!(err.is_err());
    }
}
