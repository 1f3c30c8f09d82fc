//! The small amount of numerical linear algebra the constructions need:
//! spectral norms by power iteration, symmetric eigenvalues by cyclic
//! Jacobi, and SPD solves by Cholesky with iterative refinement. Matrices
//! here are small (m <= 500), so simple robust algorithms beat pulling in
//! an eigensolver dependency.

use crate::error::{Error, Result};
use crate::matrix::{norm2, Matrix};

/// Largest singular value of `a`, by power iteration on A^T A.
///
/// Runs 100 iterations or until the Rayleigh estimate changes by less than
/// 1e-10 relative.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    // Deterministic, generic start vector: unequal entries avoid starting
    // orthogonal to the top singular direction for structured matrices.
    let n = a.cols();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0) * 1e-3).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut sigma = 0.0f64;
    for _ in 0..100 {
        let av = a.mul_vec(&v).expect("shape checked");
        let mut w = a.mul_vec_transposed(&av).expect("shape checked");
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        let next = norm2(&a.mul_vec(&w).expect("shape checked"));
        v = w;
        if (next - sigma).abs() <= 1e-10 * next.max(1.0) {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Spectral norm via the full symmetric spectrum of A^T A. Near machine
/// precision; used where a rescale must land within 1e-12 of its bound.
/// Only sensible for small matrices.
pub fn spectral_norm_precise(a: &Matrix) -> f64 {
    if a.rows() == 0 || a.cols() == 0 || a.max_abs() == 0.0 {
        return 0.0;
    }
    let eig = symmetric_eigenvalues(&a.gram()).expect("gram is symmetric");
    eig.last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

fn max_asymmetry(h: &Matrix) -> f64 {
    let n = h.rows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi
/// rotations. Accurate to ~1e-12 relative for the sizes used here.
pub fn symmetric_eigenvalues(h: &Matrix) -> Result<Vec<f64>> {
    if h.rows() != h.cols() {
        return Err(Error::Shape {
            expected_rows: h.rows(),
            expected_cols: h.rows(),
            rows: h.rows(),
            cols: h.cols(),
        });
    }
    let asym = max_asymmetry(h);
    let scale = h.max_abs().max(1e-300);
    if asym > 1e-12 * scale.max(1.0) {
        return Err(Error::NonSymmetric { max_asymmetry: asym });
    }

    let n = h.rows();
    let mut a = h.clone();
    // Work on the symmetrized copy so rotations stay exactly symmetric.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[(i, j)].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eig)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(h: &Matrix) -> Result<f64> {
    Ok(symmetric_eigenvalues(h)?[0])
}

/// Cholesky factor L (lower) of an SPD matrix, or the offending pivot.
fn cholesky(a: &Matrix) -> std::result::Result<Matrix, f64> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(sum);
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

fn cholesky_substitute(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    x
}

/// Solve A x = b for symmetric positive definite A.
///
/// Singularity tolerance is relative, `1e-10 * trace / n`; one step of
/// iterative refinement keeps residuals near machine precision even for
/// moderately conditioned systems.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if b.len() != n {
        return Err(Error::Dimension { expected: n, got: b.len() });
    }
    let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
    let tol = 1e-10 * trace / n.max(1) as f64;

    let l = match cholesky(a) {
        Ok(l) => l,
        Err(_) => {
            let lambda_min = min_symmetric_eigenvalue(a).unwrap_or(f64::NEG_INFINITY);
            return Err(Error::SingularGram { lambda_min });
        }
    };
    let min_pivot = (0..n).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot <= tol {
        let lambda_min = min_symmetric_eigenvalue(a)?;
        return Err(Error::SingularGram { lambda_min });
    }

    let mut x = cholesky_substitute(&l, b);
    for _ in 0..2 {
        let ax = a.mul_vec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        if r.iter().all(|v| v.abs() <= 1e-14 * trace.max(1.0)) {
            break;
        }
        let dx = cholesky_substitute(&l, &r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
    }
    Ok(x)
}
