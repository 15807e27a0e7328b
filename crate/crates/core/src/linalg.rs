//! Small dense symmetric eigenproblems (cyclic Jacobi). Metric blocks are at
//! most `U × U`, so O(n³) per sweep is irrelevant.

use alloc::vec;
use alloc::vec::Vec;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition of a symmetric row-major `n × n` matrix. Returns
/// `(eigenvalues, eigenvectors)` with eigenvector `k` stored in column `k`.
pub(crate) fn symmetric_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i * n + i]).collect(), v)
}

/// `V · diag(f(λ)) · Vᵀ · b`.
pub(crate) fn spectral_apply(values: &[f64], vectors: &[f64], b: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = values.len();
    let mut coeffs = vec![0.0; n];
    for k in 0..n {
        let mut dot = 0.0;
        for i in 0..n {
            dot += vectors[i * n + k] * b[i];
        }
        coeffs[k] = f(values[k]) * dot;
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            out[i] += vectors[i * n + k] * coeffs[k];
        }
    }
    out
}
