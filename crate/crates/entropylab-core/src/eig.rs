//! Dense symmetric eigensolver (cyclic Jacobi).
//!
//! Used for the exact p = 2 sparse-operator norm, where the answer is the
//! square root of the largest eigenvalue of a conjugated Gram matrix. Jacobi
//! is slow but simple, needs no external code, and its accuracy on small
//! symmetric matrices is hard to beat; dense sizes here stay in the hundreds.

use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;

const MAX_SWEEPS: usize = 64;

/// Largest eigenvalue of a symmetric matrix with an eigenvector attaining it.
/// `a` is the n x n matrix, row-major; the input is symmetrized by averaging
/// before iterating, so tiny asymmetries from accumulation order are ignored.
pub fn largest_eigenpair(n: usize, a: &[f64]) -> Result<(f64, Vec<f64>)> {
    if n == 0 || a.len() != n * n {
        return Err(Error::ShapeMismatch {
            expected: (n as u32, n as u32),
            got: (a.len() as u32, 1),
        });
    }
    if let Some((i, &v)) = a.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidValue { index: i, value: v });
    }
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    // Eigenvector accumulator, starts as identity.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob: f64 = m.iter().map(|x| x * x).sum::<f64>();
    let stop = frob * 1e-28;

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[i * n + j] * m[i * n + j];
            }
        }
        if 2.0 * off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
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

    let mut best = 0;
    for i in 1..n {
        if m[i * n + i] > m[best * n + best] {
            best = i;
        }
    }
    let lambda = m[best * n + best];
    let vec_out: Vec<f64> = (0..n).map(|k| v[k * n + best]).collect();
    Ok((lambda, vec_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn two_by_two_by_hand() {
        let (l, v) = largest_eigenpair(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!((l - 3.0).abs() < 1e-12);
        assert!((v[0].abs() - v[1].abs()).abs() < 1e-12);
        let norm = libm::sqrt(v[0] * v[0] + v[1] * v[1]);
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, 7.0, 0.0, 0.0, 0.0, 5.0];
        let (l, v) = largest_eigenpair(3, &a).unwrap();
        assert!((l - 7.0).abs() < 1e-12);
        assert!((v[1].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenpair_residual_on_random_gram() {
        let mut rng = Rng::new(0xE16);
        for n in [1usize, 2, 5, 16, 40] {
            let b: alloc::vec::Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
            // Gram matrix B^T B, symmetric PSD.
            let mut g = alloc::vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    g[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
                }
            }
            let (l, v) = largest_eigenpair(n, &g).unwrap();
            let gv = matvec(n, &g, &v);
            let scale = l.abs().max(1.0);
            for i in 0..n {
                assert!(
                    (gv[i] - l * v[i]).abs() < 1e-8 * scale,
                    "residual too large at n={n}"
                );
            }
            // lambda_max dominates every Rayleigh quotient.
            for _ in 0..10 {
                let x: alloc::vec::Vec<f64> = (0..n).map(|_| rng.normal()).collect();
                let gx = matvec(n, &g, &x);
                let num: f64 = x.iter().zip(&gx).map(|(a, b)| a * b).sum();
                let den: f64 = x.iter().map(|a| a * a).sum();
                assert!(num / den <= l * (1.0 + 1e-10) + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(largest_eigenpair(0, &[]).is_err());
        assert!(largest_eigenpair(2, &[1.0, 2.0, 3.0]).is_err());
        assert!(largest_eigenpair(1, &[f64::NAN]).is_err());
    }
}
