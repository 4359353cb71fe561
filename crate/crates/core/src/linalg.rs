//! Dense helpers for the small `n x n` systems the penalties need.

use ndarray::{Array2, ArrayView2};

use crate::Real;

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// when a pivot is not strictly positive.
pub fn cholesky<T: Real>(a: ArrayView2<'_, T>) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for p in 0..j {
            d -= l[[j, p]] * l[[j, p]];
        }
        if !(d > T::zero()) {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for p in 0..j {
                v -= l[[i, p]] * l[[j, p]];
            }
            l[[i, j]] = v / d;
        }
    }
    Some(l)
}

/// Solves `(L Lᵀ) Y = B` given the lower Cholesky factor `L`.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: ArrayView2<'_, T>) -> Array2<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for col in 0..y.ncols() {
        // forward: L z = b
        for i in 0..n {
            let mut v = y[[i, col]];
            for p in 0..i {
                v -= l[[i, p]] * y[[p, col]];
            }
            y[[i, col]] = v / l[[i, i]];
        }
        // backward: Lᵀ x = z
        for i in (0..n).rev() {
            let mut v = y[[i, col]];
            for p in (i + 1)..n {
                v -= l[[p, i]] * y[[p, col]];
            }
            y[[i, col]] = v / l[[i, i]];
        }
    }
    y
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Real>(a: ArrayView2<'_, T>) -> Vec<T> {
    let n = a.nrows();
    let mut m = a.to_owned();
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale: T = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| m[[i, i]]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}
