//! Fixed finite-difference operator used by `baseline-tv`.
//!
//! For a `p x p` patch there are `k = 2n` atoms: the horizontal and the
//! vertical first difference at every patch pixel, wrapping around inside the
//! patch, each scaled by `1/√2` to unit norm. Every atom is orthogonal to the
//! constant patch, so the operator has rank `n − 1`, which is exactly the
//! dimension of the mean-centered patch space.

use abcs::{OperatorPoint, Result};
use ndarray::Array2;

/// Label written into results metadata.
pub const TV_OPERATOR_NAME: &str = "circular-first-differences";

/// `X = Ωᵀ` (`n x 2n`); atom `2j` is horizontal and `2j + 1` vertical at patch index `j`.
pub fn finite_difference_matrix(side: usize) -> Array2<f64> {
    let n = side * side;
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let mut x = Array2::<f64>::zeros((n, 2 * n));
    for dc in 0..side {
        for dr in 0..side {
            let j = dc * side + dr;
            let right = ((dc + 1) % side) * side + dr;
            let below = dc * side + (dr + 1) % side;
            x[[right, 2 * j]] += w;
            x[[j, 2 * j]] -= w;
            x[[below, 2 * j + 1]] += w;
            x[[j, 2 * j + 1]] -= w;
        }
    }
    x
}

pub fn finite_difference_operator(side: usize) -> Result<OperatorPoint<f64>> {
    if side < 2 {
        return Err(abcs::Error::InvalidArgument(format!(
            "finite differences need a patch side of at least 2, got {side}"
        )));
    }
    OperatorPoint::fixed(finite_difference_matrix(side))
}
