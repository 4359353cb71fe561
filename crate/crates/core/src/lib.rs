//! Blind compressive sensing with a co-sparse analysis operator learned during
//! reconstruction.
//!
//! The image `s` and the transposed operator `X = Ωᵀ` are optimized jointly by
//! a geometric conjugate-gradient method on `OB(n, k) × ℝᴺ`. All numerical code
//! is generic over [`Real`] (`f32` or `f64`); the aliases below fix the scalar.

// comparisons of the form `!(a < b)` also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod imagegrid;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod objective;
mod scalar;
pub mod sensing;
pub mod solver;

pub use error::{Error, Result};
pub use imagegrid::{extract_centered_patch, patch_centers, scatter_add, ImageVector, PatchGeometry};
pub use manifold::{product_inner, random_operator_point, OperatorPoint, ProductTangent, TangentMatrix};
pub use metrics::{mssim, psnr};
pub use objective::{AbcsConfig, CostAndGradient, CostTerms, DataTerm, Evaluation, Objective};
pub use scalar::Real;
pub use sensing::{add_gaussian_noise, add_impulsive_noise, EnsembleSpec, MeasurementOperator, MeasurementSet};
pub use solver::{
    armijo_backtrack, beta_hybrid, run, LineSearchParams, SolverOptions, SolverOutput, SolverState, StoppingRule,
    Termination, TraceRow,
};

pub type OperatorPoint64 = OperatorPoint<f64>;
pub type OperatorPoint32 = OperatorPoint<f32>;
pub type TangentMatrix64 = TangentMatrix<f64>;
pub type ProductTangent64 = ProductTangent<f64>;
pub type ImageVector64 = ImageVector<f64>;
pub type ImageVector32 = ImageVector<f32>;
pub type MeasurementSet64 = MeasurementSet<f64>;
pub type MeasurementOperator64 = MeasurementOperator<f64>;
pub type AbcsConfig64 = AbcsConfig<f64>;
pub type AbcsConfig32 = AbcsConfig<f32>;
pub type SolverState64 = SolverState<f64>;
pub type SolverOutput64 = SolverOutput<f64>;
pub type SolverOptions64 = SolverOptions<f64>;
