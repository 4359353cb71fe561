//! Measurement operators `Φ` and noise models for the sensing step `y = Φs + z`.
//!
//! The default ensemble is a sign-randomized, row-subsampled Walsh–Hadamard
//! transform: `Φ = S·H·D` with `D` a random ±1 diagonal, `H` orthonormal and
//! `S` selecting `M` distinct rows uniformly. When `N` is not a power of two
//! `H` is the direct sum of orthonormal Hadamard blocks following the binary
//! expansion of `N` (largest block first), so `ΦΦᵀ = I_M` holds for every `N`.

use ndarray::{Array1, Array2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Serializable description of a measurement ensemble; rebuilding from it is
/// deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnsembleSpec {
    SubsampledHadamard { seed: u64, m: usize, n: usize },
    /// Dense i.i.d. Gaussian rows scaled by `1/√N`.
    Gaussian { seed: u64, m: usize, n: usize },
}

impl EnsembleSpec {
    pub fn m(&self) -> usize {
        match *self {
            EnsembleSpec::SubsampledHadamard { m, .. } | EnsembleSpec::Gaussian { m, .. } => m,
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            EnsembleSpec::SubsampledHadamard { n, .. } | EnsembleSpec::Gaussian { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone)]
enum Kind<T> {
    Hadamard {
        /// `true` flips the sign of the pixel.
        flips: Vec<bool>,
        rows: Vec<usize>,
        /// `(start, len)` of each power-of-two block.
        blocks: Vec<(usize, usize)>,
    },
    Dense(Array2<T>),
}

/// A linear measurement operator `Φ: ℝᴺ → ℝᴹ` with its adjoint.
#[derive(Debug, Clone)]
pub struct MeasurementOperator<T> {
    kind: Kind<T>,
    spec: Option<EnsembleSpec>,
    m: usize,
    n: usize,
}

/// In-place unnormalized fast Walsh–Hadamard transform; `len` must be a power of two.
fn fwht<T: Real>(a: &mut [T]) {
    let len = a.len();
    let mut h = 1;
    while h < len {
        for i in (0..len).step_by(2 * h) {
            for j in i..i + h {
                let x = a[j];
                let y = a[j + h];
                a[j] = x + y;
                a[j + h] = x - y;
            }
        }
        h *= 2;
    }
}

fn power_of_two_blocks(n: usize) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for bit in (0..usize::BITS).rev() {
        let len = 1usize << bit;
        if n & len != 0 {
            blocks.push((start, len));
            start += len;
        }
    }
    blocks
}

impl<T: Real> MeasurementOperator<T> {
    pub fn from_spec(spec: EnsembleSpec) -> Result<Self> {
        let (m, n) = (spec.m(), spec.n());
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < M <= N, got M = {m}, N = {n}"
            )));
        }
        let kind = match spec {
            EnsembleSpec::SubsampledHadamard { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let flips = (0..n).map(|_| rng.gen::<bool>()).collect();
                let mut rows = index::sample(&mut rng, n, m).into_vec();
                rows.sort_unstable();
                Kind::Hadamard {
                    flips,
                    rows,
                    blocks: power_of_two_blocks(n),
                }
            }
            EnsembleSpec::Gaussian { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / (n as f64).sqrt();
                Kind::Dense(Array2::from_shape_simple_fn((m, n), || {
                    let v: f64 = StandardNormal.sample(&mut rng);
                    T::lit(v * scale)
                }))
            }
        };
        Ok(Self {
            kind,
            spec: Some(spec),
            m,
            n,
        })
    }

    /// Seeded sign-randomized subsampled Hadamard ensemble.
    pub fn subsampled_hadamard(m: usize, n: usize, seed: u64) -> Result<Self> {
        Self::from_spec(EnsembleSpec::SubsampledHadamard { seed, m, n })
    }

    /// An explicit `M x N` matrix.
    pub fn dense(matrix: Array2<T>) -> Result<Self> {
        let (m, n) = matrix.dim();
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < M <= N, got M = {m}, N = {n}"
            )));
        }
        Ok(Self {
            kind: Kind::Dense(matrix),
            spec: None,
            m,
            n,
        })
    }

    /// The reproducible description, if the operator was built from one.
    pub fn spec(&self) -> Option<EnsembleSpec> {
        self.spec
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether the rows are orthonormal (`ΦΦᵀ = I`).
    pub fn is_orthonormal(&self) -> bool {
        matches!(self.kind, Kind::Hadamard { .. })
    }

    /// `Φs`.
    pub fn measure(&self, s: &Array1<T>) -> Result<Array1<T>> {
        if s.len() != self.n {
            return Err(Error::dim(self.n, s.len()));
        }
        match &self.kind {
            Kind::Dense(a) => Ok(a.dot(s)),
            Kind::Hadamard {
                flips,
                rows,
                blocks,
            } => {
                let mut buf: Vec<T> = s
                    .iter()
                    .zip(flips)
                    .map(|(&v, &f)| if f { -v } else { v })
                    .collect();
                for &(start, len) in blocks {
                    let block = &mut buf[start..start + len];
                    fwht(block);
                    let scale = T::one() / T::lit(len as f64).sqrt();
                    block.iter_mut().for_each(|v| *v *= scale);
                }
                Ok(rows.iter().map(|&r| buf[r]).collect())
            }
        }
    }

    /// `Φᵀv`.
    pub fn measure_adjoint(&self, v: &Array1<T>) -> Result<Array1<T>> {
        if v.len() != self.m {
            return Err(Error::dim(self.m, v.len()));
        }
        match &self.kind {
            Kind::Dense(a) => Ok(a.t().dot(v)),
            Kind::Hadamard {
                flips,
                rows,
                blocks,
            } => {
                let mut buf = vec![T::zero(); self.n];
                for (&r, &val) in rows.iter().zip(v.iter()) {
                    buf[r] = val;
                }
                // each Hadamard block is symmetric, so the adjoint reuses the transform
                for &(start, len) in blocks {
                    let block = &mut buf[start..start + len];
                    fwht(block);
                    let scale = T::one() / T::lit(len as f64).sqrt();
                    block.iter_mut().for_each(|v| *v *= scale);
                }
                Ok(buf
                    .into_iter()
                    .zip(flips)
                    .map(|(v, &f)| if f { -v } else { v })
                    .collect())
            }
        }
    }
}

/// Measurements `y` together with the operator that produced them.
#[derive(Debug, Clone)]
pub struct MeasurementSet<T> {
    pub y: Array1<T>,
    pub op: MeasurementOperator<T>,
    /// Noise-free `Φs`, kept for evaluation.
    pub clean: Option<Array1<T>>,
}

impl<T: Real> MeasurementSet<T> {
    pub fn new(y: Array1<T>, op: MeasurementOperator<T>) -> Result<Self> {
        if y.len() != op.m() {
            return Err(Error::dim(op.m(), y.len()));
        }
        Ok(Self { y, op, clean: None })
    }

    /// Noise-free measurements of `s`.
    pub fn sense(op: MeasurementOperator<T>, s: &Array1<T>) -> Result<Self> {
        let y = op.measure(s)?;
        Ok(Self {
            clean: Some(y.clone()),
            y,
            op,
        })
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }
}

/// `y + z` with `z` i.i.d. `N(0, σ²)`.
pub fn add_gaussian_noise<T: Real>(y: &Array1<T>, sigma: T, seed: u64) -> Result<Array1<T>> {
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise standard deviation must be finite and non-negative, got {sigma}"
        )));
    }
    if sigma == T::zero() {
        return Ok(y.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(y.mapv(|v| {
        let z: f64 = StandardNormal.sample(&mut rng);
        v + sigma * T::lit(z)
    }))
}

/// Replaces `⌊d·M⌋` distinct, uniformly chosen entries by `±1.25·max|y|`
/// (fair-coin signs, magnitude taken before corruption). Returns the corrupted
/// vector and the sorted corrupted indices.
pub fn add_impulsive_noise<T: Real>(
    y: &Array1<T>,
    fraction: f64,
    seed: u64,
) -> Result<(Array1<T>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "corrupted fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let m = y.len();
    // tolerate representation error such as 0.1 * 30 = 3.0000000000000004
    let count = ((fraction * m as f64) + 1e-9).floor().min(m as f64) as usize;
    let peak = y.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let magnitude = T::lit(1.25) * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, m, count).into_vec();
    picked.sort_unstable();
    let mut out = y.clone();
    for &i in &picked {
        out[i] = if rng.gen::<bool>() { magnitude } else { -magnitude };
    }
    Ok((out, picked))
}
