//! The joint reconstruction / operator-learning cost and its gradients.
//!
//! ```text
//! f(X, s) = 1/(2B) Σ_b g(Ω M P_b s)²  +  η p(Φs − y)  +  γ h(Ω)  +  κ r(Ω)
//! ```
//!
//! with `Ω = Xᵀ`, the log-sparsity measure `g(w) = Σ_j ln(1 + c w_j²)`, the
//! rank penalty `h(Ω) = −ln det(ΩᵀΩ / k) / (n ln n)` and the coherence barrier
//! `r(Ω) = −Σ_{i<j} ln(1 − (ω_iᵀω_j)²)`.
//!
//! The patch sum is evaluated in fixed-size chunks whose partial results are
//! always combined in chunk order, so results are bitwise reproducible whether
//! or not chunks run on several threads.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagegrid::{extract_into, patch_centers, scatter_into, ImageVector, PatchGeometry};
use crate::linalg;
use crate::manifold::{OperatorPoint, TangentMatrix};
use crate::sensing::MeasurementSet;
use crate::Real;

const CHUNK: usize = 1024;
/// Pairs of atoms closer than this to parallel violate the coherence barrier.
const BARRIER_MARGIN: f64 = 1e-12;
/// Largest admissible condition number of `ΩᵀΩ`.
const MAX_GRAM_CONDITION: f64 = 1e12;

/// Data-fidelity model `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataTerm {
    /// `‖·‖₂²`, for Gaussian measurement noise.
    SquaredL2,
    /// The sparsity measure `g`, for sparse outliers.
    SparseG,
}

/// Whether patch chunks are evaluated on the rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evaluation {
    #[default]
    Sequential,
    Parallel,
}

/// Scalar weights of the cost.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcsConfig<T> {
    /// Rank penalty weight `γ`.
    pub gamma: T,
    /// Coherence penalty weight `κ`.
    pub kappa: T,
    /// Data weight `η`.
    pub eta: T,
    /// Size-independent data weight `η̂` that `eta` was derived from, if any.
    pub eta_hat: Option<T>,
    /// Sparsity sharpness `c`.
    pub c: T,
    pub data_term: DataTerm,
    pub evaluation: Evaluation,
}

impl<T: Real> AbcsConfig<T> {
    /// `γ = 20`, `κ = 1000`, `c = 10⁴`, with `η` derived from `η̂`.
    pub fn with_eta_hat(eta_hat: T, n: usize, k: usize, num_pixels: usize, data_term: DataTerm) -> Self {
        Self {
            gamma: T::lit(20.0),
            kappa: T::lit(1000.0),
            eta: Self::eta_from_hat(eta_hat, n, k, num_pixels),
            eta_hat: Some(eta_hat),
            c: T::lit(1e4),
            data_term,
            evaluation: Evaluation::Sequential,
        }
    }

    /// Image-size normalization `L = √N / 256`.
    pub fn size_normalization(num_pixels: usize) -> T {
        T::lit((num_pixels as f64).sqrt() / 256.0)
    }

    /// `η = η̂ (k / (L n))²`.
    pub fn eta_from_hat(eta_hat: T, n: usize, k: usize, num_pixels: usize) -> T {
        let l = Self::size_normalization(num_pixels);
        let ratio = T::lit(k as f64) / (l * T::lit(n as f64));
        eta_hat * ratio * ratio
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |name: &str, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        finite_nonneg("gamma", self.gamma)?;
        finite_nonneg("kappa", self.kappa)?;
        finite_nonneg("eta", self.eta)?;
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }
}

/// `g(w) = Σ ln(1 + c w_j²)` and its gradient `2c w_j / (1 + c w_j²)`.
pub fn sparsity_g<T: Real>(w: ArrayView1<'_, T>, c: T) -> (T, Array1<T>) {
    let two_c = c + c;
    let mut value = T::zero();
    let grad = w.mapv(|v| {
        let q = c * v * v;
        value += q.ln_1p();
        two_c * v / (T::one() + q)
    });
    (value, grad)
}

fn sparsity_value<T: Real>(w: ArrayView1<'_, T>, c: T) -> T {
    w.iter().fold(T::zero(), |acc, &v| acc + (c * v * v).ln_1p())
}

/// Data fidelity `p(residual)` and its gradient with respect to the residual.
pub fn data_term_p<T: Real>(residual: ArrayView1<'_, T>, kind: DataTerm, c: T) -> (T, Array1<T>) {
    match kind {
        DataTerm::SquaredL2 => (residual.dot(&residual), residual.mapv(|v| v + v)),
        DataTerm::SparseG => sparsity_g(residual, c),
    }
}

fn data_value<T: Real>(residual: ArrayView1<'_, T>, kind: DataTerm, c: T) -> T {
    match kind {
        DataTerm::SquaredL2 => residual.dot(&residual),
        DataTerm::SparseG => sparsity_value(residual, c),
    }
}

fn gram_eigen_check<T: Real>(gram: &Array2<T>) -> Result<()> {
    let ev = linalg::symmetric_eigenvalues(gram.view());
    let lo = ev.first().copied().unwrap_or(T::zero());
    let hi = ev.last().copied().unwrap_or(T::zero());
    if !(lo > T::zero()) || hi / lo > T::lit(MAX_GRAM_CONDITION) {
        return Err(Error::Singular {
            smallest_eigenvalue: lo.to_f64_lossy(),
        });
    }
    Ok(())
}

fn rank_penalty_impl<T: Real>(x: &Array2<T>, want_grad: bool) -> Result<(T, Option<Array2<T>>)> {
    let (n, k) = x.dim();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "rank penalty needs n >= 2 (n ln n must be positive)".into(),
        ));
    }
    let gram = x.dot(&x.t());
    gram_eigen_check(&gram)?;
    let l = linalg::cholesky(gram.view()).ok_or(Error::Singular {
        smallest_eigenvalue: 0.0,
    })?;
    let nf = T::lit(n as f64);
    let scale = T::one() / (nf * nf.ln());
    let log_det: T = (0..n).map(|i| l[[i, i]].ln()).sum::<T>() * T::lit(2.0);
    let value = -scale * (log_det - nf * T::lit(k as f64).ln());
    let grad = want_grad.then(|| {
        let y = linalg::cholesky_solve(&l, x.view());
        y * (-(scale + scale))
    });
    Ok((value, grad))
}

/// `h(Ω) = −ln det(ΩᵀΩ / k) / (n ln n)` and its gradient with respect to `X = Ωᵀ`,
/// `−2 (XXᵀ)⁻¹ X / (n ln n)`.
pub fn rank_penalty_h<T: Real>(x: &OperatorPoint<T>) -> Result<(T, Array2<T>)> {
    let (v, g) = rank_penalty_impl(x.matrix(), true)?;
    Ok((v, g.expect("gradient requested")))
}

fn coherence_impl<T: Real>(x: &Array2<T>, want_grad: bool) -> Result<(T, Option<Array2<T>>)> {
    let k = x.ncols();
    let gram = x.t().dot(x);
    let limit = T::one() - T::lit(BARRIER_MARGIN);
    let mut value = T::zero();
    let mut weights = want_grad.then(|| Array2::<T>::zeros((k, k)));
    for i in 0..k {
        for j in (i + 1)..k {
            let ip = gram[[i, j]];
            if !(ip.abs() < limit) {
                return Err(Error::BarrierViolation {
                    i,
                    j,
                    inner: ip.to_f64_lossy(),
                });
            }
            let q = T::one() - ip * ip;
            value -= (-(ip * ip)).ln_1p();
            if let Some(wts) = weights.as_mut() {
                let d = (ip + ip) / q;
                wts[[i, j]] = d;
                wts[[j, i]] = d;
            }
        }
    }
    Ok((value, weights.map(|w| x.dot(&w))))
}

/// `r(Ω) = −Σ_{i<j} ln(1 − (ω_iᵀω_j)²)` and its gradient with respect to `X`,
/// whose column `i` is `Σ_{j≠i} 2(ω_iᵀω_j)/(1 − (ω_iᵀω_j)²) ω_j`.
pub fn coherence_penalty_r<T: Real>(x: &OperatorPoint<T>) -> Result<(T, Array2<T>)> {
    let (v, g) = coherence_impl(x.matrix(), true)?;
    Ok((v, g.expect("gradient requested")))
}

/// The four weighted terms of the cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostTerms<T> {
    pub sparsity: T,
    pub data: T,
    pub rank: T,
    pub coherence: T,
}

impl<T: Real> CostTerms<T> {
    pub fn total(&self) -> T {
        self.sparsity + self.data + self.rank + self.coherence
    }
}

/// Cost, Euclidean gradient in `X` orientation, and image gradient.
#[derive(Debug, Clone)]
pub struct EuclideanGradient<T> {
    pub terms: CostTerms<T>,
    pub op: Array2<T>,
    pub img: Array1<T>,
}

/// Cost with its Riemannian gradient `(Π(∇_X f), ∇_s f)`.
#[derive(Debug, Clone)]
pub struct CostAndGradient<T> {
    pub f: T,
    pub terms: CostTerms<T>,
    pub op_grad: TangentMatrix<T>,
    pub img_grad: Array1<T>,
}

/// Operator and image gradients of the patch term.
type PatchGradients<T> = (Array2<T>, Array1<T>);

struct ChunkResult<T> {
    sum_sq: T,
    op_grad: Option<Array2<T>>,
    /// Rows are `X z_b`, ready to be scattered back.
    patch_grads: Option<Array2<T>>,
}

/// The cost bound to a measurement set, a patch grid and weights.
#[derive(Debug, Clone)]
pub struct Objective<'a, T> {
    meas: &'a MeasurementSet<T>,
    cfg: &'a AbcsConfig<T>,
    geom: PatchGeometry,
    width: usize,
    height: usize,
    centers: Vec<(usize, usize)>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(
        meas: &'a MeasurementSet<T>,
        geom: PatchGeometry,
        width: usize,
        height: usize,
        cfg: &'a AbcsConfig<T>,
    ) -> Result<Self> {
        cfg.validate()?;
        if meas.n() != width * height {
            return Err(Error::dim(
                format!("{width}x{height} = {} pixels", width * height),
                format!("operator with N = {}", meas.n()),
            ));
        }
        Ok(Self {
            meas,
            cfg,
            geom,
            width,
            height,
            centers: patch_centers(&geom, width, height),
        })
    }

    pub fn config(&self) -> &AbcsConfig<T> {
        self.cfg
    }

    pub fn measurements(&self) -> &MeasurementSet<T> {
        self.meas
    }

    pub fn geometry(&self) -> &PatchGeometry {
        &self.geom
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of patches `B`.
    pub fn patch_count(&self) -> usize {
        self.centers.len()
    }

    fn check(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<()> {
        if x.n() != self.geom.n() {
            return Err(Error::dim(
                format!("operator with n = {}", self.geom.n()),
                format!("n = {}", x.n()),
            ));
        }
        if s.width() != self.width || s.height() != self.height {
            return Err(Error::dim(
                format!("{}x{} image", self.width, self.height),
                format!("{}x{}", s.width(), s.height()),
            ));
        }
        Ok(())
    }

    fn chunk(&self, x: &Array2<T>, s: ArrayView1<'_, T>, centers: &[(usize, usize)], want_grad: bool) -> ChunkResult<T> {
        let n = self.geom.n();
        let b = centers.len();
        let mut patches = Array2::<T>::zeros((b, n));
        for (row, &(r, c)) in patches.axis_iter_mut(Axis(0)).zip(centers) {
            extract_into(s, self.width, self.height, &self.geom, r, c, row);
        }
        // row b holds w_b = Ω u_b
        let mut analyzed = patches.dot(x);
        let c = self.cfg.c;
        let two_c = c + c;
        let inv_b = T::one() / T::lit(self.centers.len() as f64);
        let mut sum_sq = T::zero();
        for mut row in analyzed.axis_iter_mut(Axis(0)) {
            let g = sparsity_value(row.view(), c);
            sum_sq += g * g;
            if want_grad {
                let coef = g * inv_b;
                row.mapv_inplace(|v| coef * two_c * v / (T::one() + c * v * v));
            }
        }
        if !want_grad {
            return ChunkResult {
                sum_sq,
                op_grad: None,
                patch_grads: None,
            };
        }
        let weights = analyzed;
        ChunkResult {
            sum_sq,
            op_grad: Some(patches.t().dot(&weights)),
            patch_grads: Some(weights.dot(&x.t())),
        }
    }

    fn patch_term(&self, x: &OperatorPoint<T>, s: &ImageVector<T>, want_grad: bool) -> (T, Option<PatchGradients<T>>) {
        let xm = x.matrix();
        let pixels = s.data().view();
        let chunks: Vec<&[(usize, usize)]> = self.centers.chunks(CHUNK).collect();
        let results: Vec<ChunkResult<T>> = match self.cfg.evaluation {
            Evaluation::Sequential => chunks.iter().map(|c| self.chunk(xm, pixels, c, want_grad)).collect(),
            Evaluation::Parallel => chunks.par_iter().map(|c| self.chunk(xm, pixels, c, want_grad)).collect(),
        };
        let mut sum_sq = T::zero();
        let mut op_grad = want_grad.then(|| Array2::<T>::zeros(xm.dim()));
        let mut img_grad = want_grad.then(|| Array1::<T>::zeros(s.len()));
        for (res, centers) in results.into_iter().zip(&chunks) {
            sum_sq += res.sum_sq;
            if let (Some(acc), Some(g)) = (op_grad.as_mut(), res.op_grad) {
                *acc += &g;
            }
            if let (Some(acc), Some(v)) = (img_grad.as_mut(), res.patch_grads) {
                for (row, &(r, c)) in v.axis_iter(Axis(0)).zip(centers.iter()) {
                    scatter_into(acc.view_mut(), self.width, self.height, &self.geom, r, c, row);
                }
            }
        }
        let value = sum_sq / T::lit(2.0 * self.centers.len() as f64);
        (value, op_grad.zip(img_grad))
    }

    /// `1/(2B) Σ_b g(Ω M P_b s)²`.
    pub fn sparsity_term(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<T> {
        self.check(x, s)?;
        Ok(self.patch_term(x, s, false).0)
    }

    fn residual(&self, s: &ImageVector<T>) -> Result<Array1<T>> {
        Ok(self.meas.op.measure(s.data())? - &self.meas.y)
    }

    /// `η p(Φs − y)`.
    pub fn data_term(&self, s: &ImageVector<T>) -> Result<T> {
        let res = self.residual(s)?;
        Ok(self.cfg.eta * data_value(res.view(), self.cfg.data_term, self.cfg.c))
    }

    /// `γ h(Ω)`; zero without evaluating `h` when `γ = 0`.
    pub fn rank_term(&self, x: &OperatorPoint<T>) -> Result<T> {
        if self.cfg.gamma == T::zero() {
            return Ok(T::zero());
        }
        Ok(self.cfg.gamma * rank_penalty_impl(x.matrix(), false)?.0)
    }

    /// `κ r(Ω)`; zero without evaluating `r` when `κ = 0`.
    pub fn coherence_term(&self, x: &OperatorPoint<T>) -> Result<T> {
        if self.cfg.kappa == T::zero() {
            return Ok(T::zero());
        }
        Ok(self.cfg.kappa * coherence_impl(x.matrix(), false)?.0)
    }

    pub fn terms(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<CostTerms<T>> {
        // penalties first: they fail fast outside the feasible region
        let rank = self.rank_term(x)?;
        let coherence = self.coherence_term(x)?;
        Ok(CostTerms {
            sparsity: self.sparsity_term(x, s)?,
            data: self.data_term(s)?,
            rank,
            coherence,
        })
    }

    pub fn cost(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<T> {
        Ok(self.terms(x, s)?.total())
    }

    /// Cost and unprojected partial gradients.
    pub fn euclidean_gradient(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<EuclideanGradient<T>> {
        self.check(x, s)?;
        let cfg = self.cfg;
        let (k, n) = (x.k(), x.n());
        let mut op = Array2::<T>::zeros((n, k));
        let mut rank = T::zero();
        if cfg.gamma != T::zero() {
            let (v, g) = rank_penalty_impl(x.matrix(), true)?;
            rank = cfg.gamma * v;
            op.scaled_add(cfg.gamma, &g.expect("gradient requested"));
        }
        let mut coherence = T::zero();
        if cfg.kappa != T::zero() {
            let (v, g) = coherence_impl(x.matrix(), true)?;
            coherence = cfg.kappa * v;
            op.scaled_add(cfg.kappa, &g.expect("gradient requested"));
        }
        let (sparsity, grads) = self.patch_term(x, s, true);
        let (patch_op, mut img) = grads.expect("gradient requested");
        op += &patch_op;

        let res = self.residual(s)?;
        let (p, dp) = data_term_p(res.view(), cfg.data_term, cfg.c);
        let data = cfg.eta * p;
        img.scaled_add(cfg.eta, &self.meas.op.measure_adjoint(&dp)?);

        Ok(EuclideanGradient {
            terms: CostTerms {
                sparsity,
                data,
                rank,
                coherence,
            },
            op,
            img,
        })
    }

    /// Cost with the Riemannian gradient on `OB(n, k) × ℝᴺ`.
    pub fn cost_and_grad(&self, x: &OperatorPoint<T>, s: &ImageVector<T>) -> Result<CostAndGradient<T>> {
        let eg = self.euclidean_gradient(x, s)?;
        let op_grad = x.project_tangent(eg.op.view())?;
        Ok(CostAndGradient {
            f: eg.terms.total(),
            terms: eg.terms,
            op_grad,
            img_grad: eg.img,
        })
    }
}
