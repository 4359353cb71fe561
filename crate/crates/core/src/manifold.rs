//! Geometry of the oblique manifold `OB(n, k)` and of the product `OB(n, k) × ℝᴺ`.
//!
//! A point is the transposed analysis operator `X = Ωᵀ` (`n x k`, one atom per
//! column). Since the full-rank condition only removes a closed set, the local
//! geometry is that of `k` copies of the unit sphere `Sⁿ⁻¹`, and geodesics and
//! parallel transport act column by column with the sphere formulas:
//!
//! ```text
//! Γ(x, h, t) = x cos(t‖h‖) + (h/‖h‖) sin(t‖h‖)
//! τ(ξ)       = ξ + (uᵀξ) ((cos θ − 1) u − sin θ x),   u = h/‖h‖, θ = t‖h‖
//! ```

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::Real;

/// Column-norm tolerance for points on the manifold.
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Tolerance of the tangency test `ddiag(XᵀΞ) = 0`, relative to column scale.
pub const TANGENCY_TOL: f64 = 1e-10;

/// A point `X = Ωᵀ` on `OB(n, k)`: full rank, unit-norm columns, `k ≥ n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPoint<T> {
    x: Array2<T>,
}

/// A tangent vector `Ξ` at some `OperatorPoint`, i.e. `ddiag(XᵀΞ) = 0`.
///
/// The base point is not stored; operations that need it take it explicitly and
/// re-check tangency.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentMatrix<T> {
    xi: Array2<T>,
}

/// A tangent element `(Ξ, v)` of the product manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent<T> {
    pub op: TangentMatrix<T>,
    pub img: Array1<T>,
}

fn column_norm<T: Real>(c: ArrayView1<'_, T>) -> T {
    c.dot(&c).sqrt()
}

impl<T: Real> OperatorPoint<T> {
    /// Validates `x` as a point of `OB(n, k)`.
    pub fn new(x: Array2<T>) -> Result<Self> {
        let p = Self::fixed(x)?;
        p.gram_cholesky()
            .ok_or_else(|| Error::NotOnManifold("operator is rank deficient".into()))?;
        Ok(p)
    }

    /// Like [`new`](Self::new) but without the rank condition, for operators
    /// that stay frozen during a run. Rank `n − 1` is enough when every atom is
    /// orthogonal to the constant vector, because extracted patches are
    /// mean-centered.
    pub fn fixed(x: Array2<T>) -> Result<Self> {
        let (n, k) = x.dim();
        if n == 0 || k < n {
            return Err(Error::InvalidArgument(format!(
                "operator must satisfy k >= n >= 1, got n = {n}, k = {k}"
            )));
        }
        let tol = T::tol(UNIT_NORM_TOL);
        for (j, col) in x.axis_iter(Axis(1)).enumerate() {
            let err = (column_norm(col) - T::one()).abs();
            if !(err <= tol) {
                return Err(Error::NotOnManifold(format!(
                    "column {j} has norm error {err:e}"
                )));
            }
        }
        Ok(Self { x })
    }

    /// Normalizes every column of `x` and validates the result.
    pub fn from_unnormalized(mut x: Array2<T>) -> Result<Self> {
        for mut col in x.axis_iter_mut(Axis(1)) {
            let nrm = column_norm(col.view());
            if nrm == T::zero() {
                return Err(Error::NotOnManifold("zero column".into()));
            }
            col.mapv_inplace(|v| v / nrm);
        }
        Self::new(x)
    }

    #[cfg(test)]
    pub(crate) fn from_raw(x: Array2<T>) -> Self {
        Self { x }
    }

    /// Patch dimension `n`.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of atoms `k`.
    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    /// `X` (`n x k`); column `i` is the atom `ωᵢ`.
    pub fn matrix(&self) -> &Array2<T> {
        &self.x
    }

    /// The analysis operator `Ω = Xᵀ` (`k x n`).
    pub fn omega(&self) -> ArrayView2<'_, T> {
        self.x.t()
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.x
    }

    /// Cholesky factor of `ΩᵀΩ = XXᵀ`, `None` if not positive definite.
    pub(crate) fn gram_cholesky(&self) -> Option<Array2<T>> {
        linalg::cholesky(self.x.dot(&self.x.t()).view())
    }

    /// Smallest singular value of `X`.
    pub fn min_singular_value(&self) -> T {
        let gram = self.x.dot(&self.x.t());
        let ev = linalg::symmetric_eigenvalues(gram.view());
        ev.first().copied().unwrap_or(T::zero()).max(T::zero()).sqrt()
    }

    /// Largest `|‖xᵢ‖ − 1|` over the columns.
    pub fn column_norm_error(&self) -> T {
        self.x
            .axis_iter(Axis(1))
            .map(|c| (column_norm(c) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    fn check_shape(&self, m: ArrayView2<'_, T>) -> Result<()> {
        if m.dim() != self.x.dim() {
            return Err(Error::dim(
                format!("{:?}", self.x.dim()),
                format!("{:?}", m.dim()),
            ));
        }
        Ok(())
    }

    /// Largest column-wise `|xᵢᵀmᵢ| / max(1, ‖mᵢ‖)`.
    pub fn tangency_residual(&self, m: ArrayView2<'_, T>) -> T {
        Zip::from(self.x.axis_iter(Axis(1)))
            .and(m.axis_iter(Axis(1)))
            .fold(T::zero(), |acc, x, v| {
                let r = x.dot(&v).abs() / column_norm(v).max(T::one());
                acc.max(r)
            })
    }

    /// Orthogonal projection onto the tangent space, `Q − X ddiag(XᵀQ)`.
    pub fn project_tangent(&self, q: ArrayView2<'_, T>) -> Result<TangentMatrix<T>> {
        self.check_shape(q)?;
        Ok(TangentMatrix {
            xi: self.project_raw(q),
        })
    }

    fn project_raw(&self, q: ArrayView2<'_, T>) -> Array2<T> {
        let mut out = q.to_owned();
        Zip::from(out.axis_iter_mut(Axis(1)))
            .and(self.x.axis_iter(Axis(1)))
            .for_each(|mut col, x| {
                let d = x.dot(&col);
                col.scaled_add(-d, &x);
            });
        out
    }

    /// Accepts `m` as a tangent vector here. Inputs that miss the tolerance are
    /// re-projected once; if that still fails the input is rejected.
    pub fn tangent(&self, m: Array2<T>) -> Result<TangentMatrix<T>> {
        self.check_shape(m.view())?;
        let tol = T::tol(TANGENCY_TOL);
        if self.tangency_residual(m.view()) <= tol {
            return Ok(TangentMatrix { xi: m });
        }
        let p = self.project_raw(m.view());
        let r = self.tangency_residual(p.view());
        if r <= tol {
            Ok(TangentMatrix { xi: p })
        } else {
            Err(Error::NotTangent {
                residual: r.to_f64_lossy(),
            })
        }
    }

    fn require_tangent(&self, h: &TangentMatrix<T>) -> Result<()> {
        self.check_shape(h.xi.view())?;
        let r = self.tangency_residual(h.xi.view());
        if r <= T::tol(TANGENCY_TOL) {
            Ok(())
        } else {
            Err(Error::NotTangent {
                residual: r.to_f64_lossy(),
            })
        }
    }

    /// Point reached at time `t` along the geodesic with initial velocity `h`.
    pub fn geodesic(&self, h: &TangentMatrix<T>, t: T) -> Result<OperatorPoint<T>> {
        self.require_tangent(h)?;
        let mut out = self.x.clone();
        Zip::from(out.axis_iter_mut(Axis(1)))
            .and(h.xi.axis_iter(Axis(1)))
            .for_each(|mut col, hc| {
                let nh = column_norm(hc);
                if nh == T::zero() {
                    return;
                }
                let theta = t * nh;
                let (s, c) = theta.sin_cos();
                col.mapv_inplace(|v| v * c);
                col.scaled_add(s / nh, &hc);
                // keep the column exactly on the sphere despite rounding
                let nrm = column_norm(col.view());
                col.mapv_inplace(|v| v / nrm);
            });
        Ok(OperatorPoint { x: out })
    }

    /// Parallel transport of `xi` along the geodesic `Γ(X, h, ·)` to time `t`.
    pub fn parallel_transport(
        &self,
        xi: &TangentMatrix<T>,
        h: &TangentMatrix<T>,
        t: T,
    ) -> Result<TangentMatrix<T>> {
        self.require_tangent(h)?;
        self.require_tangent(xi)?;
        let mut out = xi.xi.clone();
        Zip::from(out.axis_iter_mut(Axis(1)))
            .and(self.x.axis_iter(Axis(1)))
            .and(h.xi.axis_iter(Axis(1)))
            .for_each(|mut col, x, hc| {
                let nh = column_norm(hc);
                if nh == T::zero() {
                    return;
                }
                let theta = t * nh;
                let (s, c) = theta.sin_cos();
                let a = hc.dot(&col) / nh;
                // ξ + a((cos θ − 1) u − sin θ x) with u = h/‖h‖
                col.scaled_add(a * (c - T::one()) / nh, &hc);
                col.scaled_add(-a * s, &x);
            });
        Ok(TangentMatrix { xi: out })
    }
}

impl<T: Real> TangentMatrix<T> {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            xi: Array2::zeros((n, k)),
        }
    }

    /// Wraps a matrix already known to be tangent.
    pub(crate) fn from_raw(xi: Array2<T>) -> Self {
        Self { xi }
    }

    pub fn matrix(&self) -> &Array2<T> {
        &self.xi
    }

    pub fn into_matrix(self) -> Array2<T> {
        self.xi
    }

    /// Frobenius inner product `trace(AᵀB)`.
    pub fn inner(&self, other: &Self) -> T {
        Zip::from(&self.xi)
            .and(&other.xi)
            .fold(T::zero(), |acc, &a, &b| acc + a * b)
    }

    pub fn norm(&self) -> T {
        self.inner(self).sqrt()
    }

    pub fn scaled(&self, a: T) -> Self {
        Self {
            xi: self.xi.mapv(|v| v * a),
        }
    }
}

impl<T: Real> ProductTangent<T> {
    pub fn new(op: TangentMatrix<T>, img: Array1<T>) -> Self {
        Self { op, img }
    }

    pub fn zeros(n: usize, k: usize, len: usize) -> Self {
        Self {
            op: TangentMatrix::zeros(n, k),
            img: Array1::zeros(len),
        }
    }

    pub fn norm(&self) -> T {
        (self.op.inner(&self.op) + self.img.dot(&self.img)).sqrt()
    }

    /// `-self`.
    pub fn negated(&self) -> Self {
        Self {
            op: self.op.scaled(-T::one()),
            img: self.img.mapv(|v| -v),
        }
    }
}

/// `trace(Ξ_AᵀΞ_B) + v_Aᵀv_B`.
pub fn product_inner<T: Real>(a: &ProductTangent<T>, b: &ProductTangent<T>) -> Result<T> {
    if a.op.xi.dim() != b.op.xi.dim() {
        return Err(Error::dim(
            format!("{:?}", a.op.xi.dim()),
            format!("{:?}", b.op.xi.dim()),
        ));
    }
    if a.img.len() != b.img.len() {
        return Err(Error::dim(a.img.len(), b.img.len()));
    }
    Ok(a.op.inner(&b.op) + a.img.dot(&b.img))
}

/// A seeded random point: Gaussian entries, columns normalized, resampled until
/// the Gram matrix is comfortably positive definite.
pub fn random_operator_point<T: Real>(n: usize, k: usize, seed: u64) -> Result<OperatorPoint<T>> {
    if n == 0 || k < n {
        return Err(Error::InvalidArgument(format!(
            "random operator needs k >= n >= 1, got n = {n}, k = {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let raw = Array2::from_shape_simple_fn((n, k), || {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        });
        if let Ok(p) = OperatorPoint::from_unnormalized(raw) {
            if p.min_singular_value() > T::tol(1e-8) {
                return Ok(p);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn random_tangent(p: &OperatorPoint<f64>, seed: u64, scale: f64) -> TangentMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Array2::from_shape_simple_fn(p.matrix().dim(), || {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * scale
        });
        p.project_tangent(q.view()).unwrap()
    }

    #[test]
    fn fixed_accepts_rank_deficient_unit_columns() {
        // three unit atoms in a plane of R^3
        let s = 0.5f64.sqrt();
        let x = array![[1.0, 0.0, s], [0.0, 1.0, s], [0.0, 0.0, 0.0]];
        assert!(OperatorPoint::new(x.clone()).is_err());
        assert!(OperatorPoint::fixed(x).is_ok());
        assert!(OperatorPoint::fixed(array![[2.0, 0.0], [0.0, 1.0]]).is_err());
        assert!(OperatorPoint::fixed(Array2::<f64>::eye(3).slice(ndarray::s![.., ..2]).to_owned()).is_err());
    }

    #[test]
    fn projecting_the_point_gives_zero() {
        let p = random_operator_point::<f64>(3, 5, 1).unwrap();
        let t = p.project_tangent(p.matrix().view()).unwrap();
        assert!(t.matrix().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn projection_matches_column_loop() {
        let x = array![[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        // rank 2 with k = 3
        let p = OperatorPoint::new(x.clone()).unwrap();
        let q = Array2::<f64>::ones((2, 3));
        let got = p.project_tangent(q.view()).unwrap();
        for j in 0..3 {
            let xc = x.column(j);
            let qc = q.column(j);
            let d: f64 = (0..2).map(|i| xc[i] * qc[i]).sum();
            for i in 0..2 {
                assert!((got.matrix()[[i, j]] - (qc[i] - xc[i] * d)).abs() < 1e-15);
            }
        }
        // e1 columns lose their first coordinate, e2 its second
        assert_eq!(got.matrix(), &array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]);
    }

    #[test]
    fn projection_rejects_wrong_shape() {
        let p = random_operator_point::<f64>(3, 5, 1).unwrap();
        let q = Array2::<f64>::ones((3, 4));
        assert!(matches!(p.project_tangent(q.view()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn quarter_great_circle() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        let p = OperatorPoint::new(x).unwrap();
        let h = p
            .tangent(array![[0.0, 0.0], [std::f64::consts::FRAC_PI_2, 0.0]])
            .unwrap();
        let q = p.geodesic(&h, 1.0).unwrap();
        assert!((q.matrix()[[0, 0]]).abs() < 1e-15);
        assert!((q.matrix()[[1, 0]] - 1.0).abs() < 1e-15);
        // second column has zero velocity
        assert_eq!(q.matrix().column(1), p.matrix().column(1));
    }

    #[test]
    fn zero_velocity_geodesic_is_constant() {
        let p = random_operator_point::<f64>(4, 6, 3).unwrap();
        let q = p.geodesic(&TangentMatrix::zeros(4, 6), 1.0).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn geodesic_rejects_non_tangent_velocity() {
        let p = random_operator_point::<f64>(3, 4, 3).unwrap();
        let bad = TangentMatrix::from_raw(p.matrix().clone());
        assert!(matches!(p.geodesic(&bad, 0.1), Err(Error::NotTangent { .. })));
    }

    /// Per-column RK4 integration of the sphere geodesic equation `x'' = −‖x'‖² x`.
    fn integrate_sphere_geodesic(x0: &[f64], v0: &[f64], t_end: f64, steps: usize) -> Vec<f64> {
        let n = x0.len();
        let mut state: Vec<f64> = x0.iter().chain(v0.iter()).copied().collect();
        let dt = t_end / steps as f64;
        let rhs = |s: &[f64]| -> Vec<f64> {
            let (x, v) = s.split_at(n);
            let vv: f64 = v.iter().map(|a| a * a).sum();
            v.iter().copied().chain(x.iter().map(|a| -vv * a)).collect()
        };
        for _ in 0..steps {
            let k1 = rhs(&state);
            let s2: Vec<f64> = state.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k2 = rhs(&s2);
            let s3: Vec<f64> = state.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k3 = rhs(&s3);
            let s4: Vec<f64> = state.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
            let k4 = rhs(&s4);
            for i in 0..state.len() {
                state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        state.truncate(n);
        state
    }

    #[test]
    fn geodesic_matches_ode_integration() {
        let p = random_operator_point::<f64>(5, 7, 11).unwrap();
        let h = random_tangent(&p, 12, 1.0);
        let q = p.geodesic(&h, 0.3).unwrap();
        for j in 0..7 {
            let x0: Vec<f64> = p.matrix().column(j).to_vec();
            let v0: Vec<f64> = h.matrix().column(j).to_vec();
            let oracle = integrate_sphere_geodesic(&x0, &v0, 0.3, 2000);
            for i in 0..5 {
                assert!((q.matrix()[[i, j]] - oracle[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn geodesic_initial_velocity_is_h() {
        let p = random_operator_point::<f64>(4, 6, 5).unwrap();
        let h = random_tangent(&p, 6, 0.7);
        let eps = 1e-6;
        let a = p.geodesic(&h, eps).unwrap();
        let b = p.geodesic(&h, -eps).unwrap();
        let d = (a.matrix() - b.matrix()) / (2.0 * eps);
        for (u, v) in d.iter().zip(h.matrix().iter()) {
            assert!((u - v).abs() < 1e-8);
        }
    }

    #[test]
    fn transport_at_zero_time_is_identity() {
        let p = random_operator_point::<f64>(3, 5, 2).unwrap();
        let h = random_tangent(&p, 3, 1.0);
        let xi = random_tangent(&p, 4, 1.0);
        let out = p.parallel_transport(&xi, &h, 0.0).unwrap();
        for (a, b) in out.matrix().iter().zip(xi.matrix().iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn transport_of_velocity_is_geodesic_velocity() {
        let p = random_operator_point::<f64>(4, 6, 21).unwrap();
        let h = random_tangent(&p, 22, 0.8);
        let t = 0.9;
        let moved = p.parallel_transport(&h, &h, t).unwrap();
        let eps = 1e-6;
        let a = p.geodesic(&h, t + eps).unwrap();
        let b = p.geodesic(&h, t - eps).unwrap();
        let vel = (a.matrix() - b.matrix()) / (2.0 * eps);
        for (u, v) in moved.matrix().iter().zip(vel.iter()) {
            assert!((u - v).abs() < 1e-7);
        }
        assert!((moved.norm() - h.norm()).abs() < 1e-12);
    }

    #[test]
    fn small_transport_is_isometric_and_tangent() {
        for seed in 0..20 {
            let p = random_operator_point::<f64>(2, 3, seed).unwrap();
            let h = random_tangent(&p, seed + 100, 2.0);
            let xi = random_tangent(&p, seed + 200, 1.0);
            let t = 0.37 * (seed as f64 + 1.0);
            let out = p.parallel_transport(&xi, &h, t).unwrap();
            let q = p.geodesic(&h, t).unwrap();
            assert!((out.norm() - xi.norm()).abs() < 1e-10);
            assert!(q.tangency_residual(out.matrix().view()) < 1e-10);
        }
    }

    #[test]
    fn product_inner_basics() {
        let a = ProductTangent::new(TangentMatrix::<f64>::zeros(2, 3), array![1.0, 2.0]);
        let b = ProductTangent::new(TangentMatrix::<f64>::zeros(2, 3), array![3.0, -1.0]);
        assert_eq!(product_inner(&a, &b).unwrap(), 1.0);
        assert!(product_inner(&a, &a).unwrap() > 0.0);
        let c = ProductTangent::new(TangentMatrix::<f64>::zeros(2, 3), array![1.0]);
        assert!(product_inner(&a, &c).is_err());
    }

    #[test]
    fn product_inner_on_unit_basis_is_kronecker() {
        let (n, k, len) = (2, 2, 2);
        let mut basis = Vec::new();
        for idx in 0..n * k {
            let mut m = Array2::<f64>::zeros((n, k));
            m[[idx % n, idx / n]] = 1.0;
            basis.push(ProductTangent::new(TangentMatrix::from_raw(m), Array1::zeros(len)));
        }
        for idx in 0..len {
            let mut v = Array1::<f64>::zeros(len);
            v[idx] = 1.0;
            basis.push(ProductTangent::new(TangentMatrix::zeros(n, k), v));
        }
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(product_inner(a, b).unwrap(), want);
            }
        }
    }

    #[test]
    fn random_point_is_deterministic_and_unit() {
        let a = random_operator_point::<f64>(49, 98, 7).unwrap();
        let b = random_operator_point::<f64>(49, 98, 7).unwrap();
        assert_eq!(a, b);
        let c = random_operator_point::<f64>(2, 4, 99).unwrap();
        assert!(c.column_norm_error() < 1e-12);
        assert!(matches!(
            random_operator_point::<f64>(4, 3, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn random_points_are_full_rank_by_svd() {
        for seed in 0..100 {
            let p = random_operator_point::<f64>(49, 98, seed).unwrap();
            let m = nalgebra::DMatrix::from_column_slice(49, 98, p.matrix().t().as_standard_layout().as_slice().unwrap());
            let sv = m.singular_values();
            let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(smallest > 0.0, "seed {seed}: smallest singular value {smallest}");
        }
    }

    #[test]
    fn f32_points_work() {
        let p = random_operator_point::<f32>(3, 6, 1).unwrap();
        assert!(p.column_norm_error() < 1e-5);
    }

    #[test]
    fn directional_derivative_along_geodesic() {
        // f(X) = Σ a_ij x_ij + ½ Σ x_ij⁴
        let p = random_operator_point::<f64>(3, 5, 8).unwrap();
        let a = random_tangent(&p, 9, 1.0).into_matrix() + 0.3;
        let f = |x: &Array2<f64>| (x * &a).sum() + 0.5 * x.mapv(|v| v.powi(4)).sum();
        let egrad = &a + &p.matrix().mapv(|v| 2.0 * v.powi(3));
        let rgrad = p.project_tangent(egrad.view()).unwrap();
        let h = random_tangent(&p, 10, 1.0);
        let want = rgrad.inner(&h);
        let f0 = f(p.matrix());
        let mut errs = Vec::new();
        for eps in [1e-3, 1e-4, 1e-5] {
            let q = p.geodesic(&h, eps).unwrap();
            errs.push(((f(q.matrix()) - f0) / eps - want).abs());
        }
        assert!(errs[1] < errs[0] * 0.2 && errs[2] < errs[1] * 0.2, "{errs:?}");
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(seed in 0u64..1000, n in 2usize..6, extra in 0usize..4) {
            let k = n + extra;
            let p = random_operator_point::<f64>(n, k, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let q = Array2::from_shape_simple_fn((n, k), || {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            });
            let once = p.project_tangent(q.view()).unwrap();
            let twice = p.project_tangent(once.matrix().view()).unwrap();
            let scale = once.norm().max(1.0);
            for (a, b) in once.matrix().iter().zip(twice.matrix().iter()) {
                prop_assert!((a - b).abs() <= 1e-14 * scale);
            }
            prop_assert!(p.tangency_residual(once.matrix().view()) < 1e-12);
        }

        #[test]
        fn projection_vanishes_exactly_on_columnwise_multiples(seed in 0u64..500) {
            let p = random_operator_point::<f64>(4, 6, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let scales: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut q = p.matrix().clone();
            for (j, mut col) in q.axis_iter_mut(Axis(1)).enumerate() {
                col.mapv_inplace(|v| v * scales[j]);
            }
            let t = p.project_tangent(q.view()).unwrap();
            prop_assert!(t.norm() < 1e-12);
            // perturbing one column off its atom direction gives a nonzero projection
            let h = random_tangent(&p, seed + 1, 1.0);
            let mut q2 = q.clone();
            q2.column_mut(seed as usize % 6).scaled_add(1.0, &h.matrix().column(seed as usize % 6));
            let t2 = p.project_tangent(q2.view()).unwrap();
            prop_assert!(t2.norm() > 1e-6);
        }

        #[test]
        fn geodesic_stays_on_manifold(seed in 0u64..500, step in 0usize..=20) {
            let t = step as f64 * 0.1;
            let p = random_operator_point::<f64>(4, 7, seed).unwrap();
            let h = random_tangent(&p, seed + 7, 3.0);
            let q = p.geodesic(&h, t).unwrap();
            prop_assert!(q.column_norm_error() < 1e-12);
        }

        #[test]
        fn transport_is_isometric(seed in 0u64..500, t in 0.0f64..3.0) {
            let p = random_operator_point::<f64>(5, 8, seed).unwrap();
            let h = random_tangent(&p, seed + 1, 2.0);
            let xi = random_tangent(&p, seed + 2, 1.0);
            let out = p.parallel_transport(&xi, &h, t).unwrap();
            prop_assert!((out.norm() - xi.norm()).abs() < 1e-10);
            let q = p.geodesic(&h, t).unwrap();
            prop_assert!(q.tangency_residual(out.matrix().view()) < 1e-10);
        }
    }
}
