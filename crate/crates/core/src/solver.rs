//! Geometric conjugate gradient on `OB(n, k) × ℝᴺ`.
//!
//! Each iteration backtracks along the current direction `(H, h)` until the
//! Armijo condition holds, moves `X` along its geodesic and `s` along a straight
//! line with the same step, transports the old direction and gradient to the
//! new point and combines them with the hybrid coefficient
//! `β = max(0, min(β_DY, β_HS))`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imagegrid::ImageVector;
use crate::manifold::{product_inner, random_operator_point, OperatorPoint, ProductTangent, TangentMatrix};
use crate::objective::Objective;
use crate::Real;

/// Terminate once `‖X(i) − X(i−1)‖_F < tol` or after `max_iter` iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule<T> {
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for StoppingRule<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            max_iter: 500,
        }
    }
}

impl<T: Real> StoppingRule<T> {
    pub fn new(tol: T, max_iter: usize) -> Result<Self> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidArgument(format!("stopping tolerance must be positive, got {tol}")));
        }
        Ok(Self { tol, max_iter })
    }
}

/// Armijo backtracking constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams<T> {
    pub sufficient_decrease: T,
    pub contraction: T,
    pub max_step: T,
    pub min_step: T,
}

impl<T: Real> Default for LineSearchParams<T> {
    fn default() -> Self {
        Self {
            sufficient_decrease: T::lit(1e-4),
            contraction: T::lit(0.5),
            max_step: T::lit(1e3),
            min_step: T::lit(1e-20),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    pub stop: StoppingRule<T>,
    pub line_search: LineSearchParams<T>,
    /// Keep the operator fixed and optimize the image only.
    pub freeze_operator: bool,
    /// Iterations between smallest-singular-value diagnostics (0 disables).
    pub rank_check_every: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            stop: StoppingRule::default(),
            line_search: LineSearchParams::default(),
            freeze_operator: false,
            rank_check_every: 50,
        }
    }
}

/// Iterate, gradient and search direction of the CG loop.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    pub x: OperatorPoint<T>,
    pub s: ImageVector<T>,
    /// Riemannian gradient `(G, g)` at `(x, s)`.
    pub grad: ProductTangent<T>,
    /// Search direction `(H, h)`.
    pub dir: ProductTangent<T>,
    pub f: T,
    pub alpha_prev: Option<T>,
    pub iter: usize,
}

impl<T: Real> SolverState<T> {
    /// `s⁰ = Φᵀy`, `X⁰ = x0`, direction `−∇f`.
    pub fn with_operator(obj: &Objective<'_, T>, x0: OperatorPoint<T>, freeze_operator: bool) -> Result<Self> {
        let meas = obj.measurements();
        let s0 = ImageVector::new(meas.op.measure_adjoint(&meas.y)?, obj.width(), obj.height())?;
        let eval = obj.cost_and_grad(&x0, &s0)?;
        let op_grad = if freeze_operator {
            TangentMatrix::zeros(x0.n(), x0.k())
        } else {
            eval.op_grad
        };
        let grad = ProductTangent::new(op_grad, eval.img_grad);
        Ok(Self {
            dir: grad.negated(),
            grad,
            f: eval.f,
            x: x0,
            s: s0,
            alpha_prev: None,
            iter: 0,
        })
    }

    /// Starts from a seeded random operator with `k` atoms.
    pub fn initialize(obj: &Objective<'_, T>, k: usize, seed: u64) -> Result<Self> {
        let x0 = random_operator_point(obj.geometry().n(), k, seed)?;
        Self::with_operator(obj, x0, false)
    }
}

/// Result of the hybrid coefficient computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaUpdate<T> {
    pub beta: T,
    pub beta_hs: T,
    pub beta_dy: T,
    /// The shared denominator vanished; `beta` is 0.
    pub restart: bool,
}

/// `β = max(0, min(β_DY, β_HS))` from the new gradient, the old image
/// gradient, and the old direction and operator gradient transported to the
/// new point.
pub fn beta_hybrid<T: Real>(
    new_grad: &ProductTangent<T>,
    old_img_grad: &Array1<T>,
    transported_dir: &ProductTangent<T>,
    transported_op_grad: &TangentMatrix<T>,
) -> Result<BetaUpdate<T>> {
    if old_img_grad.len() != new_grad.img.len() {
        return Err(Error::dim(new_grad.img.len(), old_img_grad.len()));
    }
    let diff = ProductTangent::new(
        TangentMatrix::from_raw(new_grad.op.matrix() - transported_op_grad.matrix()),
        &new_grad.img - old_img_grad,
    );
    let denom = product_inner(transported_dir, &diff)?;
    let num_hs = product_inner(new_grad, &diff)?;
    let num_dy = product_inner(new_grad, new_grad)?;
    if !(denom.abs() >= T::lit(1e-30)) {
        return Ok(BetaUpdate {
            beta: T::zero(),
            beta_hs: T::zero(),
            beta_dy: T::zero(),
            restart: true,
        });
    }
    let beta_hs = num_hs / denom;
    let beta_dy = num_dy / denom;
    let beta = T::zero().max(beta_dy.min(beta_hs));
    Ok(BetaUpdate {
        beta,
        beta_hs,
        beta_dy,
        restart: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome<T> {
    pub alpha: T,
    pub f_new: T,
    pub evaluations: usize,
}

/// Backtracks from `alpha0` until `φ(α) ≤ f0 + c₁ α slope`, where `slope < 0`
/// is the directional derivative at `α = 0`.
///
/// Trial points where the objective reports an infeasibility (singular Gram
/// matrix, coherence barrier) count as rejected trials.
pub fn armijo_backtrack<T: Real>(
    f0: T,
    slope: T,
    alpha0: T,
    params: &LineSearchParams<T>,
    mut phi: impl FnMut(T) -> Result<T>,
) -> Result<LineSearchOutcome<T>> {
    if !(slope < T::zero()) {
        return Err(Error::InvalidArgument(format!("not a descent direction (slope {slope})")));
    }
    let mut alpha = alpha0;
    let mut evaluations = 0;
    while alpha >= params.min_step {
        let f = match phi(alpha) {
            Ok(f) => f,
            Err(e) if e.is_infeasible() => T::infinity(),
            Err(e) => return Err(e),
        };
        evaluations += 1;
        if f <= f0 + params.sufficient_decrease * alpha * slope {
            return Ok(LineSearchOutcome {
                alpha,
                f_new: f,
                evaluations,
            });
        }
        alpha *= params.contraction;
    }
    Err(Error::LineSearch {
        min_step: params.min_step.to_f64_lossy(),
        slope: slope.to_f64_lossy(),
        cost: f0.to_f64_lossy(),
    })
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub alpha: f64,
    pub beta: f64,
    pub grad_op_norm: f64,
    pub grad_img_norm: f64,
    /// `‖X(i+1) − X(i)‖_F`.
    pub op_change: f64,
    /// `‖s(i+1) − s(i)‖₂`.
    pub img_change: f64,
    pub evaluations: usize,
    /// The direction was reset to the negative gradient before this step.
    pub restarted: bool,
    /// Largest tangency residual of the transported direction and gradient.
    pub transport_tangency: f64,
    /// Largest relative norm change caused by transport.
    pub transport_isometry: f64,
    /// Largest `|‖xᵢ‖ − 1|` of the new operator.
    pub column_norm_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The stopping tolerance was met.
    Converged,
    MaxIterations,
    /// The gradient vanished exactly.
    Stationary,
    /// No step satisfied the Armijo condition; the last accepted iterate is returned.
    LineSearchFailed,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
            Termination::Stationary => "stationary",
            Termination::LineSearchFailed => "line_search_failed",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::LineSearchFailed)
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput<T> {
    pub x: OperatorPoint<T>,
    pub s: ImageVector<T>,
    pub f: T,
    pub grad: ProductTangent<T>,
    pub trace: Vec<TraceRow>,
    pub termination: Termination,
}

fn transport_checked<T: Real>(
    x: &OperatorPoint<T>,
    x_new: &OperatorPoint<T>,
    v: &TangentMatrix<T>,
    dir: &TangentMatrix<T>,
    alpha: T,
) -> Result<(TangentMatrix<T>, T, T)> {
    let moved = x.parallel_transport(v, dir, alpha)?;
    let tangency = x_new.tangency_residual(moved.matrix().view());
    let before = v.norm();
    let isometry = (moved.norm() - before).abs() / before.max(T::one());
    Ok((x_new.tangent(moved.into_matrix())?, tangency, isometry))
}

/// Runs the CG loop from `state`. After every accepted step the callback sees
/// the trace row and the new state, including the next search direction.
pub fn run<T: Real>(
    obj: &Objective<'_, T>,
    mut state: SolverState<T>,
    opts: &SolverOptions<T>,
    mut callback: impl FnMut(&TraceRow, &SolverState<T>),
) -> Result<SolverOutput<T>> {
    let (n, k) = (state.x.n(), state.x.k());
    let sqrt_len = T::lit(state.s.len() as f64).sqrt();
    let mut trace = Vec::new();
    let termination = loop {
        if state.iter >= opts.stop.max_iter {
            break Termination::MaxIterations;
        }
        let mut slope = product_inner(&state.grad, &state.dir)?;
        let mut restarted = false;
        if !(slope < T::zero()) {
            state.dir = state.grad.negated();
            slope = -product_inner(&state.grad, &state.grad)?;
            restarted = true;
        }
        if slope == T::zero() {
            break Termination::Stationary;
        }
        let alpha0 = match state.alpha_prev {
            None => T::one() / (T::one() + state.grad.norm()),
            Some(a) => (a + a).min(opts.line_search.max_step),
        };
        let ls = armijo_backtrack(state.f, slope, alpha0, &opts.line_search, |a| {
            let x_trial = state.x.geodesic(&state.dir.op, a)?;
            let mut s_trial = state.s.clone();
            s_trial.data_mut().scaled_add(a, &state.dir.img);
            obj.cost(&x_trial, &s_trial)
        });
        let ls = match ls {
            Ok(ls) => ls,
            Err(Error::LineSearch { .. }) => {
                log::warn!("line search failed at iteration {}", state.iter);
                break Termination::LineSearchFailed;
            }
            Err(e) => return Err(e),
        };
        let alpha = ls.alpha;
        let x_new = state.x.geodesic(&state.dir.op, alpha)?;
        let mut s_new = state.s.clone();
        s_new.data_mut().scaled_add(alpha, &state.dir.img);

        let eval = obj.cost_and_grad(&x_new, &s_new)?;
        let new_grad = ProductTangent::new(
            if opts.freeze_operator {
                TangentMatrix::zeros(n, k)
            } else {
                eval.op_grad
            },
            eval.img_grad,
        );

        let (t_dir, tan_h, iso_h) = transport_checked(&state.x, &x_new, &state.dir.op, &state.dir.op, alpha)?;
        let (t_grad, tan_g, iso_g) = transport_checked(&state.x, &x_new, &state.grad.op, &state.dir.op, alpha)?;
        let transported_dir = ProductTangent::new(t_dir, state.dir.img.clone());
        let beta = beta_hybrid(&new_grad, &state.grad.img, &transported_dir, &t_grad)?;

        let new_dir = if beta.beta == T::zero() {
            new_grad.negated()
        } else {
            // a no-op in exact arithmetic; keeps rounding drift from
            // compounding through β over long runs
            let combined = transported_dir.op.matrix() * beta.beta - new_grad.op.matrix();
            ProductTangent::new(
                x_new.project_tangent(combined.view())?,
                &transported_dir.img * beta.beta - &new_grad.img,
            )
        };

        let op_change = (x_new.matrix() - state.x.matrix()).mapv(|v| v * v).sum().sqrt();
        let img_change = state.dir.img.dot(&state.dir.img).sqrt() * alpha;
        let row = TraceRow {
            iter: state.iter + 1,
            f: eval.f.to_f64_lossy(),
            alpha: alpha.to_f64_lossy(),
            beta: beta.beta.to_f64_lossy(),
            grad_op_norm: new_grad.op.norm().to_f64_lossy(),
            grad_img_norm: new_grad.img.dot(&new_grad.img).sqrt().to_f64_lossy(),
            op_change: op_change.to_f64_lossy(),
            img_change: img_change.to_f64_lossy(),
            evaluations: ls.evaluations,
            restarted: restarted || beta.restart,
            transport_tangency: tan_h.max(tan_g).to_f64_lossy(),
            transport_isometry: iso_h.max(iso_g).to_f64_lossy(),
            column_norm_error: x_new.column_norm_error().to_f64_lossy(),
        };
        state = SolverState {
            x: x_new,
            s: s_new,
            grad: new_grad,
            dir: new_dir,
            f: eval.f,
            alpha_prev: Some(alpha),
            iter: state.iter + 1,
        };
        callback(&row, &state);
        trace.push(row);

        if !opts.freeze_operator && opts.rank_check_every > 0 && state.iter.is_multiple_of(opts.rank_check_every) {
            let sv = state.x.min_singular_value();
            if sv < T::lit(1e-8) {
                log::warn!("operator nearly rank deficient at iteration {}: smallest singular value {sv:e}", state.iter);
            }
        }

        let converged = if opts.freeze_operator {
            img_change / sqrt_len < opts.stop.tol
        } else {
            op_change < opts.stop.tol
        };
        if converged {
            break Termination::Converged;
        }
    };
    Ok(SolverOutput {
        x: state.x,
        s: state.s,
        f: state.f,
        grad: state.grad,
        trace,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagegrid::PatchGeometry;
    use crate::objective::{AbcsConfig, DataTerm, Evaluation};
    use crate::sensing::{MeasurementOperator, MeasurementSet};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn beta_hybrid_clamps() {
        // β = max(0, min(β_DY, β_HS)), checked on hand-built scalars:
        // one-dimensional image parts, zero operator parts
        let z = TangentMatrix::<f64>::zeros(1, 1);
        let mk = |v: f64| ProductTangent::new(z.clone(), Array1::from(vec![v]));
        // g = 1, g_old = 3, d = −2: u = −2, denom = 4, β_HS = −0.5, β_DY = 0.25
        let b = beta_hybrid(&mk(1.0), &Array1::from(vec![3.0]), &mk(-2.0), &z).unwrap();
        assert!((b.beta_hs - (-0.5)).abs() < 1e-15);
        assert!((b.beta_dy - 0.25).abs() < 1e-15);
        assert_eq!(b.beta, 0.0);
        // g = 1, g_old = 0.6, d = 5: u = 0.4, denom = 2, β_HS = 0.2, β_DY = 0.5
        let b = beta_hybrid(&mk(1.0), &Array1::from(vec![0.6]), &mk(5.0), &z).unwrap();
        assert!((b.beta - 0.2).abs() < 1e-12);
        assert!(b.beta <= b.beta_dy);
    }

    #[test]
    fn beta_zero_denominator_restarts() {
        let z = TangentMatrix::<f64>::zeros(1, 1);
        let g = ProductTangent::new(z.clone(), Array1::from(vec![1.0]));
        let d = ProductTangent::new(z.clone(), Array1::from(vec![0.0]));
        let b = beta_hybrid(&g, &Array1::from(vec![0.0]), &d, &z).unwrap();
        assert!(b.restart);
        assert_eq!(b.beta, 0.0);
    }

    fn random_product(p: &OperatorPoint<f64>, len: usize, rng: &mut ChaCha8Rng) -> ProductTangent<f64> {
        let q = Array2::from_shape_simple_fn((p.n(), p.k()), || StandardNormal.sample(&mut *rng));
        let v = Array1::from_shape_simple_fn(len, || StandardNormal.sample(&mut *rng));
        ProductTangent::new(p.project_tangent(q.view()).unwrap(), v)
    }

    #[test]
    fn beta_matches_formula_transcription() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..50 {
            let p = random_operator_point::<f64>(3, 5, seed).unwrap();
            let g_new = random_product(&p, 7, &mut rng);
            let g_old_t = random_product(&p, 7, &mut rng);
            let dir_t = random_product(&p, 7, &mut rng);
            let b = beta_hybrid(&g_new, &g_old_t.img, &dir_t, &g_old_t.op).unwrap();
            // independent transcription using separate operator / image inner products
            let u_op = g_new.op.matrix() - g_old_t.op.matrix();
            let u_img = &g_new.img - &g_old_t.img;
            let ip = |a: &Array2<f64>, b: &Array2<f64>| (a * b).sum();
            let denom = ip(dir_t.op.matrix(), &u_op) + dir_t.img.dot(&u_img);
            let hs = (ip(g_new.op.matrix(), &u_op) + g_new.img.dot(&u_img)) / denom;
            let dy = (ip(g_new.op.matrix(), g_new.op.matrix()) + g_new.img.dot(&g_new.img)) / denom;
            let want = 0f64.max(dy.min(hs));
            assert!((b.beta - want).abs() <= 1e-12 * want.abs().max(1.0));
            assert!(b.beta >= 0.0);
        }
    }

    #[test]
    fn armijo_on_quadratic_is_within_factor_two() {
        let params = LineSearchParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let curvature: f64 = rng.gen_range(0.01..100.0);
            let slope: f64 = -rng.gen_range(0.01..10.0);
            let f0 = rng.gen_range(-5.0..5.0);
            let exact = -slope / curvature;
            let q = |a: f64| Ok(f0 + slope * a + 0.5 * curvature * a * a);
            let out = armijo_backtrack(f0, slope, 1e3, &params, q).unwrap();
            assert!(out.alpha <= 2.0 * exact && out.alpha >= 0.5 * exact, "{} vs {exact}", out.alpha);
            assert!(out.f_new <= f0);
        }
    }

    #[test]
    fn armijo_accepts_first_trial_at_stationary_point() {
        let params = LineSearchParams::default();
        let out = armijo_backtrack(7.0, -1e-30, 0.5, &params, |_| Ok(7.0)).unwrap();
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.alpha, 0.5);
    }

    #[test]
    fn armijo_rejects_ascent_and_reports_failure() {
        let params = LineSearchParams::default();
        assert!(armijo_backtrack(0.0, 1.0, 1.0, &params, |_| Ok(0.0)).is_err());
        let r = armijo_backtrack(0.0, -1.0, 1.0, &params, |_| Ok(1.0));
        assert!(matches!(r, Err(Error::LineSearch { .. })));
        // infeasible trials shrink instead of aborting
        let out = armijo_backtrack(0.0, -1.0, 1.0, &params, |a| {
            if a > 0.1 {
                Err(Error::Singular { smallest_eigenvalue: 0.0 })
            } else {
                Ok(-a)
            }
        })
        .unwrap();
        assert!(out.alpha <= 0.1);
    }

    struct Tiny {
        meas: MeasurementSet<f64>,
        cfg: AbcsConfig<f64>,
    }

    fn tiny(seed: u64, noise: f64) -> Tiny {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = Array1::from_shape_fn(64, |i| {
            let (r, c) = (i % 8, i / 8);
            0.3 + 0.4 * ((r + c) > 7) as u8 as f64 + rng.gen_range(-0.02..0.02)
        });
        let op = MeasurementOperator::subsampled_hadamard(16, 64, seed).unwrap();
        let mut meas = MeasurementSet::sense(op, &truth).unwrap();
        meas.y.mapv_inplace(|v| v + noise * rng.gen_range(-1.0..1.0));
        let mut cfg = AbcsConfig::with_eta_hat(1e2, 4, 8, 64, DataTerm::SquaredL2);
        cfg.c = 1e2;
        cfg.kappa = 1.0;
        cfg.evaluation = Evaluation::Sequential;
        Tiny { meas, cfg }
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let t = tiny(1, 0.0);
        let geom = PatchGeometry::new(2, 1).unwrap();
        let obj = Objective::new(&t.meas, geom, 8, 8, &t.cfg).unwrap();
        let state = SolverState::initialize(&obj, 8, 5).unwrap();
        let opts = SolverOptions {
            stop: StoppingRule::new(1e-6, 0).unwrap(),
            ..Default::default()
        };
        let out = run(&obj, state.clone(), &opts, |_, _| {}).unwrap();
        assert_eq!(out.x, state.x);
        assert_eq!(out.s, state.s);
        assert!(out.trace.is_empty());
        assert_eq!(out.termination, Termination::MaxIterations);
    }

    #[test]
    fn initial_image_is_backprojection() {
        let t = tiny(2, 0.0);
        let geom = PatchGeometry::new(2, 1).unwrap();
        let obj = Objective::new(&t.meas, geom, 8, 8, &t.cfg).unwrap();
        let a = SolverState::initialize(&obj, 8, 5).unwrap();
        let b = SolverState::initialize(&obj, 8, 5).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.f.to_bits(), b.f.to_bits());
        let norm_s = a.s.data().dot(a.s.data()).sqrt();
        let norm_y = t.meas.y.dot(&t.meas.y).sqrt();
        assert!((norm_s - norm_y).abs() < 1e-12 * norm_y);
        assert_eq!(a.dir, a.grad.negated());

        let mut zero = t.meas.clone();
        zero.y.fill(0.0);
        let obj = Objective::new(&zero, geom, 8, 8, &t.cfg).unwrap();
        let z = SolverState::initialize(&obj, 8, 5).unwrap();
        assert!(z.s.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn tiny_problem_converges() {
        let t = tiny(3, 0.0);
        let geom = PatchGeometry::new(2, 1).unwrap();
        let obj = Objective::new(&t.meas, geom, 8, 8, &t.cfg).unwrap();
        let state = SolverState::initialize(&obj, 8, 1).unwrap();
        let f0 = state.f;
        let g0 = state.grad.norm();
        let opts = SolverOptions {
            stop: StoppingRule::new(1e-12, 3000).unwrap(),
            ..Default::default()
        };
        let mut last_f = f0;
        let mut best_g = g0;
        let out = run(&obj, state, &opts, |row, _| {
            assert!(row.f <= last_f + 1e-12);
            last_f = row.f;
            best_g = best_g.min(row.grad_op_norm.hypot(row.grad_img_norm));
        })
        .unwrap();
        assert!(out.f < 0.5 * f0, "f {} -> {}", f0, out.f);
        assert!(best_g < 1e-2 * g0, "gradient norm {g0} -> {best_g}");
    }

    #[test]
    fn runs_are_reproducible() {
        let t = tiny(4, 0.01);
        let geom = PatchGeometry::new(2, 1).unwrap();
        let obj = Objective::new(&t.meas, geom, 8, 8, &t.cfg).unwrap();
        let opts = SolverOptions {
            stop: StoppingRule::new(1e-9, 60).unwrap(),
            ..Default::default()
        };
        let a = run(&obj, SolverState::initialize(&obj, 8, 9).unwrap(), &opts, |_, _| {}).unwrap();
        let b = run(&obj, SolverState::initialize(&obj, 8, 9).unwrap(), &opts, |_, _| {}).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.s, b.s);
    }

    #[test]
    fn frozen_operator_never_moves() {
        let t = tiny(5, 0.0);
        let geom = PatchGeometry::new(2, 1).unwrap();
        let obj = Objective::new(&t.meas, geom, 8, 8, &t.cfg).unwrap();
        let x0 = random_operator_point(4, 8, 3).unwrap();
        let state = SolverState::with_operator(&obj, x0.clone(), true).unwrap();
        let opts = SolverOptions {
            stop: StoppingRule::new(1e-9, 40).unwrap(),
            freeze_operator: true,
            ..Default::default()
        };
        let out = run(&obj, state, &opts, |_, _| {}).unwrap();
        assert_eq!(out.x, x0);
        assert!(out.trace.iter().all(|r| r.op_change == 0.0));
    }
}
