//! Discounted LQR/LQG: Riccati iteration, the Q-function blocks, policy
//! evaluation, and the model-free LQG recursion driven by the online
//! identifier.
//!
//! Control is applied as `u = −K x̂` with
//! `K = (B1ᵀ P B1 + γ⁻¹ R)⁻¹ B1ᵀ P A`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ModelFreeEstimator;
use crate::linalg::{max_abs, min_symmetric_eigenvalue, spectral_radius, symmetrize};
use crate::model::{to_observable_canonical, ArmaxParams, ArmaxPlant, GaussianNoise, DITHER_STREAM};
use crate::online::OnlineIdentifier;

pub const DARE_TOL: f64 = 1e-10;
pub const DARE_MAX_ITER: usize = 100_000;
/// Smallest admissible `B1ᵀ P B1 + γ⁻¹ R`.
pub const GAIN_GUARD: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;

/// Cost weights and discount of `E Σ γᵗ (xᵀ Q x + R u²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LqgWeights {
    pub q: DMatrix<f64>,
    pub r: f64,
    pub gamma: f64,
}

impl LqgWeights {
    pub fn new(q: DMatrix<f64>, r: f64, gamma: f64) -> Result<Self> {
        let w = Self { q, r, gamma };
        w.validate()?;
        Ok(w)
    }

    /// `Q = I_n`.
    pub fn identity(n: usize, r: f64, gamma: f64) -> Result<Self> {
        Self::new(DMatrix::identity(n, n), r, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.q, self.r, self.gamma)
    }
}

fn validate_weights(q: &DMatrix<f64>, r: f64, gamma: f64) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::Dimension("Q must be square".into()));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Q has non-finite entries".into()));
    }
    let scale = max_abs(q).max(1.0);
    if max_abs(&(q - q.transpose())) > PSD_TOL * scale || min_symmetric_eigenvalue(q) < -PSD_TOL * scale {
        return Err(Error::InvalidArgument("Q must be symmetric positive semidefinite".into()));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("R must be positive, got {r}")));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("discount must lie in (0, 1), got {gamma}")));
    }
    Ok(())
}

fn check_dims(a: &DMatrix<f64>, b1: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b1.nrows() != n || b1.ncols() != 1 || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "A {}x{}, B1 {}x{}, Q {}x{} are inconsistent (single input)",
            a.nrows(),
            a.ncols(),
            b1.nrows(),
            b1.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LqrSolution {
    pub p: DMatrix<f64>,
    /// `1 × n` gain; the control is `u = −K x`.
    pub k: DMatrix<f64>,
    pub gamma: f64,
    /// Sweeps applied to `P0` to reach `p`.
    pub iterations: usize,
    /// `max |P − F(P)|` for the Riccati map `F`.
    pub residual: f64,
}

/// `K = (B1ᵀ P B1 + γ⁻¹ R)⁻¹ B1ᵀ P A`.
pub fn lqr_gain(p: &DMatrix<f64>, a: &DMatrix<f64>, b1: &DMatrix<f64>, r: f64, gamma: f64) -> Result<DMatrix<f64>> {
    if p.nrows() != a.nrows() || p.ncols() != a.nrows() || b1.nrows() != a.nrows() || b1.ncols() != 1 {
        return Err(Error::Dimension("P, A, B1 are inconsistent".into()));
    }
    let pb = p * b1;
    let inner = (b1.transpose() * &pb)[(0, 0)] + r / gamma;
    if !(inner.abs() >= GAIN_GUARD) || !inner.is_finite() {
        return Err(Error::Singular(format!("B1ᵀPB1 + R/γ = {inner:.3e}")));
    }
    Ok(pb.transpose() * a / inner)
}

/// One sweep of the discounted Riccati map
/// `P⁺ = Q + γ (AᵀPA − AᵀPB1 (B1ᵀPB1 + γ⁻¹R)⁻¹ B1ᵀPA)`.
pub fn riccati_sweep(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    Ok(riccati_sweep_with_gain(p, a, b1, q, r, gamma)?.0)
}

fn riccati_sweep_with_gain(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = lqr_gain(p, a, b1, r, gamma)?;
    let pa = p * a;
    let next = q + (a.transpose() * &pa - pa.transpose() * b1 * &k) * gamma;
    Ok((symmetrize(&next), k))
}

/// The same sweep written through the matrix inversion lemma,
/// `P⁺ = Q + γ Aᵀ (P⁻¹ + γ B1 R⁻¹ B1ᵀ)⁻¹ A`. Needs `P` positive definite.
pub fn riccati_sweep_inversion_lemma(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
) -> Result<DMatrix<f64>> {
    check_dims(a, b1, q)?;
    let p_inv = p
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("P must be positive definite".into()))?
        .inverse();
    let inner = p_inv + b1 * b1.transpose() * (gamma / r);
    let inner_inv = inner
        .cholesky()
        .ok_or_else(|| Error::Singular("P⁻¹ + γ B1 R⁻¹ B1ᵀ is not positive definite".into()))?
        .inverse();
    Ok(symmetrize(&(q + a.transpose() * inner_inv * a * gamma)))
}

/// `max |P − F(P)|`.
pub fn dare_residual(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
) -> Result<f64> {
    Ok(max_abs(&(riccati_sweep(p, a, b1, q, r, gamma)? - p)))
}

/// Iterates the discounted Riccati map from `P0` until
/// `max |Pₖ₊₁ − Pₖ| < tol`.
#[allow(clippy::too_many_arguments)]
pub fn dare_solve(
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
    p0: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LqrSolution> {
    let n = check_dims(a, b1, q)?;
    validate_weights(q, r, gamma)?;
    if p0.nrows() != n || p0.ncols() != n {
        return Err(Error::Dimension("P0 must be n×n".into()));
    }
    // Returns the iterate whose own step is below tol, so the reported
    // residual is the stopping quantity itself.
    let mut p = symmetrize(p0);
    let mut delta = f64::INFINITY;
    for iteration in 1..=max_iter {
        let (next, k) = riccati_sweep_with_gain(&p, a, b1, q, r, gamma)?;
        delta = max_abs(&(&next - &p));
        if !delta.is_finite() {
            break;
        }
        if delta < tol {
            return Ok(LqrSolution { p, k, gamma, iterations: iteration - 1, residual: delta });
        }
        p = next;
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: delta })
}

/// Blocks of the quadratic Q-function `[x; u]ᵀ H [x; u]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix {
    pub h11: DMatrix<f64>,
    pub h12: DMatrix<f64>,
    pub h22: f64,
}

impl QMatrix {
    /// Full symmetric `(n+1)×(n+1)` matrix.
    pub fn full(&self) -> DMatrix<f64> {
        let n = self.h11.nrows();
        let mut h = DMatrix::zeros(n + 1, n + 1);
        h.view_mut((0, 0), (n, n)).copy_from(&self.h11);
        h.view_mut((0, n), (n, 1)).copy_from(&self.h12);
        h.view_mut((n, 0), (1, n)).copy_from(&self.h12.transpose());
        h[(n, n)] = self.h22;
        h
    }

    /// `H11 − H12 H22⁻¹ H12ᵀ`.
    pub fn schur_complement(&self) -> DMatrix<f64> {
        &self.h11 - &self.h12 * self.h12.transpose() / self.h22
    }

    /// Minimizer over `u`: `−H22⁻¹ H12ᵀ x`.
    pub fn argmin(&self, x: &DVector<f64>) -> f64 {
        -(self.h12.transpose() * x)[(0, 0)] / self.h22
    }

    pub fn evaluate(&self, x: &DVector<f64>, u: f64) -> f64 {
        (x.transpose() * &self.h11 * x)[(0, 0)] + 2.0 * u * (self.h12.transpose() * x)[(0, 0)] + self.h22 * u * u
    }
}

/// `H11 = Q + γAᵀPA`, `H12 = γAᵀPB1`, `H22 = γB1ᵀPB1 + R`.
pub fn q_matrix(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b1: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    gamma: f64,
) -> Result<QMatrix> {
    check_dims(a, b1, q)?;
    if p.nrows() != a.nrows() || p.ncols() != a.nrows() {
        return Err(Error::Dimension("P must be n×n".into()));
    }
    let pb = p * b1;
    Ok(QMatrix {
        h11: q + a.transpose() * p * a * gamma,
        h12: a.transpose() * &pb * gamma,
        h22: gamma * (b1.transpose() * pb)[(0, 0)] + r,
    })
}

/// Value of the autonomous system `x⁺ = A x + B w`, `w ~ N(0, σ²)`, under
/// `E Σ γᵗ xᵀ Q x`: returns `P = Q + γAᵀPA` and the noise offset
/// `γσ²/(1−γ) BᵀPB`, so `V(x) = xᵀPx + offset`.
pub fn evaluate_value(
    a_closed: &DMatrix<f64>,
    q_eff: &DMatrix<f64>,
    b: &DMatrix<f64>,
    sigma2: f64,
    gamma: f64,
    tol: f64,
) -> Result<(DMatrix<f64>, f64)> {
    let n = check_dims(a_closed, b, q_eff)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("discount must lie in (0, 1), got {gamma}")));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument("σ² must be non-negative".into()));
    }
    let rate = gamma.sqrt() * spectral_radius(a_closed);
    if !(rate < 1.0) {
        return Err(Error::Unstable(format!("√γ·ρ(A) = {rate:.6} ≥ 1")));
    }
    let mut p = q_eff.clone();
    // Contraction factor is rate²; cap iterations generously.
    let max_iter = ((tol.max(1e-300).ln() / (rate * rate).max(1e-300).ln()).ceil() as usize).clamp(10, 10_000_000) * 4;
    let mut converged = n == 0;
    for _ in 0..max_iter {
        let next = symmetrize(&(q_eff + a_closed.transpose() * &p * a_closed * gamma));
        let delta = max_abs(&(&next - &p));
        p = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        let residual = max_abs(&(q_eff + a_closed.transpose() * &p * a_closed * gamma - &p));
        return Err(Error::NoConvergence { iterations: max_iter, residual });
    }
    let offset = gamma * sigma2 / (1.0 - gamma) * (b.transpose() * &p * b)[(0, 0)];
    Ok((p, offset))
}

/// Running `(Pₖ, Kₖ)` of the model-free LQG recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct LqgState {
    pub p: DMatrix<f64>,
    /// `1 × n` gain applied as `u = −K x̂`.
    pub gain: DMatrix<f64>,
    pub k: u64,
    /// Sweeps rejected because the inner matrix was singular or the
    /// update was not finite.
    pub rejected: u64,
}

impl LqgState {
    pub fn new(p0: DMatrix<f64>) -> Result<Self> {
        let n = p0.nrows();
        if p0.ncols() != n {
            return Err(Error::Dimension("P0 must be square".into()));
        }
        if n > 0 && p0.clone().cholesky().is_none() {
            return Err(Error::InvalidArgument("P0 must be positive definite".into()));
        }
        Ok(Self { p: p0, gain: DMatrix::zeros(1, n), k: 0, rejected: 0 })
    }

    /// `P0 = I`.
    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    /// One Riccati sweep on the model `(A, B1)`: forms `Kₖ` from `Pₖ`,
    /// advances to `Pₖ₊₁`, and returns `uₖ = −Kₖ x̂`. A singular inner
    /// matrix keeps the previous `(P, K)`.
    pub fn step_with_model(&mut self, a: &DMatrix<f64>, b1: &DMatrix<f64>, x_hat: &DVector<f64>, weights: &LqgWeights) -> Result<f64> {
        let n = check_dims(a, b1, &weights.q)?;
        if n != self.dim() || x_hat.len() != n {
            return Err(Error::Dimension(format!("LQG state has dimension {}, model {n}, x̂ {}", self.dim(), x_hat.len())));
        }
        match riccati_sweep_with_gain(&self.p, a, b1, &weights.q, weights.r, weights.gamma) {
            Ok((next, gain)) if next.iter().chain(gain.iter()).all(|v| v.is_finite()) => {
                self.p = next;
                self.gain = gain;
            }
            Ok(_) => {
                self.rejected += 1;
                log::warn!("LQG step {}: non-finite Riccati update, keeping previous gain", self.k);
            }
            Err(e) => {
                self.rejected += 1;
                log::warn!("LQG step {}: {e}, keeping previous gain", self.k);
            }
        }
        self.k += 1;
        Ok(-(&self.gain * x_hat)[(0, 0)])
    }
}

/// Model-free LQG step: realizes the identifier's current estimate in
/// observable-canonical form, runs one Riccati sweep and returns
/// `uₖ = −Kₖ x̂ₖ`.
pub fn model_free_lqg_step(
    lqg: &mut LqgState,
    ident: &OnlineIdentifier,
    x_hat: &DVector<f64>,
    weights: &LqgWeights,
) -> Result<f64> {
    let model = to_observable_canonical(&ident.params())?;
    lqg.step_with_model(&model.a, &model.b1, x_hat, weights)
}

/// `J_k = Σ_{t<horizon} γᵗ c_{k+t}` for every `k` with a full window.
pub fn discounted_cost_to_go(costs: &[f64], gamma: f64, horizon: usize) -> Vec<f64> {
    if costs.len() < horizon || horizon == 0 {
        return Vec::new();
    }
    // Backward recursion J_k = c_k + γ J_{k+1}, then strip the tail beyond
    // the window: J_k − γᴴ J_{k+H}.
    let mut full = vec![0.0; costs.len() + 1];
    for k in (0..costs.len()).rev() {
        full[k] = costs[k] + gamma * full[k + 1];
    }
    let tail = gamma.powi(horizon as i32);
    (0..=costs.len() - horizon).map(|k| full[k] - tail * full[k + horizon]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopOptions {
    pub horizon: usize,
    pub seed: u64,
    /// Dither variance during the exploration window.
    pub dither_variance: f64,
    /// Number of leading samples with dither added.
    pub dither_window: usize,
    /// Initial `P` scale of the recursive IV estimator.
    pub p0: f64,
}

impl ClosedLoopOptions {
    /// Dither of unit variance over the first tenth of the horizon.
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self { horizon, seed, dither_variance: 1.0, dither_window: horizon / 10, p0: crate::online::DEFAULT_P0 }
    }
}

/// Per-step record of a closed-loop run.
#[derive(Clone, Debug)]
pub struct ClosedLoopTrace {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Stage cost `xₖᵀ Q xₖ + R uₖ²` on the true state.
    pub cost: Vec<f64>,
    /// True states `xₖ`.
    pub x: Vec<DVector<f64>>,
    /// Row-major `horizon × n` gains `Kₖ`.
    pub gains: Vec<f64>,
    pub lqg: LqgState,
    pub estimator: ModelFreeEstimator,
}

impl ClosedLoopTrace {
    pub fn gain_at(&self, k: usize) -> &[f64] {
        let n = self.lqg.dim();
        &self.gains[k * n..(k + 1) * n]
    }
}

/// Runs the plant under `u = −Kₖ x̂ₖ` (+ dither) with identifier, state
/// estimate and Riccati recursion all learned online from `(u, y)`.
pub fn run_closed_loop(params: &ArmaxParams, weights: &LqgWeights, opts: &ClosedLoopOptions) -> Result<ClosedLoopTrace> {
    weights.validate()?;
    let mut plant = ArmaxPlant::new(params, opts.seed)?;
    let n = plant.model().dim();
    if weights.q.nrows() != n {
        return Err(Error::Dimension(format!("Q is {}x{}, state dimension is {n}", weights.q.nrows(), weights.q.ncols())));
    }
    let ident = OnlineIdentifier::new(params.n(), params.m(), params.p(), opts.p0)?;
    let mut estimator = ModelFreeEstimator::new(ident);
    let mut lqg = LqgState::identity(n);
    let mut dither = GaussianNoise::new(opts.seed, DITHER_STREAM, opts.dither_variance);

    let t = opts.horizon;
    let mut trace_u = Vec::with_capacity(t);
    let mut trace_y = Vec::with_capacity(t);
    let mut cost = Vec::with_capacity(t);
    let mut xs = Vec::with_capacity(t);
    let mut gains = Vec::with_capacity(t * n);
    for k in 0..t {
        let x_hat = estimator.x_hat().clone();
        let mut u = model_free_lqg_step(&mut lqg, &estimator.ident, &x_hat, weights)?;
        if k < opts.dither_window {
            u += dither.sample();
        }
        let sample = plant.step(u);
        estimator.step(u, sample.y)?;
        cost.push((sample.x.transpose() * &weights.q * &sample.x)[(0, 0)] + weights.r * u * u);
        gains.extend(lqg.gain.iter());
        trace_u.push(u);
        trace_y.push(sample.y);
        xs.push(sample.x);
    }
    Ok(ClosedLoopTrace { u: trace_u, y: trace_y, cost, x: xs, gains, lqg, estimator })
}

/// Optimal steady-state value `V★(x) = xᵀPx + γσ²/(1−γ) B2ᵀPB2` with `P`
/// from the DARE of the true canonical realization.
pub fn optimal_value(params: &ArmaxParams, weights: &LqgWeights) -> Result<(LqrSolution, f64)> {
    let model = to_observable_canonical(params)?;
    let n = model.dim();
    let sol = dare_solve(&model.a, &model.b1, &weights.q, weights.r, weights.gamma, &DMatrix::identity(n, n), DARE_TOL, DARE_MAX_ITER)?;
    let gamma = weights.gamma;
    let offset = gamma * params.sigma2 / (1.0 - gamma) * (model.b2.transpose() * &sol.p * &model.b2)[(0, 0)];
    Ok((sol, offset))
}
