//! Steady-state Kalman filtering with correlated noise, the
//! observable-canonical observer, and model-free state estimation driven by
//! the online identifier.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{guarded_inverse, max_abs, min_symmetric_eigenvalue, symmetrize};
use crate::model::{
    polynomial_is_stable, to_observable_canonical, ArmaxParams, GaussianNoise, StateSpaceModel, STABILITY_TOL,
};
use crate::online::OnlineIdentifier;

pub const ARE_TOL: f64 = 1e-10;
pub const ARE_MAX_ITER: usize = 100_000;
/// Pivot guard for the innovation covariance `C Σ Cᵀ + R`.
pub const INNOVATION_GUARD: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;

/// Joint covariance `[[Q, S], [Sᵀ, R]]` of process noise `w` and
/// measurement noise `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseCovariance {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

impl NoiseCovariance {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>, s: DMatrix<f64>) -> Result<Self> {
        let nw = q.nrows();
        let nv = r.nrows();
        if q.ncols() != nw || r.ncols() != nv || s.nrows() != nw || s.ncols() != nv {
            return Err(Error::Dimension("Q, R, S shapes are inconsistent".into()));
        }
        let cov = Self { q, r, s };
        let joint = cov.joint();
        let scale = max_abs(&joint).max(1.0);
        if max_abs(&(&joint - joint.transpose())) > PSD_TOL * scale {
            return Err(Error::InvalidArgument("noise covariance is not symmetric".into()));
        }
        if min_symmetric_eigenvalue(&joint) < -PSD_TOL * scale {
            return Err(Error::InvalidArgument("noise covariance is not positive semidefinite".into()));
        }
        Ok(cov)
    }

    /// Scalar `Q`, `R`, `S`.
    pub fn scalar(q: f64, r: f64, s: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, q),
            DMatrix::from_element(1, 1, r),
            DMatrix::from_element(1, 1, s),
        )
    }

    pub fn joint(&self) -> DMatrix<f64> {
        let (nw, nv) = (self.q.nrows(), self.r.nrows());
        let mut j = DMatrix::zeros(nw + nv, nw + nv);
        j.view_mut((0, 0), (nw, nw)).copy_from(&self.q);
        j.view_mut((0, nw), (nw, nv)).copy_from(&self.s);
        j.view_mut((nw, 0), (nv, nw)).copy_from(&self.s.transpose());
        j.view_mut((nw, nw), (nv, nv)).copy_from(&self.r);
        j
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverSolution {
    /// Observer gain `L`.
    pub l: DMatrix<f64>,
    /// Steady-state prediction error covariance `Σ`.
    pub sigma: DMatrix<f64>,
    pub iterations: usize,
    /// `max |Σ − F(Σ)|` for the Riccati map `F`.
    pub residual: f64,
}

/// Riccati map of the predictor form: returns `(F(Σ), L(Σ))` with
///
/// ```text
/// G    = A Σ Cᵀ + B2 S
/// L    = G (C Σ Cᵀ + R)⁻¹
/// F(Σ) = A Σ Aᵀ − L Gᵀ + B2 Q B2ᵀ
/// ```
fn estimation_riccati_map(
    model: &StateSpaceModel,
    noise: &NoiseCovariance,
    sigma: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (a, b2, c) = (&model.a, &model.b2, &model.c);
    let g = a * sigma * c.transpose() + b2 * &noise.s;
    let innovation = c * sigma * c.transpose() + &noise.r;
    let inv = guarded_inverse(&innovation, INNOVATION_GUARD)?;
    let l = &g * inv;
    let next = a * sigma * a.transpose() - &l * g.transpose() + b2 * &noise.q * b2.transpose();
    Ok((symmetrize(&next), l))
}

/// Steady-state observer gain by fixed-point iteration of the filtering
/// Riccati equation from `Σ₀ = 0`, stopping once `max |Σₖ₊₁ − Σₖ| < tol`.
pub fn solve_estimation_are(
    model: &StateSpaceModel,
    noise: &NoiseCovariance,
    tol: f64,
    max_iter: usize,
) -> Result<ObserverSolution> {
    let n = model.dim();
    if noise.q.nrows() != model.b2.ncols() || noise.r.nrows() != model.c.nrows() {
        return Err(Error::Dimension("noise covariance does not match B2 / C".into()));
    }
    let mut sigma = DMatrix::zeros(n, n);
    let mut delta = f64::INFINITY;
    for iteration in 1..=max_iter {
        let (next, _) = estimation_riccati_map(model, noise, &sigma)?;
        delta = max_abs(&(&next - &sigma));
        sigma = next;
        if !delta.is_finite() {
            break;
        }
        if delta < tol {
            let (image, l) = estimation_riccati_map(model, noise, &sigma)?;
            let residual = max_abs(&(&image - &sigma));
            return Ok(ObserverSolution { l, sigma, iterations: iteration, residual });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: delta })
}

/// Prediction-form state estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub x_hat: DVector<f64>,
    pub k: u64,
}

impl EstimatorState {
    pub fn zeros(n: usize) -> Self {
        Self { x_hat: DVector::zeros(n), k: 0 }
    }
}

/// `x̂⁺ = A x̂ + B1 u + L (y − C x̂)`.
pub fn kalman_step(state: &EstimatorState, model: &StateSpaceModel, l: &DMatrix<f64>, u: f64, y: f64) -> EstimatorState {
    let innovation = y - model.output(&state.x_hat);
    let x_hat = model.advance(&state.x_hat, u, 0.0) + l.column(0) * innovation;
    EstimatorState { x_hat, k: state.k + 1 }
}

/// Optimal observer gain of the observable-canonical realization, `L = B2`.
pub fn canonical_observer_gain(params: &ArmaxParams) -> Result<DMatrix<f64>> {
    if !polynomial_is_stable(&params.c, STABILITY_TOL) {
        return Err(Error::Unstable("c(z) has zeros on or outside the unit circle".into()));
    }
    Ok(to_observable_canonical(params)?.b2)
}

/// Error covariance propagation under `L = B2`:
/// `Σ⁺ = (A − B2 C) Σ (A − B2 C)ᵀ`.
pub fn error_cov_step(sigma: &DMatrix<f64>, model: &StateSpaceModel) -> DMatrix<f64> {
    let closed = &model.a - &model.b2 * &model.c;
    &closed * sigma * closed.transpose()
}

/// Output of [`model_free_estimator_step`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFreeOutput {
    pub state: EstimatorState,
    /// Prediction error `e_k` of the identified predictor.
    pub e: f64,
    /// One-step prediction `ŷ_k`.
    pub y_hat: f64,
}

/// Feeds `(u_k, y_k)` to the identifier, then advances the state estimate
/// through the observable-canonical realization of the current estimate:
///
/// ```text
/// x̂_{k+1} = A⁽ᵏ⁾ x̂_k + B1⁽ᵏ⁾ u_k + B2⁽ᵏ⁾ (y_k − C x̂_k)
/// ```
///
/// The returned `ŷ_k`, `e_k` come from the identifier's predictor, whose
/// moving-average terms use its own past prediction errors. The state is
/// carried across parameter updates without re-projection.
pub fn model_free_estimator_step(
    ident: &mut OnlineIdentifier,
    state: &EstimatorState,
    u: f64,
    y: f64,
) -> Result<ModelFreeOutput> {
    let (n, m, p) = ident.orders();
    if n < m || n < p {
        return Err(Error::Dimension(format!("state estimation needs n ≥ m, p (n={n}, m={m}, p={p})")));
    }
    if state.x_hat.len() != n {
        return Err(Error::Dimension(format!("state has {} entries, expected {n}", state.x_hat.len())));
    }
    ident.step(u, y);
    let out = ident.last_step().expect("identifier just stepped").clone();
    let realization = to_observable_canonical(&ident.params())?;
    let next = kalman_step(state, &realization, &realization.b2, u, y);
    Ok(ModelFreeOutput { state: next, e: out.e, y_hat: out.y_hat })
}

/// Identifier and state estimate advanced in lockstep.
#[derive(Clone, Debug)]
pub struct ModelFreeEstimator {
    pub ident: OnlineIdentifier,
    pub state: EstimatorState,
}

impl ModelFreeEstimator {
    pub fn new(ident: OnlineIdentifier) -> Self {
        let n = ident.orders().0;
        Self { ident, state: EstimatorState::zeros(n) }
    }

    /// Current estimate `x̂_k` (based on outputs before `k`).
    pub fn x_hat(&self) -> &DVector<f64> {
        &self.state.x_hat
    }

    pub fn step(&mut self, u: f64, y: f64) -> Result<(f64, f64)> {
        let out = model_free_estimator_step(&mut self.ident, &self.state, u, y)?;
        self.state = out.state;
        Ok((out.e, out.y_hat))
    }
}

/// Simulates `x⁺ = A x + B1 u + B2 w`, `y = C x + v` with jointly Gaussian
/// `(w, v)` of covariance [`NoiseCovariance::joint`]. Returns `(y, x)`.
pub fn simulate_state_space(
    model: &StateSpaceModel,
    noise: &NoiseCovariance,
    input: &[f64],
    seed: u64,
) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let joint = noise.joint();
    let (nw, dim) = (noise.q.nrows(), joint.nrows());
    if model.b2.ncols() != nw || model.c.nrows() != dim - nw {
        return Err(Error::Dimension("noise covariance does not match B2 / C".into()));
    }
    // Symmetric square root handles singular (perfectly correlated) noise.
    let eig = symmetrize(&joint).symmetric_eigen();
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    let root = &eig.eigenvectors * sqrt_diag;
    let mut source = GaussianNoise::new(seed, crate::model::NOISE_STREAM, 1.0);
    let mut x = DVector::zeros(model.dim());
    let mut ys = Vec::with_capacity(input.len());
    let mut xs = Vec::with_capacity(input.len());
    for &u in input {
        let z = DVector::from_iterator(dim, (0..dim).map(|_| source.sample()));
        let wv = &root * z;
        let w = wv.rows(0, nw);
        let v = wv.rows(nw, dim - nw);
        let y = &model.c * &x + v;
        xs.push(x.clone());
        ys.push(y[0]);
        x = &model.a * &x + model.b1.column(0) * u + &model.b2 * w;
    }
    Ok((ys, xs))
}

/// The two realizations of `y_k = w_{k−1} + w_k + μ_k` used to show that
/// optimal state estimation depends on the chosen coordinates: the natural
/// one (`C = 1, Q = 1, R = 2, S = 1`) and the innovations form with
/// `C = α⁻¹`, `Q = R = S = α`, `α = (3 + √5)/2`, both with `A = 1`.
///
/// The output process itself has `x_{k+1} = w_k`, i.e. `A = 0`; use
/// [`pitfall_realizations_with`] to simulate it.
pub fn pitfall_realizations() -> [(StateSpaceModel, NoiseCovariance); 2] {
    pitfall_realizations_with(1.0)
}

/// [`pitfall_realizations`] with state transition `a`.
pub fn pitfall_realizations_with(a: f64) -> [(StateSpaceModel, NoiseCovariance); 2] {
    let one = || DMatrix::from_element(1, 1, 1.0);
    let alpha = 0.5 * (3.0 + 5.0_f64.sqrt());
    let natural = (
        StateSpaceModel::new(DMatrix::from_element(1, 1, a), DMatrix::zeros(1, 1), one(), one()).expect("1x1"),
        NoiseCovariance::scalar(1.0, 2.0, 1.0).expect("PSD"),
    );
    let innovations = (
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::zeros(1, 1),
            one(),
            DMatrix::from_element(1, 1, 1.0 / alpha),
        )
            .expect("1x1"),
        NoiseCovariance::scalar(alpha, alpha, alpha).expect("PSD"),
    );
    [natural, innovations]
}
