//! ARMAX model representation, simulation, observable-canonical realization
//! and signal statistics.
//!
//! The model is
//!
//! ```text
//! y_k + a_1 y_{k-1} + … + a_n y_{k-n}
//!     = b_1 u_{k-1} + … + b_m u_{k-m} + w_k + c_1 w_{k-1} + … + c_p w_{k-p}
//! ```
//!
//! with `w_k ~ N(0, σ²)`. All simulations treat samples before `k = 0` as
//! zero.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream id used for process noise; inputs generated by the harness use
/// other streams of the same seed.
pub const NOISE_STREAM: u64 = 0;
/// Stream for generated excitation inputs.
pub const INPUT_STREAM: u64 = 1;
/// Stream for closed-loop exploration dither.
pub const DITHER_STREAM: u64 = 2;

/// Default stability margin for [`polynomial_is_stable`].
pub const STABILITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolyKind {
    /// `1 + p_1 z⁻¹ + … + p_d z⁻ᵈ`
    Monic,
    /// `p_1 z⁻¹ + … + p_d z⁻ᵈ`
    StrictlyCausal,
}

/// Polynomial in the delay operator `z⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayPolynomial {
    coeffs: Vec<f64>,
    kind: PolyKind,
}

impl DelayPolynomial {
    pub fn monic(coeffs: Vec<f64>) -> Self {
        Self { coeffs, kind: PolyKind::Monic }
    }

    pub fn strictly_causal(coeffs: Vec<f64>) -> Self {
        Self { coeffs, kind: PolyKind::StrictlyCausal }
    }

    /// The constant polynomial 1.
    pub fn one() -> Self {
        Self::monic(Vec::new())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn kind(&self) -> PolyKind {
        self.kind
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of `z⁻ⁱ` for `i ≥ 1`; zero beyond the degree.
    pub fn coeff(&self, i: usize) -> f64 {
        if i == 0 {
            return match self.kind {
                PolyKind::Monic => 1.0,
                PolyKind::StrictlyCausal => 0.0,
            };
        }
        self.coeffs.get(i - 1).copied().unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Filters `signal` through the polynomial with zero initial state.
    pub fn apply(&self, signal: &[f64]) -> Vec<f64> {
        (0..signal.len())
            .map(|k| {
                let mut acc = self.coeff(0) * signal[k];
                for (i, c) in self.coeffs.iter().enumerate() {
                    if let Some(j) = k.checked_sub(i + 1) {
                        acc += c * signal[j];
                    }
                }
                acc
            })
            .collect()
    }
}

/// Parameter set `(a, b, c, σ²)` of an ARMAX model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ArmaxParamsRepr", into = "ArmaxParamsRepr")]
pub struct ArmaxParams {
    pub a: DelayPolynomial,
    pub b: DelayPolynomial,
    pub c: DelayPolynomial,
    pub sigma2: f64,
}

#[derive(Serialize, Deserialize)]
struct ArmaxParamsRepr {
    #[serde(default)]
    a: Vec<f64>,
    #[serde(default)]
    b: Vec<f64>,
    #[serde(default)]
    c: Vec<f64>,
    sigma2: f64,
}

impl TryFrom<ArmaxParamsRepr> for ArmaxParams {
    type Error = Error;

    fn try_from(r: ArmaxParamsRepr) -> Result<Self> {
        ArmaxParams::new(r.a, r.b, r.c, r.sigma2)
    }
}

impl From<ArmaxParams> for ArmaxParamsRepr {
    fn from(p: ArmaxParams) -> Self {
        ArmaxParamsRepr {
            a: p.a.coeffs,
            b: p.b.coeffs,
            c: p.c.coeffs,
            sigma2: p.sigma2,
        }
    }
}

impl ArmaxParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, sigma2: f64) -> Result<Self> {
        let params = Self {
            a: DelayPolynomial::monic(a),
            b: DelayPolynomial::strictly_causal(b),
            c: DelayPolynomial::monic(c),
            sigma2,
        };
        params.validate()?;
        Ok(params)
    }

    /// Splits a stacked vector `[a; b; c]` back into polynomials.
    pub fn from_theta(n: usize, m: usize, p: usize, theta: &[f64], sigma2: f64) -> Result<Self> {
        if theta.len() != n + m + p {
            return Err(Error::Dimension(format!(
                "theta has {} entries, expected n+m+p = {}",
                theta.len(),
                n + m + p
            )));
        }
        Self::new(
            theta[..n].to_vec(),
            theta[n..n + m].to_vec(),
            theta[n + m..].to_vec(),
            sigma2.max(0.0),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidModel(format!("noise variance {} must be finite and ≥ 0", self.sigma2)));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.a.degree()
    }

    pub fn m(&self) -> usize {
        self.b.degree()
    }

    pub fn p(&self) -> usize {
        self.c.degree()
    }

    /// Stacked parameter vector `[a_1…a_n b_1…b_m c_1…c_p]`.
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n() + self.m() + self.p(),
            self.a.coeffs.iter().chain(&self.b.coeffs).chain(&self.c.coeffs).copied(),
        )
    }

    /// Whether the observable-canonical realization exists (`n ≥ m`, `n ≥ p`).
    pub fn is_realizable(&self) -> bool {
        self.n() >= self.m() && self.n() >= self.p()
    }
}

/// `(A, B1, B2, C)` with `x⁺ = A x + B1 u + B2 w`, `y = C x + w`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b1: DMatrix<f64>, b2: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b1.nrows() != n || b2.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A {}x{}, B1 {}x{}, B2 {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b1.nrows(),
                b1.ncols(),
                b2.nrows(),
                b2.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self { a, b1, b2, c })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Scalar-channel state update.
    pub fn advance(&self, x: &DVector<f64>, u: f64, w: f64) -> DVector<f64> {
        &self.a * x + self.b1.column(0) * u + self.b2.column(0) * w
    }

    /// `C x` for a single-output model.
    pub fn output(&self, x: &DVector<f64>) -> f64 {
        if self.dim() == 0 {
            0.0
        } else {
            (&self.c * x)[0]
        }
    }
}

/// Input/output record with optional hidden truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Option<Vec<f64>>,
    pub x: Option<Vec<Vec<f64>>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.y.len();
        let same = self.u.len() == t
            && self.w.as_ref().is_none_or(|w| w.len() == t)
            && self.x.as_ref().is_none_or(|x| x.len() == t);
        if !same {
            return Err(Error::Dimension("trajectory sequences differ in length".into()));
        }
        if let Some(x) = &self.x {
            if let Some(first) = x.first() {
                if x.iter().any(|row| row.len() != first.len()) {
                    return Err(Error::Dimension("state rows differ in length".into()));
                }
            }
        }
        Ok(())
    }

    /// State dimension of the recorded truth, if any.
    pub fn state_dim(&self) -> Option<usize> {
        self.x.as_ref().map(|x| x.first().map_or(0, Vec::len))
    }
}

/// Seeded Gaussian noise: ChaCha8 keystream mapped through the ziggurat
/// sampler of `rand_distr::StandardNormal`, scaled by `√σ²`.
#[derive(Clone, Debug)]
pub struct GaussianNoise {
    rng: ChaCha8Rng,
    scale: f64,
}

impl GaussianNoise {
    pub fn new(seed: u64, stream: u64, variance: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, scale: variance.max(0.0).sqrt() }
    }

    pub fn sample(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.scale * z
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationOptions {
    pub seed: u64,
    pub with_truth: bool,
    /// Leading samples simulated and then discarded.
    pub burn_in: usize,
}

/// Simulates the ARMAX recursion for `horizon` samples with zero
/// pre-sample values and seeded Gaussian noise.
pub fn simulate_armax(
    params: &ArmaxParams,
    input: &[f64],
    horizon: usize,
    seed: u64,
    with_truth: bool,
) -> Result<Trajectory> {
    simulate_armax_with(params, input, horizon, &SimulationOptions { seed, with_truth, burn_in: 0 })
}

/// Like [`simulate_armax`], but discards `burn_in` leading samples. The
/// input must cover `burn_in + horizon` samples.
pub fn simulate_armax_with(
    params: &ArmaxParams,
    input: &[f64],
    horizon: usize,
    opts: &SimulationOptions,
) -> Result<Trajectory> {
    params.validate()?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be ≥ 1".into()));
    }
    let total = opts.burn_in + horizon;
    if input.len() < total {
        return Err(Error::InvalidArgument(format!(
            "input has {} samples, need {}",
            input.len(),
            total
        )));
    }
    if input[..total].iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite input sample".into()));
    }
    let mut noise = GaussianNoise::new(opts.seed, NOISE_STREAM, params.sigma2);
    let w: Vec<f64> = (0..total).map(|_| noise.sample()).collect();
    let u = &input[..total];

    let mut y = vec![0.0; total];
    for k in 0..total {
        let mut acc = w[k];
        for i in 1..=params.n() {
            if k >= i {
                acc -= params.a.coeff(i) * y[k - i];
            }
        }
        for i in 1..=params.m() {
            if k >= i {
                acc += params.b.coeff(i) * u[k - i];
            }
        }
        for i in 1..=params.p() {
            if k >= i {
                acc += params.c.coeff(i) * w[k - i];
            }
        }
        y[k] = acc;
    }

    let x = if opts.with_truth && params.is_realizable() {
        let ss = to_observable_canonical(params)?;
        let mut state = DVector::zeros(ss.dim());
        let mut xs = Vec::with_capacity(total);
        for k in 0..total {
            xs.push(state.as_slice().to_vec());
            state = ss.advance(&state, u[k], w[k]);
        }
        Some(xs.split_off(opts.burn_in))
    } else {
        None
    };

    let skip = opts.burn_in;
    Ok(Trajectory {
        u: u[skip..].to_vec(),
        y: y[skip..].to_vec(),
        w: opts.with_truth.then(|| w[skip..].to_vec()),
        x,
        seed: opts.seed,
    })
}

/// One sample emitted by [`ArmaxPlant::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct PlantSample {
    pub y: f64,
    pub w: f64,
    /// State `x_k` before the input `u_k` is applied.
    pub x: DVector<f64>,
}

/// Sample-by-sample ARMAX plant in observable-canonical coordinates, for
/// closed-loop runs where `u_k` depends on past outputs.
#[derive(Clone, Debug)]
pub struct ArmaxPlant {
    model: StateSpaceModel,
    state: DVector<f64>,
    noise: GaussianNoise,
}

impl ArmaxPlant {
    pub fn new(params: &ArmaxParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let model = to_observable_canonical(params)?;
        let state = DVector::zeros(model.dim());
        Ok(Self { model, state, noise: GaussianNoise::new(seed, NOISE_STREAM, params.sigma2) })
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    /// Emits `y_k = C x_k + w_k` and advances to `x_{k+1}` under `u_k`.
    /// `y_k` does not depend on `u_k`.
    pub fn step(&mut self, u: f64) -> PlantSample {
        let w = self.noise.sample();
        let y = self.model.output(&self.state) + w;
        let next = self.model.advance(&self.state, u, w);
        let x = std::mem::replace(&mut self.state, next);
        PlantSample { y, w, x }
    }
}

/// Observable-canonical realization: companion `A` with last column
/// `[-a_n … -a_1]ᵀ`, `B1 = [b_n … b_1]ᵀ`, `B2 = [c̃_n … c̃_1]ᵀ` where
/// `c̃_i = c_i − a_i`, and `C = [0 … 0 1]`.
pub fn to_observable_canonical(params: &ArmaxParams) -> Result<StateSpaceModel> {
    let (n, m, p) = (params.n(), params.m(), params.p());
    if n < m || n < p {
        return Err(Error::Dimension(format!(
            "observable-canonical form needs n ≥ m and n ≥ p (n={n}, m={m}, p={p})"
        )));
    }
    let mut a = DMatrix::zeros(n, n);
    let mut b1 = DMatrix::zeros(n, 1);
    let mut b2 = DMatrix::zeros(n, 1);
    let mut c = DMatrix::zeros(1, n);
    for row in 0..n {
        if row > 0 {
            a[(row, row - 1)] = 1.0;
        }
        let i = n - row;
        a[(row, n - 1)] = -params.a.coeff(i);
        b1[(row, 0)] = params.b.coeff(i);
        b2[(row, 0)] = params.c.coeff(i) - params.a.coeff(i);
    }
    if n > 0 {
        c[(0, n - 1)] = 1.0;
    }
    StateSpaceModel::new(a, b1, b2, c)
}

/// True iff every root of `zᵈ + p_1 zᵈ⁻¹ + … + p_d` has modulus below
/// `1 − tolerance`. The coefficients are read as a monic polynomial.
pub fn polynomial_is_stable(poly: &DelayPolynomial, tolerance: f64) -> bool {
    debug_assert_eq!(poly.kind(), PolyKind::Monic);
    polynomial_roots_max_modulus(poly.coeffs()) < 1.0 - tolerance
}

/// Largest root modulus of `zᵈ + p_1 zᵈ⁻¹ + … + p_d` (0 for d = 0).
pub fn polynomial_roots_max_modulus(coeffs: &[f64]) -> f64 {
    let d = coeffs.len();
    if d == 0 {
        return 0.0;
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return f64::INFINITY;
    }
    let mut companion = DMatrix::zeros(d, d);
    for (j, c) in coeffs.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..d {
        companion[(i, i - 1)] = 1.0;
    }
    crate::linalg::spectral_radius(&companion)
}

/// Empirical autocorrelations `r(i) = (1/(T−i)) Σ_{k≥i} y_k y_{k−i}` for
/// `i = 0..=max_lag`.
pub fn autocorrelation(signal: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::InvalidArgument("autocorrelation of an empty signal".into()));
    }
    if signal.len() <= max_lag {
        return Err(Error::InvalidArgument(format!(
            "signal length {} must exceed max lag {}",
            signal.len(),
            max_lag
        )));
    }
    let t = signal.len();
    Ok((0..=max_lag)
        .map(|lag| {
            let sum: f64 = signal[lag..].iter().zip(signal).map(|(a, b)| a * b).sum();
            sum / (t - lag) as f64
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Input,
    Noise,
}

/// Markov parameters from `u` or `w` to `y`: the direct term (0 for the
/// input, 1 for the noise) followed by `C Aʲ⁻¹ B`.
pub fn impulse_response(model: &StateSpaceModel, channel: Channel, steps: usize) -> Vec<f64> {
    let (b, direct) = match channel {
        Channel::Input => (&model.b1, 0.0),
        Channel::Noise => (&model.b2, 1.0),
    };
    let mut out = Vec::with_capacity(steps);
    if steps == 0 {
        return out;
    }
    out.push(direct);
    let mut v: DVector<f64> = b.column(0).into_owned();
    for _ in 1..steps {
        out.push(model.output(&v));
        v = &model.a * v;
    }
    out
}

/// Impulse response of `b(z)/a(z)` (input) or `c(z)/a(z)` (noise) by
/// polynomial long division.
pub fn transfer_impulse_response(params: &ArmaxParams, channel: Channel, steps: usize) -> Vec<f64> {
    let num = match channel {
        Channel::Input => &params.b,
        Channel::Noise => &params.c,
    };
    let mut h: Vec<f64> = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut v = num.coeff(k);
        for i in 1..=params.n().min(k) {
            v -= params.a.coeff(i) * h[k - i];
        }
        h.push(v);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn impulse(len: usize) -> Vec<f64> {
        let mut u = vec![0.0; len];
        u[0] = 1.0;
        u
    }

    #[test]
    fn first_order_impulse_by_hand() {
        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![], 0.0).unwrap();
        let traj = simulate_armax(&params, &impulse(6), 6, 1, false).unwrap();
        assert_eq!(traj.y, vec![0.0, 1.0, 0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn zero_input_zero_noise_is_silent() {
        let params = ArmaxParams::new(vec![-1.1, 0.3], vec![1.0], vec![0.4], 0.0).unwrap();
        let traj = simulate_armax(&params, &[0.0; 30], 30, 9, true).unwrap();
        assert!(traj.y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let params = ArmaxParams::new(vec![-1.1, 0.3], vec![1.0], vec![0.4], 1.0).unwrap();
        let u: Vec<f64> = (0..100).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let a = simulate_armax(&params, &u, 100, 42, true).unwrap();
        let b = simulate_armax(&params, &u, 100, 42, true).unwrap();
        assert_eq!(a, b);
        let c = simulate_armax(&params, &u, 100, 43, true).unwrap();
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad = ArmaxParams {
            a: DelayPolynomial::monic(vec![f64::NAN]),
            b: DelayPolynomial::strictly_causal(vec![]),
            c: DelayPolynomial::one(),
            sigma2: 1.0,
        };
        assert!(matches!(simulate_armax(&bad, &[0.0; 4], 4, 0, false), Err(Error::InvalidModel(_))));
        let ok = ArmaxParams::new(vec![0.1], vec![], vec![], 1.0).unwrap();
        assert!(simulate_armax(&ok, &[0.0; 4], 0, 0, false).is_err());
        assert!(simulate_armax(&ok, &[0.0; 3], 4, 0, false).is_err());
        assert!(ArmaxParams::new(vec![], vec![], vec![], -1.0).is_err());
    }

    #[test]
    fn burn_in_drops_leading_samples() {
        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![0.2], 1.0).unwrap();
        let u: Vec<f64> = (0..50).map(|k| (k as f64).sin()).collect();
        let full = simulate_armax(&params, &u, 50, 3, true).unwrap();
        let opts = SimulationOptions { seed: 3, with_truth: true, burn_in: 20 };
        let tail = simulate_armax_with(&params, &u, 30, &opts).unwrap();
        assert_eq!(tail.y, full.y[20..]);
        assert_eq!(tail.x.unwrap(), full.x.unwrap()[20..]);
    }

    #[test]
    fn canonical_form_worked_example() {
        let params = ArmaxParams::new(vec![0.5, 0.25], vec![1.0], vec![0.4], 1.0).unwrap();
        let ss = to_observable_canonical(&params).unwrap();
        assert_eq!(ss.a, DMatrix::from_row_slice(2, 2, &[0.0, -0.25, 1.0, -0.5]));
        assert_eq!(ss.b1.as_slice(), &[0.0, 1.0]);
        assert_abs_diff_eq!(ss.b2[(0, 0)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(ss.b2[(1, 0)], -0.1, epsilon = 1e-15);
        assert_eq!(ss.c.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn canonical_form_all_zero() {
        let params = ArmaxParams::new(vec![0.0], vec![0.0], vec![0.0], 1.0).unwrap();
        let ss = to_observable_canonical(&params).unwrap();
        assert_eq!(ss.a.as_slice(), &[0.0]);
        assert_eq!(ss.b1.as_slice(), &[0.0]);
        assert_eq!(ss.b2.as_slice(), &[0.0]);
        assert_eq!(ss.c.as_slice(), &[1.0]);
    }

    #[test]
    fn canonical_form_dimension_error() {
        let params = ArmaxParams::new(vec![0.5], vec![1.0, 2.0], vec![], 1.0).unwrap();
        assert!(matches!(to_observable_canonical(&params), Err(Error::Dimension(_))));
        let params = ArmaxParams::new(vec![0.5], vec![], vec![0.1, 0.1], 1.0).unwrap();
        assert!(matches!(to_observable_canonical(&params), Err(Error::Dimension(_))));
    }

    #[test]
    fn stability_examples() {
        assert!(polynomial_is_stable(&DelayPolynomial::monic(vec![0.5]), STABILITY_TOL));
        assert!(!polynomial_is_stable(&DelayPolynomial::monic(vec![2.0]), STABILITY_TOL));
        // z² − 1.5z + 0.7: complex pair with modulus √0.7 ≈ 0.837
        assert!(polynomial_is_stable(&DelayPolynomial::monic(vec![-1.5, 0.7]), STABILITY_TOL));
        assert_abs_diff_eq!(polynomial_roots_max_modulus(&[-1.5, 0.7]), 0.7_f64.sqrt(), epsilon = 1e-12);
        assert!(polynomial_is_stable(&DelayPolynomial::one(), STABILITY_TOL));
        assert!(!polynomial_is_stable(&DelayPolynomial::monic(vec![1.0]), STABILITY_TOL));
    }

    #[test]
    fn autocorrelation_of_constant() {
        let r = autocorrelation(&[1.0; 10], 4).unwrap();
        assert_eq!(r, vec![1.0; 5]);
    }

    #[test]
    fn autocorrelation_errors() {
        assert!(autocorrelation(&[], 0).is_err());
        assert!(autocorrelation(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn autocorrelation_of_white_noise() {
        let mut noise = GaussianNoise::new(11, 0, 1.0);
        let w: Vec<f64> = (0..200_000).map(|_| noise.sample()).collect();
        let r = autocorrelation(&w, 3).unwrap();
        assert!((r[0] - 1.0).abs() < 0.02);
        for v in &r[1..] {
            assert!(v.abs() < 0.01);
        }
    }

    #[test]
    fn autocorrelation_of_ma1() {
        // r(0) = σ²(1 + c²) = 1.25, r(1) = σ² c = 0.5, r(2) = 0
        let params = ArmaxParams::new(vec![], vec![], vec![0.5], 1.0).unwrap();
        let traj = simulate_armax(&params, &vec![0.0; 400_000], 400_000, 5, false).unwrap();
        let r = autocorrelation(&traj.y, 2).unwrap();
        assert!((r[0] - 1.25).abs() < 0.02);
        assert!((r[1] - 0.5).abs() < 0.02);
        assert!(r[2].abs() < 0.02);
    }

    #[test]
    fn impulse_response_examples() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let ss = StateSpaceModel::new(DMatrix::zeros(1, 1), one.clone(), one.clone(), one).unwrap();
        assert_eq!(impulse_response(&ss, Channel::Input, 4), vec![0.0, 1.0, 0.0, 0.0]);

        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![], 1.0).unwrap();
        let ss = to_observable_canonical(&params).unwrap();
        assert_eq!(impulse_response(&ss, Channel::Input, 5), vec![0.0, 1.0, 0.5, 0.25, 0.125]);
        assert_eq!(impulse_response(&ss, Channel::Noise, 1), vec![1.0]);
    }

    #[test]
    fn plant_matches_batch_simulation() {
        let params = ArmaxParams::new(vec![-1.1, 0.3], vec![1.0], vec![0.4], 1.0).unwrap();
        let u: Vec<f64> = (0..200).map(|k| (0.3 * k as f64).cos()).collect();
        let batch = simulate_armax(&params, &u, 200, 17, true).unwrap();
        let mut plant = ArmaxPlant::new(&params, 17).unwrap();
        for k in 0..200 {
            let s = plant.step(u[k]);
            assert_abs_diff_eq!(s.y, batch.y[k], epsilon = 1e-10);
            assert_eq!(s.w, batch.w.as_ref().unwrap()[k]);
            assert_eq!(s.x.as_slice(), batch.x.as_ref().unwrap()[k].as_slice());
        }
    }

    #[test]
    fn filter_apply() {
        let f = DelayPolynomial::monic(vec![0.5]);
        assert_eq!(f.apply(&[1.0, 0.0, 2.0]), vec![1.0, 0.5, 2.0]);
        assert_eq!(DelayPolynomial::one().apply(&[3.0, 4.0]), vec![3.0, 4.0]);
    }
}
