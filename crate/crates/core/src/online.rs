//! Online ARMAX identification: a recursive instrumental-variable update
//! for `(a, b)` composed with an online value iteration for `c`.
//!
//! The first sample initializes the state (`r⁽⁰⁾(0) = ε²_0 = y_0²`); every
//! later sample runs, in order, the recursive IV update, the residual
//! `ỹ_k = y_k − φ̃_kᵀ θ̃⁽ᵏ⁾`, the running autocorrelations of `ỹ`, the
//! triangular `ρ` solve, and the `c`/`ε²` updates. Estimates are emitted
//! from the first sample; the first `max(n + p, m)` of them are transients.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ArmaxParams;
use crate::linalg::solve_conditioned;
use crate::offline::vi_update;

/// Default initial inverse-Gram scale `P⁽⁰⁾ = p₀ I`.
pub const DEFAULT_P0: f64 = 1e3;
/// `|γ_k|` below this rejects the recursive IV step.
pub const GAMMA_MIN: f64 = 1e-12;
/// Maximum number of step issues kept verbatim.
const ISSUE_LOG_CAP: usize = 256;

/// Recursive solution of `R⁽ᵏ⁾ θ̃ = r⁽ᵏ⁾` with `R⁽⁰⁾ = p₀⁻¹ I`, `r⁽⁰⁾ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RecursiveIvState {
    pub theta_tilde: DVector<f64>,
    pub p: DMatrix<f64>,
    /// Number of processed updates.
    pub k: u64,
}

impl RecursiveIvState {
    pub fn new(dim: usize, p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::InvalidArgument(format!("p0 = {p0} must be positive")));
        }
        Ok(Self {
            theta_tilde: DVector::zeros(dim),
            p: DMatrix::identity(dim, dim) * p0,
            k: 0,
        })
    }

    /// State after `k` samples with accumulated `S = Σ ζ φ̃ᵀ` and
    /// `r = Σ ζ y`, without the prior: `θ̃ = S⁻¹ r`, `P = (k + 1) S⁻¹`.
    pub fn from_sums(s: &DMatrix<f64>, r: &DVector<f64>, k: u64) -> Result<Self> {
        if s.nrows() != s.ncols() || r.len() != s.nrows() {
            return Err(Error::Dimension("S must be square and match r".into()));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be ≥ 1".into()));
        }
        let (theta_tilde, _) = solve_conditioned(s, r, crate::offline::RCOND_MIN)?;
        let inv = s.clone().try_inverse().ok_or_else(|| Error::Singular("S is not invertible".into()))?;
        Ok(Self { theta_tilde, p: inv * (k as f64 + 1.0), k })
    }

    /// One update at sample `k = self.k + 1`:
    ///
    /// ```text
    /// γ_k  = 1 + φ̃ᵀ P ζ / k
    /// θ̃   ← θ̃ + P ζ (y − φ̃ᵀ θ̃) / (k γ_k)
    /// P    ← (I − P ζ φ̃ᵀ / (k γ_k)) P (k + 1) / k
    /// ```
    ///
    /// A degenerate `γ_k` leaves `θ̃` and `P` untouched but still counts
    /// the sample.
    pub fn riv_step(&mut self, zeta: &DVector<f64>, phi: &DVector<f64>, y: f64) -> Result<()> {
        let dim = self.theta_tilde.len();
        if zeta.len() != dim || phi.len() != dim {
            return Err(Error::Dimension(format!(
                "instrument {} / regressor {} vs state {dim}",
                zeta.len(),
                phi.len()
            )));
        }
        self.k += 1;
        let k = self.k as f64;
        let p_zeta = &self.p * zeta;
        let gamma = 1.0 + phi.dot(&p_zeta) / k;
        if !(gamma.abs() >= GAMMA_MIN) {
            return Err(Error::Degenerate { step: self.k, detail: format!("γ_k = {gamma:.3e}") });
        }
        let gain = p_zeta / (k * gamma);
        let innovation = y - phi.dot(&self.theta_tilde);
        self.theta_tilde.axpy(innovation, &gain, 1.0);
        let phi_t_p = phi.transpose() * &self.p;
        self.p.ger(-1.0, &gain, &phi_t_p.transpose(), 1.0);
        self.p *= (k + 1.0) / k;
        Ok(())
    }
}

/// Running autocorrelations of `ỹ` and the online value-iteration state.
#[derive(Clone, Debug, PartialEq)]
pub struct OnlineMaState {
    p: usize,
    /// `r⁽ᵏ⁾(0) … r⁽ᵏ⁾(p)`.
    r: Vec<f64>,
    /// `ε²_{k−1} … ε²_{k−p}` (most recent first).
    eps2_ring: VecDeque<f64>,
    /// `c⁽ᵏ⁻¹⁾ … c⁽ᵏ⁻ᵖ⁺¹⁾` (most recent first).
    c_ring: VecDeque<Vec<f64>>,
    /// `ỹ_{k−1} … ỹ_{k−p}` (most recent first).
    ytilde_ring: VecDeque<f64>,
    c: Vec<f64>,
    eps2: f64,
    k: u64,
    initialized: bool,
}

impl OnlineMaState {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            r: vec![0.0; p + 1],
            eps2_ring: VecDeque::from(vec![0.0; p]),
            c_ring: VecDeque::from(vec![vec![0.0; p]; p.saturating_sub(1)]),
            ytilde_ring: VecDeque::from(vec![0.0; p]),
            c: vec![0.0; p],
            eps2: 0.0,
            k: 0,
            initialized: false,
        }
    }

    /// State positioned after some history: `eps2_history` is
    /// `ε²_{k−1} … ε²_{k−p}` and `c_history` is `c⁽ᵏ⁻¹⁾ … c⁽ᵏ⁻ᵖ⁺¹⁾`, both
    /// most recent first and zero-filled when short.
    pub fn from_history(p: usize, eps2_history: &[f64], c_history: &[Vec<f64>]) -> Self {
        let mut state = Self::new(p);
        for (slot, v) in state.eps2_ring.iter_mut().zip(eps2_history) {
            *slot = *v;
        }
        for (slot, v) in state.c_ring.iter_mut().zip(c_history) {
            slot.iter_mut().zip(v).for_each(|(s, x)| *s = *x);
        }
        state.initialized = true;
        state
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn autocorrelations(&self) -> &[f64] {
        &self.r
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    /// Feeds the next residual `ỹ_k`. The first call initializes
    /// `r(0) = ε²_0 = ỹ_0²` with all other statistics zero.
    pub fn online_ma_step(&mut self, ytilde: f64) -> (Vec<f64>, f64) {
        if !self.initialized {
            self.initialized = true;
            self.r.iter_mut().for_each(|v| *v = 0.0);
            self.r[0] = ytilde * ytilde;
            self.eps2 = self.r[0];
            self.c = vec![0.0; self.p];
            if self.p > 0 {
                self.eps2_ring[0] = self.eps2;
                self.ytilde_ring[0] = ytilde;
            }
            return (self.c.clone(), self.eps2);
        }
        self.k += 1;
        let k = self.k as f64;
        let (old, new) = (k / (k + 1.0), 1.0 / (k + 1.0));
        self.r[0] = old * self.r[0] + new * ytilde * ytilde;
        for i in 1..=self.p {
            self.r[i] = old * self.r[i] + new * ytilde * self.ytilde_ring[i - 1];
        }
        if self.p > 0 {
            self.ytilde_ring.pop_back();
            self.ytilde_ring.push_front(ytilde);
        }
        let r = self.r.clone();
        self.advance_with_statistics(&r)
    }

    /// The value-iteration part of a step with externally supplied
    /// autocorrelations `r(0) … r(p)`.
    pub fn advance_with_statistics(&mut self, r: &[f64]) -> (Vec<f64>, f64) {
        assert_eq!(r.len(), self.p + 1, "need r(0)…r(p)");
        let (c, eps2, _rho) = vi_update(r, self.c_ring.make_contiguous(), self.eps2_ring.make_contiguous());
        if self.p > 0 {
            self.eps2_ring.pop_back();
            self.eps2_ring.push_front(eps2);
        }
        if self.p > 1 {
            self.c_ring.pop_back();
            self.c_ring.push_front(c.clone());
        }
        self.c = c;
        self.eps2 = eps2;
        (self.c.clone(), self.eps2)
    }
}

/// Quantities produced while processing one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub k: u64,
    /// One-step prediction `ŷ_k` with the updated estimate.
    pub y_hat: f64,
    /// Prediction error `e_k = y_k − ŷ_k`.
    pub e: f64,
    /// ARX residual `ỹ_k`.
    pub ytilde: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepIssue {
    pub k: u64,
    pub error: Error,
}

/// Streaming ARMAX identifier. Owns lag buffers for `y`, `u` and the
/// prediction errors, all zero before the first sample.
#[derive(Clone, Debug)]
pub struct OnlineIdentifier {
    n: usize,
    m: usize,
    p: usize,
    iv: RecursiveIvState,
    ma: OnlineMaState,
    y_hist: VecDeque<f64>,
    u_hist: VecDeque<f64>,
    e_hist: VecDeque<f64>,
    samples: u64,
    last: Option<StepOutput>,
    issues: Vec<StepIssue>,
    issue_count: u64,
    frozen: Option<ArmaxParams>,
}

impl OnlineIdentifier {
    pub fn new(n: usize, m: usize, p: usize, p0: f64) -> Result<Self> {
        Ok(Self {
            n,
            m,
            p,
            iv: RecursiveIvState::new(n + m, p0)?,
            ma: OnlineMaState::new(p),
            y_hist: VecDeque::from(vec![0.0; n + p]),
            u_hist: VecDeque::from(vec![0.0; m]),
            e_hist: VecDeque::from(vec![0.0; p]),
            samples: 0,
            last: None,
            issues: Vec::new(),
            issue_count: 0,
            frozen: None,
        })
    }

    /// An identifier whose estimate stays at `params`; it still tracks the
    /// lag buffers and prediction errors.
    pub fn frozen(params: &ArmaxParams) -> Result<Self> {
        params.validate()?;
        let mut ident = Self::new(params.n(), params.m(), params.p(), DEFAULT_P0)?;
        ident.iv.theta_tilde = params.theta().rows(0, params.n() + params.m()).into_owned();
        ident.ma.c = params.c.coeffs().to_vec();
        ident.ma.eps2 = params.sigma2;
        ident.frozen = Some(params.clone());
        Ok(ident)
    }

    pub fn orders(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.p)
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn iv_state(&self) -> &RecursiveIvState {
        &self.iv
    }

    pub fn ma_state(&self) -> &OnlineMaState {
        &self.ma
    }

    pub fn eps2(&self) -> f64 {
        self.ma.eps2
    }

    /// Combined estimate `col{θ̃⁽ᵏ⁾, c⁽ᵏ⁾}`.
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n + self.m + self.p,
            self.iv.theta_tilde.iter().chain(&self.ma.c).copied(),
        )
    }

    /// Current estimate as a parameter set with `σ² = ε²_k`.
    pub fn params(&self) -> ArmaxParams {
        ArmaxParams::from_theta(self.n, self.m, self.p, self.theta().as_slice(), self.ma.eps2)
            .expect("estimate dimensions are consistent")
    }

    pub fn last_step(&self) -> Option<&StepOutput> {
        self.last.as_ref()
    }

    /// Most recent rejected updates (capped) and the total count.
    pub fn issues(&self) -> (&[StepIssue], u64) {
        (&self.issues, self.issue_count)
    }

    fn regressor(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n + self.m,
            self.y_hist.iter().take(self.n).map(|v| -v).chain(self.u_hist.iter().copied()),
        )
    }

    fn instrument(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n + self.m,
            self.y_hist.iter().skip(self.p).take(self.n).map(|v| -v).chain(self.u_hist.iter().copied()),
        )
    }

    fn record(&mut self, error: Error) {
        self.issue_count += 1;
        if self.issues.len() == ISSUE_LOG_CAP {
            self.issues.remove(0);
        }
        self.issues.push(StepIssue { k: self.samples, error });
    }

    /// Processes `(u_k, y_k)` and returns `col{θ̃⁽ᵏ⁾, c⁽ᵏ⁾}`. `u_k` only
    /// enters later regressors.
    pub fn step(&mut self, u: f64, y: f64) -> DVector<f64> {
        let phi = self.regressor();
        let ytilde = if self.frozen.is_some() {
            y - phi.dot(&self.iv.theta_tilde)
        } else if self.samples == 0 {
            let ytilde = y - phi.dot(&self.iv.theta_tilde);
            self.ma.online_ma_step(ytilde);
            ytilde
        } else {
            let zeta = self.instrument();
            if let Err(err) = self.iv.riv_step(&zeta, &phi, y) {
                self.record(err);
            }
            let ytilde = y - phi.dot(&self.iv.theta_tilde);
            self.ma.online_ma_step(ytilde);
            ytilde
        };

        let ma_part: f64 = self.ma.c.iter().zip(&self.e_hist).map(|(c, e)| c * e).sum();
        let y_hat = (y - ytilde) + ma_part;
        let e = y - y_hat;
        if self.p > 0 {
            self.e_hist.pop_back();
            self.e_hist.push_front(e);
        }
        if self.n + self.p > 0 {
            self.y_hist.pop_back();
            self.y_hist.push_front(y);
        }
        if self.m > 0 {
            self.u_hist.pop_back();
            self.u_hist.push_front(u);
        }
        self.last = Some(StepOutput { k: self.samples, y_hat, e, ytilde });
        self.samples += 1;
        self.theta()
    }
}

/// One pass of the online identification loop; see [`OnlineIdentifier::step`].
pub fn algorithm1_step(ident: &mut OnlineIdentifier, u: f64, y: f64) -> DVector<f64> {
    ident.step(u, y)
}
