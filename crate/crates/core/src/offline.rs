//! Offline identification: value-iteration MA estimation from
//! autocorrelations, instrumental-variable ARX estimation, the combined
//! ARMAX pipeline, and the pseudo-linear-regression bootstrapping baseline.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{reciprocal_condition, solve_conditioned};
use crate::model::{
    autocorrelation, polynomial_is_stable, ArmaxParams, DelayPolynomial, PolyKind, Trajectory,
    STABILITY_TOL,
};

/// Denominators `ε²` at or below this take the zero branch of the `c` update.
pub const EPS2_MIN: f64 = 1e-12;
/// Reciprocal-condition threshold below which a Gram matrix is rejected.
pub const RCOND_MIN: f64 = 1e-10;
/// Step-to-step change in `c` that counts as converged.
pub const VI_CONVERGENCE_TOL: f64 = 1e-10;

/// Iterates of the offline MA value iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaViTrace {
    /// `c⁽ᵏ⁾` per iteration.
    pub c_estimates: Vec<Vec<f64>>,
    /// `E[e_k²]` surrogate per iteration, clamped at 0.
    pub eps2: Vec<f64>,
    /// `ρ_k` of the last iteration.
    pub rho: Vec<f64>,
    pub converged: bool,
}

impl MaViTrace {
    pub fn final_c(&self) -> &[f64] {
        self.c_estimates.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_eps2(&self) -> f64 {
        self.eps2.last().copied().unwrap_or(0.0)
    }
}

/// Back-substitution for the unit upper-triangular `ρ` system.
///
/// `c_history[j]` holds `c⁽ᵏ⁻¹⁻ʲ⁾`; missing entries count as zero. Row `i`
/// (1-based) reads `ρ(i) + Σ_{j≥1} c_j⁽ᵏ⁻ⁱ⁾ ρ(i+j) = r(i)`, with `ρ(i) = 0`
/// beyond `p = r.len()`.
pub fn solve_rho_system(c_history: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let p = r.len();
    let mut rho = vec![0.0; p];
    for i in (1..=p).rev() {
        let coeffs = c_history.get(i - 1);
        let mut acc = r[i - 1];
        for j in 1..=(p - i) {
            let cj = coeffs.and_then(|c| c.get(j - 1)).copied().unwrap_or(0.0);
            acc -= cj * rho[i + j - 1];
        }
        rho[i - 1] = acc;
    }
    rho
}

/// One value-iteration update given the autocorrelations, the history of
/// past `c` vectors (most recent first) and past `ε²` (most recent first).
/// Returns `(c⁽ᵏ⁾, ε²_k, ρ_k)`.
pub(crate) fn vi_update(
    r: &[f64],
    c_history: &[Vec<f64>],
    eps2_history: &[f64],
) -> (Vec<f64>, f64, Vec<f64>) {
    let p = r.len() - 1;
    let rho = solve_rho_system(c_history, &r[1..]);
    let c: Vec<f64> = (0..p)
        .map(|i| {
            let den = eps2_history.get(i).copied().unwrap_or(0.0);
            if den > EPS2_MIN {
                rho[i] / den
            } else {
                0.0
            }
        })
        .collect();
    let explained: f64 = c
        .iter()
        .enumerate()
        .map(|(i, ci)| ci * ci * eps2_history.get(i).copied().unwrap_or(0.0))
        .sum();
    let eps2 = (r[0] - explained).max(0.0);
    (c, eps2, rho)
}

/// Offline MA(p) identification from autocorrelations `r(0)…r(p)` by value
/// iteration. Each iterate uses the estimates of the previous `p − 1`
/// iterates in its `ρ` system. Stops early once `c` changes by less than
/// [`VI_CONVERGENCE_TOL`] (checked from iteration `p` on).
pub fn ma_identify_offline(r_y: &[f64], p: usize, iterations: usize) -> Result<MaViTrace> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be ≥ 1".into()));
    }
    if r_y.len() < p + 1 {
        return Err(Error::InvalidArgument(format!(
            "need autocorrelations r(0)…r({p}), got {}",
            r_y.len()
        )));
    }
    let r = &r_y[..=p];
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite autocorrelation".into()));
    }
    if r[0] < 0.0 {
        return Err(Error::InvalidArgument(format!("r(0) = {} is negative", r[0])));
    }

    let mut c_hist: VecDeque<Vec<f64>> = VecDeque::from(vec![vec![0.0; p]; p.saturating_sub(1)]);
    let mut eps_hist: VecDeque<f64> = VecDeque::from(vec![0.0; p]);
    let mut trace = MaViTrace { c_estimates: Vec::new(), eps2: Vec::new(), rho: vec![0.0; p], converged: false };

    for k in 0..iterations {
        let (c, eps2, rho) = vi_update(r, c_hist.make_contiguous(), eps_hist.make_contiguous());
        let settled = k >= p
            && trace.c_estimates.last().is_some_and(|prev: &Vec<f64>| {
                prev.iter().zip(&c).all(|(a, b)| (a - b).abs() < VI_CONVERGENCE_TOL)
            });
        if p > 0 {
            eps_hist.pop_back();
            eps_hist.push_front(eps2);
            if p > 1 {
                c_hist.pop_back();
                c_hist.push_front(c.clone());
            }
        }
        trace.c_estimates.push(c);
        trace.eps2.push(eps2);
        trace.rho = rho;
        if settled {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// Instrumental-variable estimate of the ARX part `θ̃ = col{a, b}`.
#[derive(Clone, Debug, PartialEq)]
pub struct IvEstimate {
    pub theta_tilde: DVector<f64>,
    /// Empirical `E[ζ φ̃ᵀ]`.
    pub gram: DMatrix<f64>,
    /// Empirical `E[ζ y]`.
    pub cross: DVector<f64>,
    /// Reciprocal 2-norm condition of `gram`.
    pub rcond: f64,
}

impl IvEstimate {
    pub fn condition(&self) -> f64 {
        if self.rcond > 0.0 {
            1.0 / self.rcond
        } else {
            f64::INFINITY
        }
    }
}

fn lagged(signal: &[f64], k: usize, lag: usize) -> f64 {
    k.checked_sub(lag).map_or(0.0, |j| signal[j])
}

/// `φ̃_k = [−y_{k−1} … −y_{k−n}, u_{k−1} … u_{k−m}]`, zero before the record.
pub fn arx_regressor(y: &[f64], u: &[f64], k: usize, n: usize, m: usize) -> DVector<f64> {
    DVector::from_iterator(
        n + m,
        (1..=n).map(|i| -lagged(y, k, i)).chain((1..=m).map(|i| lagged(u, k, i))),
    )
}

/// `ζ_k = [−y_{k−p−1} … −y_{k−p−n}, u_{k−1} … u_{k−m}]` on (pre-filtered)
/// signals, zero before the record.
pub fn arx_instrument(y: &[f64], u: &[f64], k: usize, n: usize, m: usize, p: usize) -> DVector<f64> {
    DVector::from_iterator(
        n + m,
        (1..=n).map(|i| -lagged(y, k, p + i)).chain((1..=m).map(|i| lagged(u, k, i))),
    )
}

/// First sample index whose regressor and instrument only reach back into
/// the record.
fn first_full_index(n: usize, m: usize, p: usize) -> usize {
    (n + p).max(m)
}

/// Solves the instrumental-variable equations `R θ̃ = r` built from
/// empirical averages over all samples with complete lags. The instrument
/// is filtered by `filter`, which must be monic and stable (its inverse is
/// then stable as well).
pub fn iv_estimate_arx(
    traj: &Trajectory,
    n: usize,
    m: usize,
    p: usize,
    filter: &DelayPolynomial,
) -> Result<IvEstimate> {
    traj.validate()?;
    if filter.kind() != PolyKind::Monic || !polynomial_is_stable(filter, STABILITY_TOL) {
        return Err(Error::InvalidArgument("instrument filter must be monic and stable".into()));
    }
    let d = n + m;
    let start = first_full_index(n, m, p);
    let t = traj.len();
    if t <= start + d {
        return Err(Error::InvalidArgument(format!(
            "trajectory of {t} samples too short for lags up to {start}"
        )));
    }
    let (y, u) = (&traj.y, &traj.u);
    let yf = filter.apply(y);
    let uf = filter.apply(u);

    let mut gram = DMatrix::zeros(d, d);
    let mut cross = DVector::zeros(d);
    for k in start..t {
        let zeta = arx_instrument(&yf, &uf, k, n, m, p);
        let phi = arx_regressor(y, u, k, n, m);
        gram.ger(1.0, &zeta, &phi, 1.0);
        cross.axpy(y[k], &zeta, 1.0);
    }
    let count = (t - start) as f64;
    gram /= count;
    cross /= count;
    let (theta_tilde, rcond) = solve_conditioned(&gram, &cross, RCOND_MIN)?;
    Ok(IvEstimate { theta_tilde, gram, cross, rcond })
}

/// `R_y` for an ARMA model with unit instrument filter: row `i` is
/// `[r(p+i), r(p+i−1), …, r(p+i−n+1)]` with `r(−j) = r(j)`. The flag is
/// true when the reciprocal condition is at least [`RCOND_MIN`].
pub fn arma_instrument_gram(r_y: &[f64], n: usize, p: usize) -> Result<(DMatrix<f64>, bool)> {
    if n > 0 && r_y.len() < p + n {
        return Err(Error::InvalidArgument(format!(
            "need autocorrelations up to lag {}, got {}",
            p + n - 1,
            r_y.len()
        )));
    }
    let gram = DMatrix::from_fn(n, n, |i, j| {
        let lag = (p + i) as isize - j as isize;
        r_y[lag.unsigned_abs()]
    });
    let ok = reciprocal_condition(&gram) >= RCOND_MIN;
    Ok((gram, ok))
}

/// `ỹ_k = y_k − φ̃_kᵀ θ̃` with zero pre-samples.
pub fn residual_series(traj: &Trajectory, n: usize, m: usize, theta_tilde: &DVector<f64>) -> Result<Vec<f64>> {
    traj.validate()?;
    if theta_tilde.len() != n + m {
        return Err(Error::Dimension(format!("θ̃ has {} entries, expected {}", theta_tilde.len(), n + m)));
    }
    Ok((0..traj.len())
        .map(|k| traj.y[k] - arx_regressor(&traj.y, &traj.u, k, n, m).dot(theta_tilde))
        .collect())
}

/// Prediction errors `e_k(θ)` of the pseudo-linear predictor with a fixed
/// parameter vector, regenerated recursively from zero pre-samples.
pub fn pseudo_linear_residuals(traj: &Trajectory, n: usize, m: usize, p: usize, theta: &DVector<f64>) -> Vec<f64> {
    let theta_tilde = theta.rows(0, n + m);
    let c = theta.rows(n + m, p);
    let mut e = vec![0.0; traj.len()];
    for k in 0..traj.len() {
        let arx = arx_regressor(&traj.y, &traj.u, k, n, m).dot(&theta_tilde);
        let ma: f64 = (1..=p).map(|i| c[i - 1] * lagged(&e, k, i)).sum();
        e[k] = traj.y[k] - arx - ma;
    }
    e
}

/// Policy-iteration baseline: each sweep regenerates the residuals with the
/// previous estimate and re-solves the least-squares normal equations of
/// the pseudo-linear regression.
pub fn plr_bootstrap(traj: &Trajectory, n: usize, m: usize, p: usize, sweeps: usize) -> Result<DVector<f64>> {
    traj.validate()?;
    if sweeps == 0 {
        return Err(Error::InvalidArgument("sweeps must be ≥ 1".into()));
    }
    let d = n + m + p;
    let start = n.max(m).max(p);
    let t = traj.len();
    if t <= start + d {
        return Err(Error::InvalidArgument(format!("trajectory of {t} samples too short")));
    }
    let mut theta = DVector::zeros(d);
    for _ in 0..sweeps {
        let e = pseudo_linear_residuals(traj, n, m, p, &theta);
        let mut gram = DMatrix::zeros(d, d);
        let mut cross = DVector::zeros(d);
        for k in start..t {
            let arx = arx_regressor(&traj.y, &traj.u, k, n, m);
            let phi = DVector::from_iterator(d, arx.iter().copied().chain((1..=p).map(|i| e[k - i])));
            gram.ger(1.0, &phi, &phi, 1.0);
            cross.axpy(traj.y[k], &phi, 1.0);
        }
        theta = solve_conditioned(&gram, &cross, RCOND_MIN)?.0;
    }
    Ok(theta)
}

/// Result of the offline ARMAX pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct OfflineIdentification {
    pub params: ArmaxParams,
    pub iv: IvEstimate,
    pub ma: MaViTrace,
}

/// IV for `(a, b)`, then value iteration on the residual autocorrelations
/// for `c`; `σ²` is the final `ε²`.
pub fn armax_identify_offline(
    traj: &Trajectory,
    n: usize,
    m: usize,
    p: usize,
    vi_iterations: usize,
) -> Result<OfflineIdentification> {
    let iv = if n + m > 0 {
        iv_estimate_arx(traj, n, m, p, &DelayPolynomial::one())?
    } else {
        IvEstimate {
            theta_tilde: DVector::zeros(0),
            gram: DMatrix::zeros(0, 0),
            cross: DVector::zeros(0),
            rcond: 1.0,
        }
    };
    let ytilde = residual_series(traj, n, m, &iv.theta_tilde)?;
    let r = autocorrelation(&ytilde, p)?;
    let ma = ma_identify_offline(&r, p, vi_iterations)?;
    let mut theta: Vec<f64> = iv.theta_tilde.iter().copied().collect();
    theta.extend_from_slice(ma.final_c());
    let params = ArmaxParams::from_theta(n, m, p, &theta, ma.final_eps2())?;
    Ok(OfflineIdentification { params, iv, ma })
}

/// JSON identification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub theta_tilde: Vec<f64>,
    pub c: Vec<f64>,
    pub sigma2: f64,
    /// 2-norm condition number of the IV Gram matrix.
    pub condition: Option<f64>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub c: Vec<f64>,
    pub eps2: f64,
}

impl From<&OfflineIdentification> for IdentificationReport {
    fn from(id: &OfflineIdentification) -> Self {
        let condition = id.iv.condition();
        IdentificationReport {
            theta_tilde: id.iv.theta_tilde.iter().copied().collect(),
            c: id.ma.final_c().to_vec(),
            sigma2: id.ma.final_eps2(),
            condition: condition.is_finite().then_some(condition),
            trace: id
                .ma
                .c_estimates
                .iter()
                .zip(&id.ma.eps2)
                .map(|(c, &eps2)| TraceEntry { c: c.clone(), eps2 })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate_armax, GaussianNoise};
    use approx::assert_abs_diff_eq;

    /// Exact MA(p) autocovariance `σ² Σ_j c_j c_{j+h}` with `c_0 = 1`.
    fn ma_autocov(c: &[f64], sigma2: f64, max_lag: usize) -> Vec<f64> {
        let full: Vec<f64> = std::iter::once(1.0).chain(c.iter().copied()).collect();
        (0..=max_lag)
            .map(|h| sigma2 * (0..full.len()).filter(|j| j + h < full.len()).map(|j| full[j] * full[j + h]).sum::<f64>())
            .collect()
    }

    fn white(seed: u64, len: usize) -> Vec<f64> {
        let mut g = GaussianNoise::new(seed, 7, 1.0);
        (0..len).map(|_| g.sample()).collect()
    }

    #[test]
    fn ma1_hand_iterates() {
        let trace = ma_identify_offline(&[1.25, 0.5], 1, 3).unwrap();
        assert_eq!(trace.c_estimates[0], vec![0.0]);
        assert_abs_diff_eq!(trace.eps2[0], 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.c_estimates[1][0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(trace.eps2[1], 1.05, epsilon = 1e-14);
        assert_abs_diff_eq!(trace.c_estimates[2][0], 0.5 / 1.05, epsilon = 1e-14);
        assert_abs_diff_eq!(trace.eps2[2], 1.25 - 0.25 / 1.05, epsilon = 1e-14);
    }

    #[test]
    fn ma1_limit() {
        let trace = ma_identify_offline(&[1.25, 0.5], 1, 500).unwrap();
        assert!(trace.converged);
        assert_abs_diff_eq!(trace.final_c()[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(trace.final_eps2(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn white_noise_keeps_c_zero() {
        let trace = ma_identify_offline(&[1.0, 0.0], 1, 20).unwrap();
        assert!(trace.c_estimates.iter().all(|c| c[0] == 0.0));
        assert!(trace.eps2.iter().all(|&e| e == 1.0));
    }

    #[test]
    fn ma2_converges_to_truth() {
        let r = ma_autocov(&[0.5, -0.3], 1.0, 2);
        let trace = ma_identify_offline(&r, 2, 200).unwrap();
        assert_abs_diff_eq!(trace.final_c()[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(trace.final_c()[1], -0.3, epsilon = 1e-6);
    }

    #[test]
    fn ma_identify_errors() {
        assert!(ma_identify_offline(&[1.0, 0.5], 1, 0).is_err());
        assert!(ma_identify_offline(&[f64::NAN, 0.5], 1, 3).is_err());
        assert!(ma_identify_offline(&[1.0], 1, 3).is_err());
    }

    #[test]
    fn p_zero_reports_r0() {
        let trace = ma_identify_offline(&[2.5], 0, 5).unwrap();
        assert_eq!(trace.final_eps2(), 2.5);
        assert!(trace.final_c().is_empty());
    }

    #[test]
    fn eps2_is_clamped() {
        // |r(1)| > r(0) is not a valid autocorrelation; ε² would go negative.
        let trace = ma_identify_offline(&[1.0, 2.0], 1, 10).unwrap();
        assert!(trace.eps2.iter().all(|&e| e >= 0.0));
        assert!(trace.c_estimates.iter().flatten().all(|c| c.is_finite()));
    }

    #[test]
    fn rho_back_substitution() {
        let rho = solve_rho_system(&[vec![0.4, 0.0]], &[0.5, 0.2]);
        assert_abs_diff_eq!(rho[1], 0.2);
        assert_abs_diff_eq!(rho[0], 0.42, epsilon = 1e-15);
        assert_eq!(solve_rho_system(&[], &[0.7]), vec![0.7]);
        assert_eq!(solve_rho_system(&[vec![0.0; 3], vec![0.0; 3]], &[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
        assert_eq!(solve_rho_system(&[], &[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn iv_exact_on_noise_free_arx() {
        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![], 0.0).unwrap();
        let u = white(1, 500);
        let traj = simulate_armax(&params, &u, 500, 1, false).unwrap();
        let est = iv_estimate_arx(&traj, 1, 1, 0, &DelayPolynomial::one()).unwrap();
        assert_abs_diff_eq!(est.theta_tilde[0], -0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(est.theta_tilde[1], 1.0, epsilon = 1e-8);
        assert!((&est.gram * &est.theta_tilde - &est.cross).amax() < 1e-10);
    }

    #[test]
    fn iv_zero_output_is_unexcited() {
        let traj = Trajectory { u: white(2, 100), y: vec![0.0; 100], w: None, x: None, seed: 0 };
        assert!(matches!(
            iv_estimate_arx(&traj, 1, 1, 1, &DelayPolynomial::one()),
            Err(Error::Excitation { .. })
        ));
    }

    #[test]
    fn iv_rejects_unstable_filter() {
        let traj = Trajectory { u: white(2, 100), y: white(3, 100), w: None, x: None, seed: 0 };
        assert!(iv_estimate_arx(&traj, 1, 1, 0, &DelayPolynomial::monic(vec![1.5])).is_err());
    }

    #[test]
    fn iv_arma11_consistency() {
        let params = ArmaxParams::new(vec![-0.5], vec![], vec![0.3], 1.0).unwrap();
        let t = 200_000;
        let traj = simulate_armax(&params, &vec![0.0; t], t, 21, false).unwrap();
        let est = iv_estimate_arx(&traj, 1, 0, 1, &DelayPolynomial::one()).unwrap();
        assert!((est.theta_tilde[0] + 0.5).abs() < 0.05, "{}", est.theta_tilde[0]);
        // A filtered instrument is consistent too.
        let est = iv_estimate_arx(&traj, 1, 0, 1, &DelayPolynomial::monic(vec![0.3])).unwrap();
        assert!((est.theta_tilde[0] + 0.5).abs() < 0.05, "{}", est.theta_tilde[0]);
    }

    #[test]
    fn arma_gram_examples() {
        // ARMA(1,1), φ = 0.5, θ = 0.3: γ₁ = (1+φθ)(φ+θ)/(1−φ²)
        let g1 = (1.0 + 0.15) * 0.8 / 0.75;
        let g0 = (1.0 + 2.0 * 0.15 + 0.09) / 0.75;
        let (gram, ok) = arma_instrument_gram(&[g0, g1], 1, 1).unwrap();
        assert_abs_diff_eq!(gram[(0, 0)], 1.226_666_666_666_666_7, epsilon = 1e-12);
        assert!(ok);
        let (gram, ok) = arma_instrument_gram(&[1.0, 0.0], 1, 1).unwrap();
        assert_eq!(gram[(0, 0)], 0.0);
        assert!(!ok);
        assert!(arma_instrument_gram(&[1.0], 1, 1).is_err());
        let (gram, _) = arma_instrument_gram(&[4.0, 3.0, 2.0, 1.0], 2, 1).unwrap();
        assert_eq!(gram, DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 2.0, 3.0]));
    }

    #[test]
    fn residuals() {
        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![], 0.0).unwrap();
        let traj = simulate_armax(&params, &white(4, 200), 200, 4, false).unwrap();
        assert_eq!(residual_series(&traj, 1, 1, &DVector::zeros(2)).unwrap(), traj.y);
        let r = residual_series(&traj, 1, 1, &DVector::from_vec(vec![-0.5, 1.0])).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!(residual_series(&traj, 1, 1, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn residuals_truncate_at_lag_p() {
        let params = ArmaxParams::new(vec![-0.7], vec![0.5], vec![0.6], 1.0).unwrap();
        let t = 200_000;
        let traj = simulate_armax(&params, &white(5, t), t, 5, false).unwrap();
        let r = residual_series(&traj, 1, 1, &DVector::from_vec(vec![-0.7, 0.5])).unwrap();
        let acf = autocorrelation(&r, 4).unwrap();
        assert!((acf[1] - 0.6).abs() < 0.03);
        for v in &acf[2..] {
            assert!(v.abs() < 0.02, "{acf:?}");
        }
    }

    #[test]
    fn plr_p0_equals_ols() {
        let params = ArmaxParams::new(vec![-0.5], vec![1.0], vec![], 0.3).unwrap();
        let t = 1000;
        let traj = simulate_armax(&params, &white(6, t), t, 6, false).unwrap();
        let theta = plr_bootstrap(&traj, 1, 1, 0, 1).unwrap();
        let x = DMatrix::from_fn(t - 1, 2, |r, c| if c == 0 { -traj.y[r] } else { traj.u[r] });
        let yv = DVector::from_column_slice(&traj.y[1..]);
        let ols = (x.transpose() * &x).lu().solve(&(x.transpose() * yv)).unwrap();
        assert!((theta - ols).amax() < 1e-10);
    }

    #[test]
    fn plr_ma1() {
        let params = ArmaxParams::new(vec![], vec![], vec![0.5], 1.0).unwrap();
        let t = 100_000;
        let traj = simulate_armax(&params, &vec![0.0; t], t, 8, false).unwrap();
        let theta = plr_bootstrap(&traj, 0, 0, 1, 20).unwrap();
        assert!((theta[0] - 0.5).abs() < 0.1);
    }

    #[test]
    fn plr_zero_data() {
        let traj = Trajectory { u: vec![0.0; 50], y: vec![0.0; 50], w: None, x: None, seed: 0 };
        assert!(matches!(plr_bootstrap(&traj, 1, 1, 1, 3), Err(Error::Excitation { .. })));
        assert!(plr_bootstrap(&traj, 1, 1, 1, 0).is_err());
    }

    #[test]
    fn pipeline_noise_free_arx() {
        let params = ArmaxParams::new(vec![-1.1, 0.3], vec![1.0], vec![], 0.0).unwrap();
        let traj = simulate_armax(&params, &white(9, 2000), 2000, 9, false).unwrap();
        let id = armax_identify_offline(&traj, 2, 1, 0, 10).unwrap();
        let theta = id.params.theta();
        for (est, truth) in theta.iter().zip([-1.1, 0.3, 1.0]) {
            assert_abs_diff_eq!(*est, truth, epsilon = 1e-8);
        }
        // With a requested MA order the residual is identically zero and c stays 0.
        let id = armax_identify_offline(&traj, 2, 1, 1, 10).unwrap();
        assert_eq!(id.params.c.coeffs(), &[0.0]);
    }

    #[test]
    fn pipeline_white_noise_no_parameters() {
        let traj = Trajectory { u: vec![0.0; 64], y: white(10, 64), w: None, x: None, seed: 0 };
        let id = armax_identify_offline(&traj, 0, 0, 0, 5).unwrap();
        let r0 = autocorrelation(&traj.y, 0).unwrap()[0];
        assert_eq!(id.params.sigma2, r0);
    }

    #[test]
    fn pipeline_arma11() {
        let params = ArmaxParams::new(vec![-0.5], vec![], vec![0.3], 1.0).unwrap();
        let t = 200_000;
        let traj = simulate_armax(&params, &vec![0.0; t], t, 12, false).unwrap();
        let id = armax_identify_offline(&traj, 1, 0, 1, 500).unwrap();
        let rel = |est: f64, truth: f64| ((est - truth) / truth).abs();
        assert!(rel(id.params.a.coeff(1), -0.5) < 0.05, "{:?}", id.params);
        assert!(rel(id.params.c.coeff(1), 0.3) < 0.05, "{:?}", id.params);
        assert!(rel(id.params.sigma2, 1.0) < 0.05, "{:?}", id.params);
        let report = IdentificationReport::from(&id);
        assert_eq!(report.trace.len(), id.ma.eps2.len());
    }
}
