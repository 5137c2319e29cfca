//! Acceptance metrics at desk scale, one pass/fail result per criterion.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::{pitfall_realizations, solve_estimation_are};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::experiment::{median, run_experiment, ExperimentReport};
use crate::linalg::{characteristic_polynomial, max_abs};
use crate::lqg::{dare_solve, q_matrix, riccati_sweep, riccati_sweep_inversion_lemma};
use crate::model::{
    impulse_response, to_observable_canonical, transfer_impulse_response, ArmaxParams, Channel, GaussianNoise,
};
use crate::offline::{arx_instrument, arx_regressor, ma_identify_offline};
use crate::online::RecursiveIvState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub seeds: Vec<u64>,
    pub horizon: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self { seeds: (0..20).collect(), horizon: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    pub seconds: f64,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionResult {
    fn new(id: u32, name: &str, seconds: f64, metrics: &[(&str, f64)], passed: bool) -> Self {
        Self {
            id,
            name: name.into(),
            passed,
            seconds,
            metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// `PASS [3] name (key=value, ...)`.
    pub fn line(&self) -> String {
        let metrics: Vec<String> = self.metrics.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        format!(
            "{} [{}] {} ({}; {:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            metrics.join(", "),
            self.seconds
        )
    }
}

/// The ARMAX(2,1,1) system used by the Monte Carlo criteria.
pub fn reference_system() -> ArmaxParams {
    ArmaxParams::new(vec![-1.1, 0.3], vec![1.0], vec![0.4], 1.0).expect("valid reference system")
}

/// Exact autocovariances `r(0..=p)` of `w_k + Σ cᵢ w_{k−i}`.
pub fn ma_autocovariance(c: &[f64], sigma2: f64) -> Vec<f64> {
    let full: Vec<f64> = std::iter::once(1.0).chain(c.iter().copied()).collect();
    (0..full.len())
        .map(|lag| sigma2 * (0..full.len() - lag).map(|j| full[j] * full[j + lag]).sum::<f64>())
        .collect()
}

/// Monic polynomial `[1, p₁, …, p_d]` with random zeros of modulus below
/// `radius` (conjugate pairs or real).
pub fn random_stable_poly(rng: &mut ChaCha8Rng, degree: usize, radius: f64) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mul = |poly: &mut Vec<f64>, factor: &[f64]| {
        let mut out = vec![0.0; poly.len() + factor.len() - 1];
        for (i, a) in poly.iter().enumerate() {
            for (j, b) in factor.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        *poly = out;
    };
    let mut left = degree;
    while left > 0 {
        let r = radius * rng.random::<f64>();
        if left >= 2 && rng.random::<bool>() {
            let angle = std::f64::consts::PI * rng.random::<f64>();
            mul(&mut poly, &[1.0, -2.0 * r * angle.cos(), r * r]);
            left -= 2;
        } else {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            mul(&mut poly, &[1.0, -sign * r]);
            left -= 1;
        }
    }
    poly
}

/// Random realizable ARMAX parameters with stable `a` and `c`.
pub fn random_params(rng: &mut ChaCha8Rng, max_order: usize) -> ArmaxParams {
    let n = rng.random_range(1..=max_order);
    let m = rng.random_range(0..=n);
    let p = rng.random_range(0..=n);
    let a = random_stable_poly(rng, n, 0.95)[1..].to_vec();
    let c = random_stable_poly(rng, p, 0.95)[1..].to_vec();
    let b = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
    ArmaxParams::new(a, b, c, 1.0).expect("valid random parameters")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

pub fn criterion_example1() -> CriterionResult {
    let (errors, secs) = timed(|| {
        let [natural, alpha] = pitfall_realizations();
        let golden = (5.0_f64.sqrt() - 1.0) / 2.0;
        let first = solve_estimation_are(&natural.0, &natural.1, 1e-12, 100_000).map(|s| {
            (s.sigma[(0, 0)] - golden).abs().max((s.l[(0, 0)] - golden).abs())
        });
        let second = solve_estimation_are(&alpha.0, &alpha.1, 1e-12, 100_000)
            .map(|s| s.sigma[(0, 0)].abs().max((s.l[(0, 0)] - 1.0).abs()));
        (first.unwrap_or(f64::INFINITY), second.unwrap_or(f64::INFINITY))
    });
    let passed = errors.0 < 1e-6 && errors.1 < 1e-8 && secs < 1.0;
    CriterionResult::new(1, "estimation ARE golden values", secs, &[("natural_err", errors.0), ("alpha_err", errors.1)], passed)
}

pub fn criterion_ma_value_iteration() -> CriterionResult {
    let (worst, secs) = timed(|| {
        let mut worst = (0.0_f64, 0.0_f64, 0usize);
        for c in [vec![0.5], vec![0.5, -0.3]] {
            let r = ma_autocovariance(&c, 1.0);
            match ma_identify_offline(&r, c.len(), 500) {
                Ok(trace) => {
                    let c_err = trace.final_c().iter().zip(&c).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
                    worst.0 = worst.0.max(c_err);
                    worst.1 = worst.1.max((trace.final_eps2() - 1.0).abs());
                    worst.2 = worst.2.max(if trace.converged { trace.c_estimates.len() } else { usize::MAX });
                }
                Err(_) => worst = (f64::INFINITY, f64::INFINITY, usize::MAX),
            }
        }
        worst
    });
    let passed = worst.0 < 1e-6 && worst.1 < 1e-6 && worst.2 <= 500;
    let iters = if worst.2 == usize::MAX { f64::INFINITY } else { worst.2 as f64 };
    CriterionResult::new(2, "offline MA value iteration", secs, &[("c_err", worst.0), ("eps2_err", worst.1), ("iterations", iters)], passed)
}

fn monte_carlo(kind: ExperimentKind, opts: &BenchOptions) -> Result<(ExperimentReport, f64)> {
    let config = ExperimentConfig::new(kind, Some(reference_system()), opts.horizon, opts.seeds.clone());
    let (report, secs) = timed(|| run_experiment(&config, None));
    Ok((report?, secs))
}

/// Criteria 3 and 10 from one online identification run.
pub fn criteria_online(opts: &BenchOptions) -> Vec<CriterionResult> {
    let (report, secs) = match monte_carlo(ExperimentKind::IdentifyOnline, opts) {
        Ok(r) => r,
        Err(e) => {
            log::error!("online identification failed: {e}");
            return [3, 10].iter().map(|&id| CriterionResult::new(id, "online identification", 0.0, &[], false)).collect();
        }
    };
    let complete = report.failures.is_empty();
    let theta = median(&report.metric_values("rel_theta_error"));
    let eps2 = median(&report.metric_values("eps2_rel_error"));
    let c3 = CriterionResult::new(
        3,
        "online identification accuracy",
        secs,
        &[("median_rel_theta_error", theta), ("median_eps2_rel_error", eps2)],
        complete && theta < 0.05 && eps2 < 0.05 && secs < 30.0,
    );
    let mut metrics = Vec::new();
    let mut ok = complete;
    for gamma in [0.5, 0.9, 0.99] {
        let values = report.metric_values(&format!("discounted_cost_ratio_{gamma}"));
        let dev = values.iter().fold(0.0_f64, |acc, r| acc.max((r - 1.0).abs()));
        ok &= !values.is_empty() && dev < 0.05;
        metrics.push((gamma, dev));
    }
    let named: Vec<(String, f64)> = metrics.iter().map(|(g, d)| (format!("max_dev_{g}"), *d)).collect();
    let refs: Vec<(&str, f64)> = named.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let c10 = CriterionResult::new(10, "discounted prediction cost", secs, &refs, ok);
    vec![c3, c10]
}

/// Criterion 4: whiteness of the batch value-iteration identifier's
/// prediction errors at lags `1..=2p`, every seed.
pub fn criterion_orthogonality(opts: &BenchOptions) -> CriterionResult {
    let fail = |secs| CriterionResult::new(4, "prediction error orthogonality", secs, &[], false);
    let (report, secs) = match monte_carlo(ExperimentKind::IdentifyOffline, opts) {
        Ok(r) => r,
        Err(e) => {
            log::error!("offline identification failed: {e}");
            return fail(0.0);
        }
    };
    let corr = report.metric_values("max_residual_corr");
    let bound = report.metric_values("residual_corr_bound");
    if !report.failures.is_empty() || corr.len() != opts.seeds.len() {
        return fail(secs);
    }
    let worst = corr.iter().zip(&bound).fold(0.0_f64, |acc, (c, b)| acc.max(c / b));
    CriterionResult::new(4, "prediction error orthogonality", secs, &[("max_corr_over_bound", worst)], worst < 1.0)
}

pub fn criterion_structure(draws: u64) -> CriterionResult {
    let (worst, secs) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (mut poly_err, mut impulse_err) = (0.0_f64, 0.0_f64);
        for _ in 0..draws {
            let params = random_params(&mut rng, 5);
            let ss = to_observable_canonical(&params).expect("realizable");
            let closed = &ss.a - &ss.b2 * &ss.c;
            let charpoly = characteristic_polynomial(&closed);
            for (i, v) in charpoly.iter().enumerate().skip(1) {
                poly_err = poly_err.max((v - params.c.coeff(i)).abs());
            }
            for channel in [Channel::Input, Channel::Noise] {
                let realized = impulse_response(&ss, channel, 50);
                let direct = transfer_impulse_response(&params, channel, 50);
                for (a, b) in realized.iter().zip(&direct) {
                    impulse_err = impulse_err.max((a - b).abs());
                }
            }
        }
        let params = reference_system();
        let ss = to_observable_canonical(&params).expect("realizable");
        let q = DMatrix::identity(2, 2);
        let schur_err = dare_solve(&ss.a, &ss.b1, &q, 1.0, 0.9, &q, 1e-12, 100_000)
            .and_then(|sol| q_matrix(&sol.p, &ss.a, &ss.b1, &q, 1.0, 0.9).map(|h| max_abs(&(h.schur_complement() - &sol.p))))
            .unwrap_or(f64::INFINITY);
        (poly_err, impulse_err, schur_err)
    });
    let passed = worst.0 < 1e-12 && worst.1 < 1e-10 && worst.2 < 1e-8;
    CriterionResult::new(
        5,
        "structural identities",
        secs,
        &[("charpoly_err", worst.0), ("impulse_err", worst.1), ("schur_err", worst.2)],
        passed,
    )
}

pub fn criterion_estimation(opts: &BenchOptions) -> CriterionResult {
    let (ratio, secs, complete) = match monte_carlo(ExperimentKind::Estimate, opts) {
        Ok((report, secs)) => (median(&report.metric_values("state_error_ratio")), secs, report.failures.is_empty()),
        Err(_) => (f64::INFINITY, 0.0, false),
    };
    CriterionResult::new(6, "model-free state estimation", secs, &[("median_state_error_ratio", ratio)], complete && ratio < 0.01)
}

/// Random `(A, B1)` with `A` entries `N(0, 0.6²)` and `B1` entries
/// `N(0, 1)`: controllable with probability one.
fn random_lqr_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=4usize);
    let mut g = GaussianNoise::new(rng.random(), 0, 1.0);
    let a = DMatrix::from_fn(n, n, |_, _| 0.6 * g.sample());
    let b = DMatrix::from_fn(n, 1, |_, _| g.sample());
    (a, b)
}

pub fn criterion_dare(instances: usize) -> CriterionResult {
    let (worst, secs) = timed(|| {
        let one = DMatrix::from_element(1, 1, 1.0);
        let golden_p = (8.0 / 9.0 + (424.0_f64 / 81.0).sqrt()) / 2.0;
        let golden_err = dare_solve(&one, &one, &one, 1.0, 0.9, &one, 1e-12, 100_000)
            .map(|s| (s.p[(0, 0)] - golden_p).abs().max((s.k[(0, 0)] - golden_p / (golden_p + 10.0 / 9.0)).abs()))
            .unwrap_or(f64::INFINITY);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut lemma_err, mut residual) = (0.0_f64, 0.0_f64);
        for _ in 0..instances {
            let (a, b) = random_lqr_instance(&mut rng);
            let n = a.nrows();
            let q = DMatrix::identity(n, n);
            let mut p = DMatrix::identity(n, n);
            for _ in 0..10 {
                let direct = riccati_sweep(&p, &a, &b, &q, 1.0, 0.9);
                let lemma = riccati_sweep_inversion_lemma(&p, &a, &b, &q, 1.0, 0.9);
                match (direct, lemma) {
                    (Ok(d), Ok(l)) => {
                        lemma_err = lemma_err.max(max_abs(&(&d - &l)) / max_abs(&d).max(1.0));
                        p = d;
                    }
                    _ => lemma_err = f64::INFINITY,
                }
            }
            residual = residual.max(
                dare_solve(&a, &b, &q, 1.0, 0.9, &DMatrix::identity(n, n), 1e-12, 100_000)
                    .map(|s| s.residual)
                    .unwrap_or(f64::INFINITY),
            );
        }
        (golden_err, lemma_err, residual)
    });
    let passed = worst.0 < 1e-5 && worst.1 < 1e-10 && worst.2 < 1e-8;
    CriterionResult::new(7, "discounted DARE", secs, &[("golden_err", worst.0), ("lemma_err", worst.1), ("max_residual", worst.2)], passed)
}

pub fn criterion_lqg(opts: &BenchOptions) -> CriterionResult {
    let (k_err, cost_err, secs, complete) = match monte_carlo(ExperimentKind::Lqg, opts) {
        Ok((report, secs)) => (
            median(&report.metric_values("k_rel_error")),
            median(&report.metric_values("cost_rel_error")),
            secs,
            report.failures.is_empty(),
        ),
        Err(_) => (f64::INFINITY, f64::INFINITY, 0.0, false),
    };
    CriterionResult::new(
        8,
        "model-free LQG",
        secs,
        &[("median_k_rel_error", k_err), ("median_cost_rel_error", cost_err)],
        complete && k_err < 0.05 && cost_err < 0.05 && secs < 60.0,
    )
}

/// Recursive IV seeded with the exact solution after `dim` samples, then
/// compared with direct normal-equation solves for 50 further samples.
pub fn criterion_recursive_iv() -> CriterionResult {
    let (worst, secs) = timed(|| {
        let params = reference_system();
        let (n, m, p) = (2, 1, 1);
        let len = 120;
        let mut g = GaussianNoise::new(3, 1, 1.0);
        let u: Vec<f64> = (0..len).map(|_| g.sample()).collect();
        let traj = crate::model::simulate_armax(&params, &u, len, 3, false).expect("simulation");
        let start = (n + p).max(m);
        let dim = n + m;
        let mut gram = DMatrix::zeros(dim, dim);
        let mut cross = DVector::zeros(dim);
        let mut state = None;
        let mut worst = 0.0_f64;
        let mut steps = 0;
        for k in start..len {
            let phi = arx_regressor(&traj.y, &traj.u, k, n, m);
            let zeta = arx_instrument(&traj.y, &traj.u, k, n, m, p);
            let y = traj.y[k];
            gram += &zeta * phi.transpose();
            cross += &zeta * y;
            let count = (k - start + 1) as u64;
            match state.as_mut() {
                None if count as usize >= 2 * dim => state = RecursiveIvState::from_sums(&gram, &cross, count).ok(),
                None => {}
                Some(s) => {
                    let s: &mut RecursiveIvState = s;
                    if s.riv_step(&zeta, &phi, y).is_err() {
                        return f64::INFINITY;
                    }
                    let direct = gram.clone().lu().solve(&cross).expect("invertible");
                    worst = worst.max((&s.theta_tilde - direct).amax());
                    steps += 1;
                    if steps == 50 {
                        break;
                    }
                }
            }
        }
        if steps < 50 {
            f64::INFINITY
        } else {
            worst
        }
    });
    CriterionResult::new(9, "recursive vs direct IV", secs, &[("max_diff", worst)], worst < 1e-8)
}

/// Every criterion, in order.
pub fn run_bench(opts: &BenchOptions) -> Vec<CriterionResult> {
    let mut results = vec![criterion_example1(), criterion_ma_value_iteration()];
    let online = criteria_online(opts);
    results.extend(online.iter().filter(|r| r.id != 10).cloned());
    results.push(criterion_orthogonality(opts));
    results.push(criterion_structure(100));
    results.push(criterion_estimation(opts));
    results.push(criterion_dare(50));
    results.push(criterion_lqg(opts));
    results.push(criterion_recursive_iv());
    results.extend(online.into_iter().filter(|r| r.id == 10));
    results
}
