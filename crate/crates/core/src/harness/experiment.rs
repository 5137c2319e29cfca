//! Seeded experiment runners and the JSON report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    kalman_step, pitfall_realizations_with, simulate_state_space, solve_estimation_are, EstimatorState,
    ModelFreeEstimator, ARE_MAX_ITER, ARE_TOL,
};
use crate::harness::config::{ExperimentConfig, ExperimentKind};
use crate::harness::input::generate_input;
use crate::harness::io::{save_trajectory, write_json, TableWriter};
use crate::lqg::{discounted_cost_to_go, optimal_value, run_closed_loop, ClosedLoopOptions};
use crate::model::{autocorrelation, simulate_armax_with, ArmaxParams, SimulationOptions, Trajectory};
use crate::offline::{armax_identify_offline, pseudo_linear_residuals, IdentificationReport};
use crate::online::OnlineIdentifier;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Caps the worker threads used for seeds; unset or 0 uses all cores.
pub const THREADS_ENV: &str = "ARMAX_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self { median: median_sorted(&v), min: v[0], max: v[v.len() - 1], count: v.len() })
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Median of the non-NaN entries; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    MetricSummary::of(values).map_or(f64::NAN, |s| s.median)
}

/// Metrics and curves for one seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    /// Vector-valued results, matrices flattened row-major.
    pub details: BTreeMap<String, Vec<f64>>,
    /// `(k, value)` pairs sampled on a logarithmic grid.
    pub curves: BTreeMap<String, Vec<(u64, f64)>>,
}

impl SeedReport {
    fn new(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    fn detail(&mut self, name: &str, value: impl IntoIterator<Item = f64>) {
        self.details.insert(name.to_string(), value.into_iter().collect());
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub tool_version: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Seed-independent quantities (reference solutions).
    pub reference: BTreeMap<String, Vec<f64>>,
    pub seeds: Vec<SeedReport>,
    pub failures: Vec<SeedFailure>,
    pub aggregate: BTreeMap<String, MetricSummary>,
}

impl ExperimentReport {
    /// Values of `metric` over successful seeds, in seed order.
    pub fn metric_values(&self, metric: &str) -> Vec<f64> {
        self.seeds.iter().filter_map(|s| s.metrics.get(metric).copied()).collect()
    }

    pub fn median(&self, metric: &str) -> Option<f64> {
        self.aggregate.get(metric).map(|s| s.median)
    }
}

/// `count` distinct sample counts in `1..=len`, spaced logarithmically.
pub fn log_grid(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    let mut grid: Vec<usize> = (0..count)
        .map(|i| {
            let frac = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
            ((len as f64).powf(frac).round() as usize).clamp(1, len)
        })
        .collect();
    grid.dedup();
    grid
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `config` for every seed, writing artifacts to `out` when given.
/// Failing seeds are recorded and the run continues.
pub fn run_experiment(config: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    config.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let reference = reference_values(config)?;
    let pool = thread_pool()?;
    let outcomes: Vec<Result<SeedReport>> =
        pool.install(|| config.seeds.par_iter().map(|&seed| run_seed(config, seed, out)).collect());

    let mut seeds = Vec::new();
    let mut failures = Vec::new();
    for (&seed, outcome) in config.seeds.iter().zip(outcomes) {
        match outcome {
            Ok(report) => seeds.push(report),
            Err(e) => {
                log::warn!("seed {seed} failed: {e}");
                failures.push(SeedFailure { seed, error: e.to_string() });
            }
        }
    }
    let mut names: Vec<&String> = seeds.iter().flat_map(|s| s.metrics.keys()).collect();
    names.sort();
    names.dedup();
    let aggregate = names
        .into_iter()
        .filter_map(|name| {
            let values: Vec<f64> = seeds.iter().filter_map(|s| s.metrics.get(name).copied()).collect();
            MetricSummary::of(&values).map(|s| (name.clone(), s))
        })
        .collect();
    let report = ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        kind: config.kind,
        config: config.clone(),
        reference,
        seeds,
        failures,
        aggregate,
    };
    if let Some(dir) = out {
        write_json(&report, &dir.join("report.json"))?;
        write_curves(&report, &dir.join("curves.csv"))?;
    }
    Ok(report)
}

fn write_curves(report: &ExperimentReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut writer = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(["seed", "curve", "k", "value"]).map_err(io)?;
    for seed in &report.seeds {
        for (name, points) in &seed.curves {
            for (k, v) in points {
                writer
                    .write_record([seed.seed.to_string(), name.clone(), k.to_string(), v.to_string()])
                    .map_err(io)?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

fn model(config: &ExperimentConfig) -> Result<&ArmaxParams> {
    config.model.as_ref().ok_or_else(|| Error::Config("experiment needs a model".into()))
}

fn reference_values(config: &ExperimentConfig) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut out = BTreeMap::new();
    match config.kind {
        ExperimentKind::Lqg => {
            let params = model(config)?;
            let (sol, offset) = optimal_value(params, &config.weights()?)?;
            out.insert("K_star".into(), sol.k.iter().copied().collect());
            out.insert("P_star".into(), row_major(&sol.p));
            out.insert("value_offset".into(), vec![offset]);
        }
        ExperimentKind::PitfallDemo => {
            for (a, tag) in [(1.0, "a1"), (0.0, "a0")] {
                let [natural, alpha] = pitfall_realizations_with(a);
                for ((ss, noise), name) in [(natural, "natural"), (alpha, "alpha")] {
                    let sol = solve_estimation_are(&ss, &noise, ARE_TOL, ARE_MAX_ITER)?;
                    out.insert(format!("sigma_{name}_{tag}"), vec![sol.sigma[(0, 0)]]);
                    out.insert(format!("l_{name}_{tag}"), vec![sol.l[(0, 0)]]);
                }
            }
        }
        _ => {
            if let Some(params) = &config.model {
                out.insert("theta_true".into(), params.theta().iter().copied().collect());
                out.insert("sigma2_true".into(), vec![params.sigma2]);
            }
        }
    }
    Ok(out)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().iter().copied().collect()
}

/// Input and simulated trajectory (with truth) for `seed`.
pub fn simulate_seed(config: &ExperimentConfig, seed: u64) -> Result<Trajectory> {
    let params = model(config)?;
    let input = generate_input(&config.input, config.burn_in + config.horizon, seed)?;
    let opts = SimulationOptions { seed, with_truth: true, burn_in: config.burn_in };
    simulate_armax_with(params, &input, config.horizon, &opts)
}

fn artifact(out: Option<&Path>, name: String) -> Option<PathBuf> {
    out.map(|dir| dir.join(name))
}

fn run_seed(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedReport> {
    match config.kind {
        ExperimentKind::IdentifyOffline => identify_offline_seed(config, seed, out),
        ExperimentKind::IdentifyOnline => identify_online_seed(config, seed, out),
        ExperimentKind::Estimate => estimate_seed(config, seed, out),
        ExperimentKind::Lqg => lqg_seed(config, seed, out),
        ExperimentKind::PitfallDemo => pitfall_seed(config, seed),
    }
}

/// `‖θ̂ − θ★‖₂ / ‖θ★‖₂`, or the absolute error when `θ★ = 0`.
pub fn relative_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let err = (estimate - truth).norm();
    let scale = truth.norm();
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn matching_truth(config: &ExperimentConfig) -> Result<Option<ArmaxParams>> {
    let params = model(config)?;
    Ok(((params.n(), params.m(), params.p()) == config.orders()?).then(|| params.clone()))
}

fn identify_offline_seed(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedReport> {
    let traj = simulate_seed(config, seed)?;
    let (n, m, p) = config.orders()?;
    let id = armax_identify_offline(&traj, n, m, p, config.vi_iterations)?;
    let mut report = SeedReport::new(seed);
    report.metric("eps2", id.params.sigma2);
    report.metric("condition", id.iv.condition());
    report.metric("vi_converged", id.ma.converged as u8 as f64);
    report.metric("vi_iterations", id.ma.c_estimates.len() as f64);
    report.detail("theta", id.params.theta().iter().copied());
    residual_metrics(&mut report, &pseudo_linear_residuals(&traj, n, m, p, &id.params.theta()), p)?;
    if let Some(truth) = matching_truth(config)? {
        report.metric("rel_theta_error", relative_error(&id.params.theta(), &truth.theta()));
        report.metric("eps2_abs_error", (id.params.sigma2 - truth.sigma2).abs());
        let grid = log_grid(id.ma.c_estimates.len(), config.curve_points);
        let curve = grid
            .iter()
            .map(|&i| {
                let c = &id.ma.c_estimates[i - 1];
                let err = c.iter().zip(truth.c.coeffs()).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()));
                (i as u64, err)
            })
            .collect();
        report.curves.insert("vi_c_error".into(), curve);
    }
    if let Some(path) = artifact(out, format!("identification_seed{seed}.json")) {
        write_json(&IdentificationReport::from(&id), &path)?;
    }
    Ok(report)
}

/// Largest `|corr(e_k, e_{k−i})|` over `i = 1..=lags`.
pub fn max_residual_correlation(e: &[f64], lags: usize) -> Result<f64> {
    if lags == 0 {
        return Ok(0.0);
    }
    let r = autocorrelation(e, lags)?;
    if r[0] <= 0.0 {
        return Ok(0.0);
    }
    Ok(r[1..].iter().fold(0.0_f64, |acc, v| acc.max((v / r[0]).abs())))
}

/// Largest residual correlation at lags `1..=2p` against `3/√T`.
fn residual_metrics(report: &mut SeedReport, e: &[f64], p: usize) -> Result<()> {
    let bound = 3.0 / (e.len() as f64).sqrt();
    let corr = max_residual_correlation(e, 2 * p)?;
    report.metric("max_residual_corr", corr);
    report.metric("residual_corr_bound", bound);
    report.metric("residual_orthogonal", (corr < bound) as u8 as f64);
    Ok(())
}

/// Mean over the last `window` samples of `J_k = e_k² + γ J_{k−1}`.
pub fn discounted_error_cost(e: &[f64], gamma: f64, window: usize) -> f64 {
    let mut j = 0.0;
    let mut sum = 0.0;
    let start = e.len().saturating_sub(window);
    for (k, v) in e.iter().enumerate() {
        j = v * v + gamma * j;
        if k >= start {
            sum += j;
        }
    }
    sum / (e.len() - start).max(1) as f64
}

fn online_header(n: usize, m: usize, p: usize) -> Vec<String> {
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("a{i}")));
    header.extend((1..=m).map(|i| format!("b{i}")));
    header.extend((1..=p).map(|i| format!("c{i}")));
    header.push("eps2".into());
    header
}

/// Streams `(u, y)` through a fresh identifier, writing one estimate row per
/// step (every `stride`-th) to `out` if given. Returns the identifier and
/// its prediction errors.
pub fn identify_stream(
    rows: impl IntoIterator<Item = Result<(usize, f64, f64)>>,
    orders: (usize, usize, usize),
    p0: f64,
    stride: usize,
    out: Option<&Path>,
) -> Result<(OnlineIdentifier, Vec<f64>)> {
    let (n, m, p) = orders;
    let mut ident = OnlineIdentifier::new(n, m, p, p0)?;
    let mut writer = out.map(|path| TableWriter::create(path, &online_header(n, m, p))).transpose()?;
    let mut errors = Vec::new();
    let mut row = Vec::with_capacity(n + m + p + 1);
    for item in rows {
        let (k, u, y) = item?;
        let theta = ident.step(u, y);
        errors.push(ident.last_step().map_or(0.0, |s| s.e));
        if let Some(w) = writer.as_mut() {
            if k % stride.max(1) == 0 {
                row.clear();
                row.extend(theta.iter());
                row.push(ident.eps2());
                w.write(k as u64, &row)?;
            }
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }
    Ok((ident, errors))
}

fn identify_online_seed(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedReport> {
    let traj = simulate_seed(config, seed)?;
    let orders = config.orders()?;
    let (n, m, p) = orders;
    let truth = matching_truth(config)?;
    let grid = log_grid(traj.len(), config.curve_points);
    let mut ident = OnlineIdentifier::new(n, m, p, config.p0)?;
    let mut writer = artifact(out, format!("online_seed{seed}.csv"))
        .map(|path| TableWriter::create(&path, &online_header(n, m, p)))
        .transpose()?;
    let mut errors = Vec::with_capacity(traj.len());
    let mut error_curve = Vec::new();
    let mut eps2_curve = Vec::new();
    let mut next = grid.iter().peekable();
    let mut row = Vec::new();
    for k in 0..traj.len() {
        let theta = ident.step(traj.u[k], traj.y[k]);
        errors.push(ident.last_step().map_or(0.0, |s| s.e));
        if let Some(w) = writer.as_mut() {
            if k % config.step_stride == 0 {
                row.clear();
                row.extend(theta.iter());
                row.push(ident.eps2());
                w.write(k as u64, &row)?;
            }
        }
        if next.peek() == Some(&&(k + 1)) {
            next.next();
            eps2_curve.push((k as u64 + 1, ident.eps2()));
            if let Some(t) = &truth {
                error_curve.push((k as u64 + 1, relative_error(&theta, &t.theta())));
            }
        }
    }
    if let Some(w) = writer {
        w.finish()?;
    }

    let theta = ident.theta();
    let mut report = SeedReport::new(seed);
    report.detail("theta", theta.iter().copied());
    report.metric("eps2", ident.eps2());
    report.metric("theta_inf_norm", theta.amax());
    report.metric("rejected_updates", ident.issues().1 as f64);
    report.curves.insert("eps2".into(), eps2_curve);

    // Orthogonality of the final predictor's errors over the whole record.
    residual_metrics(&mut report, &pseudo_linear_residuals(&traj, n, m, p, &theta), p)?;

    let window = config.tail_window();
    if let Some(t) = &truth {
        report.metric("rel_theta_error", relative_error(&theta, &t.theta()));
        report.metric("eps2_abs_error", (ident.eps2() - t.sigma2).abs());
        report.metric("eps2_rel_error", (ident.eps2() - t.sigma2).abs() / t.sigma2.max(f64::MIN_POSITIVE));
        report.curves.insert("rel_theta_error".into(), error_curve);
        for &gamma in &config.cost_discounts {
            let achieved = discounted_error_cost(&errors, gamma, window);
            let optimum = t.sigma2 / (1.0 - gamma);
            report.metric(&format!("discounted_cost_ratio_{gamma}"), achieved / optimum);
        }
    }
    Ok(report)
}

/// Per-step output of [`estimate_trajectory`].
#[derive(Clone, Debug)]
pub struct EstimateRun {
    pub e: Vec<f64>,
    pub y_hat: Vec<f64>,
    /// `x̂_k` from outputs before `k`.
    pub x_hat: Vec<DVector<f64>>,
    /// `‖x_k − x̂_k‖²` when the trajectory carries the true state.
    pub err_sq: Option<Vec<f64>>,
    pub estimator: ModelFreeEstimator,
}

/// Model-free state estimation over a recorded trajectory.
pub fn estimate_trajectory(traj: &Trajectory, orders: (usize, usize, usize), p0: f64) -> Result<EstimateRun> {
    traj.validate()?;
    let (n, m, p) = orders;
    if let Some(dim) = traj.state_dim() {
        if dim != n {
            return Err(Error::Dimension(format!("recorded state has {dim} entries, model order is {n}")));
        }
    }
    let mut estimator = ModelFreeEstimator::new(OnlineIdentifier::new(n, m, p, p0)?);
    let t = traj.len();
    let mut run = EstimateRun {
        e: Vec::with_capacity(t),
        y_hat: Vec::with_capacity(t),
        x_hat: Vec::with_capacity(t),
        err_sq: traj.x.as_ref().map(|_| Vec::with_capacity(t)),
        estimator: estimator.clone(),
    };
    for k in 0..t {
        let x_hat = estimator.x_hat().clone();
        let (e, y_hat) = estimator.step(traj.u[k], traj.y[k])?;
        if let (Some(x), Some(err)) = (&traj.x, run.err_sq.as_mut()) {
            err.push(x[k].iter().zip(x_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum());
        }
        run.e.push(e);
        run.y_hat.push(y_hat);
        run.x_hat.push(x_hat);
    }
    run.estimator = estimator;
    Ok(run)
}

/// Writes `k,e,y_hat,x_hat1..x_hatn[,err_sq]`.
pub fn write_estimate_csv(run: &EstimateRun, stride: usize, path: &Path) -> Result<()> {
    let n = run.x_hat.first().map_or(0, |x| x.len());
    let mut header = vec!["k".to_string(), "e".into(), "y_hat".into()];
    header.extend((1..=n).map(|i| format!("x_hat{i}")));
    if run.err_sq.is_some() {
        header.push("err_sq".into());
    }
    let mut w = TableWriter::create(path, &header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in (0..run.e.len()).step_by(stride.max(1)) {
        row.clear();
        row.push(run.e[k]);
        row.push(run.y_hat[k]);
        row.extend(run.x_hat[k].iter());
        if let Some(err) = &run.err_sq {
            row.push(err[k]);
        }
        w.write(k as u64, &row)?;
    }
    w.finish()
}

/// Windowed error statistics of an [`EstimateRun`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub samples: usize,
    pub window: usize,
    pub mean_sq_prediction_error: f64,
    pub eps2: f64,
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_state_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_state_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state_error_ratio: Option<f64>,
}

pub fn summarize_estimate(run: &EstimateRun, traj: &Trajectory, window: usize) -> EstimateSummary {
    let t = run.e.len();
    let window = window.clamp(1, t.max(1));
    let start = t.saturating_sub(window);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let mse = mean(&run.e[start..].iter().map(|e| e * e).collect::<Vec<_>>());
    let state_error = run.err_sq.as_ref().map(|err| mean(&err[start..]));
    let energy = traj.x.as_ref().map(|x| mean(&x[start..].iter().map(|r| r.iter().map(|v| v * v).sum()).collect::<Vec<_>>()));
    EstimateSummary {
        samples: t,
        window,
        mean_sq_prediction_error: mse,
        eps2: run.estimator.ident.eps2(),
        theta: run.estimator.ident.theta().iter().copied().collect(),
        mean_state_error: state_error,
        mean_state_energy: energy,
        state_error_ratio: state_error.zip(energy).map(|(e, x)| e / x),
    }
}

fn estimate_seed(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedReport> {
    let traj = simulate_seed(config, seed)?;
    let run = estimate_trajectory(&traj, config.orders()?, config.p0)?;
    let summary = summarize_estimate(&run, &traj, config.tail_window());
    let mut report = SeedReport::new(seed);
    report.metric("mean_sq_prediction_error", summary.mean_sq_prediction_error);
    report.metric("eps2", summary.eps2);
    report.detail("theta", summary.theta.iter().copied());
    if let (Some(ratio), Some(err), Some(energy)) = (summary.state_error_ratio, summary.mean_state_error, summary.mean_state_energy) {
        report.metric("state_error_ratio", ratio);
        report.metric("mean_state_error", err);
        report.metric("mean_state_energy", energy);
    }
    if let Some(truth) = matching_truth(config)? {
        report.metric("rel_theta_error", relative_error(&run.estimator.ident.theta(), &truth.theta()));
    }
    if let (Some(err), Some(x)) = (&run.err_sq, &traj.x) {
        // Block ratios between consecutive grid points.
        let grid = log_grid(err.len(), config.curve_points);
        let mut prev = 0;
        let mut curve = Vec::new();
        for &end in &grid {
            let e: f64 = err[prev..end].iter().sum();
            let s: f64 = x[prev..end].iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum();
            if s > 0.0 {
                curve.push((end as u64, e / s));
            }
            prev = end;
        }
        report.curves.insert("state_error_ratio".into(), curve);
    }
    if let Some(path) = artifact(out, format!("estimate_seed{seed}.csv")) {
        write_estimate_csv(&run, config.step_stride, &path)?;
    }
    Ok(report)
}

fn lqg_seed(config: &ExperimentConfig, seed: u64, out: Option<&Path>) -> Result<SeedReport> {
    let params = model(config)?;
    let weights = config.weights()?;
    let opts = ClosedLoopOptions {
        horizon: config.horizon,
        seed,
        dither_variance: config.dither.variance,
        dither_window: config.dither_window(),
        p0: config.p0,
    };
    let trace = run_closed_loop(params, &weights, &opts)?;
    let (sol, offset) = optimal_value(params, &weights)?;
    let n = trace.lqg.dim();
    let k_scale = sol.k.amax();
    let k_error = |gain: &[f64]| {
        let diff = gain.iter().zip(sol.k.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        if k_scale > 0.0 {
            diff / k_scale
        } else {
            diff
        }
    };

    let mut report = SeedReport::new(seed);
    report.metric("k_rel_error", k_error(trace.lqg.gain.as_slice()));
    report.metric("p_rel_error", (&trace.lqg.p - &sol.p).amax() / sol.p.amax().max(f64::MIN_POSITIVE));
    report.metric("rejected_sweeps", trace.lqg.rejected as f64);
    report.detail("K", trace.lqg.gain.iter().copied());
    report.detail("P", row_major(&trace.lqg.p));
    report.detail("theta", trace.estimator.ident.theta().iter().copied());
    report.metric("v_star_x0", offset);

    // Achieved discounted cost-to-go against V★ along the same states, over
    // the last window with a full cost horizon.
    let j = discounted_cost_to_go(&trace.cost, weights.gamma, config.cost_horizon);
    if !j.is_empty() {
        let window = config.tail_window().min(j.len());
        let range = j.len() - window..j.len();
        let achieved = j[range.clone()].iter().sum::<f64>() / window as f64;
        let optimum = range
            .clone()
            .map(|k| (trace.x[k].transpose() * &sol.p * &trace.x[k])[(0, 0)] + offset)
            .sum::<f64>()
            / window as f64;
        report.metric("achieved_cost", achieved);
        report.metric("optimal_cost", optimum);
        report.metric("cost_rel_error", (achieved - optimum).abs() / optimum.abs().max(f64::MIN_POSITIVE));
    }
    let grid = log_grid(config.horizon, config.curve_points);
    report.curves.insert("k_rel_error".into(), grid.iter().map(|&k| (k as u64, k_error(trace.gain_at(k - 1)))).collect());

    if let Some(path) = artifact(out, format!("lqg_seed{seed}.csv")) {
        let mut header = vec!["k".to_string(), "u".into(), "y".into(), "cost".into()];
        header.extend((1..=n).map(|i| format!("Kk_{i}")));
        let mut w = TableWriter::create(&path, &header)?;
        let mut row = Vec::with_capacity(3 + n);
        for k in (0..config.horizon).step_by(config.step_stride) {
            row.clear();
            row.extend([trace.u[k], trace.y[k], trace.cost[k]]);
            row.extend_from_slice(trace.gain_at(k));
            w.write(k as u64, &row)?;
        }
        w.finish()?;
    }
    Ok(report)
}

/// Simulates both coordinate choices of `y_k = w_{k−1} + w_k + μ_k` and
/// runs each realization's steady-state filter on its own output.
fn pitfall_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedReport> {
    let zeros = vec![0.0; config.horizon];
    let mut report = SeedReport::new(seed);
    let mut rho = Vec::new();
    for ((ss, noise), name) in pitfall_realizations_with(0.0).into_iter().zip(["natural", "alpha"]) {
        let (ys, xs) = simulate_state_space(&ss, &noise, &zeros, seed)?;
        let sol = solve_estimation_are(&ss, &noise, ARE_TOL, ARE_MAX_ITER)?;
        let mut state = EstimatorState::zeros(1);
        let mut err = 0.0;
        for (y, x) in ys.iter().zip(&xs) {
            err += (x[0] - state.x_hat[0]).powi(2);
            state = kalman_step(&state, &ss, &sol.l, 0.0, *y);
        }
        let r = autocorrelation(&ys, 2)?;
        report.metric(&format!("state_mse_{name}"), err / ys.len() as f64);
        report.metric(&format!("output_r0_{name}"), r[0]);
        report.metric(&format!("output_rho1_{name}"), r[1] / r[0]);
        report.metric(&format!("output_rho2_{name}"), r[2] / r[0]);
        rho.push([r[1] / r[0], r[2] / r[0]]);
    }
    report.metric("output_rho_gap", (rho[0][0] - rho[1][0]).abs().max((rho[0][1] - rho[1][1]).abs()));
    Ok(report)
}

/// Writes trajectories with truth for every seed of `config`.
pub fn simulate_to_dir(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    config
        .seeds
        .iter()
        .map(|&seed| {
            let path = out.join(format!("trajectory_seed{seed}.csv"));
            save_trajectory(&simulate_seed(config, seed)?, &path)?;
            Ok(path)
        })
        .collect()
}
