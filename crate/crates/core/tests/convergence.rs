//! Statistical convergence rates on simulated data.

use nalgebra::DVector;

use armax::estimation::ModelFreeEstimator;
use armax::harness::bench::reference_system;
use armax::harness::experiment::{median, simulate_seed};
use armax::harness::{ExperimentConfig, ExperimentKind};
use armax::model::{ArmaxParams, DelayPolynomial};
use armax::offline::iv_estimate_arx;
use armax::online::{OnlineIdentifier, DEFAULT_P0};

fn config(params: ArmaxParams, horizon: usize, seeds: u64) -> ExperimentConfig {
    ExperimentConfig::new(ExperimentKind::IdentifyOffline, Some(params), horizon, (0..seeds).collect())
}

#[test]
fn iv_error_shrinks_like_inverse_root_t() {
    let truth = reference_system();
    let ab = DVector::from_vec(vec![-1.1, 0.3, 1.0]);
    let medians: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&t| {
            let cfg = config(truth.clone(), t, 20);
            let errors: Vec<f64> = cfg
                .seeds
                .iter()
                .map(|&s| {
                    let traj = simulate_seed(&cfg, s).unwrap();
                    let iv = iv_estimate_arx(&traj, 2, 1, 1, &DelayPolynomial::one()).unwrap();
                    (iv.theta_tilde - &ab).norm()
                })
                .collect();
            median(&errors)
        })
        .collect();
    // A tenfold increase in T should cut the error by about √10 ≈ 3.16.
    for pair in medians.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.8..5.5).contains(&ratio), "medians {medians:?}");
    }
}

#[test]
fn running_autocorrelations_approach_the_analytic_values() {
    // ARMA(0,0,1): ỹ = w + 0.5 w₋₁ has r(0) = 1.25, r(1) = 0.5.
    let params = ArmaxParams::new(vec![], vec![], vec![0.5], 1.0).unwrap();
    let exact = [1.25, 0.5];
    let mut medians = Vec::new();
    for t in [2_000, 200_000] {
        let cfg = config(params.clone(), t, 20);
        let errors: Vec<f64> = cfg
            .seeds
            .iter()
            .map(|&s| {
                let traj = simulate_seed(&cfg, s).unwrap();
                let mut ident = OnlineIdentifier::new(0, 0, 1, DEFAULT_P0).unwrap();
                for (u, y) in traj.u.iter().zip(&traj.y) {
                    ident.step(*u, *y);
                }
                let r = ident.ma_state().autocorrelations();
                r.iter().zip(exact).fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
            })
            .collect();
        medians.push(median(&errors));
    }
    // 100× more data: about 10× smaller error.
    assert!(medians[1] < 0.03, "{medians:?}");
    assert!(medians[0] / medians[1] > 4.0, "{medians:?}");
}

#[test]
fn windowed_state_error_does_not_grow_after_convergence() {
    let cfg = config(reference_system(), 200_000, 3);
    let window = 10_000;
    for &seed in &cfg.seeds {
        let traj = simulate_seed(&cfg, seed).unwrap();
        let x = traj.x.as_ref().unwrap();
        let mut est = ModelFreeEstimator::new(OnlineIdentifier::new(2, 1, 1, DEFAULT_P0).unwrap());
        let mut windows = Vec::new();
        let mut acc = 0.0;
        for k in 0..traj.len() {
            acc += x[k].iter().zip(est.x_hat().iter()).map(|(t, e)| (t - e).powi(2)).sum::<f64>();
            est.step(traj.u[k], traj.y[k]).unwrap();
            if (k + 1) % window == 0 {
                windows.push(acc / window as f64);
                acc = 0.0;
            }
        }
        // Single windows wander with the parameter error; average over
        // blocks of five after the first window (identifier start-up).
        let blocks: Vec<f64> = windows[1..].chunks(5).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        for pair in blocks.windows(2) {
            assert!(pair[1] <= 1.1 * pair[0], "seed {seed}: blocks {blocks:?}");
        }
        assert!(windows.last().unwrap() < &windows[0]);
    }
}
