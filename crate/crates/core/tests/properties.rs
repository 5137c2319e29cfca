//! Randomized invariants over the public API.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use armax::estimation::{solve_estimation_are, NoiseCovariance};
use armax::harness::bench::{ma_autocovariance, random_params, random_stable_poly};
use armax::harness::io::{read_trajectory, write_trajectory};
use armax::linalg::{characteristic_polynomial, min_symmetric_eigenvalue};
use armax::lqg::{dare_solve, lqr_gain, q_matrix, riccati_sweep, riccati_sweep_inversion_lemma};
use armax::model::{autocorrelation, simulate_armax, to_observable_canonical, StateSpaceModel, Trajectory};
use armax::offline::ma_identify_offline;
use armax::online::{OnlineIdentifier, RecursiveIvState};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n, 1.0);
    &m * m.transpose() + DMatrix::identity(n, n) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_rollout_reproduces_simulation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let params = random_params(&mut r, 5);
        let u: Vec<f64> = (0..200).map(|_| r.random_range(-1.0..1.0)).collect();
        let traj = simulate_armax(&params, &u, 200, seed, true).unwrap();
        let w = traj.w.as_ref().unwrap();
        let ss = to_observable_canonical(&params).unwrap();
        let mut x = DVector::zeros(ss.dim());
        let scale = traj.y.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        for k in 0..200 {
            let y = ss.output(&x) + w[k];
            prop_assert!((y - traj.y[k]).abs() <= 1e-10 * scale, "k={} {} vs {}", k, y, traj.y[k]);
            x = ss.advance(&x, u[k], w[k]);
        }
    }

    #[test]
    fn closed_loop_charpoly_is_c(seed in any::<u64>()) {
        let params = random_params(&mut rng(seed), 6);
        let ss = to_observable_canonical(&params).unwrap();
        let poly = characteristic_polynomial(&(&ss.a - &ss.b2 * &ss.c));
        for i in 1..=params.n() {
            prop_assert!((poly[i] - params.c.coeff(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_autocorrelation_toeplitz_is_psd(seed in any::<u64>(), len in 10usize..400, lags in 1usize..8) {
        let mut r = rng(seed);
        let signal: Vec<f64> = (0..len).map(|_| r.random_range(-2.0..2.0)).collect();
        let ac = autocorrelation(&signal, lags).unwrap();
        // With the biased normalization the Toeplitz matrix is a Gram matrix
        // and exactly PSD. The overlap-count normalization adds a Toeplitz
        // perturbation with entries r(l)·l/T, whose spectral norm bounds how
        // far below zero the eigenvalues can go.
        let t = len as f64;
        let toeplitz = |r: &dyn Fn(usize) -> f64| DMatrix::from_fn(lags + 1, lags + 1, |i, j| r(i.abs_diff(j)));
        let biased = toeplitz(&|l| ac[l] * (t - l as f64) / t);
        prop_assert!(min_symmetric_eigenvalue(&biased) >= -1e-10 * ac[0].max(1.0));
        let bias: f64 = (1..=lags).map(|l| 2.0 * ac[l].abs() * l as f64 / t).sum();
        let unbiased = toeplitz(&|l| ac[l]);
        prop_assert!(min_symmetric_eigenvalue(&unbiased) >= -bias - 1e-10 * ac[0].max(1.0));
        // Cauchy–Schwarz on the overlapping products.
        for (l, v) in ac.iter().enumerate() {
            prop_assert!(v.abs() <= ac[0] * t / (t - l as f64) + 1e-12);
        }
    }

    #[test]
    fn ma_value_iteration_fixed_point_is_truth(seed in any::<u64>(), p in 1usize..4, sigma2 in 0.1f64..5.0) {
        let c = random_stable_poly(&mut rng(seed), p, 0.8)[1..].to_vec();
        let trace = ma_identify_offline(&ma_autocovariance(&c, sigma2), p, 2000).unwrap();
        prop_assert!(trace.converged);
        for (est, truth) in trace.final_c().iter().zip(&c) {
            prop_assert!((est - truth).abs() < 1e-6, "{:?} vs {:?}", trace.final_c(), c);
        }
        prop_assert!((trace.final_eps2() - sigma2).abs() < 1e-6 * sigma2.max(1.0));
    }

    #[test]
    fn riv_recursion_matches_direct_solves(seed in any::<u64>(), dim in 1usize..5, p0 in 1.0f64..1e3) {
        let mut r = rng(seed);
        let mut state = RecursiveIvState::new(dim, p0).unwrap();
        let mut s = DMatrix::identity(dim, dim) / p0;
        let mut rhs = DVector::zeros(dim);
        for _ in 0..50 {
            let zeta = DVector::from_fn(dim, |_, _| r.random_range(-1.0..1.0));
            let phi = &zeta + DVector::from_fn(dim, |_, _| r.random_range(-0.5..0.5));
            let y = r.random_range(-1.0..1.0);
            state.riv_step(&zeta, &phi, y).unwrap();
            s += &zeta * phi.transpose();
            rhs += &zeta * y;
            let direct = s.clone().lu().solve(&rhs).unwrap();
            prop_assert!((&state.theta_tilde - &direct).amax() <= 1e-8 * direct.amax().max(1.0));
        }
    }

    #[test]
    fn identifier_is_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let data: Vec<(f64, f64)> = (0..300).map(|_| (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        let run = || {
            let mut ident = OnlineIdentifier::new(2, 1, 1, 100.0).unwrap();
            data.iter().map(|&(u, y)| ident.step(u, y)).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn estimation_are_fixed_point(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=3usize);
        let a = random_matrix(&mut r, n, n, 0.5);
        let b2 = random_matrix(&mut r, n, 1, 1.0);
        let c = random_matrix(&mut r, 1, n, 1.0);
        let model = StateSpaceModel::new(a.clone(), DMatrix::zeros(n, 1), b2.clone(), c.clone()).unwrap();
        let (q, rv) = (r.random_range(0.1..2.0), r.random_range(0.1..2.0));
        let noise = NoiseCovariance::scalar(q, rv, 0.0).unwrap();
        let sol = solve_estimation_are(&model, &noise, 1e-12, 100_000).unwrap();
        let sigma = &sol.sigma;
        let g = &a * sigma * c.transpose();
        let innov = (&c * sigma * c.transpose())[(0, 0)] + rv;
        let image = &a * sigma * a.transpose() - &g * g.transpose() / innov + &b2 * b2.transpose() * q;
        prop_assert!(max_abs(&(image - sigma)) < 1e-9 * max_abs(sigma).max(1.0));
        prop_assert!(min_symmetric_eigenvalue(sigma) > -1e-10);
    }

    #[test]
    fn riccati_iterates_stay_psd_and_match_inversion_lemma(seed in any::<u64>(), gamma in 0.5f64..0.99) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4usize);
        let a = random_matrix(&mut r, n, n, 1.0);
        let b = random_matrix(&mut r, n, 1, 1.0);
        let q = random_pd(&mut r, n);
        let rw = r.random_range(0.1..3.0);
        let mut p = random_pd(&mut r, n);
        for _ in 0..30 {
            let next = riccati_sweep(&p, &a, &b, &q, rw, gamma).unwrap();
            let lemma = riccati_sweep_inversion_lemma(&p, &a, &b, &q, rw, gamma).unwrap();
            // The lemma form inverts P, so round-off grows with κ(P).
            let eig = p.clone().symmetric_eigenvalues();
            let kappa = eig.amax() / eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let tol = (1e-10_f64).max(1e2 * f64::EPSILON * kappa) * max_abs(&next).max(1.0);
            prop_assert!(max_abs(&(&next - &lemma)) <= tol);
            prop_assert!(min_symmetric_eigenvalue(&next) >= -1e-9 * max_abs(&next).max(1.0));
            p = next;
        }
    }

    #[test]
    fn dare_solution_is_a_fixed_point(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4usize);
        let a = random_matrix(&mut r, n, n, 0.9);
        let b = random_matrix(&mut r, n, 1, 1.0);
        let q = DMatrix::identity(n, n);
        // Nearly uncontrollable unstable modes make P blow up past the
        // round-off floor of any absolute tolerance; keep a margin.
        let mut ctrb = DMatrix::zeros(n, n);
        let mut v = b.clone();
        for j in 0..n {
            ctrb.set_column(j, &v.column(0));
            v = &a * v;
        }
        let sv = ctrb.singular_values();
        prop_assume!(sv.min() > 1e-3 * sv.max());
        // The stopping rule is absolute, so it has to sit above round-off
        // at the scale of P; nearly uncontrollable draws give |P| ~ 1e5 and
        // sweep-to-sweep rounding noise ~ 1e-11 relative.
        let scale = dare_solve(&a, &b, &q, 1.0, 0.9, &q, 1e-6, 1_000_000).unwrap().p.amax().max(1.0);
        let tol = 1e-10 * scale;
        let sol = dare_solve(&a, &b, &q, 1.0, 0.9, &q, tol, 1_000_000).unwrap();
        let image = riccati_sweep(&sol.p, &a, &b, &q, 1.0, 0.9).unwrap();
        prop_assert!(max_abs(&(image - &sol.p)) < tol);
        prop_assert!(sol.residual < tol);
    }

    #[test]
    fn q_function_minimizer_is_the_lqr_action(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=4usize);
        let a = random_matrix(&mut r, n, n, 1.0);
        let b = random_matrix(&mut r, n, 1, 1.0);
        let p = random_pd(&mut r, n);
        let q = random_pd(&mut r, n);
        let x = DVector::from_fn(n, |_, _| r.random_range(-3.0..3.0));
        let h = q_matrix(&p, &a, &b, &q, 0.7, 0.9).unwrap();
        let k = lqr_gain(&p, &a, &b, 0.7, 0.9).unwrap();
        let u = -(k * &x)[(0, 0)];
        prop_assert!((h.argmin(&x) - u).abs() <= 1e-10 * u.abs().max(1.0));
        // The minimizer beats nearby actions.
        prop_assert!(h.evaluate(&x, u) <= h.evaluate(&x, u + 1e-3));
        prop_assert!(h.evaluate(&x, u) <= h.evaluate(&x, u - 1e-3));
    }

    #[test]
    fn trajectory_csv_round_trip(seed in any::<u64>(), len in 1usize..50, nx in 0usize..4, with_w in any::<bool>()) {
        let mut r = rng(seed);
        let mut v = || r.random_range(-1e6..1e6) * 10f64.powi(r.random_range(-12..3));
        let traj = Trajectory {
            u: (0..len).map(|_| v()).collect(),
            y: (0..len).map(|_| v()).collect(),
            w: with_w.then(|| (0..len).map(|_| v()).collect()),
            x: (nx > 0).then(|| (0..len).map(|_| (0..nx).map(|_| v()).collect()).collect()),
            seed,
        };
        let mut buf = Vec::new();
        write_trajectory(&traj, &mut buf).unwrap();
        prop_assert_eq!(read_trajectory(buf.as_slice()).unwrap(), traj);
    }
}
