//! ARMAX system identification by value iteration, instrumental variables,
//! model-free state estimation and model-free discounted LQG control.
//!
//! Modules follow the data flow: [`model`] simulates and realizes ARMAX
//! systems, [`offline`] and [`online`] identify them, [`estimation`] turns
//! the identified model into a state estimator, [`lqg`] closes the loop,
//! and [`harness`] runs seeded experiments and reads/writes artifacts.

pub mod error;
pub mod estimation;
pub mod harness;
pub mod linalg;
pub mod lqg;
pub mod model;
pub mod offline;
pub mod online;

pub use error::{Error, Result};
pub use estimation::{
    canonical_observer_gain, error_cov_step, kalman_step, model_free_estimator_step,
    solve_estimation_are, EstimatorState, NoiseCovariance, ObserverSolution,
};
pub use lqg::{
    dare_solve, evaluate_value, lqr_gain, model_free_lqg_step, optimal_value, q_matrix, run_closed_loop,
    ClosedLoopOptions, LqgState, LqgWeights, LqrSolution, QMatrix,
};
pub use model::{
    autocorrelation, impulse_response, polynomial_is_stable, simulate_armax, to_observable_canonical,
    ArmaxParams, Channel, DelayPolynomial, PolyKind, StateSpaceModel, Trajectory,
};
pub use offline::{
    arma_instrument_gram, armax_identify_offline, iv_estimate_arx, ma_identify_offline,
    plr_bootstrap, residual_series, solve_rho_system, IvEstimate, MaViTrace,
};
pub use online::{OnlineIdentifier, OnlineMaState, RecursiveIvState};
