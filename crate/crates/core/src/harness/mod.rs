//! Configuration, trajectory I/O, input generation and seeded experiment
//! runners.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod input;
pub mod io;

pub use config::{DitherSpec, ExperimentConfig, ExperimentKind, InputSpec, WeightSpec};
pub use experiment::{run_experiment, ExperimentReport, SeedFailure, SeedReport};
pub use io::{load_trajectory, save_trajectory};
