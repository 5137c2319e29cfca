//! Excitation signals.

use crate::error::{Error, Result};
use crate::harness::config::InputSpec;
use crate::harness::io::load_trajectory;
use crate::model::{GaussianNoise, INPUT_STREAM};

/// Register lengths with a maximal-length feedback polynomial below.
pub const PRBS_REGISTERS: std::ops::RangeInclusive<u32> = 2..=24;

/// Feedback taps (1-based register positions) of maximal-length
/// Fibonacci shift registers.
fn prbs_taps(register: u32) -> &'static [u32] {
    match register {
        2 => &[2, 1],
        3 => &[3, 2],
        4 => &[4, 3],
        5 => &[5, 3],
        6 => &[6, 5],
        7 => &[7, 6],
        8 => &[8, 6, 5, 4],
        9 => &[9, 5],
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 6, 4, 1],
        13 => &[13, 4, 3, 1],
        14 => &[14, 5, 3, 1],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 6, 2, 1],
        20 => &[20, 17],
        21 => &[21, 19],
        22 => &[22, 21],
        23 => &[23, 18],
        24 => &[24, 23, 22, 17],
        _ => &[],
    }
}

/// Maximal-length pseudo-random binary sequence in `{−amplitude, +amplitude}`.
#[derive(Clone, Debug)]
pub struct Prbs {
    state: u32,
    mask: u32,
    taps: &'static [u32],
    amplitude: f64,
}

impl Prbs {
    /// The seed selects the (non-zero) initial register contents.
    pub fn new(register: u32, amplitude: f64, seed: u64) -> Result<Self> {
        if !PRBS_REGISTERS.contains(&register) {
            return Err(Error::InvalidArgument(format!("unsupported PRBS register length {register}")));
        }
        let mask = (1u32 << register) - 1;
        let mixed = (seed ^ (seed >> 29)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut state = ((mixed >> 32) as u32) & mask;
        if state == 0 {
            state = 1;
        }
        Ok(Self { state, mask, taps: prbs_taps(register), amplitude })
    }

    pub fn next_bit(&mut self) -> bool {
        let feedback = self.taps.iter().fold(0u32, |acc, &t| acc ^ (self.state >> (t - 1)));
        let out = self.state & 1 == 1;
        self.state = ((self.state << 1) | (feedback & 1)) & self.mask;
        out
    }

    pub fn sample(&mut self) -> f64 {
        if self.next_bit() {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

pub fn white_input(len: usize, variance: f64, seed: u64) -> Vec<f64> {
    let mut source = GaussianNoise::new(seed, INPUT_STREAM, variance);
    (0..len).map(|_| source.sample()).collect()
}

/// Materializes `len` input samples for `seed`.
pub fn generate_input(spec: &InputSpec, len: usize, seed: u64) -> Result<Vec<f64>> {
    match spec {
        InputSpec::White { variance } => Ok(white_input(len, *variance, seed)),
        InputSpec::Prbs { amplitude, register } => {
            let mut prbs = Prbs::new(*register, *amplitude, seed)?;
            Ok((0..len).map(|_| prbs.sample()).collect())
        }
        InputSpec::File { path } => {
            let traj = load_trajectory(path)?;
            if traj.len() < len {
                return Err(Error::InvalidArgument(format!(
                    "{} has {} samples, need {len}",
                    path.display(),
                    traj.len()
                )));
            }
            Ok(traj.u[..len].to_vec())
        }
    }
}
