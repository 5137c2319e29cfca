use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lqg::LqgWeights;
use crate::model::ArmaxParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    IdentifyOffline,
    IdentifyOnline,
    Estimate,
    Lqg,
    PitfallDemo,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::IdentifyOffline => "identify-offline",
            Self::IdentifyOnline => "identify-online",
            Self::Estimate => "estimate",
            Self::Lqg => "lqg",
            Self::PitfallDemo => "pitfall-demo",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InputSpec {
    White {
        #[serde(default = "one")]
        variance: f64,
    },
    Prbs {
        #[serde(default = "one")]
        amplitude: f64,
        /// Shift-register length; the period is `2^register − 1`.
        #[serde(default = "default_register")]
        register: u32,
    },
    /// The `u` column of a trajectory CSV.
    File { path: PathBuf },
}

impl Default for InputSpec {
    fn default() -> Self {
        Self::White { variance: 1.0 }
    }
}

/// State weight: either the diagonal or the full matrix as rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl WeightSpec {
    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<f64>> {
        match self {
            Self::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::Config(format!("Q diagonal has {} entries, state dimension is {n}", d.len())));
                }
                Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
            }
            Self::Full(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("Q must be {n}×{n}")));
                }
                Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DitherSpec {
    #[serde(default = "one")]
    pub variance: f64,
    /// Leading samples with dither; defaults to a tenth of the horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
}

impl Default for DitherSpec {
    fn default() -> Self {
        Self { variance: 1.0, window: None }
    }
}

/// One experiment: a model, an input, a horizon and the seeds to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// True system; not needed for `pitfall-demo`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ArmaxParams>,
    #[serde(default)]
    pub input: InputSpec,
    pub horizon: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub burn_in: usize,
    /// Identification orders `[n, m, p]`; default to the model's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<[usize; 3]>,
    #[serde(default = "default_vi_iterations")]
    pub vi_iterations: usize,
    /// Initial scale of the recursive IV matrix.
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default, rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<WeightSpec>,
    #[serde(default = "one", rename = "R")]
    pub r: f64,
    #[serde(default)]
    pub dither: DitherSpec,
    /// Trailing samples used for windowed statistics; defaults to
    /// `min(10⁴, horizon/2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_window: Option<usize>,
    /// Truncation of discounted cost sums.
    #[serde(default = "default_cost_horizon")]
    pub cost_horizon: usize,
    /// Discounts for the prediction-error cost check.
    #[serde(default = "default_cost_discounts")]
    pub cost_discounts: Vec<f64>,
    /// Points per logarithmically downsampled convergence curve.
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
    /// Write every `step_stride`-th row of per-step CSVs.
    #[serde(default = "default_stride")]
    pub step_stride: usize,
}

fn one() -> f64 {
    1.0
}
fn default_register() -> u32 {
    15
}
fn default_vi_iterations() -> usize {
    200
}
fn default_p0() -> f64 {
    crate::online::DEFAULT_P0
}
fn default_gamma() -> f64 {
    0.9
}
fn default_cost_horizon() -> usize {
    300
}
fn default_cost_discounts() -> Vec<f64> {
    vec![0.5, 0.9, 0.99]
}
fn default_curve_points() -> usize {
    64
}
fn default_stride() -> usize {
    1
}

impl ExperimentConfig {
    /// Config with defaults for every optional field.
    pub fn new(kind: ExperimentKind, model: Option<ArmaxParams>, horizon: usize, seeds: Vec<u64>) -> Self {
        Self {
            kind,
            model,
            input: InputSpec::default(),
            horizon,
            seeds,
            burn_in: 0,
            orders: None,
            vi_iterations: default_vi_iterations(),
            p0: default_p0(),
            gamma: default_gamma(),
            q: None,
            r: 1.0,
            dither: DitherSpec::default(),
            tail_window: None,
            cost_horizon: default_cost_horizon(),
            cost_discounts: default_cost_discounts(),
            curve_points: default_curve_points(),
            step_stride: 1,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be ≥ 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.kind != ExperimentKind::PitfallDemo && self.model.is_none() {
            return Err(Error::Config(format!("{} needs a model", self.kind.as_str())));
        }
        if let Some(model) = &self.model {
            model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        }
        match &self.input {
            InputSpec::White { variance } if !(*variance >= 0.0) => {
                return Err(Error::Config("input variance must be non-negative".into()))
            }
            InputSpec::Prbs { amplitude, register } => {
                if !amplitude.is_finite() {
                    return Err(Error::Config("PRBS amplitude must be finite".into()));
                }
                if !crate::harness::input::PRBS_REGISTERS.contains(register) {
                    return Err(Error::Config(format!("unsupported PRBS register length {register}")));
                }
            }
            _ => {}
        }
        if self.vi_iterations == 0 {
            return Err(Error::Config("vi_iterations must be ≥ 1".into()));
        }
        if !(self.p0 > 0.0) {
            return Err(Error::Config("p0 must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1)".into()));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config("R must be positive".into()));
        }
        if !(self.dither.variance >= 0.0) {
            return Err(Error::Config("dither variance must be non-negative".into()));
        }
        if self.cost_discounts.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return Err(Error::Config("cost discounts must lie in (0, 1)".into()));
        }
        if self.cost_horizon == 0 || self.curve_points == 0 || self.step_stride == 0 {
            return Err(Error::Config("cost_horizon, curve_points and step_stride must be ≥ 1".into()));
        }
        if self.kind == ExperimentKind::Lqg {
            self.weights()?;
        }
        Ok(())
    }

    /// Identification orders.
    pub fn orders(&self) -> Result<(usize, usize, usize)> {
        match (self.orders, &self.model) {
            (Some([n, m, p]), _) => Ok((n, m, p)),
            (None, Some(model)) => Ok((model.n(), model.m(), model.p())),
            (None, None) => Err(Error::Config("orders are required without a model".into())),
        }
    }

    pub fn tail_window(&self) -> usize {
        self.tail_window.unwrap_or((self.horizon / 2).min(10_000)).clamp(1, self.horizon)
    }

    pub fn dither_window(&self) -> usize {
        self.dither.window.unwrap_or(self.horizon / 10)
    }

    /// LQG weights in canonical coordinates of the model (`Q = I` by default).
    pub fn weights(&self) -> Result<LqgWeights> {
        let model = self.model.as_ref().ok_or_else(|| Error::Config("lqg needs a model".into()))?;
        let n = model.n();
        let q = match &self.q {
            Some(spec) => spec.to_matrix(n)?,
            None => DMatrix::identity(n, n),
        };
        LqgWeights::new(q, self.r, self.gamma).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "identify-online", "model": {"a": [-0.5], "b": [1.0], "c": [0.3], "sigma2": 1.0},
                "horizon": 100, "seeds": [1, 2]}"#,
        )
        .unwrap();
        assert_eq!(cfg.input, InputSpec::White { variance: 1.0 });
        assert_eq!(cfg.orders().unwrap(), (1, 1, 1));
        assert_eq!(cfg.tail_window(), 50);
        assert_eq!(cfg.gamma, 0.9);
    }

    #[test]
    fn parses_lqg_options() {
        let cfg = ExperimentConfig::from_json(
            r#"{"kind": "lqg", "model": {"a": [-1.1, 0.3], "b": [1.0], "c": [0.4], "sigma2": 1.0},
                "horizon": 1000, "seeds": [0], "gamma": 0.8, "Q": [[2, 0], [0, 1]], "R": 0.5,
                "dither": {"variance": 0.25, "window": 50}, "input": {"kind": "prbs", "amplitude": 2}}"#,
        )
        .unwrap();
        let w = cfg.weights().unwrap();
        assert_eq!(w.q[(0, 0)], 2.0);
        assert_eq!((w.r, w.gamma), (0.5, 0.8));
        assert_eq!(cfg.dither_window(), 50);
        assert_eq!(cfg.input, InputSpec::Prbs { amplitude: 2.0, register: 15 });
    }

    #[test]
    fn rejects_invalid_configs() {
        let base = r#"{"kind": "estimate", "model": {"a": [0.5], "b": [], "c": [], "sigma2": 1.0}"#;
        for tail in [r#", "horizon": 0, "seeds": [1]}"#, r#", "horizon": 5, "seeds": []}"#, r#", "horizon": 5, "seeds": [1], "gamma": 1.5}"#] {
            let err = ExperimentConfig::from_json(&format!("{base}{tail}")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
        }
        assert!(ExperimentConfig::from_json(r#"{"kind": "lqg", "horizon": 5, "seeds": [1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "bogus", "horizon": 5, "seeds": [1]}"#).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::PitfallDemo, None, 10, vec![3]);
        cfg.q = Some(WeightSpec::Diagonal(vec![1.0]));
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }
}
