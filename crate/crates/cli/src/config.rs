//! Run configuration: one JSON file, flags override file values.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thermlab::generator::HamiltonianSign;
use thermlab::linalg::C64;
use thermlab::model::{DensityMatrix, Level, ParamsFile};
use thermlab::sample::{random_density_matrix, random_pure_state, rng};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Adaptive,
    Rk4,
    Expm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    TemperatureFirst,
    SplittingFirst,
    Both,
}

/// Initial state: a basis label, `"mixed"`, `"random"` / `"random_pure"`
/// (seeded), or explicit ket amplitudes `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Label(String),
    Amplitudes { amplitudes: [[f64; 2]; 3] },
}

/// Either explicit values or `count` evenly spaced points on `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Range { start, stop, count } => {
                let n = *count;
                (0..n)
                    .map(|k| if k + 1 == n { *stop } else { start + (stop - start) * k as f64 / (n.max(2) - 1) as f64 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicroOptions {
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Defaults to `2π γ / 0.01` with `γ = max(γ1, γ2)`.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// `1`, `-1` or `0` (independent baths).
    #[serde(default = "default_sign")]
    pub sign: i32,
}

fn default_modes() -> usize {
    256
}

fn default_sign() -> i32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: ParamsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<HamiltonianSign>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<ScanOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shrink: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro: Option<MicroOptions>,
}

impl RunConfig {
    /// Accepts a full run config or a bare parameter object.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let wrapped = match &value {
            Value::Object(map) if map.contains_key("params") => value,
            _ => serde_json::json!({ "params": value }),
        };
        let config: RunConfig =
            serde_json::from_value(wrapped).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        config.check()?;
        Ok(config)
    }

    fn check(&self) -> Result<(), CliError> {
        for (name, v) in [("rtol", self.rtol), ("atol", self.atol), ("dt", self.dt), ("shrink", self.shrink)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(CliError::Config(format!("{name} must be positive, got {x}")));
                }
            }
        }
        if let Some(t) = self.t_final {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("t_final must be non-negative, got {t}")));
            }
        }
        if let Some(s) = self.shrink {
            if s >= 1.0 {
                return Err(CliError::Config(format!("shrink must lie in (0, 1), got {s}")));
            }
        }
        if let Some(InitialState::Label(l)) = &self.initial_state {
            if l.starts_with("random") && self.seed.is_none() {
                return Err(CliError::Config("a seed is required for random initial states".into()));
            }
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Result<Self, CliError> {
        if seed.is_some() {
            self.seed = seed;
        }
        self.check()?;
        Ok(self)
    }

    pub fn initial_density(&self) -> Result<DensityMatrix, CliError> {
        let spec = self.initial_state.clone().unwrap_or(InitialState::Label("e".into()));
        match spec {
            InitialState::Label(label) => match label.as_str() {
                "e" => Ok(DensityMatrix::basis_state(Level::E)),
                "g1" => Ok(DensityMatrix::basis_state(Level::G1)),
                "g2" => Ok(DensityMatrix::basis_state(Level::G2)),
                "mixed" => Ok(DensityMatrix::maximally_mixed()),
                "random" => Ok(random_density_matrix(&mut rng(self.seed.unwrap_or_default()))),
                "random_pure" => Ok(random_pure_state(&mut rng(self.seed.unwrap_or_default()))),
                other => Err(CliError::Config(format!("unknown initial state {other:?}"))),
            },
            InitialState::Amplitudes { .. } => {
                let ket = self.initial_ket()?;
                DensityMatrix::superposition(ket).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    /// Pure initial state as ket amplitudes (basis labels or explicit amplitudes).
    pub fn initial_ket(&self) -> Result<[C64; 3], CliError> {
        let spec = self.initial_state.clone().unwrap_or(InitialState::Label("e".into()));
        let basis = |k: usize| std::array::from_fn(|i| C64::new(if i == k { 1.0 } else { 0.0 }, 0.0));
        match spec {
            InitialState::Amplitudes { amplitudes } => Ok(amplitudes.map(|[re, im]| C64::new(re, im))),
            InitialState::Label(label) => match label.as_str() {
                "e" => Ok(basis(0)),
                "g1" => Ok(basis(1)),
                "g2" => Ok(basis(2)),
                other => Err(CliError::Config(format!("initial state {other:?} is not a pure basis state or amplitude list"))),
            },
        }
    }
}
