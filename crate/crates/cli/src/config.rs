//! Run configuration: one JSON document, unknown keys rejected, all
//! dimension checks applied at load.

use std::path::{Path, PathBuf};

use minimax_adaptive::{AdversaryPolicy, GameSpec, Matrix, Sign, SymmetricMatrix};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub gamma: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub x0: Vec<f64>,
    /// Plant sign: +1 or -1.
    pub sign: i8,
    pub adversary: AdversaryConfig,
    pub horizon: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields, rename_all = "snake_case")]
pub enum AdversaryConfig {
    Zero,
    Constant { w: Vec<f64> },
    RandomBounded { bound: f64, seed: u64 },
    WorstCase { sign: i8 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("out"), format: OutputFormat::Csv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        // dimension and definiteness checks happen in GameSpec::new
        let spec = self.game_spec()?;
        if let Some(sim) = &self.simulation {
            if sim.x0.len() != spec.state_dim() {
                return Err(CliError::Config(format!(
                    "x0 has length {}, expected {}",
                    sim.x0.len(),
                    spec.state_dim()
                )));
            }
            if sim.horizon == 0 {
                return Err(CliError::Config("horizon must be at least 1".into()));
            }
            sign_from_i8(sim.sign)?;
            if let AdversaryConfig::WorstCase { sign } = sim.adversary {
                sign_from_i8(sign)?;
            }
            if let AdversaryConfig::Constant { w } = &sim.adversary {
                if w.len() != spec.state_dim() {
                    return Err(CliError::Config("constant disturbance dimension mismatch".into()));
                }
            }
        }
        Ok(())
    }

    pub fn game_spec(&self) -> Result<GameSpec, CliError> {
        let a = Matrix::from_nested(&self.system.a)?;
        let b = Matrix::from_nested(&self.system.b)?;
        let q = SymmetricMatrix::from_nested(&self.system.q)?;
        let r = SymmetricMatrix::from_nested(&self.system.r)?;
        Ok(GameSpec::new(a, b, q, r, self.gamma)?)
    }

    pub fn adversary_policy(&self) -> Result<AdversaryPolicy, CliError> {
        let sim = self
            .simulation
            .as_ref()
            .ok_or_else(|| CliError::Config("config has no simulation section".into()))?;
        Ok(match &sim.adversary {
            AdversaryConfig::Zero => AdversaryPolicy::Zero,
            AdversaryConfig::Constant { w } => AdversaryPolicy::Constant { w: w.clone() },
            AdversaryConfig::RandomBounded { bound, seed } => {
                AdversaryPolicy::RandomBounded { bound: *bound, seed: *seed }
            }
            AdversaryConfig::WorstCase { sign } => {
                AdversaryPolicy::WorstCase { sign: sign_from_i8(*sign)? }
            }
        })
    }
}

pub fn sign_from_i8(v: i8) -> Result<Sign, CliError> {
    match v {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        other => Err(CliError::Config(format!("sign must be 1 or -1, got {other}"))),
    }
}

/// The scalar benchmark system A = B = Q = R = 1.
pub fn scalar_benchmark(gamma: f64) -> RunConfig {
    RunConfig {
        system: SystemConfig {
            a: vec![vec![1.0]],
            b: vec![vec![1.0]],
            q: vec![vec![1.0]],
            r: vec![vec![1.0]],
        },
        gamma,
        solver: SolverConfig::default(),
        simulation: None,
        output: OutputConfig::default(),
    }
}
