use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::rayleigh_length;
use crate::models::{ChirpGrid, ModelInstance};
use crate::solver::SolveOptions;

/// Built-in scenarios plus `custom`, which solves for a caller-supplied
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Ten point sources in five pairs: 1 RL apart within a pair, 3 RL
    /// between pairs.
    PointGroups,
    /// Five monopoles, two dipoles and one quadrupole.
    Multipole,
    /// Four chirped Gaussian components sampled through a 127-point FFT.
    Chirp,
    Custom,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::PointGroups => "point-groups",
            ScenarioKind::Multipole => "multipole",
            ScenarioKind::Chirp => "chirp",
            ScenarioKind::Custom => "custom",
        }
    }
}

/// Exactly one way of fixing the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Target `10 log10(||signal|| / ||noise||)`.
    SnrDb(f64),
    /// Noise vector norm.
    Sigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OffsetUnit {
    /// Multiples of the Rayleigh length `1 / (2 K_L)`.
    Rl,
    Absolute,
}

/// Initial guess: every position moved by `offset` with a random sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub offset: f64,
    pub unit: OffsetUnit,
}

impl InitSpec {
    pub fn absolute_offset(&self, k_low: usize) -> Result<f64> {
        Ok(match self.unit {
            OffsetUnit::Rl => self.offset * rayleigh_length(k_low)?,
            OffsetUnit::Absolute => self.offset,
        })
    }
}

/// Per-trial stability check against the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilitySpec {
    /// Pairs sampled in the region around the truth to estimate `C_U`.
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    /// Ground truth for `custom` runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelInstance>,
    pub k_low: usize,
    /// High cutoffs to extrapolate to and check stability on.
    #[serde(default)]
    pub k_high: Vec<usize>,
    pub noise: NoiseSpec,
    pub trials: usize,
    pub seed: u64,
    pub init: InitSpec,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Names accepted by [`ExperimentConfig::preset`].
pub const PRESETS: [&str; 3] = ["point-groups", "multipole", "chirp"];

fn preset_solver() -> SolveOptions {
    SolveOptions {
        max_iters: 20_000,
        tol_grad: 1e-9,
        ..SolveOptions::default()
    }
}

impl ExperimentConfig {
    pub fn point_groups() -> Self {
        ExperimentConfig {
            scenario: ScenarioKind::PointGroups,
            model: None,
            k_low: 10,
            k_high: vec![100, 200],
            noise: NoiseSpec::SnrDb(20.0),
            trials: 20,
            seed: 20,
            init: InitSpec {
                offset: 0.4,
                unit: OffsetUnit::Rl,
            },
            solver: preset_solver(),
            stability: Some(StabilitySpec { pairs: 10_000 }),
            output: None,
        }
    }

    pub fn multipole() -> Self {
        ExperimentConfig {
            scenario: ScenarioKind::Multipole,
            model: None,
            k_low: 10,
            k_high: vec![50],
            noise: NoiseSpec::SnrDb(32.0),
            trials: 20,
            seed: 32,
            init: InitSpec {
                offset: 0.4,
                unit: OffsetUnit::Rl,
            },
            // Quadrupole coordinates are badly scaled against monopole
            // amplitudes, so plain gradient steps need many more iterations.
            solver: SolveOptions {
                max_iters: 80_000,
                ..preset_solver()
            },
            stability: Some(StabilitySpec { pairs: 10_000 }),
            output: None,
        }
    }

    pub fn chirp() -> Self {
        ExperimentConfig {
            scenario: ScenarioKind::Chirp,
            model: None,
            k_low: 16,
            k_high: Vec::new(),
            noise: NoiseSpec::SnrDb(11.35),
            trials: 20,
            seed: 11,
            init: InitSpec {
                offset: 0.07,
                unit: OffsetUnit::Absolute,
            },
            solver: preset_solver(),
            stability: None,
            output: None,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "point-groups" => Some(Self::point_groups()),
            "multipole" => Some(Self::multipole()),
            "chirp" => Some(Self::chirp()),
            _ => None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.k_low == 0 {
            return Err(Error::InvalidArgument("k_low must be at least 1".into()));
        }
        if let Some(k) = self.k_high.iter().find(|&&k| k < self.k_low) {
            return Err(Error::InvalidArgument(format!(
                "k_high {k} is below k_low {}",
                self.k_low
            )));
        }
        match self.noise {
            NoiseSpec::SnrDb(s) if !s.is_finite() => {
                return Err(Error::InvalidArgument("SNR must be finite".into()));
            }
            NoiseSpec::Sigma(s) if !(s >= 0.0 && s.is_finite()) => {
                return Err(Error::InvalidArgument("sigma must be finite and nonnegative".into()));
            }
            _ => {}
        }
        if !(self.init.offset >= 0.0 && self.init.offset.is_finite()) {
            return Err(Error::InvalidArgument("init offset must be nonnegative".into()));
        }
        self.solver.validate()?;
        match (self.scenario, &self.model) {
            (ScenarioKind::Custom, None) => {
                return Err(Error::InvalidArgument("custom scenario needs a model".into()));
            }
            (ScenarioKind::Custom, Some(m)) => m.validate()?,
            (_, Some(_)) => {
                return Err(Error::InvalidArgument(format!(
                    "scenario {} builds its own model",
                    self.scenario.name()
                )));
            }
            _ => {}
        }
        if self.scenario == ScenarioKind::Chirp && self.k_low > ChirpGrid::closed127().max_frequency() {
            return Err(Error::InvalidArgument("k_low exceeds the chirp FFT grid".into()));
        }
        Ok(())
    }
}
