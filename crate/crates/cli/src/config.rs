//! JSON experiment configuration.

use std::path::PathBuf;

use phasediff::{GridSpec, HamiltonianSpec, ModelParams, PhaseGrid, Potential};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Relax,
    Spectrum,
    Evolve,
    Fastslow,
    SchrodingerCompare,
    MontecarloCompare,
    Densities,
    Params,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Relax => "relax",
            Self::Spectrum => "spectrum",
            Self::Evolve => "evolve",
            Self::Fastslow => "fastslow",
            Self::SchrodingerCompare => "schrodinger-compare",
            Self::MontecarloCompare => "montecarlo-compare",
            Self::Densities => "densities",
            Self::Params => "params",
        }
    }
}

/// Starting state. Configuration-space kinds are lifted when a phase-space
/// field is needed; phase-space kinds are projected in the other direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    /// Normalized Gaussian `ψ` with position standard deviation `sigma`.
    GaussianPacket {
        center: f64,
        sigma: f64,
        #[serde(default)]
        momentum: f64,
    },
    /// Gaussian bump `exp(−(x−x0)²/(2σx²) − (p−p0)²/(2σp²) + i(kx·x + kp·p))`.
    PhaseGaussian {
        x: f64,
        p: f64,
        std_x: f64,
        std_p: f64,
        #[serde(default)]
        kx: f64,
        #[serde(default)]
        kp: f64,
    },
    /// Field files written by `phasediff::io` (path without extension).
    PhaseField { path: PathBuf },
    ConfigField { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    /// K.
    #[serde(default = "one")]
    pub temperature: f64,
    /// g; the electron mass when absent.
    pub mass: Option<f64>,
    /// 1/s. When absent it is derived from `a_over_b` (Lamb value by default).
    pub gamma: Option<f64>,
    pub a_over_b: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: ExperimentKind,
    pub initial: Option<InitialState>,
    /// Spectrum: wavenumbers of the `x`-modes.
    #[serde(default)]
    pub k_modes: Vec<f64>,
    /// Spectrum: eigenvalues per mode.
    pub levels: Option<usize>,
    pub physical: Option<PhysicalConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    Zero,
    /// `p²/2m + V(x)`.
    Separable { mass: f64, potential: Potential },
    /// `p²/2m + ½mω²x²`.
    Harmonic { mass: f64, omega: f64 },
}

impl HamiltonianConfig {
    pub fn spec(&self) -> phasediff::Result<HamiltonianSpec> {
        match self {
            Self::Zero => Ok(HamiltonianSpec::zero()),
            Self::Separable { mass, potential } => HamiltonianSpec::separable(*mass, potential.clone()),
            Self::Harmonic { mass, omega } => HamiltonianSpec::harmonic(*mass, *omega),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t: f64,
    pub dt: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    pub paths: usize,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "yes")]
    pub plots: bool,
    /// Also write final fields in the binary field format.
    #[serde(default)]
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { plots: true, fields: false }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentConfig,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub params: ModelParams,
    pub hamiltonian: Option<HamiltonianConfig>,
    pub time: Option<TimeConfig>,
    pub stochastic: Option<StochasticConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| invalid(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.name
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<(), CliError> {
        use ExperimentKind::*;
        let kind = self.kind();
        self.params.validate().map_err(|e| invalid("params", e.to_string()))?;
        if let Some(g) = &self.grid {
            PhaseGrid::new(*g, self.params.hbar).map_err(|e| invalid("grid", e.to_string()))?;
        }
        if let Some(h) = &self.hamiltonian {
            h.spec().map_err(|e| invalid("hamiltonian", e.to_string()))?;
        }
        if let Some(t) = &self.time {
            if !(t.t >= 0.0 && t.t.is_finite()) {
                return Err(invalid("time.t", format!("must be nonnegative and finite, got {}", t.t)));
            }
            positive("time.dt", t.dt)?;
            if t.sample_every == 0 {
                return Err(invalid("time.sample_every", "must be at least 1"));
            }
        }
        if let Some(s) = &self.stochastic {
            positive("stochastic.dt", s.dt)?;
            if s.paths == 0 {
                return Err(invalid("stochastic.paths", "must be at least 1"));
            }
        }
        if let Some(InitialState::GaussianPacket { sigma, .. }) = &self.experiment.initial {
            positive("experiment.initial.sigma", *sigma)?;
        }
        if let Some(InitialState::PhaseGaussian { std_x, std_p, .. }) = &self.experiment.initial {
            positive("experiment.initial.std_x", *std_x)?;
            positive("experiment.initial.std_p", *std_p)?;
        }
        if let Some(p) = &self.experiment.physical {
            positive("experiment.physical.temperature", p.temperature)?;
            for (name, v) in [("mass", p.mass), ("gamma", p.gamma), ("a_over_b", p.a_over_b)] {
                if let Some(v) = v {
                    positive(&format!("experiment.physical.{name}"), v)?;
                }
            }
            if p.gamma.is_some() && p.a_over_b.is_some() {
                return Err(invalid("experiment.physical", "give gamma or a_over_b, not both"));
            }
        }
        if self.experiment.levels == Some(0) {
            return Err(invalid("experiment.levels", "must be at least 1"));
        }

        let needs_grid = matches!(kind, Relax | Evolve | Fastslow | SchrodingerCompare | MontecarloCompare | Densities);
        let needs_time = matches!(kind, Relax | Evolve | Fastslow | SchrodingerCompare | MontecarloCompare);
        let needs_initial = needs_grid;
        let needs_hamiltonian = matches!(kind, Fastslow | SchrodingerCompare);
        let name = kind.name();
        if needs_grid && self.grid.is_none() {
            return Err(invalid("grid", format!("required for experiment {name}")));
        }
        if needs_time && self.time.is_none() {
            return Err(invalid("time", format!("required for experiment {name}")));
        }
        if needs_initial && self.experiment.initial.is_none() {
            return Err(invalid("experiment.initial", format!("required for experiment {name}")));
        }
        if needs_hamiltonian && self.hamiltonian.is_none() {
            return Err(invalid("hamiltonian", format!("required for experiment {name}")));
        }
        if kind == MontecarloCompare && self.stochastic.is_none() {
            return Err(invalid("stochastic", "required for experiment montecarlo-compare"));
        }
        Ok(())
    }

    pub fn hamiltonian_spec(&self) -> phasediff::Result<HamiltonianSpec> {
        self.hamiltonian.as_ref().map_or(Ok(HamiltonianSpec::zero()), |h| h.spec())
    }
}
