//! TOML configuration files.
//!
//! ```toml
//! [converter]
//! m1 = 1.0
//! m2 = 1.5
//! t_off = 1.0
//! t_on_min = 1.0
//! i_max = 1.5
//! i_c = 1.5
//!
//! [filter]
//! tau = 0.5
//!
//! [[interference]]
//! amp = 0.05
//! omega = 6.28
//! phase = 0.0
//!
//! [interference_mode]
//! phase = "locked"
//!
//! [sim]
//! n_cycles = 500
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cycle::{CurrentLoop, SolverSettings};
use crate::error::{Error, Result};
use crate::params::{ConverterParams, FilterSpec, InterferenceSpec, PhaseMode, Sinusoid};

pub const DEFAULT_N_CYCLES: usize = 500;

fn default_n_cycles() -> usize {
    DEFAULT_N_CYCLES
}

/// Optional simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    /// Largest bracketing step of the crossing search and waveform spacing [s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    #[serde(default = "default_n_cycles")]
    pub n_cycles: usize,
    /// Crossing time tolerance [s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt_max: None,
            n_cycles: DEFAULT_N_CYCLES,
            tol: None,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("dt_max", self.dt_max), ("tol", self.tol)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::invalid(name, format!("must be positive, got {v}")));
                }
            }
        }
        if self.n_cycles == 0 {
            return Err(Error::invalid("n_cycles", "must be at least 1"));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tol: self.tol,
            dt_max: self.dt_max,
            ..SolverSettings::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeTable {
    #[serde(default)]
    phase: PhaseMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    converter: ConverterParams,
    filter: FilterSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    interference: Vec<Sinusoid>,
    #[serde(default)]
    interference_mode: ModeTable,
    #[serde(default)]
    sim: SimSettings,
}

/// A fully validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub converter: ConverterParams,
    pub filter: FilterSpec,
    pub interference: InterferenceSpec,
    pub sim: SimSettings,
}

impl Config {
    pub fn new(
        converter: ConverterParams,
        filter: FilterSpec,
        interference: InterferenceSpec,
        sim: SimSettings,
    ) -> Result<Self> {
        converter.validate()?;
        filter.validate()?;
        interference.validate()?;
        sim.validate()?;
        Ok(Self {
            converter,
            filter,
            interference,
            sim,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(
            raw.converter,
            raw.filter,
            InterferenceSpec {
                components: raw.interference,
                phase_mode: raw.interference_mode.phase,
            },
            raw.sim,
        )
    }

    /// Canonical TOML form; loading it yields an equal `Config`.
    pub fn to_toml_string(&self) -> String {
        let raw = ConfigFile {
            converter: self.converter,
            filter: self.filter,
            interference: self.interference.components.clone(),
            interference_mode: ModeTable {
                phase: self.interference.phase_mode,
            },
            sim: self.sim,
        };
        toml::to_string(&raw).expect("config records always serialize")
    }

    pub fn into_parts(self) -> (ConverterParams, FilterSpec, InterferenceSpec, SimSettings) {
        (self.converter, self.filter, self.interference, self.sim)
    }

    pub fn current_loop(&self) -> Result<CurrentLoop> {
        Ok(
            CurrentLoop::new(self.converter, self.filter, self.interference.clone())?
                .with_settings(self.sim.solver()),
        )
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Config::from_toml_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
