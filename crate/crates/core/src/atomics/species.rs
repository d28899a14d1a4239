//! Species data files.
//!
//! Schema (TOML, `schema_version = 1`):
//!
//! ```toml
//! schema_version = 1
//! name = "rb87"
//! nuclear_spin = 1.5
//! mass_u = 86.909
//! optical_depth = 2.0
//! ground_population = "thermal"   # or "stretched", or [{ F = 2, m = 2, weight = 1.0 }, ...]
//! ground_f = [2.0]                # optional: restrict the ground hyperfine levels
//!
//! [wavelengths_nm]
//! ge = 780.241
//! es = 1529.3
//! sd = 792.7
//!
//! [[levels]]                      # one table each for g, e, s, d
//! label = "s"
//! J = 2.5
//! lifetime_ns = 84.0              # required for e, s, d
//! A_MHz = -16.801
//! B_MHz = 3.645
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

const RB87: &str = include_str!("../../data/rb87.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub label: String,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(default)]
    pub lifetime_ns: Option<f64>,
    #[serde(rename = "A_MHz", default)]
    pub a_mhz: f64,
    #[serde(rename = "B_MHz", default)]
    pub b_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavelengthSpec {
    pub ge: f64,
    pub es: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationEntry {
    #[serde(rename = "F")]
    pub f: f64,
    pub m: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundPopulationSpec {
    /// `"thermal"` (uniform over included sublevels) or `"stretched"`.
    Preset(String),
    Explicit(Vec<PopulationEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub schema_version: u32,
    pub name: String,
    pub nuclear_spin: f64,
    pub mass_u: f64,
    pub optical_depth: f64,
    pub ground_population: GroundPopulationSpec,
    #[serde(default)]
    pub ground_f: Option<Vec<f64>>,
    pub wavelengths_nm: WavelengthSpec,
    pub levels: Vec<LevelSpec>,
}

impl SpeciesConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SpeciesConfig = toml::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "species schema_version {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The shipped rubidium-87 data file.
    pub fn rubidium87() -> Self {
        Self::from_toml_str(RB87).expect("bundled species file parses")
    }

    pub fn level_mut(&mut self, label: &str) -> Option<&mut LevelSpec> {
        self.levels.iter_mut().find(|l| l.label == label)
    }
}
