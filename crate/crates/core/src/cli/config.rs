use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use crate::distributions::{ArcLengthDistribution, Atom, DensityPiece};

use super::CliError;

/// Config schema understood by this build.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ids,
    Lyapunov,
    Jumps,
    Bands,
    Verify,
}

/// Arc-length law: atoms as `[s, p]`, density pieces as `[a, b, h]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub density: Vec<[f64; 3]>,
    #[serde(default)]
    pub support_bound: Option<f64>,
}

impl DistributionSpec {
    pub fn build(&self) -> Result<ArcLengthDistribution, CliError> {
        let atoms = self
            .atoms
            .iter()
            .map(|&[length, weight]| Atom { length, weight })
            .collect();
        let pieces = self
            .density
            .iter()
            .map(|&[start, end, height]| DensityPiece { start, end, height })
            .collect();
        ArcLengthDistribution::new(atoms, pieces, self.support_bound)
            .map_err(|e| CliError::Config(format!("distribution: {e}")))
    }
}

fn default_chain() -> usize {
    100_000
}

fn default_realizations() -> usize {
    8
}

/// A run description, read from TOML.
///
/// ```toml
/// schema = 1
/// mode = "ids"
/// e_min = 0.01
/// e_max = 120.0
/// n_points = 1000
/// output_path = "uniform_ids.csv"
///
/// [distribution]
/// density = [[0.5, 1.5, 1.0]]
/// ```
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default)]
    pub mode: Option<Mode>,
    pub distribution: DistributionSpec,
    pub e_min: f64,
    pub e_max: f64,
    pub n_points: usize,
    /// Uniform in `√E` instead of `E`.
    #[serde(default)]
    pub sqrt_grid: bool,
    #[serde(default = "default_chain")]
    pub chain_length: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub magnetic_field: f64,
    pub output_path: PathBuf,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Loop length for `bands`; defaults to the law's only atom.
    #[serde(default)]
    pub omega0: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            )));
        }
        if !(self.e_min > 0.0) || !self.e_min.is_finite() {
            return fail("e_min must be positive");
        }
        if !(self.e_max >= self.e_min) || !self.e_max.is_finite() {
            return fail("e_max must be finite and at least e_min");
        }
        if self.n_points == 0 {
            return fail("n_points must be at least 1");
        }
        if self.n_points > 1 && self.e_max == self.e_min {
            return fail("e_max must exceed e_min when n_points > 1");
        }
        if self.chain_length == 0 {
            return fail("chain_length must be at least 1");
        }
        if self.realizations == 0 {
            return fail("realizations must be at least 1");
        }
        if !self.magnetic_field.is_finite() || self.magnetic_field < 0.0 {
            return fail("magnetic_field must be finite and non-negative");
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1");
        }
        self.distribution.build()?;
        Ok(())
    }

    /// `ω₀` of the periodic chain used by `bands`.
    pub fn periodic_length(&self) -> Result<f64, CliError> {
        if let Some(w) = self.omega0 {
            return if w > 0.0 && w.is_finite() {
                Ok(w)
            } else {
                Err(CliError::Config("omega0 must be positive".into()))
            };
        }
        match (self.distribution.atoms.as_slice(), self.distribution.density.is_empty()) {
            ([[s, _]], true) => Ok(*s),
            _ => Err(CliError::Config(
                "bands needs omega0 or a single-atom distribution".into(),
            )),
        }
    }
}
