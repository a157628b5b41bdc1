//! The experiment configuration file and its resolution.

use std::path::Path;

use beatres::adaptation::AdaptConfig;
use beatres::eval::EvalConfig;
use beatres::fields::{init_damping_field, init_speed_field, KBounds};
use beatres::readout::TrainConfig;
use beatres::reservoir::{init_reservoir, ReservoirModel, ReservoirParams};
use beatres::rng::derive_seed;
use beatres::signals::DatasetConfig;
use beatres::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Initial speed and damping fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub c0: f64,
    /// Added per row away from the input row; negative slows the far end.
    pub grad_per_row: f64,
    /// Width of the uniform jitter subtracted from every speed.
    pub c_noise_amp: f64,
    pub k0: f64,
    pub k_bounds: KBounds,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            c0: 300.0,
            grad_per_row: -250.0 / 40.0,
            c_noise_amp: 0.8,
            k0: 0.0,
            k_bounds: KBounds::default(),
        }
    }
}

/// Every seed used anywhere in an experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub field_seed: u64,
    pub input_seed: u64,
    pub noise_seed: u64,
    pub data_seed: u64,
    pub shuffle_seed: u64,
}

impl Seeds {
    pub const NAMES: [&'static str; 5] = [
        "field_seed",
        "input_seed",
        "noise_seed",
        "data_seed",
        "shuffle_seed",
    ];

    /// Independent seeds derived from one base value.
    pub fn from_base(base: u64) -> Self {
        let d = |i| derive_seed(base, &[i]);
        Self {
            field_seed: d(0),
            input_seed: d(1),
            noise_seed: d(2),
            data_seed: d(3),
            shuffle_seed: d(4),
        }
    }

    pub fn set(&mut self, name: &str, value: u64) -> CliResult<()> {
        let slot = match name {
            "field_seed" => &mut self.field_seed,
            "input_seed" => &mut self.input_seed,
            "noise_seed" => &mut self.noise_seed,
            "data_seed" => &mut self.data_seed,
            "shuffle_seed" => &mut self.shuffle_seed,
            _ => {
                return Err(CliError::Config(format!(
                    "unknown seed `{name}`; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }

    pub fn named(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("field_seed", self.field_seed),
            ("input_seed", self.input_seed),
            ("noise_seed", self.noise_seed),
            ("data_seed", self.data_seed),
            ("shuffle_seed", self.shuffle_seed),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub density: f64,
    pub spectral_radius: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            density: 0.01,
            spectral_radius: 0.95,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraConfig {
    /// Steps discarded before the spectrum window.
    pub settle_steps: usize,
    pub duration_s: f64,
    /// Spectra are written up to this frequency.
    pub max_freq_hz: f64,
    /// Peaks below this fraction of a neuron's largest bin are ignored.
    pub min_peak_rel: f64,
}

impl Default for SpectraConfig {
    fn default() -> Self {
        Self {
            settle_steps: 500,
            duration_s: 30.0,
            max_freq_hz: 10.0,
            min_peak_rel: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            deltas: vec![-0.1, -0.05, 0.05, 0.1],
        }
    }
}

/// The whole experiment. Seeds live only in `seeds`; the seed fields of
/// `train` and `dataset` are overwritten from it by [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seeds: Seeds,
    pub grid: GridSpec,
    pub field: FieldConfig,
    pub reservoir: ReservoirParams,
    pub train: TrainConfig,
    pub adapt: AdaptConfig,
    pub dataset: DatasetConfig,
    pub eval: EvalConfig,
    pub baseline: BaselineConfig,
    pub spectra: SpectraConfig,
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are always representable in TOML")
    }

    /// Pushes the seeds into the component configs, aligns shared settings
    /// and validates everything.
    pub fn resolve(mut self) -> CliResult<Self> {
        self.train.noise_seed = self.seeds.noise_seed;
        self.train.shuffle_seed = self.seeds.shuffle_seed;
        self.dataset.seed = self.seeds.data_seed;
        self.eval.horizon_steps = self.train.horizon_steps;
        if (self.dataset.dt_s - self.grid.dt).abs() > 1e-15 {
            return Err(CliError::Config(format!(
                "dataset.dt_s ({}) must equal grid.dt ({})",
                self.dataset.dt_s, self.grid.dt
            )));
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.grid.validate()?;
        self.field.k_bounds.validate()?;
        self.reservoir.validate()?;
        self.train.validate()?;
        self.adapt.validate(&self.grid)?;
        self.dataset.validate()?;
        if self.spectra.duration_s <= 0.0 || self.spectra.max_freq_hz <= 0.0 {
            return Err(CliError::Config(
                "spectra duration and max frequency must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// The wave reservoir described by the grid, field and reservoir sections.
    pub fn build_model(&self) -> CliResult<ReservoirModel> {
        let f = &self.field;
        let c = init_speed_field(
            &self.grid,
            f.c0,
            f.grad_per_row,
            f.c_noise_amp,
            self.seeds.field_seed,
        )?;
        let k = init_damping_field(&self.grid, f.k0, &f.k_bounds)?;
        Ok(init_reservoir(
            &self.grid,
            c,
            k,
            &self.reservoir,
            self.seeds.input_seed,
        )?)
    }
}

pub fn tool_version() -> String {
    format!("beatres {}", env!("CARGO_PKG_VERSION"))
}
