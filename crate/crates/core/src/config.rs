//! Project configuration document: sensor description plus per-command sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{CouplingLaw, PerturbationState};
use crate::decoder::JointEncoderModel;
use crate::fivebar::{FiveBarConfig, GridSpec};
use crate::sensor::{NoiseModel, SensorConfig, SensorError, Stimulus};
use crate::spectral::{uniform_grid, ChannelBank, DyeProfile, LogisticDye, SpectralError, Spectrum};
use crate::twin::{PathSpec, TrackNoise};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
}

fn resolve(base: Option<&Path>, path: &Path) -> PathBuf {
    match base {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub step_nm: f64,
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        Self { start_nm: 400.0, stop_nm: 700.0, step_nm: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    Flat { level: f64 },
    Sampled(Spectrum),
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DyeSpec {
    Logistic(LogisticDye),
    Uniform { decay_per_mm: f64 },
    Sampled(DyeProfile),
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub lo_nm: f64,
    pub hi_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub name: String,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BankSpec {
    RgbBoxcar,
    Boxcar { bands: Vec<Band> },
    Lines { lines: Vec<Line> },
    Sampled(ChannelBank),
    File { path: PathBuf },
}

impl BankSpec {
    /// Single-wavelength B/G/R lines at 450, 550 and 650 nm.
    pub fn rgb_lines() -> Self {
        let line = |name: &str, wavelength_nm: f64| Line { name: name.into(), wavelength_nm };
        BankSpec::Lines { lines: vec![line("B", 450.0), line("G", 550.0), line("R", 650.0)] }
    }
}

/// Sensor as written in a config file; [`SensorSpec::build`] turns it into a [`SensorConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorSpec {
    pub length_mm: f64,
    pub grid: WavelengthGrid,
    pub source: SourceSpec,
    pub dye: DyeSpec,
    /// Multiplies whatever the dye section produces.
    pub concentration_scale: f64,
    pub bank: BankSpec,
    pub coupling: CouplingLaw,
    pub clear_loss_per_mm: f64,
    pub perturbation: PerturbationState,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            length_mm: 85.0,
            grid: WavelengthGrid::default(),
            source: SourceSpec::Flat { level: 1.0 },
            dye: DyeSpec::Logistic(LogisticDye::default()),
            concentration_scale: 1.0,
            bank: BankSpec::RgbBoxcar,
            coupling: CouplingLaw::default(),
            clear_loss_per_mm: 0.002,
            perturbation: PerturbationState::default(),
        }
    }
}

impl SensorSpec {
    /// Builds and validates the sensor. Relative `file` paths resolve against `base_dir`.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<SensorConfig, ConfigError> {
        let grid = uniform_grid(self.grid.start_nm, self.grid.stop_nm, self.grid.step_nm)?;
        let source = match &self.source {
            SourceSpec::Flat { level } => Spectrum::flat(&grid, *level)?,
            SourceSpec::Sampled(s) => s.clone(),
            SourceSpec::File { path } => load_json(&resolve(base_dir, path))?,
        };
        let dye = match &self.dye {
            DyeSpec::Logistic(p) => DyeProfile::logistic(&grid, p)?,
            DyeSpec::Uniform { decay_per_mm } => DyeProfile::uniform(&grid, *decay_per_mm)?,
            DyeSpec::Sampled(d) => d.clone(),
            DyeSpec::File { path } => load_json(&resolve(base_dir, path))?,
        };
        let dye = dye.with_concentration(dye.concentration_scale() * self.concentration_scale)?;
        let bank = match &self.bank {
            BankSpec::RgbBoxcar => ChannelBank::rgb_boxcar(&grid)?,
            BankSpec::Boxcar { bands } => {
                let b: Vec<(&str, f64, f64)> = bands.iter().map(|b| (b.name.as_str(), b.lo_nm, b.hi_nm)).collect();
                ChannelBank::boxcar(&grid, &b)?
            }
            BankSpec::Lines { lines } => {
                let l: Vec<(&str, f64)> = lines.iter().map(|l| (l.name.as_str(), l.wavelength_nm)).collect();
                ChannelBank::single_wavelength(&grid, &l)?
            }
            BankSpec::Sampled(b) => b.clone(),
            BankSpec::File { path } => load_json(&resolve(base_dir, path))?,
        };
        let config = SensorConfig {
            length_mm: self.length_mm,
            source,
            dye,
            bank,
            coupling: self.coupling,
            clear_loss_per_mm: self.clear_loss_per_mm,
            perturbation: self.perturbation,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Either an explicit list or `count` evenly spaced values over `[start, stop]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisSpec {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl AxisSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            AxisSpec::Values(v) => v.clone(),
            AxisSpec::Linspace { start, stop, count } => match *count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..n)
                    .map(|i| if i == n - 1 { *stop } else { start + (stop - start) * i as f64 / (n - 1) as f64 })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    /// Defaults to every millimetre of the sensor.
    pub positions_mm: Option<AxisSpec>,
    /// Defaults to a single 2 N press.
    pub forces_n: Option<AxisSpec>,
}

impl SweepSection {
    pub fn positions(&self, sensor: &SensorConfig) -> Vec<f64> {
        match &self.positions_mm {
            Some(a) => a.values(),
            None => {
                let length = sensor.effective_length_mm();
                AxisSpec::Linspace { start: 0.0, stop: length, count: length.round() as usize + 1 }.values()
            }
        }
    }

    pub fn forces(&self) -> Vec<f64> {
        self.forces_n.as_ref().map_or_else(|| vec![2.0], AxisSpec::values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSection {
    pub numerator: Option<String>,
    pub denominator: Option<String>,
    /// Resolution report operating point; omitted means none is produced.
    pub operating_point: Option<Stimulus>,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self { numerator: None, denominator: None, operating_point: Some(Stimulus::new(42.5, 2.0)) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwinSection {
    pub fivebar: FiveBarConfig,
    pub path: PathSpec,
    pub sensor: SensorSpec,
    pub encoders: [JointEncoderModel; 2],
    pub press_force_n: f64,
    pub calibration_positions: usize,
    pub noise: Option<TrackNoise>,
    pub angle_sigma_deg: f64,
    pub deviation_grid: GridSpec,
}

impl Default for TwinSection {
    fn default() -> Self {
        let fivebar = FiveBarConfig::default();
        Self {
            fivebar,
            path: PathSpec::default(),
            sensor: SensorSpec { bank: BankSpec::rgb_lines(), ..SensorSpec::default() },
            encoders: [JointEncoderModel::default(); 2],
            press_force_n: 2.0,
            calibration_positions: 86,
            noise: None,
            angle_sigma_deg: 0.04,
            deviation_grid: GridSpec::bounding(&fivebar, 81, 41),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignSection {
    pub lengths_mm: AxisSpec,
    pub concentrations: AxisSpec,
    pub force_n: f64,
    pub samples_per_mm: f64,
}

impl Default for DesignSection {
    fn default() -> Self {
        Self {
            lengths_mm: AxisSpec::Values(vec![30.0, 85.0, 140.0, 200.0]),
            concentrations: AxisSpec::Values(vec![0.5, 1.0, 2.0]),
            force_n: 2.0,
            samples_per_mm: 1.0,
        }
    }
}

/// Top-level config document. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectConfig {
    pub seed: u64,
    pub sensor: SensorSpec,
    pub noise: Option<NoiseModel>,
    pub sweep: SweepSection,
    pub calibration: CalibrationSection,
    pub twin: TwinSection,
    pub design: DesignSection,
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: PathBuf::from("<config>"), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        load_json(path)
    }
}
