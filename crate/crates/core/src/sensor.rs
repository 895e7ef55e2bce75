//! Forward model of the sensor: stimulus (position, force) to multi-channel reading.
//!
//! The LED and the RGB detector sit at the same end of the waveguide, so the
//! dyed path length equals the press distance from that end. The noise-free
//! reading is
//!
//! ```text
//! channels = coupled_fraction(F) · exp(-α x) · bend_gain · ∫ attenuate(source, dye_ε, x) · R_ch dλ
//! ```
//!
//! with `dye_ε` the strain-diluted dye. Additive white Gaussian noise is then
//! applied per channel and the result is clamped at zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{bending_gain, strained_dye, ContactError, CouplingLaw, PerturbationState};
use crate::spectral::{
    attenuate, default_grid, integrate_channels, ChannelBank, DyeProfile, SpectralError, Spectrum,
    INTENSITY_FLOOR,
};

pub const MIN_LENGTH_MM: f64 = 30.0;
pub const MAX_LENGTH_MM: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorError {
    #[error("invalid sensor configuration: {0}")]
    InvalidConfig(String),
    #[error("stimulus out of range: {0}")]
    Domain(String),
    #[error("SNR is undefined for a stimulus in the dead zone")]
    UndefinedSnr,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Contact(#[from] ContactError),
}

/// Full static description of one sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub length_mm: f64,
    pub source: Spectrum,
    pub dye: DyeProfile,
    pub bank: ChannelBank,
    pub coupling: CouplingLaw,
    /// Achromatic loss of the transparent waveguide, 1/mm.
    pub clear_loss_per_mm: f64,
    pub perturbation: PerturbationState,
}

impl Default for SensorConfig {
    fn default() -> Self {
        let grid = default_grid();
        Self {
            length_mm: 85.0,
            source: Spectrum::flat(&grid, 1.0).expect("flat source"),
            dye: DyeProfile::red_dye(&grid),
            bank: ChannelBank::rgb_boxcar(&grid).expect("rgb bank"),
            coupling: CouplingLaw::default(),
            clear_loss_per_mm: 0.002,
            perturbation: PerturbationState::default(),
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if !(MIN_LENGTH_MM..=MAX_LENGTH_MM).contains(&self.length_mm) {
            return Err(SensorError::InvalidConfig(format!(
                "length {} mm outside [{MIN_LENGTH_MM}, {MAX_LENGTH_MM}]",
                self.length_mm
            )));
        }
        if !(self.clear_loss_per_mm >= 0.0 && self.clear_loss_per_mm.is_finite()) {
            return Err(SensorError::InvalidConfig(format!("clear loss {}", self.clear_loss_per_mm)));
        }
        if self.source.wavelengths_nm() != self.dye.wavelengths_nm()
            || self.source.wavelengths_nm() != self.bank.wavelengths_nm()
        {
            return Err(SensorError::Spectral(SpectralError::GridMismatch));
        }
        if self.bank.is_empty() {
            return Err(SensorError::InvalidConfig("channel bank is empty".into()));
        }
        self.coupling.validate()?;
        self.perturbation.validate()?;
        Ok(())
    }

    /// Usable press range in laboratory coordinates; stretching lengthens the sensor.
    pub fn effective_length_mm(&self) -> f64 {
        self.length_mm * (1.0 + self.perturbation.strain)
    }

    pub fn with_length(&self, length_mm: f64) -> Self {
        Self { length_mm, ..self.clone() }
    }

    pub fn with_perturbation(&self, perturbation: PerturbationState) -> Self {
        Self { perturbation, ..self.clone() }
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.bank.names()
    }

    fn check_position(&self, position_mm: f64) -> Result<(), SensorError> {
        let max = self.effective_length_mm();
        if !(position_mm >= 0.0 && position_mm <= max) {
            return Err(SensorError::Domain(format!("position {position_mm} mm outside [0, {max}]")));
        }
        Ok(())
    }

    /// Channel integrals of the dye-filtered source at `position_mm`, before
    /// coupling and achromatic factors.
    fn spectral_response(&self, position_mm: f64) -> Result<Vec<f64>, SensorError> {
        let dye = strained_dye(&self.dye, self.perturbation.strain)?;
        let filtered = attenuate(&self.source, &dye, position_mm)?;
        Ok(integrate_channels(&filtered, &self.bank)?)
    }

    /// Position-only factors multiplying the spectral response.
    fn achromatic_factor(&self, position_mm: f64) -> Result<f64, SensorError> {
        Ok((-self.clear_loss_per_mm * position_mm).exp() * bending_gain(&self.perturbation)?)
    }
}

/// Total intensity a press at a given position delivers per unit coupled fraction.
pub trait Transmission {
    fn transmission(&self, position_mm: f64) -> Result<f64, SensorError>;
}

impl Transmission for SensorConfig {
    fn transmission(&self, position_mm: f64) -> Result<f64, SensorError> {
        let response = self.spectral_response(position_mm)?;
        let factor = self.achromatic_factor(position_mm)?;
        Ok(response.iter().map(|v| v * factor).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub position_mm: f64,
    pub force_n: f64,
}

impl Stimulus {
    pub fn new(position_mm: f64, force_n: f64) -> Self {
        Self { position_mm, force_n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `value` is the SNR in dB on total intensity.
    SnrDb,
    /// `value` is the per-channel standard deviation in intensity units.
    AbsoluteSigma,
}

/// Additive white Gaussian noise, independent per channel.
///
/// In SNR mode the per-channel sigma is chosen so that the noise on the
/// channel sum has standard deviation `total / 10^(snr/20)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub mode: NoiseMode,
    pub value: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { mode: NoiseMode::SnrDb, value: 40.0, seed: 0 }
    }
}

impl NoiseModel {
    pub fn snr_db(value: f64, seed: u64) -> Self {
        Self { mode: NoiseMode::SnrDb, value, seed }
    }

    pub fn absolute(sigma: f64, seed: u64) -> Self {
        Self { mode: NoiseMode::AbsoluteSigma, value: sigma, seed }
    }

    pub fn validate(&self) -> Result<(), SensorError> {
        let ok = match self.mode {
            NoiseMode::SnrDb => self.value > 0.0,
            NoiseMode::AbsoluteSigma => self.value >= 0.0 && self.value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(SensorError::InvalidConfig(format!("noise {:?} with value {}", self.mode, self.value)))
        }
    }

    /// Per-channel standard deviation for a given noise-free reading.
    pub fn channel_sigma(&self, noise_free: &[f64]) -> f64 {
        match self.mode {
            NoiseMode::AbsoluteSigma => self.value,
            NoiseMode::SnrDb => {
                let total: f64 = noise_free.iter().sum();
                total / 10f64.powf(self.value / 20.0) / (noise_free.len() as f64).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReading {
    pub intensities: Vec<f64>,
    /// Set when every channel is at or below the intensity floor.
    pub below_floor: bool,
}

impl ChannelReading {
    pub fn new(intensities: Vec<f64>) -> Self {
        let below_floor = intensities.iter().all(|v| !(*v > INTENSITY_FLOOR));
        Self { intensities, below_floor }
    }

    pub fn total(&self) -> f64 {
        self.intensities.iter().sum()
    }
}

/// Deterministic RNG for substream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn noise_free_channels(config: &SensorConfig, stim: &Stimulus) -> Result<Vec<f64>, SensorError> {
    config.check_position(stim.position_mm)?;
    if !(stim.force_n >= 0.0) {
        return Err(SensorError::Domain(format!("force {} N", stim.force_n)));
    }
    let response = config.spectral_response(stim.position_mm)?;
    let scale = config.coupling.coupled_fraction(stim.force_n) * config.achromatic_factor(stim.position_mm)?;
    Ok(response.into_iter().map(|v| v * scale).collect())
}

pub fn simulate_reading<R: Rng + ?Sized>(
    config: &SensorConfig,
    stim: &Stimulus,
    noise: Option<&NoiseModel>,
    rng: &mut R,
) -> Result<ChannelReading, SensorError> {
    let mut channels = noise_free_channels(config, stim)?;
    if let Some(noise) = noise {
        let sigma = noise.channel_sigma(&channels);
        for v in channels.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = (*v + sigma * z).max(0.0);
        }
    }
    Ok(ChannelReading::new(channels))
}

/// `20 log10(total / sigma_total)` where `sigma_total` is the standard
/// deviation of the noise on the channel sum.
pub fn measure_snr_db(config: &SensorConfig, stim: &Stimulus, noise: &NoiseModel) -> Result<f64, SensorError> {
    let channels = noise_free_channels(config, stim)?;
    let total: f64 = channels.iter().sum();
    if !(total > INTENSITY_FLOOR) {
        return Err(SensorError::UndefinedSnr);
    }
    let sigma_total = noise.channel_sigma(&channels) * (channels.len() as f64).sqrt();
    Ok(20.0 * (total / sigma_total).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub stimulus: Stimulus,
    pub reading: ChannelReading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub channel_names: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Readings for every (position, force) pair, position-major. Row `i` draws
/// its noise from substream `i` of `seed`, so the table does not depend on
/// evaluation order or thread count.
pub fn sweep(
    config: &SensorConfig,
    positions_mm: &[f64],
    forces_n: &[f64],
    noise: Option<&NoiseModel>,
    seed: u64,
) -> Result<SweepTable, SensorError> {
    let stimuli: Vec<Stimulus> = positions_mm
        .iter()
        .flat_map(|&p| forces_n.iter().map(move |&f| Stimulus::new(p, f)))
        .collect();
    let rows = stimuli
        .par_iter()
        .enumerate()
        .map(|(i, stim)| {
            let mut rng = rng_for(seed, i as u64);
            simulate_reading(config, stim, noise, &mut rng).map(|reading| SweepRow { stimulus: *stim, reading })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { channel_names: config.channel_names(), rows })
}
