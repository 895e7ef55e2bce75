//! Position and force calibration, and resolution/accuracy estimation.
//!
//! Position: `ln(I_num / I_den)` is affine in the press position, so an
//! ordinary least-squares line through (position, log-ratio) samples is the
//! whole model. Force: total intensity divided by the position transmission
//! factor leaves the coupled fraction, which is tabulated against force and
//! interpolated with a monotone cubic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{decode_force, decode_position, DecodeError};
use crate::interp::{InterpError, MonotoneCubic};
use crate::sensor::{
    noise_free_channels, rng_for, simulate_reading, sweep, ChannelReading, NoiseModel, SensorConfig, SensorError,
    Stimulus, Transmission,
};
use crate::spectral::{log_ratio, SpectralError, INTENSITY_FLOOR};
use crate::stats::{linear_fit, mean, FitError};

/// Relative tolerance for recognising a saturated plateau in force samples.
const SATURATION_REL_TOL: f64 = 1e-9;

/// Held-out grid sizes for accuracy estimates.
const HELD_OUT_POSITIONS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("unusable samples (no coupled light in ratio channels) at rows {rows:?}")]
    UnusableSamples { rows: Vec<usize> },
    #[error("degenerate fit: {0}")]
    Degenerate(String),
    #[error("non-monotone force data: {0}")]
    NonMonotone(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// The two channels whose log-ratio encodes position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatioChannels {
    pub numerator: String,
    pub denominator: String,
    pub numerator_index: usize,
    pub denominator_index: usize,
}

impl RatioChannels {
    pub fn new(channel_names: &[String], numerator: &str, denominator: &str) -> Result<Self, SpectralError> {
        let find = |name: &str| {
            channel_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| SpectralError::UnknownChannel(name.to_string()))
        };
        Ok(Self {
            numerator: numerator.to_string(),
            denominator: denominator.to_string(),
            numerator_index: find(numerator)?,
            denominator_index: find(denominator)?,
        })
    }

    /// B over R when both exist, otherwise first over last.
    pub fn default_for(channel_names: &[String]) -> Result<Self, SpectralError> {
        if channel_names.iter().any(|n| n == "B") && channel_names.iter().any(|n| n == "R") {
            return Self::new(channel_names, "B", "R");
        }
        match (channel_names.first(), channel_names.last()) {
            (Some(a), Some(b)) if channel_names.len() >= 2 => Self::new(channel_names, a, b),
            _ => Err(SpectralError::Domain("need at least two channels for a ratio".into())),
        }
    }

    pub fn log_ratio(&self, reading: &ChannelReading) -> Result<f64, SpectralError> {
        log_ratio(&reading.intensities, self.numerator_index, self.denominator_index)
    }
}

/// Affine model `ln(I_num / I_den) = slope · x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionCalibration {
    /// 1/mm.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Residual standard deviation of the log-ratio.
    pub residual_std: f64,
    pub channels: RatioChannels,
    /// Largest calibrated position; decoded positions are clamped to `[0, length_mm]`.
    pub length_mm: f64,
    pub samples: usize,
}

impl PositionCalibration {
    /// Empirical 1σ position scatter implied by the fit residuals.
    pub fn residual_resolution_mm(&self) -> f64 {
        self.residual_std / self.slope.abs()
    }
}

pub fn fit_position(
    samples: &[(f64, ChannelReading)],
    channels: &RatioChannels,
) -> Result<PositionCalibration, CalibrationError> {
    let first = samples.first().map(|s| s.0);
    if samples.iter().all(|s| Some(s.0) == first) && samples.len() >= 2 {
        return Err(CalibrationError::Degenerate("all samples share one position".into()));
    }
    if samples.len() < 3 {
        return Err(CalibrationError::TooFewSamples { needed: 3, got: samples.len() });
    }
    let mut bad = Vec::new();
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for (row, (x, reading)) in samples.iter().enumerate() {
        match channels.log_ratio(reading) {
            Ok(lr) => {
                xs.push(*x);
                ys.push(lr);
            }
            Err(SpectralError::BelowFloor { .. }) => bad.push(row),
            Err(e) => return Err(e.into()),
        }
    }
    if !bad.is_empty() {
        return Err(CalibrationError::UnusableSamples { rows: bad });
    }
    let fit = linear_fit(&xs, &ys).map_err(|e| match e {
        FitError::ZeroSpread => CalibrationError::Degenerate("positions have zero spread".into()),
        other => CalibrationError::Degenerate(other.to_string()),
    })?;
    if fit.slope == 0.0 || !fit.slope.is_finite() {
        return Err(CalibrationError::Degenerate("zero slope".into()));
    }
    Ok(PositionCalibration {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residual_std: fit.residual_std,
        channels: channels.clone(),
        length_mm: xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        samples: xs.len(),
    })
}

/// Noise-free position calibration of a modelled sensor over `[0, effective length]`.
pub fn fit_position_from_model(
    config: &SensorConfig,
    channels: &RatioChannels,
    force_n: f64,
    n_positions: usize,
) -> Result<PositionCalibration, CalibrationError> {
    let length = config.effective_length_mm();
    let positions: Vec<f64> =
        (0..n_positions).map(|i| length * i as f64 / (n_positions.max(2) - 1) as f64).collect();
    let table = sweep(config, &positions, &[force_n], None, 0)?;
    let samples: Vec<(f64, ChannelReading)> =
        table.rows.into_iter().map(|r| (r.stimulus.position_mm, r.reading)).collect();
    fit_position(&samples, channels)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawForceCalibration {
    reference_position_mm: Option<f64>,
    knots_force_n: Vec<f64>,
    knots_normalized: Vec<f64>,
    #[serde(default)]
    slopes: Vec<f64>,
}

/// Monotone map from force to normalized intensity (intensity over position transmission).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawForceCalibration", into = "RawForceCalibration")]
pub struct ForceCalibration {
    pub reference_position_mm: Option<f64>,
    interpolant: MonotoneCubic,
}

impl TryFrom<RawForceCalibration> for ForceCalibration {
    type Error = CalibrationError;

    fn try_from(raw: RawForceCalibration) -> Result<Self, Self::Error> {
        ForceCalibration::from_knots(raw.knots_force_n, raw.knots_normalized, raw.reference_position_mm)
    }
}

impl From<ForceCalibration> for RawForceCalibration {
    fn from(c: ForceCalibration) -> Self {
        RawForceCalibration {
            reference_position_mm: c.reference_position_mm,
            knots_force_n: c.interpolant.knots_x().to_vec(),
            knots_normalized: c.interpolant.knots_y().to_vec(),
            slopes: c.interpolant.slopes().to_vec(),
        }
    }
}

impl ForceCalibration {
    pub fn from_knots(
        forces_n: Vec<f64>,
        normalized: Vec<f64>,
        reference_position_mm: Option<f64>,
    ) -> Result<Self, CalibrationError> {
        if forces_n.len() < 3 {
            return Err(CalibrationError::TooFewSamples { needed: 3, got: forces_n.len() });
        }
        if normalized.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CalibrationError::NonMonotone("normalized intensities must strictly increase".into()));
        }
        if forces_n.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CalibrationError::NonMonotone("forces must strictly increase".into()));
        }
        Ok(Self { reference_position_mm, interpolant: MonotoneCubic::new(forces_n, normalized)? })
    }

    pub fn knots_force_n(&self) -> &[f64] {
        self.interpolant.knots_x()
    }

    pub fn knots_normalized(&self) -> &[f64] {
        self.interpolant.knots_y()
    }

    pub fn interpolant(&self) -> &MonotoneCubic {
        &self.interpolant
    }

    /// Predicted normalized intensity at `force_n`.
    pub fn normalized_at(&self, force_n: f64) -> Result<f64, CalibrationError> {
        Ok(self.interpolant.eval(force_n)?)
    }
}

/// `n` calibration forces on `[f_threshold, f_max]`, spaced cubically so
/// they cluster near the threshold where the coupling curve is steepest.
pub fn force_knot_schedule(f_threshold_n: f64, f_max_n: f64, n: usize) -> Vec<f64> {
    let span = f_max_n - f_threshold_n;
    (0..n)
        .map(|i| {
            let u = i as f64 / (n.max(2) - 1) as f64;
            f_threshold_n + span * u * u * u
        })
        .collect()
}

/// Builds the force interpolant from (force, reading) samples.
///
/// Readings are normalized by the transmission factor at `known_position`
/// (or at the decoded position when `None`). Replicated forces are averaged.
/// Dead-zone samples collapse to a single zero knot at the largest dead-zone
/// force, and a saturated plateau at the top end is discarded.
pub fn fit_force(
    samples: &[(f64, ChannelReading)],
    poscal: &PositionCalibration,
    known_position: Option<f64>,
    transmission: &dyn Transmission,
) -> Result<ForceCalibration, CalibrationError> {
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(samples.len());
    let mut bad = Vec::new();
    for (row, (force, reading)) in samples.iter().enumerate() {
        if !(force.is_finite() && *force >= 0.0) {
            bad.push(row);
            continue;
        }
        let total = reading.total();
        let normalized = if total > INTENSITY_FLOOR {
            let x = match known_position {
                Some(x) => x,
                None => decode_position(reading, poscal)?.position_mm,
            };
            total / transmission.transmission(x)?
        } else {
            0.0
        };
        points.push((*force, normalized));
    }
    if !bad.is_empty() {
        return Err(CalibrationError::UnusableSamples { rows: bad });
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut groups: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        let f = points[i].0;
        let j = points[i..].iter().position(|p| p.0 != f).map_or(points.len(), |k| i + k);
        let vals: Vec<f64> = points[i..j].iter().map(|p| p.1).collect();
        groups.push((f, mean(&vals)));
        i = j;
    }

    let first_live = groups
        .iter()
        .position(|g| g.1 > INTENSITY_FLOOR)
        .ok_or_else(|| CalibrationError::NonMonotone("every sample is in the dead zone".into()))?;
    if let Some(k) = groups[first_live..].iter().position(|g| !(g.1 > INTENSITY_FLOOR)) {
        return Err(CalibrationError::NonMonotone(format!(
            "dead-zone reading at {} N above a coupled reading",
            groups[first_live + k].0
        )));
    }
    let mut knots: Vec<(f64, f64)> = Vec::new();
    if first_live > 0 {
        knots.push((groups[first_live - 1].0, 0.0));
    }
    knots.extend_from_slice(&groups[first_live..]);

    let top = knots.iter().map(|k| k.1).fold(f64::NEG_INFINITY, f64::max);
    let plateau = knots.iter().rev().take_while(|k| k.1 >= top * (1.0 - SATURATION_REL_TOL)).count();
    if plateau >= 2 {
        knots.truncate(knots.len() - plateau);
    }
    if knots.len() < 3 {
        return Err(CalibrationError::TooFewSamples { needed: 3, got: knots.len() });
    }
    let (forces, normalized): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
    ForceCalibration::from_knots(forces, normalized, known_position)
}

/// Fits a force calibration from noise-free model readings at `position_mm`.
pub fn fit_force_from_model(
    config: &SensorConfig,
    poscal: &PositionCalibration,
    position_mm: f64,
    forces_n: &[f64],
) -> Result<ForceCalibration, CalibrationError> {
    let table = sweep(config, &[position_mm], forces_n, None, 0)?;
    let samples: Vec<(f64, ChannelReading)> =
        table.rows.into_iter().map(|r| (r.stimulus.force_n, r.reading)).collect();
    fit_force(&samples, poscal, Some(position_mm), config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub spatial_resolution_mm: f64,
    pub spatial_accuracy_mm: f64,
    pub force_resolution_n: f64,
    pub force_accuracy_n: f64,
}

/// First-order resolution at an operating point plus held-out accuracy.
///
/// Resolution propagates the per-channel noise sigma through the log-ratio
/// (position) and through the normalized intensity (force). Accuracy is the
/// mean absolute decode error over a held-out grid of noisy readings drawn
/// from `noise.seed`: positions offset from the calibration grid at the
/// operating force, and forces midway between knots at the operating position.
pub fn estimate_resolution(
    config: &SensorConfig,
    poscal: &PositionCalibration,
    forcecal: &ForceCalibration,
    noise: &NoiseModel,
    operating_point: &Stimulus,
) -> Result<ResolutionReport, CalibrationError> {
    if poscal.slope == 0.0 {
        return Err(CalibrationError::Degenerate("zero slope".into()));
    }
    let channels = noise_free_channels(config, operating_point)?;
    let sigma = noise.channel_sigma(&channels);
    let i_num = channels[poscal.channels.numerator_index];
    let i_den = channels[poscal.channels.denominator_index];
    if !(i_num > INTENSITY_FLOOR && i_den > INTENSITY_FLOOR) {
        return Err(CalibrationError::Degenerate("operating point is in the dead zone".into()));
    }
    let sigma_lr = sigma * (1.0 / (i_num * i_num) + 1.0 / (i_den * i_den)).sqrt();
    let spatial_resolution_mm = sigma_lr / poscal.slope.abs();

    let (f_lo, f_hi) = forcecal.interpolant.domain();
    if !(operating_point.force_n > f_lo && operating_point.force_n < f_hi) {
        return Err(CalibrationError::Degenerate(format!(
            "operating force {} N outside calibrated range ({f_lo}, {f_hi})",
            operating_point.force_n
        )));
    }
    let transmission = config.transmission(operating_point.position_mm)?;
    let slope_f = forcecal.interpolant.derivative(operating_point.force_n)?;
    if !(slope_f > 0.0) {
        return Err(CalibrationError::Degenerate("flat force response at operating point".into()));
    }
    let sigma_norm = sigma * (channels.len() as f64).sqrt() / transmission;
    let force_resolution_n = sigma_norm / slope_f;

    let mut pos_err = Vec::new();
    for j in 0..HELD_OUT_POSITIONS {
        let x = poscal.length_mm * (j as f64 + 0.5) / HELD_OUT_POSITIONS as f64;
        let stim = Stimulus::new(x, operating_point.force_n);
        let reading = simulate_reading(config, &stim, Some(noise), &mut rng_for(noise.seed, j as u64))?;
        if let Ok(d) = decode_position(&reading, poscal) {
            pos_err.push((d.position_mm - x).abs());
        }
    }
    let knots = forcecal.knots_force_n();
    let mut force_err = Vec::new();
    for (j, w) in knots.windows(2).enumerate() {
        let f = 0.5 * (w[0] + w[1]);
        let stim = Stimulus::new(operating_point.position_mm, f);
        let stream = (HELD_OUT_POSITIONS + j) as u64;
        let reading = simulate_reading(config, &stim, Some(noise), &mut rng_for(noise.seed, stream))?;
        let decoded = decode_position(&reading, poscal)
            .and_then(|d| decode_force(&reading, d.position_mm, forcecal, config));
        if let Ok(f_hat) = decoded {
            force_err.push((f_hat - f).abs());
        }
    }
    if pos_err.is_empty() || force_err.is_empty() {
        return Err(CalibrationError::Degenerate("no held-out reading could be decoded".into()));
    }
    Ok(ResolutionReport {
        spatial_resolution_mm,
        spatial_accuracy_mm: mean(&pos_err),
        force_resolution_n,
        force_accuracy_n: mean(&force_err),
    })
}

/// Everything `calibrate` produces, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub position: PositionCalibration,
    pub force: Option<ForceCalibration>,
    pub resolution: Option<ResolutionReport>,
}
