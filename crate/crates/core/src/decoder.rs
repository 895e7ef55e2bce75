//! Inversion of readings into position, force and joint angle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{ForceCalibration, PositionCalibration};
use crate::interp::InterpError;
use crate::sensor::{noise_free_channels, NoiseModel, SensorConfig, SensorError, Stimulus, Transmission};
use crate::spectral::{SpectralError, INTENSITY_FLOOR};

/// Relative width at which force bisection stops.
pub const FORCE_BISECTION_REL_TOL: f64 = 1e-10;

/// Readings this close above the top knot (relative) decode to the top knot
/// rather than erroring, absorbing round-off in the transmission estimate.
const TOP_KNOT_REL_TOL: f64 = 1e-9;

/// Out-of-span flag threshold, in multiples of the calibration's residual resolution.
const OUT_OF_SPAN_SIGMAS: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("no contact: ratio channels carry no coupled light")]
    NoContact,
    #[error("force is at or below the coupling threshold")]
    BelowThreshold,
    #[error("normalized intensity {0} is above the calibrated range")]
    Saturated(f64),
    #[error("degenerate calibration: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedPosition {
    /// Estimate clamped to the calibrated span.
    pub position_mm: f64,
    pub raw_position_mm: f64,
    pub out_of_span: bool,
}

pub fn decode_position(
    reading: &crate::sensor::ChannelReading,
    poscal: &PositionCalibration,
) -> Result<DecodedPosition, DecodeError> {
    if reading.below_floor {
        return Err(DecodeError::NoContact);
    }
    if poscal.slope == 0.0 {
        return Err(DecodeError::Degenerate("zero slope".into()));
    }
    let lr = poscal.channels.log_ratio(reading).map_err(|e| match e {
        SpectralError::BelowFloor { .. } => DecodeError::NoContact,
        other => DecodeError::Degenerate(other.to_string()),
    })?;
    let raw = (lr - poscal.intercept) / poscal.slope;
    let margin = OUT_OF_SPAN_SIGMAS * poscal.residual_resolution_mm();
    let out_of_span = raw < -margin || raw > poscal.length_mm + margin;
    Ok(DecodedPosition { position_mm: raw.clamp(0.0, poscal.length_mm), raw_position_mm: raw, out_of_span })
}

/// Inverts the force calibration on `total / transmission(position)`.
pub fn decode_force(
    reading: &crate::sensor::ChannelReading,
    position_mm: f64,
    forcecal: &ForceCalibration,
    transmission: &dyn Transmission,
) -> Result<f64, DecodeError> {
    let total = reading.total();
    if !(total > INTENSITY_FLOOR) {
        return Err(DecodeError::BelowThreshold);
    }
    let normalized = total / transmission.transmission(position_mm)?;
    let ys = forcecal.knots_normalized();
    if !(normalized > ys[0]) {
        return Err(DecodeError::BelowThreshold);
    }
    let top = ys[ys.len() - 1];
    if normalized > top {
        if normalized <= top * (1.0 + TOP_KNOT_REL_TOL) {
            return Ok(forcecal.knots_force_n()[ys.len() - 1]);
        }
        return Err(DecodeError::Saturated(normalized));
    }
    Ok(forcecal.interpolant().inverse_increasing(normalized, FORCE_BISECTION_REL_TOL)?)
}

/// Soft encoder: a joint rotation rolls the indenter along the sensor, so the
/// press position is affine in the joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointEncoderModel {
    pub arc_gain_mm_per_deg: f64,
    /// Press position at zero joint angle.
    pub offset_mm: f64,
}

impl Default for JointEncoderModel {
    fn default() -> Self {
        Self { arc_gain_mm_per_deg: 0.4, offset_mm: 42.5 }
    }
}

impl JointEncoderModel {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(self.arc_gain_mm_per_deg > 0.0 && self.arc_gain_mm_per_deg.is_finite()) {
            return Err(DecodeError::Degenerate(format!("arc gain {}", self.arc_gain_mm_per_deg)));
        }
        if !(self.offset_mm >= 0.0 && self.offset_mm.is_finite()) {
            return Err(DecodeError::Degenerate(format!("offset {}", self.offset_mm)));
        }
        Ok(())
    }

    pub fn position_for_angle(&self, angle_deg: f64) -> f64 {
        self.offset_mm + self.arc_gain_mm_per_deg * angle_deg
    }

    pub fn angle_for_position(&self, position_mm: f64) -> f64 {
        (position_mm - self.offset_mm) / self.arc_gain_mm_per_deg
    }

    /// Joint angles whose press positions stay on a sensor of `length_mm`.
    pub fn angle_range_deg(&self, length_mm: f64) -> (f64, f64) {
        (self.angle_for_position(0.0), self.angle_for_position(length_mm))
    }
}

pub fn decode_joint_angle(
    reading: &crate::sensor::ChannelReading,
    encoder: &JointEncoderModel,
    poscal: &PositionCalibration,
) -> Result<f64, DecodeError> {
    Ok(encoder.angle_for_position(decode_position(reading, poscal)?.position_mm))
}

/// First-order 1σ position scatter of the decoded position at a stimulus for
/// a given per-channel noise sigma.
pub fn position_sigma_mm(
    config: &SensorConfig,
    poscal: &PositionCalibration,
    stim: &Stimulus,
    channel_sigma: f64,
) -> Result<f64, DecodeError> {
    let ch = noise_free_channels(config, stim)?;
    let a = ch[poscal.channels.numerator_index];
    let b = ch[poscal.channels.denominator_index];
    if !(a > INTENSITY_FLOOR && b > INTENSITY_FLOOR) {
        return Err(DecodeError::NoContact);
    }
    Ok(channel_sigma * (1.0 / (a * a) + 1.0 / (b * b)).sqrt() / poscal.slope.abs())
}

/// Absolute per-channel noise giving a target 1σ position scatter at `stim`.
pub fn noise_for_position_sigma(
    config: &SensorConfig,
    poscal: &PositionCalibration,
    stim: &Stimulus,
    target_sigma_mm: f64,
    seed: u64,
) -> Result<NoiseModel, DecodeError> {
    let unit = position_sigma_mm(config, poscal, stim, 1.0)?;
    Ok(NoiseModel::absolute(target_sigma_mm / unit, seed))
}
