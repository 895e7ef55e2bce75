//! Force-to-coupled-light law and off-axis perturbations (strain, bending).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::DyeProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("invalid value: {0}")]
    Domain(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
}

pub const MAX_STRAIN: f64 = 0.5;
pub const MIN_STRAIN: f64 = -0.05;
pub const MAX_BEND_DEG: f64 = 180.0;

/// Fraction of incident light coupled across the air gap as a function of
/// applied force: zero up to a threshold, then a saturating power law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CouplingLaw {
    pub f_threshold_n: f64,
    pub gain: f64,
    pub exponent: f64,
}

impl Default for CouplingLaw {
    /// Threshold 0.1 N, exponent 2/3, gain fixed so that 5 N couples 80 %.
    fn default() -> Self {
        Self::normalized(0.1, 2.0 / 3.0, 5.0, 0.8).expect("default law is valid")
    }
}

impl CouplingLaw {
    pub fn new(f_threshold_n: f64, gain: f64, exponent: f64) -> Result<Self, ContactError> {
        let law = Self { f_threshold_n, gain, exponent };
        law.validate()?;
        Ok(law)
    }

    /// Law whose gain makes `coupled_fraction(reference_force_n) == reference_fraction`.
    pub fn normalized(
        f_threshold_n: f64,
        exponent: f64,
        reference_force_n: f64,
        reference_fraction: f64,
    ) -> Result<Self, ContactError> {
        if !(reference_force_n > f_threshold_n) {
            return Err(ContactError::Domain("reference force must exceed the threshold".into()));
        }
        let gain = reference_fraction / (reference_force_n - f_threshold_n).powf(exponent);
        Self::new(f_threshold_n, gain, exponent)
    }

    pub fn validate(&self) -> Result<(), ContactError> {
        if !(self.f_threshold_n >= 0.0 && self.f_threshold_n.is_finite()) {
            return Err(ContactError::Domain(format!("threshold force {}", self.f_threshold_n)));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(ContactError::Domain(format!("gain {}", self.gain)));
        }
        if !(self.exponent > 0.0 && self.exponent <= 2.0) {
            return Err(ContactError::Domain(format!("exponent {}", self.exponent)));
        }
        Ok(())
    }

    /// Coupled fraction in `[0, 1]`; total on the real line (negative forces couple nothing).
    pub fn coupled_fraction(&self, force_n: f64) -> f64 {
        if !(force_n > self.f_threshold_n) {
            return 0.0;
        }
        (self.gain * (force_n - self.f_threshold_n).powf(self.exponent)).min(1.0)
    }

    /// Smallest force at which the law reaches full coupling.
    pub fn saturation_force_n(&self) -> f64 {
        self.f_threshold_n + (1.0 / self.gain).powf(1.0 / self.exponent)
    }
}

/// Off-axis state of the waveguide: uniaxial pre-strain and initial bend.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationState {
    pub strain: f64,
    pub bend_deg: f64,
}

impl PerturbationState {
    pub fn new(strain: f64, bend_deg: f64) -> Result<Self, ContactError> {
        let state = Self { strain, bend_deg };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<(), ContactError> {
        if !(0.0..=MAX_STRAIN).contains(&self.strain) {
            return Err(ContactError::Domain(format!("strain {} outside [0, {MAX_STRAIN}]", self.strain)));
        }
        bending_gain(self).map(|_| ())
    }
}

/// Dye diluted by stretching: every decay coefficient is divided by `1 + ε`.
pub fn strained_dye(dye: &DyeProfile, strain: f64) -> Result<DyeProfile, ContactError> {
    if !(strain >= MIN_STRAIN && strain.is_finite()) {
        return Err(ContactError::Domain(format!("strain {strain} below {MIN_STRAIN}")));
    }
    if strain == 0.0 {
        return Ok(dye.clone());
    }
    dye.scaled(1.0 / (1.0 + strain)).map_err(|e| ContactError::Domain(e.to_string()))
}

/// Optical gain from an initial bend. The air gap isolates the coupled path
/// from bending, so this is exactly one over the supported range.
pub fn bending_gain(state: &PerturbationState) -> Result<f64, ContactError> {
    if !(0.0..=MAX_BEND_DEG).contains(&state.bend_deg) {
        return Err(ContactError::UnsupportedRegime(format!(
            "bend {}° outside [0, {MAX_BEND_DEG}]",
            state.bend_deg
        )));
    }
    Ok(1.0)
}
