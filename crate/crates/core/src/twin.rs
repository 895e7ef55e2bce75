//! Digital-twin replay: terminal path to joint angles, through two soft
//! encoders and back to a reconstructed path.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{fit_position_from_model, CalibrationError, PositionCalibration, RatioChannels};
use crate::decoder::{decode_joint_angle, noise_for_position_sigma, DecodeError, JointEncoderModel};
use crate::fivebar::{
    forward_kinematics, in_working_region, inverse_kinematics, FiveBarConfig, JointAngles, KinematicsError,
    TerminalPose,
};
use crate::sensor::{rng_for, simulate_reading, NoiseModel, SensorConfig, SensorError, Stimulus};

/// Clearance (relative to `l`) a trajectory must keep from the reach limits
/// and the branch switch.
pub const PATH_MARGIN: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwinError {
    #[error("sample {index} at ({x}, {y}) is outside the working region")]
    UnreachableSample { index: usize, x: f64, y: f64 },
    #[error("sample {index}: joint {joint} angle {angle_deg}° maps off the sensor")]
    EncoderRange { index: usize, joint: usize, angle_deg: f64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: TerminalPose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathShape {
    #[serde(rename = "S", alias = "s")]
    S,
    #[serde(rename = "line")]
    Line,
    #[serde(rename = "circle")]
    Circle,
}

impl std::str::FromStr for PathShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" | "s" => Ok(Self::S),
            "line" => Ok(Self::Line),
            "circle" => Ok(Self::Circle),
            other => Err(format!("unknown path shape '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub shape: PathShape,
    pub center: TerminalPose,
    pub scale_mm: f64,
    pub n_samples: usize,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
}

fn default_duration() -> f64 {
    10.0
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            shape: PathShape::S,
            center: TerminalPose::new(40.0, 140.0),
            scale_mm: 40.0,
            n_samples: 200,
            duration_s: default_duration(),
        }
    }
}

/// Point at arc-length fraction `s ∈ [0, 1]` of an "S" of height `scale`:
/// two stacked three-quarter circles of radius `scale / 4`.
fn s_curve(center: TerminalPose, scale: f64, s: f64) -> TerminalPose {
    let r = scale / 4.0;
    let sweep = 1.5 * PI;
    let (cx, cy, phi) = if s <= 0.5 {
        (center.x, center.y + r, 2.0 * s * sweep)
    } else {
        (center.x, center.y - r, FRAC_PI_2 - (2.0 * s - 1.0) * sweep)
    };
    TerminalPose::new(cx + r * phi.cos(), cy + r * phi.sin())
}

fn check_trajectory_poses(config: &FiveBarConfig, samples: &[TrajectorySample]) -> Result<(), TwinError> {
    for (index, s) in samples.iter().enumerate() {
        if !in_working_region(config, &s.pose, PATH_MARGIN) {
            return Err(TwinError::UnreachableSample { index, x: s.pose.x, y: s.pose.y });
        }
    }
    Ok(())
}

pub fn generate_path(config: &FiveBarConfig, spec: &PathSpec) -> Result<Vec<TrajectorySample>, TwinError> {
    config.validate()?;
    if spec.n_samples < 2 {
        return Err(TwinError::InvalidTrajectory(format!("need at least 2 samples, got {}", spec.n_samples)));
    }
    if !(spec.scale_mm > 0.0 && spec.duration_s > 0.0) {
        return Err(TwinError::InvalidTrajectory("scale and duration must be positive".into()));
    }
    let c = spec.center;
    let half = spec.scale_mm / 2.0;
    let (a, b) = (TerminalPose::new(c.x - half, c.y), TerminalPose::new(c.x + half, c.y));
    let last = (spec.n_samples - 1) as f64;
    let samples: Vec<TrajectorySample> = (0..spec.n_samples)
        .map(|i| {
            let s = i as f64 / last;
            let pose = match spec.shape {
                PathShape::Line => TerminalPose::new(a.x * (1.0 - s) + b.x * s, a.y * (1.0 - s) + b.y * s),
                PathShape::Circle => {
                    let phi = TAU * s;
                    TerminalPose::new(c.x + half * phi.cos(), c.y + half * phi.sin())
                }
                PathShape::S => s_curve(c, spec.scale_mm, s),
            };
            TrajectorySample { t: spec.duration_s * s, pose }
        })
        .collect();
    check_trajectory_poses(config, &samples)?;
    Ok(samples)
}

/// One joint's soft encoder: sensor model, angle-to-position map, calibration
/// and the indenter's constant press force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderChannel {
    pub sensor: SensorConfig,
    pub encoder: JointEncoderModel,
    pub poscal: PositionCalibration,
    pub press_force_n: f64,
}

impl EncoderChannel {
    /// Calibrates the sensor noise-free over its full length at the press force.
    pub fn calibrated(
        sensor: SensorConfig,
        encoder: JointEncoderModel,
        press_force_n: f64,
        n_positions: usize,
    ) -> Result<Self, TwinError> {
        sensor.validate()?;
        encoder.validate()?;
        let channels = RatioChannels::default_for(&sensor.channel_names()).map_err(CalibrationError::from)?;
        let poscal = fit_position_from_model(&sensor, &channels, press_force_n, n_positions)?;
        Ok(Self { sensor, encoder, poscal, press_force_n })
    }

    fn press_position(&self, angle_rad: f64) -> f64 {
        self.encoder.position_for_angle(angle_rad.to_degrees())
    }
}

/// Noise applied to the encoder readings during tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrackNoise {
    /// Per-channel noise chosen at each sample so the decoded angle has this 1σ.
    AngleEquivalent { sigma_deg: f64 },
    /// A fixed sensor noise model.
    Sensor { model: NoiseModel },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedSample {
    pub t: f64,
    pub truth: TerminalPose,
    /// `None` when decoding failed and the sample was dropped.
    pub pose: Option<TerminalPose>,
    pub error_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub rms_error_mm: f64,
    pub max_error_mm: f64,
    /// Errors of the samples that decoded, in trajectory order.
    pub errors_mm: Vec<f64>,
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackResult {
    pub samples: Vec<ReconstructedSample>,
    pub report: TrackingReport,
}

fn channel_noise(
    channel: &EncoderChannel,
    position_mm: f64,
    noise: Option<&TrackNoise>,
    seed: u64,
) -> Result<Option<NoiseModel>, TwinError> {
    match noise {
        None => Ok(None),
        Some(TrackNoise::Sensor { model }) => Ok(Some(*model)),
        Some(TrackNoise::AngleEquivalent { sigma_deg }) => {
            let stim = Stimulus::new(position_mm, channel.press_force_n);
            let target = sigma_deg * channel.encoder.arc_gain_mm_per_deg;
            Ok(Some(noise_for_position_sigma(&channel.sensor, &channel.poscal, &stim, target, seed)?))
        }
    }
}

/// Replays a trajectory through both encoders. Sample `i` draws joint `j`'s
/// noise from substream `2i + j` of `seed`. Decode failures are dropped and
/// counted; poses outside the working region or angles that press off either
/// sensor reject the whole trajectory.
pub fn track(
    fivebar: &FiveBarConfig,
    encoders: [&EncoderChannel; 2],
    trajectory: &[TrajectorySample],
    noise: Option<&TrackNoise>,
    seed: u64,
) -> Result<TrackResult, TwinError> {
    fivebar.validate()?;
    if trajectory.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(TwinError::InvalidTrajectory("time stamps must strictly increase".into()));
    }
    check_trajectory_poses(fivebar, trajectory)?;
    let mut presses = Vec::with_capacity(trajectory.len());
    for (index, s) in trajectory.iter().enumerate() {
        let a = inverse_kinematics(fivebar, &s.pose)?;
        let mut pair = [0.0; 2];
        for (joint, angle) in [a.theta1, a.theta2].into_iter().enumerate() {
            let ch = encoders[joint];
            let x = ch.press_position(angle);
            if !(x >= 0.0 && x <= ch.poscal.length_mm.min(ch.sensor.effective_length_mm())) {
                return Err(TwinError::EncoderRange { index, joint: joint + 1, angle_deg: angle.to_degrees() });
            }
            pair[joint] = x;
        }
        presses.push(pair);
    }

    let samples = trajectory
        .par_iter()
        .zip(presses.par_iter())
        .enumerate()
        .map(|(i, (s, press))| -> Result<ReconstructedSample, TwinError> {
            let mut decoded = [0.0; 2];
            for joint in 0..2 {
                let ch = encoders[joint];
                let model = channel_noise(ch, press[joint], noise, seed)?;
                let stim = Stimulus::new(press[joint], ch.press_force_n);
                let mut rng = rng_for(seed, (2 * i + joint) as u64);
                let reading = simulate_reading(&ch.sensor, &stim, model.as_ref(), &mut rng)?;
                match decode_joint_angle(&reading, &ch.encoder, &ch.poscal) {
                    Ok(deg) => decoded[joint] = deg.to_radians(),
                    Err(_) => return Ok(ReconstructedSample { t: s.t, truth: s.pose, pose: None, error_mm: None }),
                }
            }
            let angles = JointAngles { theta1: decoded[0], theta2: decoded[1] };
            Ok(match forward_kinematics(fivebar, &angles) {
                Ok(p) => ReconstructedSample { t: s.t, truth: s.pose, pose: Some(p), error_mm: Some(p.distance(&s.pose)) },
                Err(_) => ReconstructedSample { t: s.t, truth: s.pose, pose: None, error_mm: None },
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let errors_mm: Vec<f64> = samples.iter().filter_map(|s| s.error_mm).collect();
    let dropped = samples.len() - errors_mm.len();
    let (rms_error_mm, max_error_mm) = if errors_mm.is_empty() {
        (0.0, 0.0)
    } else {
        let ms = errors_mm.iter().map(|e| e * e).sum::<f64>() / errors_mm.len() as f64;
        (ms.sqrt(), errors_mm.iter().cloned().fold(0.0, f64::max))
    };
    Ok(TrackResult { samples, report: TrackingReport { rms_error_mm, max_error_mm, errors_mm, dropped } })
}
