//! Planar five-bar linkage: kinematics and angle-noise propagation.
//!
//! Joint 1 sits at the origin and Joint 2 at `(d, 0)`. Both proximal links
//! and both distal links have length `l`. Joint angles are measured from the
//! +y axis, θ1 turning toward +x and θ2 mirrored toward −x, so
//!
//! ```text
//! θ1 = π/2 − atan2(y, x)     − acos(√(x² + y²)     / 2l)
//! θ2 = π/2 − atan2(y, d − x) − acos(√((d − x)² + y²) / 2l)
//! ```
//!
//! The inverse map is two-to-one: the distal circles about the elbows meet at
//! the terminal and at its reflection through the elbow midpoint. The forward
//! map keeps the intersection with larger y, so a pose round-trips only when
//! it lies above the elbow midpoint (the working region).

use std::f64::consts::FRAC_PI_2;

use rand_distr::StandardNormal;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sensor::rng_for;

/// Tolerance on acos arguments and tangent-circle checks, relative to `l`.
pub const REACH_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid linkage: {0}")]
    InvalidConfig(String),
    #[error("unreachable: {0}")]
    Unreachable(String),
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveBarConfig {
    /// Base joint separation, mm.
    pub d: f64,
    /// Common link length, mm.
    pub l: f64,
}

impl Default for FiveBarConfig {
    fn default() -> Self {
        Self { d: 80.0, l: 100.0 }
    }
}

impl FiveBarConfig {
    pub fn new(d: f64, l: f64) -> Result<Self, KinematicsError> {
        let c = Self { d, l };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if !(self.d > 0.0 && self.l > 0.0 && self.d.is_finite() && self.l.is_finite()) {
            return Err(KinematicsError::InvalidConfig(format!("d = {}, l = {}", self.d, self.l)));
        }
        if !(self.d < 4.0 * self.l) {
            return Err(KinematicsError::InvalidConfig(format!("d = {} leaves no workspace for l = {}", self.d, self.l)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalPose {
    pub x: f64,
    pub y: f64,
}

impl TerminalPose {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &TerminalPose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

fn clamped_acos(arg: f64, what: &str) -> Result<f64, KinematicsError> {
    if arg > 1.0 + REACH_TOL {
        return Err(KinematicsError::Unreachable(format!("{what} is beyond full extension")));
    }
    Ok(arg.min(1.0).acos())
}

pub fn inverse_kinematics(config: &FiveBarConfig, pose: &TerminalPose) -> Result<JointAngles, KinematicsError> {
    let (x, y) = (pose.x, pose.y);
    if !(x.is_finite() && y.is_finite()) {
        return Err(KinematicsError::Unreachable(format!("non-finite pose ({x}, {y})")));
    }
    let dx2 = config.d - x;
    let r1 = x.hypot(y);
    let r2 = dx2.hypot(y);
    if r1 == 0.0 || r2 == 0.0 {
        return Err(KinematicsError::Singular(format!("pose ({x}, {y}) sits on a base joint")));
    }
    let two_l = 2.0 * config.l;
    let theta1 = FRAC_PI_2 - y.atan2(x) - clamped_acos(r1 / two_l, "distance to joint 1")?;
    let theta2 = FRAC_PI_2 - y.atan2(dx2) - clamped_acos(r2 / two_l, "distance to joint 2")?;
    Ok(JointAngles { theta1, theta2 })
}

/// Elbow points of the two proximal links.
pub fn elbows(config: &FiveBarConfig, angles: &JointAngles) -> (TerminalPose, TerminalPose) {
    let (s1, c1) = angles.theta1.sin_cos();
    let (s2, c2) = angles.theta2.sin_cos();
    (
        TerminalPose::new(config.l * s1, config.l * c1),
        TerminalPose::new(config.d - config.l * s2, config.l * c2),
    )
}

pub fn forward_kinematics(config: &FiveBarConfig, angles: &JointAngles) -> Result<TerminalPose, KinematicsError> {
    if !(angles.theta1.is_finite() && angles.theta2.is_finite()) {
        return Err(KinematicsError::Unreachable("non-finite joint angles".into()));
    }
    let (e1, e2) = elbows(config, angles);
    let (vx, vy) = (e2.x - e1.x, e2.y - e1.y);
    let sep = vx.hypot(vy);
    if sep <= REACH_TOL * config.l {
        return Err(KinematicsError::Singular("elbows coincide".into()));
    }
    let half = 0.5 * sep;
    if half > config.l * (1.0 + REACH_TOL) {
        return Err(KinematicsError::Unreachable(format!("elbows {sep:.6} mm apart exceed 2l")));
    }
    let h = (config.l * config.l - half * half).max(0.0).sqrt();
    let (mx, my) = (0.5 * (e1.x + e2.x), 0.5 * (e1.y + e2.y));
    // Unit normal to the elbow segment, oriented toward +y.
    let (mut nx, mut ny) = (-vy / sep, vx / sep);
    if ny < 0.0 || (ny == 0.0 && nx < 0.0) {
        nx = -nx;
        ny = -ny;
    }
    Ok(TerminalPose::new(mx + h * nx, my + h * ny))
}

/// Signed height of the pose above its elbow midpoint, over `l`. Positive on
/// the branch the forward map selects.
pub fn branch_margin(config: &FiveBarConfig, pose: &TerminalPose) -> Result<f64, KinematicsError> {
    let angles = inverse_kinematics(config, pose)?;
    let (e1, e2) = elbows(config, &angles);
    Ok((pose.y - 0.5 * (e1.y + e2.y)) / config.l)
}

/// Both reachability inequalities hold strictly and y > 0.
pub fn is_reachable(config: &FiveBarConfig, pose: &TerminalPose) -> bool {
    let two_l = 2.0 * config.l;
    pose.y > 0.0 && pose.x.hypot(pose.y) < two_l && (config.d - pose.x).hypot(pose.y) < two_l
}

/// Reachable with at least `margin` (relative to `l`) of clearance from the
/// reach limits and the branch switch, so that forward and inverse maps invert
/// each other.
pub fn in_working_region(config: &FiveBarConfig, pose: &TerminalPose, margin: f64) -> bool {
    let limit = 2.0 * config.l * (1.0 - margin);
    if !(pose.y > 0.0 && pose.x.hypot(pose.y) < limit && (config.d - pose.x).hypot(pose.y) < limit) {
        return false;
    }
    matches!(branch_margin(config, pose), Ok(m) if m > margin)
}

/// ∂(x, y)/∂(θ1, θ2) at a pose on the working branch, row-major.
pub fn jacobian(config: &FiveBarConfig, pose: &TerminalPose) -> Result<[[f64; 2]; 2], KinematicsError> {
    let angles = inverse_kinematics(config, pose)?;
    let (e1, e2) = elbows(config, &angles);
    let u1 = (pose.x - e1.x, pose.y - e1.y);
    let u2 = (pose.x - e2.x, pose.y - e2.y);
    let l = config.l;
    let (s1, c1) = angles.theta1.sin_cos();
    let (s2, c2) = angles.theta2.sin_cos();
    let b1 = u1.0 * l * c1 - u1.1 * l * s1;
    let b2 = -u2.0 * l * c2 - u2.1 * l * s2;
    let det = u1.0 * u2.1 - u1.1 * u2.0;
    if det.abs() <= REACH_TOL * l * l {
        return Err(KinematicsError::Singular(format!("distal links aligned at ({}, {})", pose.x, pose.y)));
    }
    // dT = A⁻¹ · diag(b1, b2) · dθ with A = [u1; u2].
    Ok([[u2.1 * b1 / det, -u1.1 * b2 / det], [-u2.0 * b1 / det, u1.0 * b2 / det]])
}

/// Rectangular sampling grid, `nx` by `ny` points including the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
}

impl GridSpec {
    /// Bounding box of the reachable half-plane.
    pub fn bounding(config: &FiveBarConfig, nx: usize, ny: usize) -> Self {
        let two_l = 2.0 * config.l;
        Self { x_min: config.d - two_l, x_max: two_l, nx, y_min: 0.0, y_max: two_l, ny }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let ok = self.nx >= 1
            && self.ny >= 1
            && self.x_min.is_finite()
            && self.y_min.is_finite()
            && self.x_max >= self.x_min
            && self.y_max >= self.y_min
            && (self.nx > 1 || self.x_max == self.x_min)
            && (self.ny > 1 || self.y_max == self.y_min);
        if ok {
            Ok(())
        } else {
            Err(KinematicsError::InvalidGrid(format!("{self:?}")))
        }
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.nx)
    }

    pub fn ys(&self) -> Vec<f64> {
        Self::axis(self.y_min, self.y_max, self.ny)
    }

    /// Cell poses, row-major with y as the outer index.
    pub fn poses(&self) -> Vec<TerminalPose> {
        let xs = self.xs();
        self.ys().into_iter().flat_map(|y| xs.iter().map(move |&x| TerminalPose::new(x, y))).collect()
    }
}

/// Values over a [`GridSpec`], row-major with y as the outer index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    pub spec: GridSpec,
    pub values: Vec<T>,
}

impl<T> Grid<T> {
    pub fn get(&self, ix: usize, iy: usize) -> &T {
        &self.values[iy * self.spec.nx + ix]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.spec.nx)
    }
}

pub fn workspace_mask(config: &FiveBarConfig, spec: &GridSpec) -> Result<Grid<bool>, KinematicsError> {
    config.validate()?;
    spec.validate()?;
    let values = spec.poses().iter().map(|p| is_reachable(config, p)).collect();
    Ok(Grid { spec: *spec, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum DeviationMethod {
    Jacobian,
    MonteCarlo { trials: usize },
}

/// Branch clearance below which deviation cells are reported as singular.
pub const DEVIATION_MARGIN: f64 = 1e-3;

/// 1σ radial deviation `√E|ΔT|²` at one pose from independent angle noise.
pub fn pose_deviation(
    config: &FiveBarConfig,
    pose: &TerminalPose,
    angle_sigma_deg: f64,
    method: DeviationMethod,
    seed: u64,
    stream: u64,
) -> Result<f64, KinematicsError> {
    if !(angle_sigma_deg >= 0.0) {
        return Err(KinematicsError::InvalidConfig(format!("angle sigma {angle_sigma_deg}")));
    }
    let sigma = angle_sigma_deg.to_radians();
    match method {
        DeviationMethod::Jacobian => {
            let j = jacobian(config, pose)?;
            let frob = (j[0][0].powi(2) + j[0][1].powi(2) + j[1][0].powi(2) + j[1][1].powi(2)).sqrt();
            Ok(sigma * frob)
        }
        DeviationMethod::MonteCarlo { trials } => {
            if trials == 0 {
                return Err(KinematicsError::InvalidConfig("zero Monte Carlo trials".into()));
            }
            let angles = inverse_kinematics(config, pose)?;
            let mut rng = rng_for(seed, stream);
            let mut sum_sq = 0.0;
            for _ in 0..trials {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let perturbed = JointAngles { theta1: angles.theta1 + sigma * z1, theta2: angles.theta2 + sigma * z2 };
                let p = forward_kinematics(config, &perturbed)?;
                sum_sq += (p.x - pose.x).powi(2) + (p.y - pose.y).powi(2);
            }
            Ok((sum_sq / trials as f64).sqrt())
        }
    }
}

/// Per-cell deviation over a grid. Cells outside the working region or where
/// propagation fails are `None`. Monte Carlo cells draw from substream
/// `cell index` of `seed`.
pub fn deviation_map(
    config: &FiveBarConfig,
    angle_sigma_deg: f64,
    spec: &GridSpec,
    seed: u64,
    method: DeviationMethod,
) -> Result<Grid<Option<f64>>, KinematicsError> {
    config.validate()?;
    spec.validate()?;
    if !(angle_sigma_deg >= 0.0 && angle_sigma_deg.is_finite()) {
        return Err(KinematicsError::InvalidConfig(format!("angle sigma {angle_sigma_deg}")));
    }
    let values = spec
        .poses()
        .par_iter()
        .enumerate()
        .map(|(i, pose)| {
            if !in_working_region(config, pose, DEVIATION_MARGIN) {
                return None;
            }
            pose_deviation(config, pose, angle_sigma_deg, method, seed, i as u64).ok()
        })
        .collect();
    Ok(Grid { spec: *spec, values })
}
