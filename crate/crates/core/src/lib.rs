//! Simulation, calibration and decoding for a dyed-waveguide tactile sensor,
//! plus five-bar kinematics for driving it as a soft encoder in a digital twin.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod contact;
pub mod decoder;
pub mod design;
pub mod fivebar;
pub mod interp;
pub mod io;
pub mod sensor;
pub mod spectral;
pub mod stats;
pub mod twin;
