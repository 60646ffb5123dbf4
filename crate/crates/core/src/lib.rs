//! Core algorithms for camera-aided beam selection at a reconfigurable
//! intelligent surface (RIS).
//!
//! The pipeline runs from a parametric street scene to a trained
//! set-invariant network:
//!
//! * [`scene`] places UEs and blockers and answers line-of-sight and camera
//!   projection queries.
//! * [`channel`] synthesizes wideband geometric channels for the BS-RIS and
//!   RIS-UE links.
//! * [`codebook`] builds the unit-modulus reflection codebook.
//! * [`rate`] evaluates achievable rate and runs exhaustive / top-k beam
//!   training.
//! * [`detector`] stands in for an object detector on the RIS camera.
//! * [`dataset`] encodes detections and beam sets into network samples.
//! * [`setnet`] holds the set network, its baselines, backprop and training.
//! * [`metrics`] scores predicted beam sets and rate ratios.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `risbeam` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod codebook;
pub mod dataset;
pub mod detector;
mod error;
pub mod geometry;
pub mod metrics;
pub mod rate;
pub mod rng;
pub mod scene;
pub mod setnet;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
