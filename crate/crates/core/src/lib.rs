//! Hamiltonian identification for a single qubit driven by independent
//! linear control fields, using only repeated `σz` readout.
//!
//! The crate is organised along the measurement protocol:
//!
//! - [`bloch`]: rotation-axis kinematics on the Bloch sphere.
//! - [`measurement`]: synthetic initialise/evolve/measure records.
//! - [`spectral`]: rotation frequency and declination from pole-initialised
//!   records (Fourier, cosine-fit and minimum-parabola routes).
//! - [`phi`]: azimuth of each axis from an equatorial preparation.
//! - [`refine`]: joint likelihood polish of one axis over all its records.
//! - [`identification`]: straight-line regression of axis components
//!   against control amplitude.
//! - [`pipeline`], [`config`] and [`report`]: end-to-end orchestration used
//!   by the `qubit-hamid` binary.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod config;
pub mod error;
pub mod fit;
pub mod identification;
pub mod measurement;
pub mod phi;
pub mod pipeline;
pub mod refine;
pub mod report;
pub mod spectral;

pub use bloch::{AxisSpherical, HamiltonianModel, Vector3};
pub use error::{Error, Result};
