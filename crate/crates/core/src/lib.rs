//! Simulation of the spatio-temporal entanglement of twin photons generated by
//! type I parametric down-conversion in a uniaxial crystal.
//!
//! The crate is organised bottom-up:
//!
//! * [`dispersion`]: Sellmeier indices, wavenumbers, group quantities, walk-off.
//! * [`phasematch`]: phase-mismatch functions, the phase-matching curve, the
//!   collinear tuning angle and the classical wave-packet relation between
//!   temporal delay and transverse separation.
//! * [`correlation`]: the biphoton amplitude in Fourier space and the
//!   direct-domain correlation maps (X-shaped or cigar-shaped).
//! * [`schmidt`]: Monte Carlo estimates of the Schmidt number `K = N²/B`, the
//!   bandwidth sweep, and an SVD oracle on discretised amplitudes.
//! * [`config`] and [`export`]: the run configuration file and output formats.

pub mod config;
pub mod correlation;
pub mod dispersion;
pub mod error;
pub mod export;
pub mod math;
pub mod phasematch;
pub mod rng;
pub mod schmidt;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
