//! Cavity-assisted off-resonant Raman photon-echo quantum memory toolkit.
//!
//! The library works in units of the cavity decay rate (`gamma1 = 1`); every
//! rate, detuning and time below is dimensionless in those units. It provides
//!
//! - [`params`]: system parameters, derived rates and the two matching
//!   conditions (impedance `gamma_r = gamma1`, spectral `delta_in = gamma1/2`),
//! - [`pulses`]: spectral representation of signal modes and the Fourier
//!   conventions used throughout,
//! - [`spectral`]: closed-form storage/echo transfer functions, efficiencies
//!   and fidelity,
//! - [`dynamics`]: direct time-domain integration of the linearized
//!   light-atom equations over a discretized inhomogeneous ensemble, used as
//!   the brute-force cross-check of [`spectral`] and as the echo-waveform
//!   generator,
//! - [`rephasing`]: exact two-level algebra of the control pulse pairs and
//!   the pulse-area propagation analysis,
//! - [`cli`]: batch commands emitting CSV tables.

// validation guards use `!(x > 0.0)` deliberately so NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod params;
pub mod pulses;
pub mod rephasing;
pub mod spectral;

pub use num_complex::Complex64;
