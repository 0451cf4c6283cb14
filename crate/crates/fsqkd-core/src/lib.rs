//! Desk-scale model of a time-bin BB84 key exchange over a turbulent
//! free-space optical link.
//!
//! The crate covers the full chain from transmitter to secret key:
//!
//! - [`protocol`] — three-state time-bin state preparation, sifting, QBER;
//! - [`channel`] — Gaussian beam propagation, link budget, turbulence
//!   statistics, and stochastic transmittance/beam-wander synthesis;
//! - [`tracking`] — four-quadrant sensor readout, PID tip/tilt control, and
//!   residual-pointing coupling efficiency;
//! - [`detection`] — receiver chain with a delay interferometer for the
//!   X basis and click statistics for single-photon detectors;
//! - [`keyrate`] — one-decoy finite-key bounds and secure-key-rate
//!   extraction;
//! - [`scenario`] / [`sim`] — end-to-end orchestration of seeded runs.
//!
//! Everything is deterministic given a scenario seed: each stochastic stage
//! draws from its own counter-derived stream (see [`rng`]), so results do
//! not depend on execution order and are reproducible across platforms.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable default features
//! and enable `libm` for builds without the standard library.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod detection;
pub mod keyrate;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod tracking;

mod error;

pub use error::{Error, Result};
