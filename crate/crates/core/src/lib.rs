//! Simulation core for a time-delay reservoir computer (TDRC) built around a
//! nonlinear silicon add-drop microring resonator.
//!
//! The crate models the ring with temporal coupled-mode theory: a complex
//! intracavity amplitude coupled to two slow internal variables, the excess
//! free-carrier density generated by two-photon absorption and the cavity
//! temperature offset driven by absorbed power. A fixed-step RK4 integrator
//! drives the model with a masked, bias-offset optical power waveform; the
//! drop-port power sampled once per chip forms the reservoir state matrix,
//! and a ridge-regression readout maps states to task targets.
//!
//! Everything here is deterministic and allocation-only (`no_std` +
//! `alloc`): file formats, CLI and parallel sweeps live in the companion
//! `ring-rc` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod integrator;
pub mod physics;
pub mod pipeline;
pub mod readout;
pub mod tasks;
pub mod tdrc;

pub use error::Error;
pub use physics::{DriveField, MrrParams, MrrState};
