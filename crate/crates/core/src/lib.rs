//! Simulation and analysis of nanomechanical displacement detection with a
//! superconducting microwave cavity interferometer.
//!
//! The crate follows the measurement chain end to end:
//!
//! * [`model`]: cavity, mechanical mode and coupling parameters.
//! * [`cavity`]: linear notch-cavity transmission and quadrature responsivity.
//! * [`mechanics`]: thermal spectra, electrostatic drive and a Langevin simulator.
//! * [`readout`]: detected quadrature-voltage spectra and their inversion to
//!   cavity-frequency noise.
//! * [`spectral`]: Welch estimation, Lorentzian fitting, the temperature-sweep
//!   calibration and the experimental noise budget.
//! * [`projection`]: shot-noise, backaction and amplifier-limited projections
//!   for an ideal single-port cavity.
//! * [`config`], [`runner`], [`export`]: scenario files, batch workflows and
//!   CSV output used by the `cavimeter` binary.

// `!(x > 0.0)` checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod config;
pub mod error;
pub mod export;
pub mod mechanics;
pub mod model;
pub mod projection;
pub mod readout;
pub mod runner;
pub mod spectral;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use model::{
    cavity_linewidth, coupling_from_geometry, spring_constant, total_quality_factor, CavityParams, CouplingModel,
    InternalQ, MechanicalMode, PhysicalConstants, HBAR, K_B,
};
pub use spectrum::{SpectrumSeries, SpectrumUnits};
