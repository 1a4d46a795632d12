//! Contactless sleep-apnea detection from FMCW MIMO radar.
//!
//! The crate covers the whole chain from a synthetic radar scene to an
//! apnea-hypopnea index:
//!
//! - [`scene_sim`] plants breathing scatterers, clutter, noise and a timed
//!   apnea/hypopnea schedule into a post-range-FFT [`signal_model::DataCube`].
//! - [`imaging`] beamforms the virtual array, removes static clutter and
//!   finds scattering centers in per-epoch power images.
//! - [`displacement`] turns the complex echo at a scattering center into a
//!   band-passed displacement and its sliding RMS envelope.
//! - [`em_gmm`] fits a two-component Gaussian mixture to envelope samples.
//! - [`detection`] labels, fuses and scores events, and also provides the
//!   amplitude-baseline detector used for comparison.
//! - [`evaluation`] computes AHI, 30-minute windowed counts and RMS errors.
//!
//! [`pipeline`] wires these stages together; the `apnea` binary and the
//! programs under `examples/` are thin front ends over it.

pub mod cli;
pub mod config;
pub mod detection;
pub mod displacement;
pub mod em_gmm;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod io;
pub mod pipeline;
pub mod rng;
pub mod scene_sim;
pub mod signal_model;

pub use error::{Error, Result};
