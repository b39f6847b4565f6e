//! Speckle visibility spectroscopy with and without a reference arm.
//!
//! This crate simulates and analyzes camera-based measurements of the decorrelation
//! time of dynamic speckle, the quantity that underlies diffusing-wave / diffuse
//! correlation spectroscopy of scattering media. Two acquisition schemes are covered:
//!
//! * **iSVS**, interferometric speckle visibility: the sample speckle field is mixed
//!   with a static reference field on the sensor, and the decorrelation time is read
//!   off the spatial contrast of the fringe-washed interference pattern.
//! * **SVS**, direct speckle visibility: the sample speckle alone is integrated and
//!   its blurred spatial contrast is inverted for the decorrelation time.
//!
//! # Pipeline
//!
//! ```text
//! field_dynamics ─> sensor ─┬─> contrast ─> tau estimate
//!      reference ───────────┘
//!         theory ─────────────────────────> closed-form K², SNR
//!   temporal_dcs ─────────────────────────> g₂(t) fit benchmark
//!        harness ─> Monte Carlo trials, sweeps, empirical-vs-theory SNR
//!            cli ─> `theory` / `simulate` / `estimate` / `dcs-fit`
//! ```
//!
//! # Conventions
//!
//! Times are microseconds, intensities photons/(pixel·ms); [`MS_PER_US`] is the single
//! conversion point between the two. `tau_field_us` is the decay time of the field
//! autocorrelation g₁, `tau_s_us` the decay time of the intensity autocorrelation;
//! for Gaussian-statistics speckle g₂ − 1 = |g₁|² so `tau_field = 2 · tau_s`.
//!
//! All randomness is reproducible: every stochastic operation takes or derives a seed,
//! per-pixel / per-trial streams are counter-derived (see [`seed`]), and results are
//! independent of thread count.
//!
//! # Example
//!
//! ```
//! use isvs::theory::{TheoryParams, snr_isvs, snr_svs, TauForm};
//!
//! let p = TheoryParams {
//!     tau_s_us: 20.0,
//!     exposure_us: 300.0,
//!     sample_intensity: 0.1,
//!     reference_intensity: 3000.0,
//!     read_noise_var: 8.0,
//!     nio: 2000,
//!     ..TheoryParams::default()
//! };
//! let gain = snr_isvs(&p, true, TauForm::Field) / snr_svs(&p, true);
//! assert!(gain > 1.0e3); // interferometric gain in the photon-starved regime
//! ```

pub mod cli;
pub mod config;
pub mod contrast;
pub mod error;
pub mod field_dynamics;
pub mod harness;
pub mod reference;
pub mod seed;
pub mod sensor;
pub mod stack;
pub mod temporal_dcs;
pub mod theory;

pub use error::{Error, Result};

/// Milliseconds per microsecond. Times in this crate are microseconds and intensities
/// photons/(pixel·ms); every photon-count integral converts through this constant and
/// nowhere else.
pub const MS_PER_US: f64 = 1.0e-3;
