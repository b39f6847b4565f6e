//! Dynamic speckle field synthesis with a known decorrelation time.
//!
//! Each pixel carries an independent complex Gaussian process E(t) updated by a
//! first-order autoregression,
//!
//! ```text
//! E(t + dt) = rho * E(t) + sqrt(1 - rho^2) * xi,   rho = exp(-dt / tau_field)
//! ```
//!
//! with `xi` a unit circular complex Gaussian. The stationary marginal is circular
//! Gaussian with `<|E|^2> = 1`, the field autocorrelation is exactly
//! `g1(t) = exp(-t / tau_field)`, and the intensity obeys the Gaussian-statistics
//! relation `g2(t) - 1 = |g1(t)|^2`, i.e. the intensity decorrelation time is
//! `tau_s = tau_field / 2`.
//!
//! The sequence is dimensionless; the physical photon rate is applied by the sensor
//! stage. `mean_intensity` is carried here only as the scale the downstream stages
//! should use.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Steepest step allowed relative to the decorrelation time. Coarser steps
/// under-resolve the exponential and bias integrated statistics.
pub const MAX_DT_FRACTION: f64 = 0.2;

/// Generator parameters for one dynamic speckle sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicsParams {
    /// Field (g1) decorrelation time, microseconds. `f64::INFINITY` freezes the field.
    pub tau_field_us: f64,
    /// Mean sample intensity at the sensor, photons/(pixel*ms). Not applied here;
    /// recorded for the sensor stage.
    pub mean_intensity: f64,
    /// Simulation step, microseconds. Must satisfy `dt <= tau_field / 5`.
    pub dt_us: f64,
    /// Steps per pixel in the generated sequence.
    pub n_steps: usize,
    /// Number of statistically independent pixels.
    pub n_pixels: usize,
    /// Seed for the per-pixel derived streams.
    pub seed: u64,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_field_us > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau_field_us must be positive, got {}",
                self.tau_field_us
            )));
        }
        if !(self.dt_us > 0.0) || !self.dt_us.is_finite() {
            return Err(Error::InvalidParam(format!(
                "dt_us must be positive and finite, got {}",
                self.dt_us
            )));
        }
        if self.dt_us > MAX_DT_FRACTION * self.tau_field_us {
            return Err(Error::InvalidParam(format!(
                "dt_us = {} exceeds tau_field_us / 5 = {}; the field would be under-sampled",
                self.dt_us,
                MAX_DT_FRACTION * self.tau_field_us
            )));
        }
        if !(self.mean_intensity >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "mean_intensity must be non-negative, got {}",
                self.mean_intensity
            )));
        }
        if self.n_steps == 0 || self.n_pixels == 0 {
            return Err(Error::InvalidParam(
                "n_steps and n_pixels must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Intensity (g2) decorrelation time implied by Gaussian statistics.
    pub fn tau_s_us(&self) -> f64 {
        0.5 * self.tau_field_us
    }

    /// One-step field correlation `exp(-dt / tau_field)`.
    pub fn rho(&self) -> f64 {
        (-self.dt_us / self.tau_field_us).exp()
    }
}

/// A generated multi-pixel complex field sequence, pixel-major storage.
#[derive(Debug, Clone)]
pub struct DynamicSpeckleSequence {
    params: DynamicsParams,
    amplitudes: Vec<Complex64>,
}

impl DynamicSpeckleSequence {
    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    pub fn n_pixels(&self) -> usize {
        self.params.n_pixels
    }

    pub fn n_steps(&self) -> usize {
        self.params.n_steps
    }

    /// All steps of one pixel, contiguous.
    pub fn pixel_series(&self, pixel: usize) -> &[Complex64] {
        let n = self.params.n_steps;
        &self.amplitudes[pixel * n..(pixel + 1) * n]
    }

    pub fn amplitude(&self, pixel: usize, step: usize) -> Complex64 {
        self.amplitudes[pixel * self.params.n_steps + step]
    }

    /// Normalized instantaneous intensity `|E|^2` (unit mean).
    pub fn intensity(&self, pixel: usize, step: usize) -> f64 {
        self.amplitude(pixel, step).norm_sqr()
    }
}

/// Generate a dynamic speckle sequence.
///
/// Pixels are independent: pixel `j` draws from the stream derived from
/// `(params.seed, j)`, so the result is reproducible and identical for any worker
/// count or pixel evaluation order. The process starts in its stationary state; no
/// burn-in is needed.
pub fn gen_dynamic_field(params: &DynamicsParams) -> Result<DynamicSpeckleSequence> {
    params.validate()?;
    let n_steps = params.n_steps;
    let rho = params.rho();
    // xi has <|xi|^2> = 1, so Re/Im each carry variance 1/2.
    let stat_sd = 0.5f64.sqrt();
    let innov_sd = (0.5 * (1.0 - rho * rho)).sqrt();

    let mut amplitudes = vec![Complex64::ZERO; params.n_pixels * n_steps];
    for (pixel, chunk) in amplitudes.chunks_mut(n_steps).enumerate() {
        let mut rng = seed::rng(seed::derive(params.seed, &[pixel as u64]));
        let mut e = Complex64::new(
            stat_sd * rng.sample::<f64, _>(StandardNormal),
            stat_sd * rng.sample::<f64, _>(StandardNormal),
        );
        chunk[0] = e;
        for slot in chunk.iter_mut().skip(1) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            e = rho * e + Complex64::new(innov_sd * re, innov_sd * im);
            *slot = e;
        }
    }
    Ok(DynamicSpeckleSequence {
        params: params.clone(),
        amplitudes,
    })
}

/// Model field autocorrelation `exp(-t / tau)` for lag `t >= 0`.
pub fn model_autocorrelation(tau_us: f64, t_us: f64) -> f64 {
    (-t_us / tau_us).exp()
}
