//! Camera acquisition: interference, exposure integration, shot and read noise.
//!
//! The detected intensity on pixel `j` is
//!
//! ```text
//! I_j(t) = I_S|E_j(t)|^2 + I_Rj + 2 sqrt(I_S I_Rj) |E_j| cos(phi_R - phi_S)
//! ```
//!
//! i.e. `|sqrt(I_S) E_j(t) + E_Rj|^2`. An exposure integrates this over `T`:
//! expected counts are `mu_j = alpha * sum_k I_j(t_k) * dt` (dt in ms so counts
//! come out in photoelectrons for intensities in photons/(pixel*ms)). Shot noise
//! is applied once per exposure as `Poisson(mu_j)`, which is exact because sums of
//! Poisson variables are Poisson. Read noise is additive Gaussian with an offset
//! pedestal, independent of the signal.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_dynamics::DynamicSpeckleSequence;
use crate::reference::ReferenceField;
use crate::seed;
use crate::stack::{FrameStack, StackKind};
use crate::MS_PER_US;

fn default_true() -> bool {
    true
}

/// Camera and exposure parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorModel {
    /// Counts per photon (quantum efficiency times conversion gain).
    pub alpha: f64,
    /// Exposure time T, microseconds.
    pub exposure_us: f64,
    /// Read-noise variance, counts^2.
    pub read_noise_var: f64,
    /// Constant pedestal added to every readout, counts.
    #[serde(default)]
    pub offset: f64,
    /// Round counts to integers after noise. Off by default: the analytic model
    /// is continuous-valued.
    #[serde(default)]
    pub quantize: bool,
    /// Test hooks for variance-decomposition checks.
    #[serde(default = "default_true")]
    pub enable_shot_noise: bool,
    #[serde(default = "default_true")]
    pub enable_read_noise: bool,
}

impl SensorModel {
    pub fn new(alpha: f64, exposure_us: f64, read_noise_var: f64, offset: f64) -> Self {
        SensorModel {
            alpha,
            exposure_us,
            read_noise_var,
            offset,
            quantize: false,
            enable_shot_noise: true,
            enable_read_noise: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.exposure_us > 0.0) || !self.exposure_us.is_finite() {
            return Err(Error::InvalidParam(format!(
                "exposure_us must be positive and finite, got {}",
                self.exposure_us
            )));
        }
        if !(self.read_noise_var >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "read_noise_var must be non-negative, got {}",
                self.read_noise_var
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be non-negative, got {}",
                self.alpha
            )));
        }
        if !(self.offset >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "offset must be non-negative, got {}",
                self.offset
            )));
        }
        Ok(())
    }

    /// Steps per exposure on a grid of step `dt_us`. Near-integer ratios snap to
    /// the integer so that T = n*dt does not pick up a spurious extra step from
    /// floating-point round-off.
    pub fn exposure_steps(&self, dt_us: f64) -> usize {
        let ratio = self.exposure_us / dt_us;
        let snapped = ratio.round();
        if (ratio - snapped).abs() < 1e-9 * snapped.max(1.0) {
            snapped as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// Instantaneous interference intensity per pixel, photons/(pixel*ms).
///
/// `sample_field` is the normalized dynamic field (`<|E|^2> = 1`); `sample_scale`
/// is the mean sample intensity. No noise here; noise enters at integration.
pub fn interfere(
    sample_field: &[Complex64],
    sample_scale: f64,
    reference: &ReferenceField,
) -> Result<Vec<f64>> {
    if sample_field.len() != reference.n_pixels() {
        return Err(Error::DimensionMismatch {
            context: "interfere",
            left: sample_field.len(),
            right: reference.n_pixels(),
        });
    }
    if !(sample_scale >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "sample_scale must be non-negative, got {sample_scale}"
        )));
    }
    let root_s = sample_scale.sqrt();
    Ok(sample_field
        .iter()
        .enumerate()
        .map(|(j, e)| (root_s * e + reference.amplitude(j)).norm_sqr())
        .collect())
}

/// Expected counts for one exposure window, before any noise.
fn expected_counts(
    seq: &DynamicSpeckleSequence,
    sample_scale: f64,
    reference: Option<&ReferenceField>,
    sensor: &SensorModel,
    start_step: usize,
) -> Result<Vec<f64>> {
    let n_pixels = seq.n_pixels();
    if let Some(r) = reference {
        if r.n_pixels() != n_pixels {
            return Err(Error::DimensionMismatch {
                context: "integrate_exposure reference",
                left: n_pixels,
                right: r.n_pixels(),
            });
        }
    }
    let dt_us = seq.params().dt_us;
    let n_exp = sensor.exposure_steps(dt_us);
    let dt_ms = dt_us * MS_PER_US;
    let gain = sensor.alpha * dt_ms;

    // A switched-off sample arm leaves only the static reference (or nothing), so
    // the integral is analytic and the sequence window is not consumed.
    if sample_scale == 0.0 {
        let mu = match reference {
            Some(r) => (0..n_pixels)
                .map(|j| gain * r.intensity(j) * n_exp as f64)
                .collect(),
            None => vec![0.0; n_pixels],
        };
        return Ok(mu);
    }

    if start_step + n_exp > seq.n_steps() {
        return Err(Error::SpanOverflow {
            needed: start_step + n_exp,
            available: seq.n_steps(),
        });
    }
    let root_s = sample_scale.sqrt();
    let mut mu = Vec::with_capacity(n_pixels);
    for j in 0..n_pixels {
        let window = &seq.pixel_series(j)[start_step..start_step + n_exp];
        let sum = match reference {
            Some(r) => {
                let e_r = r.amplitude(j);
                window.iter().map(|e| (root_s * e + e_r).norm_sqr()).sum::<f64>()
            }
            None => window.iter().map(|e| sample_scale * e.norm_sqr()).sum::<f64>(),
        };
        mu.push(gain * sum);
    }
    Ok(mu)
}

/// Integrate one exposure window and read it out with noise.
///
/// `reference = None` is the direct (reference-free) acquisition. Randomness
/// comes from `rng` only; callers derive it per frame.
pub fn integrate_exposure(
    seq: &DynamicSpeckleSequence,
    sample_scale: f64,
    reference: Option<&ReferenceField>,
    sensor: &SensorModel,
    start_step: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    sensor.validate()?;
    let mu = expected_counts(seq, sample_scale, reference, sensor, start_step)?;
    Ok(read_out(&mu, sensor, rng))
}

/// Apply shot noise, offset, and read noise to expected counts.
fn read_out(mu: &[f64], sensor: &SensorModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let read_sd = sensor.read_noise_var.sqrt();
    let normal = Normal::new(0.0, read_sd).expect("validated read noise");
    mu.iter()
        .map(|&m| {
            let mut c = if sensor.enable_shot_noise {
                if m > 0.0 {
                    rng.sample(Poisson::new(m).expect("positive mean"))
                } else {
                    0.0
                }
            } else {
                m
            };
            c += sensor.offset;
            if sensor.enable_read_noise && read_sd > 0.0 {
                c += rng.sample(normal);
            }
            if sensor.quantize {
                c = c.round();
            }
            c
        })
        .collect()
}

/// Minimum frame spacing, in units of tau_field, for per-frame field
/// regeneration. Above this the frames are decorrelated to better than e^-20
/// and independent fresh fields are statistically indistinguishable.
pub const REGEN_PERIOD_FACTOR: f64 = 20.0;

fn stack_kind(sample_scale: f64, reference: Option<&ReferenceField>) -> StackKind {
    match (sample_scale > 0.0, reference.is_some()) {
        (true, true) => StackKind::RawInterference,
        (false, true) => StackKind::ReferenceOnly,
        (true, false) => StackKind::SampleOnly,
        (false, false) => StackKind::Dark,
    }
}

/// Acquire a stack of `n_frames` frames separated by `frame_period_us`.
///
/// When `frame_period_us >= 20 * tau_field`, each frame after the first uses a
/// freshly generated field with a seed derived from (sequence seed, frame index):
/// at that spacing real frames would be decorrelated anyway, and regeneration
/// avoids storing the inter-frame gaps. Below the threshold, frames are read out
/// of `seq` at their true offsets and the whole span must fit (`SpanOverflow`
/// otherwise). Frame 0 always reads `seq` at step 0, so a one-frame stack equals
/// a single `integrate_exposure` call.
pub fn acquire_stack(
    seq: &DynamicSpeckleSequence,
    sample_scale: f64,
    reference: Option<&ReferenceField>,
    sensor: &SensorModel,
    n_frames: usize,
    frame_period_us: f64,
    noise_seed: u64,
) -> Result<FrameStack> {
    acquire_stack_as(
        stack_kind(sample_scale, reference),
        seq,
        sample_scale,
        reference,
        sensor,
        n_frames,
        frame_period_us,
        noise_seed,
    )
}

#[allow(clippy::too_many_arguments)]
fn acquire_stack_as(
    kind: StackKind,
    seq: &DynamicSpeckleSequence,
    sample_scale: f64,
    reference: Option<&ReferenceField>,
    sensor: &SensorModel,
    n_frames: usize,
    frame_period_us: f64,
    noise_seed: u64,
) -> Result<FrameStack> {
    sensor.validate()?;
    if n_frames == 0 {
        return Err(Error::InvalidParam("n_frames must be at least 1".into()));
    }
    if frame_period_us < sensor.exposure_us {
        return Err(Error::InvalidParam(format!(
            "frame_period_us = {} is shorter than the exposure {}",
            frame_period_us, sensor.exposure_us
        )));
    }
    let params = seq.params();
    let dynamic_sample = sample_scale > 0.0;
    let regenerate =
        dynamic_sample && frame_period_us >= REGEN_PERIOD_FACTOR * params.tau_field_us;

    let mut stack = FrameStack::new(kind, sensor.exposure_us, frame_period_us, seq.n_pixels());
    for f in 0..n_frames {
        let mut rng = seed::rng(seed::derive(noise_seed, &[seed::TAG_NOISE, f as u64]));
        let frame = if !dynamic_sample || f == 0 {
            integrate_exposure(seq, sample_scale, reference, sensor, 0, &mut rng)?
        } else if regenerate {
            let mut p = params.clone();
            p.seed = seed::derive(params.seed, &[seed::TAG_FRAME, f as u64]);
            p.n_steps = sensor.exposure_steps(p.dt_us);
            let fresh = crate::field_dynamics::gen_dynamic_field(&p)?;
            integrate_exposure(&fresh, sample_scale, reference, sensor, 0, &mut rng)?
        } else {
            let start = (f as f64 * frame_period_us / params.dt_us).round() as usize;
            integrate_exposure(seq, sample_scale, reference, sensor, start, &mut rng)?
        };
        stack.push_frame(&frame)?;
    }
    Ok(stack)
}

/// Acquire a calibration stack with the arm(s) zeroed per `mode`.
///
/// `mode` must be one of `Dark`, `ReferenceOnly`, `SampleOnly`. The other
/// parameters match `acquire_stack`; the irrelevant arm settings are ignored.
#[allow(clippy::too_many_arguments)]
pub fn acquire_calibration(
    mode: StackKind,
    seq: &DynamicSpeckleSequence,
    sample_scale: f64,
    reference: Option<&ReferenceField>,
    sensor: &SensorModel,
    n_frames: usize,
    frame_period_us: f64,
    noise_seed: u64,
) -> Result<FrameStack> {
    let (scale, r) = match mode {
        StackKind::Dark => (0.0, None),
        StackKind::ReferenceOnly => {
            if reference.is_none() {
                return Err(Error::InvalidParam(
                    "reference_only calibration needs a reference field".into(),
                ));
            }
            (0.0, reference)
        }
        StackKind::SampleOnly => (sample_scale, None),
        other => {
            return Err(Error::InvalidParam(format!(
                "acquire_calibration mode must be dark, reference_only, or sample_only, got {other}"
            )));
        }
    };
    acquire_stack_as(mode, seq, scale, r, sensor, n_frames, frame_period_us, noise_seed)
}
