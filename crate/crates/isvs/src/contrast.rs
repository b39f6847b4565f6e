//! The measurement pipeline: reference calibration, speckle contrast, noise
//! calibration, and inversion of contrast to decorrelation-time estimates.
//!
//! The interferometric readout is `N_j = raw_j - <reference frame>_j`: the
//! reference mean frame carries both the reference intensity and the camera
//! offset, so the subtraction leaves sample photons plus zero-mean noise.
//! Squared contrast is spatial variance over a squared mean; for the
//! interferometric method the mean is the externally known per-exposure sample
//! photon count N_ST rather than the (noisy, near-zero) frame mean.
//!
//! Inversions subtract the analytic noise floor and rescale:
//!
//! ```text
//! interferometric:  tau_field = (T / 4 u_i) * (K^2 - u_i/nst - read_var/nst^2)
//! direct:           tau_s     = (T / 2)     * (K^2 -   1/nst - read_var/nst^2)
//! ```
//!
//! Noise pushes measured K^2 below the floor in low-signal trials; the resulting
//! negative estimates are flagged, never clamped, so ensemble statistics stay
//! unbiased.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stack::{FrameStack, MeanFrame, StackKind};

/// Which acquisition geometry produced a measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Interferometric: sample interfered with a static reference.
    Isvs,
    /// Direct: sample arm alone.
    Svs,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Isvs => "isvs",
            Method::Svs => "svs",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "isvs" => Ok(Method::Isvs),
            "svs" => Ok(Method::Svs),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

/// Squared speckle contrast of one frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastResult {
    /// K^2, dimensionless.
    pub k2: f64,
    /// Spatial mean of the included pixels, counts.
    pub mean_counts: f64,
    /// Included pixel count (the effective number of independent observables).
    pub n_pixels_used: usize,
    pub method: Method,
}

/// Noise quantities measured from calibration stacks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseCalibration {
    /// Camera pedestal, counts.
    pub offset_hat: f64,
    /// Read-noise variance, counts^2.
    pub read_var_hat: f64,
    /// Mean sample photons per pixel per exposure, counts.
    pub nst_hat: f64,
    /// Additive K^2 bias measured on static configurations; subtracted before
    /// inversion. Zero when no static stacks are provided.
    pub systematic_k2_offset: f64,
}

/// A decorrelation-time estimate from one measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauEstimate {
    /// Field (g1) decorrelation time, microseconds.
    pub tau_field_us: f64,
    /// Intensity (g2) decorrelation time, microseconds. Half the field value.
    pub tau_s_us: f64,
    /// True when the measured contrast fell below the noise floor and the
    /// estimate came out negative. Reported as-is: clamping would bias the
    /// ensemble spread that the SNR analysis measures.
    pub below_floor: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Subtract the reference mean frame from every raw frame.
///
/// The mean frame must come from a reference-only stack; it contains the camera
/// offset, so the subtraction removes reference and offset in one step.
pub fn calibrate_frames(raw: &FrameStack, reference_mean: &MeanFrame) -> Result<FrameStack> {
    raw.expect_kind(StackKind::RawInterference, "calibrate_frames")?;
    if reference_mean.source_kind != StackKind::ReferenceOnly {
        return Err(Error::StackKind {
            expected: "reference_only",
            got: format!("{} (mean frame in calibrate_frames)", reference_mean.source_kind),
        });
    }
    if reference_mean.values.len() != raw.n_pixels() {
        return Err(Error::DimensionMismatch {
            context: "calibrate_frames",
            left: raw.n_pixels(),
            right: reference_mean.values.len(),
        });
    }
    let mut out = FrameStack::new(
        StackKind::Calibrated,
        raw.exposure_us(),
        raw.frame_period_us(),
        raw.n_pixels(),
    );
    let mut buf = vec![0.0; raw.n_pixels()];
    for frame in raw.frames() {
        for ((b, v), r) in buf.iter_mut().zip(frame).zip(&reference_mean.values) {
            *b = v - r;
        }
        out.push_frame(&buf)?;
    }
    Ok(out)
}

/// Squared speckle contrast of one frame: spatial variance over squared mean.
///
/// The variance is the population variance (divide by n) over included pixels.
/// `mean_override` supplies the externally known N_ST prior; with it the result
/// is tagged as the interferometric method, without it the frame's own mean is
/// used and the result is tagged as the direct method.
pub fn speckle_contrast(
    frame: &[f64],
    mask: Option<&[bool]>,
    mean_override: Option<f64>,
) -> Result<ContrastResult> {
    if let Some(m) = mask {
        if m.len() != frame.len() {
            return Err(Error::DimensionMismatch {
                context: "speckle_contrast mask",
                left: frame.len(),
                right: m.len(),
            });
        }
    }
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for (j, &v) in frame.iter().enumerate() {
        if mask.map_or(true, |m| m[j]) {
            n += 1;
            sum += v;
            sum_sq += v * v;
        }
    }
    if n < 2 {
        return Err(Error::NotEnoughSamples(format!(
            "speckle contrast needs at least 2 included pixels, got {n}"
        )));
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let (denom, method) = match mean_override {
        Some(m) => (m, Method::Isvs),
        None => (mean, Method::Svs),
    };
    if denom == 0.0 {
        return Err(Error::InvalidParam(
            "speckle contrast denominator is zero (zero mean and no override)".into(),
        ));
    }
    Ok(ContrastResult {
        k2: var / (denom * denom),
        mean_counts: mean,
        n_pixels_used: n,
        method,
    })
}

fn pooled_mean(stack: &FrameStack) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for frame in stack.frames() {
        for v in frame {
            sum += v;
            n += 1;
        }
    }
    sum / n as f64
}

fn pooled_temporal_variance(stack: &FrameStack) -> Result<f64> {
    let per_pixel = stack.temporal_variance_frame()?;
    Ok(per_pixel.iter().sum::<f64>() / per_pixel.len() as f64)
}

fn spatial_population_variance(frame: &[f64]) -> f64 {
    let n = frame.len() as f64;
    let mean = frame.iter().sum::<f64>() / n;
    frame.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Measure camera and signal priors from calibration stacks.
///
/// * `dark` (both arms blocked): pooled per-pixel temporal statistics give the
///   offset and the read-noise variance.
/// * `sample_only`: pooled mean minus the offset gives N_ST per exposure.
/// * `static_stacks`: calibrated stacks of a frozen-sample configuration. For a
///   static scene the per-pixel temporal variance is exactly the per-frame noise
///   variance, so any excess of the mean per-frame spatial variance over
///   [spatial variance of the temporal mean frame + noise variance * (1 - 1/F)]
///   is un-modeled systematic structure. That excess, divided by nst_hat^2, is
///   the additive K^2 bias to subtract from measurements.
pub fn run_noise_calibration(
    dark: &FrameStack,
    sample_only: &FrameStack,
    static_stacks: &[FrameStack],
) -> Result<NoiseCalibration> {
    dark.expect_kind(StackKind::Dark, "run_noise_calibration")?;
    sample_only.expect_kind(StackKind::SampleOnly, "run_noise_calibration")?;
    if dark.n_frames() < 2 {
        return Err(Error::NotEnoughSamples(
            "dark stack needs at least 2 frames".into(),
        ));
    }
    if sample_only.n_frames() < 2 {
        return Err(Error::NotEnoughSamples(
            "sample_only stack needs at least 2 frames".into(),
        ));
    }
    let offset_hat = pooled_mean(dark);
    let read_var_hat = pooled_temporal_variance(dark)?;
    let nst_hat = pooled_mean(sample_only) - offset_hat;

    let mut systematic_k2_offset = 0.0;
    if !static_stacks.is_empty() {
        let mut acc = 0.0;
        for stack in static_stacks {
            stack.expect_kind(StackKind::Calibrated, "run_noise_calibration static")?;
            let f = stack.n_frames();
            if f < 2 {
                return Err(Error::NotEnoughSamples(
                    "static stacks need at least 2 frames".into(),
                ));
            }
            let noise_var = pooled_temporal_variance(stack)?;
            let mean_spatial = stack
                .frames()
                .map(spatial_population_variance)
                .sum::<f64>()
                / f as f64;
            let mean_frame = stack.mean_frame()?.values;
            let residual = mean_spatial
                - spatial_population_variance(&mean_frame)
                - noise_var * (1.0 - 1.0 / f as f64);
            acc += residual / (nst_hat * nst_hat);
        }
        systematic_k2_offset = acc / static_stacks.len() as f64;
    }

    Ok(NoiseCalibration {
        offset_hat,
        read_var_hat,
        nst_hat,
        systematic_k2_offset,
    })
}

/// Invert interferometric contrast to a decorrelation time.
///
/// `u_i` is the reference-to-sample intensity ratio, `nst` the mean sample
/// photons per pixel per exposure. When `calibration` is given, its systematic
/// offset is subtracted from `k2` first.
pub fn tau_from_contrast_isvs(
    k2: f64,
    exposure_us: f64,
    u_i: f64,
    nst: f64,
    read_var: f64,
    calibration: Option<&NoiseCalibration>,
) -> Result<TauEstimate> {
    if !(exposure_us > 0.0) {
        return Err(Error::InvalidParam(format!(
            "exposure_us must be positive, got {exposure_us}"
        )));
    }
    if !(nst > 0.0) {
        return Err(Error::InvalidParam(format!("nst must be positive, got {nst}")));
    }
    if !(u_i > 0.0) {
        return Err(Error::InvalidParam(format!("u_i must be positive, got {u_i}")));
    }
    let mut warnings = Vec::new();
    if u_i < 10.0 {
        warnings.push(format!(
            "u_i = {u_i} is below 10; the interferometric K^2 model assumes a dominant reference"
        ));
    }
    let k2_corrected = k2 - calibration.map_or(0.0, |c| c.systematic_k2_offset);
    let floor = u_i / nst + read_var / (nst * nst);
    let tau_field_us = exposure_us / (4.0 * u_i) * (k2_corrected - floor);
    Ok(TauEstimate {
        tau_field_us,
        tau_s_us: 0.5 * tau_field_us,
        below_floor: tau_field_us < 0.0,
        warnings,
    })
}

/// Invert direct-method contrast to a decorrelation time.
pub fn tau_from_contrast_svs(
    k2: f64,
    exposure_us: f64,
    nst: f64,
    read_var: f64,
) -> Result<TauEstimate> {
    if !(exposure_us > 0.0) {
        return Err(Error::InvalidParam(format!(
            "exposure_us must be positive, got {exposure_us}"
        )));
    }
    if !(nst > 0.0) {
        return Err(Error::InvalidParam(format!("nst must be positive, got {nst}")));
    }
    let floor = 1.0 / nst + read_var / (nst * nst);
    let tau_s_us = 0.5 * exposure_us * (k2 - floor);
    Ok(TauEstimate {
        tau_field_us: 2.0 * tau_s_us,
        tau_s_us,
        below_floor: tau_s_us < 0.0,
        warnings: Vec::new(),
    })
}
