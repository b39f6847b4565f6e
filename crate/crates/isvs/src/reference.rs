//! Reference-beam models for the interferometric arm.
//!
//! The reference is static over a camera exposure (its coherence time is far longer
//! than any exposure simulated here), so it is one complex amplitude per pixel.
//! Three spatial profiles are supported:
//!
//! * `Uniform`: identical intensity on every pixel, flat phase.
//! * `GaussianProfile`: a centered radial Gaussian beam over a square pixel
//!   grid (the pixel count must be a perfect square), flat phase.
//!   `waist_fraction = 0.5056` gives uniformity ratio R = 1.5.
//! * `Speckled`: fully developed speckle, exponential intensity marginal and
//!   uniform phase, R = 2.
//!
//! After generation the per-pixel intensities are rescaled so their mean over the
//! array equals `mean_intensity` exactly. Downstream statistics rely on this: the
//! spatial-variance estimator sees no ensemble fluctuation of the reference mean.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Per-pixel inclusion mask used by the contrast estimator.
pub type PixelMask = Vec<bool>;

/// Spatial profile of the reference beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKind {
    Uniform,
    GaussianProfile {
        /// 1/e^2 intensity waist as a fraction of the pixel span.
        waist_fraction: f64,
    },
    Speckled,
}

/// Generator parameters for one reference realization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceParams {
    pub kind: ReferenceKind,
    /// Mean intensity over the array, photons/(pixel*ms). Exact after rescaling.
    pub mean_intensity: f64,
    pub n_pixels: usize,
    /// Seed for the speckled profile; ignored by the deterministic profiles.
    pub seed: u64,
}

/// One reference realization: per-pixel intensity and phase.
#[derive(Debug, Clone)]
pub struct ReferenceField {
    kind: ReferenceKind,
    intensities: Vec<f64>,
    phases: Vec<f64>,
}

impl ReferenceField {
    /// Build a reference from explicit per-pixel intensities and phases, e.g. one
    /// reconstructed from a measured reference-only mean frame. No renormalization
    /// is applied; the values are taken as-is.
    pub fn from_parts(kind: ReferenceKind, intensities: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if intensities.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                context: "reference from_parts",
                left: intensities.len(),
                right: phases.len(),
            });
        }
        if intensities.is_empty() {
            return Err(Error::InvalidParam("reference needs at least 1 pixel".into()));
        }
        if intensities.iter().any(|i| !(*i >= 0.0)) {
            return Err(Error::InvalidParam(
                "reference intensities must be non-negative".into(),
            ));
        }
        Ok(ReferenceField {
            kind,
            intensities,
            phases,
        })
    }

    pub fn kind(&self) -> &ReferenceKind {
        &self.kind
    }

    pub fn n_pixels(&self) -> usize {
        self.intensities.len()
    }

    pub fn intensity(&self, pixel: usize) -> f64 {
        self.intensities[pixel]
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    pub fn phase(&self, pixel: usize) -> f64 {
        self.phases[pixel]
    }

    /// Complex amplitude `sqrt(I) * exp(i phi)` in the same normalized units as the
    /// dynamic field.
    pub fn amplitude(&self, pixel: usize) -> Complex64 {
        Complex64::from_polar(self.intensities[pixel].sqrt(), self.phases[pixel])
    }

    /// Mean intensity over the array. Equals the configured value exactly.
    pub fn mean_intensity(&self) -> f64 {
        let n = self.intensities.len() as f64;
        self.intensities.iter().sum::<f64>() / n
    }

    /// Uniformity ratio `R = <I^2> / <I>^2` over pixels. R = 1 for a flat
    /// reference; larger values inflate the contrast sampling error.
    pub fn uniformity_ratio(&self) -> f64 {
        uniformity_ratio(&self.intensities)
    }
}

/// `<I^2> / <I>^2` of a set of intensities.
pub fn uniformity_ratio(intensities: &[f64]) -> f64 {
    let n = intensities.len() as f64;
    let mean = intensities.iter().sum::<f64>() / n;
    let mean_sq = intensities.iter().map(|i| i * i).sum::<f64>() / n;
    mean_sq / (mean * mean)
}

/// Generate one reference realization.
pub fn gen_reference(params: &ReferenceParams) -> Result<ReferenceField> {
    if !(params.mean_intensity >= 0.0) || !params.mean_intensity.is_finite() {
        return Err(Error::InvalidParam(format!(
            "reference mean_intensity must be finite and non-negative, got {}",
            params.mean_intensity
        )));
    }
    if params.n_pixels == 0 {
        return Err(Error::InvalidParam("n_pixels must be at least 1".into()));
    }
    let n = params.n_pixels;
    let (mut intensities, phases) = match &params.kind {
        ReferenceKind::Uniform => (vec![1.0; n], vec![0.0; n]),
        ReferenceKind::GaussianProfile { waist_fraction } => {
            if !(*waist_fraction > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "waist_fraction must be positive, got {waist_fraction}"
                )));
            }
            // Radial envelope over a square pixel grid; the beam center sits at
            // the grid center and the 1/e^2 waist is a fraction of the side.
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(Error::InvalidParam(format!(
                    "gaussian_profile needs a square pixel count, got {n}"
                )));
            }
            let coord = |k: usize| (k as f64 + 0.5) / side as f64 - 0.5;
            let intensities = (0..n)
                .map(|j| {
                    let x = coord(j % side);
                    let y = coord(j / side);
                    (-2.0 * (x * x + y * y) / (waist_fraction * waist_fraction)).exp()
                })
                .collect();
            (intensities, vec![0.0; n])
        }
        ReferenceKind::Speckled => {
            let mut rng = seed::rng(seed::derive(params.seed, &[seed::TAG_REFERENCE]));
            let mut intensities = Vec::with_capacity(n);
            let mut phases = Vec::with_capacity(n);
            for _ in 0..n {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                // Circular Gaussian field with <|E|^2> = 1 before rescaling.
                let e = Complex64::new(re * 0.5f64.sqrt(), im * 0.5f64.sqrt());
                intensities.push(e.norm_sqr());
                phases.push(e.arg());
            }
            (intensities, phases)
        }
    };

    // Pin the array mean to the configured value exactly.
    let raw_mean = intensities.iter().sum::<f64>() / n as f64;
    let scale = if raw_mean > 0.0 {
        params.mean_intensity / raw_mean
    } else {
        0.0
    };
    for i in &mut intensities {
        *i *= scale;
    }

    Ok(ReferenceField {
        kind: params.kind.clone(),
        intensities,
        phases,
    })
}

/// Pixels where the reference dominates both the sample and the camera noise.
///
/// Pixel `j` is kept iff `I_R[j] >= dominance_factor * sample_mean_intensity` and
/// `I_R[j] >= camera_noise_sd`. Both thresholds are in the same intensity units
/// as the reference itself; when the noise floor is known as a count-domain read
/// SD the caller divides by `alpha * exposure_ms` first. Excluded pixels would
/// break the linearized interference readout; for typical strong references the
/// excluded fraction is well under 0.1%.
pub fn valid_pixel_mask(
    reference: &ReferenceField,
    sample_mean_intensity: f64,
    dominance_factor: f64,
    camera_noise_sd: f64,
) -> PixelMask {
    let floor = (dominance_factor * sample_mean_intensity).max(camera_noise_sd);
    reference.intensities.iter().map(|&i| i >= floor).collect()
}
