//! Closed-form models: the variance decomposition of a calibrated interferogram,
//! squared-contrast predictions for both methods, the contrast sampling error,
//! and the four SNR formulas.
//!
//! All expressions use the long-exposure regime `T >= 10 * tau_field` and, for the
//! interferometric forms, a dominant reference `u_i = I_R / I_S >= 10`. Violating
//! either is allowed (the fall-off outside the regime is physically interesting)
//! and reported as a warning by [`TheoryParams::check_guards`], never as an error.
//!
//! Unit convention: times in microseconds, intensities in photons/(pixel*ms); the
//! factor of 1000 between them enters once, inside [`TheoryParams::nst`].

use serde::{Deserialize, Serialize};

use crate::contrast::Method;
use crate::error::{Error, Result};
use crate::MS_PER_US;

/// Parameter block for every closed-form expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryParams {
    /// Intensity (g2) decorrelation time, microseconds.
    pub tau_s_us: f64,
    /// Field (g1) decorrelation time override. Defaults to `2 * tau_s_us`
    /// (Gaussian-statistics speckle); set only to model a different relation.
    #[serde(default)]
    pub tau_field_override_us: Option<f64>,
    /// Exposure T, microseconds.
    pub exposure_us: f64,
    /// Mean sample intensity at the sensor, photons/(pixel*ms).
    pub sample_intensity: f64,
    /// Mean reference intensity at the sensor, photons/(pixel*ms).
    pub reference_intensity: f64,
    /// Counts per photon.
    pub alpha: f64,
    /// Read-noise variance, counts^2.
    pub read_noise_var: f64,
    /// Number of independent observables (included pixels).
    pub nio: usize,
    /// Reference uniformity ratio R = <I_R^2>/<I_R>^2; 1 for a flat reference.
    pub uniformity_ratio: f64,
    /// Decay-shape coefficient multiplying the decorrelation terms; 1 for an
    /// exponential field autocorrelation. Exposed as a hook, untested elsewhere.
    pub decay_shape_c: f64,
}

impl Default for TheoryParams {
    fn default() -> Self {
        TheoryParams {
            tau_s_us: 20.0,
            tau_field_override_us: None,
            exposure_us: 300.0,
            sample_intensity: 1.0,
            reference_intensity: 3000.0,
            alpha: 1.0,
            read_noise_var: 0.0,
            nio: 2000,
            uniformity_ratio: 1.0,
            decay_shape_c: 1.0,
        }
    }
}

impl TheoryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_s_us > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau_s_us must be positive, got {}",
                self.tau_s_us
            )));
        }
        if let Some(tf) = self.tau_field_override_us {
            if !(tf > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "tau_field override must be positive, got {tf}"
                )));
            }
        }
        if !(self.exposure_us > 0.0) {
            return Err(Error::InvalidParam(format!(
                "exposure_us must be positive, got {}",
                self.exposure_us
            )));
        }
        if !(self.sample_intensity > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sample_intensity must be positive, got {}",
                self.sample_intensity
            )));
        }
        if !(self.reference_intensity >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "reference_intensity must be non-negative, got {}",
                self.reference_intensity
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.read_noise_var >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "read_noise_var must be non-negative, got {}",
                self.read_noise_var
            )));
        }
        if self.nio < 2 {
            return Err(Error::InvalidParam(format!(
                "nio must be at least 2, got {}",
                self.nio
            )));
        }
        if !(self.uniformity_ratio >= 1.0) {
            return Err(Error::InvalidParam(format!(
                "uniformity_ratio must be >= 1, got {}",
                self.uniformity_ratio
            )));
        }
        if !(self.decay_shape_c > 0.0) {
            return Err(Error::InvalidParam(format!(
                "decay_shape_c must be positive, got {}",
                self.decay_shape_c
            )));
        }
        Ok(())
    }

    /// Field decorrelation time: the override, or `2 * tau_s`.
    pub fn tau_field_us(&self) -> f64 {
        self.tau_field_override_us.unwrap_or(2.0 * self.tau_s_us)
    }

    /// Mean sample photons per pixel per exposure, `alpha * I_S * T`. This is the
    /// one place the microsecond/millisecond factor is applied.
    pub fn nst(&self) -> f64 {
        self.alpha * self.sample_intensity * self.exposure_us * MS_PER_US
    }

    /// Reference-to-sample intensity ratio `u_i = I_R / I_S`.
    pub fn intensity_ratio(&self) -> f64 {
        self.reference_intensity / self.sample_intensity
    }

    /// Regime warnings for `method`. Empty when all guards hold.
    pub fn check_guards(&self, method: Method) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.exposure_us < 10.0 * self.tau_field_us() {
            warnings.push(format!(
                "exposure {} us is below 10 * tau_field = {} us; the long-exposure forms degrade",
                self.exposure_us,
                10.0 * self.tau_field_us()
            ));
        }
        if method == Method::Isvs && self.intensity_ratio() < 10.0 {
            warnings.push(format!(
                "u_i = {} is below 10; the interferometric forms assume a dominant reference",
                self.intensity_ratio()
            ));
        }
        warnings
    }
}

/// Which decorrelation time an SNR formula is written in terms of. The two forms
/// are algebraically identical when `tau_field = 2 * tau_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauForm {
    Field,
    Intensity,
}

/// The three contributions to the spatial variance of a calibrated
/// interferogram, in counts^2: `(sample, cross, shot)`.
///
/// ```text
/// sample = 2 c alpha^2 I_S^2 T tau_s      (self-interference blur)
/// cross  = 4 c alpha^2 I_R I_S T tau_field (signal: reference-boosted speckle)
/// shot   = alpha I_R T                      (reference shot noise)
/// ```
///
/// with T and tau in milliseconds. The sample/cross ratio is
/// `I_S tau_s / (2 I_R tau_field)`, vanishing when the reference dominates.
pub fn k2_numerator_terms(p: &TheoryParams) -> (f64, f64, f64) {
    let t_ms = p.exposure_us * MS_PER_US;
    let tau_s_ms = p.tau_s_us * MS_PER_US;
    let tau_f_ms = p.tau_field_us() * MS_PER_US;
    let a2 = p.alpha * p.alpha;
    let sample = 2.0 * p.decay_shape_c * a2 * p.sample_intensity * p.sample_intensity * t_ms * tau_s_ms;
    let cross = 4.0 * p.decay_shape_c * a2 * p.reference_intensity * p.sample_intensity * t_ms * tau_f_ms;
    let shot = p.alpha * p.reference_intensity * t_ms;
    (sample, cross, shot)
}

/// Interferometric squared contrast, `4 u_i tau_field / T` plus (optionally) the
/// camera noise floor `u_i / nst + read_var / nst^2`.
pub fn k2_isvs(p: &TheoryParams, include_camera_noise: bool) -> f64 {
    let u_i = p.intensity_ratio();
    let nst = p.nst();
    let mut k2 = p.decay_shape_c * 4.0 * u_i * p.tau_field_us() / p.exposure_us;
    if include_camera_noise {
        k2 += u_i / nst + p.read_noise_var / (nst * nst);
    }
    k2
}

/// Full interferometric squared contrast including the self-interference sample
/// term `2 c tau_s / T`, which the standard form drops as negligible whenever the
/// reference dominates. Equals the term decomposition divided by `nst^2` exactly.
pub fn k2_isvs_with_sample_term(p: &TheoryParams, include_camera_noise: bool) -> f64 {
    k2_isvs(p, include_camera_noise) + p.decay_shape_c * 2.0 * p.tau_s_us / p.exposure_us
}

/// Direct-method squared contrast, `2 c tau_s / T` plus (optionally) the noise
/// floor `1 / nst + read_var / nst^2`.
pub fn k2_svs(p: &TheoryParams, include_camera_noise: bool) -> f64 {
    let nst = p.nst();
    let mut k2 = p.decay_shape_c * 2.0 * p.tau_s_us / p.exposure_us;
    if include_camera_noise {
        k2 += 1.0 / nst + p.read_noise_var / (nst * nst);
    }
    k2
}

/// Sampling standard error of a squared-contrast estimate over `nio` independent
/// pixels with reference uniformity `r`: `k2 * sqrt((3r - 1) / nio)`.
/// Callers keep `nio >= 2` and `r >= 1`.
pub fn contrast_sampling_se(k2: f64, r: f64, nio: usize) -> f64 {
    k2 * ((3.0 * r - 1.0) / nio as f64).sqrt()
}

/// Interferometric decorrelation-time SNR.
///
/// ```text
/// SNR = sqrt(nio / (3r - 1)) / (1 + (T / (4 tau_field)) * noise)
/// noise = 1/nst [+ read_var / (u_i nst^2) with camera noise]
/// ```
///
/// `TauForm::Intensity` rewrites the prefactor as `T / (8 tau_s)`; the value is
/// identical when `tau_field = 2 tau_s`.
pub fn snr_isvs(p: &TheoryParams, include_camera_noise: bool, in_terms_of: TauForm) -> f64 {
    let nst = p.nst();
    let mut noise = 1.0 / nst;
    if include_camera_noise {
        noise += p.read_noise_var / (p.intensity_ratio() * nst * nst);
    }
    let prefactor = match in_terms_of {
        TauForm::Field => p.exposure_us / (4.0 * p.tau_field_us()),
        TauForm::Intensity => p.exposure_us / (8.0 * p.tau_s_us),
    };
    (p.nio as f64 / (3.0 * p.uniformity_ratio - 1.0)).sqrt() / (1.0 + prefactor * noise)
}

/// Direct-method decorrelation-time SNR.
///
/// ```text
/// SNR = sqrt(nio / 2) / (1 + (T / tau_s) * noise)
/// noise = 1/nst [+ read_var / nst^2 with camera noise]
/// ```
pub fn snr_svs(p: &TheoryParams, include_camera_noise: bool) -> f64 {
    let nst = p.nst();
    let mut noise = 1.0 / nst;
    if include_camera_noise {
        noise += p.read_noise_var / (nst * nst);
    }
    (p.nio as f64 / 2.0).sqrt() / (1.0 + p.exposure_us / p.tau_s_us * noise)
}

/// Direction for [`siegert_convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiegertDirection {
    FieldToIntensity,
    IntensityToField,
}

/// Convert between field (g1) and intensity (g2) decorrelation times for
/// Gaussian-statistics speckle: `tau_field = 2 * tau_s`.
pub fn siegert_convert(tau_us: f64, direction: SiegertDirection) -> f64 {
    match direction {
        SiegertDirection::FieldToIntensity => 0.5 * tau_us,
        SiegertDirection::IntensityToField => 2.0 * tau_us,
    }
}
