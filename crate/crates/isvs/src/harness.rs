//! Monte Carlo orchestration: repeated simulated acquisitions, empirical SNR,
//! and parameter-grid sweeps producing the tables behind the SNR figures.
//!
//! A trial is one complete measurement: generate fresh dynamics (and, for the
//! interferometric method, a fresh reference realization), acquire a stack,
//! compute per-frame squared contrast, average it, and invert to a
//! decorrelation-time estimate. The empirical SNR of a configuration is
//! `tau_true / SD(tau_hat)` over trials: measurement-to-measurement spread, the
//! same quantity the closed forms predict for a single measurement.
//!
//! Both methods normalize contrast by the known per-exposure sample photon
//! count (the N_ST prior): it is experimentally measurable to high accuracy by
//! frame averaging, and the closed forms assume it. The prior pathway also makes
//! the direct method immune to the camera offset, since a constant shift drops
//! out of the spatial variance.
//!
//! All randomness derives from `(master_seed, trial_index)`; trials and cells
//! are reduced in index order, so results are identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrast::{
    calibrate_frames, speckle_contrast, tau_from_contrast_isvs, tau_from_contrast_svs, Method,
    TauEstimate,
};
use crate::error::{Error, Result};
use crate::field_dynamics::{gen_dynamic_field, DynamicsParams};
use crate::reference::{gen_reference, valid_pixel_mask, ReferenceKind, ReferenceParams};
use crate::sensor::{acquire_stack, SensorModel, REGEN_PERIOD_FACTOR};
use crate::stack::{MeanFrame, StackKind};
use crate::theory::{self, TauForm, TheoryParams};
use crate::{seed, MS_PER_US};

/// Reference pixels must carry at least this multiple of the mean sample
/// intensity to stay in the included-pixel set. Sweeps deliberately cross into
/// the weak-reference regime (where the u_i guard already warns), so the
/// harness only drops pixels where the reference falls below the sample
/// intensity itself or below the camera noise; the stricter factor 10 belongs
/// to single-measurement estimation where cross-term dominance is assumed.
pub const MASK_DOMINANCE_FACTOR: f64 = 1.0;

/// One Monte Carlo configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    /// Dynamics template. `seed` and `n_steps` are overridden per trial; the
    /// step `dt_us` and `n_pixels` are used as given.
    pub dynamics: DynamicsParams,
    /// Reference specification; required for the interferometric method,
    /// ignored by the direct method. `seed` is overridden per trial.
    pub reference: Option<ReferenceParams>,
    pub sensor: SensorModel,
    pub method: Method,
    /// Frames per trial. Per-frame contrasts are averaged before inversion, so
    /// multi-frame trials shrink the estimate spread by about sqrt(n_frames).
    pub n_frames: usize,
    pub frame_period_us: f64,
    pub n_trials: usize,
    pub master_seed: u64,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        if !self.dynamics.tau_field_us.is_finite() {
            return Err(Error::InvalidParam(
                "trials need a finite tau_field".into(),
            ));
        }
        // Validate the dynamics template with a throwaway step count.
        let mut d = self.dynamics.clone();
        d.n_steps = 1;
        d.validate()?;
        if self.method == Method::Isvs && self.reference.is_none() {
            return Err(Error::InvalidParam(
                "the interferometric method needs a reference specification".into(),
            ));
        }
        if let Some(r) = &self.reference {
            if r.n_pixels != self.dynamics.n_pixels {
                return Err(Error::DimensionMismatch {
                    context: "trial reference pixels",
                    left: self.dynamics.n_pixels,
                    right: r.n_pixels,
                });
            }
        }
        if self.n_frames == 0 {
            return Err(Error::InvalidParam("n_frames must be at least 1".into()));
        }
        if self.frame_period_us < self.sensor.exposure_us {
            return Err(Error::InvalidParam(format!(
                "frame_period_us = {} is shorter than the exposure {}",
                self.frame_period_us, self.sensor.exposure_us
            )));
        }
        Ok(())
    }

    /// Exact priors implied by the configuration: per-exposure sample photons,
    /// reference-to-sample ratio, and the sensor read variance.
    pub fn exact_priors(&self) -> (f64, f64, f64) {
        let nst = self.sensor.alpha
            * self.dynamics.mean_intensity
            * self.sensor.exposure_us
            * MS_PER_US;
        let u_i = match &self.reference {
            Some(r) => r.mean_intensity / self.dynamics.mean_intensity,
            None => 0.0,
        };
        (nst, u_i, self.sensor.read_noise_var)
    }

    /// Closed-form parameter block matching this configuration.
    pub fn theory_params(&self, uniformity_ratio: f64) -> TheoryParams {
        TheoryParams {
            tau_s_us: 0.5 * self.dynamics.tau_field_us,
            tau_field_override_us: None,
            exposure_us: self.sensor.exposure_us,
            sample_intensity: self.dynamics.mean_intensity,
            reference_intensity: self.reference.as_ref().map_or(0.0, |r| r.mean_intensity),
            alpha: self.sensor.alpha,
            read_noise_var: self.sensor.read_noise_var,
            nio: self.dynamics.n_pixels,
            uniformity_ratio,
            decay_shape_c: 1.0,
        }
    }

    /// Regime warnings: exposure, reference dominance, and frame spacing.
    pub fn check_guards(&self) -> Vec<String> {
        let mut warnings = self.theory_params(1.0).check_guards(self.method);
        if self.n_frames > 1
            && self.frame_period_us < REGEN_PERIOD_FACTOR * self.dynamics.tau_field_us
        {
            warnings.push(format!(
                "frame_period {} us is below 20 * tau_field = {} us; frames are correlated and \
                 the independent-frame error model degrades",
                self.frame_period_us,
                REGEN_PERIOD_FACTOR * self.dynamics.tau_field_us
            ));
        }
        warnings
    }

    fn steps_for_trial(&self) -> usize {
        let n_exp = self.sensor.exposure_steps(self.dynamics.dt_us);
        let regen =
            self.frame_period_us >= REGEN_PERIOD_FACTOR * self.dynamics.tau_field_us;
        if self.n_frames == 1 || regen {
            n_exp
        } else {
            let last_start = ((self.n_frames - 1) as f64 * self.frame_period_us
                / self.dynamics.dt_us)
                .round() as usize;
            last_start + n_exp
        }
    }

    /// Work estimate in pixel-steps for the whole configuration.
    pub fn pixel_steps(&self) -> f64 {
        let n_exp = self.sensor.exposure_steps(self.dynamics.dt_us) as f64;
        self.n_trials as f64 * self.n_frames as f64 * n_exp * self.dynamics.n_pixels as f64
    }
}

/// Run one trial and return the estimate together with the trial's mean
/// squared contrast (used by theory-agreement checks).
pub fn run_trial_detailed(cfg: &TrialConfig, trial_index: usize) -> Result<(TauEstimate, f64)> {
    let trial_seed = seed::derive(cfg.master_seed, &[seed::TAG_TRIAL, trial_index as u64]);

    let mut dynamics = cfg.dynamics.clone();
    dynamics.seed = seed::derive(trial_seed, &[seed::TAG_FIELD]);
    dynamics.n_steps = cfg.steps_for_trial();
    let seq = gen_dynamic_field(&dynamics)?;

    let reference = match (&cfg.method, &cfg.reference) {
        (Method::Isvs, Some(spec)) => {
            let mut spec = spec.clone();
            // Fresh realization per trial; deterministic profiles are unaffected.
            spec.seed = seed::derive(trial_seed, &[seed::TAG_REFERENCE]);
            Some(gen_reference(&spec)?)
        }
        (Method::Isvs, None) => {
            return Err(Error::InvalidParam(
                "the interferometric method needs a reference specification".into(),
            ));
        }
        (Method::Svs, _) => None,
    };

    let noise_seed = seed::derive(trial_seed, &[seed::TAG_NOISE]);
    let raw = acquire_stack(
        &seq,
        cfg.dynamics.mean_intensity,
        reference.as_ref(),
        &cfg.sensor,
        cfg.n_frames,
        cfg.frame_period_us,
        noise_seed,
    )?;

    let (nst, u_i, read_var) = cfg.exact_priors();
    let k2_mean = match &reference {
        Some(r) => {
            // Reference calibration with the exact expectation frame: the prior
            // pathway, equivalent to averaging arbitrarily many reference frames.
            let n_exp = cfg.sensor.exposure_steps(cfg.dynamics.dt_us);
            let per_count = cfg.sensor.alpha * n_exp as f64 * cfg.dynamics.dt_us * MS_PER_US;
            let ref_mean = MeanFrame {
                values: (0..r.n_pixels())
                    .map(|j| per_count * r.intensity(j) + cfg.sensor.offset)
                    .collect(),
                source_kind: StackKind::ReferenceOnly,
            };
            let calibrated = calibrate_frames(&raw, &ref_mean)?;
            // Noise threshold converted from counts to intensity units so it
            // compares against per-pixel reference intensity.
            let noise_intensity = cfg.sensor.read_noise_var.sqrt()
                / (cfg.sensor.alpha * cfg.sensor.exposure_us * MS_PER_US);
            let mask = valid_pixel_mask(
                r,
                cfg.dynamics.mean_intensity,
                MASK_DOMINANCE_FACTOR,
                noise_intensity,
            );
            let mut acc = 0.0;
            for frame in calibrated.frames() {
                acc += speckle_contrast(frame, Some(&mask), Some(nst))?.k2;
            }
            acc / cfg.n_frames as f64
        }
        None => {
            // Direct method: raw sample-only frames. The constant offset drops out
            // of the spatial variance and the prior fixes the denominator.
            let mut acc = 0.0;
            for frame in raw.frames() {
                acc += speckle_contrast(frame, None, Some(nst))?.k2;
            }
            acc / cfg.n_frames as f64
        }
    };

    let estimate = match cfg.method {
        Method::Isvs => {
            tau_from_contrast_isvs(k2_mean, cfg.sensor.exposure_us, u_i, nst, read_var, None)?
        }
        Method::Svs => tau_from_contrast_svs(k2_mean, cfg.sensor.exposure_us, nst, read_var)?,
    };
    Ok((estimate, k2_mean))
}

/// Run one trial of the full pipeline.
pub fn run_trial(cfg: &TrialConfig, trial_index: usize) -> Result<TauEstimate> {
    run_trial_detailed(cfg, trial_index).map(|(est, _)| est)
}

/// All trials of one configuration.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub estimates: Vec<TauEstimate>,
    pub k2_means: Vec<f64>,
}

/// Run every trial of a configuration, in parallel, reduced in trial order.
pub fn run_cell(cfg: &TrialConfig) -> Result<CellResult> {
    cfg.validate()?;
    if cfg.n_trials < 2 {
        return Err(Error::NotEnoughSamples(format!(
            "need at least 2 trials for spread statistics, got {}",
            cfg.n_trials
        )));
    }
    let pairs: Vec<(TauEstimate, f64)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial_detailed(cfg, t))
        .collect::<Result<_>>()?;
    let (estimates, k2_means) = pairs.into_iter().unzip();
    Ok(CellResult {
        estimates,
        k2_means,
    })
}

/// Empirical SNR of a set of estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EmpiricalSnr {
    pub snr: f64,
    /// All estimates were identical; the SNR is reported as infinite.
    pub zero_sd: bool,
}

/// `tau_true / SD(estimates)` with the sample (n-1) standard deviation: the
/// measurement-to-measurement spread, not the standard error of the mean.
pub fn empirical_snr(estimates: &[f64], tau_true_us: f64) -> Result<EmpiricalSnr> {
    if estimates.len() < 2 {
        return Err(Error::NotEnoughSamples(format!(
            "empirical SNR needs at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(EmpiricalSnr {
            snr: f64::INFINITY,
            zero_sd: true,
        });
    }
    Ok(EmpiricalSnr {
        snr: tau_true_us / var.sqrt(),
        zero_sd: false,
    })
}

/// Grid specification for [`sweep`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub tau_s_us: Vec<f64>,
    pub sample_intensity: Vec<f64>,
    pub methods: Vec<Method>,
    /// Reference profiles to sweep for interferometric cells. The direct method
    /// has no reference, so its cells appear once regardless of this list.
    pub reference_kinds: Vec<ReferenceKind>,
    /// Work cap in pixel-steps. Cells beyond the cap are dropped and the table
    /// is marked truncated.
    pub budget_pixel_steps: f64,
}

impl SweepGrid {
    pub const DEFAULT_BUDGET: f64 = 1.0e10;
}

/// One grid cell's worth of results.
#[derive(Debug, Clone, Serialize)]
pub struct SnrPoint {
    pub method: Method,
    pub tau_s_us: f64,
    pub tau_field_us: f64,
    pub sample_intensity: f64,
    pub reference_intensity: f64,
    pub exposure_us: f64,
    pub nst: f64,
    pub u_i: f64,
    pub uniformity_ratio: f64,
    pub nio: usize,
    pub n_trials: usize,
    pub k2_theory: f64,
    pub snr_theory: f64,
    /// Mean estimated tau_s over trials; NaN when no trials ran.
    pub tau_hat_mean_us: f64,
    /// Sample SD of estimated tau_s over trials; NaN when no trials ran.
    pub tau_hat_sd_us: f64,
    pub snr_empirical: f64,
    /// Mean measured squared contrast over trials; NaN when no trials ran.
    pub k2_empirical: f64,
    /// Sample SD of measured squared contrast over trials; NaN when no trials ran.
    pub k2_sd: f64,
    pub n_below_floor: usize,
    pub reference_kind: Option<ReferenceKind>,
}

/// A finished (or truncated) sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub points: Vec<SnrPoint>,
    /// True when the work budget cut the sweep short; `points` then holds the
    /// completed prefix of the sorted grid.
    pub truncated: bool,
    pub warnings: Vec<String>,
}

fn kind_sort_label(kind: &Option<ReferenceKind>) -> String {
    match kind {
        None => String::new(),
        Some(ReferenceKind::Uniform) => "uniform".into(),
        Some(ReferenceKind::GaussianProfile { waist_fraction }) => {
            format!("gaussian_profile:{waist_fraction}")
        }
        Some(ReferenceKind::Speckled) => "speckled".into(),
    }
}

/// Design uniformity ratio of a reference specification: exact for the
/// deterministic profiles (the Gaussian envelope is evaluated on a fixed fine
/// grid, where R depends only on the waist), the ensemble value 2 for speckled.
pub fn design_uniformity_ratio(kind: &ReferenceKind) -> f64 {
    match kind {
        ReferenceKind::Uniform => 1.0,
        ReferenceKind::Speckled => 2.0,
        ReferenceKind::GaussianProfile { .. } => {
            let f = gen_reference(&ReferenceParams {
                kind: kind.clone(),
                mean_intensity: 1.0,
                n_pixels: 256 * 256,
                seed: 0,
            })
            .expect("deterministic profile");
            f.uniformity_ratio()
        }
    }
}

/// Sweep a parameter grid.
///
/// Cells are the product of the grid lists (reference kinds multiply only the
/// interferometric cells), sorted by (method, sample intensity, tau_s,
/// reference kind). Each cell's seed derives from the base master seed and the
/// cell's position in that sorted order, so the output is independent of
/// execution order and thread count. `base` supplies everything the grid does
/// not: its `dt / tau_field` ratio sets each cell's step, and its trial count,
/// sensor, and acquisition settings apply to every cell. `n_trials = 0` fills
/// only the theory columns.
pub fn sweep(grid: &SweepGrid, base: &TrialConfig) -> Result<SweepTable> {
    if grid.tau_s_us.is_empty() || grid.sample_intensity.is_empty() || grid.methods.is_empty() {
        return Err(Error::InvalidParam("sweep grid must be non-empty".into()));
    }
    if grid.methods.contains(&Method::Isvs) && grid.reference_kinds.is_empty() {
        return Err(Error::InvalidParam(
            "interferometric sweep cells need at least one reference kind".into(),
        ));
    }
    if base.n_trials == 1 {
        return Err(Error::InvalidParam(
            "n_trials must be 0 (theory only) or at least 2".into(),
        ));
    }
    if !base.dynamics.tau_field_us.is_finite() {
        return Err(Error::InvalidParam(
            "sweep base needs a finite tau_field".into(),
        ));
    }
    let dt_ratio = base.dynamics.dt_us / base.dynamics.tau_field_us;

    struct Cell {
        method: Method,
        tau_s: f64,
        i_s: f64,
        ref_kind: Option<ReferenceKind>,
    }
    let mut cells = Vec::new();
    for method in &grid.methods {
        for &i_s in &grid.sample_intensity {
            for &tau_s in &grid.tau_s_us {
                match method {
                    Method::Isvs => {
                        for kind in &grid.reference_kinds {
                            cells.push(Cell {
                                method: *method,
                                tau_s,
                                i_s,
                                ref_kind: Some(kind.clone()),
                            });
                        }
                    }
                    Method::Svs => cells.push(Cell {
                        method: *method,
                        tau_s,
                        i_s,
                        ref_kind: None,
                    }),
                }
            }
        }
    }
    cells.sort_by(|a, b| {
        (a.method.as_str(), a.i_s, a.tau_s, kind_sort_label(&a.ref_kind))
            .partial_cmp(&(b.method.as_str(), b.i_s, b.tau_s, kind_sort_label(&b.ref_kind)))
            .expect("grid values are finite")
    });

    let mut points = Vec::with_capacity(cells.len());
    let mut warnings = Vec::new();
    let mut truncated = false;
    let mut spent = 0.0;
    for (index, cell) in cells.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.method = cell.method;
        cfg.dynamics.tau_field_us = 2.0 * cell.tau_s;
        cfg.dynamics.mean_intensity = cell.i_s;
        cfg.dynamics.dt_us = dt_ratio * cfg.dynamics.tau_field_us;
        cfg.master_seed = seed::derive(base.master_seed, &[seed::TAG_CELL, index as u64]);
        match (&cell.ref_kind, &mut cfg.reference) {
            (Some(kind), Some(spec)) => spec.kind = kind.clone(),
            (Some(kind), None) => {
                return Err(Error::InvalidParam(format!(
                    "grid asks for reference kind {} but the base config has no reference",
                    kind_sort_label(&Some(kind.clone()))
                )));
            }
            (None, r) => *r = None,
        }

        let cell_name = format!(
            "{} i_s={} tau_s={}{}",
            cell.method,
            cell.i_s,
            cell.tau_s,
            match &cell.ref_kind {
                Some(k) => format!(" ref={}", kind_sort_label(&Some(k.clone()))),
                None => String::new(),
            }
        );
        for w in cfg.check_guards() {
            warnings.push(format!("{cell_name}: {w}"));
        }

        let r = cell.ref_kind.as_ref().map_or(1.0, design_uniformity_ratio);
        let p = cfg.theory_params(r);
        p.validate()?;
        let (k2_theory, snr_theory) = match cell.method {
            Method::Isvs => (
                theory::k2_isvs(&p, true),
                theory::snr_isvs(&p, true, TauForm::Field),
            ),
            Method::Svs => (theory::k2_svs(&p, true), theory::snr_svs(&p, true)),
        };
        let (nst, u_i, _) = cfg.exact_priors();

        let mut point = SnrPoint {
            method: cell.method,
            tau_s_us: cell.tau_s,
            tau_field_us: 2.0 * cell.tau_s,
            sample_intensity: cell.i_s,
            reference_intensity: cfg.reference.as_ref().map_or(0.0, |r| r.mean_intensity),
            exposure_us: cfg.sensor.exposure_us,
            nst,
            u_i,
            uniformity_ratio: r,
            nio: cfg.dynamics.n_pixels,
            n_trials: cfg.n_trials,
            k2_theory,
            snr_theory,
            tau_hat_mean_us: f64::NAN,
            tau_hat_sd_us: f64::NAN,
            snr_empirical: f64::NAN,
            k2_empirical: f64::NAN,
            k2_sd: f64::NAN,
            n_below_floor: 0,
            reference_kind: cell.ref_kind.clone(),
        };

        if cfg.n_trials > 0 {
            let work = cfg.pixel_steps();
            if spent + work > grid.budget_pixel_steps {
                truncated = true;
                warnings.push(format!(
                    "budget exhausted before {cell_name}: {spent:.3e} + {work:.3e} pixel-steps \
                     exceeds {:.3e}; table truncated",
                    grid.budget_pixel_steps
                ));
                break;
            }
            spent += work;
            let result = run_cell(&cfg)?;
            let taus: Vec<f64> = result.estimates.iter().map(|e| e.tau_s_us).collect();
            let n = taus.len() as f64;
            point.tau_hat_mean_us = taus.iter().sum::<f64>() / n;
            let var = taus
                .iter()
                .map(|t| (t - point.tau_hat_mean_us) * (t - point.tau_hat_mean_us))
                .sum::<f64>()
                / (n - 1.0);
            point.tau_hat_sd_us = var.sqrt();
            point.snr_empirical = empirical_snr(&taus, cell.tau_s)?.snr;
            point.k2_empirical =
                result.k2_means.iter().sum::<f64>() / result.k2_means.len() as f64;
            point.k2_sd = (result
                .k2_means
                .iter()
                .map(|k| (k - point.k2_empirical) * (k - point.k2_empirical))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt();
            point.n_below_floor = result.estimates.iter().filter(|e| e.below_floor).count();
        }
        points.push(point);
    }

    Ok(SweepTable {
        points,
        truncated,
        warnings,
    })
}
