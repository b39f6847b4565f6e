//! TOML run configuration.
//!
//! Every section rejects unknown keys so typos fail loudly instead of silently
//! reverting to defaults. Sections are optional at parse time; each command
//! checks for the sections it needs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contrast::Method;
use crate::error::{Error, Result};
use crate::field_dynamics::DynamicsParams;
use crate::harness::{SweepGrid, TrialConfig};
use crate::reference::{ReferenceKind, ReferenceParams};
use crate::sensor::SensorModel;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Output format: "csv" (default) or "json".
    pub format: Option<String>,
    pub master_seed: Option<u64>,
    /// Sweep work cap in pixel-steps.
    pub budget_pixel_steps: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub tau_s_us: Vec<f64>,
    pub sample_intensity: Vec<f64>,
    /// Any of "isvs", "svs".
    pub methods: Vec<String>,
    /// Any of "uniform", "gaussian_profile", "speckled". Defaults to the
    /// [reference] kind. Gaussian entries take their waist from [reference].
    pub reference_kinds: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub n_pixels: usize,
    /// Simulation step as a fraction of tau_field; at most 0.2. Default 0.1.
    pub dt_per_tau_field: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    /// "uniform", "gaussian_profile", or "speckled".
    pub kind: String,
    pub mean_intensity: f64,
    /// 1/e^2 waist as a fraction of the strip; gaussian_profile only.
    pub waist_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub alpha: Option<f64>,
    pub exposure_us: f64,
    pub read_noise_var: f64,
    pub offset: Option<f64>,
    pub quantize: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSection {
    pub n_frames: Option<usize>,
    pub frame_period_us: f64,
    pub n_trials: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcsSection {
    /// Sample spacing for single-column series files.
    pub dt_us: Option<f64>,
    pub max_lag_us: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub grid: Option<GridSection>,
    pub dynamics: Option<DynamicsSection>,
    pub reference: Option<ReferenceSection>,
    pub sensor: Option<SensorSection>,
    pub acquisition: Option<AcquisitionSection>,
    pub dcs: Option<DcsSection>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn grid_section(&self) -> Result<&GridSection> {
        self.grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing [grid] section".into()))
    }

    fn dynamics_section(&self) -> Result<&DynamicsSection> {
        self.dynamics
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dynamics] section".into()))
    }

    fn sensor_section(&self) -> Result<&SensorSection> {
        self.sensor
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sensor] section".into()))
    }

    fn acquisition_section(&self) -> Result<&AcquisitionSection> {
        self.acquisition
            .as_ref()
            .ok_or_else(|| Error::Config("missing [acquisition] section".into()))
    }

    pub fn dcs_section(&self) -> Result<&DcsSection> {
        self.dcs
            .as_ref()
            .ok_or_else(|| Error::Config("missing [dcs] section".into()))
    }

    pub fn master_seed(&self, override_seed: Option<u64>) -> u64 {
        override_seed.or(self.run.master_seed).unwrap_or(0)
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        let s = self.sensor_section()?;
        let model = SensorModel::new(
            s.alpha.unwrap_or(1.0),
            s.exposure_us,
            s.read_noise_var,
            s.offset.unwrap_or(0.0),
        );
        let model = SensorModel {
            quantize: s.quantize.unwrap_or(false),
            ..model
        };
        model.validate()?;
        Ok(model)
    }

    fn reference_kind(&self, name: &str) -> Result<ReferenceKind> {
        let section = self.reference.as_ref();
        match name {
            "uniform" => Ok(ReferenceKind::Uniform),
            "speckled" => Ok(ReferenceKind::Speckled),
            "gaussian_profile" => {
                let waist = section.and_then(|r| r.waist_fraction).ok_or_else(|| {
                    Error::Config(
                        "reference kind gaussian_profile needs [reference] waist_fraction".into(),
                    )
                })?;
                Ok(ReferenceKind::GaussianProfile {
                    waist_fraction: waist,
                })
            }
            other => Err(Error::Config(format!(
                "unknown reference kind {other:?}; expected uniform, gaussian_profile, or speckled"
            ))),
        }
    }

    pub fn reference_params(&self) -> Result<Option<ReferenceParams>> {
        let Some(section) = self.reference.as_ref() else {
            return Ok(None);
        };
        let kind = self.reference_kind(&section.kind)?;
        Ok(Some(ReferenceParams {
            kind,
            mean_intensity: section.mean_intensity,
            n_pixels: self.dynamics_section()?.n_pixels,
            seed: 0,
        }))
    }

    fn methods(&self) -> Result<Vec<Method>> {
        let grid = self.grid_section()?;
        grid.methods
            .iter()
            .map(|m| {
                m.parse::<Method>()
                    .map_err(|_| Error::Config(format!("unknown method {m:?}")))
            })
            .collect()
    }

    /// Sweep grid for the simulate and theory commands.
    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let grid = self.grid_section()?;
        let methods = self.methods()?;
        let kind_names: Vec<String> = match &grid.reference_kinds {
            Some(names) => names.clone(),
            None => match self.reference.as_ref() {
                Some(r) => vec![r.kind.clone()],
                None => vec![],
            },
        };
        let reference_kinds = kind_names
            .iter()
            .map(|n| self.reference_kind(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepGrid {
            tau_s_us: grid.tau_s_us.clone(),
            sample_intensity: grid.sample_intensity.clone(),
            methods,
            reference_kinds,
            budget_pixel_steps: self
                .run
                .budget_pixel_steps
                .unwrap_or(SweepGrid::DEFAULT_BUDGET),
        })
    }

    /// Base trial configuration for [`crate::harness::sweep`]. The grid
    /// overrides tau and sample intensity per cell; the base carries the step
    /// ratio, pixel count, sensor, and acquisition settings.
    pub fn base_trial_config(&self, override_seed: Option<u64>) -> Result<TrialConfig> {
        let grid = self.grid_section()?;
        let dynamics = self.dynamics_section()?;
        let acquisition = self.acquisition_section()?;
        let tau_s0 = *grid
            .tau_s_us
            .first()
            .ok_or_else(|| Error::Config("[grid] tau_s_us must be non-empty".into()))?;
        let i_s0 = *grid
            .sample_intensity
            .first()
            .ok_or_else(|| Error::Config("[grid] sample_intensity must be non-empty".into()))?;
        let dt_ratio = dynamics.dt_per_tau_field.unwrap_or(0.1);
        if !(dt_ratio > 0.0 && dt_ratio <= crate::field_dynamics::MAX_DT_FRACTION) {
            return Err(Error::Config(format!(
                "dt_per_tau_field = {dt_ratio} must be in (0, {}]",
                crate::field_dynamics::MAX_DT_FRACTION
            )));
        }
        let methods = self.methods()?;
        let method = *methods
            .first()
            .ok_or_else(|| Error::Config("[grid] methods must be non-empty".into()))?;
        let tau_field = 2.0 * tau_s0;
        let cfg = TrialConfig {
            dynamics: DynamicsParams {
                tau_field_us: tau_field,
                mean_intensity: i_s0,
                dt_us: dt_ratio * tau_field,
                n_steps: 0,
                n_pixels: dynamics.n_pixels,
                seed: 0,
            },
            reference: self.reference_params()?,
            sensor: self.sensor_model()?,
            method,
            n_frames: acquisition.n_frames.unwrap_or(1),
            frame_period_us: acquisition.frame_period_us,
            n_trials: acquisition.n_trials,
            master_seed: self.master_seed(override_seed),
        };
        Ok(cfg)
    }
}
