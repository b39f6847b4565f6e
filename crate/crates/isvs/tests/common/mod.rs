//! Shared helpers for the integration suites: independent statistical oracles
//! and small numeric utilities. Everything here is computed from first
//! principles (discrete sums over the generator's own correlation structure),
//! not from the library's closed forms, so agreement is evidence rather than
//! tautology.

#![allow(dead_code)]

use isvs::MS_PER_US;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1).
pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Correlated double sum `S_n(q) = sum_{k,m=0}^{n-1} q^|k-m| = n + 2 sum_{m=1}^{n-1} (n-m) q^m`.
///
/// This is the variance inflation of a sum of n unit-variance samples whose
/// correlation decays geometrically with lag.
pub fn correlated_double_sum(n: usize, q: f64) -> f64 {
    let mut s = n as f64;
    for m in 1..n {
        s += 2.0 * (n - m) as f64 * q.powi(m as i32);
    }
    s
}

/// First-order finite-series factor for a self-normalized g2 estimator: the
/// squared sample mean in the denominator over-estimates the squared true mean
/// by `Var(mean)/mean^2 = S_n(q)/n^2` for unit-contrast intensity with
/// per-step correlation q.
pub fn g2_finite_series_scale(n: usize, q: f64) -> f64 {
    1.0 / (1.0 + correlated_double_sum(n, q) / (n as f64 * n as f64))
}

/// Steps spanned by one exposure: exact ratios snap, fractional ones round up
/// (the same rule the sensor applies, restated here so the oracles stay
/// independent of it).
pub fn exposure_steps(exposure_us: f64, dt_us: f64) -> usize {
    let ratio = exposure_us / dt_us;
    let snapped = ratio.round();
    if (ratio - snapped).abs() < 1e-9 * snapped.max(1.0) {
        snapped as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Acquisition geometry needed by the exact contrast oracles.
#[derive(Debug, Clone, Copy)]
pub struct OracleParams {
    pub alpha: f64,
    /// Nominal exposure, microseconds (sets the count prior in the denominator).
    pub exposure_us: f64,
    /// Simulation step, microseconds.
    pub dt_us: f64,
    /// Steps actually integrated per exposure (ceil of T/dt).
    pub exposure_steps: usize,
    /// Field decorrelation time, microseconds.
    pub tau_field_us: f64,
    pub sample_intensity: f64,
    pub reference_intensity: f64,
    pub read_noise_var: f64,
    pub n_pixels: usize,
}

impl OracleParams {
    fn per_step_field_correlation(&self) -> f64 {
        (-self.dt_us / self.tau_field_us).exp()
    }

    fn nst_prior(&self) -> f64 {
        self.alpha * self.sample_intensity * self.exposure_us * MS_PER_US
    }
}

/// Exact expected squared contrast of a calibrated interferogram with a uniform
/// reference, derived directly from the discrete AR(1) generator.
///
/// Per pixel, the calibrated counts are a sum over `n` steps of the
/// instantaneous interference intensity, shot-noised and read-noised. With
/// `g = alpha * dt` (dt in ms) and per-step field correlation `rho`:
///
/// ```text
/// Var = 2 g^2 I_R I_S S_n(rho)      cross term (Re of the field sums coherently)
///     + g^2 I_S^2   S_n(rho^2)      self-interference term (intensity correlates as rho^2)
///     + alpha (I_R + I_S) n dt      shot noise on the total expected counts
///     + read_var
/// ```
///
/// The spatial population variance over N iid pixels has expectation
/// `(1 - 1/N) Var`, and the estimator divides by the nominal count prior
/// `(alpha I_S T)^2`.
pub fn exact_k2_interferometric(p: &OracleParams) -> f64 {
    let n = p.exposure_steps;
    let rho = p.per_step_field_correlation();
    let dt_ms = p.dt_us * MS_PER_US;
    let g = p.alpha * dt_ms;
    let cross = 2.0 * g * g * p.reference_intensity * p.sample_intensity
        * correlated_double_sum(n, rho);
    let sample = g * g * p.sample_intensity * p.sample_intensity
        * correlated_double_sum(n, rho * rho);
    let shot = p.alpha * (p.reference_intensity + p.sample_intensity) * n as f64 * dt_ms;
    let var = cross + sample + shot + p.read_noise_var;
    let nst = p.nst_prior();
    (1.0 - 1.0 / p.n_pixels as f64) * var / (nst * nst)
}

/// Exact expected squared contrast of a direct (reference-free) acquisition,
/// normalized by the same nominal count prior. The camera offset is constant
/// across pixels and drops out of the spatial variance.
pub fn exact_k2_direct(p: &OracleParams) -> f64 {
    let n = p.exposure_steps;
    let rho = p.per_step_field_correlation();
    let dt_ms = p.dt_us * MS_PER_US;
    let g = p.alpha * dt_ms;
    let sample = g * g * p.sample_intensity * p.sample_intensity
        * correlated_double_sum(n, rho * rho);
    let shot = p.alpha * p.sample_intensity * n as f64 * dt_ms;
    let var = sample + shot + p.read_noise_var;
    let nst = p.nst_prior();
    (1.0 - 1.0 / p.n_pixels as f64) * var / (nst * nst)
}
