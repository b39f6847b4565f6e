//! Temporal-sampling benchmark: intensity autocorrelation estimation and
//! negative-exponential fitting.
//!
//! This is the reference method the camera pipelines are judged against: sample
//! one speckle fast in time, estimate `g2(t) = <I(0)I(t)>/<I>^2`, and fit
//! `baseline + beta * exp(-t/tau)` to read off the intensity decorrelation time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_dynamics::DynamicSpeckleSequence;

/// Estimated intensity autocorrelation on a linear lag grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocorrCurve {
    /// Lags in microseconds, ascending from 0.
    pub lags_us: Vec<f64>,
    /// g2 estimate per lag.
    pub g2_values: Vec<f64>,
    /// Lagged-product count per lag (n - m for lag index m).
    pub n_samples: Vec<usize>,
}

/// Estimated field autocorrelation, normalized to 1 at zero lag.
#[derive(Debug, Clone)]
pub struct FieldCurve {
    pub lags_us: Vec<f64>,
    pub g1_values: Vec<Complex64>,
    pub n_samples: Vec<usize>,
}

/// Negative-exponential fit result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpFit {
    /// Decay time, microseconds.
    pub tau_hat_us: f64,
    /// Coherence amplitude (value of the decaying part at zero lag).
    pub beta_hat: f64,
    pub baseline: f64,
    pub rms_residual: f64,
    pub iterations: usize,
}

fn lag_count(dt_us: f64, max_lag_us: f64) -> usize {
    // Number of non-zero lags; snaps T/dt ratios the same way exposures do.
    let ratio = max_lag_us / dt_us;
    let snapped = ratio.round();
    if (ratio - snapped).abs() < 1e-9 * snapped.max(1.0) {
        snapped as usize
    } else {
        ratio.floor() as usize
    }
}

/// Estimate `g2` from one intensity time series sampled at `dt_us`.
///
/// Unbiased lagged products: each lag `m` averages its `n - m` available
/// products, then divides by the squared series mean.
pub fn autocorrelate_intensity(
    series: &[f64],
    dt_us: f64,
    max_lag_us: f64,
) -> Result<AutocorrCurve> {
    if !(dt_us > 0.0) {
        return Err(Error::InvalidParam(format!("dt_us must be positive, got {dt_us}")));
    }
    if max_lag_us < dt_us {
        return Err(Error::InvalidParam(format!(
            "max_lag_us = {max_lag_us} must be at least one step dt = {dt_us}"
        )));
    }
    let m_max = lag_count(dt_us, max_lag_us);
    let n = series.len();
    if (n as f64) < 10.0 * m_max as f64 {
        return Err(Error::NotEnoughSamples(format!(
            "series of {n} samples is too short for max lag {m_max} steps (need 10x)"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(Error::InvalidParam(
            "series mean is zero; g2 is undefined".into(),
        ));
    }
    let mut lags_us = Vec::with_capacity(m_max + 1);
    let mut g2_values = Vec::with_capacity(m_max + 1);
    let mut n_samples = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let count = n - m;
        let acc: f64 = (0..count).map(|k| series[k] * series[k + m]).sum();
        lags_us.push(m as f64 * dt_us);
        g2_values.push(acc / count as f64 / (mean * mean));
        n_samples.push(count);
    }
    Ok(AutocorrCurve {
        lags_us,
        g2_values,
        n_samples,
    })
}

/// Estimate the field autocorrelation of a generated sequence, pooled over
/// pixels and time origins and normalized to exactly 1 at zero lag.
pub fn autocorrelate_field(seq: &DynamicSpeckleSequence, max_lag_us: f64) -> Result<FieldCurve> {
    let dt_us = seq.params().dt_us;
    if max_lag_us < dt_us {
        return Err(Error::InvalidParam(format!(
            "max_lag_us = {max_lag_us} must be at least one step dt = {dt_us}"
        )));
    }
    let m_max = lag_count(dt_us, max_lag_us);
    let n = seq.n_steps();
    if n <= m_max {
        return Err(Error::NotEnoughSamples(format!(
            "sequence of {n} steps cannot support lag {m_max} steps"
        )));
    }
    let mut raw = vec![Complex64::ZERO; m_max + 1];
    for px in 0..seq.n_pixels() {
        let s = seq.pixel_series(px);
        for (m, acc) in raw.iter_mut().enumerate() {
            let count = n - m;
            let mut local = Complex64::ZERO;
            for k in 0..count {
                local += s[k] * s[k + m].conj();
            }
            *acc += local / count as f64;
        }
    }
    let zero = raw[0];
    let lags_us = (0..=m_max).map(|m| m as f64 * dt_us).collect();
    let n_samples = (0..=m_max).map(|m| (n - m) * seq.n_pixels()).collect();
    Ok(FieldCurve {
        lags_us,
        g1_values: raw.iter().map(|c| c / zero.re).collect(),
        n_samples,
    })
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    // Gaussian elimination with partial pivoting on a 3x3 system.
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap()
        })?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = m[row][3];
        for k in row + 1..3 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}

fn sse(curve: &AutocorrCurve, b: f64, beta: f64, tau: f64) -> f64 {
    curve
        .lags_us
        .iter()
        .zip(&curve.g2_values)
        .map(|(&t, &y)| {
            let r = y - (b + beta * (-t / tau).exp());
            r * r
        })
        .sum()
}

/// Fit `g2(t) = baseline + beta * exp(-t / tau)` by damped Gauss-Newton.
///
/// Initialization: baseline from the tail mean (last 20% of lags), beta from the
/// zero-lag excess, tau from a log-linear regression over the first decade of
/// decay. Refinement caps at 100 iterations with a relative step tolerance of
/// 1e-10; step damping halves until the squared error decreases.
pub fn fit_exponential(curve: &AutocorrCurve) -> Result<ExpFit> {
    let n = curve.lags_us.len();
    if n < 5 {
        return Err(Error::NotEnoughSamples(format!(
            "exponential fit needs at least 5 lags, got {n}"
        )));
    }
    if curve.g2_values.len() != n {
        return Err(Error::DimensionMismatch {
            context: "fit_exponential",
            left: n,
            right: curve.g2_values.len(),
        });
    }

    // Initial baseline: tail mean over the last 20% of lags.
    let tail_start = (n as f64 * 0.8) as usize;
    let tail = &curve.g2_values[tail_start.min(n - 1)..];
    let mut b = tail.iter().sum::<f64>() / tail.len() as f64;
    let mut beta = curve.g2_values[0] - b;
    let scale = curve
        .g2_values
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    if beta <= 1e-9 * scale {
        return Err(Error::DegenerateCurve(format!(
            "no decay to fit: g2(0) - baseline = {beta}"
        )));
    }

    // Initial tau: log-linear regression over the first decade of decay.
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut count = 0.0;
    for (&t, &y) in curve.lags_us.iter().zip(&curve.g2_values) {
        let excess = y - b;
        if excess > 0.1 * beta {
            let ln = excess.ln();
            sx += t;
            sy += ln;
            sxx += t * t;
            sxy += t * ln;
            count += 1.0;
        }
    }
    let denom = count * sxx - sx * sx;
    let slope = if count >= 2.0 && denom.abs() > 0.0 {
        (count * sxy - sx * sy) / denom
    } else {
        0.0
    };
    let mut tau = if slope < 0.0 {
        -1.0 / slope
    } else {
        // Flat within the first decade; start from the grid scale.
        curve.lags_us[n - 1].max(curve.lags_us[1]) / 3.0
    };

    // Damped Gauss-Newton refinement.
    let mut current_sse = sse(curve, b, beta, tau);
    let mut last_step = f64::INFINITY;
    for iter in 0..100 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&t, &y) in curve.lags_us.iter().zip(&curve.g2_values) {
            let e = (-t / tau).exp();
            let j = [1.0, e, beta * t * e / (tau * tau)];
            let r = y - (b + beta * e);
            for p in 0..3 {
                jtr[p] += j[p] * r;
                for q in 0..3 {
                    jtj[p][q] += j[p] * j[q];
                }
            }
        }
        let Some(step) = solve3(jtj, jtr) else {
            return Err(Error::DegenerateCurve(
                "singular normal equations in exponential fit".into(),
            ));
        };

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = (b + lambda * step[0], beta + lambda * step[1], tau + lambda * step[2]);
            if cand.2 > 0.0 {
                let s = sse(curve, cand.0, cand.1, cand.2);
                if s <= current_sse {
                    b = cand.0;
                    beta = cand.1;
                    tau = cand.2;
                    current_sse = s;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        let norm = (step[0].powi(2) + step[1].powi(2) + step[2].powi(2)).sqrt();
        let pnorm = (b * b + beta * beta + tau * tau).sqrt().max(1e-300);
        last_step = lambda * norm / pnorm;
        if !accepted || last_step < 1e-10 {
            let rms = (current_sse / n as f64).sqrt();
            if tau <= 0.0 {
                return Err(Error::DegenerateCurve(
                    "fit collapsed to a non-positive decay time".into(),
                ));
            }
            return Ok(ExpFit {
                tau_hat_us: tau,
                beta_hat: beta,
                baseline: b,
                rms_residual: rms,
                iterations: iter + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: 100,
        last_step,
    })
}
