//! Small Monte Carlo sweep comparing empirical SNR against the closed forms.
//!
//! 40 trials per cell keeps this to a few seconds; the empirical column then
//! carries roughly 11% statistical spread. The acceptance suite runs the same
//! comparison at 200 trials over the full grid.

use isvs::contrast::Method;
use isvs::field_dynamics::DynamicsParams;
use isvs::harness::{sweep, SweepGrid, TrialConfig};
use isvs::reference::{ReferenceKind, ReferenceParams};
use isvs::sensor::SensorModel;

fn main() {
    let n_pixels = 2000;
    let base = TrialConfig {
        dynamics: DynamicsParams {
            tau_field_us: 40.0,
            mean_intensity: 1.0,
            dt_us: 4.0,
            n_steps: 0,
            n_pixels,
            seed: 0,
        },
        reference: Some(ReferenceParams {
            kind: ReferenceKind::Uniform,
            mean_intensity: 3000.0,
            n_pixels,
            seed: 0,
        }),
        sensor: SensorModel::new(1.0, 300.0, 8.0, 100.0),
        method: Method::Isvs,
        n_frames: 1,
        frame_period_us: 6667.0,
        n_trials: 40,
        master_seed: 12,
    };
    let grid = SweepGrid {
        tau_s_us: vec![3.0, 8.0],
        sample_intensity: vec![1.0, 100.0],
        methods: vec![Method::Isvs, Method::Svs],
        reference_kinds: vec![ReferenceKind::Uniform],
        budget_pixel_steps: SweepGrid::DEFAULT_BUDGET,
    };

    let table = sweep(&grid, &base).expect("sweep");
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }

    println!("method  tau_s  i_s    snr_theory  snr_measured");
    for p in &table.points {
        println!(
            "{:6}  {:5}  {:5}  {:10.3}  {:12.3}",
            p.method.to_string(),
            p.tau_s_us,
            p.sample_intensity,
            p.snr_theory,
            p.snr_empirical
        );
    }
}
