//! Closed-form SNR of the interferometric and direct methods versus sample
//! intensity: the crossover table as CSV on stdout.
//!
//! Pipe to a file and plot i_s against the two SNR columns on log-log axes.

use isvs::theory::{self, TauForm, TheoryParams};

fn main() {
    let mut p = TheoryParams {
        tau_s_us: 20.0,
        tau_field_override_us: None,
        exposure_us: 300.0,
        sample_intensity: 0.0,
        reference_intensity: 3000.0,
        alpha: 1.0,
        read_noise_var: 8.0,
        nio: 2000,
        uniformity_ratio: 1.0,
        decay_shape_c: 1.0,
    };

    println!("i_s,k2_isvs,k2_svs,snr_isvs,snr_svs,gain");
    let mut i_s = 0.01;
    while i_s <= 1.0e4 {
        p.sample_intensity = i_s;
        let snr_i = theory::snr_isvs(&p, true, TauForm::Field);
        let snr_s = theory::snr_svs(&p, true);
        println!(
            "{i_s:.4e},{:.6e},{:.6e},{snr_i:.6e},{snr_s:.6e},{:.3e}",
            theory::k2_isvs(&p, true),
            theory::k2_svs(&p, true),
            snr_i / snr_s
        );
        i_s *= 10.0f64.powf(0.25);
    }
}
