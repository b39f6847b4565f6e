//! Generate a dynamic speckle field and check its measured statistics against
//! the model: unit-mean exponential intensity per pixel, field autocorrelation
//! decaying as exp(-t / tau_field).

use isvs::field_dynamics::{gen_dynamic_field, model_autocorrelation, DynamicsParams};
use isvs::temporal_dcs::autocorrelate_field;

fn main() {
    let params = DynamicsParams {
        tau_field_us: 40.0,
        mean_intensity: 1.0,
        dt_us: 4.0,
        n_steps: 2000,
        n_pixels: 256,
        seed: 11,
    };
    let seq = gen_dynamic_field(&params).expect("valid parameters");

    let n = (params.n_steps * params.n_pixels) as f64;
    let mean: f64 = (0..params.n_pixels)
        .flat_map(|p| (0..params.n_steps).map(move |k| (p, k)))
        .map(|(p, k)| seq.intensity(p, k))
        .sum::<f64>()
        / n;
    println!("pixels x steps   : {} x {}", params.n_pixels, params.n_steps);
    println!("mean intensity   : {mean:.4} (target {})", params.mean_intensity);

    let curve = autocorrelate_field(&seq, 3.0 * params.tau_field_us).expect("curve");
    println!("\nlag_us  |g1| measured  |g1| model");
    for (lag, g1) in curve.lags_us.iter().zip(&curve.g1_values) {
        if (lag / params.dt_us) as usize % 2 == 0 {
            let model = model_autocorrelation(params.tau_field_us, *lag);
            println!("{lag:6.1}  {:12.4}  {model:10.4}", g1.norm());
        }
    }
}
