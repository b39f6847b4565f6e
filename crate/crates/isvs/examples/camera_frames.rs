//! Acquire interferometric and calibration stacks, write them to disk in the
//! one-header-line-plus-CSV stack format, and read them back.

use isvs::field_dynamics::{gen_dynamic_field, DynamicsParams};
use isvs::reference::{gen_reference, ReferenceKind, ReferenceParams};
use isvs::sensor::{acquire_calibration, acquire_stack, SensorModel};
use isvs::stack::{FrameStack, StackKind};

fn main() {
    let n_pixels = 1000;
    let sensor = SensorModel::new(1.0, 300.0, 8.0, 100.0);
    let dt = 0.6;
    let seq = gen_dynamic_field(&DynamicsParams {
        tau_field_us: 6.0,
        mean_intensity: 10.0,
        dt_us: dt,
        n_steps: sensor.exposure_steps(dt),
        n_pixels,
        seed: 5,
    })
    .expect("field");
    let reference = gen_reference(&ReferenceParams {
        kind: ReferenceKind::Uniform,
        mean_intensity: 3000.0,
        n_pixels,
        seed: 6,
    })
    .expect("reference");

    // Frame period far beyond the decorrelation time: each frame sees an
    // independent speckle realization.
    let raw = acquire_stack(&seq, 10.0, Some(&reference), &sensor, 8, 6667.0, 70).expect("raw");
    let dark = acquire_calibration(StackKind::Dark, &seq, 0.0, None, &sensor, 8, 6667.0, 71)
        .expect("dark");

    for (name, stack) in [("raw", &raw), ("dark", &dark)] {
        let first = stack.frame(0);
        let mean = first.iter().sum::<f64>() / first.len() as f64;
        println!(
            "{name:5} kind={:16} frames={} mean counts (frame 0) = {mean:.2}",
            stack.kind().to_string(),
            stack.n_frames()
        );
    }

    let path = std::env::temp_dir().join("isvs_example_raw.stack");
    raw.write_to(&path).expect("write");
    let back = FrameStack::read_from(&path).expect("read");
    assert_eq!(back.n_frames(), raw.n_frames());
    assert_eq!(back.frame(3), raw.frame(3));
    println!("\nround-tripped {} through {}", back.kind(), path.display());
    std::fs::remove_file(&path).ok();
}
