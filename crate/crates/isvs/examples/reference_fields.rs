//! The three reference-arm profiles and their uniformity ratios
//! R = <I^2> / <I>^2, the quantity that prices reference structure into the
//! contrast sampling error.

use isvs::reference::{gen_reference, valid_pixel_mask, ReferenceKind, ReferenceParams};

fn main() {
    let kinds = [
        ("uniform", ReferenceKind::Uniform),
        (
            "gaussian_profile",
            ReferenceKind::GaussianProfile {
                waist_fraction: 0.5056,
            },
        ),
        ("speckled", ReferenceKind::Speckled),
    ];

    println!("kind              R         excluded");
    for (name, kind) in kinds {
        // Square count: the Gaussian envelope lives on a 2D grid.
        let field = gen_reference(&ReferenceParams {
            kind,
            mean_intensity: 3000.0,
            n_pixels: 90_000,
            seed: 3,
        })
        .expect("reference");

        // Pixels the estimator would drop: reference below the sample level
        // (here 1.0) or below the read-noise floor in intensity units.
        let mask = valid_pixel_mask(&field, 1.0, isvs::harness::MASK_DOMINANCE_FACTOR, 0.03);
        let excluded = mask.iter().filter(|&&keep| !keep).count();
        println!(
            "{name:16}  {:8.4}  {excluded:6} / {}",
            field.uniformity_ratio(),
            mask.len()
        );
    }
}
