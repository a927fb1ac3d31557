use nalgebra::DMatrix;

use super::LinearSystem;

pub const BUILTIN_SYSTEMS: [&str; 2] = ["h2-example", "hinf-example"];

/// Three-state, two-input benchmark plant used for the H2 experiments.
pub fn h2_example_system() -> LinearSystem {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            -0.4095, 0.4036, -0.0874, //
            0.5154, -0.0815, 0.1069, //
            1.6715, 0.7718, -0.3376,
        ],
    );
    let b = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -0.6359, -0.1098, -0.0325, 2.2795]);
    let mut c = DMatrix::zeros(5, 3);
    c.view_mut((0, 0), (3, 3)).fill_with_identity();
    let mut d = DMatrix::zeros(5, 2);
    d.view_mut((3, 0), (2, 2)).fill_with_identity();
    let g = DMatrix::identity(3, 3);
    let h = DMatrix::zeros(5, 3);
    LinearSystem::new(a, b, c, d, g, h).expect("builtin H2 plant is consistent")
}

/// Three-state, two-input plant with nonzero feedthrough used for the H∞ experiments.
pub fn hinf_example_system() -> LinearSystem {
    let a = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.8, 0.2, 0.1, //
            0.1, 0.7, -0.3, //
            -0.3, 0.5, 0.9,
        ],
    );
    let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let g = DMatrix::from_row_slice(3, 2, &[0.3, 0.1, 0.2, 0.2, 0.1, 0.3]);
    let c = DMatrix::identity(3, 3);
    let d = DMatrix::from_row_slice(3, 2, &[0.1, 0.2, 0.3, 0.1, 0.2, 0.1]);
    let h = DMatrix::from_row_slice(3, 2, &[0.1, 0.1, 0.2, 0.2, 0.3, 0.3]);
    LinearSystem::new(a, b, c, d, g, h).expect("builtin H-infinity plant is consistent")
}

pub fn builtin_system(name: &str) -> Option<LinearSystem> {
    match name {
        "h2-example" => Some(h2_example_system()),
        "hinf-example" => Some(hinf_example_system()),
        _ => None,
    }
}
