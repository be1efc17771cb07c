#![allow(dead_code)]

use bichro_core::gates::PairSpec;
use bichro_core::pulse::{BichromaticPulse, EnvelopeSpec, TransferFunction};
use bichro_core::transmon::{fit_spec, TransmonModel, TransmonSpec};

/// Measured (f_max, tunability, anharmonicity) in GHz of the four device qubits.
pub const Q1: (f64, f64, f64) = (5.250, 0.824, -0.205);
pub const Q2: (f64, f64, f64) = (4.269, 0.401, -0.187);
pub const Q3: (f64, f64, f64) = (4.791, 1.074, -0.206);
pub const Q4: (f64, f64, f64) = (3.365, 0.170, -0.201);

pub fn spec(row: (f64, f64, f64)) -> TransmonSpec {
    fit_spec(row.0, row.1, row.2).unwrap().spec
}

pub fn model(row: (f64, f64, f64)) -> TransmonModel {
    TransmonModel::new(spec(row)).unwrap()
}

pub fn pair(modulated: (f64, f64, f64), neighbor: (f64, f64, f64)) -> PairSpec {
    PairSpec::from_specs(spec(modulated), spec(neighbor), 10.0).unwrap()
}

pub fn pulse(phi_ac: f64, alpha: f64, p: u32, theta: f64) -> BichromaticPulse {
    BichromaticPulse::new(0.0, phi_ac, alpha, p, 100.0, theta, EnvelopeSpec::default()).unwrap()
}

/// Rises gently then rolls off, like a typical flux line with a bias tee
/// and cable loss.
pub fn rolloff_tf() -> TransferFunction {
    TransferFunction::new(vec![
        (20.0, 1.0),
        (50.0, 1.02),
        (100.0, 1.05),
        (150.0, 1.08),
        (200.0, 1.1),
        (300.0, 1.08),
        (400.0, 1.0),
        (500.0, 0.92),
        (600.0, 0.85),
        (800.0, 0.75),
        (1000.0, 0.65),
    ])
    .unwrap()
}

pub fn theta_grid(n: usize) -> Vec<f64> {
    use std::f64::consts::{PI, TAU};
    (0..n).map(|j| -PI + TAU * j as f64 / n as f64).collect()
}
