//! SQUID transmon spectrum versus flux and its Fourier representation.
//!
//! Reduced flux `phi = 2π Φ/Φ0` is used throughout this module; callers
//! working in units of Φ0 convert with [`reduced_flux`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::tridiagonal_eigenvalues;

/// Charge-basis truncation: states `n = -20..=20`.
pub const CHARGE_CUTOFF: i32 = 20;
/// Samples per flux period used for Fourier projection.
pub const FOURIER_SAMPLES: usize = 4096;
/// Default number of retained harmonics of the tunability curve.
pub const DEFAULT_HARMONICS: usize = 24;
/// Truncation and reconstruction tolerance on Fourier series (1 kHz).
pub const FOURIER_TOLERANCE_GHZ: f64 = 1e-6;
/// Smallest accepted `(EJ1 + EJ2) / EC`.
pub const MIN_EJ_OVER_EC: f64 = 20.0;

/// Converts flux in units of Φ0 to reduced flux in radians.
pub fn reduced_flux(phi0_units: f64) -> f64 {
    2.0 * PI * phi0_units
}

/// Josephson and charging energies of an asymmetric-SQUID transmon, in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    pub ej1_ghz: f64,
    pub ej2_ghz: f64,
    pub ec_ghz: f64,
}

/// Lowest two transition frequencies at one flux value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub f01: f64,
    pub f12: f64,
}

impl Transitions {
    pub fn anharmonicity(&self) -> f64 {
        self.f12 - self.f01
    }
}

/// Which transition a flux curve describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    F01,
    F12,
}

impl TransmonSpec {
    pub fn new(ej1_ghz: f64, ej2_ghz: f64, ec_ghz: f64) -> Result<Self> {
        let spec = TransmonSpec {
            ej1_ghz,
            ej2_ghz,
            ec_ghz,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let TransmonSpec {
            ej1_ghz: ej1,
            ej2_ghz: ej2,
            ec_ghz: ec,
        } = *self;
        if !(ej1.is_finite() && ej2.is_finite() && ec.is_finite()) {
            return Err(invalid("transmon energies must be finite"));
        }
        if !(ej2 > 0.0 && ej1 >= ej2) {
            return Err(invalid(format!(
                "need EJ1 >= EJ2 > 0, got EJ1 = {ej1}, EJ2 = {ej2}"
            )));
        }
        if ec <= 0.0 {
            return Err(invalid(format!("EC must be positive, got {ec}")));
        }
        if (ej1 + ej2) / ec <= MIN_EJ_OVER_EC {
            return Err(invalid(format!(
                "(EJ1 + EJ2) / EC = {:.2} is not in the transmon regime (> {MIN_EJ_OVER_EC})",
                (ej1 + ej2) / ec
            )));
        }
        Ok(())
    }

    /// Effective Josephson energy of the SQUID at reduced flux `phi`.
    pub fn ej_eff(&self, phi: f64) -> f64 {
        let (a, b) = (self.ej1_ghz, self.ej2_ghz);
        // clamp guards the symmetric-SQUID zero against rounding below 0
        (a * a + b * b + 2.0 * a * b * phi.cos()).max(0.0).sqrt()
    }

    pub fn transition_frequencies(&self, phi: f64) -> Result<Transitions> {
        charge_basis_transitions(self.ej_eff(phi), self.ec_ghz)
    }

    pub fn frequency(&self, channel: Channel, phi: f64) -> Result<f64> {
        let t = self.transition_frequencies(phi)?;
        Ok(match channel {
            Channel::F01 => t.f01,
            Channel::F12 => t.f12,
        })
    }

    /// Table-style summary: (f01 max, tunability, anharmonicity at the maximum).
    pub fn summary(&self) -> Result<(f64, f64, f64)> {
        let top = self.transition_frequencies(0.0)?;
        let bottom = self.transition_frequencies(PI)?;
        Ok((top.f01, top.f01 - bottom.f01, top.anharmonicity()))
    }
}

/// Transmon levels for a single junction of energy `ej` at zero offset charge.
///
/// The charge Hamiltonian commutes with `n → −n`, so it is diagonalized in
/// the symmetric and antisymmetric combinations `|n⟩ ± |−n⟩` separately.
pub fn charge_basis_transitions(ej: f64, ec: f64) -> Result<Transitions> {
    let nc = CHARGE_CUTOFF as usize;
    let level = |n: usize| 4.0 * ec * (n * n) as f64;

    let even_diag: Vec<f64> = (0..=nc).map(level).collect();
    let mut even_off = vec![-0.5 * ej; nc];
    even_off[0] *= std::f64::consts::SQRT_2;
    let odd_diag: Vec<f64> = (1..=nc).map(level).collect();
    let odd_off = vec![-0.5 * ej; nc - 1];

    let mut ev = tridiagonal_eigenvalues(&even_diag, &even_off)?;
    ev.truncate(3);
    ev.extend(tridiagonal_eigenvalues(&odd_diag, &odd_off)?.into_iter().take(3));
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok(Transitions {
        f01: ev[1] - ev[0],
        f12: ev[2] - ev[1],
    })
}

/// Result of inverting a (f_max, tunability, anharmonicity) row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecFit {
    pub spec: TransmonSpec,
    /// Model minus target for f_max, tunability and anharmonicity (GHz).
    pub residuals_ghz: [f64; 3],
    pub iterations: usize,
}

const FIT_MAX_ITER: usize = 60;
const FIT_TOL_GHZ: f64 = 1e-11;

/// Finds `(EJ1, EJ2, EC)` reproducing the maximum frequency, tunability and
/// anharmonicity by damped Newton iteration seeded from the asymptotic
/// transmon formulas.
pub fn fit_spec(f_max: f64, tunability: f64, anharmonicity: f64) -> Result<SpecFit> {
    if !(f_max.is_finite() && tunability.is_finite() && anharmonicity.is_finite()) {
        return Err(invalid("fit targets must be finite"));
    }
    if !(f_max > tunability && tunability >= 0.0) {
        return Err(invalid(format!(
            "need f_max > tunability >= 0, got {f_max} and {tunability}"
        )));
    }
    if anharmonicity >= 0.0 {
        return Err(invalid(format!(
            "anharmonicity must be negative, got {anharmonicity}"
        )));
    }
    if tunability == 0.0 {
        return Err(Error::Infeasible(
            "zero tunability requires EJ2 = 0, i.e. a fixed-frequency junction".into(),
        ));
    }

    let target = [f_max, tunability, anharmonicity];
    let residual = |x: &[f64; 3]| -> Result<[f64; 3]> {
        let [ej1, ej2, ec] = *x;
        let top = charge_basis_transitions(ej1 + ej2, ec)?;
        let bottom = charge_basis_transitions((ej1 - ej2).abs(), ec)?;
        Ok([
            top.f01 - target[0],
            top.f01 - bottom.f01 - target[1],
            top.anharmonicity() - target[2],
        ])
    };
    let admissible = |x: &[f64; 3]| x[1] > 0.0 && x[0] > x[1] && x[2] > 0.0;
    let norm = |r: &[f64; 3]| r.iter().map(|v| v * v).sum::<f64>().sqrt();

    let ec0 = -anharmonicity;
    let ej_sum = (f_max + ec0).powi(2) / (8.0 * ec0);
    let ej_diff = (f_max - tunability + ec0).powi(2) / (8.0 * ec0);
    let mut x = [0.5 * (ej_sum + ej_diff), 0.5 * (ej_sum - ej_diff), ec0];
    let mut r = residual(&x)?;

    for iter in 0..FIT_MAX_ITER {
        if r.iter().all(|v| v.abs() < FIT_TOL_GHZ) {
            return Ok(SpecFit {
                spec: TransmonSpec::new(x[0], x[1], x[2])?,
                residuals_ghz: r,
                iterations: iter,
            });
        }
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let h = 1e-6 * x[j].abs().max(1e-3);
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let (rp, rm) = (residual(&xp)?, residual(&xm)?);
            for i in 0..3 {
                jac[i][j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let Some(step) = solve3(&jac, &r) else {
            break;
        };
        let mut lambda = 1.0;
        let current = norm(&r);
        let mut accepted = false;
        while lambda > 1e-6 {
            let trial = [
                x[0] - lambda * step[0],
                x[1] - lambda * step[1],
                x[2] - lambda * step[2],
            ];
            if admissible(&trial) {
                let rt = residual(&trial)?;
                if norm(&rt) < current {
                    x = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r.iter().all(|v| v.abs() < FIT_TOL_GHZ) {
        return Ok(SpecFit {
            spec: TransmonSpec::new(x[0], x[1], x[2])?,
            residuals_ghz: r,
            iterations: FIT_MAX_ITER,
        });
    }
    Err(Error::FitDivergence {
        iterations: FIT_MAX_ITER,
        res_fmax: r[0],
        res_tunability: r[1],
        res_anharmonicity: r[2],
    })
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = *a;
        for row in 0..3 {
            m[row][col] = b[row];
        }
        *o = det(&m) / d;
    }
    Some(out)
}

/// Cosine series `f(phi) = Σ F_n cos(n phi)` of an even, 2π-periodic curve (GHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries {
    coefficients: Vec<f64>,
}

impl FourierSeries {
    pub fn from_coefficients(coefficients: Vec<f64>) -> Self {
        FourierSeries { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len().saturating_sub(1)
    }

    pub fn eval(&self, phi: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(n, c)| c * (n as f64 * phi).cos())
            .sum()
    }
}

/// Projects a sampled even curve onto `cos(n phi)`, `n = 0..=harmonics`,
/// by trapezoid quadrature over one period.
pub fn fourier_coefficients<F>(curve: F, harmonics: usize) -> Result<FourierSeries>
where
    F: FnMut(f64) -> Result<f64>,
{
    let samples = sample_period(curve, FOURIER_SAMPLES)?;
    project_samples(&samples, harmonics)
}

fn sample_period<F>(mut curve: F, m: usize) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    (0..m)
        .map(|j| curve(2.0 * PI * j as f64 / m as f64))
        .collect()
}

fn project_samples(samples: &[f64], harmonics: usize) -> Result<FourierSeries> {
    let m = samples.len();
    if harmonics < 4 {
        return Err(invalid(format!("need at least 4 harmonics, got {harmonics}")));
    }
    if 2 * harmonics >= m {
        return Err(invalid("harmonic count exceeds the sampling Nyquist limit"));
    }
    let grid: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
    let coefficients: Vec<f64> = (0..=harmonics)
        .map(|n| {
            let s: f64 = samples
                .iter()
                .zip(&grid)
                .map(|(f, phi)| f * (n as f64 * phi).cos())
                .sum();
            let w = if n == 0 { 1.0 } else { 2.0 };
            w * s / m as f64
        })
        .collect();

    let tail = coefficients[harmonics].abs();
    if tail > FOURIER_TOLERANCE_GHZ {
        return Err(Error::TruncationTooCoarse(format!(
            "|F_{harmonics}| = {tail:.3e} GHz exceeds 1 kHz"
        )));
    }
    let series = FourierSeries { coefficients };
    let sup = samples
        .iter()
        .zip(&grid)
        .map(|(f, phi)| (series.eval(*phi) - f).abs())
        .fold(0.0, f64::max);
    if sup > FOURIER_TOLERANCE_GHZ {
        return Err(Error::TruncationTooCoarse(format!(
            "reconstruction error {sup:.3e} GHz exceeds 1 kHz"
        )));
    }
    Ok(series)
}

/// A transmon spec together with the Fourier series of both transition curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonModel {
    pub spec: TransmonSpec,
    pub f01: FourierSeries,
    pub f12: FourierSeries,
}

impl TransmonModel {
    pub fn new(spec: TransmonSpec) -> Result<Self> {
        Self::with_harmonics(spec, DEFAULT_HARMONICS)
    }

    pub fn with_harmonics(spec: TransmonSpec, harmonics: usize) -> Result<Self> {
        spec.validate()?;
        let m = FOURIER_SAMPLES;
        let mut f01 = Vec::with_capacity(m);
        let mut f12 = Vec::with_capacity(m);
        for j in 0..m {
            let t = spec.transition_frequencies(2.0 * PI * j as f64 / m as f64)?;
            f01.push(t.f01);
            f12.push(t.f12);
        }
        Ok(TransmonModel {
            spec,
            f01: project_samples(&f01, harmonics)?,
            f12: project_samples(&f12, harmonics)?,
        })
    }

    pub fn series(&self, channel: Channel) -> &FourierSeries {
        match channel {
            Channel::F01 => &self.f01,
            Channel::F12 => &self.f12,
        }
    }
}
