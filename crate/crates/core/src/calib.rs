//! Virtual flux-line hardware with hidden distortions, and the calibration
//! experiments that recover them from average-frequency (Ramsey) data alone.
//!
//! The line scales each tone by a transfer function `T(f)` and the AWG adds a
//! global phase offset `θ0` per clock cycle, which moves the relative tone
//! phase to `θ + (1 − p) θ0`. `θ0` is only identifiable modulo `2π/(p − 1)`;
//! every branch compensates identically.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::device::QubitSource;
use crate::error::{invalid, Error, Result};
use crate::linalg::least_squares;
use crate::modulation::{avg_frequency, avg_frequency_timedomain, nu_series, sweet_spot_solve};
use crate::optim::bisect;
use crate::pulse::{
    apply_transfer_compensation, effective_theta_after_shift, precompensate_theta, through_line,
    BichromaticPulse, EnvelopeSpec, TransferFunction,
};
use crate::transmon::{Channel, TransmonModel, TransmonSpec};

/// Harmonics of `θ` in the `f̄(θ)` fit.
pub const THETA_FIT_HARMONICS: usize = 4;
/// Minimum sweep length for [`calibrate_theta0`].
pub const MIN_THETA_POINTS: usize = 16;
// Largest allowed circular gap between swept θ values.
const MAX_THETA_GAP: f64 = PI / 4.0;
// Variation floor used when the hardware is noiseless (1 Hz).
const NOISELESS_FLOOR_GHZ: f64 = 1e-9;

/// Simulated AWG and flux line. The distortions are private; they are only
/// observable through [`VirtualHardware::ramsey`].
#[derive(Clone)]
pub struct VirtualHardware {
    spec: TransmonSpec,
    theta0: f64,
    tf: TransferFunction,
    noise_sigma_khz: f64,
    randomize_theta0: bool,
}

impl fmt::Debug for VirtualHardware {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VirtualHardware")
            .field("spec", &self.spec)
            .field("noise_sigma_khz", &self.noise_sigma_khz)
            .field("randomize_theta0", &self.randomize_theta0)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyResult {
    pub f_bar_measured_ghz: f64,
    pub uncertainty_khz: f64,
}

impl VirtualHardware {
    pub fn new(spec: TransmonSpec, hidden_theta0: f64, hidden_tf: TransferFunction, noise_sigma_khz: f64) -> Result<Self> {
        spec.validate()?;
        if !hidden_theta0.is_finite() {
            return Err(invalid("hidden θ0 must be finite"));
        }
        if !(noise_sigma_khz >= 0.0 && noise_sigma_khz.is_finite()) {
            return Err(invalid(format!("noise sigma must be >= 0, got {noise_sigma_khz}")));
        }
        Ok(VirtualHardware {
            spec,
            theta0: hidden_theta0,
            tf: hidden_tf,
            noise_sigma_khz,
            randomize_theta0: false,
        })
    }

    /// Draws a fresh `θ0` for every experiment, as happens when waveforms
    /// start at arbitrary points of the clock/LO cycle.
    pub fn with_randomized_theta0(mut self, on: bool) -> Self {
        self.randomize_theta0 = on;
        self
    }

    pub fn spec(&self) -> &TransmonSpec {
        &self.spec
    }

    pub fn noise_sigma_khz(&self) -> f64 {
        self.noise_sigma_khz
    }

    /// Delivers `requested` through the distorted line and reports the
    /// period-averaged `f01`, plus Gaussian readout noise.
    pub fn ramsey<R: Rng + ?Sized>(&self, requested: &BichromaticPulse, rng: &mut R) -> Result<RamseyResult> {
        requested.validate()?;
        let theta0 = if self.randomize_theta0 {
            rng.random_range(-PI..PI)
        } else {
            self.theta0
        };
        let line = through_line(requested, &self.tf)?;
        let delivered = line.with_theta(effective_theta_after_shift(line.theta, theta0, line.p));
        let mut f = avg_frequency_timedomain(&self.spec, Channel::F01, &delivered)?;
        if self.noise_sigma_khz > 0.0 {
            let n = Normal::new(0.0, self.noise_sigma_khz * 1e-6).map_err(|e| invalid(e.to_string()))?;
            f += n.sample(rng);
        }
        Ok(RamseyResult {
            f_bar_measured_ghz: f,
            uncertainty_khz: self.noise_sigma_khz,
        })
    }
}

pub fn virtual_ramsey<R: Rng + ?Sized>(
    hw: &VirtualHardware,
    requested: &BichromaticPulse,
    rng: &mut R,
) -> Result<RamseyResult> {
    hw.ramsey(requested, rng)
}

/// Principal value of `x` modulo `width`, in `[-width/2, width/2)`.
pub fn wrap_to_branch(x: f64, width: f64) -> f64 {
    let y = (x + 0.5 * width).rem_euclid(width) - 0.5 * width;
    if y >= 0.5 * width {
        y - width
    } else {
        y
    }
}

/// Width of the `θ0` ambiguity for tone multiplier `p`.
pub fn theta0_branch_width(p: u32) -> f64 {
    TAU / (p as f64 - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta0Estimate {
    /// Principal-branch estimate (rad).
    pub theta0_rad: f64,
    pub branch_width_rad: f64,
    pub phi_ac: f64,
    /// Fitted amplitude of the `cos θ` component (GHz).
    pub fundamental_ghz: f64,
    pub residual_rms_khz: f64,
    pub variation_khz: f64,
    /// `(θ requested, f̄ measured)` pairs.
    pub sweep: Vec<(f64, f64)>,
}

fn check_theta_coverage(thetas: &[f64]) -> Result<()> {
    if thetas.len() < MIN_THETA_POINTS {
        return Err(invalid(format!(
            "θ sweep needs at least {MIN_THETA_POINTS} points, got {}",
            thetas.len()
        )));
    }
    let mut w: Vec<f64> = thetas.iter().map(|t| t.rem_euclid(TAU)).collect();
    w.sort_by(|a, b| a.total_cmp(b));
    let wrap_gap = w[0] + TAU - w[w.len() - 1];
    let gap = w.windows(2).map(|p| p[1] - p[0]).fold(wrap_gap, f64::max);
    if gap > MAX_THETA_GAP {
        return Err(invalid(format!(
            "θ sweep leaves a gap of {gap:.3} rad; it must cover a full period"
        )));
    }
    Ok(())
}

/// Sweeps `θ` on the probe shape, fits harmonics `0..=4` of `f̄(θ)` and reads
/// `θ0` off the phase of the fundamental. The sign of the fundamental, which
/// the fit alone cannot fix, comes from the model.
pub fn calibrate_theta0<R: Rng + ?Sized>(
    hw: &VirtualHardware,
    model: &TransmonModel,
    probe: &BichromaticPulse,
    thetas: &[f64],
    rng: &mut R,
) -> Result<Theta0Estimate> {
    probe.validate()?;
    if probe.p < 3 {
        return Err(invalid("θ0 calibration needs p >= 3; a single effective tone carries no relative phase"));
    }
    check_theta_coverage(thetas)?;

    let mut sweep = Vec::with_capacity(thetas.len());
    for &t in thetas {
        let r = hw.ramsey(&probe.with_theta(t), rng)?;
        sweep.push((t, r.f_bar_measured_ghz));
    }
    let (lo, hi) = sweep
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &(_, f)| (l.min(f), h.max(f)));
    let variation = hi - lo;
    let noise = (5.0 * hw.noise_sigma_khz * 1e-6).max(NOISELESS_FLOOR_GHZ);
    if variation < noise {
        return Err(Error::FlatResponse {
            variation_ghz: variation,
            noise_ghz: noise,
        });
    }

    let rows: Vec<Vec<f64>> = sweep
        .iter()
        .map(|&(t, _)| {
            let mut r = vec![1.0];
            for m in 1..=THETA_FIT_HARMONICS {
                r.push((m as f64 * t).cos());
                r.push((m as f64 * t).sin());
            }
            r
        })
        .collect();
    let y: Vec<f64> = sweep.iter().map(|s| s.1).collect();
    let c = least_squares(&rows, &y).ok_or_else(|| invalid("θ sweep does not determine the harmonic fit"))?;
    let residual = (rows
        .iter()
        .zip(&y)
        .map(|(r, v)| {
            let fit: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            (fit - v).powi(2)
        })
        .sum::<f64>()
        / y.len() as f64)
        .sqrt();

    // f̄ ≈ ν1 cos(θ + δ) with δ = (1 − p) θ0:  a1 = ν1 cos δ, b1 = −ν1 sin δ
    let (a1, b1) = (c[1], c[2]);
    let nu1 = nu_series(&model.f01, probe)?.get(1).copied().unwrap_or(0.0);
    let s = if nu1 < 0.0 { -1.0 } else { 1.0 };
    let delta = (-s * b1).atan2(s * a1);
    let width = theta0_branch_width(probe.p);
    let theta0 = wrap_to_branch(-delta / (probe.p as f64 - 1.0), width);

    Ok(Theta0Estimate {
        theta0_rad: theta0,
        branch_width_rad: width,
        phi_ac: probe.phi_ac,
        fundamental_ghz: a1.hypot(b1),
        residual_rms_khz: residual * 1e6,
        variation_khz: variation * 1e6,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianTheta0 {
    pub theta0_rad: f64,
    pub branch_width_rad: f64,
    pub per_amplitude: Vec<Theta0Estimate>,
}

// Median after unwrapping every estimate onto the branch of the first one.
fn branch_median(estimates: &[Theta0Estimate]) -> f64 {
    let width = estimates[0].branch_width_rad;
    let anchor = estimates[0].theta0_rad;
    let mut unwrapped: Vec<f64> = estimates
        .iter()
        .map(|e| anchor + wrap_to_branch(e.theta0_rad - anchor, width))
        .collect();
    unwrapped.sort_by(|a, b| a.total_cmp(b));
    let n = unwrapped.len();
    let median = if n % 2 == 1 {
        unwrapped[n / 2]
    } else {
        0.5 * (unwrapped[n / 2 - 1] + unwrapped[n / 2])
    };
    wrap_to_branch(median, width)
}

/// Repeats [`calibrate_theta0`] at several amplitudes and keeps the median,
/// taken on the branch circle.
pub fn calibrate_theta0_median<R: Rng + ?Sized>(
    hw: &VirtualHardware,
    model: &TransmonModel,
    probe: &BichromaticPulse,
    amplitudes: &[f64],
    thetas: &[f64],
    rng: &mut R,
) -> Result<MedianTheta0> {
    if amplitudes.is_empty() {
        return Err(invalid("need at least one probe amplitude"));
    }
    let per_amplitude = amplitudes
        .iter()
        .map(|&a| calibrate_theta0(hw, model, &probe.with_phi_ac(a), thetas, rng))
        .collect::<Result<Vec<_>>>()?;
    let width = per_amplitude[0].branch_width_rad;
    Ok(MedianTheta0 {
        theta0_rad: branch_median(&per_amplitude),
        branch_width_rad: width,
        per_amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferPoint {
    pub freq_mhz: f64,
    pub measured_fbar_ghz: f64,
    pub delivered_phi_ac: f64,
    pub transmission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferCalibration {
    pub tf: TransferFunction,
    pub probe_amplitude: f64,
    /// Smallest-amplitude monochromatic sweet spot; inversion is unique below it.
    pub monotone_bound: f64,
    pub points: Vec<TransferPoint>,
}

/// Infers the line transmission at each probe frequency from the frequency
/// shift of a monochromatic pulse, inverting the model `f̄(Φ_ac)` on its
/// monotone branch below the first sweet spot.
pub fn calibrate_transfer_function<R: Rng + ?Sized>(
    hw: &VirtualHardware,
    model: &TransmonModel,
    probe_freqs_mhz: &[f64],
    probe_amplitude: f64,
    envelope: EnvelopeSpec,
    rng: &mut R,
) -> Result<TransferCalibration> {
    let mono = |a: f64, f: f64| BichromaticPulse::new(0.0, a, 0.0, 3, f, 0.0, envelope);
    let template = mono(0.0, 100.0)?;
    let bound = sweet_spot_solve(&model.f01, &template)?[0].pulse.phi_ac;
    if !(probe_amplitude > 0.0 && probe_amplitude < bound) {
        return Err(Error::NonMonotoneRegion {
            amplitude: probe_amplitude,
            bound,
        });
    }
    let f_top = avg_frequency(&model.f01, &template)?;
    let f_bottom = avg_frequency(&model.f01, &template.with_phi_ac(bound))?;

    let mut points = Vec::with_capacity(probe_freqs_mhz.len());
    for &f in probe_freqs_mhz {
        let requested = mono(probe_amplitude, f)?;
        let meas = hw.ramsey(&requested, rng)?.f_bar_measured_ghz;
        if !(f_bottom..=f_top).contains(&meas) {
            return Err(Error::NonMonotoneRegion {
                amplitude: probe_amplitude,
                bound,
            });
        }
        let delivered = bisect(
            |a| Ok(avg_frequency(&model.f01, &template.with_phi_ac(a))? - meas),
            0.0,
            bound,
            1e-12,
        )?;
        points.push(TransferPoint {
            freq_mhz: f,
            measured_fbar_ghz: meas,
            delivered_phi_ac: delivered,
            transmission: delivered / probe_amplitude,
        });
    }
    let tf = TransferFunction::new(points.iter().map(|p| (p.freq_mhz, p.transmission)).collect())?;
    Ok(TransferCalibration {
        tf,
        probe_amplitude,
        monotone_bound: bound,
        points,
    })
}

/// The pulse to program so that `desired` arrives at the qubit.
pub fn compensate(desired: &BichromaticPulse, theta0: f64, tf: &TransferFunction) -> Result<BichromaticPulse> {
    let (s1, s2) = apply_transfer_compensation(desired, tf)?;
    let scaled = desired.with_tone_scales(s1, s2);
    Ok(scaled.with_theta(precompensate_theta(desired.theta, theta0, desired.p)))
}

fn default_theta_points() -> usize {
    32
}

fn default_envelope() -> EnvelopeSpec {
    EnvelopeSpec::default()
}

/// Probe shape for the `θ0` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta0Probe {
    pub p: u32,
    pub alpha_rad: f64,
    pub fm_mhz: f64,
    /// One sweep per amplitude; the median is reported.
    pub amplitudes_phi0: Vec<f64>,
    #[serde(default = "default_theta_points")]
    pub theta_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferProbe {
    pub freqs_mhz: Vec<f64>,
    pub amplitude_phi0: f64,
}

/// Desired pulse used to check the compensated line end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckPulse {
    pub phi_ac_phi0: f64,
    pub alpha_rad: f64,
    pub p: u32,
    pub fm_mhz: f64,
    pub theta_rad: f64,
}

/// A virtual calibration run: hidden hardware plus the probes to use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub qubit: QubitSource,
    pub hidden_theta0_rad: f64,
    pub transfer_function: TransferFunction,
    #[serde(default)]
    pub noise_sigma_khz: f64,
    #[serde(default)]
    pub randomize_theta0: bool,
    #[serde(default = "default_envelope")]
    pub envelope: EnvelopeSpec,
    pub transfer_probe: TransferProbe,
    pub theta0_probe: Theta0Probe,
    pub check: Option<CheckPulse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopCheck {
    pub ideal_fbar_ghz: f64,
    pub measured_fbar_ghz: f64,
    pub residual_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub theta0_estimate_rad: f64,
    pub theta0_branch_width_rad: f64,
    pub branch_note: String,
    pub theta0_per_amplitude: Vec<Theta0Summary>,
    pub transfer_function: Vec<TransferPoint>,
    pub closed_loop: Option<ClosedLoopCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta0Summary {
    pub phi_ac_phi0: f64,
    pub theta0_rad: f64,
    pub fundamental_khz: f64,
    pub residual_rms_khz: f64,
}

/// Transfer function first (it does not depend on `θ0`), then `θ0` with
/// tf-compensated probes, then the end-to-end check.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<CalibrationReport> {
    let spec = scenario.qubit.resolve()?;
    let hw = VirtualHardware::new(
        spec,
        scenario.hidden_theta0_rad,
        scenario.transfer_function.clone(),
        scenario.noise_sigma_khz,
    )?
    .with_randomized_theta0(scenario.randomize_theta0);
    let model = TransmonModel::new(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let tp = &scenario.transfer_probe;
    let tf_cal = calibrate_transfer_function(&hw, &model, &tp.freqs_mhz, tp.amplitude_phi0, scenario.envelope, &mut rng)?;

    let pr = &scenario.theta0_probe;
    let thetas: Vec<f64> = (0..pr.theta_points)
        .map(|j| -PI + TAU * j as f64 / pr.theta_points as f64)
        .collect();
    let mut per_amplitude = Vec::new();
    for &a in &pr.amplitudes_phi0 {
        let probe = BichromaticPulse::new(0.0, a, pr.alpha_rad, pr.p, pr.fm_mhz, 0.0, scenario.envelope)?;
        // the line only rescales tones, so the sweep can be pre-distorted once
        let (s1, s2) = apply_transfer_compensation(&probe, &tf_cal.tf)?;
        let programmed = probe.with_tone_scales(s1, s2);
        let mut est = calibrate_theta0(&hw, &model, &programmed, &thetas, &mut rng)?;
        est.phi_ac = a;
        per_amplitude.push(est);
    }
    if per_amplitude.is_empty() {
        return Err(invalid("θ0 probe lists no amplitudes"));
    }
    let width = per_amplitude[0].branch_width_rad;
    let theta0 = branch_median(&per_amplitude);

    let closed_loop = match &scenario.check {
        None => None,
        Some(c) => {
            let desired = BichromaticPulse::new(0.0, c.phi_ac_phi0, c.alpha_rad, c.p, c.fm_mhz, c.theta_rad, scenario.envelope)?;
            let ideal = avg_frequency_timedomain(&spec, Channel::F01, &desired)?;
            let programmed = compensate(&desired, theta0, &tf_cal.tf)?;
            let measured = hw.ramsey(&programmed, &mut rng)?.f_bar_measured_ghz;
            Some(ClosedLoopCheck {
                ideal_fbar_ghz: ideal,
                measured_fbar_ghz: measured,
                residual_khz: (measured - ideal) * 1e6,
            })
        }
    };

    Ok(CalibrationReport {
        theta0_estimate_rad: theta0,
        theta0_branch_width_rad: width,
        branch_note: format!(
            "theta0 is identifiable only modulo 2*pi/(p-1) = {width:.6} rad; every branch yields the same compensation"
        ),
        theta0_per_amplitude: per_amplitude
            .iter()
            .map(|e| Theta0Summary {
                phi_ac_phi0: e.phi_ac,
                theta0_rad: e.theta0_rad,
                fundamental_khz: e.fundamental_ghz * 1e6,
                residual_rms_khz: e.residual_rms_khz,
            })
            .collect(),
        transfer_function: tf_cal.points,
        closed_loop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_wrapping() {
        assert_eq!(wrap_to_branch(0.25, PI), 0.25);
        assert!((wrap_to_branch(0.25 + PI, PI) - 0.25).abs() < 1e-15);
        assert!((wrap_to_branch(-0.25 - 3.0 * PI, PI) + 0.25).abs() < 1e-14);
        let w = wrap_to_branch(0.5 * PI, PI);
        assert!((-0.5 * PI..0.5 * PI).contains(&w));
        assert_eq!(theta0_branch_width(3), PI);
        assert_eq!(theta0_branch_width(5), 0.5 * PI);
    }

    #[test]
    fn coverage_check() {
        let full: Vec<f64> = (0..16).map(|j| TAU * j as f64 / 16.0).collect();
        assert!(check_theta_coverage(&full).is_ok());
        let half: Vec<f64> = (0..16).map(|j| PI * j as f64 / 16.0).collect();
        assert!(check_theta_coverage(&half).is_err());
        assert!(check_theta_coverage(&full[..8]).is_err());
    }

    #[test]
    fn debug_hides_distortions() {
        let spec = TransmonSpec::new(17.0, 2.8, 0.19).unwrap();
        let hw = VirtualHardware::new(spec, 0.123456, TransferFunction::flat(1.0, 2000.0).unwrap(), 0.0).unwrap();
        let s = format!("{hw:?}");
        assert!(!s.contains("0.123456") && !s.contains("tf"));
    }
}
