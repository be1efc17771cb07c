//! Bichromatic flux pulses: synthesis, spectral checks, phase bookkeeping and
//! per-tone transfer-function compensation.
//!
//! A pulse is
//!
//! ```text
//! Φ(t) = Φ_dc + Φ_ac u(t) [cos α cos(2π f_m t) + sin α cos(2π p f_m t + θ)]
//! ```
//!
//! with `u` an erf flat-top envelope. Times are in ns, modulation
//! frequencies in MHz, sample rates in GS/s and flux in units of Φ0.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{Read, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimum samples per period of the highest tone.
pub const OVERSAMPLING: f64 = 10.0;
/// Minimum unit-envelope periods of `f_m` for [`tone_ratio`].
pub const MIN_ANALYSIS_PERIODS: usize = 8;

/// Wraps an angle to `[-π, π)`.
pub fn wrap_phase(x: f64) -> f64 {
    if (-PI..PI).contains(&x) {
        return x;
    }
    let w = (x + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Distance between two angles on the circle.
pub fn phase_distance(a: f64, b: f64) -> f64 {
    wrap_phase(a - b).abs()
}

/// Flat-top envelope with erf-shaped rise and fall.
///
/// The rise is an error function centered at `rise/2` with standard
/// deviation `rise/5`, offset and rescaled so it starts at exactly 0 and
/// reaches exactly 1 at `t = rise`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub flat_duration_ns: f64,
    pub rise_time_ns: f64,
}

impl Default for EnvelopeSpec {
    fn default() -> Self {
        EnvelopeSpec {
            flat_duration_ns: 200.0,
            rise_time_ns: 20.0,
        }
    }
}

impl EnvelopeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.flat_duration_ns >= 0.0 && self.rise_time_ns >= 0.0) {
            return Err(invalid("envelope durations must be non-negative"));
        }
        Ok(())
    }

    pub fn total_duration_ns(&self) -> f64 {
        self.flat_duration_ns + 2.0 * self.rise_time_ns
    }

    fn rise(&self, t: f64) -> f64 {
        let r = self.rise_time_ns;
        if r == 0.0 {
            return 1.0;
        }
        let sigma = r / 5.0;
        let cdf = |x: f64| 0.5 * (1.0 + libm::erf((x - 0.5 * r) / (sigma * std::f64::consts::SQRT_2)));
        let (lo, hi) = (cdf(0.0), cdf(r));
        ((cdf(t) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Envelope value at time `t` (ns) from the pulse start.
    pub fn value(&self, t: f64) -> f64 {
        let r = self.rise_time_ns;
        let total = self.total_duration_ns();
        if t < 0.0 || t > total {
            0.0
        } else if t < r {
            self.rise(t)
        } else if t <= r + self.flat_duration_ns {
            1.0
        } else {
            self.rise(total - t)
        }
    }
}

/// All parameters of a two-tone flux pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BichromaticPulse {
    /// DC bias (Φ0).
    pub phi_dc: f64,
    /// Modulation amplitude (Φ0).
    pub phi_ac: f64,
    /// Mixing angle between the tones (rad, `[0, π/2]`).
    pub alpha: f64,
    /// Odd frequency multiplier of the second tone.
    pub p: u32,
    /// Fundamental modulation frequency (MHz).
    pub f_m_mhz: f64,
    /// Relative phase of the second tone (rad, stored in `[-π, π)`).
    pub theta: f64,
    pub envelope: EnvelopeSpec,
}

impl BichromaticPulse {
    pub fn new(
        phi_dc: f64,
        phi_ac: f64,
        alpha: f64,
        p: u32,
        f_m_mhz: f64,
        theta: f64,
        envelope: EnvelopeSpec,
    ) -> Result<Self> {
        let pulse = BichromaticPulse {
            phi_dc,
            phi_ac,
            alpha,
            p,
            f_m_mhz,
            theta: wrap_phase(theta),
            envelope,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Single tone at `f_m` (α = 0, p = 3 by convention).
    pub fn monochromatic(phi_dc: f64, phi_ac: f64, f_m_mhz: f64) -> Result<Self> {
        Self::new(phi_dc, phi_ac, 0.0, 3, f_m_mhz, 0.0, EnvelopeSpec::default())
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p % 2 == 0 {
            return Err(invalid(format!("p must be odd and >= 1, got {}", self.p)));
        }
        if !(self.phi_ac >= 0.0 && self.phi_ac.is_finite()) {
            return Err(invalid(format!("phi_ac must be >= 0, got {}", self.phi_ac)));
        }
        if !self.phi_dc.is_finite() || !self.theta.is_finite() {
            return Err(invalid("phi_dc and theta must be finite"));
        }
        if !(0.0..=FRAC_PI_2 + 1e-12).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0, π/2], got {}", self.alpha)));
        }
        if !(self.f_m_mhz > 0.0 && self.f_m_mhz.is_finite()) {
            return Err(invalid(format!("f_m must be positive, got {}", self.f_m_mhz)));
        }
        self.envelope.validate()
    }

    /// Amplitudes of the `f_m` and `p f_m` tones (Φ0).
    pub fn tone_amplitudes(&self) -> (f64, f64) {
        (
            self.phi_ac * self.alpha.cos(),
            self.phi_ac * self.alpha.sin(),
        )
    }

    /// Frequencies of the two tones (MHz).
    pub fn tone_frequencies_mhz(&self) -> (f64, f64) {
        (self.f_m_mhz, self.p as f64 * self.f_m_mhz)
    }

    /// The same pulse with each tone amplitude multiplied by a positive factor.
    pub fn with_tone_scales(&self, low: f64, high: f64) -> BichromaticPulse {
        let (a1, a2) = self.tone_amplitudes();
        let (b1, b2) = (a1 * low, a2 * high);
        let mut out = *self;
        out.phi_ac = b1.hypot(b2);
        if out.phi_ac > 0.0 {
            out.alpha = b2.atan2(b1).clamp(0.0, FRAC_PI_2);
        }
        out
    }

    pub fn with_phi_ac(&self, phi_ac: f64) -> BichromaticPulse {
        BichromaticPulse { phi_ac, ..*self }
    }

    pub fn with_theta(&self, theta: f64) -> BichromaticPulse {
        BichromaticPulse {
            theta: wrap_phase(theta),
            ..*self
        }
    }

    /// Flux at fraction `tau` of a modulation period with unit envelope.
    pub fn flux_at_phase(&self, tau: f64) -> f64 {
        let x = TAU * tau;
        self.phi_dc
            + self.phi_ac
                * (self.alpha.cos() * x.cos()
                    + self.alpha.sin() * (self.p as f64 * x + self.theta).cos())
    }

    /// Flux at time `t` (ns), including the envelope.
    pub fn flux(&self, t_ns: f64) -> f64 {
        let x = TAU * self.f_m_mhz * 1e-3 * t_ns;
        self.phi_dc
            + self.phi_ac
                * self.envelope.value(t_ns)
                * (self.alpha.cos() * x.cos()
                    + self.alpha.sin() * (self.p as f64 * x + self.theta).cos())
    }

    /// Modulation period (ns).
    pub fn period_ns(&self) -> f64 {
        1e3 / self.f_m_mhz
    }
}

/// Uniformly sampled flux waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub sample_rate_gsps: f64,
    pub samples: Vec<f64>,
    /// Sample indices where the envelope is exactly 1.
    pub flat: Range<usize>,
}

impl Waveform {
    pub fn time_ns(&self, i: usize) -> f64 {
        i as f64 / self.sample_rate_gsps
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_ns", "flux_phi0"])?;
        for (i, s) in self.samples.iter().enumerate() {
            wr.write_record([format!("{}", self.time_ns(i)), format!("{s}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Raw record: little-endian `f64` sample rate, `u64` length, then samples.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.sample_rate_gsps.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a raw record; the whole record is treated as the flat segment.
    pub fn read_binary<R: Read>(mut r: R) -> Result<Waveform> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let sample_rate_gsps = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut samples = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8)?;
            samples.push(f64::from_le_bytes(b8));
        }
        if !(sample_rate_gsps > 0.0) {
            return Err(invalid("waveform record has a non-positive sample rate"));
        }
        Ok(Waveform {
            sample_rate_gsps,
            flat: 0..samples.len(),
            samples,
        })
    }
}

/// Samples the pulse from `t = 0` through the end of the fall, inclusive.
pub fn synthesize(pulse: &BichromaticPulse, sample_rate_gsps: f64) -> Result<Waveform> {
    pulse.validate()?;
    let required = OVERSAMPLING * pulse.p as f64 * pulse.f_m_mhz * 1e-3;
    if !(sample_rate_gsps >= required) {
        return Err(Error::AliasingRisk {
            sample_rate_gsps,
            required_gsps: required,
        });
    }
    let env = pulse.envelope;
    let n = (env.total_duration_ns() * sample_rate_gsps).round() as usize + 1;
    let samples: Vec<f64> = (0..n)
        .map(|i| pulse.flux(i as f64 / sample_rate_gsps))
        .collect();
    let start = (env.rise_time_ns * sample_rate_gsps).ceil() as usize;
    let end = (((env.rise_time_ns + env.flat_duration_ns) * sample_rate_gsps).floor() as usize + 1)
        .min(n);
    Ok(Waveform {
        sample_rate_gsps,
        samples,
        flat: start..end.max(start),
    })
}

/// Single-bin DFT amplitude of `samples` at `freq_mhz`.
fn bin_amplitude(samples: &[f64], start_index: usize, sample_rate_gsps: f64, freq_mhz: f64) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let w = TAU * freq_mhz * 1e-3 / sample_rate_gsps;
    let (mut re, mut im) = (0.0, 0.0);
    for (j, s) in samples.iter().enumerate() {
        let ph = w * (start_index + j) as f64;
        re += (s - mean) * ph.cos();
        im -= (s - mean) * ph.sin();
    }
    2.0 * re.hypot(im) / n
}

fn analysis_window(waveform: &Waveform, f_m_mhz: f64) -> Result<(usize, usize)> {
    let flat_len = waveform.flat.len();
    let periods_available = flat_len.saturating_sub(1) as f64 / waveform.sample_rate_gsps * f_m_mhz * 1e-3;
    if periods_available < MIN_ANALYSIS_PERIODS as f64 {
        return Err(Error::InsufficientWindow {
            periods: periods_available,
            required: MIN_ANALYSIS_PERIODS,
        });
    }
    let periods = periods_available.floor();
    let len = (periods * waveform.sample_rate_gsps / (f_m_mhz * 1e-3)).round() as usize;
    Ok((waveform.flat.start, len.min(flat_len)))
}

/// Amplitudes at `h f_m` for `h = 1..=max_harmonic` over the largest
/// whole-period window inside the flat segment.
pub fn harmonic_amplitudes(waveform: &Waveform, f_m_mhz: f64, max_harmonic: usize) -> Result<Vec<f64>> {
    let (start, len) = analysis_window(waveform, f_m_mhz)?;
    let window = &waveform.samples[start..start + len];
    Ok((1..=max_harmonic)
        .map(|h| bin_amplitude(window, start, waveform.sample_rate_gsps, h as f64 * f_m_mhz))
        .collect())
}

/// Ratio of tone amplitudes. When the `p f_m` tone dominates the stored
/// value is the reciprocal `A(f_m)/A(p f_m)` and `inverted` is set, so the
/// value stays finite for a pure upper tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneRatio {
    pub value: f64,
    pub inverted: bool,
}

impl ToneRatio {
    /// `A(p f_m) / A(f_m)`, infinite for a pure upper tone.
    pub fn upper_over_lower(&self) -> f64 {
        if self.inverted {
            1.0 / self.value
        } else {
            self.value
        }
    }
}

pub fn tone_ratio(waveform: &Waveform, f_m_mhz: f64, p: u32) -> Result<ToneRatio> {
    let (start, len) = analysis_window(waveform, f_m_mhz)?;
    let window = &waveform.samples[start..start + len];
    let low = bin_amplitude(window, start, waveform.sample_rate_gsps, f_m_mhz);
    let high = bin_amplitude(window, start, waveform.sample_rate_gsps, p as f64 * f_m_mhz);
    Ok(if high > low {
        ToneRatio {
            value: low / high,
            inverted: true,
        }
    } else if low > 0.0 {
        ToneRatio {
            value: high / low,
            inverted: false,
        }
    } else {
        ToneRatio {
            value: 0.0,
            inverted: false,
        }
    })
}

/// Relative phase seen after a global phase shift `beta` on both tones.
pub fn effective_theta_after_shift(theta: f64, beta: f64, p: u32) -> f64 {
    wrap_phase(theta + (1.0 - p as f64) * beta)
}

/// Phase to program so that, after the generator's clock–LO phase `theta0`,
/// the delivered relative phase equals `theta_desired`.
pub fn precompensate_theta(theta_desired: f64, theta0: f64, p: u32) -> f64 {
    wrap_phase(theta_desired + (p as f64 - 1.0) * theta0)
}

/// Constant clock–LO phase of a waveform generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwgPhaseModel {
    theta0: f64,
}

impl AwgPhaseModel {
    pub fn new(theta0: f64) -> Self {
        AwgPhaseModel {
            theta0: wrap_phase(theta0),
        }
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Relative phase delivered when `theta` is programmed.
    pub fn delivered_theta(&self, theta: f64, p: u32) -> f64 {
        effective_theta_after_shift(theta, self.theta0, p)
    }
}

/// Amplitude transmission of a flux line versus frequency, interpolated with
/// a shape-preserving (monotone) cubic. Evaluation outside the sampled band
/// is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct TransferFunction {
    freqs_mhz: Vec<f64>,
    transmission: Vec<f64>,
    slopes: Vec<f64>,
}

impl TryFrom<Vec<(f64, f64)>> for TransferFunction {
    type Error = Error;

    fn try_from(samples: Vec<(f64, f64)>) -> Result<Self> {
        TransferFunction::new(samples)
    }
}

impl From<TransferFunction> for Vec<(f64, f64)> {
    fn from(tf: TransferFunction) -> Self {
        tf.samples().collect()
    }
}

impl TransferFunction {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("transfer function needs at least two samples"));
        }
        let (freqs_mhz, transmission): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        if freqs_mhz.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("transfer-function frequencies must be strictly increasing"));
        }
        if transmission.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(invalid("transmissions must be positive and finite"));
        }
        let slopes = pchip_slopes(&freqs_mhz, &transmission);
        Ok(TransferFunction {
            freqs_mhz,
            transmission,
            slopes,
        })
    }

    /// Unit transmission on `[lo, hi]` MHz.
    pub fn flat(lo_mhz: f64, hi_mhz: f64) -> Result<Self> {
        Self::new(vec![(lo_mhz, 1.0), (hi_mhz, 1.0)])
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.freqs_mhz.iter().copied().zip(self.transmission.iter().copied())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.freqs_mhz[0], *self.freqs_mhz.last().unwrap())
    }

    pub fn eval(&self, f_mhz: f64) -> Result<f64> {
        let (lo, hi) = self.support();
        if !(f_mhz >= lo && f_mhz <= hi) {
            return Err(Error::OutOfBand {
                freq_mhz: f_mhz,
                lo_mhz: lo,
                hi_mhz: hi,
            });
        }
        let x = &self.freqs_mhz;
        let i = match x.partition_point(|v| *v <= f_mhz) {
            0 => 0,
            k if k >= x.len() => x.len() - 2,
            k => k - 1,
        };
        let h = x[i + 1] - x[i];
        let t = (f_mhz - x[i]) / h;
        let (y0, y1) = (self.transmission[i], self.transmission[i + 1]);
        let (m0, m1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        Ok((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * m1)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["freq_mhz", "transmission"])?;
        for (f, t) in self.samples() {
            wr.write_record([format!("{f}"), format!("{t}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let mut samples = Vec::new();
        for rec in rd.deserialize() {
            let (f, t): (f64, f64) = rec?;
            samples.push((f, t));
        }
        Self::new(samples)
    }
}

// Fritsch–Carlson derivatives with the weighted harmonic mean at interior
// nodes and shape-preserving one-sided estimates at the ends.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] <= 0.0 {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
        }
    }
    let edge = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    m[0] = edge(h[0], h[1], d[0], d[1]);
    m[n - 1] = edge(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

// Transmission at each tone; a silent tone needs no support coverage.
fn tone_transmissions(pulse: &BichromaticPulse, tf: &TransferFunction) -> Result<(f64, f64)> {
    let (f1, f2) = pulse.tone_frequencies_mhz();
    let (a1, a2) = pulse.tone_amplitudes();
    let t1 = if a1 == 0.0 { 1.0 } else { tf.eval(f1)? };
    let t2 = if a2 == 0.0 { 1.0 } else { tf.eval(f2)? };
    Ok((t1, t2))
}

/// Per-tone amplitude factors `(1/T(f_m), 1/T(p f_m))` that cancel the
/// line's frequency-dependent attenuation.
pub fn apply_transfer_compensation(pulse: &BichromaticPulse, tf: &TransferFunction) -> Result<(f64, f64)> {
    let (t1, t2) = tone_transmissions(pulse, tf)?;
    Ok((1.0 / t1, 1.0 / t2))
}

/// The pulse the qubit sees after the line attenuates each tone.
pub fn through_line(pulse: &BichromaticPulse, tf: &TransferFunction) -> Result<BichromaticPulse> {
    let (t1, t2) = tone_transmissions(pulse, tf)?;
    Ok(pulse.with_tone_scales(t1, t2))
}
