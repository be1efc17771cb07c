//! Period-averaged transition frequencies under two-tone flux modulation,
//! their flux sensitivities, dynamical sweet spots and sideband spectra.
//!
//! Two independent routes give the average frequency `f̄`:
//!
//! * direct Simpson quadrature of the diagonalized spectrum over one period;
//! * the closed form obtained by expanding the cosine series of `f(φ)` with
//!   Jacobi–Anger,
//!
//! ```text
//! f̄ = Σ_m ν_m cos(mθ)
//! ν_m = (2 − δ_m0) Σ_n F_n (−1)^{(p+1)m/2} cos(n φ_dc) J_pm(n φ_1) J_m(n φ_p)
//! ```
//!
//! where `φ_1 = 2π Φ_ac cos α` and `φ_p = 2π Φ_ac sin α`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pulse::BichromaticPulse;
use crate::special::bessel_j_ladder;
use crate::transmon::{reduced_flux, Channel, FourierSeries, TransmonModel, TransmonSpec};

const NEGLIGIBLE_HARMONIC_GHZ: f64 = 1e-15;
/// Simpson nodes per modulation period for the direct average.
pub const TIMEDOMAIN_NODES: usize = 2048;
/// Starting Bessel cutoff for the closed form.
pub const DEFAULT_BESSEL_CUTOFF: usize = 16;
const MAX_BESSEL_CUTOFF: usize = 256;
/// Largest admissible magnitude of the last retained Bessel term (1 Hz).
pub const BESSEL_TERM_TOLERANCE_GHZ: f64 = 1e-9;
/// Finite-difference step for sensitivities (Φ0).
pub const SENSITIVITY_STEP: f64 = 1e-4;
/// Both sensitivities below this mark a sweet spot (50 kHz/Φ0).
pub const SWEET_SPOT_THRESHOLD: f64 = 5e-5;
/// Amplitude window searched for sweet spots (Φ0).
pub const SWEET_SPOT_WINDOW: (f64, f64) = (0.05, 0.9);
const SWEET_SPOT_SCAN_STEP: f64 = 0.01;
const SWEET_SPOT_TOLERANCE: f64 = 1e-6;
/// Samples per period for sideband weights.
pub const SIDEBAND_NODES: usize = 4096;

/// Raw tone description with flux in radians; no validation, negative
/// amplitudes are allowed so that central differences work at `Φ_ac = 0`.
#[derive(Debug, Clone, Copy)]
struct Tones {
    dc: f64,
    phi_ac: f64,
    alpha: f64,
    p: u32,
    theta: f64,
}

impl Tones {
    fn of(pulse: &BichromaticPulse) -> Self {
        Tones {
            dc: pulse.phi_dc,
            phi_ac: pulse.phi_ac,
            alpha: pulse.alpha,
            p: pulse.p,
            theta: pulse.theta,
        }
    }
}

fn nu_raw(series: &FourierSeries, t: &Tones, cutoff: usize) -> Vec<f64> {
    let coeffs = series.coefficients();
    let p = t.p as usize;
    let dc = reduced_flux(t.dc);
    let a1 = reduced_flux(t.phi_ac) * t.alpha.cos();
    let ap = reduced_flux(t.phi_ac) * t.alpha.sin();
    let mut nu = vec![0.0; cutoff + 1];
    nu[0] = coeffs.first().copied().unwrap_or(0.0);
    for (n, &f_n) in coeffs.iter().enumerate().skip(1) {
        let nf = n as f64;
        let c = f_n * (nf * dc).cos();
        // |J| <= 1, so a skipped harmonic moves each ν_m by at most |F_n|
        if c.abs() < NEGLIGIBLE_HARMONIC_GHZ {
            continue;
        }
        let l1 = bessel_j_ladder(p * cutoff, nf * a1);
        let lp = bessel_j_ladder(cutoff, nf * ap);
        for m in 0..=cutoff {
            if lp[m] == 0.0 {
                continue;
            }
            let sign = if ((p + 1) * m / 2) % 2 == 0 { 1.0 } else { -1.0 };
            let w = if m == 0 { 1.0 } else { 2.0 };
            nu[m] += sign * w * c * l1[p * m] * lp[m];
        }
    }
    nu
}

fn check_tail(nu: &[f64], cutoff: usize) -> Result<()> {
    let tail = nu[cutoff].abs().max(if cutoff > 0 { nu[cutoff - 1].abs() } else { 0.0 });
    if cutoff > 0 && tail > BESSEL_TERM_TOLERANCE_GHZ {
        return Err(Error::CutoffTooSmall {
            cutoff,
            term_ghz: tail,
        });
    }
    Ok(())
}

fn nu_auto(series: &FourierSeries, t: &Tones) -> Result<Vec<f64>> {
    let mut cutoff = DEFAULT_BESSEL_CUTOFF;
    loop {
        let nu = nu_raw(series, t, cutoff);
        match check_tail(&nu, cutoff) {
            Ok(()) => return Ok(nu),
            Err(e) if cutoff >= MAX_BESSEL_CUTOFF => return Err(e),
            Err(_) => cutoff *= 2,
        }
    }
}

fn sum_nu(nu: &[f64], theta: f64) -> f64 {
    nu.iter()
        .enumerate()
        .map(|(m, v)| v * (m as f64 * theta).cos())
        .sum()
}

fn fbar_raw(series: &FourierSeries, t: &Tones) -> Result<f64> {
    Ok(sum_nu(&nu_auto(series, t)?, t.theta))
}

/// The `θ`-harmonics `ν_0..=ν_M` of `f̄` for the pulse's `Φ_dc`, `Φ_ac`, `α`, `p`.
pub fn nu_coefficients(series: &FourierSeries, pulse: &BichromaticPulse, cutoff: usize) -> Result<Vec<f64>> {
    pulse.validate()?;
    let nu = nu_raw(series, &Tones::of(pulse), cutoff);
    check_tail(&nu, cutoff)?;
    Ok(nu)
}

/// `ν_0..` with the cutoff enlarged until the tail is below 1 Hz.
pub fn nu_series(series: &FourierSeries, pulse: &BichromaticPulse) -> Result<Vec<f64>> {
    pulse.validate()?;
    nu_auto(series, &Tones::of(pulse))
}

/// Closed-form `f̄` truncated at Bessel order `cutoff`.
pub fn avg_frequency_bessel(series: &FourierSeries, pulse: &BichromaticPulse, cutoff: usize) -> Result<f64> {
    Ok(sum_nu(&nu_coefficients(series, pulse, cutoff)?, pulse.theta))
}

/// Closed-form `f̄`, enlarging the Bessel cutoff until the tail is below 1 Hz.
pub fn avg_frequency(series: &FourierSeries, pulse: &BichromaticPulse) -> Result<f64> {
    pulse.validate()?;
    fbar_raw(series, &Tones::of(pulse))
}

/// Simpson average over one modulation period of `curve(Φ)` (Φ in Φ0).
pub fn period_average<F>(pulse: &BichromaticPulse, nodes: usize, mut curve: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if nodes < 4 || nodes % 2 == 1 {
        return Err(invalid(format!("Simpson needs an even node count >= 4, got {nodes}")));
    }
    // periodic integrand: the end-point weights fold onto node 0
    let mut acc = 0.0;
    for j in 0..nodes {
        let w = if j % 2 == 0 { 2.0 } else { 4.0 };
        acc += w * curve(pulse.flux_at_phase(j as f64 / nodes as f64))?;
    }
    Ok(acc / (3.0 * nodes as f64))
}

/// `f̄` by diagonalizing the charge Hamiltonian at every quadrature node.
pub fn avg_frequency_timedomain(spec: &TransmonSpec, channel: Channel, pulse: &BichromaticPulse) -> Result<f64> {
    pulse.validate()?;
    spec.validate()?;
    period_average(pulse, TIMEDOMAIN_NODES, |phi| {
        spec.frequency(channel, reduced_flux(phi))
    })
}

/// Partial derivatives of `f̄` (GHz/Φ0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensitivities {
    pub d_dc: f64,
    pub d_ac: f64,
}

impl Sensitivities {
    pub fn is_sweet_spot(&self) -> bool {
        self.d_dc.abs() < SWEET_SPOT_THRESHOLD && self.d_ac.abs() < SWEET_SPOT_THRESHOLD
    }
}

// Central difference with one Richardson step: (4 D(h) − D(2h)) / 3.
fn richardson<F>(mut f: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let h = SENSITIVITY_STEP;
    let d1 = (f(h)? - f(-h)?) / (2.0 * h);
    let d2 = (f(2.0 * h)? - f(-2.0 * h)?) / (4.0 * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

fn d_ac_raw(series: &FourierSeries, t: &Tones) -> Result<f64> {
    richardson(|h| {
        fbar_raw(
            series,
            &Tones {
                phi_ac: t.phi_ac + h,
                ..*t
            },
        )
    })
}

fn d_dc_raw(series: &FourierSeries, t: &Tones) -> Result<f64> {
    richardson(|h| fbar_raw(series, &Tones { dc: t.dc + h, ..*t }))
}

pub fn sensitivities(series: &FourierSeries, pulse: &BichromaticPulse) -> Result<Sensitivities> {
    pulse.validate()?;
    let t = Tones::of(pulse);
    Ok(Sensitivities {
        d_dc: d_dc_raw(series, &t)?,
        d_ac: d_ac_raw(series, &t)?,
    })
}

/// Flux-noise amplitudes (Φ0) on the bias and on the modulation amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub a_dc: f64,
    pub a_ac: f64,
}

/// First-order frequency fluctuation (GHz) from independent flux noise.
pub fn dephasing_proxy(s: &Sensitivities, noise: &NoiseModel) -> f64 {
    (noise.a_dc * s.d_dc).hypot(noise.a_ac * s.d_ac)
}

/// A pulse together with its average frequency and sensitivities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub pulse: BichromaticPulse,
    pub f_bar_ghz: f64,
    pub sensitivities: Sensitivities,
    pub sweet: bool,
}

pub fn operating_point(series: &FourierSeries, pulse: &BichromaticPulse) -> Result<OperatingPoint> {
    let f_bar_ghz = avg_frequency(series, pulse)?;
    let sensitivities = sensitivities(series, pulse)?;
    Ok(OperatingPoint {
        pulse: *pulse,
        f_bar_ghz,
        sensitivities,
        sweet: sensitivities.is_sweet_spot(),
    })
}

/// All amplitudes in the search window where `∂f̄/∂Φ_ac` changes sign, for
/// the tone shape of `template` (its `phi_ac` is ignored). Roots come back in
/// increasing amplitude.
pub fn sweet_spot_solve(series: &FourierSeries, template: &BichromaticPulse) -> Result<Vec<OperatingPoint>> {
    template.validate()?;
    let (lo, hi) = SWEET_SPOT_WINDOW;
    let base = Tones::of(template);
    let slope = |a: f64| d_ac_raw(series, &Tones { phi_ac: a, ..base });

    let steps = ((hi - lo) / SWEET_SPOT_SCAN_STEP).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    for &a in &grid {
        values.push(slope(a)?);
    }

    let mut roots = Vec::new();
    for i in 0..steps {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, mut fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        while b - a > SWEET_SPOT_TOLERANCE {
            let mid = 0.5 * (a + b);
            let fm = slope(mid)?;
            if fm == 0.0 {
                a = mid;
                b = mid;
                fa = 0.0;
                fb = 0.0;
                break;
            }
            if fa * fm < 0.0 {
                b = mid;
                fb = fm;
            } else {
                a = mid;
                fa = fm;
            }
        }
        // final secant step inside the bracket
        let root = if fa == fb { 0.5 * (a + b) } else { a - fa * (b - a) / (fb - fa) };
        roots.push(root.clamp(a, b));
    }
    if roots.is_empty() {
        return Err(Error::NoRoot { lo, hi });
    }
    roots
        .into_iter()
        .map(|a| operating_point(series, &template.with_phi_ac(a)))
        .collect()
}

/// One sweet spot in an atlas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub alpha_index: usize,
    pub theta_index: usize,
    pub root_index: usize,
    pub point: OperatingPoint,
}

/// Sweet spots over an `(α, θ)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Ordered by alpha index, then theta index, then amplitude.
    pub entries: Vec<AtlasEntry>,
    /// Grid nodes with no sweet spot in the window.
    pub empty_nodes: Vec<(usize, usize)>,
}

impl Atlas {
    /// `(min, max)` of `f̄` over all entries.
    pub fn fbar_range(&self) -> Option<(f64, f64)> {
        let mut it = self.entries.iter().map(|e| e.point.f_bar_ghz);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn fbar_span_ghz(&self) -> f64 {
        self.fbar_range().map_or(0.0, |(lo, hi)| hi - lo)
    }

    /// Only the smallest-amplitude root at each node.
    pub fn first_roots(&self) -> Atlas {
        Atlas {
            entries: self.entries.iter().filter(|e| e.root_index == 0).copied().collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "alpha_rad",
            "theta_rad",
            "phi_ac_phi0",
            "fbar_ghz",
            "dfdac_ghz_per_phi0",
            "sweet_flag",
        ])?;
        for e in &self.entries {
            let p = &e.point;
            wr.write_record([
                p.pulse.alpha.to_string(),
                p.pulse.theta.to_string(),
                p.pulse.phi_ac.to_string(),
                p.f_bar_ghz.to_string(),
                p.sensitivities.d_ac.to_string(),
                u8::from(p.sweet).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Solves for sweet spots at every `(α, θ)` node in parallel. Output order
/// does not depend on scheduling.
pub fn sweet_spot_atlas(
    series: &FourierSeries,
    template: &BichromaticPulse,
    alphas: &[f64],
    thetas: &[f64],
) -> Result<Atlas> {
    template.validate()?;
    let nodes: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|i| (0..thetas.len()).map(move |j| (i, j)))
        .collect();
    let solved: Vec<Result<Option<Vec<OperatingPoint>>>> = nodes
        .par_iter()
        .map(|&(i, j)| {
            let pulse = BichromaticPulse::new(
                template.phi_dc,
                template.phi_ac,
                alphas[i],
                template.p,
                template.f_m_mhz,
                thetas[j],
                template.envelope,
            )?;
            match sweet_spot_solve(series, &pulse) {
                Ok(v) => Ok(Some(v)),
                Err(Error::NoRoot { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut entries = Vec::new();
    let mut empty_nodes = Vec::new();
    for (&(i, j), res) in nodes.iter().zip(solved) {
        match res? {
            Some(points) => entries.extend(points.into_iter().enumerate().map(|(r, point)| AtlasEntry {
                alpha_index: i,
                theta_index: j,
                root_index: r,
                point,
            })),
            None => empty_nodes.push((i, j)),
        }
    }
    Ok(Atlas {
        alphas: alphas.to_vec(),
        thetas: thetas.to_vec(),
        entries,
        empty_nodes,
    })
}

/// Flux dependence of the bare coupling, normalized internally to its value
/// at zero flux.
#[derive(Clone, Default)]
pub enum Coupling {
    #[default]
    Constant,
    /// `g(Φ)` with Φ in Φ0.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coupling::Constant => f.write_str("Constant"),
            Coupling::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Coupling {
    /// Charge-matrix-element scaling `g ∝ (E_J,eff(Φ))^{1/4}`.
    pub fn charge_matrix_element(spec: TransmonSpec) -> Coupling {
        Coupling::Custom(Arc::new(move |phi| spec.ej_eff(reduced_flux(phi)).powf(0.25)))
    }
}

/// Normalized sideband weights `ε_k` with sideband frequencies `f̄ + k f_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandSpectrum {
    pub f_bar_ghz: f64,
    pub f_m_mhz: f64,
    pub k_min: i32,
    pub weights: Vec<Complex64>,
}

impl SidebandSpectrum {
    pub fn ks(&self) -> RangeInclusive<i32> {
        self.k_min..=self.k_min + self.weights.len() as i32 - 1
    }

    pub fn weight(&self, k: i32) -> Option<Complex64> {
        let i = k.checked_sub(self.k_min)?;
        usize::try_from(i).ok().and_then(|i| self.weights.get(i).copied())
    }

    pub fn frequency_ghz(&self, k: i32) -> f64 {
        self.f_bar_ghz + k as f64 * self.f_m_mhz * 1e-3
    }

    pub fn total_power(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "re_eps", "im_eps", "abs_eps", "f_k_ghz"])?;
        for (k, e) in self.ks().zip(&self.weights) {
            wr.write_record([
                k.to_string(),
                e.re.to_string(),
                e.im.to_string(),
                e.norm().to_string(),
                self.frequency_ghz(k).to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn ffts() -> &'static (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static PLANS: OnceLock<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)> = OnceLock::new();
    PLANS.get_or_init(|| {
        let mut planner = FftPlanner::new();
        (
            planner.plan_fft_forward(SIDEBAND_NODES),
            planner.plan_fft_inverse(SIDEBAND_NODES),
        )
    })
}

/// Fourier weights of `g(t)/g · exp(i 2π ∫ (f(t') − f̄) dt')` over one period
/// of the modulated `channel`.
pub fn sideband_weights(
    model: &TransmonModel,
    channel: Channel,
    pulse: &BichromaticPulse,
    ks: RangeInclusive<i32>,
    coupling: &Coupling,
) -> Result<SidebandSpectrum> {
    pulse.validate()?;
    let n = SIDEBAND_NODES;
    let half = (n / 2) as i32;
    let (k_lo, k_hi) = (*ks.start(), *ks.end());
    if k_lo > k_hi || k_lo <= -half || k_hi >= half {
        return Err(invalid(format!("sideband range {k_lo}..={k_hi} is empty or too wide")));
    }
    let series = model.series(channel);
    let flux: Vec<f64> = (0..n).map(|j| pulse.flux_at_phase(j as f64 / n as f64)).collect();
    let freq: Vec<f64> = flux.iter().map(|&phi| series.eval(reduced_flux(phi))).collect();
    let f_bar = freq.iter().sum::<f64>() / n as f64;

    let g_scale: Vec<f64> = match coupling {
        Coupling::Constant => vec![1.0; n],
        Coupling::Custom(g) => {
            let g0 = g(0.0);
            if !(g0.is_finite() && g0 != 0.0) {
                return Err(invalid("coupling must be finite and nonzero at zero flux"));
            }
            flux.iter().map(|&phi| g(phi) / g0).collect()
        }
    };

    // spectral antiderivative of f − f̄ in units of the period
    let (fwd, inv) = ffts();
    let mut buf: Vec<Complex64> = freq.iter().map(|&f| Complex64::new(f - f_bar, 0.0)).collect();
    fwd.process(&mut buf);
    buf[0] = Complex64::new(0.0, 0.0);
    buf[n / 2] = Complex64::new(0.0, 0.0);
    for (q, c) in buf.iter_mut().enumerate() {
        let sq = if q < n / 2 { q as f64 } else { q as f64 - n as f64 };
        if sq != 0.0 {
            *c /= Complex64::new(0.0, TAU * sq) * n as f64;
        }
    }
    let offset: Complex64 = buf.iter().sum();
    inv.process(&mut buf);

    let cycles_per_period = 1e3 / pulse.f_m_mhz; // GHz · ns
    let mut h: Vec<Complex64> = buf
        .iter()
        .zip(&g_scale)
        .map(|(c, g)| {
            let phase = TAU * cycles_per_period * (c - offset).re;
            Complex64::from_polar(*g, phase)
        })
        .collect();
    fwd.process(&mut h);

    let weights = (k_lo..=k_hi)
        .map(|k| h[k.rem_euclid(n as i32) as usize] / n as f64)
        .collect();
    Ok(SidebandSpectrum {
        f_bar_ghz: f_bar,
        f_m_mhz: pulse.f_m_mhz,
        k_min: k_lo,
        weights,
    })
}

/// Default `(α, θ)` grids: `α` spans `[0, π/2]` inclusive, `θ` spans `[−π, π)`.
pub fn default_grid(n_alpha: usize, n_theta: usize) -> (Vec<f64>, Vec<f64>) {
    let alphas = (0..n_alpha)
        .map(|i| {
            if n_alpha == 1 {
                0.0
            } else {
                0.5 * PI * i as f64 / (n_alpha - 1) as f64
            }
        })
        .collect();
    let thetas = (0..n_theta)
        .map(|j| -PI + TAU * j as f64 / n_theta as f64)
        .collect();
    (alphas, thetas)
}
