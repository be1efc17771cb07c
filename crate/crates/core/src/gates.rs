//! Parametric two-qubit gates activated by a modulation sideband.
//!
//! The modulated qubit's ladder (`f01` or `f12`) is averaged to `f̄` and split
//! into sidebands `f̄ + k f_m`; a gate fires when one sideband meets a static
//! neighbor transition:
//!
//! | gate  | modulated ladder | neighbor transition | coupling  |
//! |-------|------------------|---------------------|-----------|
//! | CZ02  | f12              | f01                 | √2 g ε_k  |
//! | CZ20  | f01              | f12                 | √2 g ε_k  |
//! | iSWAP | f01              | f01                 | g ε_k     |
//!
//! Couplings are matrix elements `h g`, so a resonant two-level exchange
//! transfers fully at `1/(4 g)` and returns at `1/(2 g)`.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::modulation::{
    avg_frequency, default_grid, sideband_weights, sweet_spot_solve, Coupling, OperatingPoint,
};
use crate::optim::nelder_mead;
use crate::pulse::{wrap_phase, BichromaticPulse, EnvelopeSpec};
use crate::transmon::{Channel, TransmonModel, TransmonSpec, Transitions};

/// Default half-width of a collision window, measured in `f_m`.
pub const DEFAULT_COLLISION_BANDWIDTH_MHZ: f64 = 2.5;
/// Sideband indices inspected for collisions.
pub const COLLISION_SIDEBANDS: std::ops::RangeInclusive<i32> = -10..=10;
/// Default upper edge of the AWG band for `f_m`.
pub const DEFAULT_MAX_FM_MHZ: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateType {
    #[serde(rename = "CZ02")]
    Cz02,
    #[serde(rename = "CZ20")]
    Cz20,
    #[serde(rename = "iSWAP")]
    ISwap,
}

impl GateType {
    pub const ALL: [GateType; 3] = [GateType::Cz02, GateType::Cz20, GateType::ISwap];

    /// Transition of the modulated qubit that carries the sideband.
    pub fn ladder(self) -> Channel {
        match self {
            GateType::Cz02 => Channel::F12,
            GateType::Cz20 | GateType::ISwap => Channel::F01,
        }
    }

    /// Neighbor transition the sideband must meet.
    pub fn neighbor_transition(self) -> Channel {
        match self {
            GateType::Cz20 => Channel::F12,
            GateType::Cz02 | GateType::ISwap => Channel::F01,
        }
    }

    fn from_transitions(ladder: Channel, neighbor: Channel) -> Option<GateType> {
        GateType::ALL
            .into_iter()
            .find(|g| g.ladder() == ladder && g.neighbor_transition() == neighbor)
    }

    pub fn coupling_factor(self) -> f64 {
        match self {
            GateType::Cz02 | GateType::Cz20 => SQRT_2,
            GateType::ISwap => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateType::Cz02 => "CZ02",
            GateType::Cz20 => "CZ20",
            GateType::ISwap => "iSWAP",
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cz02" => Ok(GateType::Cz02),
            "cz20" => Ok(GateType::Cz20),
            "iswap" => Ok(GateType::ISwap),
            _ => Err(invalid(format!("unknown gate type {s:?} (CZ02, CZ20, iSWAP)"))),
        }
    }
}

/// A modulated transmon and its static neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub modulated: TransmonModel,
    pub neighbor: Transitions,
    pub coupling_mhz: f64,
}

impl PairSpec {
    pub fn new(modulated: TransmonModel, neighbor: Transitions, coupling_mhz: f64) -> Result<Self> {
        if !(coupling_mhz > 0.0 && coupling_mhz.is_finite()) {
            return Err(Error::NonPositiveCoupling(coupling_mhz));
        }
        if !(neighbor.anharmonicity() < 0.0) {
            return Err(invalid("neighbor anharmonicity f12 − f01 must be negative"));
        }
        Ok(PairSpec {
            modulated,
            neighbor,
            coupling_mhz,
        })
    }

    /// Pair with the neighbor parked at its upper flux sweet spot.
    pub fn from_specs(modulated: TransmonSpec, neighbor: TransmonSpec, coupling_mhz: f64) -> Result<Self> {
        let n = neighbor.transition_frequencies(0.0)?;
        Self::new(TransmonModel::new(modulated)?, n, coupling_mhz)
    }

    pub fn neighbor_frequency(&self, channel: Channel) -> f64 {
        match channel {
            Channel::F01 => self.neighbor.f01,
            Channel::F12 => self.neighbor.f12,
        }
    }

    pub fn target_ghz(&self, gate: GateType) -> f64 {
        self.neighbor_frequency(gate.neighbor_transition())
    }
}

/// Modulation frequency (MHz) placing sideband `k` of `f_bar` on `f_target` (GHz).
pub fn resonance_fm(f_bar: f64, k: i32, f_target: f64) -> Result<f64> {
    if k == 0 {
        return Err(invalid("sideband index must be nonzero"));
    }
    let fm = (f_target - f_bar) / k as f64;
    if !(fm > 0.0) {
        return Err(Error::WrongSideband {
            k,
            fbar_ghz: f_bar,
            target_ghz: f_target,
        });
    }
    Ok(fm * 1e3)
}

/// Period-averaged frequencies of both ladders of the modulated qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderAverages {
    pub f01: f64,
    pub f12: f64,
}

impl LadderAverages {
    pub fn compute(model: &TransmonModel, pulse: &BichromaticPulse) -> Result<Self> {
        Ok(LadderAverages {
            f01: avg_frequency(&model.f01, pulse)?,
            f12: avg_frequency(&model.f12, pulse)?,
        })
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::F01 => self.f01,
            Channel::F12 => self.f12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub gate: GateType,
    pub k: i32,
    pub f_m_mhz: f64,
}

fn check_sideband_index(k: i32, phi_dc: f64) -> Result<()> {
    if k == 0 {
        return Err(invalid("sideband index must be nonzero"));
    }
    if phi_dc == 0.0 && k % 2 != 0 {
        return Err(invalid(format!(
            "k = {k} is odd: at zero dc bias with odd p the spectrum only has even sidebands"
        )));
    }
    Ok(())
}

/// All reachable `(gate, k)` resonances at `point` with `0 < f_m ≤ max_fm_mhz`.
pub fn enumerate_resonances(
    pair: &PairSpec,
    point: &OperatingPoint,
    ks: &[i32],
    max_fm_mhz: f64,
) -> Result<Vec<Resonance>> {
    if ks.is_empty() {
        return Err(invalid("sideband set is empty"));
    }
    for &k in ks {
        check_sideband_index(k, 0.0)?;
    }
    let ladders = LadderAverages::compute(&pair.modulated, &point.pulse)?;
    let mut out = Vec::new();
    for gate in GateType::ALL {
        for &k in ks {
            match resonance_fm(ladders.get(gate.ladder()), k, pair.target_ghz(gate)) {
                Ok(f_m_mhz) if f_m_mhz <= max_fm_mhz => out.push(Resonance { gate, k, f_m_mhz }),
                Ok(_) | Err(Error::WrongSideband { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// A two-level system defect at a fixed frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tls {
    pub label: String,
    pub freq_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Offender {
    /// Sideband `j` of `ladder` resonates with a neighbor transition; `gate`
    /// names the interaction when it is one of the native gates.
    Sideband {
        ladder: Channel,
        j: i32,
        neighbor: Channel,
        gate: Option<GateType>,
    },
    Tls {
        label: String,
        freq_ghz: f64,
        ladder: Channel,
        j: i32,
    },
}

/// A spectator resonance inside the collision window. Sideband offenders
/// report the gap in `f_m` (how far the alternate resonance condition is from
/// the plan's `f_m`); TLS and static (`j = 0`) offenders report the gap in
/// frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub offender: Offender,
    pub gap_mhz: f64,
    pub bandwidth_mhz: f64,
}

fn find_collisions(
    pair: &PairSpec,
    ladders: &LadderAverages,
    f_m_mhz: f64,
    gate: GateType,
    k: i32,
    tls: &[Tls],
    bandwidth_mhz: f64,
) -> Vec<CollisionReport> {
    let mut out = Vec::new();
    for ladder in [Channel::F01, Channel::F12] {
        let fbar = ladders.get(ladder);
        for j in COLLISION_SIDEBANDS {
            let active = ladder == gate.ladder() && j == k;
            for neighbor in [Channel::F01, Channel::F12] {
                if active && neighbor == gate.neighbor_transition() {
                    continue;
                }
                let target = pair.neighbor_frequency(neighbor);
                let gap = if j == 0 {
                    (fbar - target) * 1e3
                } else {
                    (target - fbar) / j as f64 * 1e3 - f_m_mhz
                };
                if gap.abs() < bandwidth_mhz {
                    out.push(CollisionReport {
                        offender: Offender::Sideband {
                            ladder,
                            j,
                            neighbor,
                            gate: GateType::from_transitions(ladder, neighbor),
                        },
                        gap_mhz: gap,
                        bandwidth_mhz,
                    });
                }
            }
            if active {
                continue;
            }
            let f_j = fbar + j as f64 * f_m_mhz * 1e-3;
            for t in tls {
                let gap = (f_j - t.freq_ghz) * 1e3;
                if gap.abs() < bandwidth_mhz {
                    out.push(CollisionReport {
                        offender: Offender::Tls {
                            label: t.label.clone(),
                            freq_ghz: t.freq_ghz,
                            ladder,
                            j,
                        },
                        gap_mhz: gap,
                        bandwidth_mhz,
                    });
                }
            }
        }
    }
    out
}

/// Collision window, spectator defects and coupling model used when planning.
#[derive(Debug, Clone)]
pub struct PlanSettings {
    pub bandwidth_mhz: f64,
    pub tls: Vec<Tls>,
    pub coupling: Coupling,
}

impl Default for PlanSettings {
    fn default() -> Self {
        PlanSettings {
            bandwidth_mhz: DEFAULT_COLLISION_BANDWIDTH_MHZ,
            tls: Vec::new(),
            coupling: Coupling::Constant,
        }
    }
}

impl PlanSettings {
    fn validate(&self) -> Result<()> {
        if !(self.bandwidth_mhz > 0.0) {
            return Err(invalid(format!("collision bandwidth must be positive, got {}", self.bandwidth_mhz)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatePlan {
    pub gate: GateType,
    pub k: i32,
    /// Sweet spot of the modulated qubit, with `f_m` set to the resonance.
    pub point: OperatingPoint,
    pub ladders: LadderAverages,
    pub f_m_mhz: f64,
    pub epsilon: Complex64,
    pub g_eff_mhz: f64,
    pub duration_ns: f64,
    pub collisions: Vec<CollisionReport>,
}

/// Flat record written to plan JSON files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePlanRecord {
    pub gate_type: GateType,
    pub k: i32,
    pub p: u32,
    pub alpha_rad: f64,
    pub theta_rad: f64,
    pub phi_ac_phi0: f64,
    pub fbar_ghz: f64,
    pub fm_mhz: f64,
    pub g_eff_mhz: f64,
    pub duration_ns: f64,
    pub collisions: Vec<CollisionReport>,
}

impl GatePlan {
    pub fn record(&self) -> GatePlanRecord {
        let p = &self.point.pulse;
        GatePlanRecord {
            gate_type: self.gate,
            k: self.k,
            p: p.p,
            alpha_rad: p.alpha,
            theta_rad: p.theta,
            phi_ac_phi0: p.phi_ac,
            fbar_ghz: self.point.f_bar_ghz,
            fm_mhz: self.f_m_mhz,
            g_eff_mhz: self.g_eff_mhz,
            duration_ns: self.duration_ns,
            collisions: self.collisions.clone(),
        }
    }

    /// Frequency of the activating sideband (GHz).
    pub fn sideband_ghz(&self) -> f64 {
        self.ladders.get(self.gate.ladder()) + self.k as f64 * self.f_m_mhz * 1e-3
    }
}

/// Every reported collision of `plan` for the given spectators and window.
pub fn check_collisions(plan: &GatePlan, pair: &PairSpec, tls: &[Tls], bandwidth_mhz: f64) -> Result<Vec<CollisionReport>> {
    if !(bandwidth_mhz > 0.0) {
        return Err(invalid(format!("collision bandwidth must be positive, got {bandwidth_mhz}")));
    }
    Ok(find_collisions(
        pair,
        &plan.ladders,
        plan.f_m_mhz,
        plan.gate,
        plan.k,
        tls,
        bandwidth_mhz,
    ))
}

pub fn effective_coupling(g_mhz: f64, epsilon: Complex64, gate: GateType) -> f64 {
    gate.coupling_factor() * epsilon.norm() * g_mhz
}

/// Interaction time (ns): a full cycle for CZ, a full transfer for iSWAP.
pub fn gate_duration(g_eff_mhz: f64, gate: GateType) -> Result<f64> {
    if !(g_eff_mhz > 0.0) {
        return Err(Error::NonPositiveCoupling(g_eff_mhz));
    }
    Ok(match gate {
        GateType::Cz02 | GateType::Cz20 => 1e3 / (2.0 * g_eff_mhz),
        GateType::ISwap => 1e3 / (4.0 * g_eff_mhz),
    })
}

// Resonance and collisions only; the sideband weight is the expensive part.
struct Skeleton {
    point: OperatingPoint,
    ladders: LadderAverages,
    f_m_mhz: f64,
    collisions: Vec<CollisionReport>,
}

fn skeleton(pair: &PairSpec, point: &OperatingPoint, gate: GateType, k: i32, settings: &PlanSettings) -> Result<Skeleton> {
    check_sideband_index(k, point.pulse.phi_dc)?;
    let ladders = LadderAverages {
        f01: point.f_bar_ghz,
        f12: avg_frequency(&pair.modulated.f12, &point.pulse)?,
    };
    let f_m_mhz = resonance_fm(ladders.get(gate.ladder()), k, pair.target_ghz(gate))?;
    let mut point = *point;
    point.pulse.f_m_mhz = f_m_mhz;
    let collisions = find_collisions(pair, &ladders, f_m_mhz, gate, k, &settings.tls, settings.bandwidth_mhz);
    Ok(Skeleton {
        point,
        ladders,
        f_m_mhz,
        collisions,
    })
}

fn finish(pair: &PairSpec, s: Skeleton, gate: GateType, k: i32, settings: &PlanSettings) -> Result<GatePlan> {
    let spectrum = sideband_weights(&pair.modulated, gate.ladder(), &s.point.pulse, k..=k, &settings.coupling)?;
    let epsilon = spectrum.weights[0];
    let g_eff_mhz = effective_coupling(pair.coupling_mhz, epsilon, gate);
    let duration_ns = gate_duration(g_eff_mhz, gate)?;
    Ok(GatePlan {
        gate,
        k,
        point: s.point,
        ladders: s.ladders,
        f_m_mhz: s.f_m_mhz,
        epsilon,
        g_eff_mhz,
        duration_ns,
        collisions: s.collisions,
    })
}

/// Plans `gate` on sideband `k` at an operating point of the modulated qubit.
/// Collisions are reported, not rejected.
pub fn plan_gate(
    pair: &PairSpec,
    point: &OperatingPoint,
    gate: GateType,
    k: i32,
    settings: &PlanSettings,
) -> Result<GatePlan> {
    settings.validate()?;
    let s = skeleton(pair, point, gate, k, settings)?;
    finish(pair, s, gate, k, settings)
}

/// Plan at the smallest-amplitude monochromatic sweet spot.
pub fn monochromatic_plan(pair: &PairSpec, gate: GateType, k: i32, settings: &PlanSettings) -> Result<GatePlan> {
    let template = BichromaticPulse::monochromatic(0.0, 0.0, 100.0)?;
    let roots = sweet_spot_solve(&pair.modulated.f01, &template)?;
    plan_gate(pair, &roots[0], gate, k, settings)
}

/// Target-state population of a two-level exchange with coupling `g`
/// (MHz), detuning (MHz) and time (ns).
pub fn rabi_population(g_mhz: f64, detuning_mhz: f64, t_ns: f64) -> f64 {
    let half = 0.5 * detuning_mhz;
    let omega2 = g_mhz * g_mhz + half * half;
    if omega2 == 0.0 {
        return 0.0;
    }
    let s = (TAU * omega2.sqrt() * t_ns * 1e-3).sin();
    g_mhz * g_mhz / omega2 * s * s
}

/// Population map over `f_m` and interaction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChevronMap {
    pub g_eff_mhz: f64,
    pub fm0_mhz: f64,
    pub k: i32,
    pub fm_mhz: Vec<f64>,
    pub durations_ns: Vec<f64>,
    /// `population[i][j]` at `fm_mhz[i]`, `durations_ns[j]`.
    pub population: Vec<Vec<f64>>,
}

pub fn chevron_simulate(g_eff_mhz: f64, fm_grid: &[f64], duration_grid: &[f64], fm0_mhz: f64, k: i32) -> Result<ChevronMap> {
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(fm_grid) || !finite(duration_grid) || !g_eff_mhz.is_finite() || !fm0_mhz.is_finite() {
        return Err(invalid("chevron grids and parameters must be finite"));
    }
    let population = fm_grid
        .iter()
        .map(|&fm| {
            let delta = k as f64 * (fm - fm0_mhz);
            duration_grid
                .iter()
                .map(|&t| rabi_population(g_eff_mhz, delta, t))
                .collect()
        })
        .collect();
    Ok(ChevronMap {
        g_eff_mhz,
        fm0_mhz,
        k,
        fm_mhz: fm_grid.to_vec(),
        durations_ns: duration_grid.to_vec(),
        population,
    })
}

impl ChevronMap {
    fn resonant_row(&self) -> Option<usize> {
        (0..self.fm_mhz.len()).min_by(|&a, &b| {
            (self.fm_mhz[a] - self.fm0_mhz)
                .abs()
                .total_cmp(&(self.fm_mhz[b] - self.fm0_mhz).abs())
        })
    }

    /// Grid duration closest to complete transfer on the resonant row.
    pub fn transfer_time_ns(&self) -> Option<f64> {
        let row = &self.population[self.resonant_row()?];
        let j = (0..row.len()).min_by(|&a, &b| (row[a] - 1.0).abs().total_cmp(&(row[b] - 1.0).abs()))?;
        Some(self.durations_ns[j])
    }

    /// Full width (MHz of `f_m`) at half the resonant population, for the
    /// duration column `j`; crossings are linearly interpolated.
    pub fn half_max_width_mhz(&self, j: usize) -> Option<f64> {
        let c = self.resonant_row()?;
        let col: Vec<f64> = self.population.iter().map(|r| r[j]).collect();
        let half = 0.5 * col[c];
        if !(half > 0.0) {
            return None;
        }
        let cross = |range: Box<dyn Iterator<Item = usize>>| -> Option<f64> {
            let mut prev = c;
            for i in range {
                if col[i] < half {
                    let t = (col[prev] - half) / (col[prev] - col[i]);
                    return Some(self.fm_mhz[prev] + t * (self.fm_mhz[i] - self.fm_mhz[prev]));
                }
                prev = i;
            }
            None
        };
        let hi = cross(Box::new(c + 1..col.len()))?;
        let lo = cross(Box::new((0..c).rev()))?;
        Some((hi - lo).abs())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["fm_mhz", "duration_ns", "population"])?;
        for (fm, row) in self.fm_mhz.iter().zip(&self.population) {
            for (t, p) in self.durations_ns.iter().zip(row) {
                wr.write_record([fm.to_string(), t.to_string(), p.to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Search settings for [`optimize_weight`].
#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub gate: GateType,
    pub k: i32,
    pub p: u32,
    pub max_fm_mhz: f64,
    pub n_alpha: usize,
    pub n_theta: usize,
    /// Nelder–Mead polish from the best grid node.
    pub refine: bool,
    pub envelope: EnvelopeSpec,
    pub settings: PlanSettings,
}

impl OptimizeOptions {
    pub fn new(gate: GateType, k: i32) -> Self {
        OptimizeOptions {
            gate,
            k,
            p: 3,
            max_fm_mhz: DEFAULT_MAX_FM_MHZ,
            n_alpha: 64,
            n_theta: 64,
            refine: true,
            envelope: EnvelopeSpec::default(),
            settings: PlanSettings::default(),
        }
    }
}

fn node_skeletons(pair: &PairSpec, opts: &OptimizeOptions, alpha: f64, theta: f64) -> Result<Vec<Skeleton>> {
    let template = BichromaticPulse::new(0.0, 0.0, alpha, opts.p, 100.0, theta, opts.envelope)?;
    let roots = match sweet_spot_solve(&pair.modulated.f01, &template) {
        Ok(r) => r,
        Err(Error::NoRoot { .. }) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for root in roots {
        match skeleton(pair, &root, opts.gate, opts.k, &opts.settings) {
            Ok(s) => out.push(s),
            Err(Error::WrongSideband { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn feasible(s: &Skeleton, opts: &OptimizeOptions) -> bool {
    s.point.sweet && s.f_m_mhz <= opts.max_fm_mhz && s.collisions.is_empty()
}

fn best_at_node(pair: &PairSpec, opts: &OptimizeOptions, alpha: f64, theta: f64) -> Result<Option<GatePlan>> {
    let mut best: Option<GatePlan> = None;
    for s in node_skeletons(pair, opts, alpha, theta)? {
        if !feasible(&s, opts) {
            continue;
        }
        let plan = finish(pair, s, opts.gate, opts.k, &opts.settings)?;
        if best.as_ref().is_none_or(|b| plan.epsilon.norm() > b.epsilon.norm()) {
            best = Some(plan);
        }
    }
    Ok(best)
}

// Follows the root branch nearest `phi_ac` so the simplex sees a continuous objective.
fn tracked_plan(pair: &PairSpec, opts: &OptimizeOptions, alpha: f64, theta: f64, phi_ac: f64) -> Result<Option<GatePlan>> {
    if !(0.0..=FRAC_PI_2).contains(&alpha) {
        return Ok(None);
    }
    let nearest = node_skeletons(pair, opts, alpha, wrap_phase(theta))?
        .into_iter()
        .min_by(|a, b| {
            (a.point.pulse.phi_ac - phi_ac)
                .abs()
                .total_cmp(&(b.point.pulse.phi_ac - phi_ac).abs())
        });
    match nearest {
        Some(s) if feasible(&s, opts) => Ok(Some(finish(pair, s, opts.gate, opts.k, &opts.settings)?)),
        _ => Ok(None),
    }
}

/// Maximizes `|ε_k|` over the sweet-spot manifold at zero dc bias: a coarse
/// `(α, θ)` grid, then Nelder–Mead from the best node. Candidates that are
/// not sweet spots, exceed `max_fm_mhz` or collide are rejected. Ties go to
/// the lowest `α`, then the lowest `θ`.
pub fn optimize_weight(pair: &PairSpec, opts: &OptimizeOptions) -> Result<GatePlan> {
    opts.settings.validate()?;
    check_sideband_index(opts.k, 0.0)?;
    if opts.n_alpha < 2 || opts.n_theta < 1 {
        return Err(invalid("search grid needs at least two α and one θ value"));
    }
    let (alphas, thetas) = default_grid(opts.n_alpha, opts.n_theta);
    let nodes: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| thetas.iter().map(move |&t| (a, t)))
        .collect();
    let results: Vec<Result<Option<GatePlan>>> = nodes
        .par_iter()
        .map(|&(a, t)| best_at_node(pair, opts, a, t))
        .collect();

    let mut best: Option<GatePlan> = None;
    for r in results {
        if let Some(plan) = r? {
            if best.as_ref().is_none_or(|b| plan.epsilon.norm() > b.epsilon.norm()) {
                best = Some(plan);
            }
        }
    }
    let Some(mut best) = best else {
        return Err(Error::NoFeasiblePoint(format!(
            "no collision-free {} k = {} sweet spot with f_m <= {} MHz on the {}x{} grid",
            opts.gate, opts.k, opts.max_fm_mhz, opts.n_alpha, opts.n_theta
        )));
    };

    if opts.refine {
        let step = [FRAC_PI_2 / (opts.n_alpha - 1) as f64, TAU / opts.n_theta as f64];
        let x0 = [best.point.pulse.alpha, best.point.pulse.theta];
        let branch = best.point.pulse.phi_ac;
        let (x, _) = nelder_mead(
            |x| {
                Ok(tracked_plan(pair, opts, x[0], x[1], branch)?
                    .map_or(0.0, |p| -p.epsilon.norm()))
            },
            &x0,
            &step,
            120,
            1e-7,
        )?;
        if let Some(plan) = tracked_plan(pair, opts, x[0], x[1], branch)? {
            if plan.epsilon.norm() > best.epsilon.norm() {
                best = plan;
            }
        }
    }
    Ok(best)
}
