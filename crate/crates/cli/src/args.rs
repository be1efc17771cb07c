use std::path::PathBuf;

use bichro_core::gates::{GateType, Tls, DEFAULT_COLLISION_BANDWIDTH_MHZ, DEFAULT_MAX_FM_MHZ};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Dynamical sweet spots, sideband spectra and parametric gate planning for
/// flux-modulated transmons.
///
/// Flux is in units of Φ0, frequencies in MHz unless a flag says GHz, and
/// the angles α and θ are fractions of 2π.
#[derive(Debug, Parser)]
#[command(name = "bichro", version)]
pub struct Cli {
    /// Device description (JSON).
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed for every random stream; recorded in all outputs.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads for grid searches (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum Command {
    /// f̄ and flux sensitivities against modulation amplitude.
    Sweep(SweepArgs),
    /// Sweet-spot amplitudes over an (α, θ) grid.
    Atlas(AtlasArgs),
    /// Gate plan at a sweet spot, plus resonance curves against amplitude.
    Plan(PlanArgs),
    /// Population transfer against modulation frequency and duration.
    Chevron(ChevronArgs),
    /// Virtual θ0 and transfer-function calibration.
    Calibrate(CalibrateArgs),
}

/// Pulse shape shared by the commands that take one.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ShapeArgs {
    /// Mixing angle α / 2π (0 is a pure fundamental).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Relative phase θ / 2π.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Frequency multiplier of the second tone (odd).
    #[arg(long, default_value_t = 3)]
    pub p: u32,
    /// Fundamental modulation frequency, MHz.
    #[arg(long, default_value_t = 100.0)]
    pub fm: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub qubit: String,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Static bias, Φ0.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phi_dc: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi_ac_min: f64,
    #[arg(long, default_value_t = 0.9)]
    pub phi_ac_max: f64,
    #[arg(long, default_value_t = 91)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AtlasArgs {
    #[arg(long)]
    pub qubit: String,
    #[arg(long, default_value_t = 3)]
    pub p: u32,
    #[arg(long, default_value_t = 100.0)]
    pub fm: f64,
    /// α nodes over [0, π/2].
    #[arg(long, default_value_t = 32)]
    pub n_alpha: usize,
    /// θ nodes over [-π, π).
    #[arg(long, default_value_t = 32)]
    pub n_theta: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GateArgs {
    /// Modulated qubit.
    #[arg(long)]
    pub modulated: Option<String>,
    /// Static neighbor.
    #[arg(long)]
    pub neighbor: Option<String>,
    /// CZ02, CZ20 or iSWAP.
    #[arg(long, default_value = "CZ02", value_parser = parse_gate)]
    pub gate: GateType,
    /// Activating sideband (even at zero bias).
    #[arg(long, default_value_t = -2, allow_negative_numbers = true)]
    pub k: i32,
    #[command(flatten)]
    pub shape: ShapeArgs,
    /// Which sweet spot along the amplitude axis (0 = smallest amplitude).
    #[arg(long, default_value_t = 0)]
    pub root: usize,
    /// Search the sweet-spot manifold for the largest sideband weight
    /// instead of using --alpha/--theta.
    #[arg(long)]
    pub optimize: bool,
    /// Grid size per axis for --optimize.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Upper limit on f_m for --optimize, MHz.
    #[arg(long, default_value_t = DEFAULT_MAX_FM_MHZ)]
    pub max_fm: f64,
    /// Collision window, MHz.
    #[arg(long, default_value_t = DEFAULT_COLLISION_BANDWIDTH_MHZ)]
    pub bandwidth: f64,
    /// Spectator defect, `label=freq_ghz`; repeatable.
    #[arg(long = "tls", value_parser = parse_tls)]
    pub tls: Vec<Tls>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    #[command(flatten)]
    pub gate: GateArgs,
    /// Sidebands drawn in the resonance curves.
    #[arg(long, value_delimiter = ',', default_value = "-2,-4,-6,-8", allow_hyphen_values = true)]
    pub ks: Vec<i32>,
    /// Amplitude samples for the resonance curves over [0, 0.9] Φ0.
    #[arg(long, default_value_t = 91)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ChevronArgs {
    #[command(flatten)]
    pub gate: GateArgs,
    /// Use this effective coupling (MHz) instead of planning one; needs --fm0.
    #[arg(long, requires = "fm0")]
    pub g_eff: Option<f64>,
    /// Resonant modulation frequency, MHz; needs --g-eff.
    #[arg(long, requires = "g_eff")]
    pub fm0: Option<f64>,
    /// Half-width of the f_m axis, MHz (default 6 g_eff / |k|).
    #[arg(long)]
    pub fm_span: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub fm_points: usize,
    /// Longest interaction time, ns (default two full cycles).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    pub t_points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Scenario file (JSON); `qubit` may name a device qubit.
    #[arg(long)]
    pub scenario: PathBuf,
}

fn parse_gate(s: &str) -> Result<GateType, String> {
    s.parse().map_err(|e: bichro_core::Error| e.to_string())
}

fn parse_tls(s: &str) -> Result<Tls, String> {
    let (label, freq) = s.split_once('=').ok_or("expected label=freq_ghz")?;
    let freq_ghz = freq.trim().parse().map_err(|e| format!("bad TLS frequency {freq:?}: {e}"))?;
    Ok(Tls {
        label: label.trim().to_string(),
        freq_ghz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_values_parse() {
        let cli = Cli::try_parse_from([
            "bichro", "plan", "--modulated", "q1", "--neighbor", "q2", "--k", "-4", "--theta", "-0.06", "--ks",
            "-2,-4", "--tls", "d=4.2",
        ])
        .unwrap();
        let Command::Plan(p) = cli.command else { panic!() };
        assert_eq!(p.gate.k, -4);
        assert_eq!(p.gate.shape.theta, -0.06);
        assert_eq!(p.ks, vec![-2, -4]);
        assert_eq!(p.gate.tls[0].freq_ghz, 4.2);
    }

    #[test]
    fn chevron_override_needs_both() {
        let r = Cli::try_parse_from([
            "bichro", "chevron", "--modulated", "a", "--neighbor", "b", "--g-eff", "2",
        ]);
        assert!(r.is_err());
    }
}
