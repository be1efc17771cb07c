use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use bichro_core::calib::{run_scenario, Scenario};
use bichro_core::device::Device;
use bichro_core::gates::{
    chevron_simulate, enumerate_resonances, optimize_weight, plan_gate, GatePlan, OptimizeOptions, PairSpec,
    PlanSettings,
};
use bichro_core::modulation::{default_grid, operating_point, sweet_spot_atlas, sweet_spot_solve};
use bichro_core::pulse::{BichromaticPulse, EnvelopeSpec};
use bichro_core::transmon::TransmonModel;
use bichro_core::Error;

use crate::args::{AtlasArgs, CalibrateArgs, ChevronArgs, Cli, GateArgs, PlanArgs, ShapeArgs, SweepArgs};
use crate::output::{write, Stamp};

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidParameter(msg.into()).into()
}

fn read_input(path: &Path, what: &str) -> Result<Vec<u8>> {
    fs::read(path)
        .map_err(Error::from)
        .with_context(|| format!("reading {what} {}", path.display()))
}

struct Loaded {
    device: Device,
    bytes: Vec<u8>,
}

fn load_device(cli: &Cli) -> Result<Loaded> {
    let path = cli.spec.as_ref().ok_or_else(|| invalid("this command needs --spec <device.json>"))?;
    let bytes = read_input(path, "device file")?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| invalid("device file is not UTF-8"))?;
    let device = Device::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Loaded { device, bytes })
}

fn template(shape: &ShapeArgs, phi_dc: f64) -> Result<BichromaticPulse> {
    Ok(BichromaticPulse::new(
        phi_dc,
        0.0,
        shape.alpha * TAU,
        shape.p,
        shape.fm,
        shape.theta * TAU,
        EnvelopeSpec::default(),
    )?)
}

/// Evenly spaced samples including both ends.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn sweep(cli: &Cli, a: &SweepArgs) -> Result<()> {
    if a.points < 2 || !(a.phi_ac_max > a.phi_ac_min) || a.phi_ac_min < 0.0 {
        return Err(invalid(format!(
            "empty amplitude range [{}, {}] with {} points",
            a.phi_ac_min, a.phi_ac_max, a.points
        )));
    }
    let dev = load_device(cli)?;
    let stamp = Stamp::new("sweep", a, cli.seed, &[("spec", &dev.bytes)])?;
    let model = TransmonModel::new(dev.device.qubit(&a.qubit)?)?;
    let tpl = template(&a.shape, a.phi_dc)?;

    let mut buf = Vec::new();
    stamp.csv_header(&mut buf);
    writeln!(buf, "phi_ac_phi0,fbar_ghz,dfdac_ghz_per_phi0,dfddc_ghz_per_phi0,sweet_flag")?;
    for phi_ac in linspace(a.phi_ac_min, a.phi_ac_max, a.points) {
        let op = operating_point(&model.f01, &tpl.with_phi_ac(phi_ac))?;
        writeln!(
            buf,
            "{},{},{},{},{}",
            phi_ac, op.f_bar_ghz, op.sensitivities.d_ac, op.sensitivities.d_dc, op.sweet as u8
        )?;
    }
    let roots = match sweet_spot_solve(&model.f01, &tpl) {
        Ok(r) => r,
        Err(Error::NoRoot { .. }) => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    let list: Vec<String> = roots.iter().map(|r| format!("{:.6}", r.pulse.phi_ac)).collect();
    writeln!(buf, "# sweet_spots_phi0={}", list.join(";"))?;
    let path = write(&cli.out, "sweep.csv", &buf)?;
    println!("sweep: {} points -> {}; sweet spots at Φac = [{}]", a.points, path.display(), list.join(", "));
    Ok(())
}

pub fn atlas(cli: &Cli, a: &AtlasArgs) -> Result<()> {
    if a.n_alpha == 0 || a.n_theta == 0 {
        return Err(invalid("atlas grid needs at least one node per axis"));
    }
    let dev = load_device(cli)?;
    let stamp = Stamp::new("atlas", a, cli.seed, &[("spec", &dev.bytes)])?;
    let model = TransmonModel::new(dev.device.qubit(&a.qubit)?)?;
    let tpl = BichromaticPulse::new(0.0, 0.0, 0.0, a.p, a.fm, 0.0, EnvelopeSpec::default())?;
    let (alphas, thetas) = default_grid(a.n_alpha, a.n_theta);
    let atlas = sweet_spot_atlas(&model.f01, &tpl, &alphas, &thetas)?;

    let mut buf = Vec::new();
    stamp.csv_header(&mut buf);
    atlas.write_csv(&mut buf)?;
    let span = atlas.fbar_span_ghz() * 1e3;
    writeln!(buf, "# rows={} empty_nodes={}", atlas.entries.len(), atlas.empty_nodes.len())?;
    writeln!(buf, "# fbar_span_mhz={span}")?;
    let path = write(&cli.out, "atlas.csv", &buf)?;
    println!(
        "atlas: {} sweet spots on {}x{} nodes, f̄ span {span:.1} MHz -> {}",
        atlas.entries.len(),
        a.n_alpha,
        a.n_theta,
        path.display()
    );
    Ok(())
}

fn pair(dev: &Device, g: &GateArgs) -> Result<PairSpec> {
    match (&g.modulated, &g.neighbor) {
        (Some(m), Some(n)) => Ok(dev.pair(m, n)?),
        _ => Err(invalid("--modulated and --neighbor are required")),
    }
}

fn settings(g: &GateArgs) -> PlanSettings {
    PlanSettings {
        bandwidth_mhz: g.bandwidth,
        tls: g.tls.clone(),
        ..Default::default()
    }
}

fn gate_plan(pair: &PairSpec, g: &GateArgs) -> Result<GatePlan> {
    if g.optimize {
        let mut opts = OptimizeOptions::new(g.gate, g.k);
        opts.p = g.shape.p;
        opts.max_fm_mhz = g.max_fm;
        opts.n_alpha = g.grid;
        opts.n_theta = g.grid;
        opts.settings = settings(g);
        return Ok(optimize_weight(pair, &opts)?);
    }
    let roots = sweet_spot_solve(&pair.modulated.f01, &template(&g.shape, 0.0)?)?;
    let Some(root) = roots.get(g.root) else {
        return Err(invalid(format!(
            "--root {} requested but only {} sweet spot(s) exist for this shape",
            g.root,
            roots.len()
        )));
    };
    Ok(plan_gate(pair, root, g.gate, g.k, &settings(g))?)
}

pub fn plan(cli: &Cli, a: &PlanArgs) -> Result<()> {
    if a.points < 2 {
        return Err(invalid("resonance curves need at least two amplitude samples"));
    }
    let dev = load_device(cli)?;
    let stamp = Stamp::new("plan", a, cli.seed, &[("spec", &dev.bytes)])?;
    let pair = pair(&dev.device, &a.gate)?;
    let plan = gate_plan(&pair, &a.gate)?;

    let json = stamp.json(&plan.record())?;
    let plan_path = write(&cli.out, "plan.json", &json)?;

    // curves at the plan's pulse shape, against amplitude
    let tpl = plan.point.pulse;
    let mut buf = Vec::new();
    stamp.csv_header(&mut buf);
    writeln!(buf, "phi_ac_phi0,fbar_ghz,gate_type,k,fm_mhz,sweet_flag")?;
    for phi_ac in linspace(0.0, 0.9, a.points) {
        let op = operating_point(&pair.modulated.f01, &tpl.with_phi_ac(phi_ac))?;
        for r in enumerate_resonances(&pair, &op, &a.ks, a.gate.max_fm)? {
            writeln!(buf, "{},{},{},{},{},{}", phi_ac, op.f_bar_ghz, r.gate, r.k, r.f_m_mhz, op.sweet as u8)?;
        }
    }
    let curve_path = write(&cli.out, "resonances.csv", &buf)?;

    let mut summary = String::new();
    write!(
        summary,
        "plan: {} k={} at α/2π={:.4} θ/2π={:.4} Φac={:.4}: f̄={:.4} GHz, f_m={:.2} MHz, |ε|={:.4}, g_eff={:.3} MHz, {:.1} ns",
        plan.gate,
        plan.k,
        plan.point.pulse.alpha / TAU,
        plan.point.pulse.theta / TAU,
        plan.point.pulse.phi_ac,
        plan.point.f_bar_ghz,
        plan.f_m_mhz,
        plan.epsilon.norm(),
        plan.g_eff_mhz,
        plan.duration_ns
    )?;
    if plan.collisions.is_empty() {
        summary.push_str("; no collisions");
    } else {
        write!(summary, "; {} collision(s)", plan.collisions.len())?;
    }
    println!("{summary} -> {}, {}", plan_path.display(), curve_path.display());
    Ok(())
}

pub fn chevron(cli: &Cli, a: &ChevronArgs) -> Result<()> {
    if a.fm_points < 2 || a.t_points < 2 {
        return Err(invalid("chevron axes need at least two samples each"));
    }
    let (g_eff, fm0, inputs) = match (a.g_eff, a.fm0) {
        (Some(g), Some(f)) => (g, f, None),
        _ => {
            let dev = load_device(cli)?;
            let pair = pair(&dev.device, &a.gate)?;
            let plan = gate_plan(&pair, &a.gate)?;
            (plan.g_eff_mhz, plan.f_m_mhz, Some(dev.bytes))
        }
    };
    if !(g_eff > 0.0) {
        return Err(Error::NonPositiveCoupling(g_eff).into());
    }
    let k = a.gate.k;
    if k == 0 {
        return Err(invalid("sideband index must be nonzero"));
    }
    let span = a.fm_span.unwrap_or(6.0 * g_eff / k.unsigned_abs() as f64);
    let t_max = a.t_max.unwrap_or(1e3 / g_eff);
    if !(span > 0.0 && t_max > 0.0) {
        return Err(invalid("--fm-span and --t-max must be positive"));
    }
    let stamp = match &inputs {
        Some(b) => Stamp::new("chevron", a, cli.seed, &[("spec", b)])?,
        None => Stamp::new("chevron", a, cli.seed, &[])?,
    };
    let fms = linspace(fm0 - span, fm0 + span, a.fm_points);
    let durations = linspace(0.0, t_max, a.t_points);
    let map = chevron_simulate(g_eff, &fms, &durations, fm0, k)?;

    let mut buf = Vec::new();
    stamp.csv_header(&mut buf);
    writeln!(buf, "# g_eff_mhz={g_eff} fm0_mhz={fm0} k={k}")?;
    map.write_csv(&mut buf)?;
    let path = write(&cli.out, "chevron.csv", &buf)?;
    println!(
        "chevron: g_eff={g_eff:.3} MHz, f_m0={fm0:.3} MHz, k={k}, full transfer near {:.1} ns -> {}",
        map.transfer_time_ns().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

pub fn calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<()> {
    let bytes = read_input(&a.scenario, "scenario")?;
    let mut value: serde_json::Value =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", a.scenario.display()))?;
    let mut inputs: Vec<(&str, Vec<u8>)> = vec![("scenario", bytes.clone())];
    if let Some(name) = value.get("qubit").and_then(|q| q.as_str()).map(str::to_owned) {
        let dev = load_device(cli)?;
        let source = dev
            .device
            .qubits
            .get(&name)
            .ok_or_else(|| invalid(format!("scenario names unknown qubit {name:?}")))?;
        value["qubit"] = serde_json::to_value(source)?;
        inputs.push(("spec", dev.bytes));
    }
    let scenario: Scenario =
        serde_json::from_value(value).with_context(|| format!("parsing {}", a.scenario.display()))?;
    let refs: Vec<(&str, &[u8])> = inputs.iter().map(|(n, b)| (*n, b.as_slice())).collect();
    let stamp = Stamp::new("calibrate", a, cli.seed, &refs)?;

    let report = run_scenario(&scenario, cli.seed)?;
    let path = write(&cli.out, "calibration.json", &stamp.json(&report)?)?;
    let mut line = format!(
        "calibrate: θ0 = {:.6} rad (mod {:.6})",
        report.theta0_estimate_rad, report.theta0_branch_width_rad
    );
    if let Some(c) = &report.closed_loop {
        write!(line, ", closed-loop residual {:.3e} kHz", c.residual_khz)?;
    }
    println!("{line} -> {}", path.display());
    Ok(())
}
