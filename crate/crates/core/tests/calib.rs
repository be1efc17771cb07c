mod common;

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use bichro_core::calib::*;
use bichro_core::device::QubitSource;
use bichro_core::modulation::{avg_frequency, avg_frequency_timedomain};
use bichro_core::pulse::{EnvelopeSpec, TransferFunction};
use bichro_core::transmon::{Channel, TransmonModel};
use bichro_core::Error;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn q3() -> &'static TransmonModel {
    static M: OnceLock<TransmonModel> = OnceLock::new();
    M.get_or_init(|| model(Q3))
}

fn flat() -> TransferFunction {
    TransferFunction::flat(1.0, 2000.0).unwrap()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn branch_err(est: f64, truth: f64, width: f64) -> f64 {
    wrap_to_branch(est - truth, width).abs()
}

#[test]
fn ideal_line_reports_ideal_average() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.0, flat(), 0.0).unwrap();
    let p = pulse(0.42, 0.6, 3, 0.9);
    let got = virtual_ramsey(&hw, &p, &mut rng()).unwrap();
    let want = avg_frequency_timedomain(&m.spec, Channel::F01, &p).unwrap();
    assert_eq!(got.f_bar_measured_ghz, want);
    assert_eq!(got.uncertainty_khz, 0.0);
}

#[test]
fn single_tone_is_blind_to_theta0() {
    let m = q3();
    let p = pulse(0.42, 0.0, 3, 0.9);
    let a = VirtualHardware::new(m.spec, 0.0, flat(), 0.0).unwrap().ramsey(&p, &mut rng()).unwrap();
    let b = VirtualHardware::new(m.spec, 1.3, flat(), 0.0).unwrap().ramsey(&p, &mut rng()).unwrap();
    assert!((a.f_bar_measured_ghz - b.f_bar_measured_ghz).abs() < 1e-12);
}

#[test]
fn theta0_shifts_theta_by_one_minus_p() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.3, flat(), 0.0).unwrap();
    for &t in &[-2.0, 0.1, 1.7] {
        let p = pulse(0.42, 0.6, 3, t);
        let got = hw.ramsey(&p, &mut rng()).unwrap().f_bar_measured_ghz;
        // closed-form route for the oracle
        let want = avg_frequency(&m.f01, &p.with_theta(t - 0.6)).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn out_of_band_tone_is_rejected() {
    let m = q3();
    let narrow = TransferFunction::new(vec![(50.0, 1.0), (200.0, 1.0)]).unwrap();
    let hw = VirtualHardware::new(m.spec, 0.0, narrow, 0.0).unwrap();
    let r = hw.ramsey(&pulse(0.3, 0.5, 3, 0.0), &mut rng());
    assert!(matches!(r, Err(Error::OutOfBand { .. })), "{r:?}");
}

#[test]
fn theta0_recovered_without_noise() {
    let m = q3();
    let thetas = theta_grid(32);
    for &truth in &[0.0, 0.25, -1.2] {
        let hw = VirtualHardware::new(m.spec, truth, flat(), 0.0).unwrap();
        let est = calibrate_theta0(&hw, m, &pulse(0.35, 0.5, 3, 0.0), &thetas, &mut rng()).unwrap();
        assert_eq!(est.branch_width_rad, PI);
        assert!(branch_err(est.theta0_rad, truth, PI) < 1e-3, "{truth}: {}", est.theta0_rad);
        assert!((-0.5 * PI..0.5 * PI).contains(&est.theta0_rad));
        assert_eq!(est.sweep.len(), 32);
    }
}

#[test]
fn five_tone_ratio_has_narrower_branch() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    let est = calibrate_theta0(&hw, m, &pulse(0.3, 0.5, 5, 0.0), &theta_grid(32), &mut rng()).unwrap();
    assert_eq!(est.branch_width_rad, 0.5 * PI);
    assert!(branch_err(est.theta0_rad, 0.25, 0.5 * PI) < 1e-3, "{}", est.theta0_rad);
}

#[test]
fn median_over_amplitudes_agrees() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    let amps = [0.2, 0.25, 0.3, 0.35, 0.4];
    let med = calibrate_theta0_median(&hw, m, &pulse(0.3, 0.5, 3, 0.0), &amps, &theta_grid(16), &mut rng()).unwrap();
    assert_eq!(med.per_amplitude.len(), 5);
    assert!(branch_err(med.theta0_rad, 0.25, PI) < 1e-3, "{}", med.theta0_rad);
    assert!(calibrate_theta0_median(&hw, m, &pulse(0.3, 0.5, 3, 0.0), &[], &theta_grid(16), &mut rng()).is_err());
}

#[test]
fn disjoint_windows_agree_modulo_branch() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    let probe = pulse(0.35, 0.5, 3, 0.0);
    let a: Vec<f64> = (0..16).map(|j| TAU * j as f64 / 16.0).collect();
    let b: Vec<f64> = (0..16).map(|j| 3.0 * PI + TAU * (j as f64 + 0.5) / 16.0).collect();
    let ea = calibrate_theta0(&hw, m, &probe, &a, &mut rng()).unwrap();
    let eb = calibrate_theta0(&hw, m, &probe, &b, &mut rng()).unwrap();
    assert!(branch_err(ea.theta0_rad, eb.theta0_rad, PI) < 1e-6);
}

#[test]
fn theta0_preconditions() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    // no relative phase without a second tone
    let mono = calibrate_theta0(&hw, m, &pulse(0.35, 0.0, 3, 0.0), &theta_grid(16), &mut rng());
    assert!(matches!(mono, Err(Error::FlatResponse { .. })), "{mono:?}");
    assert!(calibrate_theta0(&hw, m, &pulse(0.35, 0.5, 1, 0.0), &theta_grid(16), &mut rng()).is_err());
    assert!(calibrate_theta0(&hw, m, &pulse(0.35, 0.5, 3, 0.0), &theta_grid(8), &mut rng()).is_err());
}

#[test]
fn transfer_function_recovery() {
    let m = q3();
    let freqs = [20.0, 50.0, 100.0, 200.0, 300.0, 500.0, 800.0, 1000.0];
    let env = EnvelopeSpec::default();

    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    let cal = calibrate_transfer_function(&hw, m, &freqs, 0.3, env, &mut rng()).unwrap();
    for pt in &cal.points {
        assert!((pt.transmission - 1.0).abs() < 0.005, "{pt:?}");
    }

    let hidden = rolloff_tf();
    let hw = VirtualHardware::new(m.spec, 0.25, hidden.clone(), 0.0).unwrap();
    let cal = calibrate_transfer_function(&hw, m, &freqs, 0.3, env, &mut rng()).unwrap();
    for pt in &cal.points {
        let want = hidden.eval(pt.freq_mhz).unwrap();
        assert!((pt.transmission / want - 1.0).abs() < 0.005, "{pt:?} vs {want}");
    }
    assert!(cal.monotone_bound > 0.5 && cal.monotone_bound < 0.7);

    let r = calibrate_transfer_function(&hw, m, &freqs, 0.7, env, &mut rng());
    assert!(matches!(r, Err(Error::NonMonotoneRegion { .. })), "{r:?}");
}

#[test]
fn closed_loop_with_hidden_distortions() {
    let m = q3();
    let hidden = rolloff_tf();
    let hw = VirtualHardware::new(m.spec, 0.25, hidden, 0.0).unwrap();
    let freqs = [20.0, 50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0, 600.0, 800.0, 1000.0];
    let cal = calibrate_transfer_function(&hw, m, &freqs, 0.3, EnvelopeSpec::default(), &mut rng()).unwrap();
    let est = calibrate_theta0(&hw, m, &pulse(0.35, 0.5, 3, 0.0), &theta_grid(32), &mut rng()).unwrap();

    for &(a, alpha, theta, fm) in &[(0.45, 0.7, 0.4, 120.0), (0.5, 1.1, -2.0, 90.0), (0.3, 0.3, 2.5, 200.0)] {
        let mut desired = pulse(a, alpha, 3, theta);
        desired.f_m_mhz = fm;
        let ideal = avg_frequency_timedomain(&m.spec, Channel::F01, &desired).unwrap();
        let programmed = compensate(&desired, est.theta0_rad, &cal.tf).unwrap();
        let got = hw.ramsey(&programmed, &mut rng()).unwrap().f_bar_measured_ghz;
        assert!(((got - ideal) * 1e6).abs() < 2.0, "residual {} kHz", (got - ideal) * 1e6);
        // and without compensation the line visibly detunes the qubit
        let raw = hw.ramsey(&desired, &mut rng()).unwrap().f_bar_measured_ghz;
        assert!(((raw - ideal) * 1e6).abs() > 100.0);
    }
}

#[test]
fn theta0_estimate_unbiased_under_noise() {
    let m = q3();
    let hw = VirtualHardware::new(m.spec, 0.25, flat(), 10.0).unwrap();
    let probe = pulse(0.35, 0.5, 3, 0.0);
    let thetas = theta_grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100;
    let mean: f64 = (0..n)
        .map(|_| {
            let e = calibrate_theta0(&hw, m, &probe, &thetas, &mut rng).unwrap();
            wrap_to_branch(e.theta0_rad - 0.25, PI)
        })
        .sum::<f64>()
        / n as f64;
    assert!(mean.abs() < 3e-3, "mean error {mean}");
}

#[test]
fn incoherent_program_start_spoils_the_fit() {
    let m = q3();
    let probe = pulse(0.35, 0.5, 3, 0.0);
    let coherent = VirtualHardware::new(m.spec, 0.25, flat(), 0.0).unwrap();
    let drifting = VirtualHardware::new(m.spec, 0.25, flat(), 0.0)
        .unwrap()
        .with_randomized_theta0(true);
    let a = calibrate_theta0(&coherent, m, &probe, &theta_grid(16), &mut rng()).unwrap();
    let b = calibrate_theta0(&drifting, m, &probe, &theta_grid(16), &mut rng()).unwrap();
    // the coherent residual is only the truncation of the harmonic fit
    assert!(a.residual_rms_khz < 0.1, "{}", a.residual_rms_khz);
    assert!(b.residual_rms_khz > 1000.0 * a.residual_rms_khz, "{}", b.residual_rms_khz);
}

#[test]
fn scenario_round_trip() {
    let scenario = Scenario {
        qubit: QubitSource::Measured {
            f_max_ghz: Q3.0,
            tunability_ghz: Q3.1,
            anharmonicity_ghz: Q3.2,
        },
        hidden_theta0_rad: 0.25,
        transfer_function: rolloff_tf(),
        noise_sigma_khz: 0.0,
        randomize_theta0: false,
        envelope: EnvelopeSpec::default(),
        transfer_probe: TransferProbe {
            freqs_mhz: rolloff_tf().samples().map(|s| s.0).collect(),
            amplitude_phi0: 0.3,
        },
        theta0_probe: Theta0Probe {
            p: 3,
            alpha_rad: 0.5,
            fm_mhz: 100.0,
            amplitudes_phi0: vec![0.3, 0.35, 0.4],
            theta_points: 16,
        },
        check: Some(CheckPulse {
            phi_ac_phi0: 0.45,
            alpha_rad: 0.7,
            p: 3,
            fm_mhz: 150.0,
            theta_rad: 0.4,
        }),
    };
    let text = serde_json::to_string(&scenario).unwrap();
    let back: Scenario = serde_json::from_str(&text).unwrap();
    assert_eq!(back, scenario);

    let report = run_scenario(&scenario, 1).unwrap();
    assert!(branch_err(report.theta0_estimate_rad, 0.25, PI) < 1e-3);
    assert_eq!(report.theta0_per_amplitude.len(), 3);
    assert!(report.closed_loop.as_ref().unwrap().residual_khz.abs() < 2.0);
    assert_eq!(report, run_scenario(&scenario, 1).unwrap());
}
