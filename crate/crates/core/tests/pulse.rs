mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use bichro_core::pulse::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn precompensation_inverts_the_awg_shift(
        theta in -PI..PI,
        theta0 in -10.0f64..10.0,
        pi in 0usize..4,
    ) {
        let p = [1u32, 3, 5, 7][pi];
        let back = effective_theta_after_shift(precompensate_theta(theta, theta0, p), theta0, p);
        prop_assert!(phase_distance(back, theta) < 1e-9, "{} vs {}", back, theta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn waveform_peak_bounded(
        phi_dc in -0.3f64..0.3,
        phi_ac in 0.0f64..0.8,
        alpha in 0.0..FRAC_PI_2,
        theta in -PI..PI,
        pi in 0usize..3,
    ) {
        let p = [1u32, 3, 5][pi];
        let pulse = BichromaticPulse::new(phi_dc, phi_ac, alpha, p, 80.0, theta, EnvelopeSpec::default()).unwrap();
        let wf = synthesize(&pulse, 5.0).unwrap();
        let bound = phi_ac * (alpha.cos().abs() + alpha.sin().abs()) + 1e-12;
        for s in &wf.samples {
            prop_assert!((s - phi_dc).abs() <= bound);
        }
    }

    #[test]
    fn half_period_antiperiodic_for_odd_p(
        phi_ac in 0.0f64..0.8,
        alpha in 0.0..FRAC_PI_2,
        theta in -PI..PI,
        tau in 0.0f64..1.0,
        pi in 0usize..3,
    ) {
        let p = [1u32, 3, 5][pi];
        let pulse = BichromaticPulse::new(0.0, phi_ac, alpha, p, 100.0, theta, EnvelopeSpec::default()).unwrap();
        let a = pulse.flux_at_phase(tau);
        let b = pulse.flux_at_phase(tau + 0.5);
        prop_assert!((a + b).abs() < 1e-12);
    }
}

#[test]
fn leakage_with_long_window() {
    let env = EnvelopeSpec { flat_duration_ns: 400.0, rise_time_ns: 20.0 };
    let pulse = BichromaticPulse::new(0.0, 0.4, 0.6, 3, 100.0, 0.9, env).unwrap();
    let wf = synthesize(&pulse, 10.0).unwrap();
    let h = harmonic_amplitudes(&wf, 100.0, 12).unwrap();
    // h[i] is harmonic i + 1
    let tone = h[0].max(h[2]);
    for (i, a) in h.iter().enumerate() {
        let n = i + 1;
        if n != 1 && n != 3 {
            assert!(*a < 0.01 * tone, "harmonic {n}: {a}");
        }
    }
}

#[test]
fn envelope_edges_and_plateau() {
    let env = EnvelopeSpec::default();
    let end = env.total_duration_ns();
    assert!(env.value(0.0) < 1e-4 && env.value(end) < 1e-4);
    let r = env.rise_time_ns;
    for i in 0..=100 {
        let t = r + (end - 2.0 * r) * i as f64 / 100.0;
        assert!((env.value(t) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn transfer_function_csv_round_trip() {
    let tf = TransferFunction::new(vec![(10.0, 0.9), (100.0, 1.1), (900.0, 0.7)]).unwrap();
    let mut buf = Vec::new();
    tf.write_csv(&mut buf).unwrap();
    let back = TransferFunction::read_csv(buf.as_slice()).unwrap();
    assert_eq!(tf, back);
}
