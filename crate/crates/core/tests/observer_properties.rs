use nalgebra::DVector;
use proptest::prelude::*;

use dob_cbf::observer::{
    classical_error_bound, error_bound, estimate_input_disturbance, observer_init, observer_output, ObserverConfig,
    ObserverError, DEFAULT_CHANNEL_FLOOR,
};
use dob_cbf::sim::rk4_step;

/// Integrates `ż = a(t) + b(t)` together with the observer's auxiliary state
/// and returns the worst `|b − b̂| − M_b` and the final error.
fn track(config: ObserverConfig, b_hat0: f64, a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64, t_end: f64) -> (f64, f64) {
    let dt = 1e-4;
    let k = config.k_b;
    let obs = observer_init(config, 0.0, b_hat0).unwrap();
    let mut s = DVector::from_column_slice(&[0.0, obs.epsilon_b]);
    let (mut worst, mut last) = (f64::NEG_INFINITY, 0.0);
    let steps = (t_end / dt).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let mut o = obs;
        o.epsilon_b = s[1];
        last = b(t) - observer_output(&o, s[0]);
        worst = worst.max(last.abs() - error_bound(&config, t).unwrap());
        s = rk4_step(
            |t, s: &DVector<f64>| DVector::from_column_slice(&[a(t) + b(t), -k * s[1] + k * a(t) + k * k * s[0]]),
            t,
            &s,
            dt,
        )
        .unwrap();
    }
    (worst, last)
}

#[test]
fn estimate_decays_to_zero_without_disturbance() {
    let cfg = ObserverConfig::new(50.0, 0.0, 2.0, 0.0).unwrap();
    let (worst, last) = track(cfg, 2.0, |t| (3.0 * t).cos(), |_| 0.0, 0.5);
    assert!(worst <= 1e-9, "envelope slack {worst}");
    assert!(last.abs() <= 2.0 * (-50.0_f64 * 0.5).exp() * 1.001, "final error {last}");
}

#[test]
fn doubling_the_gain_halves_the_steady_error_radius() {
    let cfg = ObserverConfig::new(40.0, 3.0, 0.0, 0.0).unwrap();
    let doubled = ObserverConfig { k_b: 80.0, ..cfg };
    assert!((cfg.steady_state_bound() - 2.0 * doubled.steady_state_bound()).abs() <= 1e-15);
    assert!((error_bound(&cfg, 10.0).unwrap() - 2.0 * error_bound(&doubled, 10.0).unwrap()).abs() <= 1e-12);
}

#[test]
fn envelope_rejects_times_before_start() {
    let cfg = ObserverConfig::new(10.0, 1.0, 1.0, 2.0).unwrap();
    assert!(matches!(error_bound(&cfg, 1.0), Err(ObserverError::BeforeStart { .. })));
    assert!(ObserverConfig::new(0.0, 1.0, 1.0, 0.0).is_err());
    assert!(ObserverConfig::new(1.0, -1.0, 1.0, 0.0).is_err());
}

#[test]
fn singular_channel_is_refused() {
    let lie_g = DVector::from_element(1, 1e-12);
    let err = estimate_input_disturbance(1.0, 0.1, &lie_g, DEFAULT_CHANNEL_FLOOR).unwrap_err();
    assert!(matches!(err, ObserverError::SingularChannel { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sinusoidal_disturbance_stays_in_envelope(
        amp in 0.1..5.0f64,
        omega in 0.5..30.0f64,
        phase in 0.0..std::f64::consts::TAU,
        k_b in 10.0..200.0f64,
        b_hat0 in -2.0..2.0f64,
    ) {
        let b = move |t: f64| amp * (omega * t + phase).sin();
        let e0 = (b(0.0) - b_hat0).abs();
        let cfg = ObserverConfig::new(k_b, amp * omega, e0, 0.0).unwrap();
        let (worst, _) = track(cfg, b_hat0, |t| -(2.0 * t).sin(), b, 0.6);
        prop_assert!(worst <= 1e-7, "slack {worst}");
    }

    #[test]
    fn envelope_is_tight_monotone_and_starts_at_initial_error(
        k_b in 0.1..500.0f64,
        b_h in 0.0..100.0f64,
        e_b0 in 0.0..10.0f64,
        t1 in 0.0..5.0f64,
        dt in 0.0..5.0f64,
    ) {
        let cfg = ObserverConfig::new(k_b, b_h, e_b0, 0.0).unwrap();
        let (m1, m2) = (error_bound(&cfg, t1).unwrap(), error_bound(&cfg, t1 + dt).unwrap());
        prop_assert!(m1 <= classical_error_bound(&cfg, t1).unwrap() + 1e-12);
        prop_assert!((error_bound(&cfg, 0.0).unwrap() - e_b0).abs() <= 1e-9 * (1.0 + e_b0));
        // moves monotonically toward the steady radius
        let ss = cfg.steady_state_bound();
        if e_b0 >= ss {
            prop_assert!(m2 <= m1 + 1e-12 && m2 >= ss - 1e-12);
        } else {
            prop_assert!(m2 >= m1 - 1e-12 && m2 <= ss + 1e-12);
        }
    }

    #[test]
    fn input_estimate_inverts_the_channel(b_hat in -10.0..10.0f64, m_b in 0.0..5.0f64, g in 0.01..5.0f64, sign in prop::bool::ANY) {
        let g = if sign { g } else { -g };
        let (d_hat, m_d) = estimate_input_disturbance(b_hat, m_b, &DVector::from_element(1, g), DEFAULT_CHANNEL_FLOOR).unwrap();
        prop_assert!((d_hat[0] * g - b_hat).abs() <= 1e-12 * (1.0 + b_hat.abs()));
        prop_assert!((m_d * g.abs() - m_b).abs() <= 1e-12 * (1.0 + m_b));
    }
}
