use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use dob_cbf::dynamics::{
    acc_dynamics, acc_safety_specs, lqr_baseline, riccati_residual, linearize, segway_dynamics, segway_safety_spec,
    AccParams, DisturbanceSignal, SegwayParams,
};
use dob_cbf::safety::ClassKFunction;
use dob_cbf::State;

/// Central difference of `f` along the direction `xdot`.
fn directional(f: impl Fn(&State) -> f64, x: &State, xdot: &DVector<f64>) -> f64 {
    let h = 1e-6;
    (f(&(x + xdot * h)) - f(&(x - xdot * h))) / (2.0 * h)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn acc_barrier_rate_matches_lie_derivatives(
        vl in 5.0..30.0f64, vf in 0.0..35.0f64, gap in 5.0..150.0f64,
        u in -6000.0..6000.0f64, d in -2000.0..2000.0f64, t in 0.0..20.0f64,
    ) {
        let params = AccParams::default();
        let plant = acc_dynamics(&params, Some(DisturbanceSignal::Constant { value: d })).unwrap();
        let (barrier, lyap) = acc_safety_specs(&params, ClassKFunction::linear(1.0).unwrap(), 5.0, 100.0).unwrap();
        let x = DVector::from_column_slice(&[vl, vf, gap]);
        let uv = DVector::from_element(1, u);
        let xdot = plant.true_rate(t, &x, &uv);

        // the gap closes at the relative speed
        prop_assert!(close(xdot[2], vl - vf, 1e-12));

        let hdot = directional(|x| barrier.h(x), &x, &xdot);
        let lie = barrier.drift_term(&x) + barrier.lie_g(&x)[0] * (u + d);
        prop_assert!(close(hdot, lie, 1e-6), "{hdot} vs {lie}");

        // the observer's disturbance term b is the gradient of h along the disturbance
        let grad = barrier.output_gradient(&x).unwrap();
        let b = grad.dot(&plant.disturbance_term(t, &x, &uv));
        prop_assert!(close(b, barrier.lie_g(&x)[0] * d, 1e-12));

        let nominal = plant.nominal_rate(&x, &uv);
        let vdot = directional(|x| lyap.v(x), &x, &nominal);
        prop_assert!(close(vdot, lyap.lie_f(&x) + lyap.lie_g(&x)[0] * u, 1e-6));
    }

    #[test]
    fn segway_exponential_barrier_derivatives_are_consistent(
        p in -2.0..2.0f64, v in -2.0..2.0f64, theta in -0.5..0.5f64, omega in -2.0..2.0f64, u in -20.0..20.0f64,
    ) {
        let params = SegwayParams::default();
        let plant = segway_dynamics(&params).unwrap();
        let barrier = segway_safety_spec(&params, &[-2.0, -4.0]).unwrap();
        let x = DVector::from_column_slice(&[p, v, theta, omega]);
        let uv = DVector::from_element(1, u);
        let nominal = plant.nominal_rate(&x, &uv);
        let eta = barrier.eta(&x);

        prop_assert_eq!(barrier.relative_degree(), 2);
        prop_assert!(close(eta[0], barrier.h(&x), 1e-15));
        // ḣ does not depend on u, so L_g h = 0
        prop_assert!(close(directional(|x| barrier.h(x), &x, &nominal), eta[1], 1e-6));
        prop_assert_eq!(barrier.lie_g(&x)[0], 0.0);

        let z = |x: &State| barrier.observed_output(x);
        prop_assert!(close(directional(z, &x, &nominal), barrier.known_rate(&x, &uv), 1e-6));

        // under the inclined plant the extra rate of ḣ is the gradient times the unmatched term
        let truth = plant.true_rate(0.0, &x, &uv);
        let b = barrier.output_gradient(&x).unwrap().dot(&plant.disturbance_term(0.0, &x, &uv));
        prop_assert!(close(directional(z, &x, &truth), barrier.known_rate(&x, &uv) + b, 1e-6));
    }
}

#[test]
fn flat_segway_has_no_unmatched_term() {
    let params = SegwayParams { incline: 0.0, ..SegwayParams::default() };
    let plant = segway_dynamics(&params).unwrap();
    let x = DVector::from_column_slice(&[0.3, -0.2, 0.1, 0.4]);
    let u = DVector::from_element(1, 3.0);
    assert!(plant.disturbance_term(1.0, &x, &u).amax() <= 1e-12);
}

#[test]
fn segway_lqr_stabilises_the_linearisation() {
    let params = SegwayParams::default();
    let q = [10.0, 1.0, 10.0, 1.0];
    let sol = lqr_baseline(&params, &q, 1.0).unwrap();
    let plant = segway_dynamics(&params).unwrap();
    let (a, b) = linearize(&plant, &DVector::zeros(4), &DVector::zeros(1));
    let qm = DMatrix::from_diagonal(&DVector::from_column_slice(&q));
    let res = riccati_residual(&a, &b, &qm, &DMatrix::from_element(1, 1, 1.0), &sol.riccati);
    assert!(res <= 1e-8 * (1.0 + sol.riccati.norm()), "Riccati residual {res}");
    let closed = &a - &b * &sol.gain;
    assert!(closed.complex_eigenvalues().iter().all(|e| e.re < 0.0));
}
