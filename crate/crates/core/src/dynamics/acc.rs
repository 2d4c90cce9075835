//! Adaptive cruise control: state `x = [v_l, v_f, D]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{require, DisturbanceChannel, DisturbanceSignal, DynamicsError, PlantModel};
use crate::safety::{BarrierSpec, ClassKFunction, LyapunovSpec, SafetyError};

/// Vehicle and scenario parameters, SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccParams {
    /// Following-car mass [kg].
    pub mass: f64,
    /// Rolling-resistance coefficients of `F_r = f0 + f1 v + f2 v²` [N, N·s/m, N·s²/m²].
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
    /// Lead-car acceleration [m/s²].
    pub lead_accel: f64,
    /// Desired cruise speed [m/s].
    pub desired_speed: f64,
    /// Desired time headway [s].
    pub time_headway: f64,
    /// Input limit as a fraction of `m g`.
    pub input_bound_fraction: f64,
    /// `[v_l, v_f, D]` at t = 0 [m/s, m/s, m].
    pub initial_state: [f64; 3],
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            mass: 1650.0,
            f0: 0.1,
            f1: 5.0,
            f2: 0.25,
            gravity: 9.81,
            lead_accel: 0.0,
            desired_speed: 22.0,
            time_headway: 1.8,
            input_bound_fraction: 0.4,
            initial_state: [18.0, 12.0, 80.0],
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        require("mass", "positive", self.mass > 0.0, self.mass)?;
        require("gravity", "positive", self.gravity > 0.0, self.gravity)?;
        require("time_headway", "positive", self.time_headway > 0.0, self.time_headway)?;
        require("desired_speed", "positive", self.desired_speed > 0.0, self.desired_speed)?;
        require(
            "input_bound_fraction",
            "positive",
            self.input_bound_fraction > 0.0,
            self.input_bound_fraction,
        )?;
        for (name, v) in [("f0", self.f0), ("f1", self.f1), ("f2", self.f2)] {
            require(name, "non-negative", v >= 0.0, v)?;
        }
        Ok(())
    }

    /// `F_r(v) = f0 + f1 v + f2 v²`.
    pub fn rolling_resistance(&self, v: f64) -> f64 {
        self.f0 + self.f1 * v + self.f2 * v * v
    }

    /// Symmetric input limit `0.4 m g`.
    pub fn input_limit(&self) -> f64 {
        self.input_bound_fraction * self.mass * self.gravity
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.initial_state)
    }
}

/// `ẋ = [a_l, −F_r/m, v_l − v_f] + [0, 1/m, 0]ᵀ (u + d)`.
pub fn acc_dynamics(params: &AccParams, disturbance: Option<DisturbanceSignal>) -> Result<PlantModel, DynamicsError> {
    params.validate()?;
    let p = params.clone();
    let drift = move |x: &DVector<f64>| {
        DVector::from_column_slice(&[p.lead_accel, -p.rolling_resistance(x[1]) / p.mass, x[0] - x[1]])
    };
    let mass = params.mass;
    let input = move |_: &DVector<f64>| DMatrix::from_column_slice(3, 1, &[0.0, 1.0 / mass, 0.0]);
    let channel = match disturbance {
        Some(signal) => DisturbanceChannel::Matched(signal),
        None => DisturbanceChannel::None,
    };
    Ok(PlantModel::new(3, 1, drift, input, channel))
}

/// Barrier `h = D − τ_d v_f` and Lyapunov function `V = (v_f − v_d)²`.
pub fn acc_safety_specs(
    params: &AccParams,
    alpha: ClassKFunction,
    lambda: f64,
    relax_penalty: f64,
) -> Result<(BarrierSpec, LyapunovSpec), SafetyError> {
    let (m, tau) = (params.mass, params.time_headway);
    let p = params.clone();
    let barrier = BarrierSpec::relative_degree_one(
        move |x| x[2] - tau * x[1],
        move |x| tau * p.rolling_resistance(x[1]) / p.mass + x[0] - x[1],
        move |_| DVector::from_element(1, -tau / m),
        alpha,
    )
    .with_output_gradient(move |_| DVector::from_column_slice(&[0.0, -tau, 1.0]));

    let p = params.clone();
    let vd = params.desired_speed;
    let lyap = LyapunovSpec::new(
        move |x| (x[1] - vd).powi(2),
        move |x| -2.0 * (x[1] - vd) * p.rolling_resistance(x[1]) / p.mass,
        move |x| DVector::from_element(1, 2.0 * (x[1] - vd) / m),
        lambda,
        relax_penalty,
    )?;
    Ok((barrier, lyap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn specs() -> (BarrierSpec, LyapunovSpec) {
        acc_safety_specs(&AccParams::default(), ClassKFunction::linear(1.0).unwrap(), 5.0, 100.0).unwrap()
    }

    #[test]
    fn drift_values() {
        let p = AccParams::default();
        assert_eq!(p.rolling_resistance(0.0), 0.1);
        let plant = acc_dynamics(&p, None).unwrap();
        let f = plant.f(&p.initial_state());
        assert_eq!(f[2], 6.0);
        assert_eq!(f[0], 0.0);
        let g = plant.g(&p.initial_state());
        assert_relative_eq!(g[(1, 0)], 1.0 / 1650.0);
    }

    #[test]
    fn matched_disturbance_enters_velocity_row() {
        let p = AccParams::default();
        let plant = acc_dynamics(&p, Some(DisturbanceSignal::Constant { value: 33.0 })).unwrap();
        let x = p.initial_state();
        let u = DVector::from_element(1, 0.0);
        let diff = plant.true_rate(0.0, &x, &u) - plant.nominal_rate(&x, &u);
        assert_abs_diff_eq!(diff[1], 33.0 / 1650.0, epsilon = 1e-15);
        assert_eq!(diff[0], 0.0);
        assert_eq!(diff[2], 0.0);
    }

    #[test]
    fn initial_barrier_and_lyapunov() {
        let p = AccParams::default();
        let (b, l) = specs();
        let x = p.initial_state();
        assert_abs_diff_eq!(b.h(&x), 58.4, epsilon = 1e-12);
        assert_relative_eq!(b.lie_g(&x)[0], -1.0909090909e-3, max_relative = 1e-9);
        assert_abs_diff_eq!(l.v(&x), 100.0);
        assert_relative_eq!(l.lie_g(&x)[0], 2.0 * (12.0 - 22.0) / 1650.0);
        let lfh = 1.8 * p.rolling_resistance(12.0) / 1650.0 + 6.0;
        assert_abs_diff_eq!(b.drift_term(&x), lfh, epsilon = 1e-15);
    }

    #[test]
    fn objective_point_and_boundary() {
        let (b, l) = specs();
        let at_speed = DVector::from_column_slice(&[18.0, 22.0, 50.0]);
        assert_eq!(l.v(&at_speed), 0.0);
        assert_eq!(l.lie_f(&at_speed), 0.0);
        let boundary = DVector::from_column_slice(&[18.0, 20.0, 36.0]);
        assert_abs_diff_eq!(b.h(&boundary), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lie_derivatives_match_gradient_products() {
        let p = AccParams::default();
        let plant = acc_dynamics(&p, None).unwrap();
        let (b, _) = specs();
        let x = DVector::from_column_slice(&[17.0, 25.0, 60.0]);
        let grad = b.output_gradient(&x).unwrap();
        assert_abs_diff_eq!(grad.dot(&plant.f(&x)), b.drift_term(&x), epsilon = 1e-12);
        assert_abs_diff_eq!((grad.transpose() * plant.g(&x))[0], b.lie_g(&x)[0], epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let p = AccParams { mass: -1.0, ..AccParams::default() };
        assert!(acc_dynamics(&p, None).is_err());
    }
}
