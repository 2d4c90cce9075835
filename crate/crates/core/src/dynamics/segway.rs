//! Planar Segway on an incline: state `x = [p, ṗ, θ, θ̇]`.
//!
//! ```text
//!   M(ψ) [p̈ θ̈]ᵀ + [0, −m g L sin ψ]ᵀ + C(θ̇, ψ) [ṗ θ̇]ᵀ = [K_m/R, −K_m]ᵀ u,   ψ = θ + φ
//! ```
//!
//! The controller's model assumes a flat surface (`φ = 0`); the plant uses the
//! scenario incline and the difference is the unmatched disturbance.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use super::{require, DisturbanceChannel, DynamicsError, PlantModel};
use crate::safety::{BarrierSpec, SafetyError};
use crate::State;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegwayParams {
    /// Total translational mass [kg].
    pub m0: f64,
    /// Pendulum (body) mass [kg].
    pub m: f64,
    /// Distance from the wheel axle to the body centre of mass [m].
    pub length: f64,
    /// Pitch inertia about the axle [kg·m²].
    pub j0: f64,
    /// Motor back-EMF / friction coefficient [N·s].
    pub b_t: f64,
    /// Wheel radius [m].
    pub radius: f64,
    /// Motor torque constant [N·m/V].
    pub k_m: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
    /// Surface incline φ seen by the true plant [rad].
    pub incline: f64,
    /// `[p, ṗ, θ, θ̇]` at t = 0.
    pub initial_state: [f64; 4],
    /// Reference state for the LQR baseline.
    pub goal_state: [f64; 4],
    /// Symmetric input limit [V].
    pub input_bound: f64,
}

impl Default for SegwayParams {
    fn default() -> Self {
        Self {
            m0: 52.71,
            m: 44.798,
            length: 0.169,
            j0: 3.0,
            b_t: 2.0,
            radius: 0.195,
            k_m: 2.0,
            gravity: 9.81,
            incline: 20.0_f64.to_radians(),
            initial_state: [0.0, 0.0, 0.138, 0.0],
            goal_state: [1.0, 0.0, 0.138, 0.0],
            input_bound: 20.0,
        }
    }
}

impl SegwayParams {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (name, v) in [
            ("m0", self.m0),
            ("m", self.m),
            ("length", self.length),
            ("j0", self.j0),
            ("radius", self.radius),
            ("gravity", self.gravity),
            ("input_bound", self.input_bound),
        ] {
            require(name, "positive", v > 0.0 && v.is_finite(), v)?;
        }
        require("b_t", "non-negative", self.b_t >= 0.0, self.b_t)?;
        require("k_m", "non-zero", self.k_m != 0.0, self.k_m)?;
        require("incline", "finite", self.incline.is_finite(), self.incline)?;
        // det M(ψ) = m0 J0 − (m L cos ψ)² is smallest at cos ψ = ±1
        let worst = self.m0 * self.j0 - (self.m * self.length).powi(2);
        if worst <= 1e-9 * self.m0 * self.j0 {
            return Err(DynamicsError::SingularMassMatrix(worst));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.initial_state)
    }

    pub fn goal_state(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.goal_state)
    }

    /// `[p̈, θ̈]` for incline `phi`.
    fn accelerations(&self, phi: f64, x: &State, u: f64) -> Vector2<f64> {
        let (pd, theta, thetad) = (x[1], x[2], x[3]);
        let psi = theta + phi;
        let mass = segway_mass_matrix(self, psi);
        let ml = self.m * self.length;
        let damping = Vector2::new(
            self.b_t / self.radius * pd - (self.b_t + ml * thetad * psi.sin()) * thetad,
            -self.b_t * pd + self.b_t * self.radius * thetad,
        );
        let gravity = Vector2::new(0.0, -ml * self.gravity * psi.sin());
        let input = Vector2::new(self.k_m / self.radius, -self.k_m) * u;
        let rhs = input - damping - gravity;
        solve2(&mass, &rhs)
    }

    /// Column `M⁻¹ [K_m/R, −K_m]ᵀ`.
    fn input_column(&self, phi: f64, x: &State) -> Vector2<f64> {
        let mass = segway_mass_matrix(self, x[2] + phi);
        solve2(&mass, &Vector2::new(self.k_m / self.radius, -self.k_m))
    }

    fn drift(&self, phi: f64, x: &State) -> DVector<f64> {
        let acc = self.accelerations(phi, x, 0.0);
        DVector::from_column_slice(&[x[1], acc[0], x[3], acc[1]])
    }

    fn input_matrix(&self, phi: f64, x: &State) -> DMatrix<f64> {
        let col = self.input_column(phi, x);
        DMatrix::from_column_slice(4, 1, &[0.0, col[0], 0.0, col[1]])
    }
}

fn solve2(m: &Matrix2<f64>, rhs: &Vector2<f64>) -> Vector2<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Vector2::new(
        (m[(1, 1)] * rhs[0] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - m[(1, 0)] * rhs[0]) / det,
    )
}

/// `[[m0, m L cos ψ], [m L cos ψ, J0]]`.
pub fn segway_mass_matrix(params: &SegwayParams, psi: f64) -> Matrix2<f64> {
    let off = params.m * params.length * psi.cos();
    Matrix2::new(params.m0, off, off, params.j0)
}

/// Flat-ground nominal model, with the incline effect
/// `d(x, u, φ) = Δf(x, φ) + Δg(x, φ) u` as its unmatched disturbance.
pub fn segway_dynamics(params: &SegwayParams) -> Result<PlantModel, DynamicsError> {
    params.validate()?;
    let nominal = params.clone();
    let nominal_g = params.clone();
    let truth = params.clone();
    let phi = params.incline;
    let unmatched = move |_t: f64, x: &State, u: &DVector<f64>| {
        let true_rate = truth.drift(phi, x) + truth.input_matrix(phi, x) * u;
        let nominal_rate = truth.drift(0.0, x) + truth.input_matrix(0.0, x) * u;
        true_rate - nominal_rate
    };
    Ok(PlantModel::new(
        4,
        1,
        move |x| nominal.drift(0.0, x),
        move |x| nominal_g.input_matrix(0.0, x),
        DisturbanceChannel::Unmatched(std::sync::Arc::new(unmatched)),
    ))
}

/// Pitch barrier `h = π/10 − θ²` (relative degree two) as an exponential CBF
/// with gain placed at `poles`.
pub fn segway_safety_spec(params: &SegwayParams, poles: &[f64]) -> Result<BarrierSpec, SafetyError> {
    if poles.len() != 2 {
        return Err(SafetyError::GainLength { found: poles.len(), expected: 2 });
    }
    let gain = crate::safety::ecbf_gain_from_poles(poles)?;
    let limit = std::f64::consts::PI / 10.0;
    let pf = params.clone();
    let pg = params.clone();
    let spec = BarrierSpec::higher_order(
        2,
        move |x| limit - x[2] * x[2],
        move |x| DVector::from_column_slice(&[limit - x[2] * x[2], -2.0 * x[2] * x[3]]),
        move |x| {
            let f = pf.drift(0.0, x);
            -2.0 * x[3] * x[3] - 2.0 * x[2] * f[3]
        },
        move |x| DVector::from_element(1, -2.0 * x[2] * pg.input_column(0.0, x)[1]),
        gain,
    )?
    .with_lie_g(|_| DVector::zeros(1))
    .with_output_gradient(|x| DVector::from_column_slice(&[0.0, 0.0, -2.0 * x[3], -2.0 * x[2]]));
    Ok(spec)
}
