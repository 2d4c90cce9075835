//! Control-affine plant models for the two case studies.

mod acc;
mod disturbance;
mod lqr;
mod segway;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::State;

pub use acc::{acc_dynamics, acc_safety_specs, AccParams};
pub use disturbance::{derivative_bound, eval_disturbance, DisturbanceSignal};
pub use lqr::{care, linearize, lqr, lqr_baseline, riccati_residual, LqrSolution};
pub use segway::{segway_dynamics, segway_mass_matrix, segway_safety_spec, SegwayParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("{name} must be {requirement}, got {value}")]
    Parameter { name: &'static str, requirement: &'static str, value: f64 },
    #[error("mass matrix is not positive definite (determinant bound {0:e})")]
    SingularMassMatrix(f64),
    #[error("a custom disturbance signal has no derivative bound")]
    BoundUnavailable,
    #[error("(A, B) is not stabilizable or the Riccati iteration failed: {0}")]
    NotStabilizable(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub(crate) fn require(
    name: &'static str,
    requirement: &'static str,
    ok: bool,
    value: f64,
) -> Result<(), DynamicsError> {
    if ok {
        Ok(())
    } else {
        Err(DynamicsError::Parameter { name, requirement, value })
    }
}

pub type DriftFn = Arc<dyn Fn(&State) -> DVector<f64> + Send + Sync>;
pub type InputMatrixFn = Arc<dyn Fn(&State) -> DMatrix<f64> + Send + Sync>;
pub type UnmatchedFn = Arc<dyn Fn(f64, &State, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// How the true disturbance enters the plant.
#[derive(Clone)]
pub enum DisturbanceChannel {
    None,
    /// `ẋ = f + g (u + d(t))`
    Matched(DisturbanceSignal),
    /// `ẋ = f + g u + d(t, x, u)` with a full state-dimension vector.
    Unmatched(UnmatchedFn),
}

impl fmt::Debug for DisturbanceChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("None"),
            Self::Matched(s) => f.debug_tuple("Matched").field(s).finish(),
            Self::Unmatched(_) => f.write_str("Unmatched(<fn>)"),
        }
    }
}

/// Nominal control-affine dynamics `ẋ = f(x) + g(x) u` plus the true
/// disturbance channel used only when integrating the plant.
#[derive(Clone)]
pub struct PlantModel {
    pub dim_state: usize,
    pub dim_input: usize,
    drift: DriftFn,
    input_matrix: InputMatrixFn,
    pub disturbance: DisturbanceChannel,
}

impl PlantModel {
    pub fn new(
        dim_state: usize,
        dim_input: usize,
        drift: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
        input_matrix: impl Fn(&State) -> DMatrix<f64> + Send + Sync + 'static,
        disturbance: DisturbanceChannel,
    ) -> Self {
        Self { dim_state, dim_input, drift: Arc::new(drift), input_matrix: Arc::new(input_matrix), disturbance }
    }

    pub fn f(&self, x: &State) -> DVector<f64> {
        (self.drift)(x)
    }

    pub fn g(&self, x: &State) -> DMatrix<f64> {
        (self.input_matrix)(x)
    }

    pub fn nominal_rate(&self, x: &State, u: &DVector<f64>) -> DVector<f64> {
        self.f(x) + self.g(x) * u
    }

    /// Input-equivalent disturbance `d(t)` for a matched channel.
    pub fn matched_disturbance(&self, t: f64) -> Option<DVector<f64>> {
        match &self.disturbance {
            DisturbanceChannel::Matched(signal) => Some(DVector::from_element(self.dim_input, signal.eval(t))),
            _ => None,
        }
    }

    /// The state-derivative contribution of the disturbance.
    pub fn disturbance_term(&self, t: f64, x: &State, u: &DVector<f64>) -> DVector<f64> {
        match &self.disturbance {
            DisturbanceChannel::None => DVector::zeros(self.dim_state),
            DisturbanceChannel::Matched(signal) => {
                self.g(x) * DVector::from_element(self.dim_input, signal.eval(t))
            }
            DisturbanceChannel::Unmatched(d) => d(t, x, u),
        }
    }

    pub fn true_rate(&self, t: f64, x: &State, u: &DVector<f64>) -> DVector<f64> {
        self.nominal_rate(x, u) + self.disturbance_term(t, x, u)
    }

    /// Same plant with the disturbance removed.
    pub fn without_disturbance(&self) -> Self {
        Self { disturbance: DisturbanceChannel::None, ..self.clone() }
    }
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("dim_state", &self.dim_state)
            .field("dim_input", &self.dim_input)
            .field("disturbance", &self.disturbance)
            .finish_non_exhaustive()
    }
}
