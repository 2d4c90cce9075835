//! High-gain input disturbance observer.
//!
//! For a scalar signal obeying `ż = a + b` with known `a` and unknown `b`,
//! the observer keeps an auxiliary state `ε` and outputs
//!
//! ```text
//!   b̂ = k_b z − ε,        ε̇ = −k_b ε + k_b a + k_b² z
//! ```
//!
//! so that the error `e = b − b̂` obeys `ė = ḃ − k_b e`. If `|ḃ| ≤ b_h` and
//! `|e(t0)| ≤ e_b0`, the error stays inside the envelope returned by
//! [`error_bound`].

use nalgebra::DVector;
use thiserror::Error;

/// Smallest input-channel magnitude accepted when inverting `L_g h`.
pub const DEFAULT_CHANNEL_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObserverError {
    #[error("{name} must be {requirement}, got {value}")]
    Parameter { name: &'static str, requirement: &'static str, value: f64 },
    #[error("time {t} precedes observer start {t0}")]
    BeforeStart { t: f64, t0: f64 },
    #[error("input channel magnitude {magnitude:e} is below the conditioning floor {floor:e}")]
    SingularChannel { magnitude: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverConfig {
    /// Observer gain `k_b > 0`.
    pub k_b: f64,
    /// Bound on `|ḃ|`.
    pub b_h: f64,
    /// Bound on the initial estimation error `|b(t0) − b̂(t0)|`.
    pub e_b0: f64,
    pub t0: f64,
}

impl ObserverConfig {
    pub fn new(k_b: f64, b_h: f64, e_b0: f64, t0: f64) -> Result<Self, ObserverError> {
        let config = Self { k_b, b_h, e_b0, t0 };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ObserverError> {
        let check = |name, ok: bool, value: f64, requirement| {
            if ok {
                Ok(())
            } else {
                Err(ObserverError::Parameter { name, requirement, value })
            }
        };
        check("k_b", self.k_b > 0.0 && self.k_b.is_finite(), self.k_b, "positive and finite")?;
        check("b_h", self.b_h >= 0.0 && self.b_h.is_finite(), self.b_h, "non-negative and finite")?;
        check("e_b0", self.e_b0 >= 0.0 && self.e_b0.is_finite(), self.e_b0, "non-negative and finite")?;
        check("t0", self.t0.is_finite(), self.t0, "finite")
    }

    /// Steady-state error radius `b_h / k_b`.
    pub fn steady_state_bound(&self) -> f64 {
        self.b_h / self.k_b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub epsilon_b: f64,
    pub config: ObserverConfig,
}

impl ObserverState {
    pub fn output(&self, z: f64) -> f64 {
        observer_output(self, z)
    }

    pub fn derivative(&self, z: f64, a_known: f64) -> f64 {
        observer_derivative(self, z, a_known)
    }
}

/// Sets `ε(t0) = k_b z0 − b̂0` so the first estimate equals `b_hat0`.
pub fn observer_init(config: ObserverConfig, z0: f64, b_hat0: f64) -> Result<ObserverState, ObserverError> {
    config.validate()?;
    Ok(ObserverState { epsilon_b: config.k_b * z0 - b_hat0, config })
}

/// `b̂ = k_b z − ε`.
pub fn observer_output(state: &ObserverState, z: f64) -> f64 {
    state.config.k_b * z - state.epsilon_b
}

/// `ε̇ = −k_b ε + k_b a + k_b² z`.
pub fn observer_derivative(state: &ObserverState, z: f64, a_known: f64) -> f64 {
    auxiliary_rate(state.config.k_b, state.epsilon_b, z, a_known)
}

pub(crate) fn auxiliary_rate(k_b: f64, epsilon_b: f64, z: f64, a_known: f64) -> f64 {
    -k_b * epsilon_b + k_b * a_known + k_b * k_b * z
}

/// Estimation-error envelope
/// `M_b(t) = √((e_b0² − b_h²/k_b²) e^{−k_b (t − t0)} + b_h²/k_b²)`.
pub fn error_bound(config: &ObserverConfig, t: f64) -> Result<f64, ObserverError> {
    if t < config.t0 {
        return Err(ObserverError::BeforeStart { t, t0: config.t0 });
    }
    let steady = (config.b_h / config.k_b).powi(2);
    let decay = (-config.k_b * (t - config.t0)).exp();
    let radicand = (config.e_b0 * config.e_b0 - steady) * decay + steady;
    Ok(radicand.max(0.0).sqrt())
}

/// The looser envelope `√(e_b0² e^{−k_b (t − t0)} + b_h²/k_b²)` that ignores the
/// offset in the transient term. Kept for comparison with [`error_bound`].
pub fn classical_error_bound(config: &ObserverConfig, t: f64) -> Result<f64, ObserverError> {
    if t < config.t0 {
        return Err(ObserverError::BeforeStart { t, t0: config.t0 });
    }
    let steady = (config.b_h / config.k_b).powi(2);
    let decay = (-config.k_b * (t - config.t0)).exp();
    Ok((config.e_b0 * config.e_b0 * decay + steady).sqrt())
}

/// Recovers the input-equivalent disturbance from the estimate of its effect
/// `b = L_g h · d`.
///
/// Uses the minimum-norm inverse of the row `L_g h`, which for a single input
/// is plain division: `d̂ = b̂ / L_g h` and `M_d = M_b / |L_g h|`.
pub fn estimate_input_disturbance(
    b_hat: f64,
    m_b: f64,
    lie_g: &DVector<f64>,
    floor: f64,
) -> Result<(DVector<f64>, f64), ObserverError> {
    if m_b < 0.0 {
        return Err(ObserverError::Parameter { name: "M_b", requirement: "non-negative", value: m_b });
    }
    let norm_sq = lie_g.norm_squared();
    let magnitude = norm_sq.sqrt();
    if !(magnitude > floor) {
        return Err(ObserverError::SingularChannel { magnitude, floor });
    }
    let d_hat = lie_g * (b_hat / norm_sq);
    Ok((d_hat, m_b / magnitude))
}
