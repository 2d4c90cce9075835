use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Time-varying scalar disturbance `d(t)`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceSignal {
    /// `A sin(ω t + φ)`
    Sinusoid { amplitude: f64, angular_frequency: f64, #[serde(default)] phase: f64 },
    Constant { value: f64 },
    #[serde(skip)]
    Custom { function: Arc<dyn Fn(f64) -> f64 + Send + Sync>, derivative_bound: Option<f64> },
}

impl DisturbanceSignal {
    pub fn sinusoid(amplitude: f64, angular_frequency: f64, phase: f64) -> Self {
        Self::Sinusoid { amplitude, angular_frequency, phase }
    }

    pub fn zero() -> Self {
        Self::Constant { value: 0.0 }
    }

    pub fn custom(function: impl Fn(f64) -> f64 + Send + Sync + 'static, derivative_bound: Option<f64>) -> Self {
        Self::Custom { function: Arc::new(function), derivative_bound }
    }

    pub fn eval(&self, t: f64) -> f64 {
        eval_disturbance(self, t)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Sinusoid { amplitude, .. } => *amplitude == 0.0,
            Self::Constant { value } => *value == 0.0,
            Self::Custom { .. } => false,
        }
    }
}

pub fn eval_disturbance(signal: &DisturbanceSignal, t: f64) -> f64 {
    match signal {
        DisturbanceSignal::Sinusoid { amplitude, angular_frequency, phase } => {
            amplitude * (angular_frequency * t + phase).sin()
        }
        DisturbanceSignal::Constant { value } => *value,
        DisturbanceSignal::Custom { function, .. } => function(t),
    }
}

/// Bound on `|ḋ|`: `|A ω|` for a sinusoid, zero for a constant.
pub fn derivative_bound(signal: &DisturbanceSignal) -> Result<f64, DynamicsError> {
    match signal {
        DisturbanceSignal::Sinusoid { amplitude, angular_frequency, .. } => {
            Ok((amplitude * angular_frequency).abs())
        }
        DisturbanceSignal::Constant { .. } => Ok(0.0),
        DisturbanceSignal::Custom { derivative_bound, .. } => derivative_bound.ok_or(DynamicsError::BoundUnavailable),
    }
}

impl fmt::Debug for DisturbanceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sinusoid { amplitude, angular_frequency, phase } => f
                .debug_struct("Sinusoid")
                .field("amplitude", amplitude)
                .field("angular_frequency", angular_frequency)
                .field("phase", phase)
                .finish(),
            Self::Constant { value } => f.debug_struct("Constant").field("value", value).finish(),
            Self::Custom { derivative_bound, .. } => {
                f.debug_struct("Custom").field("derivative_bound", derivative_bound).finish_non_exhaustive()
            }
        }
    }
}

impl PartialEq for DisturbanceSignal {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (
                Self::Sinusoid { amplitude: a1, angular_frequency: w1, phase: p1 },
                Self::Sinusoid { amplitude: a2, angular_frequency: w2, phase: p2 },
            ) => a1 == a2 && w1 == w2 && p1 == p2,
            (Self::Constant { value: a }, Self::Constant { value: b }) => a == b,
            (Self::Custom { function: f1, derivative_bound: b1 }, Self::Custom { function: f2, derivative_bound: b2 }) => {
                Arc::ptr_eq(f1, f2) && b1 == b2
            }
            _ => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn sinusoid_values() {
        let d = DisturbanceSignal::sinusoid(0.2 * 9.81, 20.0 * PI, 0.0);
        assert_eq!(d.eval(0.0), 0.0);
        assert_abs_diff_eq!(d.eval(1.0 / 40.0), 1.962, epsilon = 1e-12);
        assert_abs_diff_eq!(derivative_bound(&d).unwrap(), 1.962 * 20.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(derivative_bound(&d).unwrap(), 123.276, epsilon = 1e-3);
    }

    #[test]
    fn constant_and_custom() {
        assert_eq!(derivative_bound(&DisturbanceSignal::Constant { value: 3.0 }).unwrap(), 0.0);
        let c = DisturbanceSignal::custom(|t| t * t, None);
        assert_eq!(c.eval(3.0), 9.0);
        assert_eq!(derivative_bound(&c), Err(DynamicsError::BoundUnavailable));
        let c = DisturbanceSignal::custom(|t| t.cos(), Some(1.0));
        assert_eq!(derivative_bound(&c), Ok(1.0));
    }
}
