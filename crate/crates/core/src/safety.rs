//! Barrier and Lyapunov specifications, and the linear-in-`u` constraint rows
//! of every controller variant.
//!
//! Each row is built over the decision vector `(u, δ)`: barrier rows never
//! touch the relaxation `δ`, Lyapunov rows carry it with coefficient `−1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::qp::QpProblem;
use crate::State;

pub type ScalarFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&State) -> DVector<f64> + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error("barrier has relative degree {found}, operation requires {required}")]
    RelativeDegree { found: usize, required: &'static str },
    #[error("ECBF gain row is missing")]
    MissingEcbfGain,
    #[error("ECBF gain has length {found}, expected relative degree {expected}")]
    GainLength { found: usize, expected: usize },
    #[error("{name} must be {requirement}, got {value}")]
    Parameter { name: &'static str, requirement: &'static str, value: f64 },
    #[error("ECBF poles must be real and strictly negative, got {0}")]
    InvalidPole(f64),
    #[error("constraint row has {found} input coefficients, expected {expected}")]
    RowDimension { found: usize, expected: usize },
    #[error("the relaxation δ may only appear in Lyapunov (≤) rows")]
    RelaxedBarrierRow,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

fn require(name: &'static str, requirement: &'static str, ok: bool, value: f64) -> Result<(), SafetyError> {
    if ok {
        Ok(())
    } else {
        Err(SafetyError::Parameter { name, requirement, value })
    }
}

/// Extended class-K∞ function used in the barrier condition `ḣ ≥ −α(h)`.
#[derive(Clone)]
pub enum ClassKFunction {
    /// `α(r) = c·r`
    Linear(f64),
    /// `α(r) = c·r³`
    CubicOdd(f64),
    /// `α(r) = c·φ(r)` for a user-supplied strictly increasing odd-signed `φ`.
    Custom(f64, Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl ClassKFunction {
    pub fn linear(coefficient: f64) -> Result<Self, SafetyError> {
        require("class-K coefficient", "positive", coefficient > 0.0, coefficient)?;
        Ok(Self::Linear(coefficient))
    }

    pub fn cubic(coefficient: f64) -> Result<Self, SafetyError> {
        require("class-K coefficient", "positive", coefficient > 0.0, coefficient)?;
        Ok(Self::CubicOdd(coefficient))
    }

    pub fn custom(
        coefficient: f64,
        function: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, SafetyError> {
        require("class-K coefficient", "positive", coefficient > 0.0, coefficient)?;
        Ok(Self::Custom(coefficient, Arc::new(function)))
    }

    pub fn coefficient(&self) -> f64 {
        match self {
            Self::Linear(c) | Self::CubicOdd(c) | Self::Custom(c, _) => *c,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Linear(c) => c * r,
            Self::CubicOdd(c) => c * r * r * r,
            Self::Custom(c, f) => c * f(r),
        }
    }
}

impl fmt::Debug for ClassKFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Linear(c) => write!(f, "Linear({c})"),
            Self::CubicOdd(c) => write!(f, "CubicOdd({c})"),
            Self::Custom(c, _) => write!(f, "Custom({c}, <fn>)"),
        }
    }
}

/// Control barrier function `h` together with the Lie-derivative evaluators
/// the constraint rows need.
///
/// For relative degree one, `drift_term = L_f h` and `control_term = L_g h`.
/// For relative degree `r > 1`, `drift_term = L_f^r h`,
/// `control_term = L_g L_f^{r−1} h` and `derivative_stack` returns
/// `η_b = [h, ḣ, …, h^{(r−1)}]`.
#[derive(Clone)]
pub struct BarrierSpec {
    relative_degree: usize,
    value: ScalarFn,
    drift_term: ScalarFn,
    control_term: VectorFn,
    lie_g: Option<VectorFn>,
    derivative_stack: Option<VectorFn>,
    output_gradient: Option<VectorFn>,
    pub alpha: ClassKFunction,
    pub ecbf_gain: Option<DVector<f64>>,
}

impl BarrierSpec {
    pub fn relative_degree_one(
        value: impl Fn(&State) -> f64 + Send + Sync + 'static,
        lie_f: impl Fn(&State) -> f64 + Send + Sync + 'static,
        lie_g: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
        alpha: ClassKFunction,
    ) -> Self {
        Self {
            relative_degree: 1,
            value: Arc::new(value),
            drift_term: Arc::new(lie_f),
            control_term: Arc::new(lie_g),
            lie_g: None,
            derivative_stack: None,
            output_gradient: None,
            alpha,
            ecbf_gain: None,
        }
    }

    /// Barrier of relative degree `r ≥ 2` enforced as an exponential CBF.
    ///
    /// `alpha` is kept for reporting only; the constraint uses `gain`.
    pub fn higher_order(
        relative_degree: usize,
        value: impl Fn(&State) -> f64 + Send + Sync + 'static,
        derivative_stack: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
        lie_f_r: impl Fn(&State) -> f64 + Send + Sync + 'static,
        lie_g_lie_f_r1: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
        gain: DVector<f64>,
    ) -> Result<Self, SafetyError> {
        if relative_degree < 2 {
            return Err(SafetyError::RelativeDegree { found: relative_degree, required: "≥ 2" });
        }
        if gain.len() != relative_degree {
            return Err(SafetyError::GainLength { found: gain.len(), expected: relative_degree });
        }
        Ok(Self {
            relative_degree,
            value: Arc::new(value),
            drift_term: Arc::new(lie_f_r),
            control_term: Arc::new(lie_g_lie_f_r1),
            lie_g: None,
            derivative_stack: Some(Arc::new(derivative_stack)),
            output_gradient: None,
            alpha: ClassKFunction::Linear(1.0),
            ecbf_gain: Some(gain),
        })
    }

    /// First-order Lie derivative `L_g h` for higher-order barriers (should vanish).
    pub fn with_lie_g(mut self, lie_g: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static) -> Self {
        self.lie_g = Some(Arc::new(lie_g));
        self
    }

    /// Gradient of the observed output `h^{(r−1)}` with respect to the state.
    pub fn with_output_gradient(
        mut self,
        gradient: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.output_gradient = Some(Arc::new(gradient));
        self
    }

    pub fn without_ecbf_gain(mut self) -> Self {
        self.ecbf_gain = None;
        self
    }

    pub fn relative_degree(&self) -> usize {
        self.relative_degree
    }

    pub fn h(&self, x: &State) -> f64 {
        (self.value)(x)
    }

    /// `L_f h` for relative degree one, `L_f^r h` otherwise.
    pub fn drift_term(&self, x: &State) -> f64 {
        (self.drift_term)(x)
    }

    /// `L_g h` for relative degree one, `L_g L_f^{r−1} h` otherwise.
    pub fn control_term(&self, x: &State) -> DVector<f64> {
        (self.control_term)(x)
    }

    pub fn lie_g(&self, x: &State) -> DVector<f64> {
        if self.relative_degree == 1 {
            return self.control_term(x);
        }
        match &self.lie_g {
            Some(f) => f(x),
            None => DVector::zeros(self.control_term(x).len()),
        }
    }

    /// `η_b = [h, ḣ, …, h^{(r−1)}]`; just `[h]` for relative degree one.
    pub fn eta(&self, x: &State) -> DVector<f64> {
        match &self.derivative_stack {
            Some(f) => f(x),
            None => DVector::from_element(1, self.h(x)),
        }
    }

    /// The signal `z = h^{(r−1)}` whose derivative the observer reconstructs.
    pub fn observed_output(&self, x: &State) -> f64 {
        if self.relative_degree == 1 {
            self.h(x)
        } else {
            let eta = self.eta(x);
            eta[eta.len() - 1]
        }
    }

    /// Known part `a(x, u)` of `ż` under the nominal model.
    pub fn known_rate(&self, x: &State, u: &DVector<f64>) -> f64 {
        self.drift_term(x) + self.control_term(x).dot(u)
    }

    pub fn output_gradient(&self, x: &State) -> Option<DVector<f64>> {
        self.output_gradient.as_ref().map(|f| f(x))
    }
}

impl fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("relative_degree", &self.relative_degree)
            .field("alpha", &self.alpha)
            .field("ecbf_gain", &self.ecbf_gain)
            .finish_non_exhaustive()
    }
}

/// Exponentially stabilizing control Lyapunov function.
#[derive(Clone)]
pub struct LyapunovSpec {
    value: ScalarFn,
    lie_f: ScalarFn,
    lie_g: VectorFn,
    pub lambda: f64,
    pub relax_penalty: f64,
    /// Quadratic bounds `ζ₁‖x‖² ≤ V ≤ ζ₂‖x‖²`, metadata only.
    pub zeta: Option<(f64, f64)>,
}

impl LyapunovSpec {
    pub fn new(
        value: impl Fn(&State) -> f64 + Send + Sync + 'static,
        lie_f: impl Fn(&State) -> f64 + Send + Sync + 'static,
        lie_g: impl Fn(&State) -> DVector<f64> + Send + Sync + 'static,
        lambda: f64,
        relax_penalty: f64,
    ) -> Result<Self, SafetyError> {
        require("lambda", "positive", lambda > 0.0, lambda)?;
        require("relaxation penalty", "positive", relax_penalty > 0.0, relax_penalty)?;
        Ok(Self {
            value: Arc::new(value),
            lie_f: Arc::new(lie_f),
            lie_g: Arc::new(lie_g),
            lambda,
            relax_penalty,
            zeta: None,
        })
    }

    pub fn v(&self, x: &State) -> f64 {
        (self.value)(x)
    }

    pub fn lie_f(&self, x: &State) -> f64 {
        (self.lie_f)(x)
    }

    pub fn lie_g(&self, x: &State) -> DVector<f64> {
        (self.lie_g)(x)
    }
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("lambda", &self.lambda)
            .field("relax_penalty", &self.relax_penalty)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Geq,
    Leq,
}

/// `coeff_u · u + coeff_delta · δ  (≥ | ≤)  rhs`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintRow {
    pub coeff_u: DVector<f64>,
    pub coeff_delta: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl LinearConstraintRow {
    pub fn lhs(&self, u: &DVector<f64>, delta: f64) -> f64 {
        self.coeff_u.dot(u) + self.coeff_delta * delta
    }

    /// Signed slack: non-negative iff the row holds.
    pub fn margin(&self, u: &DVector<f64>, delta: f64) -> f64 {
        match self.sense {
            Sense::Geq => self.lhs(u, delta) - self.rhs,
            Sense::Leq => self.rhs - self.lhs(u, delta),
        }
    }

    pub fn is_satisfied(&self, u: &DVector<f64>, delta: f64, tol: f64) -> bool {
        self.margin(u, delta) >= -tol
    }

    /// The row as `a · (u, δ) ≤ b`.
    pub fn as_leq(&self) -> (Vec<f64>, f64) {
        let sign = match self.sense {
            Sense::Geq => -1.0,
            Sense::Leq => 1.0,
        };
        let mut a: Vec<f64> = self.coeff_u.iter().map(|c| sign * c).collect();
        a.push(sign * self.coeff_delta);
        (a, sign * self.rhs)
    }

    fn is_finite(&self) -> bool {
        self.coeff_u.iter().all(|c| c.is_finite()) && self.coeff_delta.is_finite() && self.rhs.is_finite()
    }

    fn shifted(mut self, delta_rhs: f64) -> Self {
        self.rhs += delta_rhs;
        self
    }
}

fn check_finite(row: LinearConstraintRow, what: &'static str) -> Result<LinearConstraintRow, SafetyError> {
    if row.is_finite() {
        Ok(row)
    } else {
        Err(SafetyError::NonFinite(what))
    }
}

/// `L_f h + L_g h·u ≥ −α(h)`.
pub fn nominal_cbf_row(x: &State, barrier: &BarrierSpec) -> Result<LinearConstraintRow, SafetyError> {
    if barrier.relative_degree() != 1 {
        return Err(SafetyError::RelativeDegree { found: barrier.relative_degree(), required: "1" });
    }
    let h = barrier.h(x);
    check_finite(
        LinearConstraintRow {
            coeff_u: barrier.control_term(x),
            coeff_delta: 0.0,
            rhs: -barrier.alpha.eval(h) - barrier.drift_term(x),
            sense: Sense::Geq,
        },
        "CBF row",
    )
}

/// `L_f h + L_g h·u ≥ −α(h) + ε‖L_g h‖²`.
pub fn issf_cbf_row(
    x: &State,
    barrier: &BarrierSpec,
    epsilon: f64,
) -> Result<LinearConstraintRow, SafetyError> {
    require("epsilon", "positive", epsilon > 0.0, epsilon)?;
    let row = nominal_cbf_row(x, barrier)?;
    let tightening = epsilon * row.coeff_u.norm_squared();
    check_finite(row.shifted(tightening), "ISSf CBF row")
}

/// `L_f h + L_g h·u + b̂ − M_b ≥ −α(h)`.
pub fn robust_cbf_row(
    x: &State,
    barrier: &BarrierSpec,
    b_hat: f64,
    m_b: f64,
) -> Result<LinearConstraintRow, SafetyError> {
    require("M_b", "non-negative", m_b >= 0.0, m_b)?;
    let row = nominal_cbf_row(x, barrier)?;
    check_finite(row.shifted(-(b_hat - m_b)), "robust CBF row")
}

/// `L_f^r h + L_g L_f^{r−1} h·u + b̂_e − M_{b_e} ≥ −K_α η_b`.
pub fn robust_ecbf_row(
    x: &State,
    barrier: &BarrierSpec,
    b_e_hat: f64,
    m_be: f64,
) -> Result<LinearConstraintRow, SafetyError> {
    let r = barrier.relative_degree();
    if r < 2 {
        return Err(SafetyError::RelativeDegree { found: r, required: "≥ 2" });
    }
    require("M_be", "non-negative", m_be >= 0.0, m_be)?;
    let gain = barrier.ecbf_gain.as_ref().ok_or(SafetyError::MissingEcbfGain)?;
    let eta = barrier.eta(x);
    if gain.len() != eta.len() {
        return Err(SafetyError::GainLength { found: gain.len(), expected: eta.len() });
    }
    check_finite(
        LinearConstraintRow {
            coeff_u: barrier.control_term(x),
            coeff_delta: 0.0,
            rhs: -gain.dot(&eta) - barrier.drift_term(x) - (b_e_hat - m_be),
            sense: Sense::Geq,
        },
        "robust ECBF row",
    )
}

/// `L_f V + L_g V·u − δ ≤ −λV`.
pub fn nominal_clf_row(x: &State, lyap: &LyapunovSpec) -> Result<LinearConstraintRow, SafetyError> {
    check_finite(
        LinearConstraintRow {
            coeff_u: lyap.lie_g(x),
            coeff_delta: -1.0,
            rhs: -lyap.lambda * lyap.v(x) - lyap.lie_f(x),
            sense: Sense::Leq,
        },
        "CLF row",
    )
}

/// `L_f V + L_g V·u + b̂_V + M_{b_V} − δ ≤ −λV`.
pub fn robust_clf_row(
    x: &State,
    lyap: &LyapunovSpec,
    b_v_hat: f64,
    m_bv: f64,
) -> Result<LinearConstraintRow, SafetyError> {
    require("M_bV", "non-negative", m_bv >= 0.0, m_bv)?;
    let row = nominal_clf_row(x, lyap)?;
    check_finite(row.shifted(-(b_v_hat + m_bv)), "robust CLF row")
}

/// What the QP objective pulls the input towards.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `‖u − k(x)‖²_W + p δ²`
    TrackBaseline { baseline: DVector<f64> },
    /// `‖u − (k(x) − d̂)‖²_W + p δ²`
    RejectDisturbance { baseline: DVector<f64>, d_hat: DVector<f64> },
    /// `‖u‖²_W + p δ²`
    WeightedInputOnly,
}

impl Objective {
    fn reference(&self, m: usize) -> DVector<f64> {
        match self {
            Objective::TrackBaseline { baseline } => baseline.clone(),
            Objective::RejectDisturbance { baseline, d_hat } => baseline - d_hat,
            Objective::WeightedInputOnly => DVector::zeros(m),
        }
    }
}

/// Diagonal input weights and the relaxation penalty `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveWeights {
    pub input: DVector<f64>,
    pub relax_penalty: f64,
}

impl ObjectiveWeights {
    pub fn uniform(m: usize, weight: f64, relax_penalty: f64) -> Self {
        Self { input: DVector::from_element(m, weight), relax_penalty }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputBounds {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl InputBounds {
    pub fn unbounded(m: usize) -> Self {
        Self {
            lower: DVector::from_element(m, f64::NEG_INFINITY),
            upper: DVector::from_element(m, f64::INFINITY),
        }
    }

    pub fn symmetric(m: usize, limit: f64) -> Self {
        Self { lower: DVector::from_element(m, -limit), upper: DVector::from_element(m, limit) }
    }

    pub fn clamp(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            u.len(),
            u.iter().enumerate().map(|(i, v)| v.clamp(self.lower[i], self.upper[i])),
        )
    }
}

/// Builds `½‖u − r‖²_W + ½ p δ²` subject to `rows` and the input box, over
/// `z = (u₁ … u_m, δ)`.
pub fn assemble_controller_qp(
    rows: &[LinearConstraintRow],
    objective: &Objective,
    weights: &ObjectiveWeights,
    bounds: &InputBounds,
) -> Result<QpProblem, SafetyError> {
    let m = weights.input.len();
    if bounds.lower.len() != m || bounds.upper.len() != m {
        return Err(SafetyError::RowDimension { found: bounds.lower.len(), expected: m });
    }
    require("relaxation penalty", "positive", weights.relax_penalty > 0.0, weights.relax_penalty)?;
    for w in weights.input.iter() {
        require("input weight", "positive", *w > 0.0, *w)?;
    }
    let reference = objective.reference(m);
    if reference.len() != m {
        return Err(SafetyError::RowDimension { found: reference.len(), expected: m });
    }
    if reference.iter().any(|v| !v.is_finite()) {
        return Err(SafetyError::NonFinite("objective reference"));
    }

    let n = m + 1;
    let mut hessian = DMatrix::zeros(n, n);
    let mut cost = DVector::zeros(n);
    for i in 0..m {
        hessian[(i, i)] = weights.input[i];
        cost[i] = -weights.input[i] * reference[i];
    }
    hessian[(m, m)] = weights.relax_penalty;

    let mut lower = DVector::from_element(n, f64::NEG_INFINITY);
    let mut upper = DVector::from_element(n, f64::INFINITY);
    lower.rows_mut(0, m).copy_from(&bounds.lower);
    upper.rows_mut(0, m).copy_from(&bounds.upper);

    let mut qp = QpProblem::new(hessian, cost).with_bounds(lower, upper).with_relaxation_index(m);
    for row in rows {
        if row.coeff_u.len() != m {
            return Err(SafetyError::RowDimension { found: row.coeff_u.len(), expected: m });
        }
        if row.sense == Sense::Geq && row.coeff_delta != 0.0 {
            return Err(SafetyError::RelaxedBarrierRow);
        }
        if !row.is_finite() {
            return Err(SafetyError::NonFinite("constraint row"));
        }
        let (a, b) = row.as_leq();
        qp.push_inequality(&a, b);
    }
    Ok(qp)
}

/// ECBF gain `K_α = [c₀, …, c_{r−1}]` such that
/// `s^r + c_{r−1}s^{r−1} + … + c₀ = Π (s − pᵢ)`.
pub fn ecbf_gain_from_poles(poles: &[f64]) -> Result<DVector<f64>, SafetyError> {
    if poles.is_empty() {
        return Err(SafetyError::GainLength { found: 0, expected: 1 });
    }
    // coefficients in ascending powers, monic
    let mut coeffs = vec![1.0];
    for &p in poles {
        if !(p < 0.0) || !p.is_finite() {
            return Err(SafetyError::InvalidPole(p));
        }
        let mut next = vec![0.0; coeffs.len() + 1];
        for (k, c) in coeffs.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= p * c;
        }
        coeffs = next;
    }
    coeffs.pop();
    Ok(DVector::from_vec(coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{solve_small_qp, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;

    fn constant_barrier(h: f64, lie_f: f64, lie_g: f64) -> BarrierSpec {
        BarrierSpec::relative_degree_one(
            move |_| h,
            move |_| lie_f,
            move |_| DVector::from_element(1, lie_g),
            ClassKFunction::linear(1.0).unwrap(),
        )
    }

    fn constant_lyap(v: f64, lie_f: f64, lie_g: f64, lambda: f64) -> LyapunovSpec {
        LyapunovSpec::new(move |_| v, move |_| lie_f, move |_| DVector::from_element(1, lie_g), lambda, 1.0)
            .unwrap()
    }

    fn x0() -> State {
        DVector::zeros(1)
    }

    #[test]
    fn cbf_row_boundary_zero_drift() {
        let row = nominal_cbf_row(&x0(), &constant_barrier(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(row.coeff_u[0], 1.0);
        assert_eq!(row.rhs, 0.0);
        assert_eq!(row.sense, Sense::Geq);
        assert_eq!(row.coeff_delta, 0.0);
    }

    #[test]
    fn cbf_row_hand_substitution() {
        let row = nominal_cbf_row(&x0(), &constant_barrier(2.0, -1.0, 3.0)).unwrap();
        assert_eq!(row.coeff_u[0], 3.0);
        assert_eq!(row.rhs, -1.0);
    }

    #[test]
    fn cbf_row_rejects_higher_degree() {
        let b = BarrierSpec::higher_order(
            2,
            |_| 1.0,
            |_| DVector::from_column_slice(&[1.0, 0.0]),
            |_| 0.0,
            |_| DVector::from_element(1, 1.0),
            DVector::from_column_slice(&[6.0, 5.0]),
        )
        .unwrap();
        assert!(matches!(nominal_cbf_row(&x0(), &b), Err(SafetyError::RelativeDegree { .. })));
        assert!(matches!(issf_cbf_row(&x0(), &b, 1.0), Err(SafetyError::RelativeDegree { .. })));
    }

    #[test]
    fn issf_tightening() {
        let b = constant_barrier(1.0, 0.5, 2.0);
        let nominal = nominal_cbf_row(&x0(), &b).unwrap();
        let issf = issf_cbf_row(&x0(), &b, 1.0).unwrap();
        assert_abs_diff_eq!(issf.rhs - nominal.rhs, 4.0);
        let tiny = issf_cbf_row(&x0(), &b, 1e-300).unwrap();
        assert_abs_diff_eq!(tiny.rhs, nominal.rhs);
        assert!(matches!(issf_cbf_row(&x0(), &b, 0.0), Err(SafetyError::Parameter { .. })));
        assert!(matches!(issf_cbf_row(&x0(), &b, -1.0), Err(SafetyError::Parameter { .. })));
    }

    #[test]
    fn robust_cbf_shift() {
        let b = constant_barrier(1.0, 0.5, 2.0);
        let nominal = nominal_cbf_row(&x0(), &b).unwrap();
        assert_eq!(robust_cbf_row(&x0(), &b, 0.0, 0.0).unwrap(), nominal);
        let robust = robust_cbf_row(&x0(), &b, 1.0, 0.2).unwrap();
        assert_abs_diff_eq!(nominal.rhs - robust.rhs, 0.8, epsilon = 1e-15);
        assert!(robust_cbf_row(&x0(), &b, 0.0, -0.1).is_err());
    }

    #[test]
    fn robust_cbf_scalar_soundness_instance() {
        // |b − b̂| ≤ M_b  ⇒  b ≥ b̂ − M_b
        for (b, b_hat, m) in [(1.0, 0.9, 0.1), (-2.0, -1.5, 0.5), (0.0, 0.3, 0.4)] {
            let lg: f64 = 1.7;
            let d = b / lg;
            assert!((b - b_hat).abs() <= m + 1e-15);
            assert!(lg * d >= b_hat - m - 1e-12);
        }
    }

    #[test]
    fn clf_rows() {
        let row = nominal_clf_row(&x0(), &constant_lyap(1.0, 0.0, 1.0, 5.0)).unwrap();
        assert_eq!((row.coeff_u[0], row.coeff_delta, row.rhs, row.sense), (1.0, -1.0, -5.0, Sense::Leq));

        let eq = nominal_clf_row(&x0(), &constant_lyap(0.0, 0.0, 0.3, 5.0)).unwrap();
        assert_eq!(eq.rhs, 0.0);

        let l = constant_lyap(1.0, 0.0, 1.0, 5.0);
        assert_eq!(robust_clf_row(&x0(), &l, 0.0, 0.0).unwrap(), row);
        let shifted = robust_clf_row(&x0(), &l, -1.0, 0.5).unwrap();
        assert_abs_diff_eq!(shifted.rhs - row.rhs, 0.5);
        assert!(robust_clf_row(&x0(), &l, 0.0, -1.0).is_err());
    }

    #[test]
    fn ecbf_gain_pole_placement() {
        let k = ecbf_gain_from_poles(&[-2.0, -3.0]).unwrap();
        assert_eq!(k.as_slice(), &[6.0, 5.0]);
        let k = ecbf_gain_from_poles(&[-2.0, -4.0]).unwrap();
        assert_eq!(k.as_slice(), &[8.0, 6.0]);
        let k = ecbf_gain_from_poles(&[-1.0, -1.0, -1.0]).unwrap();
        assert_eq!(k.as_slice(), &[1.0, 3.0, 3.0]);
        assert!(matches!(ecbf_gain_from_poles(&[-1.0, 0.0]), Err(SafetyError::InvalidPole(_))));
        assert!(ecbf_gain_from_poles(&[2.0, -1.0]).is_err());
    }

    #[test]
    fn ecbf_row_requires_gain() {
        let b = BarrierSpec::higher_order(
            2,
            |_| 1.0,
            |_| DVector::from_column_slice(&[1.0, 0.5]),
            |_| -1.0,
            |_| DVector::from_element(1, 2.0),
            DVector::from_column_slice(&[6.0, 5.0]),
        )
        .unwrap();
        let row = robust_ecbf_row(&x0(), &b, 0.0, 0.0).unwrap();
        // 2u ≥ −(6·1 + 5·0.5) − (−1)
        assert_eq!(row.coeff_u[0], 2.0);
        assert_abs_diff_eq!(row.rhs, -7.5);
        let with_obs = robust_ecbf_row(&x0(), &b, 1.0, 0.25).unwrap();
        assert_abs_diff_eq!(with_obs.rhs, -8.25);

        let no_gain = b.without_ecbf_gain();
        assert_eq!(robust_ecbf_row(&x0(), &no_gain, 0.0, 0.0), Err(SafetyError::MissingEcbfGain));
        let first = constant_barrier(1.0, 0.0, 1.0);
        assert!(robust_ecbf_row(&x0(), &first, 0.0, 0.0).is_err());
    }

    #[test]
    fn class_k_functions() {
        let lin = ClassKFunction::linear(2.0).unwrap();
        let cub = ClassKFunction::cubic(0.5).unwrap();
        let custom = ClassKFunction::custom(1.0, f64::atan).unwrap();
        for a in [&lin, &cub, &custom] {
            assert_eq!(a.eval(0.0), 0.0);
            assert!(a.eval(-1.0) < 0.0 && a.eval(1.0) > 0.0);
        }
        assert_eq!(cub.eval(2.0), 4.0);
        assert!(ClassKFunction::linear(0.0).is_err());
        assert!(ClassKFunction::cubic(-1.0).is_err());
    }

    #[test]
    fn assemble_tracking_without_rows() {
        let obj = Objective::TrackBaseline { baseline: DVector::from_element(1, 3.5) };
        let qp = assemble_controller_qp(&[], &obj, &ObjectiveWeights::uniform(1, 1.0, 10.0), &InputBounds::unbounded(1))
            .unwrap();
        let s = solve_small_qp(&qp, DEFAULT_TOL).unwrap();
        assert_abs_diff_eq!(s.z_star[0], 3.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z_star[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn assemble_weighted_input_hessian() {
        let m = 1650.0;
        let w = ObjectiveWeights::uniform(1, 1.0 / (m * m), 100.0);
        let qp = assemble_controller_qp(&[], &Objective::WeightedInputOnly, &w, &InputBounds::symmetric(1, 0.4 * m * 9.81))
            .unwrap();
        assert_eq!(qp.hessian[(0, 0)], 1.0 / (m * m));
        assert_eq!(qp.hessian[(1, 1)], 100.0);
        assert_eq!(qp.hessian[(0, 1)], 0.0);
        assert_eq!(qp.relaxation_index, Some(1));
        assert_eq!(qp.box_upper[0], 0.4 * m * 9.81);
        assert!(qp.box_upper[1].is_infinite());
    }

    #[test]
    fn reject_with_zero_estimate_is_tracking() {
        let base = DVector::from_element(1, -2.0);
        let w = ObjectiveWeights::uniform(1, 1.0, 1.0);
        let b = InputBounds::unbounded(1);
        let a = assemble_controller_qp(&[], &Objective::TrackBaseline { baseline: base.clone() }, &w, &b).unwrap();
        let r = assemble_controller_qp(
            &[],
            &Objective::RejectDisturbance { baseline: base, d_hat: DVector::zeros(1) },
            &w,
            &b,
        )
        .unwrap();
        assert_eq!(a, r);
    }

    #[test]
    fn assemble_rejects_bad_rows() {
        let w = ObjectiveWeights::uniform(1, 1.0, 1.0);
        let b = InputBounds::unbounded(1);
        let wide = LinearConstraintRow { coeff_u: DVector::zeros(2), coeff_delta: 0.0, rhs: 0.0, sense: Sense::Geq };
        assert!(matches!(
            assemble_controller_qp(&[wide], &Objective::WeightedInputOnly, &w, &b),
            Err(SafetyError::RowDimension { .. })
        ));
        let relaxed = LinearConstraintRow { coeff_u: DVector::zeros(1), coeff_delta: -1.0, rhs: 0.0, sense: Sense::Geq };
        assert_eq!(
            assemble_controller_qp(&[relaxed], &Objective::WeightedInputOnly, &w, &b),
            Err(SafetyError::RelaxedBarrierRow)
        );
    }

    #[test]
    fn assembled_qp_respects_rows() {
        let barrier = constant_barrier(2.0, -1.0, 3.0);
        let lyap = constant_lyap(1.0, 0.0, 1.0, 5.0);
        let rows = vec![nominal_cbf_row(&x0(), &barrier).unwrap(), nominal_clf_row(&x0(), &lyap).unwrap()];
        let qp = assemble_controller_qp(
            &rows,
            &Objective::TrackBaseline { baseline: DVector::from_element(1, -1.0) },
            &ObjectiveWeights::uniform(1, 1.0, 1.0),
            &InputBounds::unbounded(1),
        )
        .unwrap();
        let s = solve_small_qp(&qp, DEFAULT_TOL).unwrap();
        let u = s.z_star.rows(0, 1).into_owned();
        for row in &rows {
            assert!(row.is_satisfied(&u, s.z_star[1], 1e-9));
        }
        // CBF forces u ≥ −1/3 which the baseline −1 would violate
        assert_abs_diff_eq!(u[0], -1.0 / 3.0, epsilon = 1e-9);
    }
}
