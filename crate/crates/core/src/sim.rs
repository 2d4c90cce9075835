//! Fixed-step closed-loop simulation.
//!
//! Every sample: evaluate the barrier (and Lyapunov) terms at the current
//! state, read the observer, build the variant's constraint rows, solve the
//! QP, then integrate plant and observer over one step with the input held.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    acc_dynamics, acc_safety_specs, lqr_baseline, segway_dynamics, segway_safety_spec, AccParams,
    DisturbanceSignal, DynamicsError, PlantModel, SegwayParams,
};
use crate::observer::{
    self, error_bound, estimate_input_disturbance, ObserverConfig, ObserverError, DEFAULT_CHANNEL_FLOOR,
};
use crate::qp::{solve_small_qp, QpError, QpStatus, DEFAULT_TOL};
use crate::safety::{
    assemble_controller_qp, issf_cbf_row, nominal_cbf_row, nominal_clf_row, robust_cbf_row, robust_clf_row,
    robust_ecbf_row, BarrierSpec, ClassKFunction, InputBounds, LinearConstraintRow, LyapunovSpec, Objective,
    ObjectiveWeights, SafetyError, Sense,
};
use crate::State;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Observer(#[from] ObserverError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("integration produced a non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

/// Classical fourth-order Runge–Kutta step.
pub fn rk4_step<F>(mut rhs: F, t: f64, state: &DVector<f64>, dt: f64) -> Result<DVector<f64>, SimError>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let finite = |v: &DVector<f64>| v.iter().all(|e| e.is_finite());
    let half = 0.5 * dt;
    let k1 = rhs(t, state);
    if !finite(&k1) {
        return Err(SimError::NonFinite { t });
    }
    let k2 = rhs(t + half, &(state + half * &k1));
    if !finite(&k2) {
        return Err(SimError::NonFinite { t: t + half });
    }
    let k3 = rhs(t + half, &(state + half * &k2));
    if !finite(&k3) {
        return Err(SimError::NonFinite { t: t + half });
    }
    let k4 = rhs(t + dt, &(state + dt * &k3));
    if !finite(&k4) {
        return Err(SimError::NonFinite { t: t + dt });
    }
    let next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !finite(&next) {
        return Err(SimError::NonFinite { t: t + dt });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// CLF-CBF-QP on the nominal model.
    Nominal,
    /// Input-to-state safe CBF with margin `ε‖L_g h‖²`.
    Issf,
    /// Observer-based robust CLF-CBF-QP (relative degree one).
    DobRobust,
    /// Observer-based robust exponential CBF (relative degree ≥ 2).
    DobRobustEcbf,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Nominal => "nominal",
            Variant::Issf => "issf",
            Variant::DobRobust => "dob-robust",
            Variant::DobRobustEcbf => "dob-robust-ecbf",
        }
    }

    pub fn uses_observer(&self) -> bool {
        matches!(self, Variant::DobRobust | Variant::DobRobustEcbf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveKind {
    TrackBaseline,
    RejectDisturbance,
    WeightedInputOnly,
}

/// What to apply when the QP has no optimal solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    /// Keep the previously applied input.
    #[default]
    HoldPrevious,
    /// Saturate each input in the direction that increases the barrier rate.
    SaturateSafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassKKind {
    Linear,
    Cubic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum PlantConfig {
    Acc(AccParams),
    Segway(SegwayParams),
}

impl PlantConfig {
    pub fn model_name(&self) -> &'static str {
        match self {
            PlantConfig::Acc(_) => "acc",
            PlantConfig::Segway(_) => "segway",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub variant: Variant,
    pub objective: ObjectiveKind,
    pub alpha_kind: ClassKKind,
    pub alpha: f64,
    /// CLF decay rate λ; no CLF row when absent.
    pub lambda: Option<f64>,
    pub relax_penalty: f64,
    /// Diagonal input weight of the objective.
    pub input_weight: f64,
    pub epsilon: Option<f64>,
    pub ecbf_poles: Option<Vec<f64>>,
    pub lqr_q: Option<Vec<f64>>,
    pub lqr_r: Option<f64>,
    pub fallback: Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSettings {
    pub k_b: f64,
    pub b_h: f64,
    pub e_b0: f64,
    pub b_hat0: f64,
    /// Standard deviation of additive noise on the observed output and its
    /// known rate; zero disables noise.
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 20.0, seed: 0 }
    }
}

/// Complete, data-only description of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantConfig,
    pub controller: ControllerConfig,
    pub observer: Option<ObserverSettings>,
    pub disturbance: DisturbanceSignal,
    pub sim: SimSettings,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Scenario(msg));
        if !(self.sim.dt > 0.0) || !self.sim.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.sim.dt));
        }
        if !(self.sim.t_final >= self.sim.dt) {
            return bad(format!("t_final ({}) must be at least dt ({})", self.sim.t_final, self.sim.dt));
        }
        let c = &self.controller;
        if !(c.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", c.alpha));
        }
        if !(c.relax_penalty > 0.0) {
            return bad(format!("relax_penalty must be positive, got {}", c.relax_penalty));
        }
        if !(c.input_weight > 0.0) {
            return bad(format!("input_weight must be positive, got {}", c.input_weight));
        }
        if let Some(l) = c.lambda {
            if !(l > 0.0) {
                return bad(format!("lambda must be positive, got {l}"));
            }
        }
        if c.variant == Variant::Issf {
            match c.epsilon {
                Some(e) if e > 0.0 => {}
                Some(e) => return bad(format!("epsilon must be positive, got {e}")),
                None => return bad("variant issf requires epsilon".into()),
            }
        }
        if c.variant.uses_observer() || c.objective == ObjectiveKind::RejectDisturbance {
            match &self.observer {
                Some(o) => {
                    ObserverConfig::new(o.k_b, o.b_h, o.e_b0, 0.0)?;
                }
                None => return bad(format!("variant {} requires an observer section", c.variant.as_str())),
            }
        }
        if let Some(o) = &self.observer {
            if !(o.noise_std >= 0.0) {
                return bad(format!("noise_std must be non-negative, got {}", o.noise_std));
            }
        }
        match &self.plant {
            PlantConfig::Acc(p) => {
                p.validate()?;
                if c.variant == Variant::DobRobustEcbf {
                    return bad("the ACC barrier has relative degree one; use dob-robust".into());
                }
                if c.objective == ObjectiveKind::TrackBaseline && c.lqr_q.is_some() {
                    return bad("LQR weights only apply to the segway model".into());
                }
            }
            PlantConfig::Segway(p) => {
                p.validate()?;
                if matches!(c.variant, Variant::Issf | Variant::DobRobust) {
                    return bad(format!(
                        "the segway barrier has relative degree two; variant {} needs relative degree one",
                        c.variant.as_str()
                    ));
                }
                if matches!(c.objective, ObjectiveKind::TrackBaseline | ObjectiveKind::RejectDisturbance)
                    && (c.lqr_q.as_ref().map(|q| q.len()) != Some(4) || c.lqr_r.is_none())
                {
                    return bad("segway baseline requires lqr_q (4 entries) and lqr_r".into());
                }
                if c.lambda.is_some() {
                    return bad("the segway scenario has no Lyapunov function; remove lambda".into());
                }
            }
        }
        Ok(())
    }
}

type FeedbackFn = Arc<dyn Fn(&State) -> DVector<f64> + Send + Sync>;
type ScalarStateFn = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Runtime form of a [`Scenario`]: concrete plant, specs and controller.
#[derive(Clone)]
pub struct ClosedLoop {
    pub plant: PlantModel,
    pub barrier: BarrierSpec,
    pub lyapunov: Option<LyapunovSpec>,
    pub baseline: FeedbackFn,
    pub tracking: ScalarStateFn,
    pub variant: Variant,
    pub epsilon: f64,
    pub observer: Option<(ObserverConfig, f64)>,
    pub noise_std: f64,
    pub objective: ObjectiveKind,
    pub weights: ObjectiveWeights,
    pub bounds: InputBounds,
    pub fallback: Fallback,
    pub x0: State,
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
}

impl ClosedLoop {
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, SimError> {
        scenario.validate()?;
        let c = &scenario.controller;
        let alpha = match c.alpha_kind {
            ClassKKind::Linear => ClassKFunction::linear(c.alpha)?,
            ClassKKind::Cubic => ClassKFunction::cubic(c.alpha)?,
        };
        let observer = match &scenario.observer {
            Some(o) => Some((ObserverConfig::new(o.k_b, o.b_h, o.e_b0, 0.0)?, o.b_hat0)),
            None => None,
        };
        let noise_std = scenario.observer.as_ref().map_or(0.0, |o| o.noise_std);

        let (plant, barrier, lyapunov, baseline, tracking, bounds, weights, x0): (
            PlantModel,
            BarrierSpec,
            Option<LyapunovSpec>,
            FeedbackFn,
            ScalarStateFn,
            InputBounds,
            ObjectiveWeights,
            State,
        ) = match &scenario.plant {
            PlantConfig::Acc(p) => {
                let disturbance = if scenario.disturbance.is_zero() { None } else { Some(scenario.disturbance.clone()) };
                let plant = acc_dynamics(p, disturbance)?;
                let lambda = c.lambda.ok_or_else(|| SimError::Scenario("the ACC scenario requires lambda".into()))?;
                let (barrier, lyap) = acc_safety_specs(p, alpha, lambda, c.relax_penalty)?;
                let vd = p.desired_speed;
                let weight = c.input_weight / (p.mass * p.mass);
                (
                    plant,
                    barrier,
                    Some(lyap),
                    Arc::new(|_: &State| DVector::zeros(1)),
                    Arc::new(move |x: &State| x[1] - vd),
                    InputBounds::symmetric(1, p.input_limit()),
                    ObjectiveWeights::uniform(1, weight, c.relax_penalty),
                    p.initial_state(),
                )
            }
            PlantConfig::Segway(p) => {
                if !scenario.disturbance.is_zero() {
                    return Err(SimError::Scenario(
                        "the segway disturbance is set by the incline; remove the [disturbance] signal".into(),
                    ));
                }
                let plant = segway_dynamics(p)?;
                let poles = c.ecbf_poles.clone().unwrap_or_else(|| vec![-2.0, -4.0]);
                let barrier = segway_safety_spec(p, &poles)?;
                let baseline: FeedbackFn = match (&c.lqr_q, c.lqr_r) {
                    (Some(q), Some(r)) => {
                        let lqr = lqr_baseline(p, q, r)?;
                        let goal = p.goal_state();
                        Arc::new(move |x: &State| lqr.control(x, &goal))
                    }
                    _ => Arc::new(|_: &State| DVector::zeros(1)),
                };
                let goal_p = p.goal_state[0];
                (
                    plant,
                    barrier,
                    None,
                    baseline,
                    Arc::new(move |x: &State| x[0] - goal_p),
                    InputBounds::symmetric(1, p.input_bound),
                    ObjectiveWeights::uniform(1, c.input_weight, c.relax_penalty),
                    p.initial_state(),
                )
            }
        };

        Ok(Self {
            plant,
            barrier,
            lyapunov,
            baseline,
            tracking,
            variant: c.variant,
            epsilon: c.epsilon.unwrap_or(0.0),
            observer,
            noise_std,
            objective: c.objective,
            weights,
            bounds,
            fallback: c.fallback,
            x0,
            dt: scenario.sim.dt,
            t_final: scenario.sim.t_final,
            seed: scenario.sim.seed,
        })
    }

    /// Number of steps; the trajectory holds one more record than this.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt + 1e-9).floor() as usize
    }

    pub fn run(&self) -> Result<Trajectory, SimError> {
        let n = self.plant.dim_state;
        let m = self.plant.dim_input;
        let steps = self.num_steps();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = if self.noise_std > 0.0 {
            Some(Normal::new(0.0, self.noise_std).map_err(|e| SimError::Scenario(e.to_string()))?)
        } else {
            None
        };
        let sample_noise = |rng: &mut ChaCha8Rng| match &noise {
            Some(dist) => (dist.sample(rng), dist.sample(rng)),
            None => (0.0, 0.0),
        };

        let mut x = self.x0.clone();
        let (mut noise_z, mut noise_a) = sample_noise(&mut rng);
        let mut epsilon = match &self.observer {
            Some((cfg, b_hat0)) => observer::observer_init(*cfg, self.barrier.observed_output(&x) + noise_z, *b_hat0)?
                .epsilon_b,
            None => 0.0,
        };
        let mut u_prev: Option<DVector<f64>> = None;
        let mut records = Vec::with_capacity(steps + 1);
        let mut termination = Termination::Completed;

        for k in 0..=steps {
            let t = k as f64 * self.dt;
            if k > 0 {
                (noise_z, noise_a) = sample_noise(&mut rng);
            }
            let decision = self.control(t, &x, epsilon, noise_z, u_prev.as_ref())?;
            records.push(self.record(t, &x, &decision));
            let u = decision.u.clone();
            u_prev = Some(u.clone());
            if k == steps {
                break;
            }

            let augmented = {
                let mut y = x.clone().resize_vertically(n + 1, 0.0);
                y[n] = epsilon;
                y
            };
            let rhs = |tau: f64, y: &DVector<f64>| {
                let xs = y.rows(0, n).into_owned();
                let mut dy = self.plant.true_rate(tau, &xs, &u).resize_vertically(n + 1, 0.0);
                if let Some((cfg, _)) = &self.observer {
                    let z = self.barrier.observed_output(&xs) + noise_z;
                    let a = self.barrier.known_rate(&xs, &u) + noise_a;
                    dy[n] = observer::auxiliary_rate(cfg.k_b, y[n], z, a);
                }
                dy
            };
            match rk4_step(rhs, t, &augmented, self.dt) {
                Ok(next) => {
                    x = next.rows(0, n).into_owned();
                    epsilon = next[n];
                }
                Err(e) => {
                    termination = Termination::Aborted { t, reason: e.to_string() };
                    break;
                }
            }
        }

        Ok(Trajectory { state_dim: n, input_dim: m, dt: self.dt, records, termination })
    }

    fn control(
        &self,
        t: f64,
        x: &State,
        epsilon: f64,
        noise_z: f64,
        u_prev: Option<&DVector<f64>>,
    ) -> Result<Decision, SimError> {
        let m = self.plant.dim_input;
        let channel = self.barrier.control_term(x);

        let (b_hat, m_b) = match &self.observer {
            Some((cfg, _)) => {
                let z = self.barrier.observed_output(x) + noise_z;
                let state = observer::ObserverState { epsilon_b: epsilon, config: *cfg };
                (state.output(z), error_bound(cfg, t)?)
            }
            None => (f64::NAN, f64::NAN),
        };
        let inverse = if b_hat.is_finite() {
            estimate_input_disturbance(b_hat, m_b, &channel, DEFAULT_CHANNEL_FLOOR).ok()
        } else {
            None
        };

        let cbf_row = match (self.variant, self.barrier.relative_degree()) {
            (Variant::Nominal, 1) => nominal_cbf_row(x, &self.barrier)?,
            (Variant::Nominal, _) => robust_ecbf_row(x, &self.barrier, 0.0, 0.0)?,
            (Variant::Issf, _) => issf_cbf_row(x, &self.barrier, self.epsilon)?,
            (Variant::DobRobust, _) => robust_cbf_row(x, &self.barrier, b_hat, m_b)?,
            (Variant::DobRobustEcbf, _) => robust_ecbf_row(x, &self.barrier, b_hat, m_b)?,
        };
        let clf_row = match &self.lyapunov {
            Some(lyap) => Some(match (self.variant.uses_observer(), &inverse) {
                (true, Some((d_hat, m_d))) => {
                    let lg_v = lyap.lie_g(x);
                    robust_clf_row(x, lyap, lg_v.dot(d_hat), lg_v.norm() * m_d)?
                }
                // without an invertible channel only the barrier row can use the estimate
                _ => nominal_clf_row(x, lyap)?,
            }),
            None => None,
        };

        let baseline = (self.baseline)(x);
        let objective = match self.objective {
            ObjectiveKind::TrackBaseline => Objective::TrackBaseline { baseline: baseline.clone() },
            ObjectiveKind::RejectDisturbance => Objective::RejectDisturbance {
                baseline: baseline.clone(),
                d_hat: inverse.as_ref().map_or_else(|| DVector::zeros(m), |(d, _)| d.clone()),
            },
            ObjectiveKind::WeightedInputOnly => Objective::WeightedInputOnly,
        };

        let mut rows = vec![cbf_row.clone()];
        if let Some(r) = &clf_row {
            rows.push(r.clone());
        }
        let qp = assemble_controller_qp(&rows, &objective, &self.weights, &self.bounds)?;
        let solution = solve_small_qp(&qp, DEFAULT_TOL)?;

        let (u, delta, fallback_used) = if solution.is_optimal() {
            (solution.z_star.rows(0, m).into_owned(), solution.z_star[m], false)
        } else {
            let u = match (self.fallback, u_prev) {
                (Fallback::HoldPrevious, Some(prev)) => prev.clone(),
                _ => self.safe_saturation(&cbf_row, &baseline),
            };
            (u, 0.0, true)
        };

        let d_hat = inverse.as_ref().map_or(f64::NAN, |(d, _)| d[0]);
        Ok(Decision {
            cbf_margin: cbf_row.margin(&u, delta),
            clf_margin: clf_row.as_ref().map_or(f64::NAN, |r| r.margin(&u, delta)),
            u,
            delta,
            status: solution.status,
            fallback_used,
            b_hat,
            m_b,
            d_hat,
            channel,
        })
    }

    fn safe_saturation(&self, cbf_row: &LinearConstraintRow, baseline: &DVector<f64>) -> DVector<f64> {
        let sign = if cbf_row.sense == Sense::Geq { 1.0 } else { -1.0 };
        let clamped = self.bounds.clamp(baseline);
        DVector::from_iterator(
            clamped.len(),
            clamped.iter().enumerate().map(|(i, &b)| {
                let c = sign * cbf_row.coeff_u[i];
                if c > 0.0 {
                    self.bounds.upper[i]
                } else if c < 0.0 {
                    self.bounds.lower[i]
                } else {
                    b
                }
            }),
        )
    }

    fn record(&self, t: f64, x: &State, d: &Decision) -> Record {
        let b_true = match self.barrier.output_gradient(x) {
            Some(grad) => grad.dot(&self.plant.disturbance_term(t, x, &d.u)),
            None => f64::NAN,
        };
        let c = d.channel.norm();
        let d_true = match self.plant.matched_disturbance(t) {
            Some(dist) => dist[0],
            None if c > DEFAULT_CHANNEL_FLOOR && d.channel.len() == 1 => b_true / d.channel[0],
            None => f64::NAN,
        };
        Record {
            t,
            state: x.iter().copied().collect(),
            u: d.u.iter().copied().collect(),
            delta: d.delta,
            h: self.barrier.h(x),
            v: self.lyapunov.as_ref().map_or(f64::NAN, |l| l.v(x)),
            b_true,
            b_hat: d.b_hat,
            m_b: d.m_b,
            d_true,
            d_hat: d.d_hat,
            qp_status: d.status,
            fallback_used: d.fallback_used,
            cbf_margin: d.cbf_margin,
            clf_margin: d.clf_margin,
            tracking_error: (self.tracking)(x),
        }
    }
}

impl fmt::Debug for ClosedLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosedLoop")
            .field("plant", &self.plant)
            .field("barrier", &self.barrier)
            .field("variant", &self.variant)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .finish_non_exhaustive()
    }
}

struct Decision {
    u: DVector<f64>,
    delta: f64,
    status: QpStatus,
    fallback_used: bool,
    b_hat: f64,
    m_b: f64,
    d_hat: f64,
    channel: DVector<f64>,
    cbf_margin: f64,
    clf_margin: f64,
}

/// Builds and runs the closed loop described by `scenario`.
pub fn run_closed_loop(scenario: &Scenario) -> Result<Trajectory, SimError> {
    ClosedLoop::from_scenario(scenario)?.run()
}

/// One logged sample. `NaN` marks quantities the run does not produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub state: Vec<f64>,
    pub u: Vec<f64>,
    pub delta: f64,
    pub h: f64,
    pub v: f64,
    pub b_true: f64,
    pub b_hat: f64,
    pub m_b: f64,
    pub d_true: f64,
    pub d_hat: f64,
    pub qp_status: QpStatus,
    pub fallback_used: bool,
    pub cbf_margin: f64,
    pub clf_margin: f64,
    /// `v_f − v_d` for cruise control, `p − p_goal` for the Segway.
    pub tracking_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Aborted { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state_dim: usize,
    pub input_dim: usize,
    pub dt: f64,
    pub records: Vec<Record>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyReport {
    pub samples: usize,
    pub completed: bool,
    pub min_h: f64,
    pub min_h_time: f64,
    pub first_violation_time: Option<f64>,
    /// Sample mean of `h`, i.e. its time average on the uniform grid.
    pub mean_h: f64,
    pub max_observer_error: Option<f64>,
    /// `max (|b − b̂| − M_b)`; non-positive when the envelope holds.
    pub max_envelope_slack: Option<f64>,
    pub mean_v: Option<f64>,
    pub final_v: Option<f64>,
    pub tracking_rms: f64,
    pub final_tracking_error: f64,
    /// Steps where the QP was not solved to optimality.
    pub infeasible_steps: usize,
}

fn finite_max(values: impl Iterator<Item = f64>) -> Option<f64> {
    values.filter(|v| v.is_finite()).fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
}

/// Summarises a trajectory. Returns `None` for an empty one.
pub fn trajectory_metrics(trajectory: &Trajectory) -> Option<SafetyReport> {
    let recs = &trajectory.records;
    let last = recs.last()?;
    let (mut min_h, mut min_h_time) = (f64::INFINITY, recs[0].t);
    for r in recs {
        if r.h < min_h {
            min_h = r.h;
            min_h_time = r.t;
        }
    }
    let count = recs.len() as f64;
    let errors = || recs.iter().map(|r| (r.b_true - r.b_hat).abs());
    let v_values: Vec<f64> = recs.iter().map(|r| r.v).filter(|v| v.is_finite()).collect();
    Some(SafetyReport {
        samples: recs.len(),
        completed: trajectory.completed(),
        min_h,
        min_h_time,
        first_violation_time: recs.iter().find(|r| r.h < 0.0).map(|r| r.t),
        mean_h: recs.iter().map(|r| r.h).sum::<f64>() / count,
        max_observer_error: finite_max(errors()),
        max_envelope_slack: finite_max(recs.iter().map(|r| (r.b_true - r.b_hat).abs() - r.m_b)),
        mean_v: (!v_values.is_empty()).then(|| v_values.iter().sum::<f64>() / v_values.len() as f64),
        final_v: last.v.is_finite().then_some(last.v),
        tracking_rms: (recs.iter().map(|r| r.tracking_error.powi(2)).sum::<f64>() / count).sqrt(),
        final_tracking_error: last.tracking_error,
        infeasible_steps: recs.iter().filter(|r| r.qp_status != QpStatus::Optimal).count(),
    })
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6e}"));
        writeln!(f, "samples                 {}", self.samples)?;
        writeln!(f, "completed               {}", self.completed)?;
        writeln!(f, "min h                   {:.6e} (t = {:.3} s)", self.min_h, self.min_h_time)?;
        match self.first_violation_time {
            Some(t) => writeln!(f, "first violation         t = {t:.3} s")?,
            None => writeln!(f, "first violation         none")?,
        }
        writeln!(f, "time-average h          {:.6e}", self.mean_h)?;
        writeln!(f, "max |b - b_hat|         {}", opt(self.max_observer_error))?;
        writeln!(f, "max envelope slack      {}", opt(self.max_envelope_slack))?;
        writeln!(f, "mean V                  {}", opt(self.mean_v))?;
        writeln!(f, "final V                 {}", opt(self.final_v))?;
        writeln!(f, "tracking RMS            {:.6e}", self.tracking_rms)?;
        writeln!(f, "final tracking error    {:.6e}", self.final_tracking_error)?;
        write!(f, "non-optimal QP steps    {}", self.infeasible_steps)
    }
}
