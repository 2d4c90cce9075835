//! Dense primal active-set solver for the small convex QPs built by the
//! safety filters.
//!
//! Problems have the form
//!
//! ```text
//!   minimize   ½ zᵀ H z + qᵀ z
//!   subject to A z ≤ b,  lower ≤ z ≤ upper
//! ```
//!
//! with `H` symmetric positive semidefinite and a decision vector of at most
//! a handful of entries. A phase-one LP (minimize the largest violation)
//! finds a feasible start, then a null-space active-set iteration solves the
//! equality-constrained subproblem of each working set exactly.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Default tolerance for feasibility, multiplier signs and KKT residuals.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("hessian is not symmetric")]
    NotSymmetric,
    #[error("hessian is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotConvex(f64),
    #[error("box bound {index}: lower {lower} exceeds upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },
    #[error("KKT residuals are only defined for optimal solutions (status {0:?})")]
    NotOptimal(QpStatus),
}

/// Identifies one inequality of a [`QpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintId {
    /// Row `i` of `A z ≤ b`.
    Inequality(usize),
    /// `z[j] ≥ lower[j]`.
    Lower(usize),
    /// `z[j] ≤ upper[j]`.
    Upper(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// The iteration cap was reached before a KKT point was certified.
    IterationLimit,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::Unbounded => "unbounded",
            QpStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear_cost: DVector<f64>,
    pub ineq_a: DMatrix<f64>,
    pub ineq_b: DVector<f64>,
    pub box_lower: DVector<f64>,
    pub box_upper: DVector<f64>,
    /// Index of the relaxation variable δ, if the problem has one.
    pub relaxation_index: Option<usize>,
}

impl QpProblem {
    /// Unconstrained problem with infinite box bounds.
    pub fn new(hessian: DMatrix<f64>, linear_cost: DVector<f64>) -> Self {
        let n = linear_cost.len();
        Self {
            hessian,
            linear_cost,
            ineq_a: DMatrix::zeros(0, n),
            ineq_b: DVector::zeros(0),
            box_lower: DVector::from_element(n, f64::NEG_INFINITY),
            box_upper: DVector::from_element(n, f64::INFINITY),
            relaxation_index: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear_cost.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq_b.len()
    }

    /// Appends the row `coeffs · z ≤ rhs`.
    pub fn with_inequality(mut self, coeffs: &[f64], rhs: f64) -> Self {
        self.push_inequality(coeffs, rhs);
        self
    }

    pub fn push_inequality(&mut self, coeffs: &[f64], rhs: f64) {
        let m = self.ineq_a.nrows();
        let n = self.ineq_a.ncols();
        assert_eq!(coeffs.len(), n, "inequality row length must equal the decision dimension");
        let mut a = std::mem::replace(&mut self.ineq_a, DMatrix::zeros(0, 0)).insert_row(m, 0.0);
        for (j, c) in coeffs.iter().enumerate() {
            a[(m, j)] = *c;
        }
        self.ineq_a = a;
        let b = std::mem::replace(&mut self.ineq_b, DVector::zeros(0));
        self.ineq_b = b.push(rhs);
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.box_lower = lower;
        self.box_upper = upper;
        self
    }

    pub fn with_relaxation_index(mut self, index: usize) -> Self {
        self.relaxation_index = Some(index);
        self
    }

    /// `½ zᵀ H z + qᵀ z`.
    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.hessian * z)) + self.linear_cost.dot(z)
    }

    /// Largest violation of any inequality or box bound at `z` (0 when feasible).
    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        self.constraint_rows()
            .iter()
            .map(|row| (row.a.dot(z) - row.b).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(QpError::Dimension(format!(
                "hessian is {}x{}, decision dimension is {n}",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.ineq_a.ncols() != n || self.ineq_a.nrows() != self.ineq_b.len() {
            return Err(QpError::Dimension(format!(
                "inequality matrix is {}x{} with {} right-hand sides, decision dimension is {n}",
                self.ineq_a.nrows(),
                self.ineq_a.ncols(),
                self.ineq_b.len()
            )));
        }
        if self.box_lower.len() != n || self.box_upper.len() != n {
            return Err(QpError::Dimension("box bounds length".into()));
        }
        if let Some(k) = self.relaxation_index {
            if k >= n {
                return Err(QpError::Dimension(format!("relaxation index {k} out of range")));
            }
        }
        if self.hessian.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("hessian"));
        }
        if self.linear_cost.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("linear_cost"));
        }
        if self.ineq_a.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("ineq_a"));
        }
        if self.ineq_b.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("ineq_b"));
        }
        if self.box_lower.iter().chain(self.box_upper.iter()).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite("box bounds"));
        }
        for j in 0..n {
            if self.box_lower[j] > self.box_upper[j] {
                return Err(QpError::InvalidBounds {
                    index: j,
                    lower: self.box_lower[j],
                    upper: self.box_upper[j],
                });
            }
        }
        let scale = self.hessian.amax().max(1.0);
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(QpError::NotSymmetric);
        }
        if n > 0 {
            let eig = SymmetricEigen::new(self.hessian.clone());
            let min = eig.eigenvalues.min();
            if min < -1e-10 * scale {
                return Err(QpError::NotConvex(min));
            }
        }
        Ok(())
    }

    /// All inequalities, box bounds included, as `a · z ≤ b` rows.
    fn constraint_rows(&self) -> Vec<Row> {
        let n = self.dim();
        let mut rows = Vec::with_capacity(self.num_inequalities() + 2 * n);
        for i in 0..self.num_inequalities() {
            rows.push(Row {
                a: self.ineq_a.row(i).transpose(),
                b: self.ineq_b[i],
                id: ConstraintId::Inequality(i),
            });
        }
        for j in 0..n {
            if self.box_lower[j].is_finite() {
                let mut a = DVector::zeros(n);
                a[j] = -1.0;
                rows.push(Row { a, b: -self.box_lower[j], id: ConstraintId::Lower(j) });
            }
            if self.box_upper[j].is_finite() {
                let mut a = DVector::zeros(n);
                a[j] = 1.0;
                rows.push(Row { a, b: self.box_upper[j], id: ConstraintId::Upper(j) });
            }
        }
        rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z_star: DVector<f64>,
    pub objective_value: f64,
    /// Constraints tight at `z_star`.
    pub active_set: Vec<ConstraintId>,
    /// Lagrange multipliers of `A z ≤ b`.
    pub ineq_multipliers: DVector<f64>,
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    fn failed(problem: &QpProblem, status: QpStatus, z: DVector<f64>, iterations: usize) -> Self {
        let n = problem.dim();
        Self {
            status,
            objective_value: problem.objective(&z),
            z_star: z,
            active_set: Vec::new(),
            ineq_multipliers: DVector::zeros(problem.num_inequalities()),
            lower_multipliers: DVector::zeros(n),
            upper_multipliers: DVector::zeros(n),
            iterations,
        }
    }
}

/// KKT residuals of a candidate solution, all as max-norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `‖H z + q + Aᵀλ − λ_lower + λ_upper‖∞`
    pub stationarity: f64,
    pub primal_violation: f64,
    /// Largest negative multiplier magnitude.
    pub dual_violation: f64,
    /// `max |λ_i · (a_iᵀ z − b_i)|`
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_violation)
            .max(self.dual_violation)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

#[derive(Debug, Clone)]
struct Row {
    a: DVector<f64>,
    b: f64,
    id: ConstraintId,
}

enum Outcome {
    Converged { z: DVector<f64>, working: Vec<usize>, multipliers: Vec<f64>, iterations: usize },
    Unbounded { z: DVector<f64>, iterations: usize },
    IterationLimit { z: DVector<f64>, iterations: usize },
}

/// Solves a small convex QP to global optimality.
///
/// Returns `Err` for malformed or non-convex input. Infeasible and unbounded
/// problems, as well as an exhausted iteration budget, are reported through
/// [`QpSolution::status`].
pub fn solve_small_qp(problem: &QpProblem, tol: f64) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.dim();
    let rows = problem.constraint_rows();
    let max_iter = 50 * (n + rows.len()) + 100;

    let mut z0 = DVector::zeros(n);
    for j in 0..n {
        z0[j] = 0.0_f64.clamp(problem.box_lower[j], problem.box_upper[j]);
    }

    let mut iterations = 0;
    let feas_tol = tol * (1.0 + rows.iter().map(|r| r.b.abs()).fold(0.0, f64::max));
    let violation0 = rows.iter().map(|r| r.a.dot(&z0) - r.b).fold(0.0, f64::max);
    let start = if violation0 <= feas_tol {
        z0
    } else {
        match phase_one(&rows, n, z0, violation0, tol, max_iter) {
            PhaseOne::Feasible(z, it) => {
                iterations += it;
                z
            }
            PhaseOne::Infeasible(z, it) => {
                return Ok(QpSolution::failed(problem, QpStatus::Infeasible, z, iterations + it));
            }
            PhaseOne::Stalled(z, it) => {
                return Ok(QpSolution::failed(problem, QpStatus::IterationLimit, z, iterations + it));
            }
        }
    };

    let outcome = active_set(
        &problem.hessian,
        &problem.linear_cost,
        &rows,
        start,
        tol,
        max_iter,
    );
    match outcome {
        Outcome::Converged { z, working, multipliers, iterations: it } => {
            iterations += it;
            let mut ineq = DVector::zeros(problem.num_inequalities());
            let mut lower = DVector::zeros(n);
            let mut upper = DVector::zeros(n);
            for (&w, &lambda) in working.iter().zip(multipliers.iter()) {
                let lambda = lambda.max(0.0);
                match rows[w].id {
                    ConstraintId::Inequality(i) => ineq[i] = lambda,
                    ConstraintId::Lower(j) => lower[j] = lambda,
                    ConstraintId::Upper(j) => upper[j] = lambda,
                }
            }
            let act_tol = tol * (1.0 + z.amax());
            let active_set = rows
                .iter()
                .filter(|r| (r.a.dot(&z) - r.b).abs() <= act_tol.max(feas_tol))
                .map(|r| r.id)
                .collect();
            Ok(QpSolution {
                status: QpStatus::Optimal,
                objective_value: problem.objective(&z),
                z_star: z,
                active_set,
                ineq_multipliers: ineq,
                lower_multipliers: lower,
                upper_multipliers: upper,
                iterations,
            })
        }
        Outcome::Unbounded { z, iterations: it } => {
            Ok(QpSolution::failed(problem, QpStatus::Unbounded, z, iterations + it))
        }
        Outcome::IterationLimit { z, iterations: it } => {
            Ok(QpSolution::failed(problem, QpStatus::IterationLimit, z, iterations + it))
        }
    }
}

/// Evaluates the KKT conditions of `solution` against `problem`.
pub fn kkt_residual(problem: &QpProblem, solution: &QpSolution) -> Result<KktResidual, QpError> {
    let n = problem.dim();
    if solution.status != QpStatus::Optimal {
        return Err(QpError::NotOptimal(solution.status));
    }
    if solution.z_star.len() != n
        || solution.ineq_multipliers.len() != problem.num_inequalities()
        || solution.lower_multipliers.len() != n
        || solution.upper_multipliers.len() != n
    {
        return Err(QpError::Dimension("solution does not match problem".into()));
    }
    let z = &solution.z_star;
    let grad = &problem.hessian * z + &problem.linear_cost;
    let stationarity = grad + problem.ineq_a.transpose() * &solution.ineq_multipliers
        - &solution.lower_multipliers
        + &solution.upper_multipliers;

    let mut acc = Accumulator::default();
    for i in 0..problem.num_inequalities() {
        let slack = problem.ineq_b[i] - problem.ineq_a.row(i).transpose().dot(z);
        acc.push(slack, solution.ineq_multipliers[i]);
    }
    for j in 0..n {
        if problem.box_lower[j].is_finite() {
            acc.push(z[j] - problem.box_lower[j], solution.lower_multipliers[j]);
        } else {
            acc.dual = acc.dual.max(solution.lower_multipliers[j].abs());
        }
        if problem.box_upper[j].is_finite() {
            acc.push(problem.box_upper[j] - z[j], solution.upper_multipliers[j]);
        } else {
            acc.dual = acc.dual.max(solution.upper_multipliers[j].abs());
        }
    }
    Ok(KktResidual {
        stationarity: stationarity.amax(),
        primal_violation: acc.primal,
        dual_violation: acc.dual,
        complementarity: acc.comp,
    })
}

#[derive(Default)]
struct Accumulator {
    primal: f64,
    dual: f64,
    comp: f64,
}

impl Accumulator {
    fn push(&mut self, slack: f64, lambda: f64) {
        self.primal = self.primal.max(-slack);
        self.dual = self.dual.max(-lambda);
        if lambda != 0.0 {
            self.comp = self.comp.max((lambda * slack).abs());
        }
    }
}

enum PhaseOne {
    Feasible(DVector<f64>, usize),
    Infeasible(DVector<f64>, usize),
    Stalled(DVector<f64>, usize),
}

/// Minimizes the slack `s` subject to `a_iᵀ z − s ≤ b_i`, `s ≥ 0`.
fn phase_one(
    rows: &[Row],
    n: usize,
    z0: DVector<f64>,
    violation0: f64,
    tol: f64,
    max_iter: usize,
) -> PhaseOne {
    let mut aug_rows: Vec<Row> = rows
        .iter()
        .map(|r| {
            let mut a = r.a.clone().resize_vertically(n + 1, 0.0);
            a[n] = -1.0;
            Row { a, b: r.b, id: r.id }
        })
        .collect();
    let mut s_row = DVector::zeros(n + 1);
    s_row[n] = -1.0;
    aug_rows.push(Row { a: s_row, b: 0.0, id: ConstraintId::Lower(n) });

    let mut start = z0.resize_vertically(n + 1, 0.0);
    start[n] = violation0;
    let mut cost = DVector::zeros(n + 1);
    cost[n] = 1.0;
    let hessian = DMatrix::zeros(n + 1, n + 1);

    let feas_tol = tol * (1.0 + rows.iter().map(|r| r.b.abs()).fold(0.0, f64::max));
    match active_set(&hessian, &cost, &aug_rows, start, tol, max_iter) {
        Outcome::Converged { z, iterations, .. } => {
            let s = z[n];
            let x = z.rows(0, n).into_owned();
            if s <= feas_tol {
                PhaseOne::Feasible(x, iterations)
            } else {
                PhaseOne::Infeasible(x, iterations)
            }
        }
        // The slack is bounded below, so an unbounded report is numerical trouble.
        Outcome::Unbounded { z, iterations } | Outcome::IterationLimit { z, iterations } => {
            PhaseOne::Stalled(z.rows(0, n).into_owned(), iterations)
        }
    }
}

/// Primal active-set iteration from a feasible start.
fn active_set(
    hessian: &DMatrix<f64>,
    cost: &DVector<f64>,
    rows: &[Row],
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Outcome {
    let n = cost.len();
    let mut z = start;
    let mut working: Vec<usize> = Vec::new();
    let h_scale = hessian.amax().max(1.0);
    let g_scale = cost.amax().max(1.0);

    for iter in 0..max_iter {
        let grad = hessian * &z + cost;
        let step = subproblem_step(hessian, &grad, rows, &working, n, h_scale, g_scale.max(grad.amax()) * tol);

        let (direction, newton) = match step {
            Some(s) => s,
            None => (DVector::zeros(n), true),
        };

        let step_scale = 1.0 + z.amax();
        if direction.amax() <= tol * step_scale {
            // Stationary on the working set: check multipliers.
            let lambda = working_multipliers(rows, &working, &grad, n);
            let lambda_tol = tol * g_scale.max(grad.amax());
            let (worst, worst_val) = lambda
                .iter()
                .enumerate()
                .fold((None, -lambda_tol), |(wi, wv), (k, &l)| {
                    if l < wv {
                        (Some(k), l)
                    } else {
                        (wi, wv)
                    }
                });
            let _ = worst_val;
            match worst {
                None => {
                    return Outcome::Converged { z, working, multipliers: lambda, iterations: iter + 1 };
                }
                Some(k) => {
                    working.remove(k);
                    continue;
                }
            }
        }

        // Ratio test against constraints outside the working set.
        let mut alpha = if newton { 1.0 } else { f64::INFINITY };
        let mut blocking = None;
        for (i, row) in rows.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let rate = row.a.dot(&direction);
            if rate > 1e-14 * row.a.amax().max(1e-300) * direction.amax() {
                let slack = (row.b - row.a.dot(&z)).max(0.0);
                let ratio = slack / rate;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }
        if !alpha.is_finite() {
            return Outcome::Unbounded { z, iterations: iter + 1 };
        }
        z += alpha * &direction;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Outcome::IterationLimit { z, iterations: max_iter }
}

/// Step of the equality-constrained subproblem on the working set.
///
/// Returns the direction and whether it is a Newton step (`true`, capped at
/// unit length) or a zero-curvature descent ray (`false`).
fn subproblem_step(
    hessian: &DMatrix<f64>,
    grad: &DVector<f64>,
    rows: &[Row],
    working: &[usize],
    n: usize,
    h_scale: f64,
    grad_tol: f64,
) -> Option<(DVector<f64>, bool)> {
    let basis = null_space(rows, working, n);
    let free = basis.ncols();
    if free == 0 {
        return None;
    }
    let reduced_h = basis.transpose() * hessian * &basis;
    let reduced_g = basis.transpose() * grad;
    let eig = SymmetricEigen::new(reduced_h);
    let curvature_floor = 1e-12 * h_scale;

    let mut ray = DVector::zeros(free);
    let mut newton = DVector::zeros(free);
    for k in 0..free {
        let v = eig.eigenvectors.column(k);
        let mu = eig.eigenvalues[k];
        let c = v.dot(&reduced_g);
        if mu > curvature_floor {
            newton -= (c / mu) * v;
        } else if c.abs() > grad_tol {
            ray -= c * v;
        }
    }
    if ray.amax() > 0.0 {
        Some((basis * ray, false))
    } else {
        Some((basis * newton, true))
    }
}

/// Orthonormal basis of the null space of the working-set rows.
fn null_space(rows: &[Row], working: &[usize], n: usize) -> DMatrix<f64> {
    if working.is_empty() {
        return DMatrix::identity(n, n);
    }
    let k = working.len();
    if k >= n {
        return DMatrix::zeros(n, 0);
    }
    let mut gram = DMatrix::zeros(n, n);
    for &w in working {
        let a = &rows[w].a;
        let a = a / a.norm();
        gram += &a * a.transpose();
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let cols: Vec<DVector<f64>> = order[..n - k]
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

/// Least-squares multipliers `λ` with `A_Wᵀ λ = −∇f`.
fn working_multipliers(rows: &[Row], working: &[usize], grad: &DVector<f64>, n: usize) -> Vec<f64> {
    if working.is_empty() {
        return Vec::new();
    }
    let k = working.len();
    let mut at = DMatrix::zeros(n, k);
    for (c, &w) in working.iter().enumerate() {
        at.set_column(c, &rows[w].a);
    }
    let gram = at.transpose() * &at;
    let rhs = -(at.transpose() * grad);
    match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs).iter().copied().collect(),
        None => {
            let svd = gram.svd(true, true);
            svd.solve(&rhs, 1e-14)
                .map(|v| v.iter().copied().collect())
                .unwrap_or_else(|_| vec![0.0; k])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_d(lower_constraint: Option<f64>) -> QpProblem {
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1));
        match lower_constraint {
            Some(c) => p.with_inequality(&[-1.0], -c),
            None => p,
        }
    }

    #[test]
    fn identity_unconstrained() {
        let p = QpProblem::new(DMatrix::identity(3, 3), DVector::zeros(3));
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.z_star.amax(), 0.0);
        assert_abs_diff_eq!(s.objective_value, 0.0);
        let r = kkt_residual(&p, &s).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn halfspace_projection() {
        let p = one_d(Some(1.0));
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.z_star[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.objective_value, 0.5, epsilon = 1e-12);
        assert_eq!(s.active_set, vec![ConstraintId::Inequality(0)]);
        assert_abs_diff_eq!(s.ineq_multipliers[0], 1.0, epsilon = 1e-12);

        // grid search over [-5, 5] with step 1e-4
        let mut best = f64::INFINITY;
        for k in 0..=100_000 {
            let z = -5.0 + 1e-4 * k as f64;
            if -z <= -1.0 + 1e-12 {
                best = best.min(0.5 * z * z);
            }
        }
        assert_abs_diff_eq!(s.objective_value, best, epsilon = 1e-6);
    }

    #[test]
    fn empty_feasible_set() {
        let p = one_d(None).with_inequality(&[1.0], -1.0).with_inequality(&[-1.0], -1.0);
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        assert!(matches!(kkt_residual(&p, &s), Err(QpError::NotOptimal(QpStatus::Infeasible))));
    }

    #[test]
    fn perturbed_optimum_detected() {
        let p = one_d(Some(1.0));
        let mut s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        s.z_star[0] += 0.1;
        let r = kkt_residual(&p, &s).unwrap();
        assert!(r.stationarity > 0.05);
    }

    #[test]
    fn rejects_non_psd() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QpProblem::new(h, DVector::zeros(2));
        assert!(matches!(solve_small_qp(&p, DEFAULT_TOL), Err(QpError::NotConvex(_))));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(3));
        assert!(matches!(solve_small_qp(&p, DEFAULT_TOL), Err(QpError::Dimension(_))));
    }

    #[test]
    fn rejects_crossed_bounds() {
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .with_bounds(DVector::from_element(1, 2.0), DVector::from_element(1, 1.0));
        assert!(matches!(solve_small_qp(&p, DEFAULT_TOL), Err(QpError::InvalidBounds { .. })));
    }

    #[test]
    fn linear_objective_unbounded() {
        let p = QpProblem::new(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0));
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert_eq!(s.status, QpStatus::Unbounded);
    }

    #[test]
    fn linear_objective_hits_bound() {
        let p = QpProblem::new(DMatrix::zeros(2, 2), DVector::from_column_slice(&[1.0, -2.0]))
            .with_bounds(DVector::from_element(2, -3.0), DVector::from_element(2, 4.0));
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.z_star[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.z_star[1], 4.0, epsilon = 1e-12);
        assert!(kkt_residual(&p, &s).unwrap().within(1e-9));
    }

    #[test]
    fn box_bound_with_two_rows() {
        // min ½(u² + δ²) − 3u  s.t.  u ≤ 1 + δ,  u ≤ 2
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::from_column_slice(&[-3.0, 0.0]))
            .with_inequality(&[1.0, -1.0], 1.0)
            .with_bounds(
                DVector::from_column_slice(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
                DVector::from_column_slice(&[2.0, f64::INFINITY]),
            );
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        // stationarity on u − δ = 1: u = 2, δ = 1
        assert_abs_diff_eq!(s.z_star[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.z_star[1], 1.0, epsilon = 1e-10);
        assert!(kkt_residual(&p, &s).unwrap().within(1e-9));
    }

    #[test]
    fn infeasible_start_is_repaired() {
        // feasible region z ∈ [3, 4] away from the origin
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::from_element(1, -10.0))
            .with_inequality(&[-1.0], -3.0)
            .with_inequality(&[1.0], 4.0);
        let s = solve_small_qp(&p, DEFAULT_TOL).unwrap();
        assert!(s.is_optimal());
        assert_abs_diff_eq!(s.z_star[0], 4.0, epsilon = 1e-12);
    }
}
