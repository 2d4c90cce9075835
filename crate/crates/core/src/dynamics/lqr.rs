//! Continuous-time LQR via the Hamiltonian matrix sign function, polished
//! with Newton–Kleinman iterations.

use nalgebra::{DMatrix, DVector};

use super::{DynamicsError, PlantModel, SegwayParams};
use crate::State;

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSolution {
    /// State-feedback gain, `u = −K (x − x_ref)`.
    pub gain: DMatrix<f64>,
    /// Stabilizing solution of `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
    pub riccati: DMatrix<f64>,
}

impl LqrSolution {
    pub fn control(&self, x: &State, reference: &State) -> DVector<f64> {
        -(&self.gain * (x - reference))
    }
}

/// `‖AᵀP + PA − PBR⁻¹BᵀP + Q‖` (Frobenius).
pub fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let r_inv = r.clone().try_inverse().unwrap_or_else(|| DMatrix::from_element(r.nrows(), r.ncols(), f64::NAN));
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

/// Solves the continuous algebraic Riccati equation.
pub fn care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, DynamicsError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(DynamicsError::Dimension("LQR matrices".into()));
    }
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| DynamicsError::NotStabilizable("R is not positive definite".into()))?
        .inverse();
    let s = b * &r_inv * b.transpose();

    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&s));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(ham)?;
    let w11 = sign.view((0, 0), (n, n));
    let w12 = sign.view((0, n), (n, n));
    let w21 = sign.view((n, 0), (n, n));
    let w22 = sign.view((n, n), (n, n));
    let eye = DMatrix::<f64>::identity(n, n);

    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(w11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));

    let svd = lhs.svd(true, true);
    let smallest = svd.singular_values.min();
    let largest = svd.singular_values.max();
    if !(smallest > 1e-10 * largest.max(1.0)) {
        return Err(DynamicsError::NotStabilizable("stable invariant subspace is not a graph".into()));
    }
    let p = svd
        .solve(&rhs, 1e-14)
        .map_err(|e| DynamicsError::NotStabilizable(e.to_string()))?;
    let mut p = 0.5 * (&p + p.transpose());

    // Newton–Kleinman polish
    for _ in 0..4 {
        let k = &r_inv * b.transpose() * &p;
        let closed = a - b * &k;
        let forcing = q + k.transpose() * r * &k;
        match lyapunov(&closed, &forcing) {
            Some(next) => p = 0.5 * (&next + next.transpose()),
            None => break,
        }
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NotStabilizable("non-finite Riccati solution".into()));
    }
    Ok(p)
}

/// LQR gain with a closed-loop stability check.
pub fn lqr(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<LqrSolution, DynamicsError> {
    let p = care(a, b, q, r)?;
    let r_inv = r.clone().try_inverse().ok_or_else(|| DynamicsError::NotStabilizable("R singular".into()))?;
    let gain = r_inv * b.transpose() * &p;
    let closed = a - b * &gain;
    let worst = closed.complex_eigenvalues().iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if !(worst < 0.0) {
        return Err(DynamicsError::NotStabilizable(format!("closed-loop eigenvalue with real part {worst}")));
    }
    Ok(LqrSolution { gain, riccati: p })
}

/// Central-difference Jacobians of the nominal dynamics at `(x, u)`.
pub fn linearize(plant: &PlantModel, x: &State, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = plant.dim_state;
    let m = plant.dim_input;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    for j in 0..n {
        let h = 1e-6 * (1.0 + x[j].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (plant.nominal_rate(&xp, u) - plant.nominal_rate(&xm, u)) / (2.0 * h);
        a.set_column(j, &col);
    }
    for j in 0..m {
        let h = 1e-6 * (1.0 + u[j].abs());
        let mut up = u.clone();
        let mut um = u.clone();
        up[j] += h;
        um[j] -= h;
        let col = (plant.nominal_rate(x, &up) - plant.nominal_rate(x, &um)) / (2.0 * h);
        b.set_column(j, &col);
    }
    (a, b)
}

/// LQR about the flat-ground upright equilibrium.
pub fn lqr_baseline(params: &SegwayParams, q_diag: &[f64], r: f64) -> Result<LqrSolution, DynamicsError> {
    if q_diag.len() != 4 {
        return Err(DynamicsError::Dimension(format!("Q diagonal has {} entries, expected 4", q_diag.len())));
    }
    super::require("LQR R", "positive", r > 0.0, r)?;
    let plant = super::segway_dynamics(params)?;
    let (a, b) = linearize(&plant, &DVector::zeros(4), &DVector::zeros(1));
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(q_diag));
    lqr(&a, &b, &q, &DMatrix::from_element(1, 1, r))
}

/// Newton iteration for `sign(M)` with determinant scaling.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>, DynamicsError> {
    let dim = z.nrows() as f64;
    for _ in 0..100 {
        let inv = z
            .clone()
            .try_inverse()
            .ok_or_else(|| DynamicsError::NotStabilizable("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let det = z.determinant().abs();
        let c = if det.is_finite() && det > 0.0 { det.powf(1.0 / dim) } else { 1.0 };
        let next = 0.5 * (&z / c + c * inv);
        let change = (&next - &z).norm();
        let scale = next.norm();
        z = next;
        if change <= 1e-13 * scale {
            return Ok(z);
        }
    }
    Err(DynamicsError::NotStabilizable("sign iteration did not converge".into()))
}

/// Solves `AᵀX + XA + C = 0` through the Kronecker form.
fn lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let at = a.transpose();
    let op = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, c.iter().map(|v| -v));
    let sol = op.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, sol.as_slice()))
}
