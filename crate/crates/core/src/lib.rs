//! Robust safety-critical control with disturbance-observer-based control
//! barrier functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`qp`]: dense active-set solver for the per-step quadratic programs.
//! - [`safety`]: barrier/Lyapunov specifications and the linear constraint
//!   rows of every controller variant (nominal, ISSf, observer-robust).
//! - [`observer`]: high-gain input disturbance observer with its
//!   closed-form estimation-error envelope.
//! - [`dynamics`]: adaptive cruise control and planar Segway plants, the
//!   disturbance signals and the LQR baseline.
//! - [`sim`]: fixed-step closed-loop simulation and safety metrics.
//! - [`cli`]: scenario files, presets, CSV/report output and comparisons.

pub mod cli;
pub mod dynamics;
pub mod observer;
pub mod qp;
pub mod safety;
pub mod sim;

/// State vectors are dense column vectors.
pub type State = nalgebra::DVector<f64>;
