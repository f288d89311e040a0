//! Tamed theta Euler-Maruyama scheme for the interacting particle system.
//!
//! For `k >= 0` the split-step form is
//!
//! ```text
//! Y_k     = D(Y_{k-m}) + z_k - D(z_{k-m}) + theta * dt * b_dt(Y_k, Y_{k-m}, mu_k)
//! z_{k+1} = D(z_{k+1-m}) + z_k - D(z_{k-m}) + dt * b_dt(Y_k, Y_{k-m}, mu_k)
//!           + sigma(mu_k) dB_k
//! ```
//!
//! where `mu_k` is the empirical measure of `Y_k` across particles,
//! `b_dt = b / (1 + dt^alpha |b|)`, and the first line is an ensemble fixed
//! point solved by Picard iteration. History before `t = 0` is the initial
//! segment, and `z_0 = xi(0) - theta * dt * b_dt(xi(0), xi(-tau), mu_0)`.

mod drivers;
mod output;
mod stepper;
mod taming;

pub use drivers::{coarsen_driver, Drivers};
pub use output::{piecewise_constant_interpolant, PicardStats, SimulationOutput};
pub use stepper::{
    implicit_stage_solve, simulate, simulate_direct, simulate_with_drivers, step_explicit,
    step_split, EnsembleState, ImplicitSolution, StepContext,
};
pub use taming::{tame_drift, tame_in_place};

use thiserror::Error;

use crate::fbm::FbmError;
use crate::model::NeutralDelayProblem;
use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite state at step {step} (particle {particle} of {n_particles})")]
    Divergence { step: usize, particle: usize, n_particles: usize },
    #[error(
        "implicit stage did not converge at step {step} with {n_particles} particles: \
         residual {residual:e} after {iterations} iterations"
    )]
    NonConvergence { step: usize, iterations: usize, residual: f64, n_particles: usize },
    #[error("driver shape mismatch: {0}")]
    DriverShape(String),
    #[error("time {t} outside [-tau, T] = [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Fbm(#[from] FbmError),
}

impl SchemeError {
    /// True for errors caused by the dynamics (blow-up or a failed implicit
    /// solve) rather than by the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Self::Divergence { .. } | Self::NonConvergence { .. })
    }
}

/// Discretisation and solver parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig<F> {
    /// Implicitness in `[0, 1]`.
    pub theta: F,
    /// Taming exponent in `(0, 1/2]`.
    pub alpha: F,
    /// Steps per delay interval: `dt = tau / m`.
    pub m: usize,
    pub n_particles: usize,
    pub picard_tol: F,
    pub picard_max_iters: usize,
    pub seed: u64,
    /// `false` disables taming; only meant for contrast diagnostics.
    pub tamed: bool,
}

impl<F: Real> Default for SchemeConfig<F> {
    fn default() -> Self {
        Self {
            theta: F::lit(0.5),
            alpha: F::lit(0.5),
            m: 16,
            n_particles: 64,
            picard_tol: F::lit(1e-12),
            picard_max_iters: 100,
            seed: 0,
            tamed: true,
        }
    }
}

/// Relative tolerance for `T / dt` being an integer.
pub const GRID_RATIO_TOL: f64 = 1e-12;

impl<F: Real> SchemeConfig<F> {
    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.theta >= F::zero() && self.theta <= F::one()) {
            v.push(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if !(self.alpha > F::zero() && self.alpha <= F::lit(0.5)) {
            v.push(format!("alpha must lie in (0, 0.5], got {}", self.alpha));
        }
        if self.m == 0 {
            v.push("m must be at least 1".into());
        }
        if self.n_particles == 0 {
            v.push("N must be at least 1".into());
        }
        if !(self.picard_tol > F::zero() && self.picard_tol.is_finite()) {
            v.push(format!("picard_tol must be positive, got {}", self.picard_tol));
        }
        if self.picard_max_iters == 0 {
            v.push("picard_max_iters must be at least 1".into());
        }
        v
    }

    /// Step size and step count for `problem`, checking `dt = tau/m = T/M`
    /// with integer `M` and `dt < 1`.
    pub fn grid_for(&self, problem: &NeutralDelayProblem<F>) -> Result<(F, usize), SchemeError> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(SchemeError::InvalidConfig(v.join("; ")));
        }
        step_count(problem.tau(), problem.horizon(), self.m).map_err(SchemeError::InvalidConfig)
    }
}

/// `(dt, M)` with `dt = tau / m` and `M = T / dt` an integer.
pub fn step_count<F: Real>(tau: F, horizon: F, m: usize) -> Result<(F, usize), String> {
    if m == 0 {
        return Err("m must be at least 1".into());
    }
    let dt = tau / F::from_count(m);
    if !(dt < F::one()) {
        return Err(format!("step size tau/m = {dt} must be below 1"));
    }
    let ratio = horizon / dt;
    let rounded = ratio.round();
    let tol = F::lit(GRID_RATIO_TOL) * rounded.max(F::one());
    if rounded < F::one() || (ratio - rounded).abs() > tol {
        return Err(format!(
            "T/dt = {} / {} = {} is not a positive integer",
            horizon, dt, ratio
        ));
    }
    let steps = rounded.to_usize().ok_or_else(|| "step count overflow".to_string())?;
    Ok((dt, steps))
}
