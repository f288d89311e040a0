use super::{SchemeConfig, SchemeError};
use crate::model::NeutralDelayProblem;
use crate::num::Real;

/// Picard iteration counts accumulated over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PicardStats {
    pub solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl PicardStats {
    pub(crate) fn record(&mut self, iterations: usize, residual: f64) {
        self.solves += 1;
        self.total_iterations += iterations;
        self.max_iterations = self.max_iterations.max(iterations);
        self.max_residual = self.max_residual.max(residual);
    }
}

/// Grid values of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput<F> {
    pub problem_name: String,
    pub config: SchemeConfig<F>,
    pub dt: F,
    pub n_steps: usize,
    pub n_particles: usize,
    pub dim: usize,
    /// `Y_{t_k}`, `k = 0..=n_steps`, each an `N x d` block.
    pub y: Vec<F>,
    /// `z_{t_k}`, same layout as `y`.
    pub z: Vec<F>,
    pub stats: PicardStats,
}

impl<F: Real> SimulationOutput<F> {
    #[inline]
    fn block(&self) -> usize {
        self.n_particles * self.dim
    }

    pub fn t(&self, k: usize) -> F {
        F::from_count(k) * self.dt
    }

    /// All particles at grid index `k`.
    pub fn y_at(&self, k: usize) -> &[F] {
        &self.y[k * self.block()..(k + 1) * self.block()]
    }

    pub fn z_at(&self, k: usize) -> &[F] {
        &self.z[k * self.block()..(k + 1) * self.block()]
    }

    /// Particle `i` at grid index `k`.
    pub fn state(&self, k: usize, i: usize) -> &[F] {
        let start = k * self.block() + i * self.dim;
        &self.y[start..start + self.dim]
    }

    pub fn value(&self, k: usize, i: usize, c: usize) -> F {
        self.y[k * self.block() + i * self.dim + c]
    }

    /// Largest absolute coordinate over the whole run.
    pub fn sup_norm(&self) -> F {
        self.y.iter().fold(F::zero(), |acc, &x| acc.max(x.abs()))
    }
}

/// Left-continuous step interpolant: `xi(t)` for `t <= 0`, `Y_{t_k}` on
/// `[t_k, t_{k+1})`, and `Y_{t_M}` at `t = T`.
pub fn piecewise_constant_interpolant<F: Real>(
    output: &SimulationOutput<F>,
    problem: &NeutralDelayProblem<F>,
    t: F,
) -> Result<Vec<F>, SchemeError> {
    let horizon = output.t(output.n_steps);
    let lo = -problem.tau();
    if !(t >= lo && t <= horizon) {
        return Err(SchemeError::OutOfRange {
            t: t.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: horizon.to_f64_lossy(),
        });
    }
    if t <= F::zero() {
        let xi = problem.initial_vec(t);
        return Ok((0..output.n_particles).flat_map(|_| xi.iter().copied()).collect());
    }
    let mut k = (t / output.dt).floor().to_usize().unwrap_or(0).min(output.n_steps);
    // guard the floor against rounding just below a grid point
    if k < output.n_steps && output.t(k + 1) <= t {
        k += 1;
    }
    Ok(output.y_at(k).to_vec())
}
