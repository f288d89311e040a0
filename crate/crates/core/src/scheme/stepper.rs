use super::output::{PicardStats, SimulationOutput};
use super::taming::tame_in_place;
use super::{Drivers, SchemeConfig, SchemeError};
use crate::fbm::{FbmGenerator, TimeGrid};
use crate::measure::MeasureView;
use crate::model::NeutralDelayProblem;
use crate::num::Real;

/// Relaxation factors tried in turn by the implicit stage, each with the
/// full iteration budget.
pub const PICARD_RELAXATION: &[f64] = &[1.0, 0.5, 0.25];

/// Resolved per-step parameters shared by the stepping routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext<F> {
    pub dt: F,
    pub theta: F,
    pub alpha: F,
    pub m: usize,
    pub n_particles: usize,
    pub dim: usize,
    pub picard_tol: F,
    pub picard_max_iters: usize,
    pub tamed: bool,
}

impl<F: Real> StepContext<F> {
    /// Context and step count `M = T / dt` for a problem/config pair.
    pub fn new(
        problem: &NeutralDelayProblem<F>,
        config: &SchemeConfig<F>,
    ) -> Result<(Self, usize), SchemeError> {
        let (dt, n_steps) = config.grid_for(problem)?;
        if config.theta > F::zero() && config.theta * dt.powf(F::one() - config.alpha) >= F::one() {
            log::warn!(
                "theta * dt^(1 - alpha) = {} >= 1: Picard iteration may not contract",
                config.theta * dt.powf(F::one() - config.alpha)
            );
        }
        Ok((
            Self {
                dt,
                theta: config.theta,
                alpha: config.alpha,
                m: config.m,
                n_particles: config.n_particles,
                dim: problem.dim(),
                picard_tol: config.picard_tol,
                picard_max_iters: config.picard_max_iters,
                tamed: config.tamed,
            },
            n_steps,
        ))
    }

    /// Length of one `N x d` ensemble block.
    #[inline]
    pub fn block(&self) -> usize {
        self.n_particles * self.dim
    }
}

/// Last `m + 1` grid columns of `Y` and `z`, indexed by absolute step.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState<F> {
    k: usize,
    m: usize,
    y: Vec<Vec<F>>,
    z: Vec<Vec<F>>,
}

impl<F: Real> EnsembleState<F> {
    /// `Y_j = z_j = xi(j dt)` for `j = -m..=0`, then
    /// `z_0 = xi(0) - theta dt b_dt(xi(0), xi(-tau), mu_0)`.
    pub fn initial(problem: &NeutralDelayProblem<F>, ctx: &StepContext<F>) -> Self {
        let m = ctx.m;
        let mut y = vec![vec![F::zero(); ctx.block()]; m + 1];
        for j in 0..=m {
            // absolute index -(m - j)
            let t = -F::from_count(m - j) * ctx.dt;
            let xi = problem.initial_vec(t);
            let slot = slot_of(j as isize - m as isize, m);
            for chunk in y[slot].chunks_exact_mut(ctx.dim) {
                chunk.copy_from_slice(&xi);
            }
        }
        let mut z = y.clone();
        if ctx.theta > F::zero() {
            let y0 = &y[slot_of(0, m)];
            let yd = &y[slot_of(-(m as isize), m)];
            let mut b = vec![F::zero(); ctx.block()];
            tamed_drift_ensemble(problem, ctx, y0, yd, &MeasureView::new(y0, ctx.dim), &mut b);
            let z0 = &mut z[slot_of(0, m)];
            for (zi, bi) in z0.iter_mut().zip(&b) {
                *zi -= ctx.theta * ctx.dt * *bi;
            }
        }
        Self { k: 0, m, y, z }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `Y_{k - lag}`, `lag <= m`.
    pub fn y(&self, lag: usize) -> &[F] {
        &self.y[self.slot(lag)]
    }

    /// `z_{k - lag}`, `lag <= m`.
    pub fn z(&self, lag: usize) -> &[F] {
        &self.z[self.slot(lag)]
    }

    #[inline]
    fn slot(&self, lag: usize) -> usize {
        debug_assert!(lag <= self.m);
        slot_of(self.k as isize - lag as isize, self.m)
    }
}

#[inline]
fn slot_of(index: isize, m: usize) -> usize {
    index.rem_euclid(m as isize + 1) as usize
}

/// Solution of the implicit stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitSolution<F> {
    pub y: Vec<F>,
    pub iterations: usize,
    pub residual: F,
}

fn neutral_ensemble<F: Real>(problem: &NeutralDelayProblem<F>, dim: usize, src: &[F], out: &mut [F]) {
    for (s, o) in src.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
        problem.neutral(s, o);
    }
}

/// `b_dt(x_i, y_i, mu)` for every particle.
fn tamed_drift_ensemble<F: Real>(
    problem: &NeutralDelayProblem<F>,
    ctx: &StepContext<F>,
    x: &[F],
    y: &[F],
    mu: &MeasureView<'_, F>,
    out: &mut [F],
) {
    let d = ctx.dim;
    for ((xi, yi), o) in x.chunks_exact(d).zip(y.chunks_exact(d)).zip(out.chunks_exact_mut(d)) {
        problem.drift(xi, yi, mu, o);
        if ctx.tamed {
            tame_in_place(o, ctx.dt, ctx.alpha);
        }
    }
}

/// `sigma(mu) dB_i` for every particle.
fn noise_ensemble<F: Real>(
    problem: &NeutralDelayProblem<F>,
    dim: usize,
    mu: &MeasureView<'_, F>,
    db: &[F],
    out: &mut [F],
) {
    let mut sigma = vec![F::zero(); dim * dim];
    problem.diffusion(mu, &mut sigma);
    for (dbi, o) in db.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
        for (r, or) in o.iter_mut().enumerate() {
            *or = sigma[r * dim..(r + 1) * dim]
                .iter()
                .zip(dbi)
                .fold(F::zero(), |acc, (&s, &w)| acc + s * w);
        }
    }
}

/// `((D(new_delay) + cur) - D(old_delay)) + b dt + noise`, the shared
/// update of the direct and split recursions.
fn neutral_update<F: Real>(d_new: &[F], cur: &[F], d_old: &[F], b: &[F], dt: F, noise: &[F], out: &mut [F]) {
    for i in 0..out.len() {
        out[i] = d_new[i] + cur[i] - d_old[i] + b[i] * dt + noise[i];
    }
}

fn first_non_finite<F: Real>(v: &[F], dim: usize) -> Option<usize> {
    v.iter().position(|x| !x.is_finite()).map(|p| p / dim)
}

/// Ensemble fixed point of
/// `Y = D(y_delay) + z - D(z_delay) + theta dt b_dt(Y, y_delay, mu(Y))`
/// by Picard iteration started from the explicit predictor.
pub fn implicit_stage_solve<F: Real>(
    problem: &NeutralDelayProblem<F>,
    ctx: &StepContext<F>,
    z: &[F],
    z_delay: &[F],
    y_delay: &[F],
    step: usize,
) -> Result<ImplicitSolution<F>, SchemeError> {
    let d = ctx.dim;
    let n = z.len();
    let mut dy = vec![F::zero(); n];
    let mut dz = vec![F::zero(); n];
    neutral_ensemble(problem, d, y_delay, &mut dy);
    neutral_ensemble(problem, d, z_delay, &mut dz);
    let base: Vec<F> = (0..n).map(|i| z[i] + (dy[i] - dz[i])).collect();
    if ctx.theta == F::zero() {
        return Ok(ImplicitSolution { y: base, iterations: 0, residual: F::zero() });
    }

    let scale = ctx.theta * ctx.dt;
    let mut next = vec![F::zero(); n];
    let mut b = vec![F::zero(); n];
    let mut residual = F::infinity();
    let mut iterations = 0;
    // Near a root of a steep drift the undamped map can stop contracting,
    // so failed sweeps restart from the predictor with relaxation.
    for &omega in PICARD_RELAXATION {
        let omega = F::lit(omega);
        let mut current = base.clone();
        for _ in 0..ctx.picard_max_iters {
            iterations += 1;
            {
                let mu = MeasureView::new(&current, d);
                tamed_drift_ensemble(problem, ctx, &current, y_delay, &mu, &mut b);
            }
            residual = F::zero();
            for i in 0..n {
                let target = base[i] + scale * b[i];
                residual = residual.max((target - current[i]).abs());
                next[i] = if omega == F::one() { target } else { current[i] + omega * (target - current[i]) };
            }
            if let Some(particle) = first_non_finite(&next, d) {
                return Err(SchemeError::Divergence { step, particle, n_particles: ctx.n_particles });
            }
            std::mem::swap(&mut current, &mut next);
            if residual <= ctx.picard_tol {
                return Ok(ImplicitSolution { y: current, iterations, residual });
            }
        }
        log::debug!("step {step}: Picard sweep with relaxation {omega} stalled at residual {residual:e}");
    }
    Err(SchemeError::NonConvergence {
        step,
        iterations,
        residual: residual.to_f64_lossy(),
        n_particles: ctx.n_particles,
    })
}

/// One split step: `z_{k+1}` from `Y_k`, then `Y_{k+1}` from the implicit
/// stage. Returns the Picard iteration count and residual of that stage.
pub fn step_split<F: Real>(
    state: &mut EnsembleState<F>,
    problem: &NeutralDelayProblem<F>,
    ctx: &StepContext<F>,
    db: &[F],
) -> Result<(usize, F), SchemeError> {
    let (d, m, n) = (ctx.dim, ctx.m, ctx.block());
    let step = state.k + 1;

    let mut z_next = vec![F::zero(); n];
    {
        let yk = state.y(0);
        let mu = MeasureView::new(yk, d);
        let mut b = vec![F::zero(); n];
        tamed_drift_ensemble(problem, ctx, yk, state.y(m), &mu, &mut b);
        let mut noise = vec![F::zero(); n];
        noise_ensemble(problem, d, &mu, db, &mut noise);
        let mut d_new = vec![F::zero(); n];
        let mut d_old = vec![F::zero(); n];
        neutral_ensemble(problem, d, state.z(m - 1), &mut d_new);
        neutral_ensemble(problem, d, state.z(m), &mut d_old);
        neutral_update(&d_new, state.z(0), &d_old, &b, ctx.dt, &noise, &mut z_next);
    }
    if let Some(particle) = first_non_finite(&z_next, d) {
        return Err(SchemeError::Divergence { step, particle, n_particles: ctx.n_particles });
    }

    state.k = step;
    let slot = state.slot(0);
    state.z[slot] = z_next;
    let sol = implicit_stage_solve(problem, ctx, state.z(0), state.z(m), state.y(m), step)?;
    if let Some(particle) = first_non_finite(&sol.y, d) {
        return Err(SchemeError::Divergence { step, particle, n_particles: ctx.n_particles });
    }
    state.y[slot] = sol.y;
    Ok((sol.iterations, sol.residual))
}

/// One step of the direct recursion (theta = 0 only):
/// `Y_{k+1} = D(Y_{k+1-m}) + Y_k - D(Y_{k-m}) + b_dt(Y_k, Y_{k-m}, mu_k) dt + sigma(mu_k) dB_k`.
pub fn step_explicit<F: Real>(
    state: &mut EnsembleState<F>,
    problem: &NeutralDelayProblem<F>,
    ctx: &StepContext<F>,
    db: &[F],
) -> Result<(), SchemeError> {
    if ctx.theta != F::zero() {
        return Err(SchemeError::InvalidConfig(format!(
            "direct recursion requires theta = 0, got {}",
            ctx.theta
        )));
    }
    let (d, m, n) = (ctx.dim, ctx.m, ctx.block());
    let step = state.k + 1;
    let mut y_next = vec![F::zero(); n];
    {
        let yk = state.y(0);
        let mu = MeasureView::new(yk, d);
        let mut b = vec![F::zero(); n];
        tamed_drift_ensemble(problem, ctx, yk, state.y(m), &mu, &mut b);
        let mut noise = vec![F::zero(); n];
        noise_ensemble(problem, d, &mu, db, &mut noise);
        let mut d_new = vec![F::zero(); n];
        let mut d_old = vec![F::zero(); n];
        neutral_ensemble(problem, d, state.y(m - 1), &mut d_new);
        neutral_ensemble(problem, d, state.y(m), &mut d_old);
        neutral_update(&d_new, yk, &d_old, &b, ctx.dt, &noise, &mut y_next);
    }
    if let Some(particle) = first_non_finite(&y_next, d) {
        return Err(SchemeError::Divergence { step, particle, n_particles: ctx.n_particles });
    }
    state.k = step;
    let slot = state.slot(0);
    state.z[slot] = y_next.clone();
    state.y[slot] = y_next;
    Ok(())
}

fn check_drivers<F: Real>(
    ctx: &StepContext<F>,
    n_steps: usize,
    drivers: &Drivers<F>,
) -> Result<(), SchemeError> {
    let dt_ok = (drivers.dt() - ctx.dt).abs() <= F::lit(1e-9) * ctx.dt;
    if drivers.n_particles() != ctx.n_particles
        || drivers.dim() != ctx.dim
        || drivers.n_steps() != n_steps
        || !dt_ok
    {
        return Err(SchemeError::DriverShape(format!(
            "drivers are {} particles x {} dims x {} steps of {}, scheme needs {} x {} x {} of {}",
            drivers.n_particles(),
            drivers.dim(),
            drivers.n_steps(),
            drivers.dt(),
            ctx.n_particles,
            ctx.dim,
            n_steps,
            ctx.dt
        )));
    }
    Ok(())
}

fn run<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &SchemeConfig<F>,
    drivers: &Drivers<F>,
    direct: bool,
) -> Result<SimulationOutput<F>, SchemeError> {
    let (ctx, n_steps) = StepContext::new(problem, config)?;
    check_drivers(&ctx, n_steps, drivers)?;
    let block = ctx.block();
    let mut state = EnsembleState::initial(problem, &ctx);
    let mut y = Vec::with_capacity((n_steps + 1) * block);
    let mut z = Vec::with_capacity((n_steps + 1) * block);
    y.extend_from_slice(state.y(0));
    z.extend_from_slice(state.z(0));
    let mut stats = PicardStats::default();
    let mut db = vec![F::zero(); block];
    for k in 0..n_steps {
        drivers.step_into(k, &mut db);
        if direct {
            step_explicit(&mut state, problem, &ctx, &db)?;
        } else {
            let (iters, residual) = step_split(&mut state, problem, &ctx, &db)?;
            if ctx.theta > F::zero() {
                stats.record(iters, residual.to_f64_lossy());
            }
        }
        y.extend_from_slice(state.y(0));
        z.extend_from_slice(state.z(0));
    }
    Ok(SimulationOutput {
        problem_name: problem.name().to_string(),
        config: *config,
        dt: ctx.dt,
        n_steps,
        n_particles: ctx.n_particles,
        dim: ctx.dim,
        y,
        z,
        stats,
    })
}

/// Runs the split-step scheme on the given noise realisation.
pub fn simulate_with_drivers<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &SchemeConfig<F>,
    drivers: &Drivers<F>,
) -> Result<SimulationOutput<F>, SchemeError> {
    run(problem, config, drivers, false)
}

/// Runs the direct recursion (theta = 0) on the given noise realisation.
pub fn simulate_direct<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &SchemeConfig<F>,
    drivers: &Drivers<F>,
) -> Result<SimulationOutput<F>, SchemeError> {
    run(problem, config, drivers, true)
}

/// Samples drivers for replication 0 of `config.seed` and runs the
/// split-step scheme.
pub fn simulate<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &SchemeConfig<F>,
) -> Result<SimulationOutput<F>, SchemeError> {
    let (ctx, n_steps) = StepContext::new(problem, config)?;
    let grid = TimeGrid::new(ctx.dt, n_steps)?;
    let generator = FbmGenerator::fast(grid, problem.hurst())?;
    let drivers = Drivers::generate(&generator, ctx.n_particles, ctx.dim, config.seed, 0);
    simulate_with_drivers(problem, config, &drivers)
}
