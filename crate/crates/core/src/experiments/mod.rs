//! Monte Carlo convergence studies: strong error in the step size, the
//! propagation-of-chaos error in the particle count, uniform moment bounds
//! and the time-continuity modulus.
//!
//! Every study couples its runs through shared noise. Replication `r` samples
//! drivers from `(seed, r, stream)` on the finest grid and coarser runs sum
//! consecutive increments, so runs at different step sizes see the same fBm
//! path. Replications run in parallel and are collected in index order, so
//! tables do not depend on the thread count.

mod suites;
mod table;

pub use suites::{
    continuity_modulus_suite, moment_bound_suite, ModulusReport, MomentReport, MomentRow,
};
pub use table::{fit_rate, ErrorRow, ErrorTable, RateEstimate};

use rayon::prelude::*;
use thiserror::Error;

use crate::fbm::{FbmError, FbmGenerator, TimeGrid};
use crate::model::NeutralDelayProblem;
use crate::num::{dist, Real};
use crate::scheme::{simulate_with_drivers, Drivers, SchemeConfig, SchemeError, SimulationOutput};
use table::root_mean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),
    #[error("rate fit needs at least two usable rows, got {0}")]
    TooFewRows(usize),
    #[error("every replication failed at the reference level")]
    ReferenceFailed,
    #[error("run at ladder level {level} failed: {source}")]
    Level { level: usize, source: SchemeError },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Fbm(#[from] FbmError),
}

/// Ladder and Monte Carlo settings shared by all studies.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<F> {
    /// Base scheme settings. `m` and `n_particles` are overridden per level.
    pub scheme: SchemeConfig<F>,
    /// Steps per delay interval, one run per entry.
    pub ladder_m: Vec<usize>,
    /// Reference resolution; every ladder entry must divide it.
    pub m_ref: usize,
    /// Particle counts for the chaos study.
    pub ladder_n: Vec<usize>,
    /// Reference particle count for the chaos study.
    pub n_ref: usize,
    /// Particles per run in the step-size studies.
    pub n_particles: usize,
    /// Independent replications.
    pub n_mc: usize,
    /// Moment exponent; needs `p * H > 1`.
    pub p: F,
}

impl<F: Real> Default for ExperimentConfig<F> {
    fn default() -> Self {
        Self {
            scheme: SchemeConfig::default(),
            ladder_m: vec![4, 8, 16, 32],
            m_ref: 256,
            ladder_n: vec![8, 16, 32, 64],
            n_ref: 512,
            n_particles: 64,
            n_mc: 64,
            p: F::lit(2.0),
        }
    }
}

impl<F: Real> ExperimentConfig<F> {
    /// Every violated constraint against `problem`, in a stable order.
    pub fn violations(&self, problem: &NeutralDelayProblem<F>) -> Vec<String> {
        let mut v = self.scheme.violations();
        let h = problem.hurst().value();
        if !(self.p * h > F::one()) {
            v.push(format!("p * H must exceed 1, got p = {} and H = {}", self.p, h));
        }
        if self.n_mc == 0 {
            v.push("n_mc must be at least 1".into());
        }
        if self.n_particles == 0 {
            v.push("n_particles must be at least 1".into());
        }
        if self.ladder_m.is_empty() {
            v.push("ladder_m must not be empty".into());
        }
        if self.m_ref == 0 {
            v.push("m_ref must be at least 1".into());
        } else {
            for &m in &self.ladder_m {
                if m == 0 || self.m_ref % m != 0 {
                    v.push(format!("ladder step m = {m} does not divide m_ref = {}", self.m_ref));
                }
            }
            if let Err(e) = crate::scheme::step_count(problem.tau(), problem.horizon(), self.m_ref) {
                v.push(format!("reference grid: {e}"));
            }
        }
        for &m in &self.ladder_m {
            if m > 0 {
                if let Err(e) = crate::scheme::step_count(problem.tau(), problem.horizon(), m) {
                    v.push(format!("ladder step m = {m}: {e}"));
                }
            }
        }
        for &n in &self.ladder_n {
            if n == 0 || n > self.n_ref {
                v.push(format!("ladder size N = {n} must lie in [1, n_ref = {}]", self.n_ref));
            }
        }
        v
    }

    fn check(&self, problem: &NeutralDelayProblem<F>) -> Result<(), ExperimentError> {
        let v = self.violations(problem);
        if v.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::InvalidConfig(v))
        }
    }

    pub(crate) fn scheme_at(&self, m: usize, n_particles: usize) -> SchemeConfig<F> {
        SchemeConfig { m, n_particles, ..self.scheme }
    }

    /// Drivers for replication `r` on the reference grid.
    pub(crate) fn reference_generator(
        &self,
        problem: &NeutralDelayProblem<F>,
        m: usize,
    ) -> Result<FbmGenerator<F>, ExperimentError> {
        let (dt, n_steps) = crate::scheme::step_count(problem.tau(), problem.horizon(), m)
            .map_err(|e| ExperimentError::InvalidConfig(vec![e]))?;
        Ok(FbmGenerator::fast(TimeGrid::new(dt, n_steps)?, problem.hurst())?)
    }
}

/// Result of one run inside a replication: a value, or a numerical failure.
pub(crate) type LevelResult<F> = Result<F, SchemeError>;

/// Runs and keeps numerical failures as values; other errors abort.
pub(crate) fn run_level<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &SchemeConfig<F>,
    drivers: &Drivers<F>,
) -> Result<LevelResult<SimulationOutput<F>>, SchemeError> {
    match simulate_with_drivers(problem, config, drivers) {
        Ok(out) => Ok(Ok(out)),
        Err(e) if e.is_numerical() => {
            log::warn!("{e}");
            Ok(Err(e))
        }
        Err(e) => Err(e),
    }
}

/// `mean_i (max_k |Y^ref_{k*stride} - Y_k|)^p` over the first `n` particles.
pub(crate) fn sup_error_power<F: Real>(
    reference: &SimulationOutput<F>,
    coarse: &SimulationOutput<F>,
    stride: usize,
    p: F,
) -> F {
    let n = coarse.n_particles;
    let mut total = F::zero();
    for i in 0..n {
        let mut worst = F::zero();
        for k in 0..=coarse.n_steps {
            worst = worst.max(dist(reference.state(k * stride, i), coarse.state(k, i)));
        }
        total += worst.powf(p);
    }
    total / F::from_count(n)
}

/// Collects per-replication level values into table rows.
pub(crate) fn assemble_rows<F: Real>(
    params: &[F],
    per_rep: &[Option<Vec<LevelResult<F>>>],
    p: F,
) -> Result<Vec<ErrorRow<F>>, ExperimentError> {
    let usable: Vec<&Vec<LevelResult<F>>> = per_rep.iter().flatten().collect();
    if usable.is_empty() {
        return Err(ExperimentError::ReferenceFailed);
    }
    Ok(params
        .iter()
        .enumerate()
        .map(|(level, &param)| {
            let values: Vec<F> = usable.iter().filter_map(|r| r[level].as_ref().ok().copied()).collect();
            let failures = usable.len() - values.len();
            let (error, stderr) = if values.is_empty() { (F::nan(), F::nan()) } else { root_mean(&values, p) };
            ErrorRow { param, error, stderr, n_mc: values.len(), failures }
        })
        .collect())
}

/// Replications whose reference run failed, reported with the table.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable<F> {
    pub table: ErrorTable<F>,
    pub reference_failures: usize,
}

/// Strong error in the step size against a fine reference run sharing the
/// same noise. Rows are indexed by `dt`.
pub fn strong_rate_vs_dt<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &ExperimentConfig<F>,
) -> Result<StudyTable<F>, ExperimentError> {
    config.check(problem)?;
    let generator = config.reference_generator(problem, config.m_ref)?;
    let dim = problem.dim();
    let n = config.n_particles;
    let per_rep: Vec<Option<Vec<LevelResult<F>>>> = (0..config.n_mc as u64)
        .into_par_iter()
        .map(|rep| -> Result<_, ExperimentError> {
            let drivers = Drivers::generate(&generator, n, dim, config.scheme.seed, rep);
            let Ok(reference) = run_level(problem, &config.scheme_at(config.m_ref, n), &drivers)? else {
                return Ok(None);
            };
            let mut levels = Vec::with_capacity(config.ladder_m.len());
            for &m in &config.ladder_m {
                let stride = config.m_ref / m;
                let coarse = drivers.coarsen(stride)?;
                levels.push(
                    run_level(problem, &config.scheme_at(m, n), &coarse)?
                        .map(|out| sup_error_power(&reference, &out, stride, config.p)),
                );
            }
            Ok(Some(levels))
        })
        .collect::<Result<_, _>>()?;
    let reference_failures = per_rep.iter().filter(|r| r.is_none()).count();
    let params: Vec<F> = config.ladder_m.iter().map(|&m| problem.tau() / F::from_count(m)).collect();
    Ok(StudyTable { table: ErrorTable::new(assemble_rows(&params, &per_rep, config.p)?), reference_failures })
}

/// Propagation-of-chaos error: each ladder size `N` reuses the first `N`
/// driver streams of an `n_ref`-particle reference run. Rows are indexed by
/// `N`.
pub fn poc_rate_vs_n<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &ExperimentConfig<F>,
) -> Result<StudyTable<F>, ExperimentError> {
    config.check(problem)?;
    if config.ladder_n.is_empty() {
        return Err(ExperimentError::InvalidConfig(vec!["ladder_n must not be empty".into()]));
    }
    let m = config.scheme.m;
    let generator = config.reference_generator(problem, m)?;
    let dim = problem.dim();
    let per_rep: Vec<Option<Vec<LevelResult<F>>>> = (0..config.n_mc as u64)
        .into_par_iter()
        .map(|rep| -> Result<_, ExperimentError> {
            let drivers = Drivers::generate(&generator, config.n_ref, dim, config.scheme.seed, rep);
            let Ok(reference) = run_level(problem, &config.scheme_at(m, config.n_ref), &drivers)? else {
                return Ok(None);
            };
            let mut levels = Vec::with_capacity(config.ladder_n.len());
            for &n in &config.ladder_n {
                let sub = drivers.prefix(n)?;
                levels.push(
                    run_level(problem, &config.scheme_at(m, n), &sub)?
                        .map(|out| sup_error_power(&reference, &out, 1, config.p)),
                );
            }
            Ok(Some(levels))
        })
        .collect::<Result<_, _>>()?;
    let reference_failures = per_rep.iter().filter(|r| r.is_none()).count();
    let params: Vec<F> = config.ladder_n.iter().map(|&n| F::from_count(n)).collect();
    Ok(StudyTable { table: ErrorTable::new(assemble_rows(&params, &per_rep, config.p)?), reference_failures })
}
