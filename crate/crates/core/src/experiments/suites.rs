use rayon::prelude::*;

use super::table::root_mean;
use super::{fit_rate, run_level, ErrorRow, ErrorTable, ExperimentConfig, ExperimentError, RateEstimate};
use crate::model::NeutralDelayProblem;
use crate::num::{dist, norm, Real};
use crate::scheme::{Drivers, SchemeError, SimulationOutput};

/// Largest relative spread of the moment curve that still passes.
pub const MOMENT_SPREAD_TOL: f64 = 0.1;
/// Combined standard errors the finest level may exceed the coarsest by
/// before the curve counts as trending upward.
pub const MOMENT_TREND_SIGMAS: f64 = 3.0;
/// Slack on the fitted modulus exponent, as a multiple of `p`.
pub const MODULUS_SLACK: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentRow<F> {
    pub m: usize,
    pub dt: F,
    /// `sup_k (E|Y_{t_k}|^p)^{1/p}`.
    pub moment: F,
    /// Standard error at the maximising step.
    pub stderr: F,
    /// Grid index attaining the supremum.
    pub argmax: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport<F> {
    /// Ordered as the ladder.
    pub rows: Vec<MomentRow<F>>,
    /// `(max - min) / max` across the ladder.
    pub spread: F,
    /// Finest level above the coarsest by more than the trend threshold.
    pub upward_trend: bool,
    pub passed: bool,
}

fn first_failure<T>(per_rep: &[Vec<Result<T, SchemeError>>]) -> Option<(usize, SchemeError)> {
    let levels = per_rep.first().map_or(0, Vec::len);
    (0..levels).find_map(|level| {
        per_rep.iter().find_map(|r| r[level].as_ref().err().map(|e| (level, e.clone())))
    })
}

/// Per-step `mean_i |Y^i_{t_k}|^p`.
fn moment_curve<F: Real>(out: &SimulationOutput<F>, p: F) -> Vec<F> {
    let n = F::from_count(out.n_particles);
    (0..=out.n_steps)
        .map(|k| {
            out.y_at(k).chunks_exact(out.dim).map(|x| norm(x).powf(p)).sum::<F>() / n
        })
        .collect()
}

/// Uniform-in-time moments across the step-size ladder. Any divergence
/// aborts the suite, reporting the first failing ladder position.
pub fn moment_bound_suite<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &ExperimentConfig<F>,
) -> Result<MomentReport<F>, ExperimentError> {
    config.check(problem)?;
    let generator = config.reference_generator(problem, config.m_ref)?;
    let n = config.n_particles;
    let per_rep: Vec<Vec<Result<Vec<F>, SchemeError>>> = (0..config.n_mc as u64)
        .into_par_iter()
        .map(|rep| -> Result<_, ExperimentError> {
            let drivers = Drivers::generate(&generator, n, problem.dim(), config.scheme.seed, rep);
            config
                .ladder_m
                .iter()
                .map(|&m| {
                    let coarse = drivers.coarsen(config.m_ref / m)?;
                    Ok(run_level(problem, &config.scheme_at(m, n), &coarse)?.map(|out| moment_curve(&out, config.p)))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if let Some((level, source)) = first_failure(&per_rep) {
        return Err(ExperimentError::Level { level, source });
    }
    let rows: Vec<MomentRow<F>> = config
        .ladder_m
        .iter()
        .enumerate()
        .map(|(level, &m)| {
            let curves: Vec<&Vec<F>> = per_rep.iter().map(|r| r[level].as_ref().unwrap()).collect();
            let n_steps = curves[0].len();
            let mut best = (F::neg_infinity(), F::zero(), 0);
            for k in 0..n_steps {
                let values: Vec<F> = curves.iter().map(|c| c[k]).collect();
                let (moment, stderr) = root_mean(&values, config.p);
                if moment > best.0 {
                    best = (moment, stderr, k);
                }
            }
            MomentRow { m, dt: problem.tau() / F::from_count(m), moment: best.0, stderr: best.1, argmax: best.2 }
        })
        .collect();
    let max = rows.iter().fold(F::neg_infinity(), |a, r| a.max(r.moment));
    let min = rows.iter().fold(F::infinity(), |a, r| a.min(r.moment));
    let spread = if max > F::zero() { (max - min) / max } else { F::zero() };
    let finest = rows.iter().min_by(|a, b| a.dt.partial_cmp(&b.dt).unwrap()).unwrap();
    let coarsest = rows.iter().max_by(|a, b| a.dt.partial_cmp(&b.dt).unwrap()).unwrap();
    let band = F::lit(MOMENT_TREND_SIGMAS) * (finest.stderr.powi(2) + coarsest.stderr.powi(2)).sqrt();
    let upward_trend = finest.moment - coarsest.moment > band;
    let passed = spread < F::lit(MOMENT_SPREAD_TOL) && !upward_trend;
    Ok(MomentReport { rows, spread, upward_trend, passed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusReport<F> {
    /// Rows indexed by `dt`; `error` is `(E max_k sup |Y(t) - Y(t_k)|^p)^{1/p}`.
    pub table: ErrorTable<F>,
    /// Fitted decay exponent of the p-th moment, `p` times the slope.
    pub exponent: Option<F>,
    pub fit: Option<RateEstimate<F>>,
    /// `((1 - alpha) ∧ H) p`.
    pub expected: F,
    pub passed: bool,
}

/// `mean_i max_k max_{0 <= j < stride} |Y_{k stride + j} - Y_{k stride}|^p`.
fn cell_oscillation_power<F: Real>(out: &SimulationOutput<F>, stride: usize, p: F) -> F {
    let cells = out.n_steps / stride;
    let mut total = F::zero();
    for i in 0..out.n_particles {
        let mut worst = F::zero();
        for k in 0..cells {
            let base = out.state(k * stride, i);
            for j in 1..stride {
                worst = worst.max(dist(out.state(k * stride + j, i), base));
            }
        }
        total += worst.powf(p);
    }
    total / F::from_count(out.n_particles)
}

/// Oscillation of the reference run over coarse cells of each ladder width.
pub fn continuity_modulus_suite<F: Real>(
    problem: &NeutralDelayProblem<F>,
    config: &ExperimentConfig<F>,
) -> Result<ModulusReport<F>, ExperimentError> {
    config.check(problem)?;
    let generator = config.reference_generator(problem, config.m_ref)?;
    let n = config.n_particles;
    let per_rep: Vec<Result<Vec<F>, SchemeError>> = (0..config.n_mc as u64)
        .into_par_iter()
        .map(|rep| -> Result<_, ExperimentError> {
            let drivers = Drivers::generate(&generator, n, problem.dim(), config.scheme.seed, rep);
            Ok(run_level(problem, &config.scheme_at(config.m_ref, n), &drivers)?.map(|out| {
                config.ladder_m.iter().map(|&m| cell_oscillation_power(&out, config.m_ref / m, config.p)).collect()
            }))
        })
        .collect::<Result<_, _>>()?;
    let ok: Vec<&Vec<F>> = per_rep.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures = per_rep.len() - ok.len();
    if ok.is_empty() {
        return Err(ExperimentError::ReferenceFailed);
    }
    let rows = config
        .ladder_m
        .iter()
        .enumerate()
        .map(|(level, &m)| {
            let values: Vec<F> = ok.iter().map(|v| v[level]).collect();
            let (error, stderr) = root_mean(&values, config.p);
            ErrorRow { param: problem.tau() / F::from_count(m), error, stderr, n_mc: values.len(), failures }
        })
        .collect();
    let table = ErrorTable::new(rows);
    let h = problem.hurst().value();
    let expected = (F::one() - config.scheme.alpha).min(h) * config.p;
    // failed replications flag every row; fit on the surviving ones instead
    let mut fit_table = table.clone();
    fit_table.rows.iter_mut().for_each(|r| r.failures = 0);
    let fit = fit_rate(&fit_table).ok();
    let exponent = fit.map(|f| f.slope * config.p);
    let passed = exponent.is_some_and(|e| e >= expected - F::lit(MODULUS_SLACK) * config.p);
    Ok(ModulusReport { table, exponent, fit, expected, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::catalog;

    fn cfg() -> ExperimentConfig<f64> {
        ExperimentConfig {
            ladder_m: vec![4, 8, 16],
            m_ref: 64,
            n_particles: 16,
            n_mc: 8,
            ..Default::default()
        }
    }

    #[test]
    fn constant_solution_has_flat_moments() {
        let p = NeutralDelayProblem::<f64>::builder("frozen", 1)
            .drift(|_, _, _, out| out[0] = 0.0)
            .neutral(|_, out| out[0] = 0.0)
            .diffusion(|_, out| out[0] = 0.0)
            .initial_segment(|_, out| out[0] = 1.5)
            .build()
            .unwrap();
        let r = moment_bound_suite(&p, &cfg()).unwrap();
        assert!(r.rows.iter().all(|row| (row.moment - 1.5).abs() < 1e-15));
        assert_eq!(r.spread, 0.0);
        assert!(r.passed);

        let m = continuity_modulus_suite(&p, &cfg()).unwrap();
        assert!(m.table.rows.iter().all(|row| row.error == 0.0));
        assert!(m.exponent.is_none() && !m.passed);
    }

    #[test]
    fn cubic_moments_stay_level() {
        let p = catalog::cubic_mf::<f64>().problem;
        let r = moment_bound_suite(&p, &cfg()).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.spread < 0.1, "{r:?}");
    }

    #[test]
    fn modulus_shrinks_with_cell_width() {
        let p = catalog::noise_only::<f64>().problem;
        let r = continuity_modulus_suite(&p, &cfg()).unwrap();
        let e: Vec<f64> = r.table.rows.iter().map(|row| row.error).collect();
        assert!(e[0] < e[1] && e[1] < e[2], "{e:?}");
        assert_eq!(r.expected, 1.0);
    }

    #[test]
    fn oscillation_oracle() {
        // one particle, values 0,1,3,2,5 at stride 2: cells {0,1} and {3,2}
        let out = SimulationOutput {
            problem_name: "t".into(),
            config: Default::default(),
            dt: 0.25,
            n_steps: 4,
            n_particles: 1,
            dim: 1,
            y: vec![0.0, 1.0, 3.0, 2.0, 5.0],
            z: vec![0.0; 5],
            stats: Default::default(),
        };
        assert_eq!(cell_oscillation_power(&out, 2, 2.0), 1.0);
        assert_eq!(cell_oscillation_power(&out, 4, 1.0), 3.0);
        assert_eq!(cell_oscillation_power(&out, 1, 1.0), 0.0);
    }
}
