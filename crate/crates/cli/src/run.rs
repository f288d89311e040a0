//! Executes a validated [`RunConfig`] and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use mvfbm::experiments::{poc_rate_vs_n, strong_rate_vs_dt, ExperimentError, StudyTable};
use mvfbm::fbm::{FbmError, FbmGenerator, TimeGrid};
use mvfbm::model::{lookup, validate_all, ValidationOptions};
use mvfbm::scheme::{simulate_with_drivers, step_count, Drivers, SchemeError};
use mvfbm::{Generator, Problem};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{Command, ConfigError, GeneratorKind, RunConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// The run completed but at least one assumption check failed.
    #[error("{0} assumption check(s) failed")]
    ChecksFailed(usize),
    #[error("{0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::ChecksFailed(_) | Self::Numerical(_) => 1,
            Self::Config(_) => 2,
            Self::Divergence(_) => 3,
            Self::NonConvergence(_) => 4,
            Self::Io { .. } => 5,
        }
    }
}

impl From<SchemeError> for RunError {
    fn from(e: SchemeError) -> Self {
        match e {
            SchemeError::Divergence { .. } => Self::Divergence(e.to_string()),
            SchemeError::NonConvergence { .. } => Self::NonConvergence(e.to_string()),
            SchemeError::InvalidConfig(m) => Self::Config(ConfigError(vec![m])),
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl From<FbmError> for RunError {
    fn from(e: FbmError) -> Self {
        Self::Config(ConfigError(vec![e.to_string()]))
    }
}

impl From<ExperimentError> for RunError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidConfig(v) => Self::Config(ConfigError(v)),
            ExperimentError::Level { source, .. } | ExperimentError::Scheme(source) => source.into(),
            ExperimentError::Fbm(f) => f.into(),
            ExperimentError::ReferenceFailed => Self::Divergence(e.to_string()),
            ExperimentError::TooFewRows(_) => Self::Numerical(e.to_string()),
        }
    }
}

/// Files written by a successful run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON has no comments, so summaries carry the header as a field.
fn with_header(cfg: &RunConfig, mut body: Value) -> Value {
    let mut out = json!({ "header": cfg.header(), "seed": cfg.scheme.seed });
    if let (Some(o), Some(b)) = (out.as_object_mut(), body.as_object_mut()) {
        o.append(b);
    }
    out
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| RunError::Io { path: path.clone(), source })?;
        info!("wrote {}", path.display());
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, cfg: &RunConfig, name: &str, columns: &str, body: &str) -> Result<(), RunError> {
        self.write(name, &format!("{}\n{columns}\n{body}", cfg.header()))
    }

    fn json(&mut self, cfg: &RunConfig, name: &str, body: Value) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(&with_header(cfg, body)).expect("json values serialise");
        self.write(name, &(text + "\n"))
    }
}

fn generator(cfg: &RunConfig, problem: &Problem) -> Result<Generator, RunError> {
    let (dt, n_steps) = step_count(problem.tau(), problem.horizon(), cfg.scheme.m)
        .map_err(|m| RunError::Config(ConfigError(vec![m])))?;
    let grid = TimeGrid::new(dt, n_steps)?;
    let g = match cfg.generator {
        GeneratorKind::Fast => FbmGenerator::fast(grid, problem.hurst())?,
        GeneratorKind::Cholesky => FbmGenerator::cholesky(grid, problem.hurst())?,
    };
    if g.is_fallback() {
        warn!("circulant embedding not admissible; sampling by Cholesky");
    }
    Ok(g)
}

/// Runs the configured command, writing every artifact into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    let violations = cfg.violations();
    if !violations.is_empty() {
        return Err(ConfigError(violations).into());
    }
    let problem = cfg.build_problem().map_err(ConfigError)?;
    let dir = Path::new(&cfg.out);
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.to_path_buf(), source })?;
    let mut w = Writer { dir, files: Vec::new() };
    info!("{} on {} with seed {}", cfg.command, problem.name(), cfg.scheme.seed);
    match cfg.command {
        Command::SampleFbm => sample_fbm(cfg, &problem, &mut w)?,
        Command::Simulate => simulate(cfg, &problem, &mut w)?,
        Command::Convergence => {
            let study = strong_rate_vs_dt(&problem, &cfg.experiment())?;
            study_output(cfg, &study, "convergence", "dt", &mut w)?;
        }
        Command::Chaos => {
            let study = poc_rate_vs_n(&problem, &cfg.experiment())?;
            study_output(cfg, &study, "chaos", "N", &mut w)?;
        }
        Command::Validate => validate(cfg, &problem, &mut w)?,
    }
    Ok(RunSummary { files: w.files })
}

fn sample_fbm(cfg: &RunConfig, problem: &Problem, w: &mut Writer<'_>) -> Result<(), RunError> {
    let g = generator(cfg, problem)?;
    let paths = g.sample_paths(cfg.scheme.seed, cfg.n_paths);
    let columns: Vec<String> =
        std::iter::once("t".to_string()).chain((0..paths.len()).map(|i| format!("path_{i}"))).collect();
    let mut body = String::new();
    for (k, t) in g.grid().points().enumerate() {
        body.push_str(&num(t));
        for p in &paths {
            body.push(',');
            body.push_str(&num(p.values[k]));
        }
        body.push('\n');
    }
    w.csv(cfg, "fbm_paths.csv", &columns.join(","), &body)
}

fn simulate(cfg: &RunConfig, problem: &Problem, w: &mut Writer<'_>) -> Result<(), RunError> {
    let g = generator(cfg, problem)?;
    let drivers = Drivers::generate(&g, cfg.scheme.n_particles, problem.dim(), cfg.scheme.seed, 0);
    let out = simulate_with_drivers(problem, &cfg.scheme, &drivers)?;
    let mut body = String::new();
    for k in 0..=out.n_steps {
        let t = num(out.t(k));
        for i in 0..out.n_particles {
            for (c, v) in out.state(k, i).iter().enumerate() {
                let _ = writeln!(body, "{k},{t},{i},{c},{}", num(*v));
            }
        }
    }
    w.csv(cfg, "trajectory.csv", "k,t,particle,dim,value", &body)?;
    let s = out.stats;
    w.json(
        cfg,
        "simulate_summary.json",
        json!({
            "problem": problem.name(),
            "dt": out.dt,
            "n_steps": out.n_steps,
            "n_particles": out.n_particles,
            "dim": out.dim,
            "sup_norm": out.sup_norm(),
            "picard": {
                "solves": s.solves,
                "total_iterations": s.total_iterations,
                "max_iterations": s.max_iterations,
                "max_residual": s.max_residual,
            },
        }),
    )
}

fn study_output(
    cfg: &RunConfig,
    study: &StudyTable<f64>,
    name: &str,
    param: &str,
    w: &mut Writer<'_>,
) -> Result<(), RunError> {
    let mut body = String::new();
    for r in &study.table.rows {
        let _ = writeln!(body, "{},{},{},{}", num(r.param), num(r.error), num(r.stderr), r.n_mc);
    }
    w.csv(cfg, &format!("{name}.csv"), "param,error,stderr,n_mc", &body)?;
    let fit = mvfbm::experiments::fit_rate(&study.table);
    if let Err(e) = &fit {
        warn!("no rate fit: {e}");
    }
    let rows: Vec<Value> = study
        .table
        .rows
        .iter()
        .map(|r| json!({ param: r.param, "error": r.error, "stderr": r.stderr, "n_mc": r.n_mc, "failures": r.failures }))
        .collect();
    w.json(
        cfg,
        &format!("{name}_summary.json"),
        json!({
            "param": param,
            "rows": rows,
            "reference_failures": study.reference_failures,
            "fit": fit.ok().map(|f| json!({
                "slope": f.slope,
                "intercept": f.intercept,
                "r_squared": f.r_squared,
                "n_points": f.n_points,
            })),
        }),
    )
}

fn validate(cfg: &RunConfig, problem: &Problem, w: &mut Writer<'_>) -> Result<(), RunError> {
    let entry = lookup::<f64>(&cfg.problem).expect("problem name checked during parsing");
    let opts = ValidationOptions::default()
        .with_budget(cfg.budget)
        .with_box(cfg.box_lo, cfg.box_hi)
        .with_seed(cfg.scheme.seed);
    let report = validate_all(problem, &entry.constants, &opts);
    let mut body = String::new();
    for c in &report.checks {
        let _ = writeln!(body, "{},{},{},{},{}", c.name, c.passed, c.n_checks, num(c.worst_ratio), num(c.worst_slack));
    }
    w.csv(cfg, "validation.csv", "check,passed,n_checks,worst_ratio,worst_slack", &body)?;
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    w.json(
        cfg,
        "validation_summary.json",
        json!({
            "problem": problem.name(),
            "passed": report.passed(),
            "n_checks": report.checks.len(),
            "failed": failed,
        }),
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::ChecksFailed(failed.len()))
    }
}
