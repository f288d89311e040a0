//! Flat `key=value` run configuration, one entry per line, `#` comments.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use mvfbm::experiments::ExperimentConfig;
use mvfbm::fbm::HurstParam;
use mvfbm::measure::WassersteinOrder;
use mvfbm::model::{lookup, CATALOG_NAMES};
use mvfbm::scheme::step_count;
use mvfbm::{Config, Experiment, Problem};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SampleFbm,
    Simulate,
    Convergence,
    Chaos,
    Validate,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Self::SampleFbm, Self::Simulate, Self::Convergence, Self::Chaos, Self::Validate];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SampleFbm => "sample-fbm",
            Self::Simulate => "simulate",
            Self::Convergence => "convergence",
            Self::Chaos => "chaos",
            Self::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Fast,
    Cholesky,
}

impl GeneratorKind {
    fn as_str(self) -> &'static str {
        match self {
            Self::Fast => "fast",
            Self::Cholesky => "cholesky",
        }
    }
}

/// Everything a run needs. Problem parameters left as `None` keep the
/// catalog defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub problem: String,
    pub tau: Option<f64>,
    pub horizon: Option<f64>,
    pub hurst: Option<f64>,
    pub order: Option<f64>,
    pub scheme: Config,
    pub ladder_m: Vec<usize>,
    pub m_ref: usize,
    pub ladder_n: Vec<usize>,
    pub n_ref: usize,
    pub n_mc: usize,
    pub p: f64,
    pub n_paths: usize,
    pub generator: GeneratorKind,
    pub budget: usize,
    pub box_lo: f64,
    pub box_hi: f64,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = Experiment::default();
        Self {
            command: Command::Simulate,
            problem: "cubic-mf".into(),
            tau: None,
            horizon: None,
            hurst: None,
            order: None,
            scheme: Config::default(),
            ladder_m: e.ladder_m,
            m_ref: e.m_ref,
            ladder_n: e.ladder_n,
            n_ref: e.n_ref,
            n_mc: e.n_mc,
            p: e.p,
            n_paths: 16,
            generator: GeneratorKind::Fast,
            budget: 10_000,
            box_lo: -5.0,
            box_hi: 5.0,
            out: ".".into(),
        }
    }
}

/// Every problem found while reading a config.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration:\n  {}", .0.join("\n  "))]
pub struct ConfigError(pub Vec<String>);

const KEYS: &[&str] = &[
    "command", "problem", "tau", "T", "H", "q", "theta", "alpha", "m", "N", "picard_tol",
    "picard_max_iters", "tamed", "seed", "ladder_m", "m_ref", "ladder_N", "N_ref", "n_mc", "p",
    "n_paths", "generator", "budget", "box_lo", "box_hi", "out",
];

fn parse_list(v: &str) -> Result<Vec<usize>, String> {
    v.split(',').map(|s| s.trim().parse::<usize>().map_err(|e| e.to_string())).collect()
}

fn render_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn set(cfg: &mut RunConfig, key: &str, v: &str) -> Result<(), String> {
    fn num<T: FromStr>(v: &str) -> Result<T, String>
    where
        T::Err: fmt::Display,
    {
        v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
    }
    match key {
        "command" => cfg.command = v.parse()?,
        "problem" => cfg.problem = v.to_string(),
        "tau" => cfg.tau = Some(num(v)?),
        "T" => cfg.horizon = Some(num(v)?),
        "H" => cfg.hurst = Some(num(v)?),
        "q" => cfg.order = Some(num(v)?),
        "theta" => cfg.scheme.theta = num(v)?,
        "alpha" => cfg.scheme.alpha = num(v)?,
        "m" => cfg.scheme.m = num(v)?,
        "N" => cfg.scheme.n_particles = num(v)?,
        "picard_tol" => cfg.scheme.picard_tol = num(v)?,
        "picard_max_iters" => cfg.scheme.picard_max_iters = num(v)?,
        "tamed" => cfg.scheme.tamed = parse_bool(v)?,
        "seed" => cfg.scheme.seed = num(v)?,
        "ladder_m" => cfg.ladder_m = parse_list(v)?,
        "m_ref" => cfg.m_ref = num(v)?,
        "ladder_N" => cfg.ladder_n = parse_list(v)?,
        "N_ref" => cfg.n_ref = num(v)?,
        "n_mc" => cfg.n_mc = num(v)?,
        "p" => cfg.p = num(v)?,
        "n_paths" => cfg.n_paths = num(v)?,
        "generator" => {
            cfg.generator = match v {
                "fast" => GeneratorKind::Fast,
                "cholesky" => GeneratorKind::Cholesky,
                _ => return Err(format!("expected fast or cholesky, got {v:?}")),
            }
        }
        "budget" => cfg.budget = num(v)?,
        "box_lo" => cfg.box_lo = num(v)?,
        "box_hi" => cfg.box_hi = num(v)?,
        "out" => cfg.out = v.to_string(),
        _ => unreachable!("key list and setter disagree on {key}"),
    }
    Ok(())
}

/// Reads and fully validates a config, reporting every violation.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &Overrides::default())
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub out: Option<String>,
    pub seed: Option<u64>,
}

/// As [`parse_config`], applying `overrides` before validation.
pub fn parse_with_overrides(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected key=value, got {line:?}", lineno + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            errors.push(format!("line {}: unknown key {key:?}", lineno + 1));
            continue;
        }
        if !seen.insert(key.to_string()) {
            errors.push(format!("line {}: duplicate key {key:?}", lineno + 1));
            continue;
        }
        if let Err(e) = set(&mut cfg, key, value) {
            errors.push(format!("line {}: {key}: {e}", lineno + 1));
        }
    }
    if let Some(c) = overrides.command {
        cfg.command = c;
    }
    if let Some(out) = &overrides.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.scheme.seed = seed;
    }
    errors.extend(cfg.violations());
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError(errors))
    }
}

impl RunConfig {
    /// The catalog problem with overrides applied.
    pub fn build_problem(&self) -> Result<Problem, Vec<String>> {
        let Some(entry) = lookup::<f64>(&self.problem) else {
            return Err(vec![format!(
                "unknown problem {:?}; expected one of {}",
                self.problem,
                CATALOG_NAMES.join(", ")
            )]);
        };
        let mut problem = entry.problem;
        let mut errors = Vec::new();
        if let Some(tau) = self.tau {
            match problem.clone().with_tau(tau) {
                Ok(p) => problem = p,
                Err(e) => errors.push(e.to_string()),
            }
        }
        if let Some(t) = self.horizon {
            match problem.clone().with_horizon(t) {
                Ok(p) => problem = p,
                Err(e) => errors.push(e.to_string()),
            }
        }
        if let Some(h) = self.hurst {
            match HurstParam::new(h) {
                Ok(h) => problem = problem.with_hurst(h),
                Err(e) => errors.push(e.to_string()),
            }
        }
        if let Some(q) = self.order {
            match WassersteinOrder::new(q) {
                Ok(q) => problem = problem.with_order(q),
                Err(e) => errors.push(e.to_string()),
            }
        }
        if errors.is_empty() {
            Ok(problem)
        } else {
            Err(errors)
        }
    }

    pub fn experiment(&self) -> Experiment {
        ExperimentConfig {
            scheme: self.scheme,
            ladder_m: self.ladder_m.clone(),
            m_ref: self.m_ref,
            ladder_n: self.ladder_n.clone(),
            n_ref: self.n_ref,
            n_particles: self.scheme.n_particles,
            n_mc: self.n_mc,
            p: self.p,
        }
    }

    /// Constraint violations for the selected command.
    pub fn violations(&self) -> Vec<String> {
        let problem = match self.build_problem() {
            Ok(p) => p,
            Err(e) => return e,
        };
        let mut v = self.scheme.violations();
        if self.scheme.m > 0 {
            if let Err(e) = step_count(problem.tau(), problem.horizon(), self.scheme.m) {
                v.push(e);
            }
        }
        match self.command {
            Command::Convergence | Command::Chaos => {
                for e in self.experiment().violations(&problem) {
                    if !v.contains(&e) {
                        v.push(e);
                    }
                }
                if self.command == Command::Chaos && self.ladder_n.is_empty() {
                    v.push("ladder_N must not be empty".into());
                }
            }
            Command::SampleFbm if self.n_paths == 0 => v.push("n_paths must be at least 1".into()),
            Command::Validate => {
                if self.budget == 0 {
                    v.push("budget must be at least 1".into());
                }
                if !(self.box_lo < self.box_hi) {
                    v.push(format!("box_lo = {} must be below box_hi = {}", self.box_lo, self.box_hi));
                }
            }
            _ => {}
        }
        v
    }

    /// Canonical text form; `parse_config(&cfg.render())` gives `cfg` back.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        put("command", self.command.to_string());
        put("problem", self.problem.clone());
        for (k, v) in [("tau", self.tau), ("T", self.horizon), ("H", self.hurst), ("q", self.order)] {
            if let Some(v) = v {
                put(k, v.to_string());
            }
        }
        let sc = &self.scheme;
        put("theta", sc.theta.to_string());
        put("alpha", sc.alpha.to_string());
        put("m", sc.m.to_string());
        put("N", sc.n_particles.to_string());
        put("picard_tol", sc.picard_tol.to_string());
        put("picard_max_iters", sc.picard_max_iters.to_string());
        put("tamed", sc.tamed.to_string());
        put("seed", sc.seed.to_string());
        put("ladder_m", render_list(&self.ladder_m));
        put("m_ref", self.m_ref.to_string());
        put("ladder_N", render_list(&self.ladder_n));
        put("N_ref", self.n_ref.to_string());
        put("n_mc", self.n_mc.to_string());
        put("p", self.p.to_string());
        put("n_paths", self.n_paths.to_string());
        put("generator", self.generator.as_str().to_string());
        put("budget", self.budget.to_string());
        put("box_lo", self.box_lo.to_string());
        put("box_hi", self.box_hi.to_string());
        put("out", self.out.clone());
        s
    }

    /// Single-line provenance echo for output headers.
    pub fn header(&self) -> String {
        let body: Vec<String> = self.render().lines().map(str::to_string).collect();
        format!("# mvfbm {} seed={} | {}", self.command, self.scheme.seed, body.join(" "))
    }
}
