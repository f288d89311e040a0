//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Thresholds, seeds and runtime budgets are pinned below.

use std::time::{Duration, Instant};

use mvfbm::experiments::{
    continuity_modulus_suite, fit_rate, moment_bound_suite, poc_rate_vs_n, strong_rate_vs_dt,
    ExperimentConfig,
};
use mvfbm::fbm::{fbm_covariance, sample_fbm_fast, HurstParam, TimeGrid};
use mvfbm::measure::{coupling_bound, wasserstein_1d, EmpiricalMeasure, WassersteinOrder};
use mvfbm::model::{builtin_catalog, catalog, validate_tamed_one_sided, DriftForm, ValidationOptions};
use mvfbm::rng::stream_rng;
use mvfbm::scheme::{
    simulate_direct, simulate_with_drivers, tame_drift, Drivers, SchemeConfig, SimulationOutput,
};
use mvfbm::{Config, Generator, Grid, Problem};
use rand::Rng;

const SEED: u64 = 20_241_019;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn fbm_covariance_criterion() -> Verdict {
    let n_paths = 10_000;
    let grid = TimeGrid::with_horizon(2.0, 256).unwrap();
    let mut worst = 0.0f64;
    for (i, h) in [0.6, 0.75, 0.9].into_iter().enumerate() {
        let hurst = HurstParam::new(h).unwrap();
        let paths = sample_fbm_fast(grid, hurst, SEED + i as u64, n_paths).unwrap();
        let mut rng = stream_rng(SEED, 1, i as u64);
        for _ in 0..10 {
            let (j, k) = (rng.random_range(1..=256), rng.random_range(1..=256));
            let prods: Vec<f64> = paths.iter().map(|p| p.values[j] * p.values[k]).collect();
            let n = n_paths as f64;
            let mean = prods.iter().sum::<f64>() / n;
            let se = (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            let exact = fbm_covariance(grid.t(j), grid.t(k), hurst).unwrap();
            worst = worst.max((mean - exact).abs() / se);
        }
    }
    verdict(worst <= 3.0, format!("worst |cov - R_H| = {worst:.2} standard errors over 30 pairs (limit 3)"))
}

fn taming_criterion() -> Verdict {
    let mut rng = stream_rng(SEED, 2, 0);
    let mut failures = 0;
    let slack = 1.0 + 4.0 * f64::EPSILON;
    for _ in 0..100_000 {
        let delta: f64 = rng.random_range(1e-8..1.0);
        let alpha: f64 = 0.5 * (1.0 - rng.random::<f64>());
        let d = rng.random_range(1..=3);
        let scale = 10f64.powf(rng.random_range(-6.0..6.0));
        let b: Vec<f64> = (0..d).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let t = tame_drift(&b, delta, alpha);
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nt = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err = b.iter().zip(&t).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let bound_ok = nt <= delta.powf(-alpha).min(nb) * slack;
        // b - b_dt cancels for tiny |b|; its rounding is one ulp of b
        let error_ok = err <= delta.powf(alpha) * nb * nb * slack + 2.0 * f64::EPSILON * nb;
        failures += usize::from(!(bound_ok && error_ok));
    }
    verdict(failures == 0, format!("{failures} of 100000 instances violate either bound"))
}

fn one_sided_criterion() -> Verdict {
    let opts = ValidationOptions::default().with_budget(100_000).with_seed(SEED);
    let mut failed = Vec::new();
    for entry in builtin_catalog::<f64>() {
        let report = validate_tamed_one_sided(&entry.problem, &entry.constants, &opts, DriftForm::TamedRandom);
        let check = report.check("tamed_one_sided").unwrap();
        if !check.passed || check.n_checks != 100_000 {
            failed.push(format!("{} (worst ratio {:.3})", entry.name, check.worst_ratio));
        }
    }
    verdict(failed.is_empty(), format!("5 catalog problems x 100000 tamed instances; failing: {failed:?}"))
}

fn brute_force_w(a: &[f64], b: &[f64], q: f64) -> f64 {
    fn visit(k: usize, perm: &mut Vec<usize>, a: &[f64], b: &[f64], q: f64, best: &mut f64) {
        if k == perm.len() {
            let c: f64 = perm.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs().powf(q)).sum();
            *best = best.min(c / a.len() as f64);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            visit(k + 1, perm, a, b, q, best);
            perm.swap(k, i);
        }
    }
    let mut best = f64::INFINITY;
    visit(0, &mut (0..a.len()).collect(), a, b, q, &mut best);
    best.powf(q.recip())
}

fn wasserstein_criterion() -> Verdict {
    let mut rng = stream_rng(SEED, 4, 0);
    let (mut worst, mut dominated) = (0.0f64, true);
    for _ in 0..1_000 {
        let n = rng.random_range(1..=6);
        let q = rng.random_range(1.0..4.0);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let order = WassersteinOrder::new(q).unwrap();
        let exact = wasserstein_1d(
            &EmpiricalMeasure::from_scalars(&a).unwrap(),
            &EmpiricalMeasure::from_scalars(&b).unwrap(),
            order,
        )
        .unwrap();
        worst = worst.max((exact - brute_force_w(&a, &b, q)).abs());
        dominated &= coupling_bound(&a, &b, 1, order).unwrap() >= exact - 1e-12;
    }
    verdict(
        worst <= 1e-12 && dominated,
        format!("max |W - brute force| = {worst:.1e} (limit 1e-12); coupling bound dominates: {dominated}"),
    )
}

fn zero_error_criterion() -> Verdict {
    let base = ExperimentConfig::<f64> {
        ladder_m: vec![4, 8, 16, 32, 64],
        m_ref: 512,
        ladder_n: vec![8, 16, 32, 64, 128],
        n_ref: 256,
        n_particles: 32,
        n_mc: 20,
        ..Default::default()
    };
    let noise = catalog::noise_only::<f64>().problem;
    let dt_err = strong_rate_vs_dt(&noise, &base)
        .unwrap()
        .table
        .rows
        .iter()
        .fold(0.0f64, |a, r| a.max(r.error));
    let decoupled = catalog::decoupled_cubic::<f64>().problem;
    let n_err = poc_rate_vs_n(&decoupled, &base)
        .unwrap()
        .table
        .rows
        .iter()
        .fold(0.0f64, |a, r| a.max(r.error));
    verdict(
        dt_err <= 1e-13 && n_err <= 1e-13,
        format!("noise-only max e(dt) = {dt_err:.1e}; measure-free max e(N) = {n_err:.1e} (limit 1e-13)"),
    )
}

fn strong_rate_criterion() -> Verdict {
    let problem = catalog::cubic_mf::<f64>().problem;
    let mut parts = Vec::new();
    let mut passed = true;
    for theta in [1.0, 0.0, 0.5] {
        let mut config = ExperimentConfig::<f64> {
            ladder_m: vec![4, 8, 16, 32, 64],
            m_ref: 512,
            n_particles: 64,
            n_mc: 200,
            p: 2.0,
            ..Default::default()
        };
        config.scheme.theta = theta;
        config.scheme.alpha = 0.5;
        config.scheme.seed = SEED;
        let study = strong_rate_vs_dt(&problem, &config).unwrap();
        let fit = fit_rate(&study.table).unwrap();
        let flagged = study.table.rows.iter().filter(|r| r.flagged()).count();
        passed &= fit.slope >= 0.4 && fit.r_squared >= 0.9 && flagged == 0;
        parts.push(format!("theta={theta}: slope {:.3}, R2 {:.4}", fit.slope, fit.r_squared));
    }
    verdict(passed, format!("{} (need slope >= 0.4, R2 >= 0.9)", parts.join("; ")))
}

fn chaos_criterion() -> Verdict {
    let problem = catalog::cubic_mf::<f64>().problem;
    let mut config = ExperimentConfig::<f64> {
        ladder_n: vec![8, 16, 32, 64, 128],
        n_ref: 1024,
        n_mc: 100,
        p: 2.0,
        ..Default::default()
    };
    config.scheme.m = 16;
    config.scheme.seed = SEED;
    let study = poc_rate_vs_n(&problem, &config).unwrap();
    let fit = fit_rate(&study.table).unwrap();
    verdict(fit.slope <= -0.15, format!("slope {:.3} (need <= -0.15), R2 {:.4}", fit.slope, fit.r_squared))
}

fn moment_criterion() -> Verdict {
    let problem = catalog::cubic_mf::<f64>().problem;
    let mut config = ExperimentConfig::<f64> {
        ladder_m: vec![8, 16, 32, 64, 128, 256],
        m_ref: 256,
        n_particles: 64,
        n_mc: 100,
        p: 2.0,
        ..Default::default()
    };
    config.scheme.seed = SEED;
    let report = moment_bound_suite(&problem, &config).unwrap();
    let values: Vec<String> = report.rows.iter().map(|r| format!("{:.4}", r.moment)).collect();
    verdict(
        report.passed,
        format!(
            "sup_k L2 norms [{}], spread {:.2}% (limit 10%), upward trend: {}",
            values.join(", "),
            100.0 * report.spread,
            report.upward_trend
        ),
    )
}

fn modulus_criterion() -> Verdict {
    let p = 2.0;
    let mut config = ExperimentConfig::<f64> {
        ladder_m: vec![32, 64, 128, 256],
        m_ref: 2048,
        n_particles: 64,
        n_mc: 100,
        p,
        ..Default::default()
    };
    config.scheme.alpha = 0.5;
    config.scheme.seed = SEED;
    let noise = catalog::noise_only::<f64>().problem;
    let h = noise.hurst().value();
    let noise_exp = continuity_modulus_suite(&noise, &config).unwrap().exponent.unwrap();
    let cubic = catalog::cubic_mf::<f64>().problem;
    let cubic_exp = continuity_modulus_suite(&cubic, &config).unwrap().exponent.unwrap();
    verdict(
        (noise_exp - p * h).abs() <= 0.1 * p && cubic_exp >= 0.35 * p,
        format!(
            "noise-only exponent {noise_exp:.3} vs pH = {:.3} (window {:.2}); cubic-mf exponent {cubic_exp:.3} (need >= {:.2})",
            p * h,
            0.1 * p,
            0.35 * p
        ),
    )
}

fn drivers(problem: &Problem, config: &Config, seed: u64) -> Drivers<f64> {
    let (dt, n_steps) = config.grid_for(problem).unwrap();
    let generator = Generator::fast(Grid::new(dt, n_steps).unwrap(), problem.hurst()).unwrap();
    Drivers::generate(&generator, config.n_particles, problem.dim(), seed, 0)
}

fn identity_residual(problem: &Problem, out: &SimulationOutput<f64>) -> f64 {
    let (cfg, dt, d) = (out.config, out.dt, out.dim);
    let m = cfg.m;
    let history = |k: usize, i: usize, of_z: bool| -> Vec<f64> {
        if k >= m {
            let block = if of_z { out.z_at(k - m) } else { out.y_at(k - m) };
            block[i * d..(i + 1) * d].to_vec()
        } else {
            problem.initial_vec(-((m - k) as f64) * dt)
        }
    };
    let mut worst = 0.0f64;
    for k in 1..=out.n_steps {
        let mu = mvfbm::measure::MeasureView::new(out.y_at(k), d);
        for i in 0..out.n_particles {
            let (yd, zd) = (history(k, i, false), history(k, i, true));
            let mut b = vec![0.0; d];
            problem.drift(out.state(k, i), &yd, &mu, &mut b);
            mvfbm::scheme::tame_in_place(&mut b, dt, cfg.alpha);
            let (mut dy, mut dz) = (vec![0.0; d], vec![0.0; d]);
            problem.neutral(&yd, &mut dy);
            problem.neutral(&zd, &mut dz);
            for c in 0..d {
                let lhs = out.value(k, i, c) - dy[c] - cfg.theta * dt * b[c];
                let rhs = out.z_at(k)[i * d + c] - dz[c];
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    worst
}

fn identities_criterion() -> Verdict {
    let (mut bit_exact, mut worst_identity, mut exchangeable) = (true, 0.0f64, true);
    let perm: Vec<usize> = (0..16).map(|j| (j * 5 + 3) % 16).collect();
    for entry in builtin_catalog::<f64>() {
        let p = &entry.problem;
        let explicit = SchemeConfig { theta: 0.0, m: 16, n_particles: 16, ..Default::default() };
        let drv = drivers(p, &explicit, SEED);
        bit_exact &= simulate_with_drivers(p, &explicit, &drv).unwrap().y == simulate_direct(p, &explicit, &drv).unwrap().y;
        for theta in [0.25, 0.5, 0.75, 1.0] {
            let cfg = SchemeConfig { theta, ..explicit };
            let out = simulate_with_drivers(p, &cfg, &drv).unwrap();
            worst_identity = worst_identity.max(identity_residual(p, &out));
            let permuted = simulate_with_drivers(p, &cfg, &drv.permute(&perm).unwrap()).unwrap();
            for k in 0..=out.n_steps {
                for (j, &src) in perm.iter().enumerate() {
                    exchangeable &= permuted.state(k, j) == out.state(k, src);
                }
            }
        }
    }
    let tol = Config::default().picard_tol;
    verdict(
        bit_exact && worst_identity <= tol && exchangeable,
        format!(
            "theta=0 split == direct: {bit_exact}; max grid-identity residual {worst_identity:.1e} (limit {tol:.0e}); permutation exact: {exchangeable}"
        ),
    )
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("1 fBm covariance", Duration::from_secs(60), fbm_covariance_criterion),
        ("2 taming invariants", Duration::from_secs(5), taming_criterion),
        ("3 one-sided preservation", Duration::from_secs(30), one_sided_criterion),
        ("4 Wasserstein exactness", Duration::from_secs(10), wasserstein_criterion),
        ("5 zero-error couplings", Duration::from_secs(30), zero_error_criterion),
        ("6 strong rate in dt", Duration::from_secs(600), strong_rate_criterion),
        ("7 propagation of chaos", Duration::from_secs(900), chaos_criterion),
        ("8 moment boundedness", Duration::from_secs(300), moment_criterion),
        ("9 modulus of continuity", Duration::from_secs(300), modulus_criterion),
        ("10 scheme identities", Duration::from_secs(60), identities_criterion),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let passed = v.passed && elapsed <= budget;
        failed += usize::from(!passed);
        println!(
            "[{}] {name}: {} [{:.1}s, budget {}s]",
            if passed { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
