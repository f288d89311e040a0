use mvfbm::model::{catalog, NeutralDelayProblem};
use mvfbm::scheme::{
    implicit_stage_solve, piecewise_constant_interpolant, simulate, simulate_direct,
    simulate_with_drivers, Drivers, SchemeConfig, SchemeError, SimulationOutput, StepContext,
};
use mvfbm::{Config, Generator, Grid, Hurst, Problem};

fn config(theta: f64, m: usize, n: usize) -> Config {
    SchemeConfig { theta, m, n_particles: n, ..Default::default() }
}

fn drivers_for(problem: &Problem, cfg: &Config, seed: u64) -> Drivers<f64> {
    let (dt, n_steps) = cfg.grid_for(problem).unwrap();
    let generator = Generator::fast(Grid::new(dt, n_steps).unwrap(), problem.hurst()).unwrap();
    Drivers::generate(&generator, cfg.n_particles, problem.dim(), seed, 0)
}

fn constant_noise(sigma: f64, neutral: f64) -> Problem {
    NeutralDelayProblem::builder("additive", 1)
        .drift(|_, _, _, out| out[0] = 0.0)
        .neutral(move |y, out| out[0] = neutral * y[0])
        .diffusion(move |_, out| out[0] = sigma)
        .initial_segment(|t, out| out[0] = 2.0 + t)
        .build()
        .unwrap()
}

/// `Y_k - D(Y_{k-m}) - theta dt b_dt(Y_k, Y_{k-m}, mu_k)` against
/// `z_k - D(z_{k-m})`, with history before time zero read from the segment.
fn identity_residual(problem: &Problem, out: &SimulationOutput<f64>) -> f64 {
    let cfg = out.config;
    let m = cfg.m;
    let dt = out.dt;
    let (n, d) = (out.n_particles, out.dim);
    let past = |k: usize, i: usize, zs: bool| -> Vec<f64> {
        if k >= m {
            let idx = k - m;
            let src = if zs { out.z_at(idx) } else { out.y_at(idx) };
            src[i * d..(i + 1) * d].to_vec()
        } else {
            problem.initial_vec(-((m - k) as f64) * dt)
        }
    };
    let mut worst = 0.0f64;
    for k in 1..=out.n_steps {
        let mu = mvfbm::measure::MeasureView::new(out.y_at(k), d);
        for i in 0..n {
            let y = out.state(k, i);
            let z = &out.z_at(k)[i * d..(i + 1) * d];
            let (yd, zd) = (past(k, i, false), past(k, i, true));
            let mut b = vec![0.0; d];
            problem.drift(y, &yd, &mu, &mut b);
            mvfbm::scheme::tame_in_place(&mut b, dt, cfg.alpha);
            let (mut dy, mut dz) = (vec![0.0; d], vec![0.0; d]);
            problem.neutral(&yd, &mut dy);
            problem.neutral(&zd, &mut dz);
            for c in 0..d {
                let lhs = y[c] - dy[c] - cfg.theta * dt * b[c];
                worst = worst.max((lhs - (z[c] - dz[c])).abs());
            }
        }
    }
    worst
}

#[test]
fn additive_noise_is_integrated_exactly() {
    let p = constant_noise(0.7, 0.0);
    for theta in [0.0, 0.5, 1.0] {
        let cfg = config(theta, 8, 3);
        let drivers = drivers_for(&p, &cfg, 4);
        let out = simulate_with_drivers(&p, &cfg, &drivers).unwrap();
        for i in 0..3 {
            let mut b = 0.0;
            for k in 0..=out.n_steps {
                assert!((out.value(k, i, 0) - (2.0 + 0.7 * b)).abs() < 1e-13);
                if k < out.n_steps {
                    b += drivers.row(i, 0)[k];
                }
            }
        }
    }
}

#[test]
fn neutral_difference_is_conserved_without_forcing() {
    let p = constant_noise(0.0, 0.4);
    let cfg = config(0.5, 4, 2);
    let out = simulate(&p, &cfg.clone()).unwrap();
    // Y_k - D(Y_{k-m}) stays at xi(0) - D(xi(-tau)) = 2 - 0.4
    for k in 0..=out.n_steps {
        let delayed = if k >= 4 { out.value(k - 4, 0, 0) } else { 2.0 - (4 - k) as f64 * 0.25 };
        assert!((out.value(k, 0, 0) - 0.4 * delayed - 1.6).abs() < 1e-14, "k = {k}");
    }
}

#[test]
fn one_explicit_step_by_hand() {
    let p = catalog::cubic_mf::<f64>().problem;
    let cfg = config(0.0, 4, 2);
    let drivers = Drivers::from_rows(0.25, 1, vec![vec![0.1, 0.0, 0.0, 0.0], vec![-0.2, 0.0, 0.0, 0.0]]).unwrap();
    let out = simulate_with_drivers(&p, &cfg, &drivers).unwrap();
    // xi(0) = 1, xi(-1) = 0.5, xi(-0.75) = 0.625; b = 0.75, tamed 0.75 / 1.375;
    // sigma = 0.5 + 0.1 * W_2(delta_1, delta_0) = 0.6
    let base = 0.25 * 0.625 + 1.0 - 0.25 * 0.5 + 0.75 / 1.375 * 0.25;
    assert!((out.value(1, 0, 0) - (base + 0.06)).abs() < 1e-14);
    assert!((out.value(1, 1, 0) - (base - 0.12)).abs() < 1e-14);
}

#[test]
fn picard_matches_geometric_fixed_point() {
    let a = -1.5f64;
    let p = NeutralDelayProblem::<f64>::builder("linear-ode", 1)
        .drift(move |x, _, _, out| out[0] = a * x[0])
        .neutral(|_, out| out[0] = 0.0)
        .diffusion(|_, out| out[0] = 0.0)
        .initial_segment(|_, out| out[0] = 1.0)
        .build()
        .unwrap();
    let cfg = SchemeConfig { theta: 1.0, m: 8, n_particles: 1, tamed: false, ..Default::default() };
    let (ctx, _) = StepContext::new(&p, &cfg).unwrap();
    let sol = implicit_stage_solve(&p, &ctx, &[0.9], &[0.0], &[0.0], 1).unwrap();
    let exact = 0.9 / (1.0 - a * 0.125);
    assert!((sol.y[0] - exact).abs() < 1e-12);
    // contraction factor |theta a dt| = 0.1875 per sweep
    assert!(sol.iterations <= 20, "{}", sol.iterations);
}

#[test]
fn zero_drift_needs_one_sweep() {
    let p = constant_noise(0.3, 0.5);
    let (ctx, _) = StepContext::new(&p, &config(1.0, 4, 2)).unwrap();
    let sol = implicit_stage_solve(&p, &ctx, &[1.0, 2.0], &[0.2, 0.4], &[0.6, 0.8], 1).unwrap();
    assert_eq!(sol.iterations, 1);
    assert_eq!(sol.y, vec![1.0 + (0.5 * 0.6 - 0.5 * 0.2), 2.0 + (0.5 * 0.8 - 0.5 * 0.4)]);
}

/// Damped Newton on `G(Y) = Y - base - theta dt b_dt(Y)` for the cubic
/// mean-field drift, with Gaussian elimination on the dense Jacobian.
fn newton_oracle(base: &[f64], y_delay: &[f64], dt: f64, alpha: f64) -> Vec<f64> {
    let n = base.len();
    let c = dt.powf(alpha);
    let residual = |y: &[f64]| -> Vec<f64> {
        let mean = y.iter().sum::<f64>() / n as f64;
        (0..n)
            .map(|i| {
                let b = y[i] - y[i].powi(3) + 0.5 * y_delay[i] + 0.5 * mean;
                y[i] - base[i] - dt * b / (1.0 + c * b.abs())
            })
            .collect()
    };
    let mut y = base.to_vec();
    for _ in 0..100 {
        let r = residual(&y);
        let norm = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if norm < 1e-15 {
            break;
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let mut jac = vec![vec![0.0; n + 1]; n];
        for i in 0..n {
            let b = y[i] - y[i].powi(3) + 0.5 * y_delay[i] + 0.5 * mean;
            let g = 1.0 / (1.0 + c * b.abs()).powi(2);
            for j in 0..n {
                let db = if i == j { 1.0 - 3.0 * y[i] * y[i] } else { 0.0 } + 0.5 / n as f64;
                jac[i][j] = if i == j { 1.0 } else { 0.0 } - dt * g * db;
            }
            jac[i][n] = -r[i];
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| jac[a][col].abs().total_cmp(&jac[b][col].abs())).unwrap();
            jac.swap(col, piv);
            for row in col + 1..n {
                let f = jac[row][col] / jac[col][col];
                for k in col..=n {
                    jac[row][k] -= f * jac[col][k];
                }
            }
        }
        let mut step = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| jac[row][k] * step[k]).sum();
            step[row] = (jac[row][n] - s) / jac[row][row];
        }
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let tn = residual(&trial).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if tn < norm || lambda < 1e-6 {
                y = trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    y
}

#[test]
fn picard_agrees_with_newton_oracle() {
    let p = catalog::cubic_mf::<f64>().problem;
    let (ctx, _) = StepContext::new(&p, &config(1.0, 8, 4)).unwrap();
    let z = [1.3, -0.4, 0.8, 2.0];
    let z_delay = [0.5, 0.6, 0.7, 0.9];
    let y_delay = [0.55, 0.5, 0.75, 1.0];
    let sol = implicit_stage_solve(&p, &ctx, &z, &z_delay, &y_delay, 1).unwrap();
    let base: Vec<f64> = (0..4).map(|i| z[i] + 0.25 * (y_delay[i] - z_delay[i])).collect();
    let oracle = newton_oracle(&base, &y_delay, 0.125, 0.5);
    for (a, b) in sol.y.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn relaxed_sweeps_rescue_steep_roots() {
    // near the drift root x ~ 1.32 the undamped map has slope about -1.05
    let p = catalog::cubic_mf::<f64>().problem;
    let (ctx, _) = StepContext::new(&p, &config(1.0, 4, 4)).unwrap();
    let z = [1.3, 1.35, 1.25, 1.4];
    let sol = implicit_stage_solve(&p, &ctx, &z, &[1.0; 4], &[1.0; 4], 1).unwrap();
    let base: Vec<f64> = z.iter().map(|v| v + 0.0).collect();
    let oracle = newton_oracle(&base, &[1.0; 4], 0.25, 0.5);
    for (a, b) in sol.y.iter().zip(&oracle) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn picard_cap_reports_non_convergence() {
    let p = catalog::cubic_mf::<f64>().problem;
    let cfg = SchemeConfig { picard_max_iters: 2, ..config(1.0, 8, 4) };
    let (ctx, _) = StepContext::new(&p, &cfg).unwrap();
    let err = implicit_stage_solve(&p, &ctx, &[1.3, -0.4, 0.8, 2.0], &[0.0; 4], &[0.0; 4], 7).unwrap_err();
    match err {
        SchemeError::NonConvergence { step, n_particles, residual, .. } => {
            assert_eq!((step, n_particles), (7, 4));
            assert!(residual > 1e-12);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn explicit_split_equals_direct_recursion() {
    for entry in catalog::builtin_catalog::<f64>() {
        let cfg = config(0.0, 8, 5);
        let drivers = drivers_for(&entry.problem, &cfg, 9);
        let split = simulate_with_drivers(&entry.problem, &cfg, &drivers).unwrap();
        let direct = simulate_direct(&entry.problem, &cfg, &drivers).unwrap();
        assert_eq!(split.y, direct.y, "{}", entry.name);
    }
    let p = catalog::linear::<f64>().problem;
    let cfg = config(0.5, 8, 2);
    assert!(simulate_direct(&p, &cfg, &drivers_for(&p, &cfg, 0)).is_err());
}

#[test]
fn grid_identity_holds_for_implicit_runs() {
    for entry in catalog::builtin_catalog::<f64>() {
        for theta in [0.25, 0.5, 1.0] {
            let cfg = config(theta, 8, 6);
            let out = simulate(&entry.problem, &cfg).unwrap();
            let r = identity_residual(&entry.problem, &out);
            assert!(r <= cfg.picard_tol, "{} theta {theta}: {r:e}", entry.name);
        }
    }
}

#[test]
fn permuting_drivers_permutes_particles() {
    let p = catalog::cubic_mf::<f64>().problem;
    let cfg = config(1.0, 8, 5);
    let drivers = drivers_for(&p, &cfg, 3);
    let perm = [3, 0, 4, 1, 2];
    let a = simulate_with_drivers(&p, &cfg, &drivers).unwrap();
    let b = simulate_with_drivers(&p, &cfg, &drivers.permute(&perm).unwrap()).unwrap();
    for k in 0..=a.n_steps {
        for (j, &src) in perm.iter().enumerate() {
            assert_eq!(b.state(k, j), a.state(k, src), "step {k}");
        }
    }
}

#[test]
fn tamed_cubic_stays_bounded() {
    let p = catalog::cubic_mf::<f64>().problem;
    for theta in [0.0, 0.5, 1.0] {
        for seed in 0..100 {
            let cfg = SchemeConfig { seed, ..config(theta, 64, 64) };
            let out = simulate(&p, &cfg).unwrap();
            assert!(out.sup_norm() < 1e3, "theta {theta} seed {seed}");
        }
    }
}

#[test]
fn driver_shape_is_checked() {
    let p = catalog::linear::<f64>().problem;
    let cfg = config(0.5, 8, 4);
    let drivers = drivers_for(&p, &config(0.5, 8, 3), 0);
    assert!(matches!(simulate_with_drivers(&p, &cfg, &drivers), Err(SchemeError::DriverShape(_))));
}

#[test]
fn interpolant_is_left_continuous_step() {
    let p = catalog::cubic_mf::<f64>().problem;
    let cfg = config(0.5, 4, 2);
    let out = simulate(&p, &cfg).unwrap();
    let at = |t: f64| piecewise_constant_interpolant(&out, &p, t).unwrap();
    assert_eq!(at(-0.5), vec![0.75, 0.75]);
    assert_eq!(at(0.0), out.y_at(0).to_vec());
    assert_eq!(at(0.3), out.y_at(1).to_vec());
    assert_eq!(at(0.25), out.y_at(1).to_vec());
    assert_eq!(at(0.2499), out.y_at(0).to_vec());
    assert_eq!(at(1.0), out.y_at(4).to_vec());
    assert!(matches!(piecewise_constant_interpolant(&out, &p, 1.5), Err(SchemeError::OutOfRange { .. })));
    assert!(piecewise_constant_interpolant(&out, &p, -1.01).is_err());
}

#[test]
fn single_precision_runs() {
    let p = catalog::cubic_mf::<f32>().problem;
    let cfg = mvfbm::Config32 { theta: 0.5, m: 8, n_particles: 8, picard_tol: 1e-6, ..Default::default() };
    let out = simulate(&p, &cfg).unwrap();
    assert!(out.sup_norm().is_finite());
    let _ = Hurst::new(0.75).unwrap();
}
