//! Randomised scans of the standing assumptions over a bounded box.
//!
//! Coefficients are arbitrary callbacks, so the assumptions cannot be
//! checked symbolically. Each validator draws `budget` random instances from
//! the box `[lo, hi]^d` (and random particle clouds around random centres),
//! evaluates both sides of the inequality and reports the worst case.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AssumptionConstants, NeutralDelayProblem};
use crate::measure::{wasserstein_same_size, MeasureView};
use crate::num::{dist, dot, norm, Real};
use crate::rng::stream_rng;
use crate::scheme::tame_in_place;

const BATCH: usize = 1024;

/// Sampler settings shared by all validators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions<F> {
    pub budget: usize,
    pub lo: F,
    pub hi: F,
    /// Particles per random cloud.
    pub cloud_size: usize,
    pub seed: u64,
}

impl<F: Real> Default for ValidationOptions<F> {
    fn default() -> Self {
        Self { budget: 10_000, lo: F::lit(-5.0), hi: F::lit(5.0), cloud_size: 8, seed: 0 }
    }
}

impl<F: Real> ValidationOptions<F> {
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_box(mut self, lo: F, hi: F) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Inputs of the worst observed instance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Witness<F> {
    pub points: Vec<Vec<F>>,
    pub clouds: Vec<Vec<F>>,
}

/// Outcome of one inequality `lhs <= rhs` scanned over random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome<F> {
    pub name: &'static str,
    pub passed: bool,
    pub n_checks: usize,
    /// Largest `lhs / rhs` seen (`lhs` itself when `rhs = 0`).
    pub worst_ratio: F,
    /// Largest `lhs - rhs` seen.
    pub worst_slack: F,
    pub witness: Option<Witness<F>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<F> {
    pub checks: Vec<CheckOutcome<F>>,
}

impl<F: Real> ValidationReport<F> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome<F>> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Rounding allowance for `lhs <= rhs`.
fn holds<F: Real>(lhs: F, rhs: F) -> bool {
    lhs <= rhs + F::lit(1e-12) * (F::one() + rhs.abs())
}

struct Sample<F> {
    lhs: F,
    rhs: F,
    witness: Witness<F>,
}

#[derive(Clone)]
struct Tally<F> {
    n: usize,
    failed: bool,
    worst_ratio: F,
    worst_slack: F,
    witness: Option<Witness<F>>,
}

impl<F: Real> Tally<F> {
    fn new() -> Self {
        Self {
            n: 0,
            failed: false,
            worst_ratio: F::neg_infinity(),
            worst_slack: F::neg_infinity(),
            witness: None,
        }
    }

    fn push(&mut self, s: Sample<F>) {
        self.n += 1;
        let ok = holds(s.lhs, s.rhs);
        let ratio = if s.rhs > F::zero() { s.lhs / s.rhs } else { s.lhs };
        let slack = s.lhs - s.rhs;
        self.worst_ratio = self.worst_ratio.max(ratio);
        let take = if self.failed { !ok && slack > self.worst_slack } else { !ok || slack > self.worst_slack };
        if slack > self.worst_slack {
            self.worst_slack = slack;
        }
        if take {
            self.witness = Some(s.witness);
        }
        self.failed |= !ok;
    }

    fn merge(mut self, other: Self) -> Self {
        self.n += other.n;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
        let take = match (self.failed, other.failed) {
            (false, true) => true,
            (true, false) => false,
            _ => other.worst_slack > self.worst_slack,
        };
        if take {
            self.witness = other.witness;
        }
        self.worst_slack = self.worst_slack.max(other.worst_slack);
        self.failed |= other.failed;
        self
    }

    fn finish(self, name: &'static str) -> CheckOutcome<F> {
        CheckOutcome {
            name,
            passed: !self.failed,
            n_checks: self.n,
            worst_ratio: self.worst_ratio,
            worst_slack: self.worst_slack,
            witness: self.witness,
        }
    }
}

/// Runs `draw` `budget` times in parallel batches; each batch has its own
/// stream so results do not depend on scheduling.
fn scan<F, G>(opts: &ValidationOptions<F>, salt: u64, n_checks: usize, draw: G) -> Vec<Tally<F>>
where
    F: Real,
    G: Fn(&mut ChaCha8Rng) -> Vec<Sample<F>> + Sync,
{
    let n_batches = opts.budget.div_ceil(BATCH);
    let tallies: Vec<Vec<Tally<F>>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(opts.seed, salt, b as u64);
            let mut t = vec![Tally::new(); n_checks];
            let count = BATCH.min(opts.budget - b * BATCH);
            for _ in 0..count {
                for (tally, s) in t.iter_mut().zip(draw(&mut rng)) {
                    tally.push(s);
                }
            }
            t
        })
        .collect();
    tallies.into_iter().fold(vec![Tally::new(); n_checks], |acc, t| {
        acc.into_iter().zip(t).map(|(a, b)| a.merge(b)).collect()
    })
}

fn point<F: Real>(rng: &mut ChaCha8Rng, d: usize, lo: F, hi: F) -> Vec<F> {
    (0..d).map(|_| lo + (hi - lo) * F::lit(rng.random::<f64>())).collect()
}

/// A cloud of `n` points uniform in a random sub-box of `[lo, hi]^d`.
fn cloud<F: Real>(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: F, hi: F) -> Vec<F> {
    let centre = point(rng, d, lo, hi);
    let radius = F::lit(0.5 * rng.random::<f64>()) * (hi - lo);
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        for c in &centre {
            out.push(*c + radius * F::lit(2.0 * rng.random::<f64>() - 1.0));
        }
    }
    out
}

/// `|D(x) - D(x')| <= lambda |x - x'|` and `D(0) = 0`.
pub fn validate_neutral_contraction<F: Real>(
    problem: &NeutralDelayProblem<F>,
    constants: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    let d = problem.dim();
    let lambda = constants.lambda;
    let tallies = scan(opts, 1, 1, |rng| {
        let x = point(rng, d, opts.lo, opts.hi);
        let xb = point(rng, d, opts.lo, opts.hi);
        let mut dx = vec![F::zero(); d];
        let mut dxb = vec![F::zero(); d];
        problem.neutral(&x, &mut dx);
        problem.neutral(&xb, &mut dxb);
        vec![Sample {
            lhs: dist(&dx, &dxb),
            rhs: lambda * dist(&x, &xb),
            witness: Witness { points: vec![x, xb], clouds: vec![] },
        }]
    });
    let mut lipschitz = tallies.into_iter().next().expect("one check").finish("neutral_lipschitz");

    let zero = vec![F::zero(); d];
    let mut d0 = vec![F::zero(); d];
    problem.neutral(&zero, &mut d0);
    let mut centred = Tally::new();
    centred.push(Sample { lhs: norm(&d0), rhs: F::zero(), witness: Witness { points: vec![zero], clouds: vec![] } });

    // report |D(x) - D(x')| / |x - x'| rather than lhs / rhs
    if lambda > F::zero() && lipschitz.worst_ratio.is_finite() {
        lipschitz.worst_ratio = lipschitz.worst_ratio * lambda;
    }
    ValidationReport { checks: vec![lipschitz, centred.finish("neutral_at_origin")] }
}

/// Optional taming applied to the drift before checking the one-sided bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftForm<F> {
    Raw,
    /// `b_Delta` with fixed `(delta, alpha)`.
    Tamed { delta: F, alpha: F },
    /// `b_Delta` with `delta ~ U(0, 1)` and `alpha ~ U(0, 1/2]` per instance.
    TamedRandom,
}

/// One-sided condition with constant `K2` and polynomial Lipschitz bound with
/// `K3` and exponent `l`, both for the raw drift.
pub fn validate_one_sided<F: Real>(
    problem: &NeutralDelayProblem<F>,
    constants: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    ValidationReport { checks: one_sided_checks(problem, constants, opts, DriftForm::Raw, true) }
}

/// One-sided condition with the same `K2` for a tamed drift.
pub fn validate_tamed_one_sided<F: Real>(
    problem: &NeutralDelayProblem<F>,
    constants: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
    form: DriftForm<F>,
) -> ValidationReport<F> {
    ValidationReport { checks: one_sided_checks(problem, constants, opts, form, false) }
}

fn one_sided_checks<F: Real>(
    problem: &NeutralDelayProblem<F>,
    c: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
    form: DriftForm<F>,
    with_poly: bool,
) -> Vec<CheckOutcome<F>> {
    let d = problem.dim();
    let n = opts.cloud_size.max(1);
    let q = problem.order();
    let n_checks = if with_poly { 2 } else { 1 };
    let tallies = scan(opts, 2, n_checks, |rng| {
        let x = point(rng, d, opts.lo, opts.hi);
        let y = point(rng, d, opts.lo, opts.hi);
        let xb = point(rng, d, opts.lo, opts.hi);
        let yb = point(rng, d, opts.lo, opts.hi);
        let mu_s = cloud(rng, n, d, opts.lo, opts.hi);
        let nu_s = cloud(rng, n, d, opts.lo, opts.hi);
        let taming = match form {
            DriftForm::Raw => None,
            DriftForm::Tamed { delta, alpha } => Some((delta, alpha)),
            DriftForm::TamedRandom => {
                let delta = F::lit(rng.random::<f64>().max(1e-12));
                let alpha = F::lit(0.5 * (1.0 - rng.random::<f64>()));
                Some((delta, alpha))
            }
        };
        let mu = MeasureView::new(&mu_s, d);
        let nu = MeasureView::new(&nu_s, d);
        let w = wasserstein_same_size(&mu, &nu, q).expect("same-size clouds").value;

        let mut b = vec![F::zero(); d];
        let mut bb = vec![F::zero(); d];
        problem.drift(&x, &y, &mu, &mut b);
        problem.drift(&xb, &yb, &nu, &mut bb);
        let raw_diff = dist(&b, &bb);
        if let Some((delta, alpha)) = taming {
            tame_in_place(&mut b, delta, alpha);
            tame_in_place(&mut bb, delta, alpha);
        }
        let mut dy = vec![F::zero(); d];
        let mut dyb = vec![F::zero(); d];
        problem.neutral(&y, &mut dy);
        problem.neutral(&yb, &mut dyb);
        let lhs_vec: Vec<F> = (0..d).map(|i| x[i] - dy[i] - xb[i] + dyb[i]).collect();
        let diff: Vec<F> = b.iter().zip(&bb).map(|(a, c)| *a - *c).collect();
        let dx = dist(&x, &xb);
        let dyy = dist(&y, &yb);

        let one_sided = Sample {
            lhs: dot(&lhs_vec, &diff),
            rhs: c.k2 * (dx * dx + dyy * dyy + w * w),
            witness: Witness {
                points: vec![x.clone(), y.clone(), xb.clone(), yb.clone()],
                clouds: vec![mu_s.clone(), nu_s.clone()],
            },
        };
        let mut out = vec![one_sided];
        if with_poly {
            let l = c.l;
            let growth = F::one() + norm(&x).powf(l) + norm(&xb).powf(l) + norm(&y).powf(l) + norm(&yb).powf(l);
            out.push(Sample {
                lhs: raw_diff,
                rhs: c.k3 * (growth * (dx + dyy) + w),
                witness: Witness { points: vec![x, y, xb, yb], clouds: vec![mu_s, nu_s] },
            });
        }
        out
    });
    let first = if matches!(form, DriftForm::Raw) { "one_sided" } else { "tamed_one_sided" };
    let names = [first, "polynomial_lipschitz"];
    tallies.into_iter().zip(names).map(|(t, n)| t.finish(n)).collect()
}

/// `|sigma(mu) - sigma(nu)| <= K4 W_q(mu, nu)`,
/// `|sigma(mu)| v |b(0, 0, mu)| <= K5 (1 + W_q(mu, delta_0))` and
/// `|sigma(delta_0)| v |b(0, 0, delta_0)| <= K6`, Frobenius norm.
pub fn validate_sigma<F: Real>(
    problem: &NeutralDelayProblem<F>,
    c: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    let d = problem.dim();
    let n = opts.cloud_size.max(1);
    let q = problem.order();
    let tallies = scan(opts, 3, 2, |rng| {
        let mu_s = cloud(rng, n, d, opts.lo, opts.hi);
        let nu_s = cloud(rng, n, d, opts.lo, opts.hi);
        let mu = MeasureView::new(&mu_s, d);
        let nu = MeasureView::new(&nu_s, d);
        let w = wasserstein_same_size(&mu, &nu, q).expect("same-size clouds").value;
        let mut s_mu = vec![F::zero(); d * d];
        let mut s_nu = vec![F::zero(); d * d];
        problem.diffusion(&mu, &mut s_mu);
        problem.diffusion(&nu, &mut s_nu);
        let zero = vec![F::zero(); d];
        let mut b0 = vec![F::zero(); d];
        problem.drift(&zero, &zero, &mu, &mut b0);
        vec![
            Sample {
                lhs: dist(&s_mu, &s_nu),
                rhs: c.k4 * w,
                witness: Witness { points: vec![], clouds: vec![mu_s.clone(), nu_s.clone()] },
            },
            Sample {
                lhs: norm(&s_mu).max(norm(&b0)),
                rhs: c.k5 * (F::one() + mu.distance_to_dirac0(q)),
                witness: Witness { points: vec![], clouds: vec![mu_s] },
            },
        ]
    });
    let mut checks: Vec<CheckOutcome<F>> = tallies
        .into_iter()
        .zip(["sigma_lipschitz", "linear_growth"])
        .map(|(t, n)| t.finish(n))
        .collect();
    // the bound at delta_0 is a single deterministic evaluation
    let origin = vec![F::zero(); d];
    let dirac = MeasureView::new(&origin, d);
    let mut s0 = vec![F::zero(); d * d];
    let mut b0 = vec![F::zero(); d];
    problem.diffusion(&dirac, &mut s0);
    problem.drift(&origin, &origin, &dirac, &mut b0);
    let mut at_dirac = Tally::new();
    at_dirac.push(Sample { lhs: norm(&s0).max(norm(&b0)), rhs: c.k6, witness: Witness::default() });
    checks.push(at_dirac.finish("dirac_bound"));
    ValidationReport { checks }
}

/// `|b(x, y, mu)| <= C (1 + |x|^{l+1} + |y|^{l+1} + W_q(mu, delta_0))` with
/// `C = K3 v K5`.
pub fn validate_growth<F: Real>(
    problem: &NeutralDelayProblem<F>,
    c: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    let d = problem.dim();
    let n = opts.cloud_size.max(1);
    let q = problem.order();
    let big_c = c.growth_constant();
    let e = c.l + F::one();
    let tallies = scan(opts, 4, 1, |rng| {
        let x = point(rng, d, opts.lo, opts.hi);
        let y = point(rng, d, opts.lo, opts.hi);
        let mu_s = cloud(rng, n, d, opts.lo, opts.hi);
        let mu = MeasureView::new(&mu_s, d);
        let mut b = vec![F::zero(); d];
        problem.drift(&x, &y, &mu, &mut b);
        let rhs = big_c * (F::one() + norm(&x).powf(e) + norm(&y).powf(e) + mu.distance_to_dirac0(q));
        vec![Sample { lhs: norm(&b), rhs, witness: Witness { points: vec![x, y], clouds: vec![mu_s] } }]
    });
    ValidationReport {
        checks: tallies.into_iter().map(|t| t.finish("drift_growth")).collect(),
    }
}

/// `|xi(s) - xi(t)| <= K0 |s - t|` on `[-tau, 0]`.
pub fn validate_initial_segment<F: Real>(
    problem: &NeutralDelayProblem<F>,
    c: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    let d = problem.dim();
    let tau = problem.tau();
    let tallies = scan(opts, 5, 1, |rng| {
        let s = -tau * F::lit(rng.random::<f64>());
        let t = -tau * F::lit(rng.random::<f64>());
        let mut a = vec![F::zero(); d];
        let mut b = vec![F::zero(); d];
        problem.initial(s, &mut a);
        problem.initial(t, &mut b);
        vec![Sample {
            lhs: dist(&a, &b),
            rhs: c.k0 * (s - t).abs(),
            witness: Witness { points: vec![vec![s], vec![t]], clouds: vec![] },
        }]
    });
    ValidationReport {
        checks: tallies.into_iter().map(|t| t.finish("initial_lipschitz")).collect(),
    }
}

/// Every validator above, in a single report.
pub fn validate_all<F: Real>(
    problem: &NeutralDelayProblem<F>,
    c: &AssumptionConstants<F>,
    opts: &ValidationOptions<F>,
) -> ValidationReport<F> {
    let mut checks = Vec::new();
    checks.extend(validate_neutral_contraction(problem, c, opts).checks);
    checks.extend(validate_one_sided(problem, c, opts).checks);
    checks.extend(validate_sigma(problem, c, opts).checks);
    checks.extend(validate_growth(problem, c, opts).checks);
    checks.extend(validate_initial_segment(problem, c, opts).checks);
    ValidationReport { checks }
}
