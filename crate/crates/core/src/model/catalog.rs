//! Built-in problems with hand-derived assumption constants.
//!
//! All entries are one-dimensional and use `tau = 1`, `T = 1`, `H = 0.75`,
//! `q = 2` unless overridden. The one-sided constants hold on the default
//! scan box `[-5, 5]`: with a neutral term and a cubic drift the cross term
//! `<D(y) - D(y'), x^3 - x'^3>` only admits a bound that grows with the box.

use super::{AssumptionConstants, NeutralDelayProblem};
use crate::num::Real;

pub struct ProblemCatalogEntry<F: Real> {
    pub name: &'static str,
    pub problem: NeutralDelayProblem<F>,
    pub constants: AssumptionConstants<F>,
    pub notes: &'static str,
}

pub const CATALOG_NAMES: [&str; 5] =
    ["cubic-mf", "linear", "pure-delay-cubic", "noise-only", "decoupled-cubic"];

/// `b = x - x^3 + y/2 + mean(mu)/2`, `D(y) = y/4`,
/// `sigma = 1/2 + W_q(mu, delta_0)/10`, `xi(t) = 1 + t / (2 tau)`.
pub fn cubic_mf<F: Real>() -> ProblemCatalogEntry<F> {
    let half = F::lit(0.5);
    let problem = NeutralDelayProblem::<F>::builder("cubic-mf", 1)
        .drift(move |x, y, mu, out| {
            out[0] = x[0] - x[0] * x[0] * x[0] + half * y[0] + half * mu.mean()[0];
        })
        .neutral(|y, out| out[0] = F::lit(0.25) * y[0])
        .diffusion(|mu, out| out[0] = F::lit(0.5) + F::lit(0.1) * mu.distance_to_dirac0(order2()))
        .initial_segment(|t, out| out[0] = F::one() + t * F::lit(0.5))
        .build()
        .expect("catalog problem is well formed");
    ProblemCatalogEntry {
        name: "cubic-mf",
        problem,
        constants: AssumptionConstants {
            lambda: F::lit(0.25),
            l: F::lit(2.0),
            k0: F::lit(0.5),
            k2: F::lit(2.0),
            k3: F::lit(1.5),
            k4: F::lit(0.1),
            k5: F::lit(0.5),
            k6: F::lit(0.5),
        },
        notes: "superlinear mean-field drift with neutral delay and measure-dependent noise",
    }
}

fn order2<F: Real>() -> crate::measure::WassersteinOrder<F> {
    crate::measure::WassersteinOrder::new(F::lit(2.0)).expect("2 >= 1")
}

/// `b = -x + y/2 + mean(mu)/2`, `D(y) = y/5`, `sigma = 3/10`, `xi = 1`.
pub fn linear<F: Real>() -> ProblemCatalogEntry<F> {
    let half = F::lit(0.5);
    let problem = NeutralDelayProblem::<F>::builder("linear", 1)
        .drift(move |x, y, mu, out| out[0] = -x[0] + half * y[0] + half * mu.mean()[0])
        .neutral(|y, out| out[0] = F::lit(0.2) * y[0])
        .diffusion(|_, out| out[0] = F::lit(0.3))
        .initial_segment(|_, out| out[0] = F::one())
        .build()
        .expect("catalog problem is well formed");
    ProblemCatalogEntry {
        name: "linear",
        problem,
        constants: AssumptionConstants {
            lambda: F::lit(0.2),
            l: F::one(),
            k0: F::zero(),
            k2: F::one(),
            k3: F::one(),
            k4: F::zero(),
            k5: F::lit(0.5),
            k6: F::lit(0.3),
        },
        notes: "all coefficients linear",
    }
}

/// `b = -x^3 - y^3`, `D = 0`, `sigma = 1/2 + W_q(mu, delta_0)/10`,
/// `xi(t) = 1 + t / (2 tau)`.
pub fn pure_delay_cubic<F: Real>() -> ProblemCatalogEntry<F> {
    let problem = NeutralDelayProblem::<F>::builder("pure-delay-cubic", 1)
        .drift(|x, y, _, out| out[0] = -x[0] * x[0] * x[0] - y[0] * y[0] * y[0])
        .neutral(|_, out| out[0] = F::zero())
        .diffusion(|mu, out| out[0] = F::lit(0.5) + F::lit(0.1) * mu.distance_to_dirac0(order2()))
        .initial_segment(|t, out| out[0] = F::one() + t * F::lit(0.5))
        .build()
        .expect("catalog problem is well formed");
    ProblemCatalogEntry {
        name: "pure-delay-cubic",
        problem,
        constants: AssumptionConstants {
            lambda: F::lit(0.1),
            l: F::lit(2.0),
            k0: F::lit(0.5),
            k2: F::lit(37.5),
            k3: F::lit(1.5),
            k4: F::lit(0.1),
            k5: F::lit(0.5),
            k6: F::lit(0.5),
        },
        notes: "cubic feedback through the delayed state; large one-sided constant (stress case)",
    }
}

/// `b = 0`, `D = 0`, `sigma = 1/2`, `xi = 1`: the scheme integrates the noise
/// exactly.
pub fn noise_only<F: Real>() -> ProblemCatalogEntry<F> {
    let problem = NeutralDelayProblem::<F>::builder("noise-only", 1)
        .drift(|_, _, _, out| out[0] = F::zero())
        .neutral(|_, out| out[0] = F::zero())
        .diffusion(|_, out| out[0] = F::lit(0.5))
        .initial_segment(|_, out| out[0] = F::one())
        .build()
        .expect("catalog problem is well formed");
    ProblemCatalogEntry {
        name: "noise-only",
        problem,
        constants: AssumptionConstants {
            lambda: F::lit(0.1),
            l: F::one(),
            k0: F::zero(),
            k2: F::zero(),
            k3: F::zero(),
            k4: F::zero(),
            k5: F::lit(0.5),
            k6: F::lit(0.5),
        },
        notes: "additive fBm only",
    }
}

/// `cubic-mf` with the measure dependence removed: particles decouple.
pub fn decoupled_cubic<F: Real>() -> ProblemCatalogEntry<F> {
    let half = F::lit(0.5);
    let problem = NeutralDelayProblem::<F>::builder("decoupled-cubic", 1)
        .drift(move |x, y, _, out| out[0] = x[0] - x[0] * x[0] * x[0] + half * y[0])
        .neutral(|y, out| out[0] = F::lit(0.25) * y[0])
        .diffusion(|_, out| out[0] = F::lit(0.5))
        .initial_segment(|t, out| out[0] = F::one() + t * F::lit(0.5))
        .build()
        .expect("catalog problem is well formed");
    ProblemCatalogEntry {
        name: "decoupled-cubic",
        problem,
        constants: AssumptionConstants {
            lambda: F::lit(0.25),
            l: F::lit(2.0),
            k0: F::lit(0.5),
            k2: F::lit(2.0),
            k3: F::lit(1.5),
            k4: F::zero(),
            k5: F::lit(0.5),
            k6: F::lit(0.5),
        },
        notes: "no measure dependence; the particle system reduces to independent copies",
    }
}

pub fn builtin_catalog<F: Real>() -> Vec<ProblemCatalogEntry<F>> {
    vec![cubic_mf(), linear(), pure_delay_cubic(), noise_only(), decoupled_cubic()]
}

pub fn lookup<F: Real>(name: &str) -> Option<ProblemCatalogEntry<F>> {
    match name {
        "cubic-mf" => Some(cubic_mf()),
        "linear" => Some(linear()),
        "pure-delay-cubic" => Some(pure_delay_cubic()),
        "noise-only" => Some(noise_only()),
        "decoupled-cubic" => Some(decoupled_cubic()),
        _ => None,
    }
}
