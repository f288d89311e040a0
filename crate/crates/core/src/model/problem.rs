use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::fbm::HurstParam;
use crate::measure::{MeasureView, WassersteinOrder};
use crate::num::{norm, Real};

/// Drift `b(x, y, mu)`; writes the result into the last argument.
pub type DriftFn<F> = Arc<dyn Fn(&[F], &[F], &MeasureView<'_, F>, &mut [F]) + Send + Sync>;
/// Neutral term `D(y)`.
pub type NeutralFn<F> = Arc<dyn Fn(&[F], &mut [F]) + Send + Sync>;
/// Diffusion `sigma(mu)`, a row-major `d x d` matrix.
pub type DiffusionFn<F> = Arc<dyn Fn(&MeasureView<'_, F>, &mut [F]) + Send + Sync>;
/// Deterministic initial segment `xi(t)`, `t in [-tau, 0]`.
pub type SegmentFn<F> = Arc<dyn Fn(F, &mut [F]) + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("missing coefficient: {0}")]
    Missing(&'static str),
    #[error("neutral term must vanish at the origin, |D(0)| = {0:e}")]
    NeutralNotCentered(f64),
    #[error("initial segment is not finite at t = {0}")]
    SegmentNotFinite(f64),
    #[error("invalid constant {name} = {value}: {reason}")]
    InvalidConstant { name: &'static str, value: f64, reason: &'static str },
}

/// Neutral McKean-Vlasov delay equation
/// `d(X_t - D(X_{t - tau})) = b(X_t, X_{t - tau}, L(X_t)) dt + sigma(L(X_t)) dB^H_t`
/// on `[0, T]` with deterministic initial segment `xi` on `[-tau, 0]`.
#[derive(Clone)]
pub struct NeutralDelayProblem<F: Real> {
    name: String,
    dim: usize,
    tau: F,
    horizon: F,
    hurst: HurstParam<F>,
    order: WassersteinOrder<F>,
    drift: DriftFn<F>,
    neutral: NeutralFn<F>,
    diffusion: DiffusionFn<F>,
    initial: SegmentFn<F>,
}

impl<F: Real> fmt::Debug for NeutralDelayProblem<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeutralDelayProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("tau", &self.tau)
            .field("horizon", &self.horizon)
            .field("hurst", &self.hurst.value())
            .field("q", &self.order.value())
            .finish_non_exhaustive()
    }
}

impl<F: Real> NeutralDelayProblem<F> {
    pub fn builder(name: impl Into<String>, dim: usize) -> ProblemBuilder<F> {
        ProblemBuilder {
            name: name.into(),
            dim,
            tau: F::one(),
            horizon: F::one(),
            hurst: F::lit(0.75),
            order: F::lit(2.0),
            drift: None,
            neutral: None,
            diffusion: None,
            initial: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> F {
        self.tau
    }

    pub fn horizon(&self) -> F {
        self.horizon
    }

    pub fn hurst(&self) -> HurstParam<F> {
        self.hurst
    }

    pub fn order(&self) -> WassersteinOrder<F> {
        self.order
    }

    #[inline]
    pub fn drift(&self, x: &[F], y: &[F], mu: &MeasureView<'_, F>, out: &mut [F]) {
        (self.drift)(x, y, mu, out)
    }

    #[inline]
    pub fn neutral(&self, y: &[F], out: &mut [F]) {
        (self.neutral)(y, out)
    }

    #[inline]
    pub fn diffusion(&self, mu: &MeasureView<'_, F>, out: &mut [F]) {
        (self.diffusion)(mu, out)
    }

    #[inline]
    pub fn initial(&self, t: F, out: &mut [F]) {
        (self.initial)(t, out)
    }

    pub fn initial_vec(&self, t: F) -> Vec<F> {
        let mut v = vec![F::zero(); self.dim];
        self.initial(t, &mut v);
        v
    }

    pub fn with_tau(mut self, tau: F) -> Result<Self, ProblemError> {
        self.tau = positive("tau", tau)?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: F) -> Result<Self, ProblemError> {
        self.horizon = positive("T", horizon)?;
        Ok(self)
    }

    pub fn with_hurst(mut self, hurst: HurstParam<F>) -> Self {
        self.hurst = hurst;
        self
    }

    pub fn with_order(mut self, order: WassersteinOrder<F>) -> Self {
        self.order = order;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

fn positive<F: Real>(name: &'static str, value: F) -> Result<F, ProblemError> {
    if value.is_finite() && value > F::zero() {
        Ok(value)
    } else {
        Err(ProblemError::NonPositive { name, value: value.to_f64_lossy() })
    }
}

pub struct ProblemBuilder<F: Real> {
    name: String,
    dim: usize,
    tau: F,
    horizon: F,
    hurst: F,
    order: F,
    drift: Option<DriftFn<F>>,
    neutral: Option<NeutralFn<F>>,
    diffusion: Option<DiffusionFn<F>>,
    initial: Option<SegmentFn<F>>,
}

impl<F: Real> ProblemBuilder<F> {
    pub fn tau(mut self, tau: F) -> Self {
        self.tau = tau;
        self
    }

    pub fn horizon(mut self, horizon: F) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn hurst(mut self, h: F) -> Self {
        self.hurst = h;
        self
    }

    pub fn order(mut self, q: F) -> Self {
        self.order = q;
        self
    }

    pub fn drift(
        mut self,
        f: impl Fn(&[F], &[F], &MeasureView<'_, F>, &mut [F]) + Send + Sync + 'static,
    ) -> Self {
        self.drift = Some(Arc::new(f));
        self
    }

    pub fn neutral(mut self, f: impl Fn(&[F], &mut [F]) + Send + Sync + 'static) -> Self {
        self.neutral = Some(Arc::new(f));
        self
    }

    pub fn diffusion(
        mut self,
        f: impl Fn(&MeasureView<'_, F>, &mut [F]) + Send + Sync + 'static,
    ) -> Self {
        self.diffusion = Some(Arc::new(f));
        self
    }

    pub fn initial_segment(mut self, f: impl Fn(F, &mut [F]) + Send + Sync + 'static) -> Self {
        self.initial = Some(Arc::new(f));
        self
    }

    /// Checks `D(0) = 0` and that `xi` is finite on a fine sample of
    /// `[-tau, 0]`.
    pub fn build(self) -> Result<NeutralDelayProblem<F>, ProblemError> {
        if self.dim == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        let tau = positive("tau", self.tau)?;
        let horizon = positive("T", self.horizon)?;
        let hurst = HurstParam::new(self.hurst).map_err(|_| ProblemError::InvalidConstant {
            name: "H",
            value: self.hurst.to_f64_lossy(),
            reason: "must lie in [1/2, 1)",
        })?;
        let order = WassersteinOrder::new(self.order).map_err(|_| ProblemError::InvalidConstant {
            name: "q",
            value: self.order.to_f64_lossy(),
            reason: "must be >= 1",
        })?;
        let problem = NeutralDelayProblem {
            name: self.name,
            dim: self.dim,
            tau,
            horizon,
            hurst,
            order,
            drift: self.drift.ok_or(ProblemError::Missing("drift"))?,
            neutral: self.neutral.ok_or(ProblemError::Missing("neutral"))?,
            diffusion: self.diffusion.ok_or(ProblemError::Missing("diffusion"))?,
            initial: self.initial.ok_or(ProblemError::Missing("initial segment"))?,
        };

        let zero = vec![F::zero(); problem.dim];
        let mut out = vec![F::zero(); problem.dim];
        problem.neutral(&zero, &mut out);
        let d0 = norm(&out);
        if d0 != F::zero() {
            return Err(ProblemError::NeutralNotCentered(d0.to_f64_lossy()));
        }
        const PROBES: usize = 64;
        for j in 0..=PROBES {
            let t = -tau * F::from_count(PROBES - j) / F::from_count(PROBES);
            problem.initial(t, &mut out);
            if out.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::SegmentNotFinite(t.to_f64_lossy()));
            }
        }
        Ok(problem)
    }
}

/// Constants declared for the standing assumptions on a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants<F> {
    /// Lipschitz constant of the neutral term, `0 < lambda < 1`.
    pub lambda: F,
    /// Polynomial growth exponent, `l >= 1`.
    pub l: F,
    /// Lipschitz constant of the initial segment.
    pub k0: F,
    /// One-sided Lipschitz constant.
    pub k2: F,
    /// Polynomial Lipschitz constant.
    pub k3: F,
    /// Lipschitz constant of `sigma` in `W_q`.
    pub k4: F,
    /// Linear growth constant of `sigma(mu)` and `b(0, 0, mu)`.
    pub k5: F,
    /// Bound on `|b(0, 0, delta_0)|` and `|sigma(delta_0)|`.
    pub k6: F,
}

impl<F: Real> AssumptionConstants<F> {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let bad = |name, value: F, reason| ProblemError::InvalidConstant {
            name,
            value: value.to_f64_lossy(),
            reason,
        };
        if !(self.lambda > F::zero() && self.lambda < F::one()) {
            return Err(bad("lambda", self.lambda, "must lie in (0, 1)"));
        }
        if !(self.l >= F::one()) {
            return Err(bad("l", self.l, "must be >= 1"));
        }
        for (name, v) in [
            ("K0", self.k0),
            ("K2", self.k2),
            ("K3", self.k3),
            ("K4", self.k4),
            ("K5", self.k5),
            ("K6", self.k6),
        ] {
            if !(v >= F::zero() && v.is_finite()) {
                return Err(bad(name, v, "must be nonnegative and finite"));
            }
        }
        Ok(())
    }

    /// Growth constant `C = K3 v K5` of `|b(x, y, mu)|`.
    pub fn growth_constant(&self) -> F {
        self.k3.max(self.k5)
    }
}
