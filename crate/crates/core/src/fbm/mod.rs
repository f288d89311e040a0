//! Fractional Brownian motion on uniform grids.
//!
//! Two exact generators are provided: a Cholesky factorisation of the full
//! covariance matrix (reference, `O(n^2)` per path) and circulant embedding
//! of the stationary increment covariance (`O(n log n)` per path). Both draw
//! their randomness from [`crate::rng::stream_rng`], so a path is a pure
//! function of `(seed, replication, stream_id)`.

mod cholesky;
mod circulant;

pub use cholesky::CholeskySampler;
pub use circulant::CirculantSampler;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::num::Real;
use crate::rng::stream_rng;

/// Largest grid accepted by the Cholesky generator.
pub const MAX_CHOLESKY_STEPS: usize = 4096;

/// Eigenvalues of the circulant embedding below this value abort the
/// embedding in favour of the Cholesky generator.
pub const EMBEDDING_EIGEN_TOL: f64 = -1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FbmError {
    #[error("Hurst exponent {0} outside [1/2, 1)")]
    InvalidHurst(f64),
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("kernel is singular on the diagonal s = t = {0}")]
    Singular(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid of {n_steps} steps exceeds the Cholesky limit of {MAX_CHOLESKY_STEPS}")]
    GridTooLarge { n_steps: usize },
    #[error("covariance matrix not positive definite at pivot {pivot} (value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("path needs at least two grid points")]
    PathTooShort,
    #[error("coarsening factor {factor} does not divide {n_steps} steps")]
    Indivisible { factor: usize, n_steps: usize },
}

/// Hurst exponent, restricted to `[1/2, 1)`.
///
/// `H = 1/2` is standard Brownian motion and is only admitted as a
/// degenerate test case; see [`HurstParam::is_brownian`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam<F>(F);

impl<F: Real> HurstParam<F> {
    pub fn new(h: F) -> Result<Self, FbmError> {
        if h.is_finite() && h >= F::lit(0.5) && h < F::one() {
            Ok(Self(h))
        } else {
            Err(FbmError::InvalidHurst(h.to_f64_lossy()))
        }
    }

    #[inline]
    pub fn value(self) -> F {
        self.0
    }

    /// True for the Brownian case `H = 1/2`.
    pub fn is_brownian(self) -> bool {
        self.0 == F::lit(0.5)
    }
}

/// Uniform grid `t_k = k * dt`, `k = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<F> {
    dt: F,
    n_steps: usize,
}

impl<F: Real> TimeGrid<F> {
    pub fn new(dt: F, n_steps: usize) -> Result<Self, FbmError> {
        if !(dt.is_finite() && dt > F::zero()) {
            return Err(FbmError::InvalidGrid(format!("dt must be positive, got {dt}")));
        }
        if n_steps == 0 {
            return Err(FbmError::InvalidGrid("need at least one step".into()));
        }
        Ok(Self { dt, n_steps })
    }

    /// Grid with `n_steps` equal steps covering `[0, horizon]`.
    pub fn with_horizon(horizon: F, n_steps: usize) -> Result<Self, FbmError> {
        if n_steps == 0 {
            return Err(FbmError::InvalidGrid("need at least one step".into()));
        }
        Self::new(horizon / F::from_count(n_steps), n_steps)
    }

    #[inline]
    pub fn dt(&self) -> F {
        self.dt
    }

    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    #[inline]
    pub fn t(&self, k: usize) -> F {
        F::from_count(k) * self.dt
    }

    pub fn horizon(&self) -> F {
        self.t(self.n_steps)
    }

    pub fn points(&self) -> impl Iterator<Item = F> + '_ {
        (0..=self.n_steps).map(move |k| self.t(k))
    }

    /// Grid with `factor` times fewer (and wider) steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self, FbmError> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(FbmError::Indivisible { factor, n_steps: self.n_steps });
        }
        Self::new(self.dt * F::from_count(factor), self.n_steps / factor)
    }
}

/// One coordinate of one fBm driver sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath<F> {
    pub grid: TimeGrid<F>,
    /// `values[k] = B^H(t_k)`, with `values[0] = 0`.
    pub values: Vec<F>,
    pub stream_id: u64,
}

impl<F: Real> FbmPath<F> {
    /// Rebuilds a path from its increments by cumulative summation.
    pub fn from_increments(grid: TimeGrid<F>, incs: &[F], stream_id: u64) -> Self {
        debug_assert_eq!(incs.len(), grid.n_steps());
        let mut values = Vec::with_capacity(incs.len() + 1);
        let mut acc = F::zero();
        values.push(acc);
        for &dx in incs {
            acc += dx;
            values.push(acc);
        }
        Self { grid, values, stream_id }
    }

    /// The same path observed on every `factor`-th grid point.
    pub fn restrict(&self, factor: usize) -> Result<Self, FbmError> {
        let grid = self.grid.coarsen(factor)?;
        let values = self.values.iter().step_by(factor).copied().collect();
        Ok(Self { grid, values, stream_id: self.stream_id })
    }
}

/// `R_H(s, t) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2`.
pub fn fbm_covariance<F: Real>(s: F, t: F, h: HurstParam<F>) -> Result<F, FbmError> {
    for x in [s, t] {
        if x < F::zero() {
            return Err(FbmError::NegativeTime(x.to_f64_lossy()));
        }
    }
    Ok(covariance_unchecked(s, t, h.value()))
}

#[inline]
pub(crate) fn covariance_unchecked<F: Real>(s: F, t: F, h: F) -> F {
    let two_h = h + h;
    F::lit(0.5) * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// `phi(s, t) = H (2H - 1) |s - t|^{2H - 2}`, the kernel whose double
/// integral over `[0, t] x [0, s]` is `R_H(s, t)`.
pub fn phi_kernel<F: Real>(s: F, t: F, h: HurstParam<F>) -> Result<F, FbmError> {
    if s == t {
        return Err(FbmError::Singular(s.to_f64_lossy()));
    }
    let h = h.value();
    let two = F::lit(2.0);
    Ok(h * (two * h - F::one()) * (s - t).abs().powf(two * h - two))
}

/// `path[k + 1] - path[k]` for every step.
pub fn increments<F: Real>(path: &FbmPath<F>) -> Result<Vec<F>, FbmError> {
    if path.values.len() < 2 {
        return Err(FbmError::PathTooShort);
    }
    Ok(path.values.windows(2).map(|w| w[1] - w[0]).collect())
}

/// An exact fBm sampler bound to one grid and Hurst exponent.
#[derive(Debug)]
pub enum FbmGenerator<F: Real> {
    Circulant(CirculantSampler<F>),
    Cholesky(CholeskySampler<F>),
}

impl<F: Real> FbmGenerator<F> {
    pub fn cholesky(grid: TimeGrid<F>, h: HurstParam<F>) -> Result<Self, FbmError> {
        Ok(Self::Cholesky(CholeskySampler::new(grid, h)?))
    }

    /// Circulant embedding, falling back to Cholesky when the embedding has
    /// an eigenvalue below [`EMBEDDING_EIGEN_TOL`].
    pub fn fast(grid: TimeGrid<F>, h: HurstParam<F>) -> Result<Self, FbmError> {
        match CirculantSampler::new(grid, h) {
            Some(s) => Ok(Self::Circulant(s)),
            None => {
                log::warn!(
                    "circulant embedding not nonnegative for H={} n={}; using Cholesky",
                    h.value(),
                    grid.n_steps()
                );
                Self::cholesky(grid, h)
            }
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, Self::Cholesky(_))
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        match self {
            Self::Circulant(s) => s.grid(),
            Self::Cholesky(s) => s.grid(),
        }
    }

    /// Writes `n_steps` increments drawn from `rng` into `out`.
    pub fn sample_increments(&self, rng: &mut ChaCha8Rng, out: &mut [F]) {
        match self {
            Self::Circulant(s) => s.sample_increments(rng, out),
            Self::Cholesky(s) => s.sample_increments(rng, out),
        }
    }

    /// Increments of the driver identified by `(seed, replication, stream_id)`.
    pub fn increments_for(&self, seed: u64, replication: u64, stream_id: u64) -> Vec<F> {
        let mut rng = stream_rng(seed, replication, stream_id);
        let mut out = vec![F::zero(); self.grid().n_steps()];
        self.sample_increments(&mut rng, &mut out);
        out
    }

    pub fn path_for(&self, seed: u64, replication: u64, stream_id: u64) -> FbmPath<F> {
        let incs = self.increments_for(seed, replication, stream_id);
        FbmPath::from_increments(*self.grid(), &incs, stream_id)
    }

    /// Paths with stream ids `0..n_paths` in replication 0.
    pub fn sample_paths(&self, seed: u64, n_paths: usize) -> Vec<FbmPath<F>> {
        (0..n_paths as u64).map(|id| self.path_for(seed, 0, id)).collect()
    }
}

/// `n_paths` exact fBm paths from the Cholesky generator.
pub fn sample_fbm_cholesky<F: Real>(
    grid: TimeGrid<F>,
    h: HurstParam<F>,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<FbmPath<F>>, FbmError> {
    Ok(FbmGenerator::cholesky(grid, h)?.sample_paths(seed, n_paths))
}

/// `n_paths` exact fBm paths from circulant embedding (or its fallback).
pub fn sample_fbm_fast<F: Real>(
    grid: TimeGrid<F>,
    h: HurstParam<F>,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<FbmPath<F>>, FbmError> {
    Ok(FbmGenerator::fast(grid, h)?.sample_paths(seed, n_paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(x: f64) -> HurstParam<f64> {
        HurstParam::new(x).unwrap()
    }

    #[test]
    fn hurst_range() {
        assert!(HurstParam::new(0.5f64).unwrap().is_brownian());
        assert!(HurstParam::new(0.49f64).is_err());
        assert!(HurstParam::new(1.0f64).is_err());
        assert!(HurstParam::new(f64::NAN).is_err());
        assert!(!h(0.75).is_brownian());
    }

    #[test]
    fn covariance_values() {
        assert!((fbm_covariance(1.0, 1.0, h(0.75)).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(2.0, 1.0, h(0.5)).unwrap() - 1.0).abs() < 1e-15);
        assert!((fbm_covariance(2.0, 1.0, h(0.75)).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(fbm_covariance(-1.0, 1.0, h(0.75)), Err(FbmError::NegativeTime(-1.0)));
    }

    #[test]
    fn kernel_values() {
        assert!((phi_kernel(2.0, 1.0, h(0.75)).unwrap() - 0.375).abs() < 1e-15);
        assert_eq!(phi_kernel(1.0, 1.0, h(0.75)), Err(FbmError::Singular(1.0)));
        let near_half = HurstParam::new(0.5f64 + 1e-9).unwrap();
        assert!(phi_kernel(0.3, 1.7, near_half).unwrap().abs() < 1e-8);
        assert_eq!(phi_kernel(0.3, 1.7, h(0.5)).unwrap(), 0.0);
    }

    #[test]
    fn increments_of_small_path() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let path = FbmPath { grid, values: vec![0.0, 1.0, 3.0], stream_id: 0 };
        assert_eq!(increments(&path).unwrap(), vec![1.0, 2.0]);
        let short = FbmPath { grid, values: vec![0.0], stream_id: 0 };
        assert_eq!(increments(&short), Err(FbmError::PathTooShort));
    }

    #[test]
    fn grid_coarsening() {
        let g = TimeGrid::new(0.25f64, 8).unwrap();
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.n_steps(), 2);
        assert_eq!(c.dt(), 1.0);
        assert!(g.coarsen(3).is_err());
        assert!(TimeGrid::new(0.0f64, 3).is_err());
        assert!(TimeGrid::new(1.0f64, 0).is_err());
    }

    #[test]
    fn paths_start_at_zero_and_are_deterministic() {
        let grid = TimeGrid::new(0.1f64, 37).unwrap();
        let a = sample_fbm_fast(grid, h(0.7), 3, 4).unwrap();
        let b = sample_fbm_fast(grid, h(0.7), 3, 4).unwrap();
        assert_eq!(a, b);
        for p in &a {
            assert_eq!(p.values[0], 0.0);
            assert_eq!(p.values.len(), 38);
        }
        let c = sample_fbm_cholesky(grid, h(0.7), 3, 2).unwrap();
        assert_eq!(c, sample_fbm_cholesky(grid, h(0.7), 3, 2).unwrap());
        assert_eq!(c[0].values[0], 0.0);
    }

    #[test]
    fn cholesky_size_guard() {
        let grid = TimeGrid::new(1.0f64, MAX_CHOLESKY_STEPS + 1).unwrap();
        assert!(matches!(
            FbmGenerator::cholesky(grid, h(0.7)),
            Err(FbmError::GridTooLarge { .. })
        ));
    }

    #[test]
    fn single_step_grid() {
        let grid = TimeGrid::new(0.5f64, 1).unwrap();
        let g = FbmGenerator::fast(grid, h(0.8)).unwrap();
        assert!(!g.is_fallback());
        assert_eq!(g.path_for(1, 0, 0).values.len(), 2);
    }

    #[test]
    fn works_in_single_precision() {
        let grid = TimeGrid::new(0.25f32, 16).unwrap();
        let hp = HurstParam::new(0.75f32).unwrap();
        let p = sample_fbm_fast(grid, hp, 9, 1).unwrap();
        assert!(p[0].values.iter().all(|x| x.is_finite()));
    }
}
