//! Equal-weight empirical measures and the Wasserstein quantities computed
//! on them.
//!
//! Coefficients only ever see a [`MeasureView`], which exposes the mean,
//! empirical moments and the distance to the Dirac mass at the origin.
//! None of these depend on the order of the samples.

use std::cell::{OnceCell, RefCell};

use thiserror::Error;

use crate::num::{norm, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("empirical measure needs at least one sample")]
    Empty,
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("sample buffer of length {len} is not a multiple of dimension {dim}")]
    Ragged { len: usize, dim: usize },
    #[error("sample {index} is not finite")]
    NonFinite { index: usize },
    #[error("exact Wasserstein distance only implemented for d = 1, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("measures with different sample counts ({0} vs {1}) are not supported")]
    UnequalSizes(usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("Wasserstein order must be >= 1, got {0}")]
    InvalidOrder(f64),
}

/// Order `q >= 1` of a Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WassersteinOrder<F>(F);

impl<F: Real> WassersteinOrder<F> {
    pub fn new(q: F) -> Result<Self, MeasureError> {
        if q.is_finite() && q >= F::one() {
            Ok(Self(q))
        } else {
            Err(MeasureError::InvalidOrder(q.to_f64_lossy()))
        }
    }

    #[inline]
    pub fn value(self) -> F {
        self.0
    }
}

/// `N` equally weighted points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure<F> {
    samples: Vec<F>,
    dim: usize,
}

impl<F: Real> EmpiricalMeasure<F> {
    pub fn new(samples: Vec<F>, dim: usize) -> Result<Self, MeasureError> {
        check_cloud(&samples, dim)?;
        Ok(Self { samples, dim })
    }

    /// One-dimensional measure from scalar samples.
    pub fn from_scalars(samples: &[F]) -> Result<Self, MeasureError> {
        Self::new(samples.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn view(&self) -> MeasureView<'_, F> {
        MeasureView::new(&self.samples, self.dim)
    }
}

/// Sum in ascending order, so the result does not depend on the order in
/// which particles are stored.
fn sorted_sum<F: Real>(mut v: Vec<F>) -> F {
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.into_iter().fold(F::zero(), |acc, x| acc + x)
}

fn check_cloud<F: Real>(samples: &[F], dim: usize) -> Result<(), MeasureError> {
    if dim == 0 {
        return Err(MeasureError::ZeroDimension);
    }
    if samples.is_empty() {
        return Err(MeasureError::Empty);
    }
    if samples.len() % dim != 0 {
        return Err(MeasureError::Ragged { len: samples.len(), dim });
    }
    if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
        return Err(MeasureError::NonFinite { index: index / dim });
    }
    Ok(())
}

/// Borrowed handle on a particle cloud with memoised summary statistics.
///
/// A view is built once per ensemble evaluation and shared by every
/// coefficient call, so the `O(N)` reductions run once rather than once per
/// particle.
pub struct MeasureView<'a, F> {
    samples: &'a [F],
    dim: usize,
    mean: OnceCell<Vec<F>>,
    moments: RefCell<Vec<(F, F)>>,
}

impl<'a, F: Real> MeasureView<'a, F> {
    /// Wraps a row-major `N x dim` buffer. The caller guarantees a non-empty,
    /// finite cloud; use [`EmpiricalMeasure::new`] for checked construction.
    pub fn new(samples: &'a [F], dim: usize) -> Self {
        debug_assert!(dim > 0 && !samples.is_empty() && samples.len() % dim == 0);
        Self { samples, dim, mean: OnceCell::new(), moments: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub(crate) fn samples(&self) -> &'a [F] {
        self.samples
    }

    fn points(&self) -> std::slice::ChunksExact<'a, F> {
        self.samples.chunks_exact(self.dim)
    }

    /// Barycentre of the cloud.
    pub fn mean(&self) -> &[F] {
        self.mean.get_or_init(|| {
            let n = F::from_count(self.len());
            (0..self.dim)
                .map(|c| sorted_sum(self.points().map(|x| x[c]).collect()) / n)
                .collect()
        })
    }

    /// `(1/N) sum_j |x_j|^p`.
    pub fn empirical_moment(&self, p: F) -> F {
        if let Some(&(_, v)) = self.moments.borrow().iter().find(|(k, _)| *k == p) {
            return v;
        }
        let n = F::from_count(self.len());
        let v = sorted_sum(self.points().map(|x| norm(x).powf(p)).collect()) / n;
        self.moments.borrow_mut().push((p, v));
        v
    }

    /// `W_q(mu, delta_0) = ((1/N) sum_j |x_j|^q)^{1/q}`.
    pub fn distance_to_dirac0(&self, q: WassersteinOrder<F>) -> F {
        let q = q.value();
        self.empirical_moment(q).powf(q.recip())
    }
}

/// Free-function form of [`MeasureView::empirical_moment`].
pub fn empirical_moment<F: Real>(mu: &EmpiricalMeasure<F>, p: F) -> F {
    mu.view().empirical_moment(p)
}

/// Free-function form of [`MeasureView::distance_to_dirac0`].
pub fn distance_to_dirac0<F: Real>(mu: &EmpiricalMeasure<F>, q: WassersteinOrder<F>) -> F {
    mu.view().distance_to_dirac0(q)
}

/// Exact `W_q` between two equal-size empirical measures on the line:
/// the sorted samples are matched in order.
pub fn wasserstein_1d<F: Real>(
    mu: &EmpiricalMeasure<F>,
    nu: &EmpiricalMeasure<F>,
    q: WassersteinOrder<F>,
) -> Result<F, MeasureError> {
    wasserstein_1d_slices(mu.samples(), mu.dim(), nu.samples(), nu.dim(), q)
}

pub(crate) fn wasserstein_1d_slices<F: Real>(
    a: &[F],
    dim_a: usize,
    b: &[F],
    dim_b: usize,
    q: WassersteinOrder<F>,
) -> Result<F, MeasureError> {
    for d in [dim_a, dim_b] {
        if d != 1 {
            return Err(MeasureError::UnsupportedDimension(d));
        }
    }
    if a.len() != b.len() {
        return Err(MeasureError::UnequalSizes(a.len(), b.len()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    let by_value = |l: &F, r: &F| l.partial_cmp(r).expect("finite samples");
    xs.sort_unstable_by(by_value);
    ys.sort_unstable_by(by_value);
    let q = q.value();
    let n = F::from_count(xs.len());
    let cost = xs.iter().zip(&ys).map(|(&x, &y)| (x - y).abs().powf(q)).sum::<F>() / n;
    Ok(cost.powf(q.recip()))
}

/// `((1/N) sum_j |z1_j - z2_j|^q)^{1/q}`: the transport cost of the identity
/// coupling, an upper bound on `W_q` of the two empirical measures.
pub fn coupling_bound<F: Real>(
    z1: &[F],
    z2: &[F],
    dim: usize,
    q: WassersteinOrder<F>,
) -> Result<F, MeasureError> {
    if dim == 0 {
        return Err(MeasureError::ZeroDimension);
    }
    if z1.len() != z2.len() || z1.len() % dim != 0 || z1.is_empty() {
        return Err(MeasureError::Shape(format!(
            "{} vs {} values with dimension {dim}",
            z1.len(),
            z2.len()
        )));
    }
    let q = q.value();
    let n = F::from_count(z1.len() / dim);
    let cost = z1
        .chunks_exact(dim)
        .zip(z2.chunks_exact(dim))
        .map(|(a, b)| crate::num::dist(a, b).powf(q))
        .sum::<F>()
        / n;
    Ok(cost.powf(q.recip()))
}

/// A Wasserstein value that is either exact or an identity-coupling bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WassersteinEstimate<F> {
    pub value: F,
    /// `false` when `value` is only an upper bound (`d > 1`).
    pub exact: bool,
}

/// `W_q` between two same-size clouds: exact for `d = 1`, otherwise the
/// identity-coupling upper bound.
pub fn wasserstein_same_size<F: Real>(
    mu: &MeasureView<'_, F>,
    nu: &MeasureView<'_, F>,
    q: WassersteinOrder<F>,
) -> Result<WassersteinEstimate<F>, MeasureError> {
    if mu.dim() != nu.dim() {
        return Err(MeasureError::Shape(format!("dimensions {} vs {}", mu.dim(), nu.dim())));
    }
    if mu.len() != nu.len() {
        return Err(MeasureError::UnequalSizes(mu.len(), nu.len()));
    }
    if mu.dim() == 1 {
        let value = wasserstein_1d_slices(mu.samples(), 1, nu.samples(), 1, q)?;
        Ok(WassersteinEstimate { value, exact: true })
    } else {
        let value = coupling_bound(mu.samples(), nu.samples(), mu.dim(), q)?;
        Ok(WassersteinEstimate { value, exact: false })
    }
}
