use super::ExperimentError;
use crate::num::Real;

/// One measured error level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow<F> {
    /// Step size `dt` or particle count `N`.
    pub param: F,
    /// `(mean of sup-norm^p)^{1/p}`.
    pub error: F,
    /// Monte Carlo standard error of `error` (delta method).
    pub stderr: F,
    /// Replications that contributed.
    pub n_mc: usize,
    /// Replications that diverged or failed to converge at this level.
    pub failures: usize,
}

impl<F: Real> ErrorRow<F> {
    /// Rows with failed runs are reported but never fitted.
    pub fn flagged(&self) -> bool {
        self.failures > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable<F> {
    /// Sorted by increasing `param`.
    pub rows: Vec<ErrorRow<F>>,
}

impl<F: Real> ErrorTable<F> {
    pub fn new(mut rows: Vec<ErrorRow<F>>) -> Self {
        rows.sort_by(|a, b| a.param.partial_cmp(&b.param).unwrap_or(std::cmp::Ordering::Equal));
        Self { rows }
    }

    /// Table with exact errors and no Monte Carlo noise.
    pub fn from_pairs(pairs: &[(F, F)]) -> Self {
        Self::new(
            pairs
                .iter()
                .map(|&(param, error)| ErrorRow { param, error, stderr: F::zero(), n_mc: 1, failures: 0 })
                .collect(),
        )
    }

    pub fn row(&self, param: F) -> Option<&ErrorRow<F>> {
        self.rows.iter().find(|r| r.param == param)
    }
}

/// Least-squares line through `(log param, log error)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate<F> {
    pub slope: F,
    pub intercept: F,
    pub r_squared: F,
    pub n_points: usize,
}

/// Fits `log error = intercept + slope * log param` over unflagged rows with
/// positive error.
pub fn fit_rate<F: Real>(table: &ErrorTable<F>) -> Result<RateEstimate<F>, ExperimentError> {
    let pts: Vec<(F, F)> = table
        .rows
        .iter()
        .filter(|r| !r.flagged() && r.error > F::zero() && r.param > F::zero())
        .map(|r| (r.param.ln(), r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(ExperimentError::TooFewRows(pts.len()));
    }
    let n = F::from_count(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<F>() / n;
    let my = pts.iter().map(|p| p.1).sum::<F>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<F>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<F>();
    let syy = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<F>();
    if sxx == F::zero() {
        return Err(ExperimentError::TooFewRows(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = pts
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum::<F>();
    let r_squared = if syy > F::zero() { F::one() - ss_res / syy } else { F::one() };
    Ok(RateEstimate { slope, intercept, r_squared, n_points: pts.len() })
}

/// Mean and standard error of the mean.
pub(crate) fn mean_and_se<F: Real>(values: &[F]) -> (F, F) {
    let n = values.len();
    if n == 0 {
        return (F::nan(), F::nan());
    }
    let nf = F::from_count(n);
    let mean = values.iter().copied().sum::<F>() / nf;
    if n == 1 {
        return (mean, F::zero());
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / F::from_count(n - 1);
    (mean, (var / nf).sqrt())
}

/// `(mean^{1/p}, se of mean^{1/p})` from per-replication p-th powers.
pub(crate) fn root_mean<F: Real>(values: &[F], p: F) -> (F, F) {
    let (mean, se) = mean_and_se(values);
    let root = mean.powf(p.recip());
    let se_root = if se > F::zero() && root > F::zero() {
        se / (p * root.powf(p - F::one()))
    } else {
        F::zero()
    };
    (root, se_root)
}
