use rand_chacha::ChaCha8Rng;

use super::{covariance_unchecked, FbmError, HurstParam, TimeGrid, MAX_CHOLESKY_STEPS};
use crate::num::Real;
use crate::rng::fill_standard_normal;

/// Exact sampler from the Cholesky factor of `Cov(B(t_i), B(t_j))`,
/// `i, j = 1..=n`.
#[derive(Debug, Clone)]
pub struct CholeskySampler<F> {
    grid: TimeGrid<F>,
    /// Lower factor, packed row-major: row `i` occupies `i(i+1)/2 .. + i + 1`.
    lower: Vec<F>,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl<F: Real> CholeskySampler<F> {
    pub fn new(grid: TimeGrid<F>, h: HurstParam<F>) -> Result<Self, FbmError> {
        let n = grid.n_steps();
        if n > MAX_CHOLESKY_STEPS {
            return Err(FbmError::GridTooLarge { n_steps: n });
        }
        let h = h.value();
        let mut lower = vec![F::zero(); row_start(n)];
        for i in 0..n {
            let ti = grid.t(i + 1);
            let ri = row_start(i);
            for j in 0..=i {
                let rj = row_start(j);
                let mut acc = covariance_unchecked(ti, grid.t(j + 1), h);
                for k in 0..j {
                    acc -= lower[ri + k] * lower[rj + k];
                }
                if i == j {
                    if !(acc > F::zero()) {
                        return Err(FbmError::NotPositiveDefinite {
                            pivot: i,
                            value: acc.to_f64_lossy(),
                        });
                    }
                    lower[ri + i] = acc.sqrt();
                } else {
                    lower[ri + j] = acc / lower[rj + j];
                }
            }
        }
        Ok(Self { grid, lower })
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    /// Path values `B(t_1..=t_n)` (without the leading zero).
    pub fn sample_values(&self, rng: &mut ChaCha8Rng, out: &mut [F]) {
        let n = self.grid.n_steps();
        assert_eq!(out.len(), n);
        let mut z = vec![F::zero(); n];
        fill_standard_normal(rng, &mut z);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.lower[row_start(i)..row_start(i) + i + 1];
            *o = row.iter().zip(&z).map(|(&l, &zi)| l * zi).sum();
        }
    }

    pub fn sample_increments(&self, rng: &mut ChaCha8Rng, out: &mut [F]) {
        self.sample_values(rng, out);
        for k in (1..out.len()).rev() {
            out[k] = out[k] - out[k - 1];
        }
    }
}
