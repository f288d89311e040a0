use std::fmt;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{HurstParam, TimeGrid, EMBEDDING_EIGEN_TOL};
use crate::num::Real;
use crate::rng::fill_standard_normal;

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub(crate) fn fgn_autocov<F: Real>(k: usize, h: F) -> F {
    let two_h = h + h;
    let k = F::from_count(k);
    let one = F::one();
    F::lit(0.5) * ((k + one).powf(two_h) - F::lit(2.0) * k.powf(two_h) + (k - one).abs().powf(two_h))
}

/// Circulant embedding (Davies-Harte / Wood-Chan) sampler of fGn increments.
///
/// The `n x n` Toeplitz covariance of the increments is embedded in a
/// circulant of size `L = 2 g`, `g = max(1, next_pow2(n - 1))`.
pub struct CirculantSampler<F: Real> {
    grid: TimeGrid<F>,
    /// `sqrt(lambda_j / L) * dt^H`.
    weights: Vec<F>,
    fft: Arc<dyn Fft<F>>,
}

impl<F: Real> fmt::Debug for CirculantSampler<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantSampler")
            .field("grid", &self.grid)
            .field("embedding_len", &self.weights.len())
            .finish()
    }
}

impl<F: Real> CirculantSampler<F> {
    /// `None` if the embedding has an eigenvalue below the tolerance.
    pub fn new(grid: TimeGrid<F>, h: HurstParam<F>) -> Option<Self> {
        let n = grid.n_steps();
        let half = (n.saturating_sub(1)).next_power_of_two().max(1);
        let len = 2 * half;
        let hv = h.value();

        let mut row: Vec<Complex<F>> = (0..len)
            .map(|j| {
                let lag = if j <= half { j } else { len - j };
                Complex::new(fgn_autocov(lag, hv), F::zero())
            })
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(len);
        fft.process(&mut row);

        let tol = F::lit(EMBEDDING_EIGEN_TOL);
        if row.iter().any(|c| c.re < tol) {
            return None;
        }
        let scale = grid.dt().powf(hv);
        let inv_len = F::one() / F::from_count(len);
        let weights = row
            .iter()
            .map(|c| (c.re.max(F::zero()) * inv_len).sqrt() * scale)
            .collect();
        Some(Self { grid, weights, fft })
    }

    pub fn grid(&self) -> &TimeGrid<F> {
        &self.grid
    }

    pub fn embedding_len(&self) -> usize {
        self.weights.len()
    }

    pub fn sample_increments(&self, rng: &mut ChaCha8Rng, out: &mut [F]) {
        let n = self.grid.n_steps();
        assert_eq!(out.len(), n);
        let len = self.weights.len();
        let mut z = vec![F::zero(); 2 * len];
        fill_standard_normal(rng, &mut z);
        let mut buf: Vec<Complex<F>> = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, &w)| Complex::new(w * z[2 * j], w * z[2 * j + 1]))
            .collect();
        self.fft.process(&mut buf);
        for (o, c) in out.iter_mut().zip(&buf) {
            *o = c.re;
        }
    }
}
