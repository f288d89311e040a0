use rayon::prelude::*;

use super::SchemeError;
use crate::fbm::{FbmError, FbmGenerator};
use crate::num::Real;
use crate::rng::driver_stream;

/// Block sums of `factor` consecutive fine increments.
pub fn coarsen_driver<F: Real>(fine: &[F], factor: usize) -> Result<Vec<F>, FbmError> {
    if factor == 0 || fine.len() % factor != 0 {
        return Err(FbmError::Indivisible { factor, n_steps: fine.len() });
    }
    Ok(fine
        .chunks_exact(factor)
        .map(|block| block.iter().fold(F::zero(), |acc, &x| acc + x))
        .collect())
}

/// fBm increments for every particle and coordinate of an ensemble,
/// stored as `[(particle * dim + coord) * n_steps + step]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Drivers<F> {
    n_particles: usize,
    dim: usize,
    n_steps: usize,
    dt: F,
    /// Original stream id of each particle's first coordinate block.
    particle_ids: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Drivers<F> {
    /// Samples particle `i`, coordinate `c` from stream
    /// `(seed, replication, i * dim + c)`.
    pub fn generate(
        generator: &FbmGenerator<F>,
        n_particles: usize,
        dim: usize,
        seed: u64,
        replication: u64,
    ) -> Self {
        let grid = *generator.grid();
        let n_steps = grid.n_steps();
        let mut data = vec![F::zero(); n_particles * dim * n_steps];
        data.par_chunks_mut(n_steps).enumerate().for_each(|(row, out)| {
            let (i, c) = (row / dim, row % dim);
            let mut rng = crate::rng::stream_rng(seed, replication, driver_stream(i, c, dim));
            generator.sample_increments(&mut rng, out);
        });
        Self {
            n_particles,
            dim,
            n_steps,
            dt: grid.dt(),
            particle_ids: (0..n_particles).collect(),
            data,
        }
    }

    /// Builds drivers from explicit increment rows (`n_particles * dim` rows
    /// of `n_steps`).
    pub fn from_rows(dt: F, dim: usize, rows: Vec<Vec<F>>) -> Result<Self, SchemeError> {
        if dim == 0 || rows.is_empty() || rows.len() % dim != 0 {
            return Err(SchemeError::DriverShape(format!("{} rows for dimension {dim}", rows.len())));
        }
        let n_steps = rows[0].len();
        if rows.iter().any(|r| r.len() != n_steps) {
            return Err(SchemeError::DriverShape("rows of unequal length".into()));
        }
        let n_particles = rows.len() / dim;
        Ok(Self {
            n_particles,
            dim,
            n_steps,
            dt,
            particle_ids: (0..n_particles).collect(),
            data: rows.concat(),
        })
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> F {
        self.dt
    }

    pub fn particle_ids(&self) -> &[usize] {
        &self.particle_ids
    }

    /// Increments of one coordinate of one particle.
    pub fn row(&self, particle: usize, coord: usize) -> &[F] {
        let start = (particle * self.dim + coord) * self.n_steps;
        &self.data[start..start + self.n_steps]
    }

    /// `dB_k` for every particle, written as an `N x d` block.
    pub fn step_into(&self, k: usize, out: &mut [F]) {
        debug_assert_eq!(out.len(), self.n_particles * self.dim);
        for (row, o) in out.iter_mut().enumerate() {
            *o = self.data[row * self.n_steps + k];
        }
    }

    /// Drivers on the grid `factor` times coarser (same noise realisation).
    pub fn coarsen(&self, factor: usize) -> Result<Self, FbmError> {
        let mut data = Vec::with_capacity(self.data.len() / factor.max(1));
        for row in self.data.chunks_exact(self.n_steps) {
            data.extend(coarsen_driver(row, factor)?);
        }
        Ok(Self {
            n_particles: self.n_particles,
            dim: self.dim,
            n_steps: self.n_steps / factor,
            dt: self.dt * F::from_count(factor),
            particle_ids: self.particle_ids.clone(),
            data,
        })
    }

    /// The first `n` particles.
    pub fn prefix(&self, n: usize) -> Result<Self, SchemeError> {
        if n == 0 || n > self.n_particles {
            return Err(SchemeError::DriverShape(format!(
                "prefix of {n} particles from {}",
                self.n_particles
            )));
        }
        Ok(Self {
            n_particles: n,
            dim: self.dim,
            n_steps: self.n_steps,
            dt: self.dt,
            particle_ids: self.particle_ids[..n].to_vec(),
            data: self.data[..n * self.dim * self.n_steps].to_vec(),
        })
    }

    /// Reorders particles: particle `j` of the result is particle `perm[j]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, SchemeError> {
        let mut seen = vec![false; self.n_particles];
        if perm.len() != self.n_particles || perm.iter().any(|&p| p >= self.n_particles || std::mem::replace(&mut seen[p], true)) {
            return Err(SchemeError::DriverShape("not a permutation".into()));
        }
        let block = self.dim * self.n_steps;
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(&self.data[p * block..(p + 1) * block]);
        }
        Ok(Self {
            n_particles: self.n_particles,
            dim: self.dim,
            n_steps: self.n_steps,
            dt: self.dt,
            particle_ids: perm.iter().map(|&p| self.particle_ids[p]).collect(),
            data,
        })
    }
}
