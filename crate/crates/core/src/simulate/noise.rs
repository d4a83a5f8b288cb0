use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Brownian increments on a uniform grid over `[0, T]`.
///
/// Increments come from ChaCha8 seeded with `seed`; a realization indexed by
/// `i` within an ensemble uses the seed `base ^ i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub increments: Vec<f64>,
    pub seed: u64,
}

impl NoisePath {
    /// `round(T / dt)` increments with the step adjusted to land on `T`.
    pub fn generate(seed: u64, horizon: f64, dt: f64) -> Result<Self> {
        let steps = step_count(horizon, dt)?;
        let dt = horizon / steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = dt.sqrt();
        let increments = (0..steps)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sd * z
            })
            .collect();
        Ok(NoisePath {
            dt,
            increments,
            seed,
        })
    }

    /// Ensemble member `index`, seeded with `base ^ index`.
    pub fn member(base: u64, index: u64, horizon: f64, dt: f64) -> Result<Self> {
        Self::generate(base ^ index, horizon, dt)
    }

    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    /// The same Brownian path sampled `factor` times more coarsely.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps().is_multiple_of(factor) {
            return Err(Error::InvalidArgument(format!(
                "cannot coarsen {} increments by {factor}",
                self.steps()
            )));
        }
        Ok(NoisePath {
            dt: self.dt * factor as f64,
            increments: self
                .increments
                .chunks(factor)
                .map(|c| c.iter().sum())
                .collect(),
            seed: self.seed,
        })
    }

    /// `W` at every grid time, starting from 0.
    pub fn brownian(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.steps() + 1);
        let mut acc = 0.0;
        w.push(acc);
        for dw in &self.increments {
            acc += dw;
            w.push(acc);
        }
        w
    }
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() || !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    Ok(((horizon / dt).round() as usize).max(1))
}
