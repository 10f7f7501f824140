//! Ground-truth NSFT generator used for recovery experiments.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Lambdas, ModelConfig, NsftModel};
use crate::par::{self, Execution};
use crate::tensor::{Dims, Observation, SparseTensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub dims: Dims,
    pub rank: usize,
    pub arm_width: usize,
    pub seed: u64,
    /// Fraction of cells to observe, in `(0, 1]`.
    pub density: f64,
    /// Standard deviation of additive Gaussian noise; values are clamped at 0.
    pub noise_sigma: f64,
    pub low: f64,
    pub high: f64,
}

impl SyntheticSpec {
    pub fn new(dims: Dims, rank: usize, arm_width: usize, seed: u64) -> Self {
        Self {
            dims,
            rank,
            arm_width,
            seed,
            density: 0.3,
            noise_sigma: 0.0,
            low: 0.2,
            high: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidModel(format!(
                "density {} outside (0, 1]",
                self.density
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidModel("noise_sigma must be >= 0".into()));
        }
        if !(self.low > 0.0 && self.high >= self.low && self.high.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "parameter range [{}, {}] must have low > 0 and high >= low",
                self.low, self.high
            )));
        }
        Ok(())
    }

    /// Number of cells sampled before zero values are dropped.
    pub fn sample_count(&self) -> usize {
        (self.density * self.dims.volume() as f64).round() as usize
    }
}

/// Biased model with every parameter drawn uniformly from `[low, high]`.
pub fn generate_ground_truth(spec: &SyntheticSpec) -> Result<NsftModel> {
    spec.validate()?;
    let cfg = ModelConfig {
        rank: spec.rank,
        arm_width: spec.arm_width,
        lambdas: Lambdas::ZERO,
        use_bias: true,
        init_low: spec.low,
        init_high: spec.high,
    };
    NsftModel::init(spec.dims, &cfg, spec.seed)
}

/// Samples `round(density · volume)` distinct cells of `truth` and records
/// `max(0, ŷ + noise)` for each, dropping exact zeros.
pub fn sample_observations(truth: &NsftModel, spec: &SyntheticSpec) -> Result<SparseTensor> {
    spec.validate()?;
    let dims = truth.dims();
    let volume = dims.volume();
    if volume > usize::MAX as u128 {
        return Err(Error::InvalidDims("tensor too large to sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut picked: Vec<usize> =
        index::sample(&mut rng, volume as usize, spec.sample_count()).into_vec();
    picked.sort_unstable();

    let noise: Vec<f64> = if spec.noise_sigma > 0.0 {
        let normal =
            Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidModel(e.to_string()))?;
        picked.iter().map(|_| normal.sample(&mut rng)).collect()
    } else {
        vec![0.0; picked.len()]
    };
    let pairs: Vec<(usize, f64)> = picked.into_iter().zip(noise).collect();
    let entries: Vec<Observation> =
        par::map_each(&pairs, Execution::default(), |&(offset, eps)| {
            let idx = dims.unlinear(offset as u64);
            Observation::new(idx, (truth.predict_unchecked(idx) + eps).max(0.0))
        })
        .into_iter()
        .filter(|o| o.value > 0.0)
        .collect();
    SparseTensor::from_entries(dims, entries)
}
