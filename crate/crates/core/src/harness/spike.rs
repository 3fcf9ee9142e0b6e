use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operators::{LinearMap, Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeTrainConfig {
    /// Signal length.
    pub n: usize,
    /// Number of observations.
    pub m: usize,
    pub spike_frac: f64,
    pub outlier_frac: f64,
    /// Absolute outlier size; `None` uses 10x the largest clean observation.
    pub outlier_magnitude: Option<f64>,
    pub seed: u64,
}

impl Default for SpikeTrainConfig {
    fn default() -> Self {
        SpikeTrainConfig {
            n: 512,
            m: 120,
            spike_frac: 0.04,
            outlier_frac: 0.10,
            outlier_magnitude: None,
            seed: 0,
        }
    }
}

impl SpikeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let frac = |f: f64| (0.0..1.0).contains(&f);
        if !frac(self.spike_frac) || !frac(self.outlier_frac) {
            return Err(Error::Argument("spike_frac and outlier_frac must lie in [0, 1)".into()));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::Argument(format!("need 0 < m < n, got m={} n={}", self.m, self.n)));
        }
        if let Some(mag) = self.outlier_magnitude {
            if !(mag >= 0.0 && mag.is_finite()) {
                return Err(Error::Argument(format!("outlier_magnitude {mag} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    pub fn spike_count(&self) -> usize {
        (self.spike_frac * self.n as f64).round() as usize
    }

    pub fn outlier_count(&self) -> usize {
        (self.outlier_frac * self.m as f64).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SpikeTrain {
    pub a: LinearMap,
    pub x_true: Vector,
    pub b_clean: Vector,
    /// Observations with outliers added.
    pub b: Vector,
    /// Sorted indices of corrupted observations.
    pub outlier_support: Vec<usize>,
}

impl SpikeTrain {
    /// `b - A x_true`.
    pub fn noise(&self) -> Vector {
        &self.b - &self.b_clean
    }
}

fn random_sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Gaussian `A` (m x n), a +-1 spike train, and sparse large outliers in `b`.
pub fn gen_spike_train(cfg: &SpikeTrainConfig) -> Result<SpikeTrain> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = Matrix::from_fn(cfg.m, cfg.n, |_, _| rng.sample(StandardNormal));

    let mut x_true = Vector::zeros(cfg.n);
    for i in sample(&mut rng, cfg.n, cfg.spike_count()) {
        x_true[i] = random_sign(&mut rng);
    }
    let b_clean = &a * &x_true;

    let magnitude = cfg.outlier_magnitude.unwrap_or_else(|| 10.0 * b_clean.amax());
    let mut outlier_support = sample(&mut rng, cfg.m, cfg.outlier_count()).into_vec();
    outlier_support.sort_unstable();
    let mut b = b_clean.clone();
    for &i in &outlier_support {
        b[i] += magnitude * random_sign(&mut rng);
    }
    Ok(SpikeTrain {
        a: LinearMap::dense(a),
        x_true,
        b_clean,
        b,
        outlier_support,
    })
}
