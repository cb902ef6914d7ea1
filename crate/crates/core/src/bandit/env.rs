use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::instances::Instance;
use crate::rng;

/// Distribution of a realized payoff around its mean `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// The mean itself.
    None,
    /// `Bernoulli(p)`.
    Bernoulli,
    /// Uniform on `[p − h, p + h]`, with `h` shrunk to `min(h, p, 1 − p)` so
    /// the support stays inside `[0, 1]` and the mean stays at `p`.
    Uniform { half_width: f64 },
}

impl NoiseModel {
    pub fn sample(&self, mean: f64, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseModel::None => mean,
            NoiseModel::Bernoulli => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseModel::Uniform { half_width } => {
                let h = half_width.min(mean).min(1.0 - mean).max(0.0);
                (mean + h * (2.0 * rng.gen::<f64>() - 1.0)).clamp(0.0, 1.0)
            }
        }
    }
}

impl FromStr for NoiseModel {
    type Err = BanditError;

    /// `none`, `bernoulli`, `uniform` (half-width 0.25) or `uniform:<h>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "bernoulli" => Ok(Self::Bernoulli),
            "uniform" => Ok(Self::Uniform { half_width: 0.25 }),
            other => {
                let width = other
                    .strip_prefix("uniform:")
                    .and_then(|w| w.parse::<f64>().ok())
                    .filter(|w| (0.0..=0.5).contains(w))
                    .ok_or_else(|| {
                        BanditError::InvalidParameter(format!(
                            "unknown noise model {other:?} (expected none, bernoulli, uniform or uniform:<h> with h in [0, 0.5])"
                        ))
                    })?;
                Ok(Self::Uniform { half_width: width })
            }
        }
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseModel::None => f.write_str("none"),
            NoiseModel::Bernoulli => f.write_str("bernoulli"),
            NoiseModel::Uniform { half_width } => write!(f, "uniform:{half_width}"),
        }
    }
}

/// Semi-bandit environment: pulling arm `i` at delay `τ` returns an
/// independent draw with mean `p_i(τ)`.
#[derive(Debug, Clone)]
pub struct StochasticEnv {
    instance: Instance,
    noise: NoiseModel,
    rng: ChaCha8Rng,
}

impl StochasticEnv {
    pub fn new(instance: Instance, noise: NoiseModel, seed: u64) -> Self {
        Self {
            instance,
            noise,
            rng: rng::stream(seed, rng::ENV_STREAM),
        }
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn pull(&mut self, arm: usize, delay: usize) -> f64 {
        let mean = self.instance.payoff(arm, delay);
        self.noise.sample(mean, &mut self.rng)
    }
}
