//! Synthetic layered environment with Gaussian terminal rewards, for
//! calibration tests and theory-bound sanity checks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::arms::PullSample;
use crate::bandit::TreeEnv;
use crate::error::{Error, Result};

/// A tree environment whose terminal `choices` path pays
/// `N(mean[index], sigma^2)` with `index` the mixed-radix encoding of the
/// path (layer 0 least significant). Rewards are not clipped.
#[derive(Debug, Clone)]
pub struct SyntheticGaussianEnv {
    arity: usize,
    height: usize,
    means: Vec<f64>,
    sigma: f64,
}

impl SyntheticGaussianEnv {
    pub fn new(arity: usize, height: usize, means: Vec<f64>, sigma: f64) -> Result<Self> {
        let expected = (arity as u128).pow(height as u32);
        if means.len() as u128 != expected {
            return Err(Error::InvalidParams(format!(
                "{} terminal means supplied, {expected} required",
                means.len()
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParams("sigma must be non-negative".into()));
        }
        Ok(Self { arity, height, means, sigma })
    }

    pub fn mean_of(&self, choices: &[usize]) -> f64 {
        let idx = super::arm_index_of_choices(choices, self.arity) as usize;
        self.means[idx]
    }

    /// The best terminal index and its mean.
    pub fn best(&self) -> (usize, f64) {
        let mut best = 0;
        for (i, &m) in self.means.iter().enumerate() {
            if m > self.means[best] {
                best = i;
            }
        }
        (best, self.means[best])
    }
}

impl TreeEnv for SyntheticGaussianEnv {
    fn height(&self) -> usize {
        self.height
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn pull(&self, choices: &[usize], rng: &mut ChaCha8Rng) -> Result<PullSample> {
        if choices.len() != self.height {
            return Err(Error::InvalidParams("incomplete choice path".into()));
        }
        let mean = self.mean_of(choices);
        let noise: f64 = if self.sigma > 0.0 {
            rand_distr::Distribution::sample(
                &rand_distr::Normal::new(0.0, self.sigma).expect("valid sigma"),
                rng,
            )
        } else {
            0.0
        };
        let value = mean + noise;
        Ok(PullSample { reward: value, raw_mbps: value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn terminal_indexing_is_mixed_radix() {
        let env = SyntheticGaussianEnv::new(3, 2, (0..9).map(f64::from).collect(), 0.0).unwrap();
        assert_eq!(env.mean_of(&[2, 0]), 2.0);
        assert_eq!(env.mean_of(&[0, 2]), 6.0);
        assert_eq!(env.best(), (8, 8.0));
    }

    #[test]
    fn sigma_zero_is_deterministic() {
        let env = SyntheticGaussianEnv::new(2, 1, vec![0.25, 0.5], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = env.pull(&[1], &mut rng).unwrap();
        assert_eq!(s.reward, 0.5);
    }
}
