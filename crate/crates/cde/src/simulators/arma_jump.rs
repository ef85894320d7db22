//! AR(1) process with downward jumps. The one-step conditional is an
//! exact two-component Gaussian mixture: a tight AR component around the
//! mean-reverting drift and a rare wide jump component centered below it,
//! giving negative skewness and excess kurtosis.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;
use crate::simulators::DensitySimulator;

const BURN_IN: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmaJumpConfig {
    /// Long-run mean.
    pub c: f64,
    /// Autoregressive factor, |alpha| < 1.
    pub alpha: f64,
    /// Jump probability per step.
    pub p: f64,
    /// Noise standard deviation; jumps use 3 sigma.
    pub sigma: f64,
}

impl Default for ArmaJumpConfig {
    fn default() -> Self {
        ArmaJumpConfig {
            c: 0.1,
            alpha: 0.2,
            p: 0.1,
            sigma: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmaJump {
    config: ArmaJumpConfig,
}

impl ArmaJump {
    pub fn new(config: &ArmaJumpConfig) -> Result<ArmaJump> {
        if !(0.0..=1.0).contains(&config.p)
            || !(config.sigma > 0.0)
            || !(config.alpha.abs() < 1.0)
        {
            return Err(CdeError::InvalidConfig(format!(
                "ARMA jump needs 0 <= p <= 1, sigma > 0, |alpha| < 1; got {config:?}"
            )));
        }
        Ok(ArmaJump { config: *config })
    }

    pub fn config(&self) -> &ArmaJumpConfig {
        &self.config
    }

    /// The exact one-step conditional given the previous value:
    /// `(1-p) N(c(1-alpha) + alpha x, sigma^2) + p N(alpha (x-c), (3 sigma)^2)`.
    pub fn conditional(&self, x_prev: f64) -> Result<GaussianMixture> {
        let cfg = &self.config;
        GaussianMixture::new(
            vec![1.0 - cfg.p, cfg.p],
            Matrix::from_rows(&[
                vec![cfg.c * (1.0 - cfg.alpha) + cfg.alpha * x_prev],
                vec![cfg.alpha * (x_prev - cfg.c)],
            ])?,
            Matrix::from_rows(&[vec![cfg.sigma], vec![3.0 * cfg.sigma]])?,
        )
    }

    /// One chain transition, consuming the generator exactly like
    /// [`GaussianMixture::sample`] on the conditional would.
    fn step(&self, z: f64, rng: &mut ChaCha8Rng) -> f64 {
        let cfg = &self.config;
        let u: f64 = rng.gen();
        let (mean, scale) = if u < 1.0 - cfg.p {
            (cfg.c * (1.0 - cfg.alpha) + cfg.alpha * z, cfg.sigma)
        } else {
            (cfg.alpha * (z - cfg.c), 3.0 * cfg.sigma)
        };
        let eps: f64 = rng.sample(StandardNormal);
        mean + scale * eps
    }
}

impl ConditionalDensity for ArmaJump {
    fn x_dim(&self) -> usize {
        1
    }

    fn y_dim(&self) -> usize {
        1
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.conditional(x[0])?.log_pdf(y)
    }

    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        Ok(Some(self.conditional(x[0])?))
    }
}

impl DensitySimulator for ArmaJump {
    /// One stationary chain started at the long-run mean with burn-in;
    /// consecutive pairs (z_t, z_{t+1}) become (x, y).
    fn sample_joint(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let mut z = self.config.c;
        for _ in 0..BURN_IN {
            z = self.step(z, rng);
        }
        let mut x = Matrix::zeros(n, 1);
        let mut y = Matrix::zeros(n, 1);
        for i in 0..n {
            let next = self.step(z, rng);
            x.set(i, 0, z);
            y.set(i, 0, next);
            z = next;
        }
        Dataset::new(x, y)
    }
}
