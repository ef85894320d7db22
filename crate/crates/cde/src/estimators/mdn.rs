//! Mixture density network: an MLP predicts weights, means, and scales of
//! a conditional Gaussian mixture; trained by minibatch Adam on
//! noise-perturbed normalized data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_fit, Dataset, NormalizationStats};
use crate::error::{CdeError, Result};
use crate::estimators::heads::{MdnHead, MixtureHead};
use crate::estimators::train::{train_mixture, TrainSettings};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::nn::Mlp;

/// Spread of the initial component means over the normalized target range.
const MEAN_INIT_SPAN: f64 = 1.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdnConfig {
    pub n_components: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub noise_x: f64,
    pub noise_y: f64,
    pub weight_norm: bool,
    pub normalize: bool,
    pub seed: u64,
}

impl Default for MdnConfig {
    fn default() -> Self {
        MdnConfig {
            n_components: 20,
            hidden: vec![16, 16],
            epochs: 1000,
            learning_rate: 1e-3,
            batch_size: 200,
            noise_x: 0.2,
            noise_y: 0.1,
            weight_norm: true,
            normalize: true,
            seed: 0,
        }
    }
}

impl MdnConfig {
    fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(CdeError::InvalidConfig(
                "MDN needs at least one component".into(),
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(CdeError::InvalidConfig(
                "hidden layer sizes must be non-empty and positive".into(),
            ));
        }
        Ok(())
    }
}

/// A fitted mixture density network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mdn {
    config: MdnConfig,
    stats: NormalizationStats,
    net: Mlp,
    loss_history: Vec<f64>,
}

impl Mdn {
    pub fn fit(config: &MdnConfig, data: &Dataset) -> Result<Mdn> {
        config.validate()?;
        let (stats, train_data) = if config.normalize {
            normalize_fit(data)
        } else {
            (
                NormalizationStats::identity(data.x_dim(), data.y_dim()),
                data.clone(),
            )
        };
        let head = MdnHead {
            n_components: config.n_components,
            y_dim: data.y_dim(),
        };
        let mut sizes = vec![data.x_dim()];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(head.n_raw());

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut net = Mlp::new(&sizes, config.weight_norm, &mut rng)?;
        spread_mean_biases(&mut net, config.n_components, data.y_dim());

        let settings = TrainSettings {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            noise_x: config.noise_x,
            noise_y: config.noise_y,
            train_extra: false,
        };
        let loss_history = train_mixture(
            &mut net,
            &head,
            &mut [],
            train_data.x(),
            train_data.y(),
            &settings,
            &mut rng,
        )?;
        Ok(Mdn {
            config: config.clone(),
            stats,
            net,
            loss_history,
        })
    }

    pub fn config(&self) -> &MdnConfig {
        &self.config
    }

    pub fn normalization(&self) -> &NormalizationStats {
        &self.stats
    }

    /// Per-epoch mean per-sample negative log-likelihood.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    fn head(&self) -> MdnHead {
        MdnHead {
            n_components: self.config.n_components,
            y_dim: self.stats.y_dim(),
        }
    }

    /// Conditional mixture over the normalized target space.
    fn normalized_mixture(&self, x: &[f64]) -> Result<GaussianMixture> {
        let xt = self.stats.normalize_x(x);
        let raw = self.net.forward(&xt)?;
        self.head().mixture(&raw, &[])
    }
}

/// Initializes the mean-head output biases to `k` evenly spaced values in
/// `[-span, span]` (identical across target dimensions) so the initial
/// components cover the normalized data range instead of piling at zero.
fn spread_mean_biases(net: &mut Mlp, k: usize, m: usize) {
    let biases = net.output_bias_mut();
    for c in 0..k {
        let v = if k == 1 {
            0.0
        } else {
            -MEAN_INIT_SPAN + 2.0 * MEAN_INIT_SPAN * c as f64 / (k - 1) as f64
        };
        for j in 0..m {
            biases[k + c * m + j] = v;
        }
    }
}

impl ConditionalDensity for Mdn {
    fn x_dim(&self) -> usize {
        self.stats.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.stats.y_dim()
    }

    /// Density on the original scale via the normalized-space estimate:
    /// `log q(y_tilde | x_tilde) - sum_j log sigma_y_j`.
    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mix = self.normalized_mixture(x)?;
        let yt = self.stats.normalize_y(y);
        Ok(mix.log_pdf(&yt)? - self.stats.log_sigma_y_sum())
    }

    /// The same density as a mixture in original units, obtained by
    /// transforming the component parameters: means `mu_y + sigma_y .* mu`,
    /// scales `sigma_y .* sigma`, weights unchanged.
    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let mix = self.normalized_mixture(x)?;
        Ok(Some(mix.linear_transform(&self.stats.mu_y, &self.stats.sigma_y)?))
    }
}
