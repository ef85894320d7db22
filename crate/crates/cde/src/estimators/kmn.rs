//! Kernel mixture network: mixture components sit at K-means centers of
//! the (normalized) targets with a small set of shared scales; the
//! network learns only the component weights. Scales are trained as log
//! values alongside the network unless frozen.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_fit, Dataset, NormalizationStats};
use crate::error::{CdeError, Result};
use crate::estimators::heads::{KmnHead, MixtureHead};
use crate::estimators::train::{train_mixture, TrainSettings};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::kmeans::kmeans;
use crate::linalg::Matrix;
use crate::nn::Mlp;
use crate::seed::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmnConfig {
    /// Total mixture components; must be divisible by `scale_inits.len()`.
    /// The center count is `n_components / scale_inits.len()`.
    pub n_components: usize,
    /// Initial bandwidth of each scale group.
    pub scale_inits: Vec<f64>,
    pub trainable_scales: bool,
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

impl Default for KmnConfig {
    fn default() -> Self {
        KmnConfig {
            n_components: 50,
            scale_inits: vec![0.7, 0.3],
            trainable_scales: true,
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

impl KmnConfig {
    fn validate(&self) -> Result<usize> {
        if self.scale_inits.is_empty() || self.scale_inits.iter().any(|&s| !(s > 0.0)) {
            return Err(CdeError::InvalidConfig(
                "scale inits must be non-empty and positive".into(),
            ));
        }
        if self.n_components == 0 || self.n_components % self.scale_inits.len() != 0 {
            return Err(CdeError::InvalidConfig(format!(
                "total components ({}) must be a positive multiple of the scale count ({})",
                self.n_components,
                self.scale_inits.len()
            )));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(CdeError::InvalidConfig(
                "hidden layer sizes must be non-empty and positive".into(),
            ));
        }
        Ok(self.n_components / self.scale_inits.len())
    }
}

/// A fitted kernel mixture network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kmn {
    config: KmnConfig,
    stats: NormalizationStats,
    /// K-means centers over normalized targets, one row per center.
    centers: Matrix,
    /// Natural log of each scale group's bandwidth.
    log_scales: Vec<f64>,
    net: Mlp,
    loss_history: Vec<f64>,
}

impl Kmn {
    pub fn fit(config: &KmnConfig, data: &Dataset) -> Result<Kmn> {
        let n_centers = config.validate()?;
        let (stats, train_data) = if config.normalize {
            normalize_fit(data)
        } else {
            (
                NormalizationStats::identity(data.x_dim(), data.y_dim()),
                data.clone(),
            )
        };
        // The center pass gets its own derived seed so it does not
        // consume from the network-init/training stream.
        let centers = kmeans(
            train_data.y(),
            n_centers,
            derive_seed(config.seed, "kmn-centers"),
        )?;
        let head = KmnHead {
            centers,
            n_scales: config.scale_inits.len(),
        };
        let mut sizes = vec![data.x_dim()];
        sizes.extend_from_slice(&config.hidden);
        sizes.push(head.n_raw());

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut net = Mlp::new(&sizes, config.weight_norm, &mut rng)?;
        let mut log_scales: Vec<f64> = config.scale_inits.iter().map(|s| s.ln()).collect();

        let settings = TrainSettings {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate,
            noise_x: config.noise_x,
            noise_y: config.noise_y,
            train_extra: config.trainable_scales,
        };
        let loss_history = train_mixture(
            &mut net,
            &head,
            &mut log_scales,
            train_data.x(),
            train_data.y(),
            &settings,
            &mut rng,
        )?;
        Ok(Kmn {
            config: config.clone(),
            stats,
            centers: head.centers,
            log_scales,
            net,
            loss_history,
        })
    }

    pub fn config(&self) -> &KmnConfig {
        &self.config
    }

    pub fn normalization(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    /// Fitted bandwidth of each scale group.
    pub fn scales(&self) -> Vec<f64> {
        self.log_scales.iter().map(|l| l.exp()).collect()
    }

    fn head(&self) -> KmnHead {
        KmnHead {
            centers: self.centers.clone(),
            n_scales: self.log_scales.len(),
        }
    }

    fn normalized_mixture(&self, x: &[f64]) -> Result<GaussianMixture> {
        let xt = self.stats.normalize_x(x);
        let raw = self.net.forward(&xt)?;
        self.head().mixture(&raw, &self.log_scales)
    }
}

impl ConditionalDensity for Kmn {
    fn x_dim(&self) -> usize {
        self.stats.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.stats.y_dim()
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mix = self.normalized_mixture(x)?;
        let yt = self.stats.normalize_y(y);
        Ok(mix.log_pdf(&yt)? - self.stats.log_sigma_y_sum())
    }

    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let mix = self.normalized_mixture(x)?;
        Ok(Some(mix.linear_transform(&self.stats.mu_y, &self.stats.sigma_y)?))
    }
}
