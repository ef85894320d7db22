//! Conditional density estimators and the interface they share.
//!
//! Two families live here. The neural estimators ([`Mdn`], [`Kmn`])
//! train a small MLP by noise-regularized maximum likelihood and emit a
//! Gaussian mixture per query point. The kernel baselines ([`Ckde`],
//! [`Nkde`], [`Lscde`]) keep the training set and answer queries from
//! it directly. All of them, plus the ground-truth [`OracleDensity`],
//! implement [`ConditionalDensity`], which is what the evaluation and
//! CLI layers program against.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::gmm::{numeric_moments_1d, GaussianMixture};

pub mod ckde;
mod diagnostics;
mod heads;
pub mod kmn;
pub mod lscde;
pub mod mdn;
pub mod nkde;
mod noise;
pub mod oracle;
mod train;

pub use ckde::{
    silverman_bandwidth, silverman_bandwidth_effective, BandwidthSelection, Ckde, CkdeConfig,
};
pub use diagnostics::{gradient_check, CheckedEstimator, GradientCheck};
pub use kmn::{Kmn, KmnConfig};
pub use lscde::{Lscde, LscdeConfig};
pub use mdn::{Mdn, MdnConfig};
pub use nkde::{NeighborWeighting, Nkde, NkdeConfig};
pub use noise::{noise_reg_taylor_check, TaylorCheck};
pub use oracle::OracleDensity;

/// Quadrature resolution for the moment fallback on densities without a
/// mixture form.
const MOMENT_QUAD_POINTS: usize = 10_000;

/// Conditional mean and per-dimension standard deviation of y given x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMoments {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// A conditional density p(y | x) over fixed-dimensional x and y.
///
/// `log_pdf` is the primitive; everything else has a default in terms
/// of it or of `conditional_mixture`. Estimators whose conditional is an
/// explicit Gaussian mixture return it from `conditional_mixture` and
/// inherit exact envelopes and moments; densities without one (such as
/// the skew normal simulator) return `Ok(None)` and either override the
/// remaining methods or fall back to quadrature.
pub trait ConditionalDensity {
    fn x_dim(&self) -> usize;

    fn y_dim(&self) -> usize;

    /// Natural log of the conditional density at (x, y), in the
    /// caller's original units.
    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    fn pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(x, y)?.exp())
    }

    /// The conditional as an explicit Gaussian mixture in original
    /// units, when the model has that form.
    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>>;

    /// Per-dimension y-interval holding all but a negligible sliver of
    /// conditional mass; integration and plotting grids live inside it.
    fn y_envelope(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self.conditional_mixture(x)? {
            Some(mix) => Ok(mix.envelope()),
            None => Err(CdeError::UnsupportedDimension(
                "no mixture form; the density must provide its own y envelope".into(),
            )),
        }
    }

    /// Conditional mean and standard deviation: closed form for mixture
    /// densities, numeric integration over the envelope otherwise
    /// (1-D y only).
    fn conditional_moments(&self, x: &[f64]) -> Result<ConditionalMoments> {
        if let Some(mix) = self.conditional_mixture(x)? {
            let mean = mix.mean();
            let cov = mix.covariance();
            let std = (0..mean.len()).map(|j| cov.get(j, j).sqrt()).collect();
            return Ok(ConditionalMoments { mean, std });
        }
        if self.y_dim() != 1 {
            return Err(CdeError::UnsupportedDimension(format!(
                "numeric moments need 1-D y, got dimension {}",
                self.y_dim()
            )));
        }
        let (lo, hi) = self.y_envelope(x)?;
        // numeric_moments_1d expects an infallible integrand; stash the
        // first pdf error on the side and surface it afterwards.
        let failure: Cell<Option<CdeError>> = Cell::new(None);
        let report = numeric_moments_1d(
            |y| match self.pdf(x, &[y]) {
                Ok(v) => v,
                Err(e) => {
                    if failure.take().is_none() {
                        failure.set(Some(e));
                    }
                    0.0
                }
            },
            (lo[0], hi[0]),
            MOMENT_QUAD_POINTS,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        Ok(ConditionalMoments { mean: vec![report.mean], std: vec![report.variance.sqrt()] })
    }
}

/// Serializable estimator selector: the `name` tag plus that
/// estimator's configuration. Benchmark configs and the CLI speak this.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EstimatorSpec {
    Mdn(MdnConfig),
    Kmn(KmnConfig),
    Ckde(CkdeConfig),
    CkdeCv(CkdeConfig),
    Nkde(NkdeConfig),
    Lscde(LscdeConfig),
}

impl EstimatorSpec {
    /// Parses a bare estimator name into a spec with default settings.
    pub fn from_name(name: &str) -> Result<EstimatorSpec> {
        match name {
            "mdn" => Ok(EstimatorSpec::Mdn(MdnConfig::default())),
            "kmn" => Ok(EstimatorSpec::Kmn(KmnConfig::default())),
            "ckde" => Ok(EstimatorSpec::Ckde(CkdeConfig::default())),
            "ckde_cv" => Ok(EstimatorSpec::CkdeCv(CkdeConfig::default())),
            "nkde" => Ok(EstimatorSpec::Nkde(NkdeConfig::default())),
            "lscde" => Ok(EstimatorSpec::Lscde(LscdeConfig::default())),
            other => Err(CdeError::InvalidParameter(format!(
                "unknown estimator {other:?}; expected mdn, kmn, ckde, ckde_cv, nkde, or lscde"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EstimatorSpec::Mdn(_) => "mdn",
            EstimatorSpec::Kmn(_) => "kmn",
            EstimatorSpec::Ckde(_) => "ckde",
            EstimatorSpec::CkdeCv(_) => "ckde_cv",
            EstimatorSpec::Nkde(_) => "nkde",
            EstimatorSpec::Lscde(_) => "lscde",
        }
    }

    /// The same spec with its seed replaced, for estimators that have
    /// one; the deterministic kernel estimators pass through unchanged.
    pub fn with_seed(&self, seed: u64) -> EstimatorSpec {
        let mut spec = self.clone();
        match &mut spec {
            EstimatorSpec::Mdn(c) => c.seed = seed,
            EstimatorSpec::Kmn(c) => c.seed = seed,
            EstimatorSpec::Lscde(c) => c.seed = seed,
            EstimatorSpec::Ckde(_) | EstimatorSpec::CkdeCv(_) | EstimatorSpec::Nkde(_) => {}
        }
        spec
    }

    /// The same spec with the smoothing noise intensities replaced, for the
    /// estimators that perturb their training samples. `None` for the rest:
    /// a kernel baseline swept over noise levels would produce identical
    /// rows, so callers should reject it rather than waste the cells.
    pub fn with_noise(&self, eta_x: f64, eta_y: f64) -> Option<EstimatorSpec> {
        let mut spec = self.clone();
        match &mut spec {
            EstimatorSpec::Mdn(c) => {
                c.noise_x = eta_x;
                c.noise_y = eta_y;
            }
            EstimatorSpec::Kmn(c) => {
                c.noise_x = eta_x;
                c.noise_y = eta_y;
            }
            _ => return None,
        }
        Some(spec)
    }

    pub fn fit(&self, data: &Dataset) -> Result<FittedEstimator> {
        Ok(match self {
            EstimatorSpec::Mdn(c) => FittedEstimator::Mdn(Mdn::fit(c, data)?),
            EstimatorSpec::Kmn(c) => FittedEstimator::Kmn(Kmn::fit(c, data)?),
            EstimatorSpec::Ckde(c) => {
                FittedEstimator::Ckde(Ckde::fit(c, data, BandwidthSelection::RuleOfThumb)?)
            }
            EstimatorSpec::CkdeCv(c) => {
                FittedEstimator::Ckde(Ckde::fit(c, data, BandwidthSelection::LooCv)?)
            }
            EstimatorSpec::Nkde(c) => FittedEstimator::Nkde(Nkde::fit(c, data)?),
            EstimatorSpec::Lscde(c) => FittedEstimator::Lscde(Lscde::fit(c, data)?),
        })
    }
}

/// Any fitted model the pipeline can evaluate or serialize, including
/// the ground-truth oracle. This is the model-file format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedEstimator {
    Mdn(Mdn),
    Kmn(Kmn),
    Ckde(Ckde),
    Nkde(Nkde),
    Lscde(Lscde),
    Oracle(OracleDensity),
}

impl FittedEstimator {
    pub fn as_density(&self) -> &dyn ConditionalDensity {
        match self {
            FittedEstimator::Mdn(m) => m,
            FittedEstimator::Kmn(m) => m,
            FittedEstimator::Ckde(m) => m,
            FittedEstimator::Nkde(m) => m,
            FittedEstimator::Lscde(m) => m,
            FittedEstimator::Oracle(m) => m,
        }
    }

    /// The estimator name as it appears in benchmark rows; a
    /// cross-validated CKDE reports the selection mode it was fit with.
    pub fn label(&self) -> &'static str {
        match self {
            FittedEstimator::Mdn(_) => "mdn",
            FittedEstimator::Kmn(_) => "kmn",
            FittedEstimator::Ckde(m) => match m.selection() {
                BandwidthSelection::RuleOfThumb => "ckde",
                BandwidthSelection::LooCv => "ckde_cv",
            },
            FittedEstimator::Nkde(_) => "nkde",
            FittedEstimator::Lscde(_) => "lscde",
            FittedEstimator::Oracle(_) => "oracle",
        }
    }

    /// Per-epoch training losses for the gradient-trained estimators,
    /// `None` for the closed-form ones.
    pub fn loss_history(&self) -> Option<&[f64]> {
        match self {
            FittedEstimator::Mdn(m) => Some(m.loss_history()),
            FittedEstimator::Kmn(m) => Some(m.loss_history()),
            _ => None,
        }
    }
}

impl ConditionalDensity for FittedEstimator {
    fn x_dim(&self) -> usize {
        self.as_density().x_dim()
    }

    fn y_dim(&self) -> usize {
        self.as_density().y_dim()
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.as_density().log_pdf(x, y)
    }

    fn pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.as_density().pdf(x, y)
    }

    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        self.as_density().conditional_mixture(x)
    }

    fn y_envelope(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.as_density().y_envelope(x)
    }

    fn conditional_moments(&self, x: &[f64]) -> Result<ConditionalMoments> {
        self.as_density().conditional_moments(x)
    }
}
