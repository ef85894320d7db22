//! Conditional kernel density estimation: the ratio of a joint
//! product-Gaussian-kernel KDE to the marginal KDE over x. Bandwidths
//! come from the Silverman rule or from leave-one-out maximum-likelihood
//! selection via Nelder-Mead in log-bandwidth space.

use serde::{Deserialize, Serialize};

use crate::data::{normalize_fit, Dataset, NormalizationStats};
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::evaluation::nelder_mead::{nelder_mead, NmOptions};
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;
use crate::stats::{log_sum_exp, LN_SQRT_2PI};

/// Marginal x-density (in normalized units) below which conditioning is
/// refused: the query is effectively outside the training support.
const LOG_MARGINAL_FLOOR: f64 = -690.775527898; // ln(1e-300)

/// `h = 1.06 sigma n^(-1/(4+d))`: the normal-reference bandwidth for a
/// d-dimensional kernel density estimate.
pub fn silverman_bandwidth(std: f64, n: usize, d: usize) -> Result<f64> {
    silverman_bandwidth_effective(std, n as f64, d)
}

/// Silverman rule with a possibly fractional sample count, for estimators
/// that substitute an effective sample size (neighborhood KDE).
pub fn silverman_bandwidth_effective(std: f64, n: f64, d: usize) -> Result<f64> {
    if !(n >= 1.0) || !(std > 0.0) {
        return Err(CdeError::InvalidParameter(format!(
            "Silverman rule needs n >= 1 and positive std, got n = {n}, std = {std}"
        )));
    }
    Ok(1.06 * std * n.powf(-1.0 / (4.0 + d as f64)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthSelection {
    RuleOfThumb,
    LooCv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CkdeConfig {}

/// Fitted conditional KDE. Training data is stored in normalized units;
/// densities are mapped back through the normalization stats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ckde {
    stats: NormalizationStats,
    x: Matrix,
    y: Matrix,
    h_x: Vec<f64>,
    h_y: Vec<f64>,
    selection: BandwidthSelection,
}

impl Ckde {
    pub fn fit(_config: &CkdeConfig, data: &Dataset, selection: BandwidthSelection) -> Result<Ckde> {
        if data.n() < 2 {
            return Err(CdeError::InvalidConfig(
                "conditional KDE needs at least two samples".into(),
            ));
        }
        let (stats, normalized) = normalize_fit(data);
        let n = normalized.n();
        let d = data.x_dim() + data.y_dim();
        let h_x: Vec<f64> = normalized
            .x()
            .col_stds()
            .iter()
            .map(|&s| silverman_bandwidth(s.max(crate::data::SIGMA_FLOOR), n, d))
            .collect::<Result<_>>()?;
        let h_y: Vec<f64> = normalized
            .y()
            .col_stds()
            .iter()
            .map(|&s| silverman_bandwidth(s.max(crate::data::SIGMA_FLOOR), n, d))
            .collect::<Result<_>>()?;

        let mut model = Ckde {
            stats,
            x: normalized.x().clone(),
            y: normalized.y().clone(),
            h_x,
            h_y,
            selection,
        };
        if selection == BandwidthSelection::LooCv {
            model.select_bandwidths_loo()?;
        }
        Ok(model)
    }

    /// Direct construction from data treated as-is (identity
    /// normalization) with explicit bandwidths. Exposes the raw kernel
    /// arithmetic for oracle checks.
    pub fn with_bandwidths(data: &Dataset, h_x: Vec<f64>, h_y: Vec<f64>) -> Result<Ckde> {
        if h_x.len() != data.x_dim() || h_y.len() != data.y_dim() {
            return Err(CdeError::ShapeMismatch {
                context: "Ckde::with_bandwidths",
                expected: format!("{} x and {} y bandwidths", data.x_dim(), data.y_dim()),
                got: format!("{} and {}", h_x.len(), h_y.len()),
            });
        }
        if h_x.iter().chain(&h_y).any(|&h| !(h > 0.0)) {
            return Err(CdeError::InvalidParameter(
                "bandwidths must be positive".into(),
            ));
        }
        Ok(Ckde {
            stats: NormalizationStats::identity(data.x_dim(), data.y_dim()),
            x: data.x().clone(),
            y: data.y().clone(),
            h_x,
            h_y,
            selection: BandwidthSelection::RuleOfThumb,
        })
    }

    pub fn bandwidths(&self) -> (&[f64], &[f64]) {
        (&self.h_x, &self.h_y)
    }

    pub fn selection(&self) -> BandwidthSelection {
        self.selection
    }

    /// Leave-one-out conditional log-likelihood of the training data at
    /// the given bandwidths. Kernel constants over x cancel between the
    /// joint and marginal sums; the y-kernel constant survives.
    pub fn loo_log_likelihood(&self, h_x: &[f64], h_y: &[f64]) -> f64 {
        let n = self.x.n_rows();
        let m = self.y.n_cols();
        let y_const = -(m as f64) * LN_SQRT_2PI - h_y.iter().map(|h| h.ln()).sum::<f64>();
        let mut marginal = Vec::with_capacity(n - 1);
        let mut joint = Vec::with_capacity(n - 1);
        let mut total = 0.0;
        for i in 0..n {
            marginal.clear();
            joint.clear();
            let xi = self.x.row(i);
            let yi = self.y.row(i);
            for nn in 0..n {
                if nn == i {
                    continue;
                }
                let s = log_x_kernel(xi, self.x.row(nn), h_x);
                let q = log_y_kernel(yi, self.y.row(nn), h_y);
                marginal.push(s);
                joint.push(s + q);
            }
            total += log_sum_exp(&joint) - log_sum_exp(&marginal) + y_const;
        }
        total
    }

    fn select_bandwidths_loo(&mut self) -> Result<()> {
        let l = self.h_x.len();
        let start: Vec<f64> = self
            .h_x
            .iter()
            .chain(&self.h_y)
            .map(|h| h.ln())
            .collect();
        let objective = |theta: &[f64]| {
            let h_x: Vec<f64> = theta[..l].iter().map(|t| t.exp()).collect();
            let h_y: Vec<f64> = theta[l..].iter().map(|t| t.exp()).collect();
            -self.loo_log_likelihood(&h_x, &h_y)
        };
        let (best, _) = nelder_mead(objective, &start, &NmOptions::default())?;
        self.h_x = best[..l].iter().map(|t| t.exp()).collect();
        self.h_y = best[l..].iter().map(|t| t.exp()).collect();
        Ok(())
    }

    /// Log weights of the training kernels at a normalized query
    /// (unnormalized: x-kernel exponents only).
    fn log_x_weights(&self, xt: &[f64]) -> Vec<f64> {
        (0..self.x.n_rows())
            .map(|nn| log_x_kernel(xt, self.x.row(nn), &self.h_x))
            .collect()
    }

    fn check_support(&self, x: &[f64], lse_s: f64) -> Result<()> {
        // log marginal density = lse(s) - sum log h_x - (l/2) ln 2pi - ln N.
        let l = self.h_x.len();
        let log_marginal = lse_s
            - self.h_x.iter().map(|h| h.ln()).sum::<f64>()
            - l as f64 * LN_SQRT_2PI
            - (self.x.n_rows() as f64).ln();
        if log_marginal < LOG_MARGINAL_FLOOR {
            return Err(CdeError::Underflow {
                query: format!("{x:?}"),
            });
        }
        Ok(())
    }
}

fn log_x_kernel(a: &[f64], b: &[f64], h: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..a.len() {
        let z = (a[j] - b[j]) / h[j];
        s -= 0.5 * z * z;
    }
    s
}

fn log_y_kernel(a: &[f64], b: &[f64], h: &[f64]) -> f64 {
    log_x_kernel(a, b, h)
}

impl ConditionalDensity for Ckde {
    fn x_dim(&self) -> usize {
        self.stats.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.stats.y_dim()
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let xt = self.stats.normalize_x(x);
        let yt = self.stats.normalize_y(y);
        let s = self.log_x_weights(&xt);
        let lse_s = log_sum_exp(&s);
        self.check_support(x, lse_s)?;
        let joint: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(nn, &sv)| sv + log_y_kernel(&yt, self.y.row(nn), &self.h_y))
            .collect();
        let m = self.h_y.len() as f64;
        let y_const = -m * LN_SQRT_2PI - self.h_y.iter().map(|h| h.ln()).sum::<f64>();
        Ok(log_sum_exp(&joint) - lse_s + y_const - self.stats.log_sigma_y_sum())
    }

    /// The conditional is an exact N-component mixture: kernels at the
    /// training targets, weighted by the x-kernel posterior.
    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let xt = self.stats.normalize_x(x);
        let mut w = self.log_x_weights(&xt);
        let lse_s = log_sum_exp(&w);
        self.check_support(x, lse_s)?;
        for v in w.iter_mut() {
            *v = (*v - lse_s).exp();
        }
        let m = self.y.n_cols();
        let mut scales = Matrix::zeros(self.y.n_rows(), m);
        for k in 0..self.y.n_rows() {
            for j in 0..m {
                scales.set(k, j, self.h_y[j]);
            }
        }
        let mix = GaussianMixture::new(w, self.y.clone(), scales)?;
        Ok(Some(mix.linear_transform(&self.stats.mu_y, &self.stats.sigma_y)?))
    }
}
