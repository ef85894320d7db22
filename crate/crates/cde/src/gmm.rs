//! Gaussian mixtures with diagonal covariance: evaluation, sampling,
//! affine transformation, and moment extraction (closed-form, quadrature,
//! and Monte Carlo).

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};
use crate::linalg::Matrix;
use crate::quadrature;
use crate::stats::{log_sum_exp, normal_log_pdf};

/// Weight sums may deviate from one by at most this much.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Mass coverage below which numeric moments are flagged as truncated.
pub const TRUNCATION_MASS: f64 = 0.99;

/// How many standard deviations around component means count as the
/// effective support of a mixture.
pub const ENVELOPE_SIGMAS: f64 = 10.0;

/// A K-component Gaussian mixture over R^m with diagonal covariances.
///
/// Invariants enforced at construction: weights are non-negative and sum
/// to one within [`WEIGHT_SUM_TOL`]; every scale is strictly positive and
/// finite; means and scales agree on K and m.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Matrix,  // K x m
    scales: Matrix, // K x m, standard deviations
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Matrix, scales: Matrix) -> Result<Self> {
        let k = weights.len();
        if means.n_rows() != k || scales.n_rows() != k || means.n_cols() != scales.n_cols() {
            return Err(CdeError::ShapeMismatch {
                context: "GaussianMixture::new",
                expected: format!("{k} mean and scale rows of equal dimension"),
                got: format!(
                    "means {}x{}, scales {}x{}",
                    means.n_rows(),
                    means.n_cols(),
                    scales.n_rows(),
                    scales.n_cols()
                ),
            });
        }
        if k == 0 || means.n_cols() == 0 {
            return Err(CdeError::InvalidParameter(
                "mixture needs at least one component and one dimension".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(CdeError::InvalidParameter(
                "mixture weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(CdeError::InvalidParameter(format!(
                "mixture weights must sum to 1 within {WEIGHT_SUM_TOL:e}, got {sum}"
            )));
        }
        if scales.data().iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(CdeError::InvalidParameter(
                "mixture scales must be finite and strictly positive".into(),
            ));
        }
        if means.data().iter().any(|m| !m.is_finite()) {
            return Err(CdeError::InvalidParameter(
                "mixture means must be finite".into(),
            ));
        }
        Ok(GaussianMixture {
            weights,
            means,
            scales,
        })
    }

    /// Single standard normal component in m dimensions.
    pub fn standard(m: usize) -> Self {
        GaussianMixture::new(vec![1.0], Matrix::zeros(1, m), {
            let mut s = Matrix::zeros(1, m);
            for j in 0..m {
                s.set(0, j, 1.0);
            }
            s
        })
        .expect("valid by construction")
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.n_cols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Matrix {
        &self.means
    }

    pub fn scales(&self) -> &Matrix {
        &self.scales
    }

    /// log p(y), evaluated with log-sum-exp over components.
    pub fn log_pdf(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return Err(CdeError::ShapeMismatch {
                context: "GaussianMixture::log_pdf",
                expected: format!("point of dimension {}", self.dim()),
                got: format!("{}", y.len()),
            });
        }
        let mut terms = Vec::with_capacity(self.n_components());
        self.component_log_terms(y, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    pub fn pdf(&self, y: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(y)?.exp())
    }

    /// log p at many scalar points, reusing one scratch buffer (m = 1).
    pub fn log_pdf_grid_1d(&self, ys: &[f64], out: &mut Vec<f64>) -> Result<()> {
        if self.dim() != 1 {
            return Err(CdeError::UnsupportedDimension(format!(
                "grid evaluation needs a univariate mixture, got m = {}",
                self.dim()
            )));
        }
        out.clear();
        out.reserve(ys.len());
        let mut terms = Vec::with_capacity(self.n_components());
        for &y in ys {
            self.component_log_terms(&[y], &mut terms);
            out.push(log_sum_exp(&terms));
        }
        Ok(())
    }

    fn component_log_terms(&self, y: &[f64], terms: &mut Vec<f64>) {
        terms.clear();
        for k in 0..self.n_components() {
            let w = self.weights[k];
            if w == 0.0 {
                continue;
            }
            let mu = self.means.row(k);
            let sg = self.scales.row(k);
            let mut lp = w.ln();
            for j in 0..y.len() {
                lp += normal_log_pdf(y[j], mu[j], sg[j]);
            }
            terms.push(lp);
        }
    }

    /// Draws one sample: a component by cumulative weight inversion, then
    /// independent normals per dimension.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut k = self.n_components() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let mu = self.means.row(k);
        let sg = self.scales.row(k);
        (0..self.dim())
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                mu[j] + sg[j] * z
            })
            .collect()
    }

    pub fn sample_n<R: Rng>(&self, rng: &mut R, n: usize) -> Matrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| self.sample(rng)).collect();
        Matrix::from_rows(&rows).expect("equal-length samples")
    }

    /// The mixture of `z = shift + diag(scale) * y`: weights unchanged,
    /// means `shift + scale .* mu_k`, scales `scale .* sigma_k`. Errors on
    /// non-positive scale entries.
    pub fn linear_transform(&self, shift: &[f64], scale: &[f64]) -> Result<GaussianMixture> {
        let m = self.dim();
        if shift.len() != m || scale.len() != m {
            return Err(CdeError::ShapeMismatch {
                context: "GaussianMixture::linear_transform",
                expected: format!("shift and scale of dimension {m}"),
                got: format!("{} and {}", shift.len(), scale.len()),
            });
        }
        if scale.iter().any(|&b| !(b > 0.0) || !b.is_finite()) {
            return Err(CdeError::InvalidTransform(format!(
                "scale entries must be finite and positive, got {scale:?}"
            )));
        }
        let mut means = self.means.clone();
        let mut scales = self.scales.clone();
        for k in 0..self.n_components() {
            for j in 0..m {
                means.set(k, j, shift[j] + scale[j] * self.means.get(k, j));
                scales.set(k, j, scale[j] * self.scales.get(k, j));
            }
        }
        GaussianMixture::new(self.weights.clone(), means, scales)
    }

    /// Closed-form mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim()];
        for k in 0..self.n_components() {
            for (j, &m) in self.means.row(k).iter().enumerate() {
                mu[j] += self.weights[k] * m;
            }
        }
        mu
    }

    /// Closed-form covariance:
    /// `sum_k w_k [ (mu_k - mu)(mu_k - mu)^T + diag(sigma_k^2) ]`.
    pub fn covariance(&self) -> Matrix {
        let m = self.dim();
        let mu = self.mean();
        let mut cov = Matrix::zeros(m, m);
        for k in 0..self.n_components() {
            let w = self.weights[k];
            let mk = self.means.row(k);
            let sk = self.scales.row(k);
            for a in 0..m {
                let da = mk[a] - mu[a];
                for b in 0..m {
                    let db = mk[b] - mu[b];
                    let mut v = cov.get(a, b) + w * da * db;
                    if a == b {
                        v += w * sk[a] * sk[a];
                    }
                    cov.set(a, b, v);
                }
            }
        }
        cov
    }

    /// Closed-form standardized skewness, univariate mixtures only. Uses
    /// the central-moment decomposition over components
    /// `E[(Y-mu)^3] = sum_k w_k [ d_k^3 + 3 d_k sigma_k^2 ]`, d_k = mu_k - mu.
    pub fn skewness_1d(&self) -> Result<f64> {
        self.require_univariate("skewness_1d")?;
        let mu = self.mean()[0];
        let var = self.covariance().get(0, 0);
        let mut m3 = 0.0;
        for k in 0..self.n_components() {
            let d = self.means.get(k, 0) - mu;
            let s2 = self.scales.get(k, 0).powi(2);
            m3 += self.weights[k] * (d.powi(3) + 3.0 * d * s2);
        }
        Ok(m3 / var.powf(1.5))
    }

    /// Closed-form excess kurtosis, univariate mixtures only:
    /// `E[(Y-mu)^4] = sum_k w_k [ d_k^4 + 6 d_k^2 sigma_k^2 + 3 sigma_k^4 ]`.
    pub fn excess_kurtosis_1d(&self) -> Result<f64> {
        self.require_univariate("excess_kurtosis_1d")?;
        let mu = self.mean()[0];
        let var = self.covariance().get(0, 0);
        let mut m4 = 0.0;
        for k in 0..self.n_components() {
            let d = self.means.get(k, 0) - mu;
            let s2 = self.scales.get(k, 0).powi(2);
            m4 += self.weights[k] * (d.powi(4) + 6.0 * d * d * s2 + 3.0 * s2 * s2);
        }
        Ok(m4 / (var * var) - 3.0)
    }

    /// Per-dimension effective support `[min(mu - 10 sigma), max(mu + 10 sigma)]`.
    pub fn envelope(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.dim();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for k in 0..self.n_components() {
            let mu = self.means.row(k);
            let sg = self.scales.row(k);
            for j in 0..m {
                lo[j] = lo[j].min(mu[j] - ENVELOPE_SIGMAS * sg[j]);
                hi[j] = hi[j].max(mu[j] + ENVELOPE_SIGMAS * sg[j]);
            }
        }
        (lo, hi)
    }

    fn require_univariate(&self, what: &str) -> Result<()> {
        if self.dim() != 1 {
            return Err(CdeError::UnsupportedDimension(format!(
                "{what} needs m = 1, got m = {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Moments of a univariate density extracted by quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// Integral of the density over the given support.
    pub mass: f64,
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Set when `mass` < [`TRUNCATION_MASS`]: the support misses
    /// non-negligible probability and the moments are unreliable.
    pub truncated_support: bool,
}

/// Integrates moments of `pdf` over `support` with an `n_points`
/// Gauss-Legendre rule. Moments are normalized by the captured mass; a
/// mass below [`TRUNCATION_MASS`] sets the truncated-support warning.
pub fn numeric_moments_1d(
    pdf: impl Fn(f64) -> f64,
    support: (f64, f64),
    n_points: usize,
) -> Result<MomentReport> {
    let (lo, hi) = support;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CdeError::InvalidParameter(format!(
            "support must be a finite interval, got [{lo}, {hi}]"
        )));
    }
    let rule = quadrature::shared_rule(n_points)?;
    let points: Vec<(f64, f64)> = rule.mapped(lo, hi).collect();
    let fs: Vec<f64> = points.iter().map(|&(y, _)| pdf(y)).collect();

    let mut mass = 0.0;
    let mut first = 0.0;
    for (&(y, w), &f) in points.iter().zip(&fs) {
        mass += w * f;
        first += w * y * f;
    }
    let mean = first / mass;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for (&(y, w), &f) in points.iter().zip(&fs) {
        let d = y - mean;
        m2 += w * d * d * f;
        m3 += w * d * d * d * f;
        m4 += w * d * d * d * d * f;
    }
    m2 /= mass;
    m3 /= mass;
    m4 /= mass;
    Ok(MomentReport {
        mass,
        mean,
        variance: m2,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        truncated_support: mass < TRUNCATION_MASS,
    })
}

/// Sample moments with asymptotic standard errors.
#[derive(Clone, Debug)]
pub struct McMoments {
    pub n: usize,
    pub mean: Vec<f64>,
    /// Population covariance of the draws.
    pub cov: Matrix,
    /// Standard error of each mean estimate.
    pub se_mean: Vec<f64>,
    /// Standard error of each variance estimate,
    /// `sqrt((m4 - var^2) / n)` per dimension.
    pub se_var: Vec<f64>,
}

/// Estimates mean and covariance from `n` draws of `sample`. Determinism
/// is inherited from the sampler (seed its generator).
pub fn numeric_moments_mc(
    mut sample: impl FnMut() -> Vec<f64>,
    n: usize,
) -> Result<McMoments> {
    if n < 2 {
        return Err(CdeError::InvalidParameter(
            "Monte Carlo moments need at least two draws".into(),
        ));
    }
    let first = sample();
    let m = first.len();
    let mut draws = Matrix::zeros(n, m);
    draws.row_mut(0).copy_from_slice(&first);
    for i in 1..n {
        let s = sample();
        draws.row_mut(i).copy_from_slice(&s);
    }
    let mean = draws.col_means();
    let mut cov = Matrix::zeros(m, m);
    let mut m4 = vec![0.0; m];
    for i in 0..n {
        let r = draws.row(i);
        for a in 0..m {
            let da = r[a] - mean[a];
            m4[a] += da.powi(4);
            for b in a..m {
                let v = cov.get(a, b) + da * (r[b] - mean[b]);
                cov.set(a, b, v);
            }
        }
    }
    let nf = n as f64;
    for a in 0..m {
        m4[a] /= nf;
        for b in a..m {
            let v = cov.get(a, b) / nf;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    let se_mean: Vec<f64> = (0..m).map(|j| (cov.get(j, j) / nf).sqrt()).collect();
    let se_var: Vec<f64> = (0..m)
        .map(|j| {
            let var = cov.get(j, j);
            ((m4[j] - var * var).max(0.0) / nf).sqrt()
        })
        .collect();
    Ok(McMoments {
        n,
        mean,
        cov,
        se_mean,
        se_var,
    })
}
