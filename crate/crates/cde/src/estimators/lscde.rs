//! Least-squares conditional density estimation: the conditional density
//! is a nonnegative linear combination of Gaussian basis kernels placed
//! at a random subsample of training pairs. Coefficients minimize the
//! integrated squared error, which has a closed-form ridge solution; the
//! Gaussian y-integrals in the quadratic term are analytic.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_fit, Dataset, NormalizationStats};
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::linalg::{cholesky_solve, Matrix};
use crate::stats::{log_sum_exp, LN_SQRT_2PI};

const LOG_NORMALIZER_FLOOR: f64 = -690.775527898; // ln(1e-300)

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LscdeConfig {
    /// Number of kernel centers; capped at the training-set size.
    pub n_centers: usize,
    /// Shared kernel bandwidth in normalized units.
    pub sigma: f64,
    /// Ridge damping for the coefficient solve.
    pub lambda: f64,
    /// Seed for the center subsample.
    pub seed: u64,
}

impl Default for LscdeConfig {
    fn default() -> Self {
        LscdeConfig {
            n_centers: 1000,
            sigma: 0.5,
            lambda: 0.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lscde {
    config: LscdeConfig,
    stats: NormalizationStats,
    /// x-parts of the kernel centers, in normalized units.
    u: Matrix,
    /// y-parts of the kernel centers, in normalized units.
    v: Matrix,
    alpha: Vec<f64>,
}

impl Lscde {
    pub fn fit(config: &LscdeConfig, data: &Dataset) -> Result<Lscde> {
        if config.n_centers == 0 || !(config.sigma > 0.0) || !(config.lambda > 0.0) {
            return Err(CdeError::InvalidConfig(format!(
                "LSCDE needs n_centers >= 1, sigma > 0, lambda > 0; got {config:?}"
            )));
        }
        let (stats, normalized) = normalize_fit(data);
        let n = normalized.n();
        let l_count = config.n_centers.min(n);
        let sigma = config.sigma;
        let m = data.y_dim();

        // Uniform subsample of training pairs without replacement.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, l_count).into_vec();
        idx.sort_unstable();
        let u = normalized.x().select_rows(&idx);
        let v = normalized.y().select_rows(&idx);

        // phi_x: N x L matrix of x-kernel values.
        let mut phi_x = Matrix::zeros(n, l_count);
        for i in 0..n {
            let row = phi_x.row_mut(i);
            for (l, val) in row.iter_mut().enumerate() {
                *val = gauss_kernel(normalized.x().row(i), u.row(l), sigma);
            }
        }

        // h_l = (1/N) sum_i phi_l(x_i, y_i).
        let mut h_hat = vec![0.0; l_count];
        for i in 0..n {
            let px = phi_x.row(i);
            for l in 0..l_count {
                h_hat[l] += px[l] * gauss_kernel(normalized.y().row(i), v.row(l), sigma);
            }
        }
        for h in &mut h_hat {
            *h /= n as f64;
        }

        let mut a = gram_matrix(&phi_x, &v, sigma, m);
        for l in 0..l_count {
            a.set(l, l, a.get(l, l) + config.lambda);
        }
        let mut alpha = cholesky_solve(&a, &h_hat).map_err(|e| match e {
            CdeError::IllConditioned { detail } => CdeError::IllConditioned {
                detail: format!(
                    "kernel system is singular ({detail}); increase lambda (current {})",
                    config.lambda
                ),
            },
            other => other,
        })?;
        for v in &mut alpha {
            *v = v.max(0.0);
        }

        Ok(Lscde {
            config: *config,
            stats,
            u,
            v,
            alpha,
        })
    }

    pub fn config(&self) -> &LscdeConfig {
        &self.config
    }

    pub fn n_centers(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Log mixture weights over centers at a normalized query:
    /// `ln alpha_l - |x - u_l|^2 / (2 sigma^2)`, skipping zero coefficients.
    fn log_center_terms(&self, xt: &[f64]) -> Vec<(usize, f64)> {
        let s2 = 2.0 * self.config.sigma * self.config.sigma;
        self.alpha
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a > 0.0)
            .map(|(l, &a)| (l, a.ln() - sq_dist(xt, self.u.row(l)) / s2))
            .collect()
    }

    /// Errors when the analytic normalizer underflows; otherwise returns
    /// the center terms and their log-sum.
    fn checked_terms(&self, x: &[f64], xt: &[f64]) -> Result<(Vec<(usize, f64)>, f64)> {
        let m = self.v.n_cols() as f64;
        let terms = self.log_center_terms(xt);
        let lse = if terms.is_empty() {
            f64::NEG_INFINITY
        } else {
            let vals: Vec<f64> = terms.iter().map(|&(_, t)| t).collect();
            log_sum_exp(&vals)
        };
        // normalizer = sum_l alpha_l phi_l^x(x) (sqrt(2 pi) sigma)^m.
        let log_normalizer = lse + m * (LN_SQRT_2PI + self.config.sigma.ln());
        if log_normalizer < LOG_NORMALIZER_FLOOR {
            return Err(CdeError::DegenerateDensity {
                query: format!("{x:?}"),
                detail: "all kernel weights underflow at this query".into(),
            });
        }
        Ok((terms, lse))
    }
}

/// Squared exponential kernel `exp(-|a - b|^2 / (2 sigma^2))`.
fn gauss_kernel(a: &[f64], b: &[f64], sigma: f64) -> f64 {
    (-sq_dist(a, b) / (2.0 * sigma * sigma)).exp()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum()
}

/// `H_{ll'} = (1/N) sum_i phi_l^x(x_i) phi_{l'}^x(x_i) *
/// (sqrt(pi) sigma)^m exp(-|v_l - v_{l'}|^2 / (4 sigma^2))`: the x-sums
/// come from the data, the y-factor is the analytic Gaussian product
/// integral.
fn gram_matrix(phi_x: &Matrix, v: &Matrix, sigma: f64, m: usize) -> Matrix {
    let n = phi_x.n_rows();
    let l_count = phi_x.n_cols();
    let mut b = Matrix::zeros(l_count, l_count);
    for i in 0..n {
        let row = phi_x.row(i);
        for l in 0..l_count {
            let a = row[l];
            if a == 0.0 {
                continue;
            }
            // Upper triangle only; mirrored below.
            let dst = b.row_mut(l);
            for l2 in l..l_count {
                dst[l2] += a * row[l2];
            }
        }
    }
    let y_scale = (std::f64::consts::PI.sqrt() * sigma).powi(m as i32);
    let four_s2 = 4.0 * sigma * sigma;
    for l in 0..l_count {
        for l2 in l..l_count {
            let g = y_scale * (-sq_dist(v.row(l), v.row(l2)) / four_s2).exp();
            let val = b.get(l, l2) / n as f64 * g;
            b.set(l, l2, val);
            b.set(l2, l, val);
        }
    }
    b
}

impl ConditionalDensity for Lscde {
    fn x_dim(&self) -> usize {
        self.stats.x_dim()
    }

    fn y_dim(&self) -> usize {
        self.stats.y_dim()
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let xt = self.stats.normalize_x(x);
        let yt = self.stats.normalize_y(y);
        let (terms, lse) = self.checked_terms(x, &xt)?;
        let sigma = self.config.sigma;
        let m = self.v.n_cols() as f64;
        let s2 = 2.0 * sigma * sigma;
        let log_kernels: Vec<f64> = terms
            .iter()
            .map(|&(l, t)| t - sq_dist(&yt, self.v.row(l)) / s2)
            .collect();
        let log_num = log_sum_exp(&log_kernels) - m * (LN_SQRT_2PI + sigma.ln());
        Ok(log_num - lse - self.stats.log_sigma_y_sum())
    }

    /// The conditional is an exact mixture over the active centers with
    /// x-kernel posterior weights.
    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let xt = self.stats.normalize_x(x);
        let (terms, lse) = self.checked_terms(x, &xt)?;
        let m = self.v.n_cols();
        let mut weights = Vec::with_capacity(terms.len());
        let mut means = Matrix::zeros(terms.len(), m);
        let mut scales = Matrix::zeros(terms.len(), m);
        for (k, &(l, t)) in terms.iter().enumerate() {
            weights.push((t - lse).exp());
            means.row_mut(k).copy_from_slice(self.v.row(l));
            for j in 0..m {
                scales.set(k, j, self.config.sigma);
            }
        }
        // Exponentiated log-space weights can miss exact unit sum by a few
        // ulps; rescale before the strict mixture validation.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mix = GaussianMixture::new(weights, means, scales)?;
        Ok(Some(mix.linear_transform(&self.stats.mu_y, &self.stats.sigma_y)?))
    }
}
