//! Joint Gaussian mixture whose components factorize over x and y. The
//! conditional is again a mixture with the same y-components but
//! x-dependent weights (the posterior over components given x).
//!
//! The mixture's structure (weights, means, scales) is itself drawn from
//! a seeded generator at construction, so one config describes a fixed
//! random density that every benchmark cell can share.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;
use crate::seed::derive_seed;
use crate::simulators::DensitySimulator;
use crate::stats::{log_sum_exp, normal_log_pdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorizedGmmConfig {
    pub n_components: usize,
    pub x_dim: usize,
    pub y_dim: usize,
    /// Seed for the mixture structure (not for data sampling).
    pub seed: u64,
}

impl Default for FactorizedGmmConfig {
    fn default() -> Self {
        FactorizedGmmConfig {
            n_components: 5,
            x_dim: 1,
            y_dim: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedGmm {
    structure_seed: u64,
    weights: Vec<f64>,
    mu_x: Matrix,
    sigma_x: Matrix,
    mu_y: Matrix,
    sigma_y: Matrix,
}

impl FactorizedGmm {
    /// Draws the mixture structure from the config seed: Dirichlet-uniform
    /// weights, means uniform in [-3, 3], scales uniform in [0.5, 1.5].
    pub fn new(config: &FactorizedGmmConfig) -> Result<FactorizedGmm> {
        if config.n_components == 0 || config.x_dim == 0 || config.y_dim == 0 {
            return Err(CdeError::InvalidConfig(format!(
                "factorized mixture needs at least one component and dimension, got {config:?}"
            )));
        }
        let k = config.n_components;
        let (l, m) = (config.x_dim, config.y_dim);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "params"));
        let mut weights: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let mut mu_x = Matrix::zeros(k, l);
        let mut mu_y = Matrix::zeros(k, m);
        let mut sigma_x = Matrix::zeros(k, l);
        let mut sigma_y = Matrix::zeros(k, m);
        for i in 0..k {
            for v in mu_x.row_mut(i) {
                *v = rng.gen_range(-3.0..3.0);
            }
            for v in mu_y.row_mut(i) {
                *v = rng.gen_range(-3.0..3.0);
            }
            for v in sigma_x.row_mut(i) {
                *v = rng.gen_range(0.5..1.5);
            }
            for v in sigma_y.row_mut(i) {
                *v = rng.gen_range(0.5..1.5);
            }
        }
        FactorizedGmm::with_params(config.seed, weights, mu_x, sigma_x, mu_y, sigma_y)
    }

    /// Direct construction from explicit factorized components.
    pub fn with_params(
        structure_seed: u64,
        weights: Vec<f64>,
        mu_x: Matrix,
        sigma_x: Matrix,
        mu_y: Matrix,
        sigma_y: Matrix,
    ) -> Result<FactorizedGmm> {
        let k = weights.len();
        let shapes_ok = mu_x.n_rows() == k
            && sigma_x.n_rows() == k
            && mu_y.n_rows() == k
            && sigma_y.n_rows() == k
            && mu_x.n_cols() == sigma_x.n_cols()
            && mu_y.n_cols() == sigma_y.n_cols();
        if !shapes_ok {
            return Err(CdeError::ShapeMismatch {
                context: "FactorizedGmm::with_params",
                expected: format!("{k} aligned component rows"),
                got: format!(
                    "mu_x {}x{}, sigma_x {}x{}, mu_y {}x{}, sigma_y {}x{}",
                    mu_x.n_rows(),
                    mu_x.n_cols(),
                    sigma_x.n_rows(),
                    sigma_x.n_cols(),
                    mu_y.n_rows(),
                    mu_y.n_cols(),
                    sigma_y.n_rows(),
                    sigma_y.n_cols()
                ),
            });
        }
        // Reuse the mixture validation (weight simplex, positive scales)
        // on both factors.
        GaussianMixture::new(weights.clone(), mu_x.clone(), sigma_x.clone())?;
        GaussianMixture::new(weights.clone(), mu_y.clone(), sigma_y.clone())?;
        Ok(FactorizedGmm {
            structure_seed,
            weights,
            mu_x,
            sigma_x,
            mu_y,
            sigma_y,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Log of `w_k N(x | mu_xk, sigma_xk)` per component: the unnormalized
    /// posterior over components given x.
    fn log_component_weights(&self, x: &[f64]) -> Vec<f64> {
        (0..self.weights.len())
            .map(|k| {
                let mut lp = self.weights[k].ln();
                for (j, &xj) in x.iter().enumerate() {
                    lp += normal_log_pdf(xj, self.mu_x.get(k, j), self.sigma_x.get(k, j));
                }
                lp
            })
            .collect()
    }

    /// Joint log density, factorized per component.
    pub fn joint_log_pdf(&self, x: &[f64], y: &[f64]) -> f64 {
        let terms: Vec<f64> = self
            .log_component_weights(x)
            .into_iter()
            .enumerate()
            .map(|(k, mut lp)| {
                for (j, &yj) in y.iter().enumerate() {
                    lp += normal_log_pdf(yj, self.mu_y.get(k, j), self.sigma_y.get(k, j));
                }
                lp
            })
            .collect();
        log_sum_exp(&terms)
    }
}

impl ConditionalDensity for FactorizedGmm {
    fn x_dim(&self) -> usize {
        self.mu_x.n_cols()
    }

    fn y_dim(&self) -> usize {
        self.mu_y.n_cols()
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.conditional_mixture(x)?
            .expect("factorized conditional is a mixture")
            .log_pdf(y)
    }

    /// Posterior-weighted y-mixture: `W_k(x) = w_k N(x|...) / sum_j ...`.
    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let log_w = self.log_component_weights(x);
        let lse = log_sum_exp(&log_w);
        if !lse.is_finite() {
            return Err(CdeError::Underflow {
                query: format!("{x:?}"),
            });
        }
        let mut weights: Vec<f64> = log_w.iter().map(|&lw| (lw - lse).exp()).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Some(GaussianMixture::new(
            weights,
            self.mu_y.clone(),
            self.sigma_y.clone(),
        )?))
    }
}

impl DensitySimulator for FactorizedGmm {
    fn sample_joint(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let (l, m) = (self.x_dim(), self.y_dim());
        let mut x = Matrix::zeros(n, l);
        let mut y = Matrix::zeros(n, m);
        for i in 0..n {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut k = self.weights.len() - 1;
            for (idx, &w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = idx;
                    break;
                }
            }
            for j in 0..l {
                let z: f64 = rng.sample(StandardNormal);
                x.set(i, j, self.mu_x.get(k, j) + self.sigma_x.get(k, j) * z);
            }
            for j in 0..m {
                let z: f64 = rng.sample(StandardNormal);
                y.set(i, j, self.mu_y.get(k, j) + self.sigma_y.get(k, j) * z);
            }
        }
        Dataset::new(x, y)
    }

    fn structure_seed(&self) -> u64 {
        self.structure_seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn two_component(mu_x: [f64; 2]) -> FactorizedGmm {
        FactorizedGmm::with_params(
            0,
            vec![0.3, 0.7],
            Matrix::from_rows(&[vec![mu_x[0]], vec![mu_x[1]]]).unwrap(),
            Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            Matrix::from_rows(&[vec![-2.0], vec![2.0]]).unwrap(),
            Matrix::from_rows(&[vec![0.5], vec![1.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identical_x_components_keep_prior_weights() {
        let sim = two_component([1.0, 1.0]);
        for &x in &[-2.0, 0.0, 3.0] {
            let mix = sim.conditional_mixture(&[x]).unwrap().unwrap();
            assert_relative_eq!(mix.weights()[0], 0.3, max_relative = 1e-12);
            assert_relative_eq!(mix.weights()[1], 0.7, max_relative = 1e-12);
        }
    }

    #[test]
    fn well_separated_components_saturate_the_posterior() {
        let sim = two_component([-100.0, 100.0]);
        let mix = sim.conditional_mixture(&[-100.0]).unwrap().unwrap();
        assert_abs_diff_eq!(mix.weights()[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn posterior_matches_joint_quadrature() {
        // Bayes oracle: integrate the per-component joint slice over y and
        // normalize; must reproduce the closed-form posterior weights.
        let sim = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        let rule = crate::quadrature::shared_rule(2000).unwrap();
        let x = [0.4];
        let mix = sim.conditional_mixture(&x).unwrap().unwrap();
        let k = sim.weights().len();
        let mut masses = Vec::with_capacity(k);
        for kk in 0..k {
            let mass = rule.integrate(-40.0, 40.0, |y| {
                let lp = sim.weights[kk].ln()
                    + normal_log_pdf(x[0], sim.mu_x.get(kk, 0), sim.sigma_x.get(kk, 0))
                    + normal_log_pdf(y, sim.mu_y.get(kk, 0), sim.sigma_y.get(kk, 0));
                lp.exp()
            });
            masses.push(mass);
        }
        let total: f64 = masses.iter().sum();
        for kk in 0..k {
            assert_abs_diff_eq!(mix.weights()[kk], masses[kk] / total, epsilon = 1e-8);
        }
    }

    #[test]
    fn conditional_agrees_with_joint_over_marginal() {
        let sim = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        let rule = crate::quadrature::shared_rule(2000).unwrap();
        for &(x, y) in &[(0.0, 1.0), (-1.5, -2.0), (2.0, 0.3)] {
            let marginal = rule.integrate(-40.0, 40.0, |yy| sim.joint_log_pdf(&[x], &[yy]).exp());
            let expected = sim.joint_log_pdf(&[x], &[y]).exp() / marginal;
            assert_relative_eq!(sim.pdf(&[x], &[y]).unwrap(), expected, max_relative = 1e-8);
        }
    }

    #[test]
    fn structure_is_seed_deterministic() {
        let a = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        let b = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = FactorizedGmm::new(&FactorizedGmmConfig {
            seed: 1,
            ..FactorizedGmmConfig::default()
        })
        .unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn sample_moments_match_structure() {
        let sim = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = sim.sample_joint(n, &mut rng).unwrap();
        let x_mix = GaussianMixture::new(
            sim.weights.clone(),
            sim.mu_x.clone(),
            sim.sigma_x.clone(),
        )
        .unwrap();
        let expected = x_mix.mean()[0];
        let sd = x_mix.covariance().get(0, 0).sqrt();
        let got = data.x().col_means()[0];
        assert_abs_diff_eq!(got, expected, epsilon = 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn far_query_underflows() {
        let sim = FactorizedGmm::new(&FactorizedGmmConfig::default()).unwrap();
        // Log-space weights keep moderately far queries exact: the
        // nearest component simply dominates.
        let mix = sim.conditional_mixture(&[1e6]).unwrap().unwrap();
        let total: f64 = mix.weights().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // Once the squared standardized distance itself overflows, the
        // posterior is genuinely undefined and must say so.
        let err = sim.conditional_mixture(&[1e200]).unwrap_err();
        assert!(matches!(err, CdeError::Underflow { .. }));
    }

    #[test]
    fn multidimensional_shapes_sample_cleanly() {
        let cfg = FactorizedGmmConfig {
            x_dim: 2,
            y_dim: 2,
            ..FactorizedGmmConfig::default()
        };
        let sim = FactorizedGmm::new(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = sim.sample_joint(100, &mut rng).unwrap();
        assert_eq!((data.x_dim(), data.y_dim()), (2, 2));
        let mix = sim.conditional_mixture(&[0.0, 0.0]).unwrap().unwrap();
        assert_eq!(mix.dim(), 2);
        // x percentiles are 1-D only.
        assert!(sim.x_percentile(0.5).is_err());
    }
}
