//! Neighborhood kernel density estimation: a KDE over y built from the
//! training points whose (normalized) x lies within an epsilon-ball of
//! the query. The y-bandwidth comes from the Silverman rule with the
//! sample count replaced by the average neighborhood size.

use serde::{Deserialize, Serialize};

use crate::data::{normalize_fit, Dataset, NormalizationStats, SIGMA_FLOOR};
use crate::error::{CdeError, Result};
use crate::estimators::ckde::silverman_bandwidth_effective;
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborWeighting {
    #[default]
    Uniform,
    /// Weight proportional to `epsilon - distance`, favoring close
    /// neighbors; falls back to uniform when every neighbor sits exactly
    /// on the ball boundary.
    Distance,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NkdeConfig {
    /// Neighborhood radius in normalized x units.
    pub epsilon: f64,
    pub weighting: NeighborWeighting,
}

impl Default for NkdeConfig {
    fn default() -> Self {
        NkdeConfig {
            epsilon: 0.4,
            weighting: NeighborWeighting::Uniform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nkde {
    config: NkdeConfig,
    stats: NormalizationStats,
    x: Matrix,
    y: Matrix,
    h_y: Vec<f64>,
    n_eff: f64,
}

impl Nkde {
    pub fn fit(config: &NkdeConfig, data: &Dataset) -> Result<Nkde> {
        if !(config.epsilon > 0.0) {
            return Err(CdeError::InvalidConfig(format!(
                "neighborhood radius must be positive, got {}",
                config.epsilon
            )));
        }
        let (stats, normalized) = normalize_fit(data);
        let n = normalized.n();
        // Average neighborhood size, self excluded, floored at one.
        let mut total = 0usize;
        for i in 0..n {
            for j in 0..n {
                if euclidean(normalized.x().row(i), normalized.x().row(j)) <= config.epsilon {
                    total += 1;
                }
            }
        }
        let n_eff = (total as f64 / n as f64 - 1.0).max(1.0);
        let m = data.y_dim();
        let h_y: Vec<f64> = normalized
            .y()
            .col_stds()
            .iter()
            .map(|&s| silverman_bandwidth_effective(s.max(SIGMA_FLOOR), n_eff, m))
            .collect::<Result<_>>()?;
        Ok(Nkde {
            config: *config,
            stats,
            x: normalized.x().clone(),
            y: normalized.y().clone(),
            h_y,
            n_eff,
        })
    }

    pub fn config(&self) -> &NkdeConfig {
        &self.config
    }

    /// Average neighborhood size used in the bandwidth rule.
    pub fn effective_n(&self) -> f64 {
        self.n_eff
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.h_y
    }

    /// Indices of training points within epsilon of the normalized query,
    /// with their distances.
    fn neighbors(&self, xt: &[f64]) -> Vec<(usize, f64)> {
        (0..self.x.n_rows())
            .filter_map(|i| {
                let d = euclidean(xt, self.x.row(i));
                (d <= self.config.epsilon).then_some((i, d))
            })
            .collect()
    }

    fn weights(&self, neighbors: &[(usize, f64)]) -> Vec<f64> {
        let k = neighbors.len();
        match self.config.weighting {
            NeighborWeighting::Uniform => vec![1.0 / k as f64; k],
            NeighborWeighting::Distance => {
                let raw: Vec<f64> = neighbors
                    .iter()
                    .map(|&(_, d)| self.config.epsilon - d)
                    .collect();
                let sum: f64 = raw.iter().sum();
                if sum > 0.0 {
                    raw.iter().map(|w| w / sum).collect()
                } else {
                    vec![1.0 / k as f64; k]
                }
            }
        }
    }

    /// The conditional in normalized units: kernels at neighbor targets.
    fn normalized_mixture(&self, x: &[f64]) -> Result<GaussianMixture> {
        let xt = self.stats.normalize_x(x);
        let neighbors = self.neighbors(&xt);
        if neighbors.is_empty() {
            return Err(CdeError::NoNeighbors {
                query: format!("{x:?}"),
                radius: self.config.epsilon,
            });
        }
        let weights = self.weights(&neighbors);
        let m = self.y.n_cols();
        let mut means = Matrix::zeros(neighbors.len(), m);
        let mut scales = Matrix::zeros(neighbors.len(), m);
        for (k, &(i, _)) in neighbors.iter().enumerate() {
            means.row_mut(k).copy_from_slice(self.y.row(i));
            scales.row_mut(k).copy_from_slice(&self.h_y);
        }
        GaussianMixture::new(weights, means, scales)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

impl ConditionalDensity for Nkde {
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n {
            let x = rng.gen_range(-1.0..1.0);
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            xs.push(vec![x]);
            ys.push(vec![x + 0.5 * eps]);
        }
        Dataset::from_rows(&xs, &ys).unwrap()
    }

    #[test]
    fn huge_radius_gives_n_minus_one_and_unconditional_kde() {
        let data = toy_data(30, 1);
        let cfg = NkdeConfig {
            epsilon: 1e9,
            ..NkdeConfig::default()
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        assert_relative_eq!(model.effective_n(), 29.0, max_relative = 1e-12);

        // Every point is a neighbor with uniform weight, so the
        // conditional equals the plain KDE over (normalized) y.
        let (stats, normalized) = normalize_fit(&data);
        let h = model.bandwidths()[0];
        for &y in &[-1.0, 0.2, 1.5] {
            let yt = stats.normalize_y(&[y])[0];
            let kde: f64 = (0..30)
                .map(|i| crate::stats::normal_pdf(yt, normalized.y().get(i, 0), h))
                .sum::<f64>()
                / 30.0
                / stats.sigma_y[0];
            assert_relative_eq!(model.pdf(&[0.0], &[y]).unwrap(), kde, max_relative = 1e-10);
        }
    }

    #[test]
    fn tiny_radius_floors_the_effective_count() {
        let data = toy_data(20, 2);
        let cfg = NkdeConfig {
            epsilon: 1e-12,
            ..NkdeConfig::default()
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        assert_eq!(model.effective_n(), 1.0);
    }

    #[test]
    fn grid_neighborhoods_match_brute_force() {
        // Evenly spaced grid with radius 1.5 spacings: interior points
        // have two neighbors besides themselves.
        let n = 101;
        let xs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 * 0.1]).collect();
        let ys: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 7) as f64]).collect();
        let data = Dataset::from_rows(&xs, &ys).unwrap();
        let (_, normalized) = normalize_fit(&data);
        let spacing = normalized.x().get(1, 0) - normalized.x().get(0, 0);
        let cfg = NkdeConfig {
            epsilon: 1.5 * spacing,
            ..NkdeConfig::default()
        };
        let model = Nkde::fit(&cfg, &data).unwrap();

        let mut total = 0usize;
        for i in 0..n {
            for j in 0..n {
                let d = (normalized.x().get(i, 0) - normalized.x().get(j, 0)).abs();
                if d <= cfg.epsilon {
                    total += 1;
                }
            }
        }
        let expected = (total as f64 / n as f64 - 1.0).max(1.0);
        assert_relative_eq!(model.effective_n(), expected, max_relative = 1e-12);
        // Interior-dominated: the average sits just under two.
        assert!((model.effective_n() - 2.0).abs() < 0.05);
    }

    #[test]
    fn single_neighbor_density_is_one_kernel() {
        let data = Dataset::from_rows(
            &[vec![0.0], vec![10.0], vec![20.0]],
            &[vec![1.0], vec![5.0], vec![9.0]],
        )
        .unwrap();
        let cfg = NkdeConfig {
            epsilon: 0.3,
            ..NkdeConfig::default()
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        let (stats, _) = normalize_fit(&data);
        let h = model.bandwidths()[0];
        for &y in &[0.0, 1.0, 4.0] {
            let yt = stats.normalize_y(&[y])[0];
            let y0 = stats.normalize_y(&[1.0])[0];
            let expected = crate::stats::normal_pdf(yt, y0, h) / stats.sigma_y[0];
            assert_relative_eq!(model.pdf(&[0.0], &[y]).unwrap(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn empty_neighborhood_is_an_error() {
        let data = toy_data(10, 3);
        let cfg = NkdeConfig {
            epsilon: 0.01,
            ..NkdeConfig::default()
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        let err = model.log_pdf(&[500.0], &[0.0]).unwrap_err();
        match err {
            CdeError::NoNeighbors { radius, .. } => assert_eq!(radius, 0.01),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn conditional_integrates_to_one() {
        let data = toy_data(40, 4);
        let model = Nkde::fit(&NkdeConfig::default(), &data).unwrap();
        let mix = model.conditional_mixture(&[0.1]).unwrap().unwrap();
        let (lo, hi) = mix.envelope();
        let rule = crate::quadrature::shared_rule(2000).unwrap();
        let mass = rule.integrate(lo[0], hi[0], |y| model.pdf(&[0.1], &[y]).unwrap());
        assert_relative_eq!(mass, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn distance_weights_prefer_close_neighbors() {
        // Query nearer the first point: its kernel must carry more weight.
        let data = Dataset::from_rows(
            &[vec![-1.0], vec![1.0]],
            &[vec![-3.0], vec![3.0]],
        )
        .unwrap();
        let cfg = NkdeConfig {
            epsilon: 3.0,
            weighting: NeighborWeighting::Distance,
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        let mix = model.conditional_mixture(&[-0.5]).unwrap().unwrap();
        let w = mix.weights();
        assert!(w[0] > w[1], "weights {w:?}");
        assert_relative_eq!(w[0] + w[1], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn boundary_only_neighbors_fall_back_to_uniform() {
        // Both training points sit exactly epsilon away from the query,
        // so the distance weights vanish and uniform takes over.
        let data = Dataset::from_rows(
            &[vec![-1.0], vec![1.0]],
            &[vec![0.0], vec![1.0]],
        )
        .unwrap();
        let cfg = NkdeConfig {
            epsilon: 1.0,
            weighting: NeighborWeighting::Distance,
        };
        let model = Nkde::fit(&cfg, &data).unwrap();
        // sigma_x = 1 so normalization leaves x unchanged.
        let mix = model.conditional_mixture(&[0.0]).unwrap().unwrap();
        assert_eq!(mix.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn radius_growth_never_shrinks_neighborhoods() {
        let data = toy_data(25, 6);
        let mut last = 0.0;
        for &eps in &[0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
            let cfg = NkdeConfig {
                epsilon: eps,
                ..NkdeConfig::default()
            };
            let model = Nkde::fit(&cfg, &data).unwrap();
            assert!(model.effective_n() >= last);
            last = model.effective_n();
        }
    }
}
