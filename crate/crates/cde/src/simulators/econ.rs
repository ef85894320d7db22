//! Heteroscedastic toy economics density: x is a folded standard normal
//! and y = x^2 + (1 + x) eps, so the conditional is Gaussian with a
//! variance that grows with x.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::estimators::ConditionalDensity;
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;
use crate::simulators::DensitySimulator;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EconDensity;

impl EconDensity {
    fn check_x(x: &[f64]) -> Result<f64> {
        let x = x[0];
        if x < 0.0 {
            return Err(CdeError::Domain(format!(
                "conditioning value must be nonnegative (x is |eps| by construction), got {x}"
            )));
        }
        Ok(x)
    }
}

impl ConditionalDensity for EconDensity {
    fn x_dim(&self) -> usize {
        1
    }

    fn y_dim(&self) -> usize {
        1
    }

    fn log_pdf(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let x = Self::check_x(x)?;
        Ok(crate::stats::normal_log_pdf(y[0], x * x, 1.0 + x))
    }

    fn conditional_mixture(&self, x: &[f64]) -> Result<Option<GaussianMixture>> {
        let x = Self::check_x(x)?;
        let mix = GaussianMixture::new(
            vec![1.0],
            Matrix::from_rows(&[vec![x * x]])?,
            Matrix::from_rows(&[vec![1.0 + x]])?,
        )?;
        Ok(Some(mix))
    }
}

impl DensitySimulator for EconDensity {
    fn sample_joint(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
        let mut x = Matrix::zeros(n, 1);
        let mut y = Matrix::zeros(n, 1);
        for i in 0..n {
            let eps_x: f64 = rng.sample(StandardNormal);
            let eps_y: f64 = rng.sample(StandardNormal);
            let xi = eps_x.abs();
            x.set(i, 0, xi);
            y.set(i, 0, xi * xi + (1.0 + xi) * eps_y);
        }
        Dataset::new(x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::SeedableRng;

    #[test]
    fn pdf_reference_values() {
        let sim = EconDensity;
        // x=0: standard normal at 0.
        assert_abs_diff_eq!(sim.pdf(&[0.0], &[0.0]).unwrap(), 0.398942, epsilon = 1e-6);
        // x=1: N(1, 2^2) at its mean.
        assert_abs_diff_eq!(sim.pdf(&[1.0], &[1.0]).unwrap(), 0.199471, epsilon = 1e-6);
    }

    #[test]
    fn negative_x_is_a_domain_error() {
        let err = EconDensity.log_pdf(&[-0.1], &[0.0]).unwrap_err();
        assert!(matches!(err, CdeError::Domain(_)));
    }

    #[test]
    fn conditional_mass_is_one() {
        let sim = EconDensity;
        let rule = crate::quadrature::shared_rule(2000).unwrap();
        for &x in &[0.0, 0.5, 2.0] {
            let (lo, hi) = sim.y_envelope(&[x]).unwrap();
            let mass = rule.integrate(lo[0], hi[0], |y| sim.pdf(&[x], &[y]).unwrap());
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn samples_respect_the_generative_form() {
        let sim = EconDensity;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let data = sim.sample_joint(n, &mut rng).unwrap();
        let mut resid_sum = 0.0;
        for i in 0..n {
            let x = data.x().get(i, 0);
            assert!(x >= 0.0);
            resid_sum += data.y().get(i, 0) - x * x;
        }
        // E[1+x] = 1 + sqrt(2/pi); residual mean within four such sds.
        let bound = 4.0 * (1.0 + (2.0 / std::f64::consts::PI).sqrt()) / (n as f64).sqrt();
        assert!(resid_sum.abs() / n as f64 <= bound);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let sim = EconDensity;
        let a = sim
            .sample_joint(50, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        let b = sim
            .sample_joint(50, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn median_of_x_is_the_half_normal_median() {
        // |N(0,1)| median is the 75% normal quantile, about 0.67449.
        let got = EconDensity.x_percentile(0.5).unwrap();
        assert_relative_eq!(got, 0.6745, epsilon = 0.01);
    }
}
