//! Scalar statistical primitives: stable log-sum-exp, Gaussian pdf/cdf,
//! softplus/sigmoid, and small moment helpers.

/// ln(sqrt(2*pi)), the normalization constant of the standard normal log-pdf.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Numerically stable log(sum(exp(v))). Returns -inf for an empty slice or
/// when every entry is -inf.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // All -inf (or empty): the sum is zero. +inf propagates as is.
        return max;
    }
    let sum: f64 = v.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// log N(y | mu, sigma^2) for scalar y.
#[inline]
pub fn normal_log_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let z = (y - mu) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

/// N(y | mu, sigma^2) for scalar y.
#[inline]
pub fn normal_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    normal_log_pdf(y, mu, sigma).exp()
}

/// Standard normal CDF via the complementary error function, accurate to
/// full double precision across the real line.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// softplus(a) = log(1 + exp(a)), evaluated without overflow.
#[inline]
pub fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

/// d/da softplus(a) = sigmoid(a), evaluated without overflow.
#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// In-place softmax over `v`, shifted by the maximum for stability.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Mean of a slice. Returns NaN for an empty slice.
pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation (divides by N, not N-1).
pub fn population_std(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    var.sqrt()
}

/// Empirical q-quantile of an ascending-sorted slice by linear
/// interpolation at rank `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let v = [0.1_f64, -0.3, 2.0];
        let direct: f64 = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(log_sum_exp(&v), direct, max_relative = 1e-15);
    }

    #[test]
    fn log_sum_exp_survives_large_magnitudes() {
        // Naive evaluation overflows; the shifted form must not.
        let v = [1000.0, 1000.0];
        assert_relative_eq!(log_sum_exp(&v), 1000.0 + 2.0f64.ln(), max_relative = 1e-15);
        let w = [-1000.0, -1000.0];
        assert_relative_eq!(log_sum_exp(&w), -1000.0 + 2.0f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn log_sum_exp_empty_is_neg_inf() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn standard_normal_log_pdf_at_zero() {
        assert_relative_eq!(
            normal_log_pdf(0.0, 0.0, 1.0),
            -0.918_938_533_204_672_7,
            max_relative = 1e-15
        );
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-15);
        // Phi(1.96) from standard tables.
        assert_relative_eq!(normal_cdf(1.96), 0.975_002_104_851_780_1, max_relative = 1e-13);
        assert_relative_eq!(normal_cdf(-1.96), 1.0 - 0.975_002_104_851_780_1, max_relative = 1e-12);
    }

    #[test]
    fn softplus_reference_values() {
        assert_relative_eq!(softplus(0.0), 2.0f64.ln(), max_relative = 1e-15);
        // softplus(5) = 5 + ln(1 + e^-5)
        assert_relative_eq!(softplus(5.0), 5.006_715_348_489_118, max_relative = 1e-15);
        // Far tails must not overflow and stay positive.
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-40.0) > 0.0);
    }

    #[test]
    fn sigmoid_is_softplus_derivative() {
        for &a in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (softplus(a + h) - softplus(a - h)) / (2.0 * h);
            assert_relative_eq!(sigmoid(a), fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn softmax_normalizes_and_orders() {
        let mut v = [1.0, 2.0, 3.0];
        softmax_in_place(&mut v);
        assert_relative_eq!(v.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
        assert!(v[0] < v[1] && v[1] < v[2]);
    }

    #[test]
    fn population_std_divides_by_n() {
        // Var([1,2,3]) with 1/N = 2/3.
        assert_relative_eq!(population_std(&[1.0, 2.0, 3.0]), (2.0f64 / 3.0).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn quantile_interpolates_between_ranks() {
        let v = [10.0, 20.0, 30.0, 40.0];
        assert_eq!(quantile_sorted(&v, 0.0), 10.0);
        assert_eq!(quantile_sorted(&v, 1.0), 40.0);
        assert_relative_eq!(quantile_sorted(&v, 0.5), 25.0);
        // rank h = 3 * 0.25 = 0.75 between 10 and 20.
        assert_relative_eq!(quantile_sorted(&v, 0.25), 17.5);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }
}
