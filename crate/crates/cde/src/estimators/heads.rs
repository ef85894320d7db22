//! Mixture output heads: the map from raw network activations (plus any
//! trainable parameters living outside the network) to a Gaussian
//! mixture, with analytic per-sample loss gradients.
//!
//! Both heads share the responsibility-weighted gradient structure. With
//! `r_k` the posterior responsibility of component `k` for the observed
//! `y`, the negative log-likelihood gradients are
//!
//! * logits:       `dL/da_k = w_k - r_k`
//! * means:        `dL/dmu_kj = -r_k (y_j - mu_kj) / sigma_kj^2`
//! * scales:       `dL/dsigma_kj = -r_k ((y_j - mu_kj)^2 / sigma_kj^3 - 1 / sigma_kj)`
//! * log-scales:   `dL/dlog sigma_s = -sum_k r_{k,s} sum_j (z_kj^2 - 1)`
//!
//! and scale pre-activations chain through `softplus' = sigmoid`.

use crate::error::Result;
use crate::gmm::GaussianMixture;
use crate::linalg::Matrix;
use crate::stats::{log_sum_exp, normal_log_pdf, sigmoid, softplus};

/// A parametric family of conditional mixtures driven by a raw activation
/// vector. `extra` holds trainable parameters outside the network; only
/// the kernel-mixture head uses it (log bandwidths).
pub(crate) trait MixtureHead {
    /// Number of raw activations consumed.
    fn n_raw(&self) -> usize;
    /// Number of extra trainable parameters.
    fn n_extra(&self) -> usize;
    fn y_dim(&self) -> usize;
    /// Mixture in the (normalized) training space.
    fn mixture(&self, raw: &[f64], extra: &[f64]) -> Result<GaussianMixture>;
    /// Negative log-likelihood of one target and its gradients. Both
    /// gradient buffers are overwritten, not accumulated.
    fn nll_grad(
        &self,
        raw: &[f64],
        extra: &[f64],
        y: &[f64],
        grad_raw: &mut [f64],
        grad_extra: &mut [f64],
        scratch: &mut HeadScratch,
    ) -> f64;
}

/// Reusable buffers for per-sample head evaluations.
#[derive(Default)]
pub(crate) struct HeadScratch {
    log_w: Vec<f64>,
    log_n: Vec<f64>,
    resp: Vec<f64>,
}

impl HeadScratch {
    fn resize(&mut self, k: usize) {
        self.log_w.resize(k, 0.0);
        self.log_n.resize(k, 0.0);
        self.resp.resize(k, 0.0);
    }
}

/// Unconstrained head: the network emits logits, means, and scale
/// pre-activations for `K` diagonal Gaussian components over `R^m`.
///
/// Raw layout (frozen, also the serialization contract):
/// `[ logits (K) | means (K*m, component-major) | scale pre-acts (K*m) ]`
/// with `sigma = softplus(pre-act)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MdnHead {
    pub n_components: usize,
    pub y_dim: usize,
}

impl MdnHead {
    fn mean_off(&self) -> usize {
        self.n_components
    }

    fn scale_off(&self) -> usize {
        self.n_components * (1 + self.y_dim)
    }
}

impl MixtureHead for MdnHead {
    fn n_raw(&self) -> usize {
        self.n_components * (1 + 2 * self.y_dim)
    }

    fn n_extra(&self) -> usize {
        0
    }

    fn y_dim(&self) -> usize {
        self.y_dim
    }

    fn mixture(&self, raw: &[f64], _extra: &[f64]) -> Result<GaussianMixture> {
        let (k, m) = (self.n_components, self.y_dim);
        debug_assert_eq!(raw.len(), self.n_raw());
        let mut weights = raw[..k].to_vec();
        crate::stats::softmax_in_place(&mut weights);
        let means = Matrix::from_vec(k, m, raw[self.mean_off()..self.scale_off()].to_vec())?;
        let mut scales = Matrix::zeros(k, m);
        for i in 0..k {
            for j in 0..m {
                scales.set(i, j, softplus(raw[self.scale_off() + i * m + j]));
            }
        }
        GaussianMixture::new(weights, means, scales)
    }

    fn nll_grad(
        &self,
        raw: &[f64],
        _extra: &[f64],
        y: &[f64],
        grad_raw: &mut [f64],
        _grad_extra: &mut [f64],
        scratch: &mut HeadScratch,
    ) -> f64 {
        let (k, m) = (self.n_components, self.y_dim);
        scratch.resize(k);
        let logits = &raw[..k];
        let lse_logits = log_sum_exp(logits);
        for (lw, &a) in scratch.log_w.iter_mut().zip(logits) {
            *lw = a - lse_logits;
        }
        for c in 0..k {
            let mut ln = 0.0;
            for j in 0..m {
                let mu = raw[self.mean_off() + c * m + j];
                let sg = softplus(raw[self.scale_off() + c * m + j]);
                ln += normal_log_pdf(y[j], mu, sg);
            }
            scratch.log_n[c] = ln;
        }
        let joint: Vec<f64> = (0..k).map(|c| scratch.log_w[c] + scratch.log_n[c]).collect();
        let log_p = log_sum_exp(&joint);
        for c in 0..k {
            scratch.resp[c] = (joint[c] - log_p).exp();
        }

        for c in 0..k {
            let r = scratch.resp[c];
            grad_raw[c] = scratch.log_w[c].exp() - r;
            for j in 0..m {
                let a_s = raw[self.scale_off() + c * m + j];
                let mu = raw[self.mean_off() + c * m + j];
                let sg = softplus(a_s);
                let d = y[j] - mu;
                grad_raw[self.mean_off() + c * m + j] = -r * d / (sg * sg);
                let dsigma = -r * (d * d / (sg * sg * sg) - 1.0 / sg);
                grad_raw[self.scale_off() + c * m + j] = dsigma * sigmoid(a_s);
            }
        }
        -log_p
    }
}

/// Kernel-mixture head: components sit at fixed centers; the network
/// controls only the `n_centers * n_scales` weight logits. Each scale
/// group `s` shares one isotropic bandwidth `sigma_s = exp(extra[s])`,
/// trainable through `extra`.
///
/// Component index is center-major: component `(k, s)` is logit
/// `k * n_scales + s`.
#[derive(Clone, Debug)]
pub(crate) struct KmnHead {
    pub centers: Matrix, // n_centers x m
    pub n_scales: usize,
}

impl KmnHead {
    fn n_centers(&self) -> usize {
        self.centers.n_rows()
    }
}

impl MixtureHead for KmnHead {
    fn n_raw(&self) -> usize {
        self.n_centers() * self.n_scales
    }

    fn n_extra(&self) -> usize {
        self.n_scales
    }

    fn y_dim(&self) -> usize {
        self.centers.n_cols()
    }

    fn mixture(&self, raw: &[f64], extra: &[f64]) -> Result<GaussianMixture> {
        let (kc, s_n, m) = (self.n_centers(), self.n_scales, self.y_dim());
        debug_assert_eq!(raw.len(), self.n_raw());
        debug_assert_eq!(extra.len(), s_n);
        let mut weights = raw.to_vec();
        crate::stats::softmax_in_place(&mut weights);
        let mut means = Matrix::zeros(kc * s_n, m);
        let mut scales = Matrix::zeros(kc * s_n, m);
        for k in 0..kc {
            for s in 0..s_n {
                let sg = extra[s].exp();
                for j in 0..m {
                    means.set(k * s_n + s, j, self.centers.get(k, j));
                    scales.set(k * s_n + s, j, sg);
                }
            }
        }
        GaussianMixture::new(weights, means, scales)
    }

    fn nll_grad(
        &self,
        raw: &[f64],
        extra: &[f64],
        y: &[f64],
        grad_raw: &mut [f64],
        grad_extra: &mut [f64],
        scratch: &mut HeadScratch,
    ) -> f64 {
        let (kc, s_n, m) = (self.n_centers(), self.n_scales, self.y_dim());
        let total = kc * s_n;
        scratch.resize(total);
        let lse_logits = log_sum_exp(raw);
        for (lw, &a) in scratch.log_w.iter_mut().zip(raw) {
            *lw = a - lse_logits;
        }
        let sigmas: Vec<f64> = extra.iter().map(|&l| l.exp()).collect();
        for k in 0..kc {
            let c = self.centers.row(k);
            for s in 0..s_n {
                let mut ln = 0.0;
                for j in 0..m {
                    ln += normal_log_pdf(y[j], c[j], sigmas[s]);
                }
                scratch.log_n[k * s_n + s] = ln;
            }
        }
        let joint: Vec<f64> = (0..total)
            .map(|i| scratch.log_w[i] + scratch.log_n[i])
            .collect();
        let log_p = log_sum_exp(&joint);
        for i in 0..total {
            scratch.resp[i] = (joint[i] - log_p).exp();
        }

        for i in 0..total {
            grad_raw[i] = scratch.log_w[i].exp() - scratch.resp[i];
        }
        for (s, ge) in grad_extra.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in 0..kc {
                let r = scratch.resp[k * s_n + s];
                if r == 0.0 {
                    continue;
                }
                let c = self.centers.row(k);
                let mut zsum = 0.0;
                for j in 0..m {
                    let z = (y[j] - c[j]) / sigmas[s];
                    zsum += z * z - 1.0;
                }
                acc += r * zsum;
            }
            *ge = -acc;
        }
        -log_p
    }
}

/// Central-difference gradient of a head's NLL in both `raw` and `extra`,
/// for validating the analytic forms.
#[cfg(test)]
pub(crate) fn finite_difference_grads<H: MixtureHead>(
    head: &H,
    raw: &[f64],
    extra: &[f64],
    y: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = 1e-6;
    let nll = |raw: &[f64], extra: &[f64]| -> f64 {
        let mix = head.mixture(raw, extra).unwrap();
        -mix.log_pdf(y).unwrap()
    };
    let mut raw_p = raw.to_vec();
    let g_raw = (0..raw.len())
        .map(|i| {
            raw_p[i] = raw[i] + h;
            let up = nll(&raw_p, extra);
            raw_p[i] = raw[i] - h;
            let dn = nll(&raw_p, extra);
            raw_p[i] = raw[i];
            (up - dn) / (2.0 * h)
        })
        .collect();
    let mut extra_p = extra.to_vec();
    let g_extra = (0..extra.len())
        .map(|i| {
            extra_p[i] = extra[i] + h;
            let up = nll(raw, &extra_p);
            extra_p[i] = extra[i] - h;
            let dn = nll(raw, &extra_p);
            extra_p[i] = extra[i];
            (up - dn) / (2.0 * h)
        })
        .collect();
    (g_raw, g_extra)
}
