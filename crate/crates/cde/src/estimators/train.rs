//! Shared minibatch training loop for the neural estimators: shuffled
//! minibatch Adam on noise-perturbed, already-normalized data.
//!
//! Randomness contract: one generator drives the whole run. Each epoch
//! consumes, in order, one shuffle of the index vector, then per sample
//! (in shuffled order) `l` noise draws for x followed by `m` draws for y.
//! Noise is drawn even when its std is zero, so runs with and without
//! noise regularization see identical streams everywhere else.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{CdeError, Result};
use crate::estimators::heads::{HeadScratch, MixtureHead};
use crate::estimators::noise::perturb_into;
use crate::linalg::Matrix;
use crate::nn::{AdamConfig, AdamState, BackwardScratch, ForwardState, Mlp};

pub(crate) struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub noise_x: f64,
    pub noise_y: f64,
    /// When false, `extra` parameters are held at their initial values.
    pub train_extra: bool,
}

impl TrainSettings {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(CdeError::InvalidConfig(
                "epochs and batch size must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CdeError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.noise_x < 0.0 || self.noise_y < 0.0 {
            return Err(CdeError::InvalidConfig(
                "noise stds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Minimizes the summed negative log-likelihood over `epochs` shuffled
/// passes; the final partial minibatch is used, not dropped. Returns the
/// per-epoch mean per-sample loss history.
pub(crate) fn train_mixture<H: MixtureHead>(
    net: &mut Mlp,
    head: &H,
    extra: &mut [f64],
    x: &Matrix,
    y: &Matrix,
    settings: &TrainSettings,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    settings.validate()?;
    let n = x.n_rows();
    debug_assert_eq!(y.n_rows(), n);
    debug_assert_eq!(net.out_dim(), head.n_raw());
    debug_assert_eq!(extra.len(), head.n_extra());

    let n_extra_opt = if settings.train_extra { extra.len() } else { 0 };
    let mut adam = AdamState::new(
        net.n_params() + n_extra_opt,
        AdamConfig::with_alpha(settings.learning_rate),
    )?;

    let mut indices: Vec<usize> = (0..n).collect();
    let mut state = ForwardState::new(net.layer_sizes());
    let mut bwd = BackwardScratch::default();
    let mut head_scratch = HeadScratch::default();
    let mut grad_net = vec![0.0; net.n_params()];
    let mut grad_extra = vec![0.0; extra.len()];
    let mut grad_raw = vec![0.0; head.n_raw()];
    let mut grad_extra_sample = vec![0.0; extra.len()];
    let mut xb = vec![0.0; x.n_cols()];
    let mut yb = vec![0.0; y.n_cols()];

    let mut history = Vec::with_capacity(settings.epochs);
    for epoch in 0..settings.epochs {
        indices.shuffle(rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in indices.chunks(settings.batch_size).enumerate() {
            let eff = net.effective();
            grad_net.iter_mut().for_each(|g| *g = 0.0);
            grad_extra.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in chunk {
                perturb_into(&mut xb, x.row(i), settings.noise_x, rng);
                perturb_into(&mut yb, y.row(i), settings.noise_y, rng);
                eff.forward_into(&xb, &mut state)?;
                batch_loss += head.nll_grad(
                    state.output(),
                    extra,
                    &yb,
                    &mut grad_raw,
                    &mut grad_extra_sample,
                    &mut head_scratch,
                );
                eff.backward_accumulate(&state, &grad_raw, &mut bwd, &mut grad_net);
                for (g, &gs) in grad_extra.iter_mut().zip(&grad_extra_sample) {
                    *g += gs;
                }
            }
            if !batch_loss.is_finite() {
                return Err(CdeError::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    detail: format!("non-finite minibatch loss {batch_loss}"),
                });
            }
            net.fold_effective_grad(&mut grad_net);
            let step = if settings.train_extra {
                adam.step2(net.params_mut(), &grad_net, extra, &grad_extra)
            } else {
                adam.step(net.params_mut(), &grad_net)
            };
            step.map_err(|e| match e {
                CdeError::TrainingDiverged { detail, .. } => CdeError::TrainingDiverged {
                    epoch,
                    batch: batch_idx,
                    detail,
                },
                other => other,
            })?;
            epoch_loss += batch_loss;
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::heads::MdnHead;
    use rand::{Rng, SeedableRng};

    fn toy_problem(n: usize, seed: u64) -> (Matrix, Matrix) {
        // y | x ~ N(sin(2x), 0.3^2), x uniform in [-2, 2].
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.gen_range(-2.0..2.0);
            let eps: f64 = rng.sample(rand_distr::StandardNormal);
            xs.push(vec![x]);
            ys.push(vec![(2.0 * x).sin() + 0.3 * eps]);
        }
        (
            Matrix::from_rows(&xs).unwrap(),
            Matrix::from_rows(&ys).unwrap(),
        )
    }

    fn run(seed: u64, noise: (f64, f64), epochs: usize) -> (Mlp, Vec<f64>) {
        let (x, y) = toy_problem(300, 11);
        let head = MdnHead {
            n_components: 4,
            y_dim: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::new(&[1, 16, 16, head.n_raw()], true, &mut rng).unwrap();
        let settings = TrainSettings {
            epochs,
            batch_size: 64,
            learning_rate: 1e-3,
            noise_x: noise.0,
            noise_y: noise.1,
            train_extra: false,
        };
        let hist = train_mixture(&mut net, &head, &mut [], &x, &y, &settings, &mut rng).unwrap();
        (net, hist)
    }

    #[test]
    fn loss_decreases_over_training() {
        let (_, hist) = run(3, (0.0, 0.0), 60);
        assert_eq!(hist.len(), 60);
        assert!(hist.last().unwrap() < hist.first().unwrap());
    }

    #[test]
    fn identical_seeds_give_identical_parameters() {
        let (a, _) = run(9, (0.2, 0.1), 5);
        let (b, _) = run(9, (0.2, 0.1), 5);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn nan_targets_surface_as_divergence() {
        let (x, mut y) = toy_problem(50, 2);
        y.row_mut(10)[0] = f64::NAN;
        let head = MdnHead {
            n_components: 2,
            y_dim: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut net = Mlp::new(&[1, 8, head.n_raw()], false, &mut rng).unwrap();
        let settings = TrainSettings {
            epochs: 1,
            batch_size: 50,
            learning_rate: 1e-3,
            noise_x: 0.0,
            noise_y: 0.0,
            train_extra: false,
        };
        let err = train_mixture(&mut net, &head, &mut [], &x, &y, &settings, &mut rng)
            .unwrap_err();
        match err {
            CdeError::TrainingDiverged { epoch, batch, .. } => {
                assert_eq!((epoch, batch), (0, 0));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn batch_loss_is_additive() {
        // One batch over all samples equals the sum of per-sample losses.
        let (x, y) = toy_problem(20, 4);
        let head = MdnHead {
            n_components: 3,
            y_dim: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::new(&[1, 8, head.n_raw()], false, &mut rng).unwrap();
        let mut scratch = HeadScratch::default();
        let mut graw = vec![0.0; head.n_raw()];
        let total: f64 = (0..20)
            .map(|i| {
                let raw = net.forward(x.row(i)).unwrap();
                head.nll_grad(&raw, &[], y.row(i), &mut graw, &mut [], &mut scratch)
            })
            .sum();
        let first_half: f64 = (0..10)
            .map(|i| {
                let raw = net.forward(x.row(i)).unwrap();
                head.nll_grad(&raw, &[], y.row(i), &mut graw, &mut [], &mut scratch)
            })
            .sum();
        let second_half: f64 = (10..20)
            .map(|i| {
                let raw = net.forward(x.row(i)).unwrap();
                head.nll_grad(&raw, &[], y.row(i), &mut graw, &mut [], &mut scratch)
            })
            .sum();
        approx::assert_relative_eq!(total, first_half + second_half, max_relative = 1e-12);
    }
}
