//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};

/// Step size and moment decay rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        AdamConfig {
            alpha,
            ..AdamConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CdeError::InvalidConfig(format!(
                "Adam needs alpha > 0, betas in [0, 1), epsilon > 0; got {self:?}"
            )))
        }
    }
}

/// First/second moment estimates for a fixed-size parameter vector.
///
/// The state covers parameters that may live in several slices (network
/// weights plus auxiliary trainables); [`AdamState::step2`] updates two
/// such slices under a single shared timestep.
#[derive(Clone, Debug)]
pub struct AdamState {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(n_params: usize, cfg: AdamConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(AdamState {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// One update over a single parameter slice.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        self.step2(params, grads, &mut [], &[])
    }

    /// One update over two consecutive parameter slices sharing this state
    /// (slice 1 occupies state indices `0..p1.len()`, slice 2 the rest).
    /// Errors on any non-finite gradient entry, leaving parameters intact.
    pub fn step2(
        &mut self,
        p1: &mut [f64],
        g1: &[f64],
        p2: &mut [f64],
        g2: &[f64],
    ) -> Result<()> {
        if p1.len() != g1.len() || p2.len() != g2.len() || p1.len() + p2.len() != self.m.len() {
            return Err(CdeError::ShapeMismatch {
                context: "AdamState::step",
                expected: format!("{} parameters", self.m.len()),
                got: format!("{} + {}", p1.len(), p2.len()),
            });
        }
        if let Some(i) = g1
            .iter()
            .chain(g2.iter())
            .position(|g| !g.is_finite())
        {
            return Err(CdeError::TrainingDiverged {
                epoch: 0,
                batch: 0,
                detail: format!("non-finite gradient at parameter index {i}"),
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.cfg.beta1.powi(t);
        let c2 = 1.0 - self.cfg.beta2.powi(t);
        let mut offset = 0;
        for (params, grads) in [(p1, g1), (p2, g2)] {
            for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
                let k = offset + i;
                self.m[k] = self.cfg.beta1 * self.m[k] + (1.0 - self.cfg.beta1) * g;
                self.v[k] = self.cfg.beta2 * self.v[k] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= self.cfg.alpha * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
            offset += grads.len();
        }
        Ok(())
    }
}
