//! Fully connected network with tanh hidden layers and an identity output
//! layer, optionally in weight-normalized parameterization.
//!
//! # Parameter vector
//!
//! Parameters live in one flat `Vec<f64>`, layer-major. For a layer with
//! `n_in` inputs and `n_out` outputs the layout is
//!
//! ```text
//! [ V (n_out * n_in, row-major) | g (n_out, weight-norm only) | b (n_out) ]
//! ```
//!
//! With weight normalization the effective weight row is
//! `W_i = g_i * V_i / ||V_i||_2`; without it `W_i = V_i` and no `g` block
//! exists. Gains are initialized to the initial row norms, so both
//! parameterizations start from the same function.
//!
//! # Initialization
//!
//! `V` entries are Xavier-uniform in `+-sqrt(6 / (n_in + n_out))`, biases
//! zero. Draws come row-major, layer by layer, from the caller's seeded
//! generator, which fully determines the network.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CdeError, Result};

/// Multilayer perceptron; see the module docs for the parameter layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weight_norm: bool,
    params: Vec<f64>,
}

/// Offsets of one layer's blocks inside the flat parameter vector.
#[derive(Clone, Copy, Debug)]
struct LayerSpan {
    v: usize,
    g: usize, // == b when weight_norm is off (empty block)
    b: usize,
    end: usize,
    n_in: usize,
    n_out: usize,
}

impl Mlp {
    /// Builds a network with the given sizes `[in, hidden.., out]` and
    /// Xavier-uniform initialization drawn from `rng`.
    pub fn new<R: Rng>(layer_sizes: &[usize], weight_norm: bool, rng: &mut R) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&s| s == 0) {
            return Err(CdeError::InvalidConfig(format!(
                "layer sizes must list input and output with no zero widths, got {layer_sizes:?}"
            )));
        }
        let mut net = Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weight_norm,
            params: Vec::new(),
        };
        net.params = vec![0.0; net.spans().last().expect(">= 1 layer").end];
        for span in net.spans() {
            let scale = (6.0 / (span.n_in + span.n_out) as f64).sqrt();
            for i in 0..span.n_out {
                let row = span.v + i * span.n_in;
                let mut norm_sq = 0.0;
                for j in 0..span.n_in {
                    let v = (2.0 * rng.gen::<f64>() - 1.0) * scale;
                    net.params[row + j] = v;
                    norm_sq += v * v;
                }
                if weight_norm {
                    net.params[span.g + i] = norm_sq.sqrt();
                }
                // Biases stay zero.
            }
        }
        Ok(net)
    }

    fn spans(&self) -> Vec<LayerSpan> {
        let mut spans = Vec::with_capacity(self.layer_sizes.len() - 1);
        let mut off = 0;
        for w in self.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let v = off;
            let g = v + n_out * n_in;
            let b = if self.weight_norm { g + n_out } else { g };
            let end = b + n_out;
            spans.push(LayerSpan {
                v,
                g,
                b,
                end,
                n_in,
                n_out,
            });
            off = end;
        }
        spans
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn weight_norm(&self) -> bool {
        self.weight_norm
    }

    pub fn in_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.layer_sizes.last().expect(">= 2 sizes")
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Mutable view of the output layer's bias block (used by mixture heads
    /// to seed component locations).
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let span = *self.spans().last().expect(">= 1 layer");
        &mut self.params[span.b..span.end]
    }

    /// Materializes effective weights for fast repeated forward/backward
    /// passes. Must be rebuilt after any parameter update.
    pub fn effective(&self) -> EffectiveWeights {
        let mut layers = Vec::with_capacity(self.layer_sizes.len() - 1);
        for span in self.spans() {
            let mut w = Vec::with_capacity(span.n_out * span.n_in);
            if self.weight_norm {
                for i in 0..span.n_out {
                    let row = &self.params[span.v + i * span.n_in..span.v + (i + 1) * span.n_in];
                    let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let gain = self.params[span.g + i];
                    for &v in row {
                        w.push(gain * v / norm);
                    }
                }
            } else {
                w.extend_from_slice(&self.params[span.v..span.g]);
            }
            layers.push(EffLayer {
                w,
                b: self.params[span.b..span.end].to_vec(),
                v_off: span.v,
                b_off: span.b,
                n_in: span.n_in,
                n_out: span.n_out,
            });
        }
        EffectiveWeights { layers }
    }

    /// Single-input forward pass; convenient for inference paths.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let eff = self.effective();
        let mut state = ForwardState::new(&self.layer_sizes);
        eff.forward_into(x, &mut state)?;
        Ok(state.output().to_vec())
    }

    /// Converts a gradient accumulated against *effective* weights (the
    /// `V` slots holding dL/dW) into the gradient with respect to the
    /// actual parameters, in place. A no-op for the plain parameterization.
    pub fn fold_effective_grad(&self, grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.params.len());
        if !self.weight_norm {
            return;
        }
        for span in self.spans() {
            for i in 0..span.n_out {
                let row = span.v + i * span.n_in;
                let v_row = &self.params[row..row + span.n_in];
                let norm = v_row.iter().map(|v| v * v).sum::<f64>().sqrt();
                let gain = self.params[span.g + i];
                // dg = dW . u;  dV = (g / ||V||) (dW - dg u)
                let mut dg = 0.0;
                for j in 0..span.n_in {
                    dg += grads[row + j] * v_row[j] / norm;
                }
                let scale = gain / norm;
                for j in 0..span.n_in {
                    let u = v_row[j] / norm;
                    grads[row + j] = scale * (grads[row + j] - dg * u);
                }
                grads[span.g + i] = dg;
            }
        }
    }
}

/// One layer's effective weights plus the offsets needed to write gradient
/// blocks back into the flat layout.
struct EffLayer {
    w: Vec<f64>, // n_out x n_in, row-major
    b: Vec<f64>,
    v_off: usize,
    b_off: usize,
    n_in: usize,
    n_out: usize,
}

/// Snapshot of effective weights for a fixed parameter vector.
pub struct EffectiveWeights {
    layers: Vec<EffLayer>,
}

/// Per-layer activations of one forward pass. `acts[0]` is the input,
/// `acts[last]` the raw (identity) output.
pub struct ForwardState {
    acts: Vec<Vec<f64>>,
}

impl ForwardState {
    pub fn new(layer_sizes: &[usize]) -> Self {
        ForwardState {
            acts: layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect(">= 2 layers")
    }
}

/// Scratch buffers for backpropagation, reusable across samples.
#[derive(Default)]
pub struct BackwardScratch {
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
}

impl EffectiveWeights {
    /// Forward pass writing all activations into `state`.
    pub fn forward_into(&self, x: &[f64], state: &mut ForwardState) -> Result<()> {
        let n_in = self.layers[0].n_in;
        if x.len() != n_in {
            return Err(CdeError::ShapeMismatch {
                context: "Mlp::forward",
                expected: format!("input of dimension {n_in}"),
                got: format!("{}", x.len()),
            });
        }
        state.acts[0].copy_from_slice(x);
        let n_layers = self.layers.len();
        for (l, layer) in self.layers.iter().enumerate() {
            let (prev, rest) = state.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            let last = l + 1 == n_layers;
            for i in 0..layer.n_out {
                let row = &layer.w[i * layer.n_in..(i + 1) * layer.n_in];
                let mut z = layer.b[i];
                for (wj, xj) in row.iter().zip(input.iter()) {
                    z += wj * xj;
                }
                out[i] = if last { z } else { z.tanh() };
            }
        }
        Ok(())
    }

    /// Accumulates dL/d(effective parameters) into `grads` (same layout as
    /// the parameter vector; `V` slots receive dL/dW, `g` slots stay
    /// untouched) given dL/d(output) for the sample held in `state`.
    pub fn backward_accumulate(
        &self,
        state: &ForwardState,
        grad_out: &[f64],
        scratch: &mut BackwardScratch,
        grads: &mut [f64],
    ) {
        scratch.delta.clear();
        scratch.delta.extend_from_slice(grad_out);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a_prev = &state.acts[l];
            for i in 0..layer.n_out {
                let d = scratch.delta[i];
                grads[layer.b_off + i] += d;
                let row = layer.v_off + i * layer.n_in;
                for (j, &a) in a_prev.iter().enumerate() {
                    grads[row + j] += d * a;
                }
            }
            if l > 0 {
                scratch.delta_prev.clear();
                scratch.delta_prev.resize(layer.n_in, 0.0);
                for i in 0..layer.n_out {
                    let d = scratch.delta[i];
                    let row = &layer.w[i * layer.n_in..(i + 1) * layer.n_in];
                    for (j, &w) in row.iter().enumerate() {
                        scratch.delta_prev[j] += d * w;
                    }
                }
                // acts[l] is a tanh output for l >= 1: tanh' = 1 - a^2.
                for (dp, &a) in scratch.delta_prev.iter_mut().zip(a_prev.iter()) {
                    *dp *= 1.0 - a * a;
                }
                std::mem::swap(&mut scratch.delta, &mut scratch.delta_prev);
            }
        }
    }
}
