//! Neural network building blocks: a weight-normalized MLP with manual
//! backpropagation and the Adam optimizer.

mod adam;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{BackwardScratch, EffectiveWeights, ForwardState, Mlp};
