//! Minimal network engine: the expert CNN, the shared dense stack, the
//! Shared-Bottom comparison model, binary cross-entropy and Adam.
//!
//! Each architecture keeps its parameters as a flat `Vec<Tensor>` in a fixed
//! order so that the optimizer, hashing and checkpointing treat them uniformly.
//! Gradients come back in the same order and shapes.

mod adam;
mod cnn;
pub(crate) mod layers;
mod loss;
mod sdl;
mod shared_bottom;

use alloc::vec::Vec;

use sha2::{Digest, Sha256};

pub use adam::{Adam, AdamConfig};
pub use cnn::{CnnConfig, CnnOutput, CnnTrace, ExpertCnn};
pub use loss::{bce_logit_grad, bce_loss, PROB_EPS};
pub use sdl::{Sdl, SdlConfig, SdlTrace};
pub use shared_bottom::{SharedBottom, SharedBottomTrace};

use crate::{Real, Tensor};

pub type Gradients<S> = Vec<Tensor<S>>;

pub fn param_count<S: Real>(params: &[Tensor<S>]) -> usize {
    params.iter().map(Tensor::len).sum()
}

/// SHA-256 over every tensor's shape and little-endian values.
///
/// Values are hashed as `f64` so the digest does not depend on precision
/// for values that are exactly representable in both.
pub fn content_hash<S: Real>(params: &[Tensor<S>]) -> [u8; 32] {
    let mut h = Sha256::new();
    for t in params {
        h.update((t.shape().len() as u64).to_le_bytes());
        for &d in t.shape() {
            h.update((d as u64).to_le_bytes());
        }
        for &v in t.data() {
            h.update(v.as_f64().to_le_bytes());
        }
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

pub(crate) fn zeros_like<S: Real>(params: &[Tensor<S>]) -> Gradients<S> {
    params.iter().map(|p| Tensor::zeros(p.shape())).collect()
}
