//! Task-aware multi-expert lifelong learning.
//!
//! A pool of frozen expert CNNs feeds a single trainable shared dense stack.
//! Incoming binary tasks are routed to the expert whose initialization task
//! looks most similar (FID or cosine of mean features), trained with replay
//! from an expert-indexed FIFO buffer, and optionally enhanced with a
//! scaled dot-product attention context over stored task features.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CIFAR
//! loader and the experiment runner live in the `tame` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod attention;
pub mod engine;
mod error;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod replay;
pub mod rng;
mod scalar;
pub mod similarity;
pub mod task;
mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;
pub use tensor::Tensor;
