//! Scaled dot-product attention over per-task stored features.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Attention weights over past tasks and the resulting context vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionContext {
    pub weights: Vec<f64>,
    pub context: Vec<f64>,
    pub d_k: usize,
}

/// `softmax_j(q . k_j / sqrt(d_k))`, with the max logit subtracted first.
pub fn attention_weights(query: &[f64], keys: &[Vec<f64>], d_k: usize) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(Error::Empty("attention keys"));
    }
    if d_k == 0 {
        return Err(Error::invalid("d_k must be positive"));
    }
    let scale = 1.0 / libm::sqrt(d_k as f64);
    let logits = keys
        .iter()
        .map(|k| {
            if k.len() != query.len() {
                return Err(Error::shape("attention key", &[query.len()], &[k.len()]));
            }
            Ok(query.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    softmax(&logits)
}

pub(crate) fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("attention logits"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `sum_j weights[j] * values[j]`.
pub fn attention_context(weights: &[f64], values: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != values.len() {
        return Err(Error::shape("attention values", &[weights.len()], &[values.len()]));
    }
    let dim = values.first().map_or(0, Vec::len);
    let mut out = vec![0.0; dim];
    for (&a, v) in weights.iter().zip(values) {
        if v.len() != dim {
            return Err(Error::shape("attention value", &[dim], &[v.len()]));
        }
        for (o, &x) in out.iter_mut().zip(v) {
            *o += a * x;
        }
    }
    Ok(out)
}

/// Keys double as values: past-task mean features weighted by relevance to `query`.
pub fn attend(query: &[f64], keys: &[Vec<f64>]) -> Result<AttentionContext> {
    let d_k = query.len();
    let weights = attention_weights(query, keys, d_k)?;
    let context = attention_context(&weights, keys)?;
    Ok(AttentionContext { weights, context, d_k })
}
