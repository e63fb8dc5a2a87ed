use alloc::vec::Vec;

use crate::{Error, Real, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before logarithms.
pub const PROB_EPS: f64 = 1e-7;

fn check(probs_len: usize, labels: &[u8]) -> Result<()> {
    if probs_len != labels.len() {
        return Err(Error::shape("bce", &[labels.len()], &[probs_len]));
    }
    if probs_len == 0 {
        return Err(Error::Empty("bce batch"));
    }
    if let Some(l) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::invalid(alloc::format!("label {l} is not binary")));
    }
    Ok(())
}

/// Mean binary cross-entropy `-mean(y ln p + (1-y) ln(1-p))`.
pub fn bce_loss<S: Real>(probs: &[S], labels: &[u8]) -> Result<S> {
    check(probs.len(), labels)?;
    let eps = S::from_f64(PROB_EPS);
    let mut total = S::zero();
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.max(eps).min(S::one() - eps);
        total += if y == 1 { -p.ln() } else { -(S::one() - p).ln() };
    }
    Ok(total / S::from_f64(probs.len() as f64))
}

/// Gradient of [`bce_loss`] with respect to the pre-sigmoid logits.
///
/// Inside the clamp window this is `(p - y) / N`; where the clamp is active
/// the loss is locally constant and the gradient is zero.
pub fn bce_logit_grad<S: Real>(probs: &[S], labels: &[u8]) -> Result<Vec<S>> {
    check(probs.len(), labels)?;
    let eps = S::from_f64(PROB_EPS);
    let n = S::from_f64(probs.len() as f64);
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if p < eps || p > S::one() - eps {
                S::zero()
            } else {
                (p - S::from_f64(y as f64)) / n
            }
        })
        .collect())
}
