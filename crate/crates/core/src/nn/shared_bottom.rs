use alloc::vec;
use alloc::vec::Vec;

use super::cnn::{init_trunk, trunk_backward, trunk_forward, TrunkTrace};
use super::layers::{dense_backward, dense_forward, he_uniform, sigmoid};
use super::{content_hash, param_count, Gradients, SdlConfig};
use crate::nn::CnnConfig;
use crate::rng::Rng;
use crate::{Error, Real, Result, Tensor};

/// Multi-task comparison model: one shared conv trunk, one binary head per task.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedBottom<S> {
    config: CnnConfig,
    trunk: Vec<Tensor<S>>,
    heads: Vec<Vec<Tensor<S>>>,
}

impl<S: Real> SharedBottom<S> {
    /// Trunk config whose dense width makes trunk + one head match the
    /// parameter count of `n_experts` experts plus the shared dense layer.
    pub fn matched_config(expert: &CnnConfig, n_experts: usize, sdl: &SdlConfig) -> CnnConfig {
        let target = n_experts * (expert.trunk_param_count() + expert.feature_dim + 1) + sdl.param_count();
        let base = CnnConfig {
            dense_hidden: 0,
            ..*expert
        };
        let fixed = base.trunk_param_count() + expert.feature_dim + 1;
        let per_unit = expert.flat_dim() + 1 + expert.feature_dim;
        let hidden = (target.saturating_sub(fixed) + per_unit / 2) / per_unit;
        CnnConfig {
            dense_hidden: hidden.max(1),
            ..*expert
        }
    }

    pub fn new(config: CnnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        Ok(SharedBottom {
            config,
            trunk: init_trunk(&config, rng),
            heads: Vec::new(),
        })
    }

    /// Appends a freshly initialized head and returns its index.
    pub fn add_head(&mut self, rng: &mut Rng) -> usize {
        let f = self.config.feature_dim;
        self.heads.push(vec![he_uniform(&[1, f], f, rng), Tensor::zeros(&[1])]);
        self.heads.len() - 1
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn head_count(&self) -> usize {
        self.heads.len()
    }

    pub fn trunk(&self) -> &[Tensor<S>] {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.trunk
    }

    pub fn head_mut(&mut self, head: usize) -> Result<&mut [Tensor<S>]> {
        self.heads
            .get_mut(head)
            .map(|h| h.as_mut_slice())
            .ok_or_else(|| Error::invalid(alloc::format!("no head {head}")))
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.trunk) + self.heads.iter().map(|h| param_count(h)).sum::<usize>()
    }

    pub fn trunk_hash(&self) -> [u8; 32] {
        content_hash(&self.trunk)
    }

    fn head_logits(&self, features: &Tensor<S>, head: usize) -> Result<Vec<S>> {
        let h = self
            .heads
            .get(head)
            .ok_or_else(|| Error::invalid(alloc::format!("no head {head}")))?;
        let batch = features.rows();
        let mut logits = vec![S::zero(); batch];
        dense_forward(features.data(), batch, self.config.feature_dim, h[0].data(), h[1].data(), &mut logits);
        Ok(logits)
    }

    /// Probabilities from task head `head`.
    pub fn forward(&self, images: &Tensor<S>, head: usize) -> Result<Tensor<S>> {
        let (features, _) = trunk_forward(&self.config, &self.trunk, images, false)?;
        let logits = self.head_logits(&features, head)?;
        let n = logits.len();
        Tensor::from_vec(&[n], logits.into_iter().map(sigmoid).collect())
    }

    pub fn forward_trace(&self, images: &Tensor<S>, head: usize) -> Result<SharedBottomTrace<S>> {
        let (features, trunk) = trunk_forward(&self.config, &self.trunk, images, true)?;
        let logits = self.head_logits(&features, head)?;
        Ok(SharedBottomTrace {
            trunk: trunk.expect("recorded"),
            features,
            head,
            probs: logits.into_iter().map(sigmoid).collect(),
            consumed: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SharedBottomTrace<S> {
    trunk: TrunkTrace<S>,
    features: Tensor<S>,
    head: usize,
    probs: Vec<S>,
    consumed: bool,
}

impl<S: Real> SharedBottomTrace<S> {
    pub fn probabilities(&self) -> &[S] {
        &self.probs
    }

    /// Returns (trunk gradients, gradients of the traced head).
    pub fn backward(&mut self, net: &SharedBottom<S>, dlogits: &[S]) -> Result<(Gradients<S>, Gradients<S>)> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        let batch = self.probs.len();
        if dlogits.len() != batch {
            return Err(Error::shape("shared-bottom dlogits", &[batch], &[dlogits.len()]));
        }
        self.consumed = true;
        let f = net.config.feature_dim;
        let h = &net.heads[self.head];
        let mut gw = Tensor::zeros(&[1, f]);
        let mut gb = Tensor::zeros(&[1]);
        let mut gfeat = vec![S::zero(); batch * f];
        dense_backward(self.features.data(), batch, f, h[0].data(), dlogits, gw.data_mut(), gb.data_mut(), Some(&mut gfeat));
        let trunk = trunk_backward(&net.config, &net.trunk, &self.trunk, &gfeat);
        Ok((trunk, vec![gw, gb]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn matched_config_is_within_ten_percent() {
        for size in [16, 32] {
            let expert = CnnConfig::default().with_image_size(size);
            let sdl = SdlConfig::new(SdlConfig::row_width(expert.image_dim(), expert.feature_dim));
            let target = 5 * (expert.trunk_param_count() + expert.feature_dim + 1) + sdl.param_count();
            let cfg = SharedBottom::<f32>::matched_config(&expert, 5, &sdl);
            let mut sb = SharedBottom::<f32>::new(cfg, &mut rng::stream(0, &[])).unwrap();
            sb.add_head(&mut rng::stream(1, &[]));
            let n = sb.param_count() as f64;
            assert!((n / target as f64 - 1.0).abs() < 0.1, "{n} vs {target}");
        }
    }

    #[test]
    fn heads_are_appended() {
        let cfg = CnnConfig::default().with_image_size(8);
        let mut sb = SharedBottom::<f64>::new(cfg, &mut rng::stream(0, &[])).unwrap();
        let mut r = rng::stream(1, &[]);
        assert_eq!(sb.add_head(&mut r), 0);
        assert_eq!(sb.add_head(&mut r), 1);
        assert_eq!(sb.head_count(), 2);
        assert!(sb.forward(&Tensor::zeros(&[1, 3, 8, 8]), 2).is_err());
    }
}
