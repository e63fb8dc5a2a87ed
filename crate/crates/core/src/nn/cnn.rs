use alloc::vec;
use alloc::vec::Vec;

use super::layers::{
    conv3x3_backward, conv3x3_forward, dense_backward, dense_forward, he_uniform,
    maxpool2_backward, maxpool2_forward, relu_backward_inplace, relu_inplace,
};
use super::{content_hash, param_count, zeros_like, Gradients};
use crate::rng::Rng;
use crate::{Error, Real, Result, Tensor};

/// Layer sizes of the expert CNN (and of the Shared-Bottom trunk).
///
/// Three 3x3 conv layers (stride 1, padding 1), each followed by ReLU and
/// 2x2 max pooling, then two ReLU dense layers producing the feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CnnConfig {
    pub in_channels: usize,
    pub image_size: usize,
    pub channels: [usize; 3],
    pub dense_hidden: usize,
    pub feature_dim: usize,
}

impl Default for CnnConfig {
    /// 32x32 RGB input, about 180K parameters including the pretraining head.
    fn default() -> Self {
        CnnConfig {
            in_channels: 3,
            image_size: 32,
            channels: [16, 32, 64],
            dense_hidden: 136,
            feature_dim: 128,
        }
    }
}

impl CnnConfig {
    pub fn with_image_size(self, image_size: usize) -> Self {
        CnnConfig { image_size, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.image_size % 8 != 0 {
            return Err(Error::invalid(alloc::format!(
                "image size {} must be a positive multiple of 8",
                self.image_size
            )));
        }
        if self.in_channels == 0
            || self.channels.contains(&0)
            || self.dense_hidden == 0
            || self.feature_dim == 0
        {
            return Err(Error::invalid("cnn layer widths must be positive"));
        }
        Ok(())
    }

    /// Width of the flattened activation entering the first dense layer.
    pub fn flat_dim(&self) -> usize {
        let s = self.image_size / 8;
        self.channels[2] * s * s
    }

    pub fn image_dim(&self) -> usize {
        self.in_channels * self.image_size * self.image_size
    }

    /// Parameters of the conv trunk plus both dense layers (no head).
    pub fn trunk_param_count(&self) -> usize {
        let [c1, c2, c3] = self.channels;
        let conv = (self.in_channels * c1 * 9 + c1) + (c1 * c2 * 9 + c2) + (c2 * c3 * 9 + c3);
        conv + (self.flat_dim() * self.dense_hidden + self.dense_hidden)
            + (self.dense_hidden * self.feature_dim + self.feature_dim)
    }

    pub(crate) fn trunk_shapes(&self) -> Vec<Vec<usize>> {
        let [c1, c2, c3] = self.channels;
        vec![
            vec![c1, self.in_channels, 3, 3],
            vec![c1],
            vec![c2, c1, 3, 3],
            vec![c2],
            vec![c3, c2, 3, 3],
            vec![c3],
            vec![self.dense_hidden, self.flat_dim()],
            vec![self.dense_hidden],
            vec![self.feature_dim, self.dense_hidden],
            vec![self.feature_dim],
        ]
    }

    pub(crate) fn check_images<S: Real>(&self, images: &Tensor<S>) -> Result<usize> {
        let s = images.shape();
        let expect = [s.first().copied().unwrap_or(0), self.in_channels, self.image_size, self.image_size];
        if s.len() != 4 || s[1..] != expect[1..] {
            return Err(Error::shape("cnn input [batch, C, H, W]", &expect, s));
        }
        Ok(s[0])
    }
}

pub(crate) const TRUNK_TENSORS: usize = 10;

pub(crate) fn init_trunk<S: Real>(cfg: &CnnConfig, rng: &mut Rng) -> Vec<Tensor<S>> {
    cfg.trunk_shapes()
        .into_iter()
        .map(|shape| {
            if shape.len() == 1 {
                Tensor::zeros(&shape)
            } else {
                let fan_in = shape[1..].iter().product();
                he_uniform(&shape, fan_in, rng)
            }
        })
        .collect()
}

/// Activations kept for the backward pass through the trunk.
#[derive(Debug, Clone)]
pub(crate) struct TrunkTrace<S> {
    batch: usize,
    input: Vec<S>,
    conv_out: [Vec<S>; 3],
    pooled: [Vec<S>; 3],
    argmax: [Vec<u32>; 3],
    hidden: Vec<S>,
    features: Vec<S>,
}

/// Runs the conv trunk. Returns `[batch, feature_dim]` features (post-ReLU).
pub(crate) fn trunk_forward<S: Real>(
    cfg: &CnnConfig,
    p: &[Tensor<S>],
    images: &Tensor<S>,
    record: bool,
) -> Result<(Tensor<S>, Option<TrunkTrace<S>>)> {
    let batch = cfg.check_images(images)?;
    let mut cur: Vec<S> = images.data().to_vec();
    let input = if record { cur.clone() } else { Vec::new() };
    let mut cin = cfg.in_channels;
    let mut side = cfg.image_size;
    let mut conv_out: [Vec<S>; 3] = Default::default();
    let mut pooled: [Vec<S>; 3] = Default::default();
    let mut argmax: [Vec<u32>; 3] = Default::default();
    for l in 0..3 {
        let cout = cfg.channels[l];
        let mut out = vec![S::zero(); batch * cout * side * side];
        conv3x3_forward(&cur, batch, cin, side, side, p[2 * l].data(), p[2 * l + 1].data(), &mut out);
        relu_inplace(&mut out);
        let half = side / 2;
        let mut pool = vec![S::zero(); batch * cout * half * half];
        let mut am = vec![0u32; pool.len()];
        maxpool2_forward(&out, batch * cout, side, side, &mut pool, &mut am);
        if record {
            conv_out[l] = out;
            argmax[l] = am;
            pooled[l] = pool.clone();
        }
        cur = pool;
        cin = cout;
        side = half;
    }
    let flat = cfg.flat_dim();
    let mut hidden = vec![S::zero(); batch * cfg.dense_hidden];
    dense_forward(&cur, batch, flat, p[6].data(), p[7].data(), &mut hidden);
    relu_inplace(&mut hidden);
    let mut features = vec![S::zero(); batch * cfg.feature_dim];
    dense_forward(&hidden, batch, cfg.dense_hidden, p[8].data(), p[9].data(), &mut features);
    relu_inplace(&mut features);
    let trace = record.then(|| TrunkTrace {
        batch,
        input,
        conv_out,
        pooled,
        argmax,
        hidden,
        features: features.clone(),
    });
    Ok((Tensor::from_vec(&[batch, cfg.feature_dim], features)?, trace))
}

/// Gradients of the ten trunk tensors given dL/d(features).
pub(crate) fn trunk_backward<S: Real>(
    cfg: &CnnConfig,
    p: &[Tensor<S>],
    t: &TrunkTrace<S>,
    dfeatures: &[S],
) -> Gradients<S> {
    let batch = t.batch;
    let mut g = zeros_like(&p[..TRUNK_TENSORS]);
    let mut gf = dfeatures.to_vec();
    relu_backward_inplace(&t.features, &mut gf);
    let mut gh = vec![S::zero(); batch * cfg.dense_hidden];
    {
        let (a, b) = g.split_at_mut(9);
        dense_backward(&t.hidden, batch, cfg.dense_hidden, p[8].data(), &gf, a[8].data_mut(), b[0].data_mut(), Some(&mut gh));
    }
    relu_backward_inplace(&t.hidden, &mut gh);
    let flat = cfg.flat_dim();
    let mut gcur = vec![S::zero(); batch * flat];
    {
        let (a, b) = g.split_at_mut(7);
        dense_backward(&t.pooled[2], batch, flat, p[6].data(), &gh, a[6].data_mut(), b[0].data_mut(), Some(&mut gcur));
    }
    let mut side = cfg.image_size >> 3;
    for l in (0..3).rev() {
        let cout = cfg.channels[l];
        let full = side * 2;
        let mut gconv = vec![S::zero(); batch * cout * full * full];
        maxpool2_backward(&gcur, &t.argmax[l], &mut gconv);
        relu_backward_inplace(&t.conv_out[l], &mut gconv);
        let (cin, x) = if l == 0 {
            (cfg.in_channels, &t.input)
        } else {
            (cfg.channels[l - 1], &t.pooled[l - 1])
        };
        let mut gx = if l > 0 { vec![S::zero(); x.len()] } else { Vec::new() };
        {
            let (a, b) = g.split_at_mut(2 * l + 1);
            conv3x3_backward(
                x,
                batch,
                cin,
                full,
                full,
                p[2 * l].data(),
                &gconv,
                a[2 * l].data_mut(),
                b[0].data_mut(),
                if l > 0 { Some(&mut gx) } else { None },
            );
        }
        gcur = gx;
        side = full;
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnOutput<S> {
    /// `[batch, feature_dim]` penultimate-layer activations.
    pub features: Tensor<S>,
    /// `[batch]` outputs of the pretraining head (pre-sigmoid).
    pub logits: Tensor<S>,
}

/// Expert CNN: conv trunk, feature layer and a single-logit pretraining head.
///
/// Parameter order: conv1 w/b, conv2 w/b, conv3 w/b, dense1 w/b, dense2 w/b, head w/b.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertCnn<S> {
    config: CnnConfig,
    params: Vec<Tensor<S>>,
    frozen: bool,
}

impl<S: Real> ExpertCnn<S> {
    pub fn new(config: CnnConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut params = init_trunk(&config, rng);
        params.push(he_uniform(&[1, config.feature_dim], config.feature_dim, rng));
        params.push(Tensor::zeros(&[1]));
        Ok(ExpertCnn {
            config,
            params,
            frozen: false,
        })
    }

    /// Builds a network from explicit parameters (checkpoint loading, tests).
    pub fn from_params(config: CnnConfig, params: Vec<Tensor<S>>, frozen: bool) -> Result<Self> {
        config.validate()?;
        let mut shapes = config.trunk_shapes();
        shapes.push(vec![1, config.feature_dim]);
        shapes.push(vec![1]);
        if params.len() != shapes.len() {
            return Err(Error::shape("expert params", &[shapes.len()], &[params.len()]));
        }
        for (p, s) in params.iter().zip(&shapes) {
            if p.shape() != s.as_slice() {
                return Err(Error::shape("expert param", s, p.shape()));
            }
        }
        Ok(ExpertCnn {
            config,
            params,
            frozen,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<S>] {
        &self.params
    }

    /// Mutable parameters; refused once the expert is frozen.
    pub fn params_mut(&mut self) -> Result<&mut [Tensor<S>]> {
        if self.frozen {
            return Err(Error::invalid("expert is frozen"));
        }
        Ok(&mut self.params)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.params)
    }

    pub fn content_hash(&self) -> [u8; 32] {
        content_hash(&self.params)
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn head(&self, features: &Tensor<S>) -> Result<Tensor<S>> {
        let batch = features.rows();
        let mut logits = vec![S::zero(); batch];
        dense_forward(
            features.data(),
            batch,
            self.config.feature_dim,
            self.params[10].data(),
            self.params[11].data(),
            &mut logits,
        );
        Tensor::from_vec(&[batch], logits)
    }

    pub fn forward(&self, images: &Tensor<S>) -> Result<CnnOutput<S>> {
        let (features, _) = trunk_forward(&self.config, &self.params, images, false)?;
        let logits = self.head(&features)?;
        Ok(CnnOutput { features, logits })
    }

    /// Features only, skipping the head.
    pub fn features(&self, images: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(trunk_forward(&self.config, &self.params, images, false)?.0)
    }

    /// Forward pass that keeps activations for [`CnnTrace::backward`].
    pub fn forward_trace(&self, images: &Tensor<S>) -> Result<CnnTrace<S>> {
        let (features, trace) = trunk_forward(&self.config, &self.params, images, true)?;
        let logits = self.head(&features)?;
        Ok(CnnTrace {
            trunk: trace.expect("recorded"),
            output: CnnOutput { features, logits },
            consumed: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CnnTrace<S> {
    trunk: TrunkTrace<S>,
    output: CnnOutput<S>,
    consumed: bool,
}

impl<S: Real> CnnTrace<S> {
    pub fn output(&self) -> &CnnOutput<S> {
        &self.output
    }

    /// Reverse pass from dL/d(logits). Frozen experts get no gradient.
    pub fn backward(&mut self, net: &ExpertCnn<S>, dlogits: &[S]) -> Result<Gradients<S>> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        if net.frozen {
            return Err(Error::invalid("expert is frozen; no gradients"));
        }
        if dlogits.len() != self.trunk.batch {
            return Err(Error::shape("cnn dlogits", &[self.trunk.batch], &[dlogits.len()]));
        }
        self.consumed = true;
        let cfg = &net.config;
        let batch = self.trunk.batch;
        let mut ghw = Tensor::zeros(&[1, cfg.feature_dim]);
        let mut ghb = Tensor::zeros(&[1]);
        let mut gfeat = vec![S::zero(); batch * cfg.feature_dim];
        dense_backward(
            self.output.features.data(),
            batch,
            cfg.feature_dim,
            net.params[10].data(),
            dlogits,
            ghw.data_mut(),
            ghb.data_mut(),
            Some(&mut gfeat),
        );
        let mut g = trunk_backward(cfg, &net.params, &self.trunk, &gfeat);
        g.push(ghw);
        g.push(ghb);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn default_parameter_count_is_near_180k() {
        let n = CnnConfig::default().trunk_param_count() + CnnConfig::default().feature_dim + 1;
        assert!((162_000..=198_000).contains(&n), "{n}");
        let net = ExpertCnn::<f32>::new(CnnConfig::default(), &mut rng::stream(0, &[])).unwrap();
        assert_eq!(net.param_count(), n);
    }

    #[test]
    fn zero_params_give_zero_features() {
        let cfg = CnnConfig::default();
        let net = ExpertCnn::<f64>::new(cfg, &mut rng::stream(0, &[])).unwrap();
        let zeros: Vec<Tensor<f64>> = net.params().iter().map(|p| Tensor::zeros(p.shape())).collect();
        let net = ExpertCnn::from_params(cfg, zeros, false).unwrap();
        let out = net.forward(&Tensor::zeros(&[2, 3, 32, 32])).unwrap();
        assert!(out.features.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.features.shape(), &[2, 128]);
    }

    #[test]
    fn wrong_image_size_is_a_shape_error() {
        let net = ExpertCnn::<f64>::new(CnnConfig::default(), &mut rng::stream(0, &[])).unwrap();
        let err = net.forward(&Tensor::zeros(&[1, 3, 16, 16])).unwrap_err();
        assert!(matches!(err, Error::Shape { .. }));
    }

    #[test]
    fn backward_twice_is_a_usage_error() {
        let cfg = CnnConfig::default().with_image_size(8);
        let net = ExpertCnn::<f64>::new(cfg, &mut rng::stream(1, &[])).unwrap();
        let mut tr = net.forward_trace(&Tensor::zeros(&[1, 3, 8, 8])).unwrap();
        tr.backward(&net, &[1.0]).unwrap();
        assert_eq!(tr.backward(&net, &[1.0]).unwrap_err(), Error::BackwardTwice);
    }

    #[test]
    fn frozen_expert_refuses_gradients() {
        let cfg = CnnConfig::default().with_image_size(8);
        let mut net = ExpertCnn::<f64>::new(cfg, &mut rng::stream(1, &[])).unwrap();
        net.freeze();
        assert!(net.params_mut().is_err());
        let mut tr = net.forward_trace(&Tensor::zeros(&[1, 3, 8, 8])).unwrap();
        assert!(tr.backward(&net, &[1.0]).is_err());
    }
}
