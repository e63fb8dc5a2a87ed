use alloc::vec;
use alloc::vec::Vec;

use super::layers::{dense_backward, dense_forward, he_uniform, relu_backward_inplace, relu_inplace, sigmoid};
use super::{content_hash, param_count, Gradients};
use crate::rng::Rng;
use crate::{Error, Real, Result, Tensor};

/// Shared dense layer: ReLU hidden layers and one sigmoid output unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SdlConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl SdlConfig {
    /// Default hidden widths: about 720K parameters for 32x32 images with
    /// 128-dim features and context.
    pub fn new(input_dim: usize) -> Self {
        SdlConfig {
            input_dim,
            hidden: vec![192, 192, 128, 64],
        }
    }

    /// Input width for an image slot plus feature and context slots.
    pub fn row_width(image_dim: usize, feature_dim: usize) -> usize {
        image_dim + 2 * feature_dim
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }

    pub(crate) fn shapes(&self) -> Vec<Vec<usize>> {
        self.widths()
            .windows(2)
            .flat_map(|p| [vec![p[1], p[0]], vec![p[1]]])
            .collect()
    }
}

/// Parameter order: (weight `[out, in]`, bias `[out]`) per layer, input side first.
#[derive(Debug, Clone, PartialEq)]
pub struct Sdl<S> {
    config: SdlConfig,
    params: Vec<Tensor<S>>,
}

impl<S: Real> Sdl<S> {
    pub fn new(config: SdlConfig, rng: &mut Rng) -> Result<Self> {
        if config.input_dim == 0 || config.hidden.contains(&0) {
            return Err(Error::invalid("sdl widths must be positive"));
        }
        let params = config
            .shapes()
            .into_iter()
            .map(|s| {
                if s.len() == 1 {
                    Tensor::zeros(&s)
                } else {
                    he_uniform(&s, s[1], rng)
                }
            })
            .collect();
        Ok(Sdl { config, params })
    }

    pub fn from_params(config: SdlConfig, params: Vec<Tensor<S>>) -> Result<Self> {
        let shapes = config.shapes();
        if params.len() != shapes.len() {
            return Err(Error::shape("sdl params", &[shapes.len()], &[params.len()]));
        }
        for (p, s) in params.iter().zip(&shapes) {
            if p.shape() != s.as_slice() {
                return Err(Error::shape("sdl param", s, p.shape()));
            }
        }
        Ok(Sdl { config, params })
    }

    pub fn config(&self) -> &SdlConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor<S>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.params)
    }

    pub fn content_hash(&self) -> [u8; 32] {
        content_hash(&self.params)
    }

    fn run(&self, rows: &Tensor<S>, record: bool) -> Result<(Vec<S>, Vec<Vec<S>>)> {
        let s = rows.shape();
        if s.len() != 2 || s[1] != self.config.input_dim {
            return Err(Error::shape(
                "sdl input [batch, input_dim]",
                &[s.first().copied().unwrap_or(0), self.config.input_dim],
                s,
            ));
        }
        let batch = s[0];
        let layers = self.params.len() / 2;
        let mut acts = Vec::new();
        let mut cur = rows.data().to_vec();
        let mut in_dim = self.config.input_dim;
        for l in 0..layers {
            let out_dim = self.params[2 * l + 1].len();
            let mut out = vec![S::zero(); batch * out_dim];
            dense_forward(&cur, batch, in_dim, self.params[2 * l].data(), self.params[2 * l + 1].data(), &mut out);
            if l + 1 < layers {
                relu_inplace(&mut out);
            }
            if record {
                acts.push(cur);
            }
            cur = out;
            in_dim = out_dim;
        }
        Ok((cur, acts))
    }

    /// Output probabilities, one per row.
    pub fn forward(&self, rows: &Tensor<S>) -> Result<Tensor<S>> {
        let (logits, _) = self.run(rows, false)?;
        let n = logits.len();
        Tensor::from_vec(&[n], logits.into_iter().map(sigmoid).collect())
    }

    pub fn forward_trace(&self, rows: &Tensor<S>) -> Result<SdlTrace<S>> {
        let (logits, acts) = self.run(rows, true)?;
        let probs = logits.iter().map(|&z| sigmoid(z)).collect();
        Ok(SdlTrace {
            acts,
            probs,
            consumed: false,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SdlTrace<S> {
    /// Input of each layer (post-ReLU of the previous one).
    acts: Vec<Vec<S>>,
    probs: Vec<S>,
    consumed: bool,
}

impl<S: Real> SdlTrace<S> {
    pub fn probabilities(&self) -> &[S] {
        &self.probs
    }

    /// Reverse pass from dL/d(logits).
    pub fn backward(&mut self, net: &Sdl<S>, dlogits: &[S]) -> Result<Gradients<S>> {
        if self.consumed {
            return Err(Error::BackwardTwice);
        }
        let batch = self.probs.len();
        if dlogits.len() != batch {
            return Err(Error::shape("sdl dlogits", &[batch], &[dlogits.len()]));
        }
        self.consumed = true;
        let layers = net.params.len() / 2;
        let mut grads: Gradients<S> = net.params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut gy = dlogits.to_vec();
        for l in (0..layers).rev() {
            let x = &self.acts[l];
            let in_dim = net.params[2 * l].shape()[1];
            let mut gx = if l > 0 { vec![S::zero(); batch * in_dim] } else { Vec::new() };
            let (a, b) = grads.split_at_mut(2 * l + 1);
            dense_backward(
                x,
                batch,
                in_dim,
                net.params[2 * l].data(),
                &gy,
                a[2 * l].data_mut(),
                b[0].data_mut(),
                if l > 0 { Some(&mut gx) } else { None },
            );
            if l > 0 {
                relu_backward_inplace(x, &mut gx);
            }
            gy = gx;
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn default_parameter_count_is_near_720k() {
        let cfg = SdlConfig::new(SdlConfig::row_width(3 * 32 * 32, 128));
        let n = cfg.param_count();
        assert!((648_000..=792_000).contains(&n), "{n}");
    }

    #[test]
    fn zero_params_output_one_half() {
        let cfg = SdlConfig::new(6);
        let zeros = cfg.shapes().iter().map(|s| Tensor::<f64>::zeros(s)).collect();
        let sdl = Sdl::<f64>::from_params(cfg, zeros).unwrap();
        let rows = Tensor::from_vec(&[2, 6], vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(sdl.forward(&rows).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let sdl = Sdl::<f64>::new(SdlConfig::new(4), &mut rng::stream(0, &[])).unwrap();
        assert!(matches!(sdl.forward(&Tensor::zeros(&[1, 5])), Err(Error::Shape { .. })));
    }
}
