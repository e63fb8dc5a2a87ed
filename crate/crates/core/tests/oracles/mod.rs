//! Independent reference implementations used as test oracles.
//!
//! Everything here is written from the textbook definitions with plain loops
//! (or `nalgebra`), never by calling the kernels under test.

#![allow(dead_code)]

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tame_core::nn::{bce_logit_grad, bce_loss, CnnConfig, ExpertCnn, Sdl, SdlConfig, SharedBottom};
use tame_core::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(lo..hi)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

// ---------------------------------------------------------------- networks

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Per-element zero-padded 3x3 convolution over one `[cin, n, n]` image.
pub fn naive_conv(input: &[f64], cin: usize, n: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let cout = b.len();
    let mut out = vec![0.0; cout * n * n];
    for o in 0..cout {
        for y in 0..n {
            for x in 0..n {
                let mut acc = b[o];
                for c in 0..cin {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            let iy = y as isize + ky as isize - 1;
                            let ix = x as isize + kx as isize - 1;
                            if iy < 0 || ix < 0 || iy >= n as isize || ix >= n as isize {
                                continue;
                            }
                            let pixel = input[(c * n + iy as usize) * n + ix as usize];
                            acc += w[((o * cin + c) * 3 + ky) * 3 + kx] * pixel;
                        }
                    }
                }
                out[(o * n + y) * n + x] = acc;
            }
        }
    }
    out
}

pub fn naive_pool(input: &[f64], c: usize, n: usize) -> Vec<f64> {
    let m = n / 2;
    let mut out = vec![0.0; c * m * m];
    for ch in 0..c {
        for y in 0..m {
            for x in 0..m {
                let at = |dy: usize, dx: usize| input[(ch * n + 2 * y + dy) * n + 2 * x + dx];
                out[(ch * m + y) * m + x] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
            }
        }
    }
    out
}

/// `w` is `[out, in]`.
pub fn naive_dense(x: &[f64], w: &[f64], b: &[f64]) -> Vec<f64> {
    let inp = x.len();
    (0..b.len())
        .map(|o| b[o] + (0..inp).map(|i| w[o * inp + i] * x[i]).sum::<f64>())
        .collect()
}

/// Features and head logit of one image under the expert CNN parameter layout.
pub fn naive_cnn(cfg: &CnnConfig, p: &[Vec<f64>], image: &[f64]) -> (Vec<f64>, f64) {
    let features = naive_trunk(cfg, &p[..10], image);
    let logit = naive_dense(&features, &p[10], &p[11])[0];
    (features, logit)
}

/// Post-ReLU feature vector of one image through the conv trunk.
pub fn naive_trunk(cfg: &CnnConfig, p: &[Vec<f64>], image: &[f64]) -> Vec<f64> {
    let mut act = image.to_vec();
    let mut cin = cfg.in_channels;
    let mut n = cfg.image_size;
    for layer in 0..3 {
        let conv = naive_conv(&act, cin, n, &p[2 * layer], &p[2 * layer + 1]);
        let conv: Vec<f64> = conv.into_iter().map(relu).collect();
        cin = cfg.channels[layer];
        act = naive_pool(&conv, cin, n);
        n /= 2;
    }
    let h: Vec<f64> = naive_dense(&act, &p[6], &p[7]).into_iter().map(relu).collect();
    naive_dense(&h, &p[8], &p[9]).into_iter().map(relu).collect()
}

/// Sigmoid output of one row under the SDL parameter layout.
pub fn naive_sdl(p: &[Vec<f64>], row: &[f64]) -> f64 {
    let layers = p.len() / 2;
    let mut a = row.to_vec();
    for l in 0..layers {
        a = naive_dense(&a, &p[2 * l], &p[2 * l + 1]);
        if l + 1 < layers {
            a = a.into_iter().map(relu).collect();
        }
    }
    sigmoid(a[0])
}

pub fn tensors_to_vecs(t: &[Tensor<f64>]) -> Vec<Vec<f64>> {
    t.iter().map(|x| x.data().to_vec()).collect()
}

/// Small CNN used by the gradient and forward oracles.
pub fn small_cnn_config() -> CnnConfig {
    CnnConfig {
        in_channels: 3,
        image_size: 8,
        channels: [3, 4, 5],
        dense_hidden: 7,
        feature_dim: 6,
    }
}

/// Re-draws every parameter (biases included) uniformly in `[-scale, scale]`
/// scaled by the tensor's fan-in.
pub fn randomize(params: &[Tensor<f64>], r: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
    params
        .iter()
        .map(|t| {
            let fan_in: usize = if t.shape().len() > 1 { t.shape()[1..].iter().product() } else { 4 };
            let bound = (3.0 / fan_in as f64).sqrt();
            Tensor::from_vec(t.shape(), uniform_vec(r, t.len(), -bound, bound)).unwrap()
        })
        .collect()
}

// ---------------------------------------------------------- gradient check

/// Finite-difference step used by every gradient check.
pub const FD_STEP: f64 = 1e-5;
/// Denominator floor so that near-zero gradients are compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

/// Largest per-coordinate `|analytic - numeric| / max(|analytic|, |numeric|, FD_FLOOR)`.
pub fn compare_gradients(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        assert_eq!(a.len(), n.len());
        for (&x, &y) in a.iter().zip(n) {
            let e = (x - y).abs() / x.abs().max(y.abs()).max(FD_FLOOR);
            worst = worst.max(e);
        }
    }
    worst
}

/// Central differences of `loss` over every coordinate of `params`.
pub fn numeric_gradient(params: &[Tensor<f64>], loss: impl Fn(&[Tensor<f64>]) -> f64) -> Vec<Vec<f64>> {
    let mut work = params.to_vec();
    let mut grads = Vec::with_capacity(params.len());
    for t in 0..params.len() {
        let mut g = vec![0.0; params[t].len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + FD_STEP;
            let up = loss(&work);
            work[t].data_mut()[i] = orig - FD_STEP;
            let down = loss(&work);
            work[t].data_mut()[i] = orig;
            *gi = (up - down) / (2.0 * FD_STEP);
        }
        grads.push(g);
    }
    grads
}

fn random_batch(r: &mut ChaCha8Rng, batch: usize, dim: usize) -> (Vec<f64>, Vec<u8>) {
    let x = uniform_vec(r, batch * dim, 0.0, 1.0);
    let mut labels: Vec<u8> = (0..batch).map(|i| (i % 2) as u8).collect();
    labels.rotate_left(r.gen_range(0..batch));
    (x, labels)
}

const GRAD_BATCH: usize = 4;

/// Worst relative error of the expert CNN gradient on one random draw.
pub fn cnn_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cfg = small_cnn_config();
    let base = ExpertCnn::<f64>::new(cfg, &mut tame_core::rng::stream(seed, &[])).unwrap();
    let params = randomize(base.params(), &mut r);
    let (x, y) = random_batch(&mut r, GRAD_BATCH, cfg.image_dim());
    let images = Tensor::from_vec(&[GRAD_BATCH, 3, cfg.image_size, cfg.image_size], x).unwrap();
    let loss = |p: &[Tensor<f64>]| {
        let net = ExpertCnn::from_params(cfg, p.to_vec(), false).unwrap();
        let probs: Vec<f64> = net.forward(&images).unwrap().logits.data().iter().map(|&z| sigmoid(z)).collect();
        bce_loss(&probs, &y).unwrap()
    };
    let net = ExpertCnn::from_params(cfg, params.clone(), false).unwrap();
    let mut trace = net.forward_trace(&images).unwrap();
    let probs: Vec<f64> = trace.output().logits.data().iter().map(|&z| sigmoid(z)).collect();
    let seed_grad = bce_logit_grad(&probs, &y).unwrap();
    let analytic = tensors_to_vecs(&trace.backward(&net, &seed_grad).unwrap());
    compare_gradients(&analytic, &numeric_gradient(&params, loss))
}

pub fn small_sdl_config() -> SdlConfig {
    SdlConfig {
        input_dim: 12,
        hidden: vec![9, 7, 5, 4],
    }
}

/// Worst relative error of the SDL gradient on one random draw.
pub fn sdl_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cfg = small_sdl_config();
    let base = Sdl::<f64>::new(cfg.clone(), &mut tame_core::rng::stream(seed, &[])).unwrap();
    let params = randomize(base.params(), &mut r);
    let (x, y) = random_batch(&mut r, GRAD_BATCH, cfg.input_dim);
    let rows = Tensor::from_vec(&[GRAD_BATCH, cfg.input_dim], x).unwrap();
    let loss = |p: &[Tensor<f64>]| {
        let net = Sdl::from_params(cfg.clone(), p.to_vec()).unwrap();
        bce_loss(net.forward(&rows).unwrap().data(), &y).unwrap()
    };
    let net = Sdl::from_params(cfg.clone(), params.clone()).unwrap();
    let mut trace = net.forward_trace(&rows).unwrap();
    let seed_grad = bce_logit_grad(trace.probabilities(), &y).unwrap();
    let analytic = tensors_to_vecs(&trace.backward(&net, &seed_grad).unwrap());
    compare_gradients(&analytic, &numeric_gradient(&params, loss))
}

/// Worst relative error of the Shared-Bottom trunk and head gradients on one random draw.
pub fn shared_bottom_gradient_error(seed: u64) -> f64 {
    let mut r = rng(seed);
    let cfg = small_cnn_config();
    let mut model = SharedBottom::<f64>::new(cfg, &mut tame_core::rng::stream(seed, &[])).unwrap();
    model.add_head(&mut tame_core::rng::stream(seed, &[1]));
    let head = model.add_head(&mut tame_core::rng::stream(seed, &[2]));
    let trunk = randomize(model.trunk(), &mut r);
    model.trunk_mut().clone_from_slice(&trunk);
    let head_params = randomize(model.head_mut(head).unwrap(), &mut r);
    model.head_mut(head).unwrap().clone_from_slice(&head_params);
    let (x, y) = random_batch(&mut r, GRAD_BATCH, cfg.image_dim());
    let images = Tensor::from_vec(&[GRAD_BATCH, 3, cfg.image_size, cfg.image_size], x).unwrap();

    // flat layout: trunk tensors followed by the head's tensors
    let mut all = trunk.clone();
    all.extend(head_params);
    let n_trunk = trunk.len();
    let loss = |p: &[Tensor<f64>]| {
        let mut m = model.clone();
        m.trunk_mut().clone_from_slice(&p[..n_trunk]);
        m.head_mut(head).unwrap().clone_from_slice(&p[n_trunk..]);
        bce_loss(m.forward(&images, head).unwrap().data(), &y).unwrap()
    };
    let mut trace = model.forward_trace(&images, head).unwrap();
    let seed_grad = bce_logit_grad(trace.probabilities(), &y).unwrap();
    let (gt, gh) = trace.backward(&model, &seed_grad).unwrap();
    let mut analytic = tensors_to_vecs(&gt);
    analytic.extend(tensors_to_vecs(&gh));
    compare_gradients(&analytic, &numeric_gradient(&all, loss))
}

// ------------------------------------------------------------- statistics

/// Two-pass sample covariance (N-1 normalization), row-major.
pub fn two_pass_covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    (mean, cov)
}

/// Random symmetric positive definite `d x d` matrix `A A^T / k` with `k = d + 2` columns.
pub fn random_spd(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let k = d + 2;
    let a = uniform_vec(r, d * k, -1.0, 1.0);
    let mut s = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            s[i * d + j] = (0..k).map(|c| a[i * k + c] * a[j * k + c]).sum::<f64>() / k as f64;
        }
    }
    s
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let root = e.eigenvalues.map(|v| v.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&root) * e.eigenvectors.transpose()
}

/// Fréchet distance computed with nalgebra's symmetric eigensolver.
pub fn fid_oracle(mu1: &[f64], s1: &[f64], mu2: &[f64], s2: &[f64]) -> f64 {
    let d = mu1.len();
    let a = DMatrix::from_row_slice(d, d, s1);
    let b = DMatrix::from_row_slice(d, d, s2);
    let ra = sym_sqrt(&a);
    let mid = &ra * &b * &ra;
    let mid = (&mid + mid.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(mid).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
    let mean: f64 = mu1.iter().zip(mu2).map(|(x, y)| (x - y) * (x - y)).sum();
    mean + a.trace() + b.trace() - 2.0 * cross
}

// ----------------------------------------------------------------- metrics

/// Brute-force all-pairs AUROC: P(score_pos > score_neg) + 0.5 P(tie).
pub fn auroc_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li != 1 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

// ------------------------------------------------------------------ buffer

/// Reference FIFO model of the replay buffer: a single queue of
/// `(insertion order, expert, size)` with whole-entry eviction.
#[derive(Debug, Default)]
pub struct QueueModel {
    pub capacity: usize,
    pub queue: VecDeque<(u64, usize, usize)>,
    next: u64,
}

impl QueueModel {
    pub fn new(capacity: usize) -> Self {
        QueueModel {
            capacity,
            ..Default::default()
        }
    }

    pub fn total(&self) -> usize {
        self.queue.iter().map(|e| e.2).sum()
    }

    /// Returns the insertion orders evicted by this store.
    pub fn store(&mut self, expert: usize, size: usize) -> Vec<u64> {
        let size = size.min(self.capacity);
        let mut evicted = Vec::new();
        while self.total() + size > self.capacity {
            evicted.push(self.queue.pop_front().expect("non-empty").0);
        }
        self.queue.push_back((self.next, expert, size));
        self.next += 1;
        evicted
    }

    pub fn retrieve(&self, expert: usize) -> Vec<u64> {
        self.queue.iter().filter(|e| e.1 == expert).map(|e| e.0).collect()
    }
}
