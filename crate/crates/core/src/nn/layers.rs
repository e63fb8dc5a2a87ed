//! Direct (loop-based) kernels shared by the three architectures.
//! Activations are NCHW for images and row-major `[batch, width]` for dense layers.

use rand::Rng as _;

use crate::rng::Rng;
use crate::{Real, Tensor};

/// `out[b, o] = bias[o] + sum_i w[o, i] * x[b, i]`
pub(crate) fn dense_forward<S: Real>(
    x: &[S],
    batch: usize,
    in_dim: usize,
    w: &[S],
    bias: &[S],
    out: &mut [S],
) {
    let out_dim = bias.len();
    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let or = &mut out[b * out_dim..(b + 1) * out_dim];
        for o in 0..out_dim {
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = S::zero();
            for (a, c) in wr.iter().zip(xr) {
                acc += *a * *c;
            }
            or[o] = acc + bias[o];
        }
    }
}

/// Accumulates weight/bias gradients and, when requested, writes the input gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward<S: Real>(
    x: &[S],
    batch: usize,
    in_dim: usize,
    w: &[S],
    gy: &[S],
    gw: &mut [S],
    gb: &mut [S],
    gx: Option<&mut [S]>,
) {
    let out_dim = gb.len();
    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let gr = &gy[b * out_dim..(b + 1) * out_dim];
        for o in 0..out_dim {
            let g = gr[o];
            if g == S::zero() {
                continue;
            }
            gb[o] += g;
            let gwr = &mut gw[o * in_dim..(o + 1) * in_dim];
            for (d, &xi) in gwr.iter_mut().zip(xr) {
                *d += g * xi;
            }
        }
    }
    if let Some(gx) = gx {
        gx.iter_mut().for_each(|v| *v = S::zero());
        for b in 0..batch {
            let gr = &gy[b * out_dim..(b + 1) * out_dim];
            let gxr = &mut gx[b * in_dim..(b + 1) * in_dim];
            for o in 0..out_dim {
                let g = gr[o];
                if g == S::zero() {
                    continue;
                }
                let wr = &w[o * in_dim..(o + 1) * in_dim];
                for (d, &wi) in gxr.iter_mut().zip(wr) {
                    *d += g * wi;
                }
            }
        }
    }
}

/// Output rows `[lo, hi)` whose 3x3 tap at offset `k` stays inside `0..n`.
#[inline]
fn tap_range(k: usize, n: usize) -> (usize, usize) {
    // input index = out + k - 1
    let lo = if k == 0 { 1 } else { 0 };
    let hi = if k == 2 { n - 1 } else { n };
    (lo, hi)
}

/// 3x3 convolution, stride 1, zero padding 1. `w` is `[cout, cin, 3, 3]`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_forward<S: Real>(
    x: &[S],
    batch: usize,
    cin: usize,
    h: usize,
    w_: usize,
    weight: &[S],
    bias: &[S],
    out: &mut [S],
) {
    let cout = bias.len();
    let plane = h * w_;
    for b in 0..batch {
        for oc in 0..cout {
            let op = &mut out[(b * cout + oc) * plane..(b * cout + oc + 1) * plane];
            op.iter_mut().for_each(|v| *v = bias[oc]);
            for ic in 0..cin {
                let ip = &x[(b * cin + ic) * plane..(b * cin + ic + 1) * plane];
                let k = &weight[(oc * cin + ic) * 9..(oc * cin + ic + 1) * 9];
                for ky in 0..3 {
                    let (y0, y1) = tap_range(ky, h);
                    for kx in 0..3 {
                        let wv = k[ky * 3 + kx];
                        let (x0, x1) = tap_range(kx, w_);
                        for oy in y0..y1 {
                            let iy = oy + ky - 1;
                            let orow = &mut op[oy * w_ + x0..oy * w_ + x1];
                            let irow = &ip[iy * w_ + x0 + kx - 1..iy * w_ + x1 + kx - 1];
                            for (o, &i) in orow.iter_mut().zip(irow) {
                                *o += wv * i;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv3x3_backward<S: Real>(
    x: &[S],
    batch: usize,
    cin: usize,
    h: usize,
    w_: usize,
    weight: &[S],
    gy: &[S],
    gw: &mut [S],
    gb: &mut [S],
    mut gx: Option<&mut [S]>,
) {
    let cout = gb.len();
    let plane = h * w_;
    if let Some(gx) = gx.as_deref_mut() {
        gx.iter_mut().for_each(|v| *v = S::zero());
    }
    for b in 0..batch {
        for oc in 0..cout {
            let gp = &gy[(b * cout + oc) * plane..(b * cout + oc + 1) * plane];
            let mut s = S::zero();
            for &g in gp {
                s += g;
            }
            gb[oc] += s;
            for ic in 0..cin {
                let ip = &x[(b * cin + ic) * plane..(b * cin + ic + 1) * plane];
                let kidx = (oc * cin + ic) * 9;
                for ky in 0..3 {
                    let (y0, y1) = tap_range(ky, h);
                    for kx in 0..3 {
                        let (x0, x1) = tap_range(kx, w_);
                        let mut acc = S::zero();
                        for oy in y0..y1 {
                            let iy = oy + ky - 1;
                            let grow = &gp[oy * w_ + x0..oy * w_ + x1];
                            let irow = &ip[iy * w_ + x0 + kx - 1..iy * w_ + x1 + kx - 1];
                            for (&g, &i) in grow.iter().zip(irow) {
                                acc += g * i;
                            }
                        }
                        gw[kidx + ky * 3 + kx] += acc;
                        if let Some(gx) = gx.as_deref_mut() {
                            let wv = weight[kidx + ky * 3 + kx];
                            let gxp = &mut gx[(b * cin + ic) * plane..(b * cin + ic + 1) * plane];
                            for oy in y0..y1 {
                                let iy = oy + ky - 1;
                                let grow = &gp[oy * w_ + x0..oy * w_ + x1];
                                let xrow =
                                    &mut gxp[iy * w_ + x0 + kx - 1..iy * w_ + x1 + kx - 1];
                                for (d, &g) in xrow.iter_mut().zip(grow) {
                                    *d += wv * g;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// 2x2 max pooling with stride 2. Records the flat input index of each maximum.
pub(crate) fn maxpool2_forward<S: Real>(
    x: &[S],
    planes: usize,
    h: usize,
    w_: usize,
    out: &mut [S],
    argmax: &mut [u32],
) {
    let (oh, ow) = (h / 2, w_ / 2);
    for p in 0..planes {
        let base = p * h * w_;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w_ + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * oy + dy) * w_ + 2 * ox + dx;
                    if x[i] > x[best] {
                        best = i;
                    }
                }
                let o = p * oh * ow + oy * ow + ox;
                out[o] = x[best];
                argmax[o] = best as u32;
            }
        }
    }
}

pub(crate) fn maxpool2_backward<S: Real>(gy: &[S], argmax: &[u32], gx: &mut [S]) {
    gx.iter_mut().for_each(|v| *v = S::zero());
    for (&g, &i) in gy.iter().zip(argmax) {
        gx[i as usize] += g;
    }
}

pub(crate) fn relu_inplace<S: Real>(x: &mut [S]) {
    for v in x {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Zeroes gradient entries where the post-activation output is not positive.
pub(crate) fn relu_backward_inplace<S: Real>(activated: &[S], g: &mut [S]) {
    for (d, &a) in g.iter_mut().zip(activated) {
        if a <= S::zero() {
            *d = S::zero();
        }
    }
}

#[inline]
pub(crate) fn sigmoid<S: Real>(z: S) -> S {
    if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    }
}

/// He-style uniform initialization on `[-sqrt(6/fan_in), sqrt(6/fan_in)]`.
pub(crate) fn he_uniform<S: Real>(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor<S> {
    let bound = libm::sqrt(6.0 / fan_in as f64);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = S::from_f64(rng.gen_range(-bound..bound));
    }
    t
}
