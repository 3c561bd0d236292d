//! Per-sample kernels for the layer set, plus tensor-level wrappers for the
//! two spatial operations.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero padding of `(R - 1) / 2` on every side; output keeps the input size.
    Same,
    /// No padding; output shrinks by `R - 1`.
    Valid,
}

impl Padding {
    pub(crate) fn amount(self, kernel: usize) -> usize {
        match self {
            Padding::Same => (kernel - 1) / 2,
            Padding::Valid => 0,
        }
    }

    pub(crate) fn output_size(self, size: usize, kernel: usize) -> Option<usize> {
        match self {
            Padding::Same => Some(size),
            Padding::Valid => size.checked_sub(kernel - 1).filter(|&s| s > 0),
        }
    }
}

/// Geometry of one convolution, shared by forward and backward passes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub in_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_c: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub pad: usize,
}

impl ConvGeom {
    /// Output rows/cols `[lo, hi)` whose input tap at kernel offset `d` is in range.
    #[inline]
    fn valid_range(&self, d: usize, in_size: usize, out_size: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(d);
        let hi = (in_size + self.pad).saturating_sub(d).min(out_size);
        (lo, hi.max(lo))
    }

    pub fn forward(&self, input: &[f32], weights: &[f32], bias: &[f32], out: &mut [f32]) {
        let (r, plane_in, plane_out) =
            (self.kernel, self.in_h * self.in_w, self.out_h * self.out_w);
        for k in 0..self.out_c {
            let out_k = &mut out[k * plane_out..(k + 1) * plane_out];
            out_k.fill(bias[k]);
            for c in 0..self.in_c {
                let in_c = &input[c * plane_in..(c + 1) * plane_in];
                for dy in 0..r {
                    let (y_lo, y_hi) = self.valid_range(dy, self.in_h, self.out_h);
                    for dx in 0..r {
                        let wv = weights[((k * self.in_c + c) * r + dy) * r + dx];
                        let (x_lo, x_hi) = self.valid_range(dx, self.in_w, self.out_w);
                        let shift = x_lo + dx - self.pad;
                        for y in y_lo..y_hi {
                            let yi = y + dy - self.pad;
                            let src = &in_c
                                [yi * self.in_w + shift..yi * self.in_w + shift + (x_hi - x_lo)];
                            let dst = &mut out_k[y * self.out_w + x_lo..y * self.out_w + x_hi];
                            for (o, &i) in dst.iter_mut().zip(src) {
                                *o += wv * i;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Accumulates weight and bias gradients and, when `d_input` is given,
    /// the gradient with respect to the input.
    pub fn backward(
        &self,
        input: &[f32],
        weights: &[f32],
        d_out: &[f32],
        d_weights: &mut [f32],
        d_bias: &mut [f32],
        mut d_input: Option<&mut [f32]>,
    ) {
        let (r, plane_in, plane_out) =
            (self.kernel, self.in_h * self.in_w, self.out_h * self.out_w);
        for k in 0..self.out_c {
            let g_k = &d_out[k * plane_out..(k + 1) * plane_out];
            d_bias[k] += g_k.iter().sum::<f32>();
            for c in 0..self.in_c {
                let in_c = &input[c * plane_in..(c + 1) * plane_in];
                for dy in 0..r {
                    let (y_lo, y_hi) = self.valid_range(dy, self.in_h, self.out_h);
                    for dx in 0..r {
                        let w_idx = ((k * self.in_c + c) * r + dy) * r + dx;
                        let wv = weights[w_idx];
                        let (x_lo, x_hi) = self.valid_range(dx, self.in_w, self.out_w);
                        let shift = x_lo + dx - self.pad;
                        let width = x_hi - x_lo;
                        let mut acc = 0.0f32;
                        for y in y_lo..y_hi {
                            let yi = y + dy - self.pad;
                            let src_at = c * plane_in + yi * self.in_w + shift;
                            let g = &g_k[y * self.out_w + x_lo..y * self.out_w + x_hi];
                            let src = &in_c[yi * self.in_w + shift..yi * self.in_w + shift + width];
                            acc += g.iter().zip(src).map(|(a, b)| a * b).sum::<f32>();
                            if let Some(d_in) = d_input.as_deref_mut() {
                                for (di, &gv) in d_in[src_at..src_at + width].iter_mut().zip(g) {
                                    *di += wv * gv;
                                }
                            }
                        }
                        d_weights[w_idx] += acc;
                    }
                }
            }
        }
    }
}

/// 2×2 max pooling of a `[c, h, w]` block. Returns the input index that won
/// each window; ties go to the first element in row-major order.
pub(crate) fn maxpool_forward(
    input: &[f32],
    c: usize,
    h: usize,
    w: usize,
    out: &mut [f32],
    argmax: &mut [usize],
) {
    let (oh, ow) = (h / 2, w / 2);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let base = ch * h * w + 2 * y * w + 2 * x;
                let mut best = base;
                for idx in [base + 1, base + w, base + w + 1] {
                    if input[idx] > input[best] {
                        best = idx;
                    }
                }
                let o = ch * oh * ow + y * ow + x;
                out[o] = input[best];
                argmax[o] = best;
            }
        }
    }
}

pub(crate) fn dense_forward(input: &[f32], weights: &[f32], bias: &[f32], out: &mut [f32]) {
    let n_in = input.len();
    for (o, (row, b)) in out.iter_mut().zip(weights.chunks_exact(n_in).zip(bias)) {
        *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f32>();
    }
}

pub(crate) fn dense_backward(
    input: &[f32],
    weights: &[f32],
    d_out: &[f32],
    d_weights: &mut [f32],
    d_bias: &mut [f32],
    d_input: Option<&mut [f32]>,
) {
    let n_in = input.len();
    for ((&g, row), db) in d_out
        .iter()
        .zip(d_weights.chunks_exact_mut(n_in))
        .zip(d_bias.iter_mut())
    {
        *db += g;
        for (dw, &x) in row.iter_mut().zip(input) {
            *dw += g * x;
        }
    }
    if let Some(d_in) = d_input {
        for (&g, row) in d_out.iter().zip(weights.chunks_exact(n_in)) {
            for (di, &w) in d_in.iter_mut().zip(row) {
                *di += g * w;
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `-ln softmax(logits)[class]`, computed through log-sum-exp.
pub(crate) fn cross_entropy(logits: &[f32], class: usize) -> f32 {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f32>().ln();
    lse - logits[class]
}

fn expect_chw(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [c, h, w] => Ok((c, h, w)),
        ref s => Err(Error::Config(format!(
            "{what} expects a [C,H,W] tensor, got {s:?}"
        ))),
    }
}

/// Single-image 2-D convolution (cross-correlation, as in every CNN library).
pub fn conv2d(input: &Tensor, weights: &Tensor, bias: &Tensor, padding: Padding) -> Result<Tensor> {
    let (c, h, w) = expect_chw(input, "conv2d")?;
    let (k, wc, r) = match *weights.shape() {
        [k, wc, r1, r2] if r1 == r2 => (k, wc, r1),
        ref s => {
            return Err(Error::Config(format!(
                "conv2d weights must be [K,C,R,R], got {s:?}"
            )))
        }
    };
    if wc != c {
        return Err(Error::Config(format!(
            "conv2d weights expect {wc} channels, input has {c}"
        )));
    }
    if r % 2 == 0 {
        return Err(Error::Config(format!("conv2d kernel size {r} must be odd")));
    }
    if bias.shape() != [k] {
        return Err(Error::Config(format!(
            "conv2d bias must be [{k}], got {:?}",
            bias.shape()
        )));
    }
    let (out_h, out_w) = match (padding.output_size(h, r), padding.output_size(w, r)) {
        (Some(oh), Some(ow)) => (oh, ow),
        _ => {
            return Err(Error::Config(format!(
                "kernel {r} does not fit a {h}x{w} input"
            )))
        }
    };
    let geom = ConvGeom {
        in_c: c,
        in_h: h,
        in_w: w,
        out_c: k,
        out_h,
        out_w,
        kernel: r,
        pad: padding.amount(r),
    };
    let mut out = vec![0.0; k * out_h * out_w];
    geom.forward(input.data(), weights.data(), bias.data(), &mut out);
    Tensor::new(vec![k, out_h, out_w], out)
}

pub fn maxpool2x2(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = expect_chw(input, "maxpool2x2")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Config(format!(
            "maxpool2x2 needs even height and width, got {h}x{w}"
        )));
    }
    let mut out = vec![0.0; c * h * w / 4];
    let mut argmax = vec![0; out.len()];
    maxpool_forward(input.data(), c, h, w, &mut out, &mut argmax);
    Tensor::new(vec![c, h / 2, w / 2], out)
}
