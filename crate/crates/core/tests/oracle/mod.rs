//! Independent f64 reference implementation of the network forward pass and
//! loss, used as a finite-difference gradient oracle. Shares nothing with the
//! library's kernels beyond reading layer specs and parameter values.

#![allow(dead_code, clippy::needless_range_loop)]

use cascade_core::nn::{LayerSpec, Network, Padding};

/// Which branch every kink (ReLU sign, max-pool winner) took.
pub type KinkPattern = Vec<usize>;

pub struct Reference {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub params: Vec<Vec<f64>>,
}

impl Reference {
    pub fn from_network(net: &Network) -> Self {
        Reference {
            input_shape: net.input_shape(),
            layers: net.layers().to_vec(),
            params: net
                .params()
                .iter()
                .map(|t| t.data().iter().map(|&v| v as f64).collect())
                .collect(),
        }
    }

    /// Mean cross-entropy over the samples, plus the kink pattern.
    pub fn loss(&self, samples: &[Vec<f64>], labels: &[usize]) -> (f64, KinkPattern) {
        let mut kinks = Vec::new();
        let mut total = 0.0;
        for (x, &y) in samples.iter().zip(labels) {
            let logits = self.logits(x, &mut kinks);
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
            total += lse - logits[y];
        }
        (total / samples.len() as f64, kinks)
    }

    fn logits(&self, x: &[f64], kinks: &mut KinkPattern) -> Vec<f64> {
        let [mut c, mut h, mut w] = self.input_shape;
        let mut cur = x.to_vec();
        let mut slot = 0;
        for layer in &self.layers {
            match *layer {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel_size: r,
                    padding,
                } => {
                    let pad = match padding {
                        Padding::Same => (r - 1) / 2,
                        Padding::Valid => 0,
                    } as isize;
                    let (oh, ow) = (h + 2 * pad as usize - r + 1, w + 2 * pad as usize - r + 1);
                    let (wt, b) = (&self.params[slot], &self.params[slot + 1]);
                    slot += 2;
                    let mut out = vec![0.0; out_channels * oh * ow];
                    for k in 0..out_channels {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let mut s = b[k];
                                for ch in 0..c {
                                    for dy in 0..r {
                                        for dx in 0..r {
                                            let iy = y as isize + dy as isize - pad;
                                            let ix = xx as isize + dx as isize - pad;
                                            if iy >= 0
                                                && ix >= 0
                                                && (iy as usize) < h
                                                && (ix as usize) < w
                                            {
                                                s += cur
                                                    [ch * h * w + iy as usize * w + ix as usize]
                                                    * wt[((k * c + ch) * r + dy) * r + dx];
                                            }
                                        }
                                    }
                                }
                                out[k * oh * ow + y * ow + xx] = s;
                            }
                        }
                    }
                    cur = out;
                    (c, h, w) = (out_channels, oh, ow);
                }
                LayerSpec::Maxpool2x2 => {
                    let mut out = Vec::new();
                    for ch in 0..c {
                        for y in 0..h / 2 {
                            for xx in 0..w / 2 {
                                let cands = [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(dy, dx)| {
                                    cur[ch * h * w + (2 * y + dy) * w + 2 * xx + dx]
                                });
                                let mut best = 0;
                                for i in 1..4 {
                                    if cands[i] > cands[best] {
                                        best = i;
                                    }
                                }
                                kinks.push(best);
                                out.push(cands[best]);
                            }
                        }
                    }
                    cur = out;
                    (h, w) = (h / 2, w / 2);
                }
                LayerSpec::Relu => {
                    for v in &mut cur {
                        kinks.push((*v > 0.0) as usize);
                        *v = v.max(0.0);
                    }
                }
                LayerSpec::Dropout { .. } => {}
                LayerSpec::Flatten => {
                    (c, h, w) = (cur.len(), 1, 1);
                }
                LayerSpec::Dense { out_features } => {
                    let (wt, b) = (&self.params[slot], &self.params[slot + 1]);
                    slot += 2;
                    let n_in = cur.len();
                    cur = (0..out_features)
                        .map(|o| b[o] + (0..n_in).map(|i| wt[o * n_in + i] * cur[i]).sum::<f64>())
                        .collect();
                    (c, h, w) = (out_features, 1, 1);
                }
                LayerSpec::Softmax => {}
            }
        }
        cur
    }
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose ±h perturbation crossed a ReLU or max-pool kink.
    pub skipped_at_kinks: usize,
}

/// Relative error with the denominator floored, so that gradients that are
/// zero up to float noise compare on an absolute scale.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares analytic gradients against central differences of the f64
/// reference loss with step `h`.
pub fn check_gradients(
    net: &Network,
    samples: &[Vec<f64>],
    labels: &[usize],
    analytic: &[Vec<f32>],
    h: f64,
) -> GradCheck {
    let mut reference = Reference::from_network(net);
    let (_, base_kinks) = reference.loss(samples, labels);
    let mut out = GradCheck {
        max_rel_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    for t in 0..reference.params.len() {
        for i in 0..reference.params[t].len() {
            let orig = reference.params[t][i];
            reference.params[t][i] = orig + h;
            let (plus, k_plus) = reference.loss(samples, labels);
            reference.params[t][i] = orig - h;
            let (minus, k_minus) = reference.loss(samples, labels);
            reference.params[t][i] = orig;
            if k_plus != base_kinks || k_minus != base_kinks {
                out.skipped_at_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let err = rel_error(analytic[t][i] as f64, numeric);
            out.max_rel_error = out.max_rel_error.max(err);
            out.checked += 1;
        }
    }
    out
}
