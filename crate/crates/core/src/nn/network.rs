use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{self, ConvGeom, Padding};
use super::Tensor;
use crate::seed::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv2d {
        out_channels: usize,
        kernel_size: usize,
        padding: Padding,
    },
    Maxpool2x2,
    Relu,
    Dropout {
        rate: f32,
    },
    Flatten,
    Dense {
        out_features: usize,
    },
    Softmax,
}

impl LayerSpec {
    fn conv3(out_channels: usize) -> Self {
        LayerSpec::Conv2d {
            out_channels,
            kernel_size: 3,
            padding: Padding::Same,
        }
    }

    /// Twelve counted layers (flatten and the softmax head are not counted):
    /// conv3x3(16) relu conv3x3(16) relu pool, conv3x3(32) relu pool,
    /// dense(128) relu dropout dense(2).
    pub fn reference_architecture(dropout: f32) -> Vec<LayerSpec> {
        use LayerSpec::*;
        vec![
            Self::conv3(16),
            Relu,
            Self::conv3(16),
            Relu,
            Maxpool2x2,
            Self::conv3(32),
            Relu,
            Maxpool2x2,
            Flatten,
            Dense { out_features: 128 },
            Relu,
            Dropout { rate: dropout },
            Dense { out_features: 2 },
            Softmax,
        ]
    }

    /// Same layer pattern with far fewer filters, sized for small patches and
    /// single-core experiments.
    pub fn compact_architecture(dropout: f32) -> Vec<LayerSpec> {
        use LayerSpec::*;
        vec![
            Self::conv3(4),
            Relu,
            Maxpool2x2,
            Self::conv3(8),
            Relu,
            Maxpool2x2,
            Flatten,
            Dense { out_features: 16 },
            Relu,
            Dropout { rate: dropout },
            Dense { out_features: 2 },
            Softmax,
        ]
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: String| Err(Error::Config(format!("{self:?} on input {input:?}: {why}")));
        match (*self, input) {
            (
                LayerSpec::Conv2d {
                    out_channels,
                    kernel_size,
                    padding,
                },
                &[_, h, w],
            ) => {
                if out_channels == 0 || kernel_size % 2 == 0 {
                    return bad("kernel size must be odd and out_channels positive".into());
                }
                match (
                    padding.output_size(h, kernel_size),
                    padding.output_size(w, kernel_size),
                ) {
                    (Some(oh), Some(ow)) => Ok(vec![out_channels, oh, ow]),
                    _ => bad("kernel larger than input".into()),
                }
            }
            (LayerSpec::Maxpool2x2, &[c, h, w]) => {
                if h % 2 != 0 || w % 2 != 0 {
                    bad("height and width must be even".into())
                } else {
                    Ok(vec![c, h / 2, w / 2])
                }
            }
            (LayerSpec::Conv2d { .. } | LayerSpec::Maxpool2x2, _) => {
                bad("expects a [C,H,W] input".into())
            }
            (LayerSpec::Relu, s) => Ok(s.to_vec()),
            (LayerSpec::Dropout { rate }, s) => {
                if (0.0..1.0).contains(&rate) {
                    Ok(s.to_vec())
                } else {
                    bad("dropout rate must lie in [0, 1)".into())
                }
            }
            (LayerSpec::Flatten, s) => Ok(vec![s.iter().product()]),
            (LayerSpec::Dense { out_features }, &[_]) if out_features > 0 => Ok(vec![out_features]),
            (LayerSpec::Dense { .. }, _) => {
                bad("expects a flat input and positive out_features".into())
            }
            (LayerSpec::Softmax, &[2]) => Ok(vec![2]),
            (LayerSpec::Softmax, _) => bad("softmax must see exactly 2 logits".into()),
        }
    }

    /// Weight and bias shapes for parameterised layers.
    fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d {
                out_channels,
                kernel_size,
                ..
            } => Some((
                vec![out_channels, input[0], kernel_size, kernel_size],
                vec![out_channels],
            )),
            LayerSpec::Dense { out_features } => {
                Some((vec![out_features, input[0]], vec![out_features]))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Parameter gradients, aligned with [`Network::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn tensors(&self) -> &[Tensor] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: [usize; 3],
    layers: Vec<LayerSpec>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output shape.
    shapes: Vec<Vec<usize>>,
    /// Weight tensor index into `params` for each layer, if it has parameters.
    slots: Vec<Option<usize>>,
    params: Vec<Tensor>,
    init_seed: u64,
}

enum Aux {
    None,
    Argmax(Vec<usize>),
    Mask(Vec<f32>),
}

#[derive(Default)]
struct Trace {
    inputs: Vec<Vec<f32>>,
    aux: Vec<Aux>,
}

impl Network {
    /// Builds a network and draws He-normal weights (std `sqrt(2 / fan_in)`)
    /// from `init_seed`; biases start at zero.
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>, init_seed: u64) -> Result<Self> {
        let (shapes, slots, shapes_of_params) = Self::plan(input_shape, &layers)?;
        let mut rng = seed::rng(init_seed);
        let params = shapes_of_params
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                if i % 2 == 1 {
                    return Tensor::zeros(shape);
                }
                let fan_in: usize = shape[1..].iter().product();
                let normal =
                    Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("positive std");
                let n = shape.iter().product();
                let data = (0..n).map(|_| normal.sample(&mut rng)).collect();
                Tensor::new(shape, data).expect("shape and data agree")
            })
            .collect();
        Ok(Network {
            input_shape,
            layers,
            shapes,
            slots,
            params,
            init_seed,
        })
    }

    /// Reassembles a network from stored parameters, checking every shape.
    pub fn from_parts(
        input_shape: [usize; 3],
        layers: Vec<LayerSpec>,
        init_seed: u64,
        params: Vec<Tensor>,
    ) -> Result<Self> {
        let (shapes, slots, expected) = Self::plan(input_shape, &layers)?;
        if expected.len() != params.len() {
            return Err(Error::Config(format!(
                "layer stack needs {} parameter tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for (want, got) in expected.iter().zip(&params) {
            if want.as_slice() != got.shape() {
                return Err(Error::Config(format!(
                    "parameter shape {:?} does not match {want:?}",
                    got.shape()
                )));
            }
        }
        Ok(Network {
            input_shape,
            layers,
            shapes,
            slots,
            params,
            init_seed,
        })
    }

    #[allow(clippy::type_complexity)]
    fn plan(
        input_shape: [usize; 3],
        layers: &[LayerSpec],
    ) -> Result<(Vec<Vec<usize>>, Vec<Option<usize>>, Vec<Vec<usize>>)> {
        if input_shape.contains(&0) {
            return Err(Error::Config(format!(
                "input shape {input_shape:?} has a zero dimension"
            )));
        }
        match layers.iter().position(|l| *l == LayerSpec::Softmax) {
            Some(i) if i + 1 == layers.len() => {}
            _ => {
                return Err(Error::Config(
                    "the layer stack must end in its only softmax".into(),
                ))
            }
        }
        let mut shapes = vec![input_shape.to_vec()];
        let mut slots = Vec::with_capacity(layers.len());
        let mut param_shapes = Vec::new();
        for layer in layers {
            let input = shapes.last().expect("non-empty");
            let out = layer.output_shape(input)?;
            match layer.param_shapes(input) {
                Some((w, b)) => {
                    slots.push(Some(param_shapes.len()));
                    param_shapes.push(w);
                    param_shapes.push(b);
                }
                None => slots.push(None),
            }
            shapes.push(out);
        }
        Ok((shapes, slots, param_shapes))
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    /// Weight and bias tensors of every parameterised layer, in layer order.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Sets the rate of every dropout layer.
    pub fn with_dropout_rate(mut self, rate: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        for layer in &mut self.layers {
            if let LayerSpec::Dropout { rate: r } = layer {
                *r = rate;
            }
        }
        Ok(self)
    }

    fn has_active_dropout(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate > 0.0))
    }

    fn sample_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        match batch.shape() {
            [n, c, h, w] if [*c, *h, *w] == self.input_shape => Ok(*n),
            s => Err(Error::Config(format!(
                "batch shape {s:?} does not match network input [N, {}, {}, {}]",
                self.input_shape[0], self.input_shape[1], self.input_shape[2]
            ))),
        }
    }

    /// Runs every layer except the softmax head and returns the logits.
    fn logits(
        &self,
        x: &[f32],
        mut rng: Option<&mut Rng>,
        mut trace: Option<&mut Trace>,
    ) -> Vec<f32> {
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers[..last].iter().enumerate() {
            let in_shape = &self.shapes[i];
            let out_len: usize = self.shapes[i + 1].iter().product();
            let mut aux = Aux::None;
            let next = match *layer {
                LayerSpec::Conv2d {
                    kernel_size,
                    padding,
                    ..
                } => {
                    let slot = self.slots[i].expect("conv has params");
                    let geom = self.conv_geom(i, kernel_size, padding);
                    let mut out = vec![0.0; out_len];
                    geom.forward(
                        &cur,
                        self.params[slot].data(),
                        self.params[slot + 1].data(),
                        &mut out,
                    );
                    out
                }
                LayerSpec::Maxpool2x2 => {
                    let mut out = vec![0.0; out_len];
                    let mut argmax = vec![0; out_len];
                    layers::maxpool_forward(
                        &cur,
                        in_shape[0],
                        in_shape[1],
                        in_shape[2],
                        &mut out,
                        &mut argmax,
                    );
                    aux = Aux::Argmax(argmax);
                    out
                }
                LayerSpec::Relu => cur.iter().map(|&v| v.max(0.0)).collect(),
                LayerSpec::Dropout { rate } => match rng.as_deref_mut() {
                    Some(rng) if rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f32> = (0..cur.len())
                            .map(|_| if rng.gen::<f32>() < rate { 0.0 } else { keep })
                            .collect();
                        let out = cur.iter().zip(&mask).map(|(v, m)| v * m).collect();
                        aux = Aux::Mask(mask);
                        out
                    }
                    _ => cur.clone(),
                },
                LayerSpec::Flatten => cur.clone(),
                LayerSpec::Dense { .. } => {
                    let slot = self.slots[i].expect("dense has params");
                    let mut out = vec![0.0; out_len];
                    layers::dense_forward(
                        &cur,
                        self.params[slot].data(),
                        self.params[slot + 1].data(),
                        &mut out,
                    );
                    out
                }
                LayerSpec::Softmax => unreachable!("softmax is always last"),
            };
            if let Some(t) = trace.as_deref_mut() {
                t.inputs.push(std::mem::replace(&mut cur, next));
                t.aux.push(aux);
            } else {
                cur = next;
            }
        }
        cur
    }

    fn conv_geom(&self, layer: usize, kernel: usize, padding: Padding) -> ConvGeom {
        let (i, o) = (&self.shapes[layer], &self.shapes[layer + 1]);
        ConvGeom {
            in_c: i[0],
            in_h: i[1],
            in_w: i[2],
            out_c: o[0],
            out_h: o[1],
            out_w: o[2],
            kernel,
            pad: padding.amount(kernel),
        }
    }

    fn backward(&self, trace: &Trace, d_logits: Vec<f32>, grads: &mut [Tensor]) {
        let mut d_out = d_logits;
        for i in (0..self.layers.len() - 1).rev() {
            let input = &trace.inputs[i];
            let need_input = i > 0;
            let d_in = match self.layers[i] {
                LayerSpec::Conv2d {
                    kernel_size,
                    padding,
                    ..
                } => {
                    let slot = self.slots[i].expect("conv has params");
                    let geom = self.conv_geom(i, kernel_size, padding);
                    let mut d_in = vec![0.0; if need_input { input.len() } else { 0 }];
                    let [gw, gb] = &mut grads[slot..slot + 2] else {
                        unreachable!()
                    };
                    geom.backward(
                        input,
                        self.params[slot].data(),
                        &d_out,
                        gw.data_mut(),
                        gb.data_mut(),
                        need_input.then_some(d_in.as_mut_slice()),
                    );
                    d_in
                }
                LayerSpec::Dense { .. } => {
                    let slot = self.slots[i].expect("dense has params");
                    let mut d_in = vec![0.0; if need_input { input.len() } else { 0 }];
                    let [gw, gb] = &mut grads[slot..slot + 2] else {
                        unreachable!()
                    };
                    layers::dense_backward(
                        input,
                        self.params[slot].data(),
                        &d_out,
                        gw.data_mut(),
                        gb.data_mut(),
                        need_input.then_some(d_in.as_mut_slice()),
                    );
                    d_in
                }
                LayerSpec::Maxpool2x2 => {
                    let Aux::Argmax(argmax) = &trace.aux[i] else {
                        unreachable!()
                    };
                    let mut d_in = vec![0.0; input.len()];
                    for (&src, &g) in argmax.iter().zip(&d_out) {
                        d_in[src] += g;
                    }
                    d_in
                }
                LayerSpec::Relu => input
                    .iter()
                    .zip(&d_out)
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect(),
                LayerSpec::Dropout { .. } => match &trace.aux[i] {
                    Aux::Mask(mask) => d_out.iter().zip(mask).map(|(g, m)| g * m).collect(),
                    _ => d_out,
                },
                LayerSpec::Flatten => d_out,
                LayerSpec::Softmax => unreachable!("softmax is always last"),
            };
            d_out = d_in;
        }
    }

    /// Class probabilities `[N, 2]`. Dropout is active only in train mode
    /// (inverted dropout, so inference needs no rescaling); train mode with an
    /// active dropout layer requires `rng`.
    pub fn forward(&self, batch: &Tensor, mode: Mode, mut rng: Option<&mut Rng>) -> Result<Tensor> {
        let n = self.check_batch(batch)?;
        if mode == Mode::Train && rng.is_none() && self.has_active_dropout() {
            return Err(Error::Config(
                "train-mode forward with dropout needs an rng".into(),
            ));
        }
        let len = self.sample_len();
        let mut out = Vec::with_capacity(2 * n);
        for x in batch.data().chunks_exact(len) {
            let r = match mode {
                Mode::Train => rng.as_deref_mut(),
                Mode::Infer => None,
            };
            out.extend(layers::softmax(&self.logits(x, r, None)));
        }
        Tensor::new(vec![n, 2], out)
    }

    /// Class-1 probability of a single `[C, H, W]` sample in infer mode.
    pub fn predict_one(&self, pixels: &[f32]) -> Result<f32> {
        if pixels.len() != self.sample_len() {
            return Err(Error::Config(format!(
                "sample has {} values, network expects {}",
                pixels.len(),
                self.sample_len()
            )));
        }
        Ok(layers::softmax(&self.logits(pixels, None, None))[1])
    }

    /// Mean cross-entropy in infer mode.
    pub fn mean_loss(&self, batch: &Tensor, labels: &[usize]) -> Result<f32> {
        let n = self.check_labels(batch, labels)?;
        let total: f32 = batch
            .data()
            .chunks_exact(self.sample_len())
            .zip(labels)
            .map(|(x, &y)| layers::cross_entropy(&self.logits(x, None, None), y))
            .sum();
        Ok(total / n as f32)
    }

    fn check_labels(&self, batch: &Tensor, labels: &[usize]) -> Result<usize> {
        let n = self.check_batch(batch)?;
        if labels.len() != n {
            return Err(Error::Data(format!(
                "{} labels for a batch of {n}",
                labels.len()
            )));
        }
        if n == 0 {
            return Err(Error::Data("empty batch".into()));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Data(format!("label {bad} is not 0 or 1")));
        }
        Ok(n)
    }

    /// Mean cross-entropy over the batch (train mode) and its gradient with
    /// respect to every parameter.
    pub fn loss_and_grads(
        &self,
        batch: &Tensor,
        labels: &[usize],
        rng: &mut Rng,
    ) -> Result<(f32, Gradients)> {
        let n = self.check_labels(batch, labels)?;
        let mut grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|p| Tensor::zeros(p.shape().to_vec()))
            .collect();
        let scale = 1.0 / n as f32;
        let mut total = 0.0f32;
        for (x, &y) in batch.data().chunks_exact(self.sample_len()).zip(labels) {
            let mut trace = Trace::default();
            let logits = self.logits(x, Some(rng), Some(&mut trace));
            total += layers::cross_entropy(&logits, y);
            let mut d = layers::softmax(&logits);
            d[y] -= 1.0;
            d.iter_mut().for_each(|v| *v *= scale);
            self.backward(&trace, d, &mut grads);
        }
        Ok((total * scale, Gradients(grads)))
    }

    /// `param -= learning_rate * grad`, elementwise.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f32) -> Result<()> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {learning_rate} must be finite and non-negative"
            )));
        }
        if grads.0.len() != self.params.len()
            || grads
                .0
                .iter()
                .zip(&self.params)
                .any(|(g, p)| g.shape() != p.shape())
        {
            return Err(Error::Config(
                "gradient shapes do not match parameters".into(),
            ));
        }
        if !grads.0.iter().all(Tensor::is_finite) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                *pv -= learning_rate * gv;
            }
        }
        Ok(())
    }
}
