//! Tiny convolutional classifier over MFE spectrograms.
//!
//! The network is specified as an ordered layer list (valid-mode Conv2d,
//! ReLU, non-overlapping MaxPool2d, Flatten, Dense, Softmax) over a
//! `1 x n_frames x n_mels` input. Everything runs in double precision;
//! forward, backward and training are deterministic given the seed.

mod tensor;
mod train;
mod persist;

pub use persist::{format_hex_f64, parse_hex_f64, TrainedModel};
pub use tensor::Tensor;
pub use train::{
    normalization_stats, spectrogram_tensor, train, EpochStats, Normalization, TrainConfig,
};

use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Classification outcome. The wire and log encodings use index 0 for
/// a normal close and 1 for a slam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Slam,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Normal => 0,
            Label::Slam => 1,
        }
    }

    pub fn from_index(index: usize) -> Result<Label> {
        match index {
            0 => Ok(Label::Normal),
            1 => Ok(Label::Slam),
            _ => Err(Error::invalid(format!("label index {index} out of range"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Slam => "slam",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Label> {
        match s {
            "normal" => Ok(Label::Normal),
            "slam" => Ok(Label::Slam),
            other => Err(Error::invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// One network layer. Convolutions are stride 1 with no padding; pooling is
/// non-overlapping with trailing remainders dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv2d { out_channels: usize, kernel_h: usize, kernel_w: usize },
    Relu,
    MaxPool2d { pool_h: usize, pool_w: usize },
    Flatten,
    Dense { out_features: usize },
    Softmax,
}

/// Network topology for a fixed input of shape `1 x input_h x input_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_h: usize,
    pub input_w: usize,
    pub layers: Vec<Layer>,
}

impl ModelSpec {
    /// Default architecture: two conv/pool blocks into a two-way softmax.
    pub fn default_for_input(input_h: usize, input_w: usize) -> ModelSpec {
        ModelSpec {
            input_h,
            input_w,
            layers: vec![
                Layer::Conv2d { out_channels: 8, kernel_h: 3, kernel_w: 3 },
                Layer::Relu,
                Layer::MaxPool2d { pool_h: 2, pool_w: 2 },
                Layer::Conv2d { out_channels: 16, kernel_h: 3, kernel_w: 3 },
                Layer::Relu,
                Layer::MaxPool2d { pool_h: 2, pool_w: 2 },
                Layer::Flatten,
                Layer::Dense { out_features: 2 },
                Layer::Softmax,
            ],
        }
    }

    /// Shape of the data entering each layer, plus the final output shape.
    /// Fails when any layer cannot accept what the previous one produces.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_h == 0 || self.input_w == 0 {
            return Err(Error::invalid("input dimensions must be positive"));
        }
        let mut shapes = vec![vec![1, self.input_h, self.input_w]];
        for (i, layer) in self.layers.iter().enumerate() {
            let prev = shapes.last().unwrap().clone();
            let bad = |msg: String| Error::invalid(format!("layer {i}: {msg}"));
            let next = match *layer {
                Layer::Conv2d { out_channels, kernel_h, kernel_w } => {
                    if out_channels == 0 || kernel_h == 0 || kernel_w == 0 {
                        return Err(bad("conv dimensions must be positive".into()));
                    }
                    match prev[..] {
                        [_, h, w] if h >= kernel_h && w >= kernel_w => {
                            vec![out_channels, h - kernel_h + 1, w - kernel_w + 1]
                        }
                        _ => return Err(bad(format!("conv cannot accept input {prev:?}"))),
                    }
                }
                Layer::Relu => prev,
                Layer::MaxPool2d { pool_h, pool_w } => {
                    if pool_h == 0 || pool_w == 0 {
                        return Err(bad("pool dimensions must be positive".into()));
                    }
                    match prev[..] {
                        [c, h, w] if h >= pool_h && w >= pool_w => {
                            vec![c, h / pool_h, w / pool_w]
                        }
                        _ => return Err(bad(format!("pool cannot accept input {prev:?}"))),
                    }
                }
                Layer::Flatten => match prev[..] {
                    [c, h, w] => vec![c * h * w],
                    _ => return Err(bad(format!("flatten cannot accept input {prev:?}"))),
                },
                Layer::Dense { out_features } => {
                    if out_features == 0 {
                        return Err(bad("dense width must be positive".into()));
                    }
                    match prev[..] {
                        [_] => vec![out_features],
                        _ => return Err(bad(format!("dense needs a flat input, got {prev:?}"))),
                    }
                }
                Layer::Softmax => match prev[..] {
                    [_] => prev,
                    _ => return Err(bad(format!("softmax needs a flat input, got {prev:?}"))),
                },
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_shapes().map(|_| ())
    }

    /// Additionally require the classifier tail: Dense{2} then Softmax.
    pub fn validate_classifier(&self) -> Result<()> {
        self.validate()?;
        let n = self.layers.len();
        let tail_ok = n >= 2
            && matches!(self.layers[n - 2], Layer::Dense { out_features: 2 })
            && matches!(self.layers[n - 1], Layer::Softmax);
        if tail_ok {
            Ok(())
        } else {
            Err(Error::invalid("classifier must end with Dense{2} then Softmax"))
        }
    }
}

/// Kernel and bias of one parameterized layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub kernel: Tensor,
    pub bias: Tensor,
}

/// Learned parameters, aligned with the model's layer list (`None` for
/// layers without parameters). The same structure carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub layers: Vec<Option<LayerParams>>,
}

impl Weights {
    pub fn zeros_like(&self) -> Weights {
        Weights {
            layers: self
                .layers
                .iter()
                .map(|p| {
                    p.as_ref().map(|p| LayerParams {
                        kernel: Tensor::zeros(&p.kernel.shape),
                        bias: Tensor::zeros(&p.bias.shape),
                    })
                })
                .collect(),
        }
    }

    /// self += scale * other, elementwise over every parameter.
    pub fn add_scaled(&mut self, scale: f64, other: &Weights) {
        for (mine, theirs) in self.layers.iter_mut().zip(other.layers.iter()) {
            if let (Some(m), Some(t)) = (mine.as_mut(), theirs.as_ref()) {
                for (a, b) in m.kernel.values.iter_mut().zip(t.kernel.values.iter()) {
                    *a += scale * b;
                }
                for (a, b) in m.bias.values.iter_mut().zip(t.bias.values.iter()) {
                    *a += scale * b;
                }
            }
        }
    }

    /// Shapes expected for `spec`; used to validate loaded weights.
    fn matches(&self, spec: &ModelSpec) -> Result<()> {
        let shapes = spec.layer_shapes()?;
        if self.layers.len() != spec.layers.len() {
            return Err(Error::invalid("weights do not align with the layer list"));
        }
        for (i, layer) in spec.layers.iter().enumerate() {
            let expected = expected_param_shapes(layer, &shapes[i]);
            match (&self.layers[i], expected) {
                (None, None) => {}
                (Some(p), Some((k_shape, b_shape))) => {
                    if p.kernel.shape != k_shape || p.bias.shape != b_shape {
                        return Err(Error::invalid(format!(
                            "layer {i} parameter shapes {:?}/{:?} do not match spec {:?}/{:?}",
                            p.kernel.shape, p.bias.shape, k_shape, b_shape
                        )));
                    }
                }
                _ => return Err(Error::invalid(format!("layer {i} parameter presence mismatch"))),
            }
        }
        Ok(())
    }
}

fn expected_param_shapes(layer: &Layer, input_shape: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    match *layer {
        Layer::Conv2d { out_channels, kernel_h, kernel_w } => {
            let in_c = input_shape[0];
            Some((vec![out_channels, in_c, kernel_h, kernel_w], vec![out_channels]))
        }
        Layer::Dense { out_features } => {
            let in_f = input_shape[0];
            Some((vec![out_features, in_f], vec![out_features]))
        }
        _ => None,
    }
}

/// Deterministic uniform initialization: kernels in [-b, b] with
/// b = sqrt(6 / (fan_in + fan_out)), biases zero.
pub fn init_weights(spec: &ModelSpec, seed: u64) -> Result<Weights> {
    let shapes = spec.layer_shapes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (layer, input_shape) in spec.layers.iter().zip(shapes.iter()) {
        let params = expected_param_shapes(layer, input_shape).map(|(k_shape, b_shape)| {
            let (fan_in, fan_out) = match *layer {
                Layer::Conv2d { out_channels, kernel_h, kernel_w } => {
                    let in_c = input_shape[0];
                    (in_c * kernel_h * kernel_w, out_channels * kernel_h * kernel_w)
                }
                Layer::Dense { out_features } => (input_shape[0], out_features),
                _ => unreachable!(),
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let n: usize = k_shape.iter().product();
            let values = (0..n)
                .map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound)
                .collect();
            LayerParams {
                kernel: Tensor { shape: k_shape, values },
                bias: Tensor::zeros(&b_shape),
            }
        });
        layers.push(params);
    }
    Ok(Weights { layers })
}

/// Per-layer activations from a forward pass. `activations[0]` is the
/// network input and `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.activations.last().unwrap()
    }
}

/// Run the network. The input must have shape `[1, input_h, input_w]`.
pub fn forward(spec: &ModelSpec, weights: &Weights, input: &Tensor) -> Result<ForwardPass> {
    spec.validate()?;
    weights.matches(spec)?;
    if input.shape != [1, spec.input_h, spec.input_w] {
        return Err(Error::invalid(format!(
            "input shape {:?} does not match spec [1, {}, {}]",
            input.shape, spec.input_h, spec.input_w
        )));
    }

    let mut activations = Vec::with_capacity(spec.layers.len() + 1);
    activations.push(input.clone());
    for (layer, params) in spec.layers.iter().zip(weights.layers.iter()) {
        let out = {
            let x = activations.last().unwrap();
            match *layer {
                Layer::Conv2d { .. } => {
                    let p = params.as_ref().unwrap();
                    conv_forward(x, &p.kernel, &p.bias)
                }
                Layer::Relu => relu_forward(x),
                Layer::MaxPool2d { pool_h, pool_w } => pool_forward(x, pool_h, pool_w),
                Layer::Flatten => Tensor {
                    shape: vec![x.len()],
                    values: x.values.clone(),
                },
                Layer::Dense { .. } => {
                    let p = params.as_ref().unwrap();
                    dense_forward(x, &p.kernel, &p.bias)
                }
                Layer::Softmax => softmax_forward(x),
            }
        };
        activations.push(out);
    }
    Ok(ForwardPass { activations })
}

/// Cross-entropy against a hard label: -ln(max(p[label], 1e-12)).
pub fn cross_entropy(probabilities: &[f64], label: usize) -> Result<f64> {
    if label >= probabilities.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            probabilities.len()
        )));
    }
    Ok(-probabilities[label].max(1e-12).ln())
}

/// Gradient of the cross-entropy loss with respect to every weight.
pub fn backward(spec: &ModelSpec, weights: &Weights, input: &Tensor, label: Label) -> Result<Weights> {
    forward_backward(spec, weights, input, label).map(|r| r.gradients)
}

pub(crate) struct BackwardResult {
    pub loss: f64,
    pub probabilities: Vec<f64>,
    pub gradients: Weights,
}

pub(crate) fn forward_backward(
    spec: &ModelSpec,
    weights: &Weights,
    input: &Tensor,
    label: Label,
) -> Result<BackwardResult> {
    let pass = forward(spec, weights, input)?;
    let probabilities = pass.output().values.clone();
    let loss = cross_entropy(&probabilities, label.index())?;

    if !matches!(spec.layers.last(), Some(Layer::Softmax)) {
        return Err(Error::invalid("backward requires a softmax output layer"));
    }

    // Softmax + cross-entropy combine to d(loss)/d(logit) = p - onehot.
    let mut upstream = Tensor {
        shape: pass.activations[spec.layers.len() - 1].shape.clone(),
        values: probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| p - if i == label.index() { 1.0 } else { 0.0 })
            .collect(),
    };

    let mut gradients = weights.zeros_like();
    for i in (0..spec.layers.len() - 1).rev() {
        let x = &pass.activations[i];
        upstream = match spec.layers[i] {
            Layer::Conv2d { .. } => {
                let p = weights.layers[i].as_ref().unwrap();
                let g = gradients.layers[i].as_mut().unwrap();
                conv_backward(x, &p.kernel, &upstream, g)
            }
            Layer::Relu => relu_backward(x, &upstream),
            Layer::MaxPool2d { pool_h, pool_w } => pool_backward(x, pool_h, pool_w, &upstream),
            Layer::Flatten => Tensor {
                shape: x.shape.clone(),
                values: upstream.values,
            },
            Layer::Dense { .. } => {
                let p = weights.layers[i].as_ref().unwrap();
                let g = gradients.layers[i].as_mut().unwrap();
                dense_backward(x, &p.kernel, &upstream, g)
            }
            Layer::Softmax => unreachable!("softmax only occurs as the final layer"),
        };
    }

    Ok(BackwardResult { loss, probabilities, gradients })
}

/// Argmax prediction with ties resolving to the non-alarming class
/// (index 0, "normal").
pub fn predict(spec: &ModelSpec, weights: &Weights, input: &Tensor) -> Result<Prediction> {
    let pass = forward(spec, weights, input)?;
    prediction_from_probabilities(&pass.output().values)
}

/// A label with the winning class probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub confidence: f64,
}

pub(crate) fn prediction_from_probabilities(probabilities: &[f64]) -> Result<Prediction> {
    if probabilities.len() != 2 {
        return Err(Error::invalid(format!(
            "expected 2 class probabilities, got {}",
            probabilities.len()
        )));
    }
    // Strict > keeps the tie on label 0.
    let label = if probabilities[1] > probabilities[0] { Label::Slam } else { Label::Normal };
    Ok(Prediction {
        label,
        confidence: probabilities[label.index()],
    })
}

// ---------------------------------------------------------------------------
// Layer kernels
// ---------------------------------------------------------------------------

fn conv_forward(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let [in_c, in_h, in_w] = x.shape[..] else { unreachable!() };
    let [out_c, _, k_h, k_w] = kernel.shape[..] else { unreachable!() };
    let out_h = in_h - k_h + 1;
    let out_w = in_w - k_w + 1;

    let mut out = Tensor::zeros(&[out_c, out_h, out_w]);
    for oc in 0..out_c {
        let k_base = oc * in_c * k_h * k_w;
        for oh in 0..out_h {
            for ow in 0..out_w {
                let mut acc = bias.values[oc];
                for ic in 0..in_c {
                    for kh in 0..k_h {
                        let x_row = (ic * in_h + oh + kh) * in_w + ow;
                        let k_row = k_base + (ic * k_h + kh) * k_w;
                        for kw in 0..k_w {
                            acc += x.values[x_row + kw] * kernel.values[k_row + kw];
                        }
                    }
                }
                out.values[(oc * out_h + oh) * out_w + ow] = acc;
            }
        }
    }
    out
}

fn conv_backward(x: &Tensor, kernel: &Tensor, dy: &Tensor, grad: &mut LayerParams) -> Tensor {
    let [in_c, in_h, in_w] = x.shape[..] else { unreachable!() };
    let [out_c, _, k_h, k_w] = kernel.shape[..] else { unreachable!() };
    let [_, out_h, out_w] = dy.shape[..] else { unreachable!() };

    let mut dx = Tensor::zeros(&x.shape);
    for oc in 0..out_c {
        let k_base = oc * in_c * k_h * k_w;
        for oh in 0..out_h {
            for ow in 0..out_w {
                let d = dy.values[(oc * out_h + oh) * out_w + ow];
                if d == 0.0 {
                    continue;
                }
                grad.bias.values[oc] += d;
                for ic in 0..in_c {
                    for kh in 0..k_h {
                        let x_row = (ic * in_h + oh + kh) * in_w + ow;
                        let k_row = k_base + (ic * k_h + kh) * k_w;
                        for kw in 0..k_w {
                            grad.kernel.values[k_row + kw] += d * x.values[x_row + kw];
                            dx.values[x_row + kw] += d * kernel.values[k_row + kw];
                        }
                    }
                }
            }
        }
    }
    dx
}

fn relu_forward(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        values: x.values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
    }
}

fn relu_backward(x: &Tensor, dy: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        values: x
            .values
            .iter()
            .zip(dy.values.iter())
            .map(|(&v, &d)| if v > 0.0 { d } else { 0.0 })
            .collect(),
    }
}

fn pool_forward(x: &Tensor, pool_h: usize, pool_w: usize) -> Tensor {
    let [c, in_h, in_w] = x.shape[..] else { unreachable!() };
    let out_h = in_h / pool_h;
    let out_w = in_w / pool_w;
    let mut out = Tensor::zeros(&[c, out_h, out_w]);
    for ch in 0..c {
        for oh in 0..out_h {
            for ow in 0..out_w {
                out.values[(ch * out_h + oh) * out_w + ow] =
                    pool_block_max(x, ch, oh, ow, pool_h, pool_w).1;
            }
        }
    }
    out
}

fn pool_backward(x: &Tensor, pool_h: usize, pool_w: usize, dy: &Tensor) -> Tensor {
    let [c, _, _] = x.shape[..] else { unreachable!() };
    let [_, out_h, out_w] = dy.shape[..] else { unreachable!() };
    let mut dx = Tensor::zeros(&x.shape);
    for ch in 0..c {
        for oh in 0..out_h {
            for ow in 0..out_w {
                let (arg, _) = pool_block_max(x, ch, oh, ow, pool_h, pool_w);
                dx.values[arg] += dy.values[(ch * out_h + oh) * out_w + ow];
            }
        }
    }
    dx
}

/// Max over one pooling block, returning the flat index of the maximum.
/// Strict `>` during the row-major scan makes ties resolve to the first
/// element encountered, which keeps backward deterministic.
fn pool_block_max(
    x: &Tensor,
    ch: usize,
    oh: usize,
    ow: usize,
    pool_h: usize,
    pool_w: usize,
) -> (usize, f64) {
    let [_, in_h, in_w] = x.shape[..] else { unreachable!() };
    let mut best_idx = 0;
    let mut best = f64::NEG_INFINITY;
    for ph in 0..pool_h {
        let row = (ch * in_h + oh * pool_h + ph) * in_w + ow * pool_w;
        for pw in 0..pool_w {
            let v = x.values[row + pw];
            if v > best {
                best = v;
                best_idx = row + pw;
            }
        }
    }
    (best_idx, best)
}

fn dense_forward(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Tensor {
    let [out_f, in_f] = kernel.shape[..] else { unreachable!() };
    let values = (0..out_f)
        .map(|o| {
            let row = &kernel.values[o * in_f..(o + 1) * in_f];
            bias.values[o]
                + row.iter().zip(x.values.iter()).map(|(&w, &v)| w * v).sum::<f64>()
        })
        .collect();
    Tensor { shape: vec![out_f], values }
}

fn dense_backward(x: &Tensor, kernel: &Tensor, dy: &Tensor, grad: &mut LayerParams) -> Tensor {
    let [out_f, in_f] = kernel.shape[..] else { unreachable!() };
    let mut dx = Tensor::zeros(&x.shape);
    for o in 0..out_f {
        let d = dy.values[o];
        grad.bias.values[o] += d;
        let k_row = &kernel.values[o * in_f..(o + 1) * in_f];
        let g_row = &mut grad.kernel.values[o * in_f..(o + 1) * in_f];
        for i in 0..in_f {
            g_row[i] += d * x.values[i];
            dx.values[i] += d * k_row[i];
        }
    }
    dx
}

/// Softmax with max subtraction for stability.
fn softmax_forward(x: &Tensor) -> Tensor {
    let max = x.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.values.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor {
        shape: x.shape.clone(),
        values: exps.into_iter().map(|e| e / sum).collect(),
    }
}
