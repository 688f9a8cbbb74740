//! Network parameters, the forward pass with its recorded trace, and
//! backpropagation of the softmax cross-entropy loss.
//!
//! Layer order: for every conv stage convolution, ReLU, max-pool; then the
//! flattened maps feed a dense ReLU layer (the feature layer), hidden
//! dropout, and the softmax output layer. Input dropout acts on the grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{InitPolicy, NetworkConfig};
use super::layers::{
    conv_backward_patches, conv_from_patches, cross_entropy, extract_patches, maxpool_backward,
    maxpool_forward, relu_backward, relu_in_place, softmax, DenseLayer, DropoutMask, PoolRecord,
};
use super::Tensor3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    /// One `in_channels × patch_h × patch_w` filter per output map.
    pub filters: Vec<Tensor3>,
    pub bias: Vec<f64>,
    pub pool_w: usize,
    pub pool_h: usize,
}

/// All learnable parameters. Gradients and momentum buffers use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub conv: Vec<ConvLayer>,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl Network {
    /// All-zero parameters shaped for `cfg` on a `height × width` grid.
    pub fn zeros(cfg: &NetworkConfig, height: usize, width: usize, n_classes: usize) -> Result<Network> {
        cfg.validate()?;
        let flat = cfg.flat_size(height, width)?;
        let mut channels = 1;
        let conv = cfg
            .conv_layers
            .iter()
            .map(|l| {
                let layer = ConvLayer {
                    filters: vec![Tensor3::zeros(channels, l.patch_h, l.patch_w); l.feature_maps],
                    bias: vec![0.0; l.feature_maps],
                    pool_w: l.pool_w,
                    pool_h: l.pool_h,
                };
                channels = l.feature_maps;
                layer
            })
            .collect();
        Ok(Network {
            conv,
            hidden: DenseLayer::zeros(flat, cfg.dense_units),
            output: DenseLayer::zeros(cfg.dense_units, n_classes),
        })
    }

    /// Random weights (uniform, range set by `cfg.init_scale`), zero biases.
    pub fn init<R: Rng + ?Sized>(
        cfg: &NetworkConfig,
        height: usize,
        width: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Result<Network> {
        let mut net = Network::zeros(cfg, height, width, n_classes)?;
        let bound = |fan_in: usize| match cfg.init_scale {
            InitPolicy::FanInScaled => (1.0 / fan_in as f64).sqrt(),
            InitPolicy::UniformUnit => 1.0,
        };
        let mut fill = |w: &mut [f64], a: f64| {
            for v in w {
                *v = rng.random_range(-a..=a);
            }
        };
        for layer in &mut net.conv {
            let a = bound(layer.filters[0].len());
            for f in &mut layer.filters {
                fill(&mut f.values, a);
            }
        }
        let a = bound(net.hidden.inputs);
        fill(&mut net.hidden.weights, a);
        let a = bound(net.output.inputs);
        fill(&mut net.output.weights, a);
        Ok(net)
    }

    pub fn zeros_like(&self) -> Network {
        let mut z = self.clone();
        z.for_each_slice_mut(|s| s.fill(0.0));
        z
    }

    pub fn n_classes(&self) -> usize {
        self.output.outputs
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each_slice(|s| n += s.len());
        n
    }

    /// Visits every parameter block in layer order: per conv layer each filter
    /// then the biases; hidden weights, hidden bias; output weights, output bias.
    pub fn for_each_slice(&self, mut f: impl FnMut(&[f64])) {
        for l in &self.conv {
            for flt in &l.filters {
                f(&flt.values);
            }
            f(&l.bias);
        }
        for d in [&self.hidden, &self.output] {
            f(&d.weights);
            f(&d.bias);
        }
    }

    pub fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for l in &mut self.conv {
            for flt in &mut l.filters {
                f(&mut flt.values);
            }
            f(&mut l.bias);
        }
        for d in [&mut self.hidden, &mut self.output] {
            f(&mut d.weights);
            f(&mut d.bias);
        }
    }

    /// Mutable parameter blocks in `for_each_slice` order.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.conv {
            for flt in &mut l.filters {
                out.push(&mut flt.values);
            }
            out.push(&mut l.bias);
        }
        for d in [&mut self.hidden, &mut self.output] {
            out.push(&mut d.weights);
            out.push(&mut d.bias);
        }
        out
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for l in &self.conv {
            for flt in &l.filters {
                out.push(&flt.values);
            }
            out.push(&l.bias);
        }
        for d in [&self.hidden, &self.output] {
            out.push(&d.weights);
            out.push(&d.bias);
        }
        out
    }

    /// All parameters flattened in `for_each_slice` order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.parameter_count());
        self.for_each_slice(|s| v.extend_from_slice(s));
        v
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::LengthMismatch {
                left: self.parameter_count(),
                right: values.len(),
            });
        }
        let mut at = 0;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&values[at..at + s.len()]);
            at += s.len();
        });
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_slice(|s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }

    pub fn scale(&mut self, alpha: f64) {
        self.for_each_slice_mut(|s| s.iter_mut().for_each(|v| *v *= alpha));
    }

    pub fn input_channels(&self) -> usize {
        self.conv[0].filters[0].channels
    }
}

/// Dropout masks of one forward pass, reused verbatim by its backward pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Masks {
    pub input: Option<DropoutMask>,
    pub hidden: Option<DropoutMask>,
}

impl Masks {
    pub fn none() -> Masks {
        Masks::default()
    }

    /// Draws the input mask, then the hidden mask; a zero rate draws nothing.
    pub fn sample<R: Rng + ?Sized>(
        input_len: usize,
        hidden_len: usize,
        input_rate: f64,
        hidden_rate: f64,
        rng: &mut R,
    ) -> Masks {
        let input = (input_rate > 0.0).then(|| DropoutMask::sample(input_len, input_rate, rng));
        let hidden = (hidden_rate > 0.0).then(|| DropoutMask::sample(hidden_len, hidden_rate, rng));
        Masks { input, hidden }
    }
}

#[derive(Debug, Clone)]
struct StageTrace {
    input_shape: (usize, usize, usize),
    patches: Vec<f64>,
    /// Post-ReLU convolution output; positive exactly where the
    /// pre-activation was.
    activated: Tensor3,
    pool: PoolRecord,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    stages: Vec<StageTrace>,
    pooled_shape: (usize, usize, usize),
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden_mask: Option<DropoutMask>,
    hidden_out: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    /// Post-ReLU activations of the dense feature layer, before dropout.
    pub fn features(&self) -> Vec<f64> {
        let mut f = self.hidden_pre.clone();
        relu_in_place(&mut f);
        f
    }

    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }
}

impl Network {
    pub fn forward(&self, input: &Tensor3, masks: &Masks) -> Result<ForwardTrace> {
        if input.channels != self.input_channels() {
            return Err(Error::ShapeMismatch(format!(
                "input has {} channels, network expects {}",
                input.channels,
                self.input_channels()
            )));
        }
        let mut x = input.clone();
        if let Some(m) = &masks.input {
            m.apply(&mut x.values);
        }
        let mut stages = Vec::with_capacity(self.conv.len());
        for layer in &self.conv {
            let (ph, pw) = (layer.filters[0].height, layer.filters[0].width);
            if x.height < ph || x.width < pw {
                return Err(Error::PatchTooLarge {
                    patch_h: ph,
                    patch_w: pw,
                    height: x.height,
                    width: x.width,
                });
            }
            let (oh, ow) = (x.height - ph + 1, x.width - pw + 1);
            let patches = extract_patches(&x, ph, pw);
            let mut activated = conv_from_patches(&patches, &layer.filters, &layer.bias, oh, ow);
            relu_in_place(&mut activated.values);
            let (pooled, pool) = maxpool_forward(&activated, layer.pool_w, layer.pool_h)?;
            stages.push(StageTrace {
                input_shape: x.shape(),
                patches,
                activated,
                pool,
            });
            x = pooled;
        }
        if x.len() != self.hidden.inputs {
            return Err(Error::ShapeMismatch(format!(
                "conv stack yields {} values, dense layer expects {}",
                x.len(),
                self.hidden.inputs
            )));
        }
        let pooled_shape = x.shape();
        let flat = x.values;
        let hidden_pre = self.hidden.forward(&flat);
        let mut hidden_out = hidden_pre.clone();
        relu_in_place(&mut hidden_out);
        if let Some(m) = &masks.hidden {
            m.apply(&mut hidden_out);
        }
        let logits = self.output.forward(&hidden_out);
        Ok(ForwardTrace {
            stages,
            pooled_shape,
            flat,
            hidden_pre,
            hidden_mask: masks.hidden.clone(),
            hidden_out,
            logits,
        })
    }

    /// Inference-mode forward pass (no dropout).
    pub fn infer(&self, input: &Tensor3) -> Result<ForwardTrace> {
        self.forward(input, &Masks::none())
    }

    /// Adds `scale ×` the gradient of the cross-entropy loss of `trace` (for
    /// true class `label`) with respect to every parameter into `grads`.
    pub fn backward(&self, trace: &ForwardTrace, label: usize, scale: f64, grads: &mut Network) {
        let mut d_logits = softmax(&trace.logits);
        d_logits[label] -= 1.0;
        d_logits.iter_mut().for_each(|g| *g *= scale);

        let mut d_hidden = self.output.backward(&trace.hidden_out, &d_logits, &mut grads.output);
        if let Some(m) = &trace.hidden_mask {
            m.apply(&mut d_hidden);
        }
        relu_backward(&trace.hidden_pre, &mut d_hidden);
        let d_flat = self.hidden.backward(&trace.flat, &d_hidden, &mut grads.hidden);

        let (c, h, w) = trace.pooled_shape;
        let mut d_out = Tensor3 {
            channels: c,
            height: h,
            width: w,
            values: d_flat,
        };
        for (i, stage) in trace.stages.iter().enumerate().rev() {
            let mut d_act = maxpool_backward(&d_out, &stage.pool);
            relu_backward(&stage.activated.values, &mut d_act.values);
            let layer = &self.conv[i];
            let g = &mut grads.conv[i];
            let d_in = conv_backward_patches(
                &stage.patches,
                (i > 0).then_some(stage.input_shape),
                &layer.filters,
                &d_act,
                &mut g.filters,
                &mut g.bias,
            );
            match d_in {
                Some(d) => d_out = d,
                None => break,
            }
        }
    }

    /// Mean cross-entropy over a batch and its gradient. Samples are
    /// processed in order, so the result is bit-reproducible.
    pub fn batch_gradients(
        &self,
        inputs: &[&Tensor3],
        labels: &[usize],
        masks: &[Masks],
    ) -> Result<(f64, Network)> {
        if inputs.len() != labels.len() || inputs.len() != masks.len() || inputs.is_empty() {
            return Err(Error::LengthMismatch {
                left: inputs.len(),
                right: labels.len(),
            });
        }
        let scale = 1.0 / inputs.len() as f64;
        let mut grads = self.zeros_like();
        let mut loss = 0.0;
        for ((x, &y), m) in inputs.iter().zip(labels).zip(masks) {
            let trace = self.forward(x, m)?;
            loss += cross_entropy(&trace.logits, y);
            self.backward(&trace, y, scale, &mut grads);
        }
        Ok((loss * scale, grads))
    }

    /// Mean cross-entropy of a batch without gradients.
    pub fn batch_loss(&self, inputs: &[&Tensor3], labels: &[usize], masks: &[Masks]) -> Result<f64> {
        let mut loss = 0.0;
        for ((x, &y), m) in inputs.iter().zip(labels).zip(masks) {
            loss += cross_entropy(&self.forward(x, m)?.logits, y);
        }
        Ok(loss / inputs.len() as f64)
    }
}

/// `v ← momentum·v − lr·g; w ← w + v` elementwise.
pub fn sgd_momentum_update(w: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, momentum: f64) {
    for ((wi, &gi), vi) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *vi = momentum * *vi - lr * gi;
        *wi += *vi;
    }
}

/// Momentum SGD applied to every parameter block.
pub fn sgd_momentum_step(
    weights: &mut Network,
    grads: &Network,
    velocity: &mut Network,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if weights.parameter_count() != grads.parameter_count()
        || weights.parameter_count() != velocity.parameter_count()
    {
        return Err(Error::LengthMismatch {
            left: weights.parameter_count(),
            right: grads.parameter_count(),
        });
    }
    for ((w, g), v) in weights
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(velocity.slices_mut())
    {
        sgd_momentum_update(w, g, v, lr, momentum);
    }
    Ok(())
}
