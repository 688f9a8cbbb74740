//! Forward and backward passes of the individual layers.
//!
//! Convolution is valid (no padding, stride 1) cross-correlation. It is
//! evaluated through a patch matrix: row `p` holds the receptive field of
//! output position `p` laid out like a filter (channel, row, column), so each
//! output cell is one dot product against a filter.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor3;
use crate::error::{Error, Result};

/// Dot product with four interleaved accumulators combined in a fixed order.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn check_filters(input: &Tensor3, filters: &[Tensor3]) -> Result<(usize, usize)> {
    let f0 = filters
        .first()
        .ok_or_else(|| Error::InvalidConfig("convolution needs at least one filter".into()))?;
    let (ph, pw) = (f0.height, f0.width);
    if filters
        .iter()
        .any(|f| f.shape() != (input.channels, ph, pw))
    {
        return Err(Error::ShapeMismatch(format!(
            "filters must all be {}x{ph}x{pw}",
            input.channels
        )));
    }
    if input.height < ph || input.width < pw {
        return Err(Error::PatchTooLarge {
            patch_h: ph,
            patch_w: pw,
            height: input.height,
            width: input.width,
        });
    }
    Ok((ph, pw))
}

/// Receptive fields of every output position, one row per position.
pub(crate) fn extract_patches(input: &Tensor3, ph: usize, pw: usize) -> Vec<f64> {
    let (c, h, w) = input.shape();
    let (oh, ow) = (h - ph + 1, w - pw + 1);
    let k = c * ph * pw;
    let mut patches = vec![0.0; oh * ow * k];
    for y in 0..oh {
        for x in 0..ow {
            let row = &mut patches[(y * ow + x) * k..(y * ow + x + 1) * k];
            let mut t = 0;
            for ch in 0..c {
                for p in 0..ph {
                    let start = input.index(ch, y + p, x);
                    row[t..t + pw].copy_from_slice(&input.values[start..start + pw]);
                    t += pw;
                }
            }
        }
    }
    patches
}

pub(crate) fn conv_from_patches(
    patches: &[f64],
    filters: &[Tensor3],
    bias: &[f64],
    oh: usize,
    ow: usize,
) -> Tensor3 {
    let k = filters[0].len();
    let positions = oh * ow;
    let mut out = Tensor3::zeros(filters.len(), oh, ow);
    for (o, (f, &b)) in filters.iter().zip(bias).enumerate() {
        let plane = &mut out.values[o * positions..(o + 1) * positions];
        for (pos, cell) in plane.iter_mut().enumerate() {
            *cell = b + dot(&f.values, &patches[pos * k..(pos + 1) * k]);
        }
    }
    out
}

/// Valid convolution: one output channel per filter, each cell the bias plus
/// the sum over input channels and patch cells of weight × value.
pub fn conv_forward(input: &Tensor3, filters: &[Tensor3], bias: &[f64]) -> Result<Tensor3> {
    let (ph, pw) = check_filters(input, filters)?;
    if bias.len() != filters.len() {
        return Err(Error::LengthMismatch {
            left: filters.len(),
            right: bias.len(),
        });
    }
    let (oh, ow) = (input.height - ph + 1, input.width - pw + 1);
    let patches = extract_patches(input, ph, pw);
    Ok(conv_from_patches(&patches, filters, bias, oh, ow))
}

/// Accumulates filter and bias gradients of a convolution whose forward pass
/// used `patches`, and returns the gradient with respect to its input when
/// `input_shape` is given.
pub(crate) fn conv_backward_patches(
    patches: &[f64],
    input_shape: Option<(usize, usize, usize)>,
    filters: &[Tensor3],
    grad_out: &Tensor3,
    grad_filters: &mut [Tensor3],
    grad_bias: &mut [f64],
) -> Option<Tensor3> {
    let k = filters[0].len();
    let (ph, pw) = (filters[0].height, filters[0].width);
    let positions = grad_out.height * grad_out.width;
    let mut grad_patches = input_shape.map(|_| vec![0.0; positions * k]);
    for o in 0..filters.len() {
        let g_plane = grad_out.channel(o);
        let gf = &mut grad_filters[o].values;
        let mut gb = 0.0;
        for (pos, &g) in g_plane.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            gb += g;
            axpy(gf, g, &patches[pos * k..(pos + 1) * k]);
            if let Some(gp) = grad_patches.as_mut() {
                axpy(&mut gp[pos * k..(pos + 1) * k], g, &filters[o].values);
            }
        }
        grad_bias[o] += gb;
    }
    let (c, h, w) = input_shape?;
    let gp = grad_patches.unwrap();
    let mut grad_in = Tensor3::zeros(c, h, w);
    let ow = grad_out.width;
    for pos in 0..positions {
        let (y, x) = (pos / ow, pos % ow);
        let row = &gp[pos * k..(pos + 1) * k];
        let mut t = 0;
        for ch in 0..c {
            for p in 0..ph {
                let start = grad_in.index(ch, y + p, x);
                for (dst, &src) in grad_in.values[start..start + pw].iter_mut().zip(&row[t..t + pw]) {
                    *dst += src;
                }
                t += pw;
            }
        }
    }
    Some(grad_in)
}

/// Gradients of a convolution. Filter and bias gradients are accumulated
/// into the given buffers; the input gradient is returned.
pub fn conv_backward(
    input: &Tensor3,
    filters: &[Tensor3],
    grad_out: &Tensor3,
    grad_filters: &mut [Tensor3],
    grad_bias: &mut [f64],
) -> Result<Tensor3> {
    let (ph, pw) = check_filters(input, filters)?;
    let expected = (filters.len(), input.height - ph + 1, input.width - pw + 1);
    if grad_out.shape() != expected {
        return Err(Error::ShapeMismatch(format!(
            "output gradient {:?}, expected {expected:?}",
            grad_out.shape()
        )));
    }
    let patches = extract_patches(input, ph, pw);
    Ok(conv_backward_patches(
        &patches,
        Some(input.shape()),
        filters,
        grad_out,
        grad_filters,
        grad_bias,
    )
    .expect("input shape given"))
}

pub fn relu_forward(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    relu_in_place(&mut out.values);
    out
}

pub(crate) fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x <= 0.0 {
            *x = 0.0;
        }
    }
}

/// Passes `grad` where the forward input was positive, zero elsewhere.
pub fn relu_backward(pre_activation: &[f64], grad: &mut [f64]) {
    for (g, &x) in grad.iter_mut().zip(pre_activation) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Flat input index of the maximum of every pooling window.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolRecord {
    pub input_shape: (usize, usize, usize),
    pub argmax: Vec<usize>,
}

/// Non-overlapping max pooling with stride equal to the window. Ragged edges
/// are dropped; the first maximal cell in row-major order wins ties.
pub fn maxpool_forward(x: &Tensor3, pool_w: usize, pool_h: usize) -> Result<(Tensor3, PoolRecord)> {
    if pool_w == 0 || pool_h == 0 {
        return Err(Error::InvalidConfig("pool size must be positive".into()));
    }
    let (c, h, w) = x.shape();
    let (oh, ow) = (h / pool_h, w / pool_w);
    if oh == 0 || ow == 0 {
        return Err(Error::PoolLargerThanInput {
            pool_h,
            pool_w,
            height: h,
            width: w,
        });
    }
    let mut out = Tensor3::zeros(c, oh, ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best_i = x.index(ch, oy * pool_h, ox * pool_w);
                let mut best = x.values[best_i];
                for dy in 0..pool_h {
                    for dx in 0..pool_w {
                        let i = x.index(ch, oy * pool_h + dy, ox * pool_w + dx);
                        if x.values[i] > best {
                            best = x.values[i];
                            best_i = i;
                        }
                    }
                }
                out.set(ch, oy, ox, best);
                argmax.push(best_i);
            }
        }
    }
    Ok((
        out,
        PoolRecord {
            input_shape: (c, h, w),
            argmax,
        },
    ))
}

/// Routes each output gradient to the recorded maximal input cell.
pub fn maxpool_backward(grad_out: &Tensor3, record: &PoolRecord) -> Tensor3 {
    let (c, h, w) = record.input_shape;
    let mut grad_in = Tensor3::zeros(c, h, w);
    for (&i, &g) in record.argmax.iter().zip(&grad_out.values) {
        grad_in.values[i] += g;
    }
    grad_in
}

/// Per-unit multipliers of an inverted-dropout draw: 0 for dropped units,
/// `1 / (1 - rate)` for survivors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropoutMask(pub Vec<f64>);

impl DropoutMask {
    pub fn sample<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> DropoutMask {
        let keep = 1.0 / (1.0 - rate);
        DropoutMask(
            (0..len)
                .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
                .collect(),
        )
    }

    pub fn apply(&self, x: &mut [f64]) {
        for (v, &m) in x.iter_mut().zip(&self.0) {
            *v *= m;
        }
    }
}

/// Inverted dropout. Identity (and no random draws) at inference or when
/// `rate` is zero; otherwise returns the mask that was applied.
pub fn dropout_apply<R: Rng + ?Sized>(
    x: &mut [f64],
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Option<DropoutMask> {
    if !training || rate <= 0.0 {
        return None;
    }
    let mask = DropoutMask::sample(x.len(), rate, rng);
    mask.apply(x);
    Some(mask)
}

/// Fully connected layer; `weights` is `outputs × inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weights[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns the input gradient.
    pub fn backward(&self, x: &[f64], grad_out: &[f64], grad: &mut DenseLayer) -> Vec<f64> {
        let mut grad_in = vec![0.0; self.inputs];
        for (o, &g) in grad_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let range = o * self.inputs..(o + 1) * self.inputs;
            axpy(&mut grad.weights[range.clone()], g, x);
            axpy(&mut grad_in, g, &self.weights[range]);
        }
        grad_in
    }
}

/// Numerically stable softmax (the maximum logit is subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `-ln softmax(logits)[label]`, computed without forming the probabilities.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Affine map followed by softmax.
pub fn dense_softmax_forward(features: &[f64], layer: &DenseLayer) -> Result<Vec<f64>> {
    if features.len() != layer.inputs {
        return Err(Error::LengthMismatch {
            left: layer.inputs,
            right: features.len(),
        });
    }
    Ok(softmax(&layer.forward(features)))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
