//! Convolutional backbone, VCDR fusion head, and analytic gradients.
//!
//! Architecture: N blocks of (3x3 same-padding conv -> ReLU -> 2x2 average
//! pool), global average pooling to the feature vector, then a linear head.
//! With VCDR fusion enabled the head consumes `concat(features, vcdr *
//! features)`; otherwise a plain head of the feature width is used. All
//! arithmetic is f64 so analytic gradients can be checked against central
//! finite differences tightly.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::channels::ModelInput;

/// Backbone shape. `feature_dim` must equal the last block width: global
/// average pooling produces exactly one feature per channel of the final
/// block, and the fusion head consumes those pooled features directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackboneConfig {
    pub in_channels: usize,
    pub block_widths: Vec<usize>,
    pub feature_dim: usize,
}

impl BackboneConfig {
    pub fn new(in_channels: usize, block_widths: Vec<usize>) -> Self {
        let feature_dim = *block_widths.last().expect("at least one block");
        Self {
            in_channels,
            block_widths,
            feature_dim,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.in_channels != 3 && self.in_channels != 5 {
            return Err(ModelError::InvalidConfig(format!(
                "in_channels must be 3 or 5, got {}",
                self.in_channels
            )));
        }
        if self.block_widths.is_empty() {
            return Err(ModelError::InvalidConfig("no conv blocks".into()));
        }
        if self.block_widths.contains(&0) {
            return Err(ModelError::InvalidConfig("zero-width block".into()));
        }
        if self.feature_dim != *self.block_widths.last().unwrap() {
            return Err(ModelError::InvalidConfig(format!(
                "feature_dim {} must equal last block width {}",
                self.feature_dim,
                self.block_widths.last().unwrap()
            )));
        }
        Ok(())
    }
}

/// Dense channel-major f64 tensor used for activations.
#[derive(Debug, Clone)]
struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    fn from_input(input: &ModelInput) -> Self {
        let (w, h) = (input.width() as usize, input.height() as usize);
        let mut data = Vec::with_capacity(input.channels() * h * w);
        for plane in &input.planes {
            data.extend(plane.data().iter().map(|&v| v as f64));
        }
        Self {
            channels: input.channels(),
            height: h,
            width: w,
            data,
        }
    }

    #[inline]
    fn plane(&self, c: usize) -> &[f64] {
        let size = self.height * self.width;
        &self.data[c * size..(c + 1) * size]
    }

    #[inline]
    fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let size = self.height * self.width;
        &mut self.data[c * size..(c + 1) * size]
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    /// 3x3 kernels, `[out][in][ky][kx]` flattened.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, input: &Tensor3) -> Tensor3 {
        let (h, w) = (input.height, input.width);
        let mut out = Tensor3::zeros(self.out_channels, h, w);
        for o in 0..self.out_channels {
            out.plane_mut(o).fill(self.bias[o]);
        }
        for o in 0..self.out_channels {
            for c in 0..self.in_channels {
                let in_plane = input.plane(c);
                let kernel_base = (o * self.in_channels + c) * 9;
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let weight = self.weights[kernel_base + ky * 3 + kx];
                        if weight == 0.0 {
                            continue;
                        }
                        let (y_lo, y_hi) = shifted_range(h, ky);
                        let (x_lo, x_hi) = shifted_range(w, kx);
                        let out_plane = out.plane_mut(o);
                        for y in y_lo..y_hi {
                            let in_row = (y + ky - 1) * w;
                            let out_row = y * w;
                            for x in x_lo..x_hi {
                                out_plane[out_row + x] += weight * in_plane[in_row + x + kx - 1];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Accumulate weight/bias gradients and return the input gradient.
    fn backward(
        &self,
        input: &Tensor3,
        d_out: &Tensor3,
        d_weights: &mut [f64],
        d_bias: &mut [f64],
    ) -> Tensor3 {
        let (h, w) = (input.height, input.width);
        let mut d_input = Tensor3::zeros(self.in_channels, h, w);
        for (o, db) in d_bias.iter_mut().enumerate().take(self.out_channels) {
            *db += d_out.plane(o).iter().sum::<f64>();
        }
        for o in 0..self.out_channels {
            let d_out_plane = d_out.plane(o);
            for c in 0..self.in_channels {
                let in_plane = input.plane(c);
                let kernel_base = (o * self.in_channels + c) * 9;
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let (y_lo, y_hi) = shifted_range(h, ky);
                        let (x_lo, x_hi) = shifted_range(w, kx);
                        let weight = self.weights[kernel_base + ky * 3 + kx];
                        let mut grad = 0.0;
                        let d_in_plane = d_input.plane_mut(c);
                        for y in y_lo..y_hi {
                            let in_row = (y + ky - 1) * w;
                            let out_row = y * w;
                            for x in x_lo..x_hi {
                                let g = d_out_plane[out_row + x];
                                grad += g * in_plane[in_row + x + kx - 1];
                                d_in_plane[in_row + x + kx - 1] += weight * g;
                            }
                        }
                        d_weights[kernel_base + ky * 3 + kx] += grad;
                    }
                }
            }
        }
        d_input
    }
}

/// Valid output rows/cols for a kernel offset under same-padding: the input
/// index `pos + k - 1` must stay inside `[0, dim)`.
#[inline]
fn shifted_range(dim: usize, k: usize) -> (usize, usize) {
    let lo = 1usize.saturating_sub(k);
    let hi = (dim + 1 - k).min(dim);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq)]
struct LinearLayer {
    in_dim: usize,
    out_dim: usize,
    /// `[out][in]` flattened.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearLayer {
    fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
                self.bias[o] + row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

fn relu_pool(conv: &Tensor3) -> (Tensor3, Tensor3) {
    let mut activated = conv.clone();
    for v in &mut activated.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let (ph, pw) = (conv.height / 2, conv.width / 2);
    let mut pooled = Tensor3::zeros(conv.channels, ph, pw);
    for c in 0..conv.channels {
        let a = activated.plane(c);
        let p = pooled.plane_mut(c);
        for y in 0..ph {
            for x in 0..pw {
                let base = 2 * y * conv.width + 2 * x;
                p[y * pw + x] = 0.25
                    * (a[base] + a[base + 1] + a[base + conv.width] + a[base + conv.width + 1]);
            }
        }
    }
    (activated, pooled)
}

fn global_average(t: &Tensor3) -> Vec<f64> {
    let norm = 1.0 / (t.height * t.width) as f64;
    (0..t.channels)
        .map(|c| t.plane(c).iter().sum::<f64>() * norm)
        .collect()
}

/// VCDR feature fusion: concatenate the features with a copy scaled by the
/// VCDR scalar. The first half is bit-identical to the input.
pub fn fuse(features: &[f64], vcdr: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(features.len() * 2);
    out.extend_from_slice(features);
    out.extend(features.iter().map(|&f| vcdr * f));
    out
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Probability of the glaucoma class from the two logits.
pub fn glaucoma_probability(logits: &[f64; 2]) -> f64 {
    softmax(logits)[1]
}

struct ForwardCache {
    /// Per block: (conv input, post-ReLU activation, pooled output).
    blocks: Vec<(Tensor3, Tensor3, Tensor3)>,
    features: Vec<f64>,
    head_input: Vec<f64>,
    logits: [f64; 2],
}

/// Convolutional classifier with an optional VCDR fusion head.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    config: BackboneConfig,
    use_vcdr: bool,
    blocks: Vec<ConvLayer>,
    head: LinearLayer,
}

impl CnnModel {
    /// Deterministic initialization from a seed: He-style normal conv
    /// weights, zero biases.
    pub fn new(config: BackboneConfig, use_vcdr: bool, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut blocks = Vec::with_capacity(config.block_widths.len());
        let mut in_channels = config.in_channels;
        for &out_channels in &config.block_widths {
            let scale = (2.0 / (in_channels * 9) as f64).sqrt();
            let weights = (0..out_channels * in_channels * 9)
                .map(|_| scale * normal(&mut rng))
                .collect();
            blocks.push(ConvLayer {
                in_channels,
                out_channels,
                weights,
                bias: vec![0.0; out_channels],
            });
            in_channels = out_channels;
        }
        let head_in = if use_vcdr {
            2 * config.feature_dim
        } else {
            config.feature_dim
        };
        let scale = (1.0 / head_in as f64).sqrt();
        let head = LinearLayer {
            in_dim: head_in,
            out_dim: 2,
            weights: (0..2 * head_in).map(|_| scale * normal(&mut rng)).collect(),
            bias: vec![0.0; 2],
        };
        Ok(Self {
            config,
            use_vcdr,
            blocks,
            head,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn uses_vcdr(&self) -> bool {
        self.use_vcdr
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    fn check_input(&self, input: &ModelInput) -> Result<(), ModelError> {
        if input.channels() != self.config.in_channels {
            return Err(ModelError::ChannelCountMismatch {
                expected: self.config.in_channels,
                got: input.channels(),
            });
        }
        let min_side = 1u32 << self.blocks.len();
        if input.width() < min_side || input.height() < min_side {
            return Err(ModelError::InputTooSmall {
                got_w: input.width(),
                got_h: input.height(),
                blocks: self.blocks.len(),
            });
        }
        Ok(())
    }

    fn run_forward(&self, input: &ModelInput) -> Result<ForwardCache, ModelError> {
        self.check_input(input)?;
        let mut current = Tensor3::from_input(input);
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for layer in &self.blocks {
            let conv = layer.forward(&current);
            let (activated, pooled) = relu_pool(&conv);
            let next = pooled.clone();
            blocks.push((current, activated, pooled));
            current = next;
        }
        let features = global_average(&current);
        let head_input = if self.use_vcdr {
            fuse(&features, input.vcdr)
        } else {
            features.clone()
        };
        let logits_vec = self.head.forward(&head_input);
        let logits = [logits_vec[0], logits_vec[1]];
        Ok(ForwardCache {
            blocks,
            features,
            head_input,
            logits,
        })
    }

    /// Class logits for one input.
    pub fn forward(&self, input: &ModelInput) -> Result<[f64; 2], ModelError> {
        Ok(self.run_forward(input)?.logits)
    }

    /// Glaucoma probability for one input.
    pub fn score(&self, input: &ModelInput) -> Result<f64, ModelError> {
        Ok(glaucoma_probability(&self.forward(input)?))
    }

    /// Pooled feature vector (before any fusion) for one input.
    pub fn features(&self, input: &ModelInput) -> Result<Vec<f64>, ModelError> {
        Ok(self.run_forward(input)?.features)
    }

    /// Mean cross-entropy over a batch; forward pass only.
    pub fn batch_loss(
        &self,
        inputs: &[ModelInput],
        labels: &[crate::Label],
    ) -> Result<f64, ModelError> {
        assert_eq!(inputs.len(), labels.len());
        let mut total = 0.0;
        for (input, &label) in inputs.iter().zip(labels) {
            let logits = self.forward(input)?;
            total += cross_entropy(&logits, label);
        }
        Ok(total / inputs.len() as f64)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter,
    /// flattened in [`Self::parameters`] order. The VCDR scalar is a
    /// constant: no gradient flows into it.
    pub fn batch_gradients(
        &self,
        inputs: &[ModelInput],
        labels: &[crate::Label],
    ) -> Result<(f64, Vec<f64>), ModelError> {
        assert_eq!(inputs.len(), labels.len());
        assert!(!inputs.is_empty(), "gradient batch must be nonempty");
        use rayon::prelude::*;
        let per_sample: Result<Vec<(f64, Vec<f64>)>, ModelError> = inputs
            .par_iter()
            .zip(labels.par_iter())
            .map(|(input, &label)| self.sample_gradients(input, label))
            .collect();
        let per_sample = per_sample?;
        // Sequential reduction keeps results bitwise deterministic.
        let scale = 1.0 / inputs.len() as f64;
        let mut loss = 0.0;
        let mut grads = vec![0.0; self.parameter_count()];
        for (sample_loss, sample_grads) in per_sample {
            loss += sample_loss;
            for (acc, g) in grads.iter_mut().zip(&sample_grads) {
                *acc += g;
            }
        }
        for g in &mut grads {
            *g *= scale;
        }
        Ok((loss * scale, grads))
    }

    fn sample_gradients(
        &self,
        input: &ModelInput,
        label: crate::Label,
    ) -> Result<(f64, Vec<f64>), ModelError> {
        let cache = self.run_forward(input)?;
        let loss = cross_entropy(&cache.logits, label);

        let probs = softmax(&cache.logits);
        let mut d_logits = [probs[0], probs[1]];
        d_logits[label.class_index()] -= 1.0;

        // Head.
        let mut d_head_w = vec![0.0; self.head.weights.len()];
        let mut d_head_b = vec![0.0; self.head.bias.len()];
        let mut d_head_input = vec![0.0; self.head.in_dim];
        for o in 0..2 {
            d_head_b[o] = d_logits[o];
            for i in 0..self.head.in_dim {
                d_head_w[o * self.head.in_dim + i] = d_logits[o] * cache.head_input[i];
                d_head_input[i] += d_logits[o] * self.head.weights[o * self.head.in_dim + i];
            }
        }

        // Undo fusion: the scaled copy routes gradient back times vcdr.
        let dim = self.config.feature_dim;
        let d_features: Vec<f64> = if self.use_vcdr {
            (0..dim)
                .map(|i| d_head_input[i] + input.vcdr * d_head_input[dim + i])
                .collect()
        } else {
            d_head_input
        };

        // Global average pooling.
        let last_pooled = &cache.blocks.last().unwrap().2;
        let norm = 1.0 / (last_pooled.height * last_pooled.width) as f64;
        let mut d_pooled =
            Tensor3::zeros(last_pooled.channels, last_pooled.height, last_pooled.width);
        for (c, &df) in d_features.iter().enumerate().take(last_pooled.channels) {
            d_pooled.plane_mut(c).fill(df * norm);
        }

        // Blocks in reverse.
        let mut d_block_weights: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .map(|b| vec![0.0; b.weights.len()])
            .collect();
        let mut d_block_bias: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .map(|b| vec![0.0; b.bias.len()])
            .collect();
        for (idx, layer) in self.blocks.iter().enumerate().rev() {
            let (conv_input, activated, pooled) = &cache.blocks[idx];
            // Average-pool backward.
            let mut d_act = Tensor3::zeros(activated.channels, activated.height, activated.width);
            for c in 0..pooled.channels {
                let dp = d_pooled.plane(c);
                let da = d_act.plane_mut(c);
                for y in 0..pooled.height {
                    for x in 0..pooled.width {
                        let g = dp[y * pooled.width + x] * 0.25;
                        let base = 2 * y * activated.width + 2 * x;
                        da[base] += g;
                        da[base + 1] += g;
                        da[base + activated.width] += g;
                        da[base + activated.width + 1] += g;
                    }
                }
            }
            // ReLU gate.
            for (g, &a) in d_act.data.iter_mut().zip(&activated.data) {
                if a <= 0.0 {
                    *g = 0.0;
                }
            }
            let d_input = layer.backward(
                conv_input,
                &d_act,
                &mut d_block_weights[idx],
                &mut d_block_bias[idx],
            );
            d_pooled = d_input;
        }

        // Flatten in parameter order.
        let mut flat = Vec::with_capacity(self.parameter_count());
        for idx in 0..self.blocks.len() {
            flat.extend_from_slice(&d_block_weights[idx]);
            flat.extend_from_slice(&d_block_bias[idx]);
        }
        flat.extend_from_slice(&d_head_w);
        flat.extend_from_slice(&d_head_b);
        Ok((loss, flat))
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks
            .iter()
            .map(ConvLayer::parameter_count)
            .sum::<usize>()
            + self.head.parameter_count()
    }

    /// All parameters flattened: per block weights then bias, then head
    /// weights and bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        for block in &self.blocks {
            flat.extend_from_slice(&block.weights);
            flat.extend_from_slice(&block.bias);
        }
        flat.extend_from_slice(&self.head.weights);
        flat.extend_from_slice(&self.head.bias);
        flat
    }

    pub fn set_parameters(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.parameter_count());
        let mut offset = 0;
        for block in &mut self.blocks {
            let nw = block.weights.len();
            block.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = block.bias.len();
            block.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        let nw = self.head.weights.len();
        self.head
            .weights
            .copy_from_slice(&flat[offset..offset + nw]);
        offset += nw;
        let nb = self.head.bias.len();
        self.head.bias.copy_from_slice(&flat[offset..offset + nb]);
    }

    /// Replace the head weights, e.g. to build algebraic-identity fixtures.
    pub fn set_head(&mut self, weights: Vec<f64>, bias: Vec<f64>) {
        assert_eq!(weights.len(), self.head.weights.len());
        assert_eq!(bias.len(), self.head.bias.len());
        self.head.weights = weights;
        self.head.bias = bias;
    }

    pub fn head_weights(&self) -> (&[f64], &[f64]) {
        (&self.head.weights, &self.head.bias)
    }
}

pub(crate) fn cross_entropy(logits: &[f64; 2], label: crate::Label) -> f64 {
    let m = logits[0].max(logits[1]);
    let log_sum = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    log_sum - logits[label.class_index()]
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random::<f64>().max(1e-12);
    let v: f64 = rng.random::<f64>();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}
