//! Three-branch convolutional network with a shared dense head.
//!
//! Each branch runs `stages.len()` stages of
//! `[conv k_small ∥ conv k_large] → concat → ReLU → 2×2 max pool` on one
//! image. The flattened branch outputs are concatenated and passed
//! through dense + ReLU + dropout layers and a final dense layer with
//! softmax.
//!
//! All parameters live in one flat vector. Order: for each branch, for
//! each stage, small-kernel weights `[out][in][k][k]`, small bias,
//! large-kernel weights, large bias; then for each dense layer weights
//! `[out][in]` followed by bias.

use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::conv::{col2im, im2col, maxpool2, maxpool2_backward};
use super::scalar::Scalar;
use super::train::TrainConfig;
use crate::seed::derive;
use crate::{Error, Result};

/// Number of image branches.
pub const BRANCHES: usize = 3;

const MODEL_MAGIC: &[u8; 4] = b"SRCM";
const MODEL_VERSION: u32 = 1;

/// Parallel-kernel channel counts of one conv stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvStage {
    pub small_channels: usize,
    pub large_channels: usize,
}

impl ConvStage {
    pub fn out_channels(&self) -> usize {
        self.small_channels + self.large_channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub image_size: usize,
    pub small_kernel: usize,
    pub large_kernel: usize,
    pub stages: Vec<ConvStage>,
    /// Hidden dense widths; each is followed by ReLU and dropout.
    pub dense: Vec<usize>,
    pub classes: usize,
    pub dropout: f64,
}

impl Topology {
    /// 128×128 inputs, 3×3 ∥ 9×9 stages of 8+8, 16+16, 16+16 channels,
    /// dense 256 → 64 → 9 with dropout 0.5.
    pub fn standard() -> Self {
        Self {
            image_size: 128,
            small_kernel: 3,
            large_kernel: 9,
            stages: vec![
                ConvStage { small_channels: 8, large_channels: 8 },
                ConvStage { small_channels: 16, large_channels: 16 },
                ConvStage { small_channels: 16, large_channels: 16 },
            ],
            dense: vec![256, 64],
            classes: 9,
            dropout: 0.5,
        }
    }

    /// Small instance with the same layer types, for gradient checks and
    /// quick tests: 16×16 inputs, 2+2 channels per stage.
    pub fn reduced() -> Self {
        Self {
            image_size: 16,
            small_kernel: 3,
            large_kernel: 9,
            stages: vec![ConvStage { small_channels: 2, large_channels: 2 }; 3],
            dense: vec![8, 6],
            classes: 9,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let shrink = 1usize << self.stages.len();
        if self.stages.is_empty() || self.image_size == 0 || self.image_size % shrink != 0 {
            return Err(Error::invalid(format!(
                "image size {} must be a positive multiple of {shrink}",
                self.image_size
            )));
        }
        if self.small_kernel % 2 == 0 || self.large_kernel % 2 == 0 {
            return Err(Error::invalid("kernel sizes must be odd for same padding"));
        }
        if self.stages.iter().any(|s| s.out_channels() == 0) || self.dense.contains(&0) || self.classes < 2 {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout rate {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// Flattened length of one branch's output.
    pub fn branch_features(&self) -> usize {
        let side = self.image_size >> self.stages.len();
        side * side * self.stages.last().map_or(0, ConvStage::out_channels)
    }

    pub fn input_len(&self) -> usize {
        self.image_size * self.image_size
    }
}

#[derive(Debug, Clone)]
struct ConvSlots {
    in_channels: usize,
    size: usize,
    small_w: Range<usize>,
    small_b: Range<usize>,
    large_w: Range<usize>,
    large_b: Range<usize>,
}

#[derive(Debug, Clone)]
struct DenseSlots {
    inputs: usize,
    outputs: usize,
    w: Range<usize>,
    b: Range<usize>,
}

#[derive(Debug, Clone)]
struct Layout {
    branches: Vec<Vec<ConvSlots>>,
    dense: Vec<DenseSlots>,
    total: usize,
}

impl Layout {
    fn new(t: &Topology) -> Self {
        let mut next = 0;
        let mut take = |n: usize| {
            let r = next..next + n;
            next += n;
            r
        };
        let mut branches = Vec::with_capacity(BRANCHES);
        for _ in 0..BRANCHES {
            let mut in_channels = 1;
            let mut size = t.image_size;
            let mut stages = Vec::with_capacity(t.stages.len());
            for st in &t.stages {
                let ks = t.small_kernel * t.small_kernel;
                let kl = t.large_kernel * t.large_kernel;
                stages.push(ConvSlots {
                    in_channels,
                    size,
                    small_w: take(st.small_channels * in_channels * ks),
                    small_b: take(st.small_channels),
                    large_w: take(st.large_channels * in_channels * kl),
                    large_b: take(st.large_channels),
                });
                in_channels = st.out_channels();
                size /= 2;
            }
            branches.push(stages);
        }
        let mut dense = Vec::new();
        let mut inputs = BRANCHES * t.branch_features();
        for &outputs in t.dense.iter().chain(std::iter::once(&t.classes)) {
            dense.push(DenseSlots {
                inputs,
                outputs,
                w: take(outputs * inputs),
                b: take(outputs),
            });
            inputs = outputs;
        }
        Layout {
            branches,
            dense,
            total: next,
        }
    }
}

/// One labelled training or test example: three images and a class.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub images: [Vec<f32>; BRANCHES],
    pub label: usize,
}

impl Example {
    pub fn image_refs(&self) -> [&[f32]; BRANCHES] {
        [&self.images[0], &self.images[1], &self.images[2]]
    }
}

/// Network weights plus the hyperparameters it was trained with.
#[derive(Debug, Clone)]
pub struct ClassifierModel<T: Scalar = f32> {
    topology: Topology,
    layout: Layout,
    params: Vec<T>,
    hyperparameters: Option<TrainConfig>,
}

impl<T: Scalar> PartialEq for ClassifierModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.topology == other.topology
            && self.params == other.params
            && self.hyperparameters == other.hyperparameters
    }
}

struct StageCache<T> {
    input: Vec<T>,
    activation: Vec<T>,
    argmax: Vec<u32>,
}

struct BranchCache<T> {
    stages: Vec<StageCache<T>>,
}

struct HeadCache<T> {
    /// Input of every dense layer (post-dropout for hidden layers).
    inputs: Vec<Vec<T>>,
    /// Post-ReLU output of every hidden layer.
    hidden: Vec<Vec<T>>,
    /// Dropout multipliers per hidden layer (empty when inactive).
    masks: Vec<Vec<T>>,
}

struct ForwardPass<T> {
    branches: Vec<BranchCache<T>>,
    head: HeadCache<T>,
    logits: Vec<T>,
}

impl<T: Scalar> ClassifierModel<T> {
    /// He-uniform weights (`±sqrt(6/fan_in)`), zero biases.
    pub fn new(topology: Topology, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(topology)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = &model.topology;
        let fill = |params: &mut [T], fan_in: usize, rng: &mut ChaCha8Rng| {
            let limit = (6.0 / fan_in as f64).sqrt();
            for p in params {
                *p = T::from_f64(rng.random_range(-limit..limit));
            }
        };
        for stages in &model.layout.branches {
            for s in stages {
                let fs = s.in_channels * t.small_kernel * t.small_kernel;
                let fl = s.in_channels * t.large_kernel * t.large_kernel;
                fill(&mut model.params[s.small_w.clone()], fs, &mut rng);
                fill(&mut model.params[s.large_w.clone()], fl, &mut rng);
            }
        }
        for d in &model.layout.dense {
            fill(&mut model.params[d.w.clone()], d.inputs, &mut rng);
        }
        Ok(model)
    }

    /// All weights and biases zero.
    pub fn zeros(topology: Topology) -> Result<Self> {
        topology.validate()?;
        let layout = Layout::new(&topology);
        let params = vec![T::zero(); layout.total];
        Ok(Self {
            topology,
            layout,
            params,
            hyperparameters: None,
        })
    }

    pub fn from_params(topology: Topology, params: Vec<T>) -> Result<Self> {
        let mut model = Self::zeros(topology)?;
        if params.len() != model.params.len() {
            return Err(Error::invalid(format!(
                "topology needs {} parameters, got {}",
                model.params.len(),
                params.len()
            )));
        }
        model.params = params;
        Ok(model)
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn hyperparameters(&self) -> Option<&TrainConfig> {
        self.hyperparameters.as_ref()
    }

    pub fn set_hyperparameters(&mut self, cfg: Option<TrainConfig>) {
        self.hyperparameters = cfg;
    }

    /// Same weights in another precision.
    pub fn cast<U: Scalar>(&self) -> ClassifierModel<U> {
        ClassifierModel {
            topology: self.topology.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|&p| U::from_f64(p.as_f64())).collect(),
            hyperparameters: self.hyperparameters.clone(),
        }
    }

    /// Parameter index ranges of the output layer's weights and bias.
    pub fn output_layer(&self) -> (Range<usize>, Range<usize>) {
        let last = self.layout.dense.last().expect("at least one dense layer");
        (last.w.clone(), last.b.clone())
    }

    /// Named parameter groups in storage order, for diagnostics.
    pub fn param_groups(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (b, stages) in self.layout.branches.iter().enumerate() {
            for (i, s) in stages.iter().enumerate() {
                let (ks, kl) = (self.topology.small_kernel, self.topology.large_kernel);
                out.push((format!("branch{b}.stage{i}.conv{ks}x{ks}.w"), s.small_w.clone()));
                out.push((format!("branch{b}.stage{i}.conv{ks}x{ks}.b"), s.small_b.clone()));
                out.push((format!("branch{b}.stage{i}.conv{kl}x{kl}.w"), s.large_w.clone()));
                out.push((format!("branch{b}.stage{i}.conv{kl}x{kl}.b"), s.large_b.clone()));
            }
        }
        for (i, d) in self.layout.dense.iter().enumerate() {
            out.push((format!("dense{i}.w"), d.w.clone()));
            out.push((format!("dense{i}.b"), d.b.clone()));
        }
        out
    }

    fn check_images(&self, images: &[&[f32]]) -> Result<()> {
        if images.len() != BRANCHES {
            return Err(Error::invalid(format!("expected {BRANCHES} images, got {}", images.len())));
        }
        let n = self.topology.input_len();
        for (i, img) in images.iter().enumerate() {
            if img.len() != n {
                return Err(Error::invalid(format!(
                    "image {i} has {} pixels, expected {n}",
                    img.len()
                )));
            }
        }
        Ok(())
    }

    /// Class probabilities. Dropout is applied only in `train_mode`, with
    /// masks drawn from `dropout_seed`.
    pub fn forward(&self, images: &[&[f32]], train_mode: bool, dropout_seed: u64) -> Result<Vec<f64>> {
        self.check_images(images)?;
        let pass = self.run_forward(images, train_mode, dropout_seed);
        Ok(softmax(&pass.logits))
    }

    /// Raw output-layer activations before softmax.
    pub fn logits(&self, images: &[&[f32]], train_mode: bool, dropout_seed: u64) -> Result<Vec<f64>> {
        self.check_images(images)?;
        let pass = self.run_forward(images, train_mode, dropout_seed);
        Ok(pass.logits.iter().map(|x| x.as_f64()).collect())
    }

    /// Label (argmax, lowest index on ties) and probabilities, dropout off.
    pub fn predict(&self, images: &[&[f32]]) -> Result<(usize, Vec<f64>)> {
        let probs = self.forward(images, false, 0)?;
        Ok((argmax(&probs), probs))
    }

    /// Flattened output of one branch for one image.
    pub fn branch_features(&self, branch: usize, image: &[f32]) -> Result<Vec<T>> {
        if branch >= BRANCHES {
            return Err(Error::invalid(format!("branch {branch} out of range")));
        }
        if image.len() != self.topology.input_len() {
            return Err(Error::invalid("image size does not match topology"));
        }
        let (_, out) = self.branch_forward(branch, image);
        Ok(out)
    }

    fn run_forward(&self, images: &[&[f32]], train_mode: bool, dropout_seed: u64) -> ForwardPass<T> {
        let mut features = Vec::with_capacity(BRANCHES * self.topology.branch_features());
        let mut branches = Vec::with_capacity(BRANCHES);
        for (b, img) in images.iter().enumerate() {
            let (cache, out) = self.branch_forward(b, img);
            features.extend_from_slice(&out);
            branches.push(cache);
        }
        let (head, logits) = self.head_forward(features, train_mode, dropout_seed);
        ForwardPass {
            branches,
            head,
            logits,
        }
    }

    fn branch_forward(&self, branch: usize, image: &[f32]) -> (BranchCache<T>, Vec<T>) {
        let t = &self.topology;
        let mut x: Vec<T> = image.iter().map(|&p| T::from_f32(p)).collect();
        let mut stages = Vec::with_capacity(t.stages.len());
        for (slots, st) in self.layout.branches[branch].iter().zip(&t.stages) {
            let hw = slots.size * slots.size;
            let mut z = vec![T::zero(); st.out_channels() * hw];
            let (small, large) = z.split_at_mut(st.small_channels * hw);
            self.conv_forward(&x, slots, t.small_kernel, &slots.small_w, &slots.small_b, st.small_channels, small);
            self.conv_forward(&x, slots, t.large_kernel, &slots.large_w, &slots.large_b, st.large_channels, large);
            z.iter_mut().for_each(|v| {
                if *v < T::zero() {
                    *v = T::zero()
                }
            });
            let half = slots.size / 2;
            let mut pooled = vec![T::zero(); st.out_channels() * half * half];
            let mut argmax = vec![0u32; pooled.len()];
            maxpool2(&z, st.out_channels(), slots.size, &mut pooled, &mut argmax);
            stages.push(StageCache {
                input: std::mem::replace(&mut x, pooled),
                activation: z,
                argmax,
            });
        }
        (BranchCache { stages }, x)
    }

    #[allow(clippy::too_many_arguments)]
    fn conv_forward(
        &self,
        input: &[T],
        slots: &ConvSlots,
        k: usize,
        w: &Range<usize>,
        b: &Range<usize>,
        out_channels: usize,
        out: &mut [T],
    ) {
        let hw = slots.size * slots.size;
        let rows = slots.in_channels * k * k;
        let mut cols = vec![T::zero(); rows * hw];
        im2col(input, slots.in_channels, slots.size, k, k / 2, &mut cols);
        T::gemm(out_channels, rows, hw, &self.params[w.clone()], false, &cols, false, out, false);
        for (plane, &bias) in out.chunks_exact_mut(hw).zip(&self.params[b.clone()]) {
            plane.iter_mut().for_each(|v| *v += bias);
        }
    }

    fn head_forward(&self, features: Vec<T>, train_mode: bool, dropout_seed: u64) -> (HeadCache<T>, Vec<T>) {
        let rate = self.topology.dropout;
        let dropping = train_mode && rate > 0.0;
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let mut inputs = Vec::with_capacity(self.layout.dense.len());
        let mut hidden = Vec::new();
        let mut masks = Vec::new();
        let mut x = features;
        let last = self.layout.dense.len() - 1;
        for (i, d) in self.layout.dense.iter().enumerate() {
            let mut y = self.params[d.b.clone()].to_vec();
            T::gemm(d.outputs, d.inputs, 1, &self.params[d.w.clone()], false, &x, false, &mut y, true);
            inputs.push(x);
            if i == last {
                return (HeadCache { inputs, hidden, masks }, y);
            }
            y.iter_mut().for_each(|v| {
                if *v < T::zero() {
                    *v = T::zero()
                }
            });
            let mask: Vec<T> = if dropping {
                (0..y.len())
                    .map(|_| if rng.random_bool(rate) { T::zero() } else { keep })
                    .collect()
            } else {
                Vec::new()
            };
            let dropped = if mask.is_empty() {
                y.clone()
            } else {
                y.iter().zip(&mask).map(|(&a, &m)| a * m).collect()
            };
            hidden.push(y);
            masks.push(mask);
            x = dropped;
        }
        unreachable!("dense stack always ends with the output layer")
    }

    /// Accumulates `d loss / d params` for one example into `grad`, given
    /// `d loss / d logits`.
    fn backward(&self, pass: &ForwardPass<T>, dlogits: &[T], grad: &mut [T]) {
        // head
        let mut dy = dlogits.to_vec();
        let mut dfeatures = Vec::new();
        for (i, d) in self.layout.dense.iter().enumerate().rev() {
            let x = &pass.head.inputs[i];
            for (g, &v) in grad[d.b.clone()].iter_mut().zip(&dy) {
                *g += v;
            }
            // dW += dy·xᵀ
            T::gemm(d.outputs, 1, d.inputs, &dy, false, x, false, &mut grad[d.w.clone()], true);
            let mut dx = vec![T::zero(); d.inputs];
            T::gemm(d.inputs, d.outputs, 1, &self.params[d.w.clone()], true, &dy, false, &mut dx, false);
            if i == 0 {
                dfeatures = dx;
                break;
            }
            // through dropout and ReLU of the previous hidden layer
            let h = &pass.head.hidden[i - 1];
            let mask = &pass.head.masks[i - 1];
            for (j, v) in dx.iter_mut().enumerate() {
                if !mask.is_empty() {
                    *v *= mask[j];
                }
                if h[j] <= T::zero() {
                    *v = T::zero();
                }
            }
            dy = dx;
        }
        let per_branch = self.topology.branch_features();
        for (b, cache) in pass.branches.iter().enumerate() {
            let dout = &dfeatures[b * per_branch..(b + 1) * per_branch];
            self.branch_backward(b, cache, dout, grad);
        }
    }

    fn branch_backward(&self, branch: usize, cache: &BranchCache<T>, dout: &[T], grad: &mut [T]) {
        let t = &self.topology;
        let mut dpooled = dout.to_vec();
        for (idx, ((slots, st), sc)) in self.layout.branches[branch]
            .iter()
            .zip(&t.stages)
            .zip(&cache.stages)
            .rev()
            .enumerate()
        {
            let hw = slots.size * slots.size;
            let mut dz = vec![T::zero(); sc.activation.len()];
            maxpool2_backward(&dpooled, &sc.argmax, &mut dz);
            for (g, &a) in dz.iter_mut().zip(&sc.activation) {
                if a <= T::zero() {
                    *g = T::zero();
                }
            }
            let need_input_grad = idx + 1 < t.stages.len();
            let mut dinput = if need_input_grad {
                vec![T::zero(); sc.input.len()]
            } else {
                Vec::new()
            };
            let (dz_small, dz_large) = dz.split_at(st.small_channels * hw);
            for (k, w, b, dzk, channels) in [
                (t.small_kernel, &slots.small_w, &slots.small_b, dz_small, st.small_channels),
                (t.large_kernel, &slots.large_w, &slots.large_b, dz_large, st.large_channels),
            ] {
                for (g, plane) in grad[b.clone()].iter_mut().zip(dzk.chunks_exact(hw)) {
                    *g += plane.iter().copied().sum();
                }
                let rows = slots.in_channels * k * k;
                let mut cols = vec![T::zero(); rows * hw];
                im2col(&sc.input, slots.in_channels, slots.size, k, k / 2, &mut cols);
                // dW += dZ·colsᵀ
                T::gemm(channels, hw, rows, dzk, false, &cols, true, &mut grad[w.clone()], true);
                if need_input_grad {
                    // dcols = Wᵀ·dZ, reusing the buffer
                    T::gemm(rows, channels, hw, &self.params[w.clone()], true, dzk, false, &mut cols, false);
                    col2im(&cols, slots.in_channels, slots.size, k, k / 2, &mut dinput);
                }
            }
            dpooled = dinput;
        }
    }

    /// Mean cross-entropy over `batch` and its gradient with respect to
    /// every parameter. Example `i` draws dropout masks from
    /// `derive(dropout_seed, [i])` when `train_mode` is set.
    pub fn loss_and_gradients(&self, batch: &[Example], train_mode: bool, dropout_seed: u64) -> Result<(f64, Vec<T>)> {
        let refs: Vec<&Example> = batch.iter().collect();
        let (loss, grad, _) = self.batch_gradients(&refs, train_mode, dropout_seed)?;
        Ok((loss, grad))
    }

    /// As [`Self::loss_and_gradients`], also returning each example's
    /// train-mode prediction.
    pub(crate) fn batch_gradients(
        &self,
        batch: &[&Example],
        train_mode: bool,
        dropout_seed: u64,
    ) -> Result<(f64, Vec<T>, Vec<usize>)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for (i, ex) in batch.iter().enumerate() {
            if ex.label >= self.topology.classes {
                return Err(Error::invalid(format!(
                    "example {i} has label {} outside 0..{}",
                    ex.label, self.topology.classes
                )));
            }
            self.check_images(&ex.image_refs())?;
        }
        let scale = 1.0 / batch.len() as f64;
        // fixed chunking keeps the reduction order independent of thread count
        const CHUNK: usize = 4;
        let partials: Vec<(f64, Vec<T>, Vec<usize>)> = batch
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut grad = vec![T::zero(); self.params.len()];
                let mut loss = 0.0;
                let mut preds = Vec::with_capacity(chunk.len());
                for (j, ex) in chunk.iter().enumerate() {
                    let seed = derive(dropout_seed, &[(c * CHUNK + j) as u64]);
                    let pass = self.run_forward(&ex.image_refs(), train_mode, seed);
                    let probs = softmax(&pass.logits);
                    loss -= probs[ex.label].max(f64::MIN_POSITIVE).ln();
                    preds.push(argmax(&probs));
                    let dlogits: Vec<T> = probs
                        .iter()
                        .enumerate()
                        .map(|(k, &p)| T::from_f64((p - if k == ex.label { 1.0 } else { 0.0 }) * scale))
                        .collect();
                    self.backward(&pass, &dlogits, &mut grad);
                }
                (loss, grad, preds)
            })
            .collect();
        let mut iter = partials.into_iter();
        let (mut loss, mut grad, mut preds) = iter.next().expect("non-empty batch");
        for (l, g, p) in iter {
            loss += l;
            grad.iter_mut().zip(&g).for_each(|(a, &b)| *a += b);
            preds.extend(p);
        }
        Ok((loss * scale, grad, preds))
    }
}

impl ClassifierModel<f32> {
    /// Writes the versioned little-endian model file.
    pub fn save(&self, mut out: impl Write) -> Result<()> {
        let t = &self.topology;
        out.write_all(MODEL_MAGIC)?;
        let w = |v: u32, out: &mut dyn Write| out.write_all(&v.to_le_bytes());
        w(MODEL_VERSION, &mut out)?;
        w(BRANCHES as u32, &mut out)?;
        w(t.image_size as u32, &mut out)?;
        w(t.small_kernel as u32, &mut out)?;
        w(t.large_kernel as u32, &mut out)?;
        w(t.stages.len() as u32, &mut out)?;
        for s in &t.stages {
            w(s.small_channels as u32, &mut out)?;
            w(s.large_channels as u32, &mut out)?;
        }
        w(t.dense.len() as u32, &mut out)?;
        for &d in &t.dense {
            w(d as u32, &mut out)?;
        }
        w(t.classes as u32, &mut out)?;
        out.write_all(&t.dropout.to_le_bytes())?;
        match &self.hyperparameters {
            None => out.write_all(&[0])?,
            Some(h) => {
                out.write_all(&[1])?;
                h.write_le(&mut out)?;
            }
        }
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        let mut bytes = Vec::with_capacity(self.params.len() * 4);
        for p in &self.params {
            bytes.extend_from_slice(&p.to_le_bytes());
        }
        out.write_all(&bytes)?;
        Ok(())
    }

    pub fn load(mut input: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::format("model file", "bad magic"));
        }
        let r = |input: &mut dyn Read| -> Result<usize> {
            let mut b = [0u8; 4];
            input.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b) as usize)
        };
        let version = r(&mut input)?;
        if version != MODEL_VERSION as usize {
            return Err(Error::format("model file", format!("unsupported version {version}")));
        }
        let branches = r(&mut input)?;
        if branches != BRANCHES {
            return Err(Error::format("model file", format!("{branches} branches, expected {BRANCHES}")));
        }
        let image_size = r(&mut input)?;
        let small_kernel = r(&mut input)?;
        let large_kernel = r(&mut input)?;
        let n_stages = r(&mut input)?;
        if n_stages > 16 {
            return Err(Error::format("model file", "implausible stage count"));
        }
        let mut stages = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            stages.push(ConvStage {
                small_channels: r(&mut input)?,
                large_channels: r(&mut input)?,
            });
        }
        let n_dense = r(&mut input)?;
        if n_dense > 64 {
            return Err(Error::format("model file", "implausible dense layer count"));
        }
        let mut dense = Vec::with_capacity(n_dense);
        for _ in 0..n_dense {
            dense.push(r(&mut input)?);
        }
        let classes = r(&mut input)?;
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let dropout = f64::from_le_bytes(b8);
        let topology = Topology {
            image_size,
            small_kernel,
            large_kernel,
            stages,
            dense,
            classes,
            dropout,
        };
        topology
            .validate()
            .map_err(|e| Error::format("model file", format!("topology: {e}")))?;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let hyperparameters = match flag[0] {
            0 => None,
            1 => Some(TrainConfig::read_le(&mut input)?),
            other => return Err(Error::format("model file", format!("bad hyperparameter flag {other}"))),
        };
        input.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut model = Self::zeros(topology)?;
        if count != model.params.len() {
            return Err(Error::format(
                "model file",
                format!("{count} parameters, topology needs {}", model.params.len()),
            ));
        }
        let mut bytes = vec![0u8; count * 4];
        input.read_exact(&mut bytes)?;
        for (p, chunk) in model.params.iter_mut().zip(bytes.chunks_exact(4)) {
            *p = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        let mut trailing = [0u8; 1];
        if input.read(&mut trailing)? != 0 {
            return Err(Error::format("model file", "trailing bytes"));
        }
        model.hyperparameters = hyperparameters;
        Ok(model)
    }
}

pub(crate) fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let max = logits.iter().map(|x| x.as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x.as_f64() - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
