use ndarray::{concatenate, s, Array1, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::calllog::{SequenceFeatures, CALL_CHANNELS, STATIC_DIM};
use crate::predictors::{PredictError, Prediction};
use crate::seed::SeedTree;

/// Layer sizes and batch-norm constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CondipArch {
    pub dynamic_channels: usize,
    /// Width of the static branch input: profile encoding plus scalar call features.
    pub static_dim: usize,
    pub conv_kernels: Vec<usize>,
    pub kernel_width: usize,
    pub static_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for CondipArch {
    fn default() -> Self {
        Self {
            dynamic_channels: CALL_CHANNELS,
            static_dim: STATIC_DIM + 6,
            conv_kernels: vec![20, 20],
            kernel_width: 3,
            static_hidden: vec![50, 100],
            head_hidden: vec![100, 100],
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }
}

impl CondipArch {
    pub fn validate(&self) -> Result<(), PredictError> {
        let bad = |m: &str| Err(PredictError::InvalidConfig(m.to_string()));
        if self.dynamic_channels == 0 || self.static_dim == 0 {
            return bad("input widths must be positive");
        }
        if self.kernel_width % 2 == 0 {
            return bad("kernel_width must be odd");
        }
        for (name, sizes) in [
            ("conv_kernels", &self.conv_kernels),
            ("static_hidden", &self.static_hidden),
            ("head_hidden", &self.head_hidden),
        ] {
            if sizes.is_empty() || sizes.contains(&0) {
                return bad(&format!("{name} must be a non-empty list of positive sizes"));
            }
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || self.bn_eps <= 0.0 {
            return bad("bn_momentum must lie in [0, 1) and bn_eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Infer,
}

/// Parameter groups for optimizer bookkeeping and gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamGroup {
    Conv,
    StaticEncoder,
    Head,
    BatchNorm,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] =
        [ParamGroup::Conv, ParamGroup::StaticEncoder, ParamGroup::Head, ParamGroup::BatchNorm];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `(out_channels, in_channels, width)`
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

/// Bias-free dense layer followed by batch norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBn {
    /// `(inputs, outputs)`
    pub weight: Array2<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondipParams {
    pub conv: Vec<Conv1d>,
    pub static_encoder: Vec<DenseBn>,
    pub head: Vec<DenseBn>,
    pub output_weight: Array1<f64>,
    pub output_bias: Array1<f64>,
}

impl CondipParams {
    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Every parameter tensor as a flat slice, tagged with its group.
    pub fn tensors(&self) -> Vec<(ParamGroup, &[f64])> {
        let mut out: Vec<(ParamGroup, &[f64])> = Vec::new();
        for c in &self.conv {
            out.push((ParamGroup::Conv, flat(&c.weight)));
            out.push((ParamGroup::Conv, flat(&c.bias)));
        }
        for (group, layers) in [(ParamGroup::StaticEncoder, &self.static_encoder), (ParamGroup::Head, &self.head)] {
            for l in layers {
                out.push((group, flat(&l.weight)));
                out.push((ParamGroup::BatchNorm, flat(&l.gamma)));
                out.push((ParamGroup::BatchNorm, flat(&l.beta)));
            }
        }
        out.push((ParamGroup::Head, flat(&self.output_weight)));
        out.push((ParamGroup::Head, flat(&self.output_bias)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamGroup, &mut [f64])> {
        let mut out: Vec<(ParamGroup, &mut [f64])> = Vec::new();
        for c in &mut self.conv {
            out.push((ParamGroup::Conv, flat_mut(&mut c.weight)));
            out.push((ParamGroup::Conv, flat_mut(&mut c.bias)));
        }
        for (group, layers) in
            [(ParamGroup::StaticEncoder, &mut self.static_encoder), (ParamGroup::Head, &mut self.head)]
        {
            for l in layers.iter_mut() {
                out.push((group, flat_mut(&mut l.weight)));
                out.push((ParamGroup::BatchNorm, flat_mut(&mut l.gamma)));
                out.push((ParamGroup::BatchNorm, flat_mut(&mut l.beta)));
            }
        }
        out.push((ParamGroup::Head, flat_mut(&mut self.output_weight)));
        out.push((ParamGroup::Head, flat_mut(&mut self.output_bias)));
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self -= rate * grads`
    pub fn sgd_step(&mut self, grads: &CondipParams, rate: f64) {
        for ((_, p), (_, g)) in self.tensors_mut().into_iter().zip(grads.tensors()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= rate * gi;
            }
        }
    }
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}

fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored in standard layout")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

/// Stacked inputs for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct CondipBatch {
    /// `(batch, time, channels)`; rows at or after `valid_len` are ignored.
    pub dynamic: Array3<f64>,
    pub valid_len: Vec<usize>,
    /// `(batch, static_dim)`
    pub static_input: Array2<f64>,
}

impl CondipBatch {
    pub fn from_features(features: &[&SequenceFeatures]) -> Result<Self, PredictError> {
        let Some(first) = features.first() else {
            return Err(PredictError::EmptyData);
        };
        let s_dim = first.static_features.len() + first.scalar_calls.len();
        let t = features.iter().map(|f| f.dynamic.len()).max().unwrap_or(0);
        let mut dynamic = Array3::zeros((features.len(), t, CALL_CHANNELS));
        let mut static_input = Array2::zeros((features.len(), s_dim));
        let mut valid_len = Vec::with_capacity(features.len());
        for (b, f) in features.iter().enumerate() {
            let st = f.flat_static();
            if st.len() != s_dim {
                return Err(PredictError::InvalidConfig(format!(
                    "static feature width {} differs from {}",
                    st.len(),
                    s_dim
                )));
            }
            static_input.row_mut(b).assign(&Array1::from(st));
            for (ti, row) in f.dynamic.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    dynamic[[b, ti, c]] = *v;
                }
            }
            valid_len.push(f.valid_len.min(f.dynamic.len()));
        }
        Ok(Self { dynamic, valid_len, static_input })
    }

    pub fn len(&self) -> usize {
        self.valid_len.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_len.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            dynamic: self.dynamic.select(Axis(0), rows),
            valid_len: rows.iter().map(|&i| self.valid_len[i]).collect(),
            static_input: self.static_input.select(Axis(0), rows),
        }
    }
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
    output: Array2<f64>,
}

/// Intermediates retained by [`CondipNetwork::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    valid_len: Vec<usize>,
    conv_inputs: Vec<Array3<f64>>,
    conv_outputs: Vec<Array3<f64>>,
    pooled: Array2<f64>,
    static_layers: Vec<DenseCache>,
    head_layers: Vec<DenseCache>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

impl ForwardCache {
    /// Time-averaged convolution features, `(batch, kernels)`.
    pub fn pooled(&self) -> &Array2<f64> {
        &self.pooled
    }

    /// Batch-normalized pre-activations before scale and shift, static branch first.
    pub fn normalized(&self) -> impl Iterator<Item = &Array2<f64>> {
        self.static_layers.iter().chain(&self.head_layers).map(|c| &c.xhat)
    }
}

/// Loss and parameter gradients for one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub params: CondipParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondipNetwork {
    pub arch: CondipArch,
    pub params: CondipParams,
    /// Static-encoder layers first, then head layers.
    pub running: Vec<BnStats>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `(1/B) Σ w_i (softplus(z_i) − y_i z_i)`, with `w_i` the weight of the sample's class.
pub fn weighted_bce(logits: &Array1<f64>, labels: &[bool], class_weights: (f64, f64)) -> f64 {
    let b = logits.len() as f64;
    logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let (w, t) = if y { (class_weights.1, 1.0) } else { (class_weights.0, 0.0) };
            w * (softplus(z) - t * z)
        })
        .sum::<f64>()
        / b
}

/// `f̂[b, k] = Σ_{t < T_b} h[b, t, k] / T_b`; zero when `T_b = 0`.
pub fn masked_mean_pool(h: &Array3<f64>, valid_len: &[usize]) -> Array2<f64> {
    let (batch, t_max, k) = h.dim();
    let mut out = Array2::zeros((batch, k));
    for b in 0..batch {
        let t = valid_len[b].min(t_max);
        if t == 0 {
            continue;
        }
        for ki in 0..k {
            let mut sum = 0.0;
            for ti in 0..t {
                sum += h[[b, ti, ki]];
            }
            out[[b, ki]] = sum / t as f64;
        }
    }
    out
}

fn uniform<R: Rng>(rng: &mut R, fan_in: usize, n: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

fn dense_bn<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> DenseBn {
    DenseBn {
        weight: Array2::from_shape_vec((inputs, outputs), uniform(rng, inputs, inputs * outputs)).expect("shape"),
        gamma: Array1::ones(outputs),
        beta: Array1::zeros(outputs),
    }
}

/// Same-padded convolution over the first `valid_len` steps, tanh, zero elsewhere.
fn conv_forward(layer: &Conv1d, x: &Array3<f64>, valid_len: &[usize]) -> Array3<f64> {
    let (batch, t_max, cin) = x.dim();
    let (k, _, width) = layer.weight.dim();
    let pad = width / 2;
    let xs = flat(x);
    let ws = flat(&layer.weight);
    let mut out = Array3::zeros((batch, t_max, k));
    let os = flat_mut(&mut out);
    for b in 0..batch {
        let t_valid = valid_len[b].min(t_max);
        for t in 0..t_valid {
            for ki in 0..k {
                let mut z = layer.bias[ki];
                for d in 0..width {
                    let Some(src) = (t + d).checked_sub(pad).filter(|&s| s < t_valid) else {
                        continue;
                    };
                    let xrow = &xs[(b * t_max + src) * cin..][..cin];
                    let wrow = &ws[ki * cin * width..];
                    for (c, xv) in xrow.iter().enumerate() {
                        z += wrow[c * width + d] * xv;
                    }
                }
                os[(b * t_max + t) * k + ki] = z.tanh();
            }
        }
    }
    out
}

#[allow(clippy::needless_range_loop)]
fn conv_backward(
    layer: &Conv1d,
    x: &Array3<f64>,
    out: &Array3<f64>,
    dout: &Array3<f64>,
    valid_len: &[usize],
    grad: &mut Conv1d,
) -> Array3<f64> {
    let (batch, t_max, cin) = x.dim();
    let (k, _, width) = layer.weight.dim();
    let pad = width / 2;
    let (xs, ws, os, ds) = (flat(x), flat(&layer.weight), flat(out), flat(dout));
    let mut dx = Array3::zeros((batch, t_max, cin));
    let dxs = flat_mut(&mut dx);
    let gw = flat_mut(&mut grad.weight);
    let gb = flat_mut(&mut grad.bias);
    for b in 0..batch {
        let t_valid = valid_len[b].min(t_max);
        for t in 0..t_valid {
            for ki in 0..k {
                let idx = (b * t_max + t) * k + ki;
                let dz = ds[idx] * (1.0 - os[idx] * os[idx]);
                gb[ki] += dz;
                for d in 0..width {
                    let Some(src) = (t + d).checked_sub(pad).filter(|&s| s < t_valid) else {
                        continue;
                    };
                    let base = (b * t_max + src) * cin;
                    for c in 0..cin {
                        let wi = (ki * cin + c) * width + d;
                        gw[wi] += dz * xs[base + c];
                        dxs[base + c] += ws[wi] * dz;
                    }
                }
            }
        }
    }
    dx
}

fn dense_forward(layer: &DenseBn, stats: &BnStats, input: Array2<f64>, mode: Mode, eps: f64) -> DenseCache {
    let z = input.dot(&layer.weight);
    let (batch_mean, batch_var) = match mode {
        Mode::Train => (z.mean_axis(Axis(0)).expect("non-empty batch"), z.var_axis(Axis(0), 0.0)),
        Mode::Infer => (stats.mean.clone(), stats.var.clone()),
    };
    let inv_std = batch_var.mapv(|v| 1.0 / (v + eps).sqrt());
    let xhat = (&z - &batch_mean) * &inv_std;
    let output = (&xhat * &layer.gamma + &layer.beta).mapv(f64::tanh);
    DenseCache { input, xhat, inv_std, batch_mean, batch_var, output }
}

fn dense_backward(
    layer: &DenseBn,
    cache: &DenseCache,
    dout: &Array2<f64>,
    mode: Mode,
    grad: &mut DenseBn,
) -> Array2<f64> {
    let dy = dout * &cache.output.mapv(|a| 1.0 - a * a);
    grad.gamma = (&dy * &cache.xhat).sum_axis(Axis(0));
    grad.beta = dy.sum_axis(Axis(0));
    let dxhat = &dy * &layer.gamma;
    let dz = match mode {
        Mode::Train => {
            let b = dy.nrows() as f64;
            let s1 = dxhat.sum_axis(Axis(0));
            let s2 = (&dxhat * &cache.xhat).sum_axis(Axis(0));
            (&dxhat * b - &s1 - &cache.xhat * &s2) * &(&cache.inv_std / b)
        }
        Mode::Infer => &dxhat * &cache.inv_std,
    };
    grad.weight = cache.input.t().dot(&dz);
    dz.dot(&layer.weight.t())
}

impl CondipNetwork {
    /// Weights uniform in `±1/√fan_in` from the `init` stream of `seed`;
    /// biases and shifts zero, scales one, running statistics `(0, 1)`.
    pub fn new(arch: CondipArch, seed: u64) -> Result<Self, PredictError> {
        arch.validate()?;
        let mut rng = SeedTree::new(seed).rng("init");
        let mut conv = Vec::new();
        let mut cin = arch.dynamic_channels;
        for &k in &arch.conv_kernels {
            let fan_in = cin * arch.kernel_width;
            let weight = Array3::from_shape_vec((k, cin, arch.kernel_width), uniform(&mut rng, fan_in, k * fan_in))
                .expect("shape");
            conv.push(Conv1d { weight, bias: Array1::zeros(k) });
            cin = k;
        }
        let mut running = Vec::new();
        let mut stack = |inputs: usize, sizes: &[usize], rng: &mut crate::seed::Rng| {
            let mut layers = Vec::new();
            let mut i = inputs;
            for &o in sizes {
                layers.push(dense_bn(rng, i, o));
                running.push(BnStats { mean: Array1::zeros(o), var: Array1::ones(o) });
                i = o;
            }
            layers
        };
        let static_encoder = stack(arch.static_dim, &arch.static_hidden, &mut rng);
        let head_in = cin + arch.static_hidden.last().copied().unwrap_or(0);
        let head = stack(head_in, &arch.head_hidden, &mut rng);
        let h = *arch.head_hidden.last().expect("validated");
        let output_weight = Array1::from(uniform(&mut rng, h, h));
        let params = CondipParams { conv, static_encoder, head, output_weight, output_bias: Array1::zeros(1) };
        Ok(Self { arch, params, running })
    }

    pub fn forward(&self, batch: &CondipBatch, mode: Mode) -> ForwardCache {
        let eps = self.arch.bn_eps;
        let mut conv_inputs = Vec::new();
        let mut conv_outputs = Vec::new();
        let mut x = batch.dynamic.clone();
        for layer in &self.params.conv {
            let h = conv_forward(layer, &x, &batch.valid_len);
            conv_inputs.push(x);
            x = h.clone();
            conv_outputs.push(h);
        }
        let pooled = masked_mean_pool(&x, &batch.valid_len);

        let n_static = self.params.static_encoder.len();
        let mut static_layers: Vec<DenseCache> = Vec::new();
        let mut s = batch.static_input.clone();
        for (layer, stats) in self.params.static_encoder.iter().zip(&self.running) {
            let c = dense_forward(layer, stats, s, mode, eps);
            s = c.output.clone();
            static_layers.push(c);
        }
        let mut h = concatenate![Axis(1), pooled, s];
        let mut head_layers: Vec<DenseCache> = Vec::new();
        for (layer, stats) in self.params.head.iter().zip(&self.running[n_static..]) {
            let c = dense_forward(layer, stats, h, mode, eps);
            h = c.output.clone();
            head_layers.push(c);
        }
        let logits = h.dot(&self.params.output_weight) + self.params.output_bias[0];
        let probabilities = logits.mapv(sigmoid);
        ForwardCache {
            mode,
            valid_len: batch.valid_len.clone(),
            conv_inputs,
            conv_outputs,
            pooled,
            static_layers,
            head_layers,
            logits,
            probabilities,
        }
    }

    /// Weighted cross-entropy of a forward pass and its exact gradients.
    /// `class_weights = (negative, positive)`.
    pub fn backward(&self, cache: &ForwardCache, labels: &[bool], class_weights: (f64, f64)) -> Gradients {
        let b = labels.len() as f64;
        let loss = weighted_bce(&cache.logits, labels, class_weights);
        let mut grads = self.params.zeros_like();
        let dlogit: Array1<f64> = cache
            .probabilities
            .iter()
            .zip(labels)
            .map(|(&p, &y)| {
                let (w, t) = if y { (class_weights.1, 1.0) } else { (class_weights.0, 0.0) };
                w * (p - t) / b
            })
            .collect();

        let last = cache.head_layers.last().expect("validated").output.view();
        grads.output_weight = last.t().dot(&dlogit);
        grads.output_bias[0] = dlogit.sum();
        let mut dh = dlogit.insert_axis(Axis(1)).dot(&self.params.output_weight.view().insert_axis(Axis(0)));

        for (i, layer) in self.params.head.iter().enumerate().rev() {
            dh = dense_backward(layer, &cache.head_layers[i], &dh, cache.mode, &mut grads.head[i]);
        }
        let k = cache.pooled.ncols();
        let dpooled = dh.slice(s![.., ..k]).to_owned();
        let mut ds = dh.slice(s![.., k..]).to_owned();
        for (i, layer) in self.params.static_encoder.iter().enumerate().rev() {
            ds = dense_backward(layer, &cache.static_layers[i], &ds, cache.mode, &mut grads.static_encoder[i]);
        }

        let last_conv = cache.conv_outputs.last().expect("validated");
        let (batch, t_max, _) = last_conv.dim();
        let mut dconv = Array3::zeros(last_conv.dim());
        for bi in 0..batch {
            let t = cache.valid_len[bi].min(t_max);
            for ti in 0..t {
                for ki in 0..k {
                    dconv[[bi, ti, ki]] = dpooled[[bi, ki]] / t as f64;
                }
            }
        }
        for (i, layer) in self.params.conv.iter().enumerate().rev() {
            dconv = conv_backward(
                layer,
                &cache.conv_inputs[i],
                &cache.conv_outputs[i],
                &dconv,
                &cache.valid_len,
                &mut grads.conv[i],
            );
        }
        Gradients { loss, params: grads }
    }

    fn dense_caches(cache: &ForwardCache) -> impl Iterator<Item = &DenseCache> {
        cache.static_layers.iter().chain(&cache.head_layers)
    }

    /// Exponential moving average of the batch statistics of a training pass.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let m = self.arch.bn_momentum;
        for (stats, c) in self.running.iter_mut().zip(Self::dense_caches(cache)) {
            stats.mean = &stats.mean * m + &c.batch_mean * (1.0 - m);
            stats.var = &stats.var * m + &c.batch_var * (1.0 - m);
        }
    }

    /// Sets the running statistics to the batch statistics of `cache`.
    pub fn calibrate_running_stats(&mut self, cache: &ForwardCache) {
        for (stats, c) in self.running.iter_mut().zip(Self::dense_caches(cache)) {
            stats.mean = c.batch_mean.clone();
            stats.var = c.batch_var.clone();
        }
    }

    pub fn predict_batch(&self, batch: &CondipBatch) -> Vec<f64> {
        self.forward(batch, Mode::Infer).probabilities.to_vec()
    }

    pub fn predict(&self, features: &[SequenceFeatures]) -> Result<Vec<Prediction>, PredictError> {
        if features.is_empty() {
            return Ok(Vec::new());
        }
        let refs: Vec<&SequenceFeatures> = features.iter().collect();
        let batch = CondipBatch::from_features(&refs)?;
        if batch.static_input.ncols() != self.arch.static_dim {
            return Err(PredictError::InvalidConfig(format!(
                "model expects {} static inputs, got {}",
                self.arch.static_dim,
                batch.static_input.ncols()
            )));
        }
        Ok(self.predict_batch(&batch).into_iter().map(Prediction::from_probability).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    pub(crate) fn small_arch(static_dim: usize) -> CondipArch {
        CondipArch {
            dynamic_channels: CALL_CHANNELS,
            static_dim,
            conv_kernels: vec![2, 2],
            kernel_width: 3,
            static_hidden: vec![3, 4],
            head_hidden: vec![4, 3],
            ..CondipArch::default()
        }
    }

    fn random_batch(n: usize, static_dim: usize, seed: u64) -> (CondipBatch, Vec<bool>) {
        let mut rng = crate::seed::Rng::seed_from_u64(seed);
        let mut dynamic = Array3::zeros((n, 8, CALL_CHANNELS));
        let mut valid_len = Vec::new();
        for b in 0..n {
            let t = rng.random_range(0..=8);
            for ti in 0..t {
                for c in 0..CALL_CHANNELS {
                    dynamic[[b, ti, c]] = rng.random_range(-1.0..1.0);
                }
            }
            valid_len.push(t);
        }
        let static_input = Array2::from_shape_fn((n, static_dim), |_| rng.random_range(-2.0..2.0));
        let labels = (0..n).map(|_| rng.random_bool(0.5)).collect();
        (CondipBatch { dynamic, valid_len, static_input }, labels)
    }

    fn loss(net: &CondipNetwork, batch: &CondipBatch, labels: &[bool], w: (f64, f64)) -> f64 {
        weighted_bce(&net.forward(batch, Mode::Train).logits, labels, w)
    }

    #[test]
    fn pooling_averages_valid_steps() {
        // Two time steps of two features: f = [[1, 3], [2, 4]] indexed (feature, time).
        let h = Array3::from_shape_vec((1, 2, 2), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(masked_mean_pool(&h, &[2]), ndarray::arr2(&[[2.0, 3.0]]));
        let mut padded = Array3::zeros((1, 5, 2));
        padded.slice_mut(s![.., ..2, ..]).assign(&h);
        assert_eq!(masked_mean_pool(&padded, &[2]), ndarray::arr2(&[[2.0, 3.0]]));
        assert_eq!(masked_mean_pool(&h, &[0]), ndarray::arr2(&[[0.0, 0.0]]));
    }

    #[test]
    fn zero_weights_give_one_half() {
        let mut net = CondipNetwork::new(small_arch(4), 1).unwrap();
        for (_, t) in net.params.tensors_mut() {
            t.fill(0.0);
        }
        let (batch, _) = random_batch(5, 4, 2);
        for p in net.forward(&batch, Mode::Infer).probabilities {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let net = CondipNetwork::new(small_arch(4), seed).unwrap();
            let (batch, labels) = random_batch(6, 4, seed + 100);
            let w = (1.0, 1.75);
            let grads = net.backward(&net.forward(&batch, Mode::Train), &labels, w).params;
            let h = 1e-4;
            let n_tensors = net.params.tensors().len();
            for ti in 0..n_tensors {
                let (group, analytic) = grads.tensors()[ti];
                let len = analytic.len();
                let mut num = vec![0.0; len];
                for i in 0..len {
                    let mut plus = net.clone();
                    plus.params.tensors_mut()[ti].1[i] += h;
                    let mut minus = net.clone();
                    minus.params.tensors_mut()[ti].1[i] -= h;
                    num[i] = (loss(&plus, &batch, &labels, w) - loss(&minus, &batch, &labels, w)) / (2.0 * h);
                }
                let diff: f64 = analytic.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale: f64 =
                    analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + num.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(diff <= 1e-4 * scale.max(1e-8), "{group:?} tensor {ti}: {diff} vs {scale}");
            }
        }
    }

    #[test]
    fn class_weights_scale_linearly() {
        let net = CondipNetwork::new(small_arch(4), 7).unwrap();
        let (batch, labels) = random_batch(6, 4, 8);
        let cache = net.forward(&batch, Mode::Train);
        let one = net.backward(&cache, &labels, (1.0, 1.0));
        let two = net.backward(&cache, &labels, (2.0, 2.0));
        assert_eq!(two.loss, 2.0 * one.loss);
        for ((_, a), (_, b)) in one.params.tensors().into_iter().zip(two.params.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*y, 2.0 * x);
            }
        }
        let positives = vec![true; 6];
        let zero = net.backward(&cache, &positives, (1.0, 0.0));
        assert_eq!(zero.loss, 0.0);
        assert!(zero.params.tensors().iter().all(|(_, t)| t.iter().all(|&g| g == 0.0)));
    }

    #[test]
    fn batch_norm_normalizes_in_train_mode() {
        let mut arch = small_arch(4);
        arch.bn_eps = 1e-12;
        let net = CondipNetwork::new(arch, 3).unwrap();
        let (batch, _) = random_batch(32, 4, 4);
        let cache = net.forward(&batch, Mode::Train);
        for xhat in cache.normalized() {
            for col in xhat.columns() {
                let mean = col.mean().unwrap();
                let var = col.var(0.0);
                assert!(mean.abs() < 1e-6);
                assert!((var - 1.0).abs() < 1e-5, "variance {var}");
            }
        }
    }

    #[test]
    fn calibrated_infer_matches_train() {
        let mut net = CondipNetwork::new(small_arch(4), 5).unwrap();
        let (batch, _) = random_batch(16, 4, 6);
        let train = net.forward(&batch, Mode::Train);
        net.calibrate_running_stats(&train);
        let infer = net.forward(&batch, Mode::Infer);
        for (a, b) in train.probabilities.iter().zip(&infer.probabilities) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn same_seed_same_network() {
        let a = CondipNetwork::new(CondipArch::default(), 11).unwrap();
        assert_eq!(a, CondipNetwork::new(CondipArch::default(), 11).unwrap());
        assert_ne!(a, CondipNetwork::new(CondipArch::default(), 12).unwrap());
        assert!(CondipNetwork::new(CondipArch { kernel_width: 2, ..CondipArch::default() }, 0).is_err());
    }
}
