//! Dense feed-forward networks: construction, inference, calibration,
//! training with ADAM and top-k evaluation.
//!
//! Layer `k` maps `X(k)` to `X(k+1) = act(W(k) X(k) + b(k))`, with `W(k)` of
//! shape `out_dim x in_dim`. The last layer's outputs are treated as logits.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, DenseVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    /// tanh approximation of GELU.
    Gelu,
    Identity,
    /// `x * sigmoid(x)`; used by gated feed-forward blocks.
    Silu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Gelu => 0.5 * x * (1.0 + gelu_inner(x).tanh()),
            Activation::Identity => x,
            Activation::Silu => x * sigmoid(x),
        }
    }

    /// Derivative with respect to the pre-activation.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Gelu => {
                let t = gelu_inner(x).tanh();
                let inner_grad = GELU_C * (1.0 + 3.0 * 0.044715 * x * x);
                0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * inner_grad
            }
            Activation::Identity => 1.0,
            Activation::Silu => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Gelu => "gelu",
            Activation::Identity => "identity",
            Activation::Silu => "silu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "gelu" => Ok(Activation::Gelu),
            "identity" => Ok(Activation::Identity),
            "silu" => Ok(Activation::Silu),
            other => Err(Error::InvalidParams(format!("unknown activation {other:?}"))),
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu_inner(x: f64) -> f64 {
    GELU_C * (x + 0.044715 * x * x * x)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub weights: DenseMatrix,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

impl MlpLayer {
    pub fn new(weights: DenseMatrix, bias: Vec<f32>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::DimensionMismatch {
                op: "MlpLayer::new (bias)",
                expected: weights.rows(),
                got: bias.len(),
            });
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("MlpLayer::new"));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim())
            .map(|i| {
                let z = dot(self.weights.row(i), x) + self.bias[i] as f64;
                self.activation.apply(z)
            })
            .collect()
    }
}

/// An ordered stack of dense layers with chained dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<MlpLayer>,
}

impl MlpModel {
    pub fn new(layers: Vec<MlpLayer>) -> Result<Self> {
        let model = Self { layers };
        model.validate()?;
        Ok(model)
    }

    /// Checks the structural invariants: at least one layer, no empty
    /// layers, and `in_dim(k+1) == out_dim(k)`.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidModel("model has no layers".into()));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.out_dim() == 0 || layer.in_dim() == 0 {
                return Err(Error::InvalidModel(format!(
                    "layer {k} has empty shape {}x{}",
                    layer.out_dim(),
                    layer.in_dim()
                )));
            }
            if layer.bias.len() != layer.out_dim() {
                return Err(Error::InvalidModel(format!("layer {k} bias length mismatch")));
            }
            if k > 0 && layer.in_dim() != self.layers[k - 1].out_dim() {
                return Err(Error::InvalidModel(format!(
                    "layer {k} expects {} inputs but layer {} produces {}",
                    layer.in_dim(),
                    k - 1,
                    self.layers[k - 1].out_dim()
                )));
            }
        }
        Ok(())
    }

    /// Randomly initialised model. `dims` lists the input width followed by
    /// each layer's output width; hidden layers use `hidden`, the last layer
    /// is linear. Weights are uniform in `±sqrt(6 / fan_in)`, biases zero.
    pub fn init(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidModel(
                "need an input width and at least one layer width".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k_last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let (fan_in, out) = (w[0], w[1]);
                let bound = (6.0 / fan_in.max(1) as f64).sqrt() as f32;
                let data = (0..fan_in * out)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                let act = if k == k_last {
                    Activation::Identity
                } else {
                    hidden
                };
                MlpLayer::new(DenseMatrix::new(out, fan_in, data)?, vec![0.0; out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[MlpLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<MlpLayer> {
        self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Output width of every layer.
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(MlpLayer::out_dim).collect()
    }

    /// Weights plus biases.
    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.out_dim() * l.in_dim() + l.out_dim())
            .sum()
    }

    /// Per-layer activations `X(1)..X(K)` for one input.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<DenseVector>> {
        if input.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "MlpModel::forward",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        let mut outs: Vec<DenseVector> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = outs.last().map_or(input, |v| v.as_slice());
            let y = layer.forward(x);
            outs.push(DenseVector::new(y)?);
        }
        Ok(outs)
    }

    /// Final-layer outputs only.
    pub fn predict(&self, input: &[f64]) -> Result<DenseVector> {
        Ok(self.forward(input)?.pop().expect("at least one layer"))
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<MlpLayer> {
        &mut self.layers
    }
}

/// Labelled samples stored row-major as `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f32>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::DimensionMismatch {
                op: "Dataset::new",
                expected: dim * labels.len(),
                got: features.len(),
            });
        }
        Ok(Self {
            dim,
            features,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize]) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                op: "Dataset::from_rows",
                expected: labels.len(),
                got: rows.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    op: "Dataset::from_rows",
                    expected: dim,
                    got: r.len(),
                });
            }
            features.extend(r.iter().map(|&v| v as f32));
        }
        Self::new(dim, features, labels.to_vec())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn sample_f64(&self, i: usize) -> Vec<f64> {
        self.sample(i).iter().map(|&v| v as f64).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut features = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            features.extend_from_slice(self.sample(i));
        }
        Self {
            dim: self.dim,
            features,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// First `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Seeded shuffle followed by a `train_fraction` / rest split.
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = (self.len() as f64 * train_fraction).round() as usize;
        (self.subset(&idx[..cut]), self.subset(&idx[cut..]))
    }

    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.sample_f64(i)).collect()
    }
}

/// Per-layer l2 norms of post-activation outputs over a calibration set.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStats {
    pub sample_count: usize,
    /// Norms of the raw input features; base case for the input nodes.
    pub input: DenseVector,
    /// `layers[k][i] = ||X(k+1)_i||_2`.
    pub layers: Vec<DenseVector>,
}

impl CalibrationStats {
    /// Combines norms gathered on two disjoint sample sets.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        fn combine(a: &[f64], b: &[f64]) -> Result<DenseVector> {
            if a.len() != b.len() {
                return Err(Error::DimensionMismatch {
                    op: "CalibrationStats::merge",
                    expected: a.len(),
                    got: b.len(),
                });
            }
            DenseVector::new(a.iter().zip(b).map(|(x, y)| x.hypot(*y)).collect())
        }
        if self.layers.len() != other.layers.len() {
            return Err(Error::DimensionMismatch {
                op: "CalibrationStats::merge",
                expected: self.layers.len(),
                got: other.layers.len(),
            });
        }
        Ok(Self {
            sample_count: self.sample_count + other.sample_count,
            input: combine(&self.input, &other.input)?,
            layers: self
                .layers
                .iter()
                .zip(&other.layers)
                .map(|(a, b)| combine(a, b))
                .collect::<Result<_>>()?,
        })
    }
}

/// Accumulates sums of squares in sample order and takes square roots at the end.
#[derive(Debug, Clone)]
pub(crate) struct NormAccumulator {
    sums: Vec<f64>,
}

impl NormAccumulator {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            sums: vec![0.0; len],
        }
    }

    pub(crate) fn add(&mut self, values: &[f64]) {
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += v * v;
        }
    }

    pub(crate) fn finish(self) -> DenseVector {
        DenseVector::from(self.sums.into_iter().map(f64::sqrt).collect::<Vec<_>>())
    }
}

/// Runs every sample through the model and records post-activation norms.
pub fn calibrate(model: &MlpModel, samples: &[Vec<f64>]) -> Result<CalibrationStats> {
    if samples.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let mut input = NormAccumulator::new(model.input_dim());
    let mut layers: Vec<NormAccumulator> = model
        .widths()
        .into_iter()
        .map(NormAccumulator::new)
        .collect();
    for s in samples {
        let acts = model.forward(s)?;
        input.add(s);
        for (acc, a) in layers.iter_mut().zip(&acts) {
            acc.add(a);
        }
    }
    Ok(CalibrationStats {
        sample_count: samples.len(),
        input: input.finish(),
        layers: layers.into_iter().map(NormAccumulator::finish).collect(),
    })
}

/// Calibration on the first `n` samples of a dataset.
pub fn calibrate_dataset(model: &MlpModel, data: &Dataset, n: usize) -> Result<CalibrationStats> {
    calibrate(model, &data.head(n).rows_f64())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// Number of optimizer steps.
    pub steps: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
            batch_size: 32,
            steps: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean cross-entropy of the last batch.
    pub final_loss: f64,
    pub steps: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig, t: i32) {
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for ((p, &g0), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let g = g0 + cfg.weight_decay * *p;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.epsilon);
        }
    }
}

/// Softmax cross-entropy training with mini-batch ADAM. Deterministic for a
/// fixed seed: batches are drawn from per-epoch seeded shuffles.
pub fn train(model: &MlpModel, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::InvalidParams("training set is empty".into()));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "train",
            expected: model.input_dim(),
            got: data.dim(),
        });
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= model.output_dim()) {
        return Err(Error::InvalidParams(format!(
            "label {bad} outside output width {}",
            model.output_dim()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidParams("batch size must be positive".into()));
    }

    let shapes: Vec<(usize, usize, Activation)> = model
        .layers()
        .iter()
        .map(|l| (l.out_dim(), l.in_dim(), l.activation))
        .collect();
    // 64-bit working copies: weights of layer k followed by its bias
    let mut params: Vec<Vec<f64>> = model
        .layers()
        .iter()
        .map(|l| {
            l.weights
                .data()
                .iter()
                .chain(&l.bias)
                .map(|&v| v as f64)
                .collect()
        })
        .collect();
    let mut grads: Vec<Vec<f64>> = params.iter().map(|p| vec![0.0; p.len()]).collect();
    let mut adam: Vec<Adam> = params.iter().map(|p| Adam::new(p.len())).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut final_loss = f64::NAN;

    let mut pre: Vec<Vec<f64>> = shapes.iter().map(|s| vec![0.0; s.0]).collect();
    let mut post: Vec<Vec<f64>> = shapes.iter().map(|s| vec![0.0; s.0]).collect();
    let mut x0 = vec![0.0; data.dim()];

    for step in 1..=cfg.steps {
        grads.iter_mut().for_each(|g| g.fill(0.0));
        let mut loss = 0.0;
        let batch = cfg.batch_size.min(data.len());
        for _ in 0..batch {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let idx = order[cursor];
            cursor += 1;
            for (d, &s) in x0.iter_mut().zip(data.sample(idx)) {
                *d = s as f64;
            }

            // forward
            for (k, &(out, inp, act)) in shapes.iter().enumerate() {
                let x = if k == 0 { &x0 } else { &post[k - 1] };
                let w = &params[k];
                let mut z = vec![0.0; out];
                for (i, zi) in z.iter_mut().enumerate() {
                    let row = &w[i * inp..(i + 1) * inp];
                    *zi = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[out * inp + i];
                }
                for i in 0..out {
                    post[k][i] = act.apply(z[i]);
                }
                pre[k] = z;
            }

            // loss and output gradient
            let logits = &post[shapes.len() - 1];
            let probs = softmax(logits);
            let label = data.labels()[idx];
            loss -= probs[label].max(f64::MIN_POSITIVE).ln();
            let mut grad_out: Vec<f64> = probs;
            grad_out[label] -= 1.0;

            // backward
            for k in (0..shapes.len()).rev() {
                let (out, inp, act) = shapes[k];
                let delta: Vec<f64> = (0..out)
                    .map(|i| grad_out[i] * act.derivative(pre[k][i]))
                    .collect();
                let x = if k == 0 { &x0 } else { &post[k - 1] };
                let g = &mut grads[k];
                for (i, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut g[i * inp..(i + 1) * inp];
                    for (gi, xi) in row.iter_mut().zip(x) {
                        *gi += d * xi;
                    }
                    g[out * inp + i] += d;
                }
                if k > 0 {
                    let w = &params[k];
                    let mut next = vec![0.0; inp];
                    for (i, &d) in delta.iter().enumerate() {
                        if d == 0.0 {
                            continue;
                        }
                        let row = &w[i * inp..(i + 1) * inp];
                        for (n, wi) in next.iter_mut().zip(row) {
                            *n += d * wi;
                        }
                    }
                    grad_out = next;
                }
            }
        }
        loss /= batch as f64;
        if !loss.is_finite() {
            return Err(Error::NanLoss { step, loss });
        }
        final_loss = loss;
        let scale = 1.0 / batch as f64;
        for ((p, g), opt) in params.iter_mut().zip(&mut grads).zip(&mut adam) {
            g.iter_mut().for_each(|v| *v *= scale);
            opt.step(p, g, cfg, step.min(i32::MAX as usize) as i32);
        }
    }

    let layers = shapes
        .iter()
        .zip(&params)
        .map(|(&(out, inp, act), p)| {
            let weights = DenseMatrix::new(out, inp, p[..out * inp].iter().map(|&v| v as f32).collect())?;
            let bias = p[out * inp..].iter().map(|&v| v as f32).collect();
            MlpLayer::new(weights, bias, act)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutcome {
        model: MlpModel::new(layers)?,
        final_loss,
        steps: cfg.steps,
    })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Top-1 / top-5 accuracy in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub top1: f64,
    pub top5: f64,
}

impl Accuracy {
    /// Relative retention in percent, `self / dense * 100`.
    pub fn retention(&self, dense: &Accuracy) -> Accuracy {
        Accuracy {
            top1: 100.0 * self.top1 / dense.top1,
            top5: 100.0 * self.top5 / dense.top5,
        }
    }
}

/// Position of `label` when logits are sorted descending, ties resolved in
/// favour of the lower class index.
pub fn label_rank(logits: &[f64], label: usize) -> usize {
    let target = logits[label];
    logits
        .iter()
        .enumerate()
        .filter(|&(j, &l)| l > target || (l == target && j < label))
        .count()
}

/// Accuracy of precomputed logits.
pub fn accuracy_from_logits(logits: &[Vec<f64>], labels: &[usize]) -> Accuracy {
    let n = labels.len().max(1) as f64;
    let (mut t1, mut t5) = (0usize, 0usize);
    for (l, &y) in logits.iter().zip(labels) {
        let r = label_rank(l, y);
        t1 += usize::from(r < 1);
        t5 += usize::from(r < 5);
    }
    Accuracy {
        top1: 100.0 * t1 as f64 / n,
        top5: 100.0 * t5 as f64 / n,
    }
}

pub fn evaluate(model: &MlpModel, data: &Dataset) -> Result<Accuracy> {
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= model.output_dim()) {
        return Err(Error::InvalidParams(format!(
            "label {bad} outside output width {}",
            model.output_dim()
        )));
    }
    let logits = (0..data.len())
        .map(|i| model.predict(&data.sample_f64(i)).map(DenseVector::into_inner))
        .collect::<Result<Vec<_>>>()?;
    Ok(accuracy_from_logits(&logits, data.labels()))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_model(act: Activation) -> MlpModel {
        MlpModel::new(vec![
            MlpLayer::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]), vec![0.0; 2], act)
                .unwrap(),
            MlpLayer::new(DenseMatrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]), vec![0.0; 2], act)
                .unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn forward_matches_hand_chain() {
        let m = tiny_model(Activation::Identity);
        let acts = m.forward(&[1.0, 0.0]).unwrap();
        // hand chain: [1,3] then [5*1+6*3, 7*1+8*3]
        assert_eq!(acts[0].as_slice(), &[1.0, 3.0]);
        assert_eq!(acts[1].as_slice(), &[23.0, 31.0]);
    }

    #[test]
    fn forward_zero_input_relu() {
        let m = MlpModel::init(&[5, 4, 3], Activation::Relu, 1).unwrap();
        for a in m.forward(&[0.0; 5]).unwrap() {
            assert!(a.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_identity_layer_is_affine() {
        let w = DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0], [2.0, 2.0]]);
        let layer = MlpLayer::new(w.clone(), vec![0.5, -1.0, 0.25], Activation::Identity).unwrap();
        let m = MlpModel::new(vec![layer]).unwrap();
        let x = [0.3, -1.7];
        let expect = w.matvec(&x).unwrap();
        let got = m.predict(&x).unwrap();
        for (i, b) in [0.5, -1.0, 0.25].iter().enumerate() {
            assert_eq!(got[i], expect[i] + b);
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let m = tiny_model(Activation::Relu);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn model_rejects_broken_chain_and_empty_layers() {
        let a = MlpLayer::new(DenseMatrix::zeros(3, 2), vec![0.0; 3], Activation::Relu).unwrap();
        let b = MlpLayer::new(DenseMatrix::zeros(2, 4), vec![0.0; 2], Activation::Relu).unwrap();
        assert!(MlpModel::new(vec![a.clone(), b]).is_err());
        let empty = MlpLayer::new(DenseMatrix::zeros(0, 3), vec![], Activation::Relu).unwrap();
        assert!(MlpModel::new(vec![a, empty]).is_err());
        assert!(MlpModel::new(vec![]).is_err());
    }

    #[test]
    fn calibrate_relu_zeroes_negative_preactivations() {
        let w = DenseMatrix::from_rows(&[[-1.0], [2.0]]);
        let m = MlpModel::new(vec![MlpLayer::new(w, vec![0.0; 2], Activation::Relu).unwrap()]).unwrap();
        let c = calibrate(&m, &[vec![1.0]]).unwrap();
        assert_eq!(c.layers[0].as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn calibrate_three_four_five() {
        let m = MlpModel::new(vec![MlpLayer::new(
            DenseMatrix::from_rows(&[[1.0]]),
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap();
        let c = calibrate(&m, &[vec![3.0], vec![4.0]]).unwrap();
        assert_eq!(c.layers[0].as_slice(), &[5.0]);
        assert_eq!(c.input.as_slice(), &[5.0]);
        assert_eq!(c.sample_count, 2);
    }

    #[test]
    fn calibrate_duplicated_samples_scale_by_sqrt2() {
        let m = MlpModel::init(&[4, 6, 3], Activation::Relu, 3).unwrap();
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|s| (0..4).map(|i| ((s * 4 + i) as f64 * 0.37).sin()).collect())
            .collect();
        let doubled: Vec<Vec<f64>> = samples.iter().chain(&samples).cloned().collect();
        let a = calibrate(&m, &samples).unwrap();
        let b = calibrate(&m, &doubled).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            let (sa, sb) = (la.sum(), lb.sum());
            for (x, y) in la.iter().zip(lb.iter()) {
                assert!((y - x * 2f64.sqrt()).abs() <= 1e-12 * y.abs().max(1.0));
                if sa > 0.0 {
                    assert!((x / sa - y / sb).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn calibrate_empty_is_error() {
        let m = tiny_model(Activation::Relu);
        assert!(matches!(calibrate(&m, &[]), Err(Error::EmptyCalibration)));
    }

    fn xor_data() -> Dataset {
        Dataset::from_rows(
            &[
                vec![0.0, 0.0],
                vec![0.0, 1.0],
                vec![1.0, 0.0],
                vec![1.0, 1.0],
            ],
            &[0, 1, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn trains_xor() {
        let m = MlpModel::init(&[2, 8, 2], Activation::Relu, 11).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 4,
            steps: 2000,
            seed: 11,
            ..TrainConfig::default()
        };
        let out = train(&m, &xor_data(), &cfg).unwrap();
        let acc = evaluate(&out.model, &xor_data()).unwrap();
        assert_eq!(acc.top1, 100.0);
        assert!(out.final_loss.is_finite());
    }

    #[test]
    fn zero_learning_rate_leaves_weights() {
        let m = MlpModel::init(&[2, 8, 2], Activation::Relu, 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            batch_size: 4,
            steps: 50,
            ..TrainConfig::default()
        };
        let out = train(&m, &xor_data(), &cfg).unwrap();
        assert_eq!(out.model, m);
    }

    #[test]
    fn training_is_deterministic() {
        let m = MlpModel::init(&[2, 8, 2], Activation::Sigmoid, 9).unwrap();
        let cfg = TrainConfig {
            batch_size: 2,
            steps: 200,
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train(&m, &xor_data(), &cfg).unwrap();
        let b = train(&m, &xor_data(), &cfg).unwrap();
        let bits = |m: &MlpModel| -> Vec<u32> {
            m.layers()
                .iter()
                .flat_map(|l| l.weights.data().iter().chain(&l.bias).map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a.model), bits(&b.model));
    }

    #[test]
    fn diverging_training_reports_loss() {
        let m = MlpModel::init(&[2, 8, 2], Activation::Relu, 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            batch_size: 4,
            steps: 20,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&m, &xor_data(), &cfg),
            Err(Error::NanLoss { .. }) | Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn topk_perfect_and_constant_logits() {
        let labels: Vec<usize> = (0..10).collect();
        let one_hot: Vec<Vec<f64>> = labels
            .iter()
            .map(|&y| (0..10).map(|j| if j == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let acc = accuracy_from_logits(&one_hot, &labels);
        assert_eq!((acc.top1, acc.top5), (100.0, 100.0));

        let flat = vec![vec![0.0; 10]; 10];
        let acc = accuracy_from_logits(&flat, &labels);
        assert_eq!(acc.top1, 10.0);
        assert_eq!(acc.top5, 50.0);
    }

    #[test]
    fn retention_is_ratio() {
        let dense = Accuracy { top1: 80.0, top5: 100.0 };
        let pruned = Accuracy { top1: 60.0, top5: 90.0 };
        let r = pruned.retention(&dense);
        assert_eq!((r.top1, r.top5), (75.0, 90.0));
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in [
            Activation::Sigmoid,
            Activation::Gelu,
            Activation::Identity,
            Activation::Silu,
        ] {
            for &x in &[-2.3, -0.4, 0.1, 1.7] {
                let h = 1e-6;
                let fd = (act.apply(x + h) - act.apply(x - h)) / (2.0 * h);
                assert!((fd - act.derivative(x)).abs() < 1e-6, "{act:?} at {x}");
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_complete() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let d = Dataset::from_rows(&rows, &[0; 10]).unwrap();
        let (a, b) = d.split(0.8, 3);
        let (a2, _) = d.split(0.8, 3);
        assert_eq!(a, a2);
        assert_eq!((a.len(), b.len()), (8, 2));
    }
}
