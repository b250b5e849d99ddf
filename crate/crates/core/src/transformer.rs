//! A small decoder-only transformer: token embedding plus sinusoidal
//! positions, post-norm blocks of causal multi-head attention and a
//! feed-forward sublayer, and a linear head to the vocabulary.
//!
//! Only inference is supported. [`ToyTransformer::forward_traced`] exposes
//! every intermediate activation so calibration can hook into the full pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::mlp::Activation;

pub const LAYER_NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FfnKind {
    /// `down(gelu(up x))`
    TwoLayer,
    /// `down(silu(gate x) * up x)`
    Gated,
}

impl FfnKind {
    pub fn name(self) -> &'static str {
        match self {
            FfnKind::TwoLayer => "two_layer",
            FfnKind::Gated => "gated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub d_ff: usize,
    pub ffn_kind: FfnKind,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            vocab: 64,
            d_model: 8,
            n_heads: 2,
            n_blocks: 2,
            d_ff: 16,
            ffn_kind: FfnKind::TwoLayer,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab == 0 || self.d_model == 0 || self.n_heads == 0 || self.n_blocks == 0 || self.d_ff == 0 {
            return Err(Error::InvalidParams("transformer dimensions must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::InvalidParams(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerNorm {
    /// Normalised values before the affine step.
    pub fn standardize(x: &[f64]) -> Vec<f64> {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        x.iter().map(|v| (v - mean) * inv).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        Self::standardize(x)
            .into_iter()
            .zip(self.gain.iter().zip(&self.bias))
            .map(|(v, (&g, &b))| v * g as f64 + b as f64)
            .collect()
    }
}

/// Causal multi-head attention. Query/key rows and value rows are split into
/// heads by `qk_head_dims` / `v_head_dims`; all heads have `d_head` rows until
/// attention rows are pruned.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub wq: DenseMatrix,
    pub wk: DenseMatrix,
    pub wv: DenseMatrix,
    pub wo: DenseMatrix,
    pub qk_head_dims: Vec<usize>,
    pub v_head_dims: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    pub kind: FfnKind,
    /// `d_ff x d_model`
    pub up: DenseMatrix,
    /// `d_ff x d_model`, gated kind only
    pub gate: Option<DenseMatrix>,
    /// `d_model x d_ff`
    pub down: DenseMatrix,
}

impl FeedForward {
    pub fn d_ff(&self) -> usize {
        self.up.rows()
    }

    /// Intermediate activations (post-activation, post-gating).
    pub fn hidden(&self, x: &[f64]) -> Vec<f64> {
        match (&self.kind, &self.gate) {
            (FfnKind::Gated, Some(gate)) => (0..self.up.rows())
                .map(|i| Activation::Silu.apply(dot(gate.row(i), x)) * dot(self.up.row(i), x))
                .collect(),
            _ => (0..self.up.rows())
                .map(|i| Activation::Gelu.apply(dot(self.up.row(i), x)))
                .collect(),
        }
    }

    pub fn matrices(&self) -> Vec<&DenseMatrix> {
        let mut v = vec![&self.up];
        v.extend(self.gate.as_ref());
        v.push(&self.down);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderBlock {
    pub attn: Attention,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTransformer {
    pub vocab: usize,
    pub d_model: usize,
    pub n_heads: usize,
    /// Head width used for the `1 / sqrt(d_head)` score scaling.
    pub d_head: usize,
    pub ffn_kind: FfnKind,
    /// `vocab x d_model`
    pub embedding: DenseMatrix,
    pub blocks: Vec<DecoderBlock>,
    /// `vocab x d_model`
    pub lm_head: DenseMatrix,
}

/// Activations of one block for every position (`seq x width`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrace {
    pub attn_input: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// `head x query position x key position`
    pub attn_probs: Vec<Vec<Vec<f64>>>,
    pub ffn_input: Vec<Vec<f64>>,
    pub ffn_hidden: Vec<Vec<f64>>,
    pub ffn_output: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub blocks: Vec<BlockTrace>,
    pub logits: Vec<Vec<f64>>,
}

pub fn positional_encoding(pos: usize, d_model: usize) -> Vec<f64> {
    (0..d_model)
        .map(|i| {
            let rate = 10000f64.powf((2 * (i / 2)) as f64 / d_model as f64);
            let angle = pos as f64 / rate;
            if i % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

fn project(m: &DenseMatrix, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| (0..m.rows()).map(|i| dot(m.row(i), x)).collect())
        .collect()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0];
    for d in dims {
        out.push(out.last().unwrap() + d);
    }
    out
}

impl Attention {
    /// Returns the concatenated head outputs projected by `wo`, plus traces.
    fn forward(&self, xs: &[Vec<f64>], d_head: usize) -> (Vec<Vec<f64>>, [Vec<Vec<f64>>; 3], Vec<Vec<Vec<f64>>>) {
        let q = project(&self.wq, xs);
        let k = project(&self.wk, xs);
        let v = project(&self.wv, xs);
        let scale = 1.0 / (d_head as f64).sqrt();
        let qk_off = offsets(&self.qk_head_dims);
        let v_off = offsets(&self.v_head_dims);
        let seq = xs.len();
        let mut concat = vec![vec![0.0; self.wv.rows()]; seq];
        let mut probs_all = Vec::with_capacity(self.qk_head_dims.len());
        for h in 0..self.qk_head_dims.len() {
            let (qa, qb) = (qk_off[h], qk_off[h + 1]);
            let (va, vb) = (v_off[h], v_off[h + 1]);
            let mut head_probs = Vec::with_capacity(seq);
            for t in 0..seq {
                let scores: Vec<f64> = (0..=t)
                    .map(|u| q[t][qa..qb].iter().zip(&k[u][qa..qb]).map(|(a, b)| a * b).sum::<f64>() * scale)
                    .collect();
                let p = softmax(&scores);
                for (u, &pu) in p.iter().enumerate() {
                    for (c, vv) in concat[t][va..vb].iter_mut().zip(&v[u][va..vb]) {
                        *c += pu * vv;
                    }
                }
                let mut row = p;
                row.resize(seq, 0.0);
                head_probs.push(row);
            }
            probs_all.push(head_probs);
        }
        (project(&self.wo, &concat), [q, k, v], probs_all)
    }
}

impl ToyTransformer {
    /// Deterministic random model. Weights are uniform with variance
    /// `1 / fan_in`; norm gains are near 1 and biases near 0.
    pub fn make_fixture(seed: u64, config: &TransformerConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d_model;
        let matrix = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| -> DenseMatrix {
            let bound = (3.0 / cols as f64).sqrt() as f32;
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            DenseMatrix::new(rows, cols, data).expect("finite")
        };
        let norm = |rng: &mut ChaCha8Rng| LayerNorm {
            gain: (0..d).map(|_| rng.gen_range(0.9f32..1.1)).collect(),
            bias: (0..d).map(|_| rng.gen_range(-0.1f32..0.1)).collect(),
        };
        let d_head = d / config.n_heads;
        let embedding = {
            let data = (0..config.vocab * d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            DenseMatrix::new(config.vocab, d, data)?
        };
        let blocks = (0..config.n_blocks)
            .map(|_| {
                let attn = Attention {
                    wq: matrix(d, d, &mut rng),
                    wk: matrix(d, d, &mut rng),
                    wv: matrix(d, d, &mut rng),
                    wo: matrix(d, d, &mut rng),
                    qk_head_dims: vec![d_head; config.n_heads],
                    v_head_dims: vec![d_head; config.n_heads],
                };
                let norm1 = norm(&mut rng);
                let up = matrix(config.d_ff, d, &mut rng);
                let gate = match config.ffn_kind {
                    FfnKind::Gated => Some(matrix(config.d_ff, d, &mut rng)),
                    FfnKind::TwoLayer => None,
                };
                let down = matrix(d, config.d_ff, &mut rng);
                let norm2 = norm(&mut rng);
                DecoderBlock {
                    attn,
                    norm1,
                    ffn: FeedForward {
                        kind: config.ffn_kind,
                        up,
                        gate,
                        down,
                    },
                    norm2,
                }
            })
            .collect();
        let lm_head = matrix(config.vocab, d, &mut rng);
        let model = Self {
            vocab: config.vocab,
            d_model: d,
            n_heads: config.n_heads,
            d_head,
            ffn_kind: config.ffn_kind,
            embedding,
            blocks,
            lm_head,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks every interface width against `d_model` and the FFN shapes.
    pub fn validate(&self) -> Result<()> {
        let d = self.d_model;
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.embedding.shape() != (self.vocab, d) || self.lm_head.shape() != (self.vocab, d) {
            return bad("embedding and head must be vocab x d_model".into());
        }
        for (b, blk) in self.blocks.iter().enumerate() {
            let a = &blk.attn;
            if a.wq.cols() != d || a.wk.cols() != d || a.wv.cols() != d || a.wo.rows() != d {
                return bad(format!("block {b}: attention input/output width must be {d}"));
            }
            if a.wq.rows() != a.wk.rows() || a.wo.cols() != a.wv.rows() {
                return bad(format!("block {b}: attention projections disagree"));
            }
            if a.qk_head_dims.len() != self.n_heads
                || a.v_head_dims.len() != self.n_heads
                || a.qk_head_dims.iter().sum::<usize>() != a.wq.rows()
                || a.v_head_dims.iter().sum::<usize>() != a.wv.rows()
            {
                return bad(format!("block {b}: head dimensions do not cover the projections"));
            }
            for n in [&blk.norm1, &blk.norm2] {
                if n.gain.len() != d || n.bias.len() != d {
                    return bad(format!("block {b}: norm width must be {d}"));
                }
            }
            let f = &blk.ffn;
            if f.up.cols() != d || f.down.rows() != d || f.down.cols() != f.up.rows() {
                return bad(format!(
                    "block {b}: ffn widths {}x{} / {}x{} do not chain through d_model {d}",
                    f.up.rows(),
                    f.up.cols(),
                    f.down.rows(),
                    f.down.cols()
                ));
            }
            match (f.kind, &f.gate) {
                (FfnKind::Gated, Some(g)) if g.shape() == f.up.shape() => {}
                (FfnKind::Gated, _) => return bad(format!("block {b}: gated ffn needs gate shaped like up")),
                (FfnKind::TwoLayer, None) => {}
                (FfnKind::TwoLayer, Some(_)) => return bad(format!("block {b}: two-layer ffn has a gate")),
            }
            if f.up.rows() == 0 {
                return bad(format!("block {b}: empty ffn"));
            }
        }
        Ok(())
    }

    pub fn config(&self) -> TransformerConfig {
        TransformerConfig {
            vocab: self.vocab,
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_blocks: self.blocks.len(),
            d_ff: self.blocks.first().map_or(0, |b| b.ffn.d_ff()),
            ffn_kind: self.ffn_kind,
        }
    }

    pub fn parameter_count(&self) -> usize {
        let mats: usize = self.embedding.data().len() + self.lm_head.data().len();
        let blocks: usize = self
            .blocks
            .iter()
            .map(|b| {
                let a = &b.attn;
                [&a.wq, &a.wk, &a.wv, &a.wo].iter().map(|m| m.data().len()).sum::<usize>()
                    + b.ffn.matrices().iter().map(|m| m.data().len()).sum::<usize>()
                    + 2 * (b.norm1.gain.len() + b.norm2.gain.len())
            })
            .sum();
        mats + blocks
    }

    /// Multiply-add FLOPs per token over all projection matrices (embedding
    /// lookup, attention score products and norms excluded).
    pub fn flops_per_token(&self) -> u64 {
        let mut total = 2 * self.lm_head.data().len() as u64;
        for b in &self.blocks {
            let a = &b.attn;
            for m in [&a.wq, &a.wk, &a.wv, &a.wo] {
                total += 2 * m.data().len() as u64;
            }
            for m in b.ffn.matrices() {
                total += 2 * m.data().len() as u64;
            }
        }
        total
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_traced(tokens)?.logits)
    }

    pub fn forward_traced(&self, tokens: &[usize]) -> Result<ForwardTrace> {
        if let Some(&id) = tokens.iter().find(|&&t| t >= self.vocab) {
            return Err(Error::TokenOutOfRange { id, vocab: self.vocab });
        }
        let mut xs: Vec<Vec<f64>> = tokens
            .iter()
            .enumerate()
            .map(|(pos, &t)| {
                self.embedding
                    .row(t)
                    .iter()
                    .zip(positional_encoding(pos, self.d_model))
                    .map(|(&e, p)| e as f64 + p)
                    .collect()
            })
            .collect();
        let mut traces = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let attn_input = xs.clone();
            let (attn_out, [q, k, v], attn_probs) = blk.attn.forward(&xs, self.d_head);
            let ffn_input: Vec<Vec<f64>> = xs
                .iter()
                .zip(&attn_out)
                .map(|(x, a)| {
                    let sum: Vec<f64> = x.iter().zip(a).map(|(p, q)| p + q).collect();
                    blk.norm1.apply(&sum)
                })
                .collect();
            let ffn_hidden: Vec<Vec<f64>> = ffn_input.iter().map(|x| blk.ffn.hidden(x)).collect();
            let ffn_output = project(&blk.ffn.down, &ffn_hidden);
            xs = ffn_input
                .iter()
                .zip(&ffn_output)
                .map(|(x, f)| {
                    let sum: Vec<f64> = x.iter().zip(f).map(|(p, q)| p + q).collect();
                    blk.norm2.apply(&sum)
                })
                .collect();
            traces.push(BlockTrace {
                attn_input,
                q,
                k,
                v,
                attn_probs,
                ffn_input,
                ffn_hidden,
                ffn_output,
            });
        }
        let logits = project(&self.lm_head, &xs);
        if logits.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ToyTransformer::forward"));
        }
        Ok(ForwardTrace { blocks: traces, logits })
    }
}

/// Seeded random token sequences, for calibration and tests.
pub fn random_tokens(seed: u64, vocab: usize, count: usize, seq_len: usize) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..seq_len).map(|_| rng.gen_range(0..vocab)).collect())
        .collect()
}
