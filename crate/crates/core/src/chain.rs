//! Transformer pruning through a chained feed-forward view.
//!
//! The FFN sublayers of all blocks are laid end to end as one deep MLP
//! (`up_0, down_0, up_1, down_1, ...`). Attention is left out of the graph
//! structure; its effect reaches the scores only through calibration norms,
//! which are gathered on the full, unmodified forward pass. Scores from the
//! chain then drive pruning of the intermediate FFN neurons of the original
//! model. Residual-stream positions are never pruned.

use serde::{Deserialize, Serialize};

use crate::centrality::{input_scores, layer_scores, mlp_wpr, ImportanceScores, WprParams};
use crate::error::{Error, Result};
use crate::graph::{ComponentGraph, LayerBlock};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::mlp::{CalibrationStats, NormAccumulator};
use crate::pruner::{check_indices, check_sparsity, lowest_indices, map_overall_to_local, prune_count, Accounting, LayerPlan, ParamBudget, PrunePlan};
use crate::scoring::{score_graph, ScoringMethod};
use crate::transformer::{FfnKind, ToyTransformer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FfnRole {
    /// Input projection (fused with the gate for gated blocks).
    Up,
    /// Output projection back to the residual stream.
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainLayerRef {
    pub block: usize,
    pub role: FfnRole,
}

impl ChainLayerRef {
    pub fn name(&self) -> String {
        match self.role {
            FfnRole::Up => format!("blocks.{}.ffn.up", self.block),
            FfnRole::Down => format!("blocks.{}.ffn.down", self.block),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainedView {
    pub graph: ComponentGraph,
    /// Chain layer index to the block tensor it came from.
    pub back_map: Vec<ChainLayerRef>,
}

impl ChainedView {
    /// Node-group widths: `d_model, d_ff_0, d_model, d_ff_1, ...`.
    pub fn widths(&self) -> Vec<usize> {
        self.graph.group_widths()
    }

    /// Chain layer holding the intermediate neurons of `block`.
    pub fn up_layer(block: usize) -> usize {
        2 * block
    }
}

/// Builds the chained-FFN graph. Gated blocks contribute one logical layer
/// whose edge magnitudes are `|gate_ij| + |up_ij|`.
pub fn chain_ffns(model: &ToyTransformer) -> Result<ChainedView> {
    model.validate()?;
    let mut layers = Vec::with_capacity(2 * model.blocks.len());
    let mut back_map = Vec::with_capacity(2 * model.blocks.len());
    for (b, blk) in model.blocks.iter().enumerate() {
        let up_ref = ChainLayerRef { block: b, role: FfnRole::Up };
        let f = &blk.ffn;
        let up = match (&f.kind, &f.gate) {
            (FfnKind::Gated, Some(gate)) => {
                let fused = gate
                    .data()
                    .iter()
                    .zip(f.up.data())
                    .map(|(&g, &u)| (g as f64).abs() + (u as f64).abs())
                    .collect();
                LayerBlock::new(up_ref.name(), f.up.rows(), f.up.cols(), fused)?
            }
            _ => LayerBlock::from_matrix(up_ref.name(), &f.up),
        };
        let down_ref = ChainLayerRef { block: b, role: FfnRole::Down };
        layers.push(up);
        layers.push(LayerBlock::from_matrix(down_ref.name(), &f.down));
        back_map.push(up_ref);
        back_map.push(down_ref);
    }
    Ok(ChainedView {
        graph: ComponentGraph::new(model.d_model, layers)?,
        back_map,
    })
}

/// Calibration norms of one block's attention projections.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionNorms {
    /// Norms of the block input (residual stream before attention).
    pub input: DenseVector,
    pub q: DenseVector,
    pub k: DenseVector,
    pub v: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformerCalibration {
    /// Aligned with [`chain_ffns`]: input norms are those of the first FFN's input.
    pub chain: CalibrationStats,
    pub attention: Vec<AttentionNorms>,
}

/// Runs the full transformer on every sequence and gathers l2 norms over all
/// positions of every sequence.
pub fn calibrate_transformer(model: &ToyTransformer, samples: &[Vec<usize>]) -> Result<TransformerCalibration> {
    let positions: usize = samples.iter().map(Vec::len).sum();
    if positions == 0 {
        return Err(Error::EmptyCalibration);
    }
    let d = model.d_model;
    let mut chain_input = NormAccumulator::new(d);
    let mut chain: Vec<NormAccumulator> = model
        .blocks
        .iter()
        .flat_map(|b| [NormAccumulator::new(b.ffn.d_ff()), NormAccumulator::new(d)])
        .collect();
    let mut attn: Vec<[NormAccumulator; 4]> = model
        .blocks
        .iter()
        .map(|b| {
            [
                NormAccumulator::new(d),
                NormAccumulator::new(b.attn.wq.rows()),
                NormAccumulator::new(b.attn.wk.rows()),
                NormAccumulator::new(b.attn.wv.rows()),
            ]
        })
        .collect();
    for seq in samples {
        let trace = model.forward_traced(seq)?;
        for (b, bt) in trace.blocks.iter().enumerate() {
            for t in 0..seq.len() {
                if b == 0 {
                    chain_input.add(&bt.ffn_input[t]);
                }
                chain[2 * b].add(&bt.ffn_hidden[t]);
                chain[2 * b + 1].add(&bt.ffn_output[t]);
                let [i, q, k, v] = &mut attn[b];
                i.add(&bt.attn_input[t]);
                q.add(&bt.q[t]);
                k.add(&bt.k[t]);
                v.add(&bt.v[t]);
            }
        }
    }
    Ok(TransformerCalibration {
        chain: CalibrationStats {
            sample_count: positions,
            input: chain_input.finish(),
            layers: chain.into_iter().map(NormAccumulator::finish).collect(),
        },
        attention: attn
            .into_iter()
            .map(|[i, q, k, v]| AttentionNorms {
                input: i.finish(),
                q: q.finish(),
                k: k.finish(),
                v: v.finish(),
            })
            .collect(),
    })
}

/// Importance of every chain node under `method`.
pub fn score_chain(model: &ToyTransformer, calib: &CalibrationStats, method: &ScoringMethod) -> Result<ImportanceScores> {
    let view = chain_ffns(model)?;
    score_graph(&view.graph, Some(calib), method)
}

fn ffn_matrix_count(model: &ToyTransformer) -> usize {
    match model.ffn_kind {
        FfnKind::TwoLayer => 2,
        FfnKind::Gated => 3,
    }
}

/// Whole-model parameter count and the share held by prunable FFN rows/columns.
pub fn transformer_budget(model: &ToyTransformer) -> ParamBudget {
    let per = ffn_matrix_count(model) * model.d_model;
    ParamBudget {
        total: model.parameter_count() as u64,
        prunable: model.blocks.iter().map(|b| (b.ffn.d_ff() * per) as u64).sum(),
    }
}

/// Plan at a given local FFN sparsity from chain-aligned scores. Only the
/// intermediate (`d_ff`) groups are planned; `d_model` groups keep their
/// scores for propagation but are never pruned.
pub fn plan_llm_local(
    model: &ToyTransformer,
    scores: &ImportanceScores,
    sparsity_local: f64,
    sparsity_overall: Option<f64>,
) -> Result<PrunePlan> {
    check_sparsity(sparsity_local)?;
    if scores.layers.len() != 2 * model.blocks.len() {
        return Err(Error::DimensionMismatch {
            op: "plan_llm (chain layers)",
            expected: 2 * model.blocks.len(),
            got: scores.layers.len(),
        });
    }
    let per = (ffn_matrix_count(model) * model.d_model) as u64;
    let mut removed = 0u64;
    let layers = model
        .blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| {
            let width = blk.ffn.d_ff();
            let layer = ChainedView::up_layer(b);
            let s = &scores.layers[layer];
            if s.len() != width {
                return Err(Error::DimensionMismatch {
                    op: "plan_llm (ffn width)",
                    expected: width,
                    got: s.len(),
                });
            }
            let indices = lowest_indices(s, prune_count(width, sparsity_local));
            removed += indices.len() as u64 * per;
            Ok(LayerPlan {
                layer,
                name: format!("blocks.{b}.ffn"),
                width,
                indices,
                block: Some(b),
                tensor: Some("ffn.up".into()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let params_before = model.parameter_count() as u64;
    let flops_before = model.flops_per_token();
    Ok(PrunePlan {
        layers,
        sparsity_local,
        sparsity_overall_requested: sparsity_overall,
        accounting: Accounting {
            params_before,
            params_after: params_before - removed,
            flops_before,
            flops_after: flops_before - 2 * removed,
        },
    })
}

/// Scores the chain, converts the overall target to a local FFN sparsity and
/// plans the removal.
pub fn score_and_plan_llm(
    model: &ToyTransformer,
    calib: &CalibrationStats,
    method: &ScoringMethod,
    sparsity_overall: f64,
) -> Result<(ImportanceScores, PrunePlan)> {
    let scores = score_chain(model, calib, method)?;
    let local = map_overall_to_local(&transformer_budget(model), sparsity_overall)?;
    let plan = plan_llm_local(model, &scores, local, Some(sparsity_overall))?;
    Ok((scores, plan))
}

/// Removes planned intermediate neurons: rows of `up` (and `gate`) and
/// columns of `down`. Attention tensors are untouched.
pub fn apply_llm_plan(model: &ToyTransformer, plan: &PrunePlan) -> Result<ToyTransformer> {
    let mut out = model.clone();
    for l in &plan.layers {
        let b = l
            .block
            .ok_or_else(|| Error::StalePlan(format!("{} carries no block index", l.name)))?;
        let blk = out
            .blocks
            .get_mut(b)
            .ok_or(Error::IndexOutOfRange { what: "blocks", index: b, len: model.blocks.len() })?;
        if blk.ffn.d_ff() != l.width {
            return Err(Error::StalePlan(format!(
                "block {b} has d_ff {} but the plan expects {}",
                blk.ffn.d_ff(),
                l.width
            )));
        }
        check_indices(l)?;
        let keep: Vec<usize> = (0..l.width).filter(|i| l.indices.binary_search(i).is_err()).collect();
        blk.ffn.up = blk.ffn.up.select_rows(&keep)?;
        if let Some(g) = &blk.ffn.gate {
            blk.ffn.gate = Some(g.select_rows(&keep)?);
        }
        blk.ffn.down = blk.ffn.down.select_cols(&keep)?;
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionMatrix {
    Wq,
    Wk,
    Wv,
}

impl AttentionMatrix {
    pub const ALL: [AttentionMatrix; 3] = [AttentionMatrix::Wq, AttentionMatrix::Wk, AttentionMatrix::Wv];

    pub fn name(self) -> &'static str {
        match self {
            AttentionMatrix::Wq => "wq",
            AttentionMatrix::Wk => "wk",
            AttentionMatrix::Wv => "wv",
        }
    }

    fn weights(self, model: &ToyTransformer, block: usize) -> &DenseMatrix {
        let a = &model.blocks[block].attn;
        match self {
            AttentionMatrix::Wq => &a.wq,
            AttentionMatrix::Wk => &a.wk,
            AttentionMatrix::Wv => &a.wv,
        }
    }

    fn norms(self, calib: &AttentionNorms) -> &DenseVector {
        match self {
            AttentionMatrix::Wq => &calib.q,
            AttentionMatrix::Wk => &calib.k,
            AttentionMatrix::Wv => &calib.v,
        }
    }
}

/// Per-row importance of a block's query, key and value projections.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAttentionScores {
    pub block: usize,
    pub wq: DenseVector,
    pub wk: DenseVector,
    pub wv: DenseVector,
}

impl BlockAttentionScores {
    pub fn get(&self, m: AttentionMatrix) -> &DenseVector {
        match m {
            AttentionMatrix::Wq => &self.wq,
            AttentionMatrix::Wk => &self.wk,
            AttentionMatrix::Wv => &self.wv,
        }
    }
}

fn check_attention_calib(model: &ToyTransformer, calib: &TransformerCalibration) -> Result<()> {
    if calib.attention.len() != model.blocks.len() {
        return Err(Error::DimensionMismatch {
            op: "attention calibration (blocks)",
            expected: model.blocks.len(),
            got: calib.attention.len(),
        });
    }
    Ok(())
}

/// The small network scoring one attention matrix of `block`: every FFN of
/// earlier blocks in chain order, then the attention matrix as final layer.
/// For block 0 there is no prefix and the input nodes are the block input.
pub fn attention_prefix_network(
    model: &ToyTransformer,
    calib: &TransformerCalibration,
    block: usize,
    which: AttentionMatrix,
) -> Result<(ComponentGraph, CalibrationStats)> {
    check_attention_calib(model, calib)?;
    if block >= model.blocks.len() {
        return Err(Error::IndexOutOfRange { what: "blocks", index: block, len: model.blocks.len() });
    }
    let view = chain_ffns(model)?;
    let prefix = 2 * block;
    let m = which.weights(model, block);
    let mut layers: Vec<LayerBlock> = view.graph.layers[..prefix].to_vec();
    layers.push(LayerBlock::from_matrix(format!("blocks.{block}.attn.{}", which.name()), m));
    let mut norms: Vec<DenseVector> = calib.chain.layers[..prefix].to_vec();
    norms.push(which.norms(&calib.attention[block]).clone());
    let input = if block == 0 {
        calib.attention[0].input.clone()
    } else {
        calib.chain.input.clone()
    };
    Ok((
        ComponentGraph::new(model.d_model, layers)?,
        CalibrationStats {
            sample_count: calib.chain.sample_count,
            input,
            layers: norms,
        },
    ))
}

/// Attention-matrix scores reusing the chain's FFN scores for every prefix:
/// the incoming importance of block `b` is the score of the previous block's
/// FFN output group, or the teleport-only input scores for block 0.
pub fn attention_extension_scores(
    model: &ToyTransformer,
    calib: &TransformerCalibration,
    chain_scores: &ImportanceScores,
    params: &WprParams,
) -> Result<Vec<BlockAttentionScores>> {
    check_attention_calib(model, calib)?;
    if chain_scores.meta.method != "wpr"
        || chain_scores.meta.gamma != Some(params.gamma)
        || chain_scores.meta.theta != Some(params.theta)
    {
        return Err(Error::InvalidParams(
            "cached chain scores must come from wpr with the same gamma and theta".into(),
        ));
    }
    if chain_scores.layers.len() != 2 * model.blocks.len() {
        return Err(Error::DimensionMismatch {
            op: "attention extension (chain layers)",
            expected: 2 * model.blocks.len(),
            got: chain_scores.layers.len(),
        });
    }
    (0..model.blocks.len())
        .map(|b| {
            let incoming = if b == 0 {
                input_scores(&calib.attention[0].input, params.gamma)?
            } else {
                chain_scores.layers[2 * b - 1].to_vec()
            };
            let mut out = Vec::with_capacity(3);
            for which in AttentionMatrix::ALL {
                let m = which.weights(model, b);
                let w: Vec<f64> = m.data().iter().map(|&v| v as f64).collect();
                let s = layer_scores(&w, m.rows(), m.cols(), &incoming, which.norms(&calib.attention[b]), params)?;
                out.push(DenseVector::new(s)?);
            }
            let wv = out.pop().unwrap();
            let wk = out.pop().unwrap();
            let wq = out.pop().unwrap();
            Ok(BlockAttentionScores { block: b, wq, wk, wv })
        })
        .collect()
}

/// Same scores computed by running the layer-wise PageRank on each small
/// prefix network from scratch.
pub fn attention_extension_scores_uncached(
    model: &ToyTransformer,
    calib: &TransformerCalibration,
    params: &WprParams,
) -> Result<Vec<BlockAttentionScores>> {
    (0..model.blocks.len())
        .map(|b| {
            let mut out = Vec::with_capacity(3);
            for which in AttentionMatrix::ALL {
                let (g, c) = attention_prefix_network(model, calib, b, which)?;
                let mut s = mlp_wpr(&g, &c, params)?;
                out.push(s.layers.pop().unwrap());
            }
            let wv = out.pop().unwrap();
            let wk = out.pop().unwrap();
            let wq = out.pop().unwrap();
            Ok(BlockAttentionScores { block: b, wq, wk, wv })
        })
        .collect()
}

fn shrink_heads(dims: &[usize], removed: &[usize]) -> Vec<usize> {
    let mut start = 0;
    dims.iter()
        .map(|&d| {
            let gone = removed.iter().filter(|&&i| i >= start && i < start + d).count();
            start += d;
            d - gone
        })
        .collect()
}

/// Experimental: prunes attention rows by the extension scores. Query/key rows
/// are removed in pairs ranked by `score(wq) + score(wk)`; value rows are
/// removed together with the matching columns of `wo`. Score scaling keeps
/// the original head width, so a removed pair acts like a zeroed row.
pub fn prune_attention_experimental(
    model: &ToyTransformer,
    scores: &[BlockAttentionScores],
    sparsity_local: f64,
) -> Result<ToyTransformer> {
    check_sparsity(sparsity_local)?;
    if scores.len() != model.blocks.len() {
        return Err(Error::DimensionMismatch {
            op: "prune_attention_experimental",
            expected: model.blocks.len(),
            got: scores.len(),
        });
    }
    let mut out = model.clone();
    for (blk, s) in out.blocks.iter_mut().zip(scores) {
        let a = &mut blk.attn;
        if s.wq.len() != a.wq.rows() || s.wk.len() != a.wk.rows() || s.wv.len() != a.wv.rows() {
            return Err(Error::StalePlan(format!("attention scores of block {} do not match shapes", s.block)));
        }
        let pair: Vec<f64> = s.wq.iter().zip(s.wk.iter()).map(|(q, k)| q + k).collect();
        let qk_drop = lowest_indices(&pair, prune_count(pair.len(), sparsity_local));
        let qk_keep: Vec<usize> = (0..pair.len()).filter(|i| qk_drop.binary_search(i).is_err()).collect();
        let v_drop = lowest_indices(&s.wv, prune_count(s.wv.len(), sparsity_local));
        let v_keep: Vec<usize> = (0..s.wv.len()).filter(|i| v_drop.binary_search(i).is_err()).collect();
        a.qk_head_dims = shrink_heads(&a.qk_head_dims, &qk_drop);
        a.v_head_dims = shrink_heads(&a.v_head_dims, &v_drop);
        a.wq = a.wq.select_rows(&qk_keep)?;
        a.wk = a.wk.select_rows(&qk_keep)?;
        a.wv = a.wv.select_rows(&v_keep)?;
        a.wo = a.wo.select_cols(&v_keep)?;
    }
    out.validate()?;
    Ok(out)
}
