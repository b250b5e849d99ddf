//! Extend chain scores to the attention projections, reuse the cached chain
//! prefix, and try the experimental head-dimension pruning.

use rankprune::centrality::WprParams;
use rankprune::chain::{
    attention_extension_scores, attention_extension_scores_uncached, calibrate_transformer, prune_attention_experimental,
    score_chain, AttentionMatrix,
};
use rankprune::scoring::ScoringMethod;
use rankprune::transformer::{random_tokens, ToyTransformer, TransformerConfig};

fn main() -> anyhow::Result<()> {
    let model = ToyTransformer::make_fixture(7, &TransformerConfig::default())?;
    let calib = calibrate_transformer(&model, &random_tokens(5, 64, 16, 8))?;
    let params = WprParams::default();
    let chain = score_chain(&model, &calib.chain, &ScoringMethod::Wpr(params))?;

    let cached = attention_extension_scores(&model, &calib, &chain, &params)?;
    let fresh = attention_extension_scores_uncached(&model, &calib, &params)?;
    for (a, b) in cached.iter().zip(&fresh) {
        for m in AttentionMatrix::ALL {
            let gap = a.get(m).iter().zip(b.get(m).iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            println!("block {} {}: sum {:.5}, cached vs fresh {gap:.1e}", a.block, m.name(), a.get(m).sum());
        }
    }

    let pruned = prune_attention_experimental(&model, &cached, 0.25)?;
    for (b, blk) in pruned.blocks.iter().enumerate() {
        println!("block {b}: qk head dims {:?}, v head dims {:?}", blk.attn.qk_head_dims, blk.attn.v_head_dims);
    }
    println!("params {} -> {}", model.parameter_count(), pruned.parameter_count());
    Ok(())
}
