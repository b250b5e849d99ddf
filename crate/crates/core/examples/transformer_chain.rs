//! Chain the feed-forward blocks of a toy decoder, score them with WPR, and
//! prune to an overall parameter sparsity.

use rankprune::centrality::WprParams;
use rankprune::chain::{apply_llm_plan, calibrate_transformer, chain_ffns, score_and_plan_llm};
use rankprune::pruner::speedup_report;
use rankprune::scoring::ScoringMethod;
use rankprune::transformer::{random_tokens, FfnKind, ToyTransformer, TransformerConfig};

fn main() -> anyhow::Result<()> {
    for kind in [FfnKind::TwoLayer, FfnKind::Gated] {
        let config = TransformerConfig { ffn_kind: kind, ..TransformerConfig::default() };
        let model = ToyTransformer::make_fixture(7, &config)?;
        let view = chain_ffns(&model)?;
        println!("{}: chain widths {:?}", kind.name(), view.widths());

        let tokens = random_tokens(1, config.vocab, 16, 12);
        let calib = calibrate_transformer(&model, &tokens)?;
        let (_, plan) = score_and_plan_llm(&model, &calib.chain, &ScoringMethod::Wpr(WprParams::default()), 0.2)?;
        let pruned = apply_llm_plan(&model, &plan)?;

        let r = speedup_report(&plan);
        println!("  local sparsity {:.4}, params {} -> {}", plan.sparsity_local, r.params_before, pruned.parameter_count());
        println!("  d_ff per block {:?}", pruned.blocks.iter().map(|b| b.ffn.d_ff()).collect::<Vec<_>>());
        let logits = pruned.forward(&tokens[0])?;
        println!("  first-position logits finite: {}", logits[0].iter().all(|v| v.is_finite()));
    }
    Ok(())
}
