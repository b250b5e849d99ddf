//! Plan and apply uniform pruning of a 784-256-10 MLP, then print the
//! parameter and FLOP accounting at several sparsities.

use rankprune::mlp::{Activation, MlpModel};
use rankprune::pruner::{apply, plan, speedup_report};
use rankprune::scoring::{score, ScoringMethod};

fn main() -> anyhow::Result<()> {
    let model = MlpModel::init(&[784, 256, 10], Activation::Relu, 0)?;
    let scores = score(&model, None, &ScoringMethod::L1Norm)?;
    println!("sparsity  params_after  flops_after  speedup");
    for s in [0.1, 0.25, 0.5, 0.75] {
        let p = plan(&scores, s)?;
        let r = speedup_report(&p);
        let pruned = apply(&model, &p)?;
        assert_eq!(pruned.parameter_count() as u64, r.params_after);
        println!("{s:>8.2}  {:>12}  {:>11}  {:>7.4}", r.params_after, r.flops_after, r.speedup);
    }
    Ok(())
}
