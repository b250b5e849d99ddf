//! Score the hidden neurons of a random MLP with layer-wise weighted PageRank,
//! both by power iteration and by a single forward sweep.

use rankprune::centrality::{mlp_wpr, mlp_wpr_sweep, WprParams};
use rankprune::graph::decompose;
use rankprune::mlp::{calibrate, Activation, MlpModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let model = MlpModel::init(&[6, 10, 8, 3], Activation::Relu, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let samples: Vec<Vec<f64>> = (0..32).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let calib = calibrate(&model, &samples)?;

    let graph = decompose(&model);
    let params = WprParams::default();
    let iterated = mlp_wpr(&graph, &calib, &params)?;
    let swept = mlp_wpr_sweep(&graph, &calib, &params)?;

    println!("converged after {:?} iterations", iterated.meta.iterations);
    for (k, (a, b)) in iterated.layers.iter().zip(&swept.layers).enumerate() {
        let gap = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        println!("layer {k}: sum {:.6}, max |iterate - sweep| {gap:.1e}", a.sum());
        println!("  {:?}", a.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());
    }
    Ok(())
}
