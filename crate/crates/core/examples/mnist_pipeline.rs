//! Train a 784-256-10 classifier on the bundled MNIST subset, then compare
//! accuracy retention of WPR against magnitude, activation and random
//! pruning from 10% to 50% hidden sparsity.

use std::time::Instant;

use rankprune::centrality::WprParams;
use rankprune::mlp::{calibrate_dataset, train, Activation, MlpModel, TrainConfig};
use rankprune::model_io::load_idx_dataset;
use rankprune::scoring::ScoringMethod;
use rankprune::sweep::retention_sweep;

const SPARSITIES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

fn main() -> anyhow::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let data = load_idx_dataset(
        format!("{dir}/mnist-10k-images-idx3-ubyte.gz"),
        format!("{dir}/mnist-10k-labels-idx1-ubyte.gz"),
    )?;
    let (train_set, test_set) = data.split(0.8, 0);

    let t = Instant::now();
    let init = MlpModel::init(&[784, 256, 10], Activation::Relu, 0)?;
    let cfg = TrainConfig { steps: 3000, batch_size: 64, learning_rate: 1e-3, weight_decay: 1e-3, seed: 0, ..TrainConfig::default() };
    let out = train(&init, &train_set, &cfg)?;
    eprintln!("trained in {:.1?}, final loss {:.4}", t.elapsed(), out.final_loss);

    let calib = calibrate_dataset(&out.model, &train_set, 128)?;
    let mut methods = vec![ScoringMethod::Wpr(WprParams::default()), ScoringMethod::L1Norm, ScoringMethod::Activation];
    methods.extend((0..5).map(|seed| ScoringMethod::Random { seed }));
    let sweep = retention_sweep(&out.model, &calib, &test_set, &methods, &SPARSITIES)?;
    println!("dense top-1 {:.2}%, top-5 {:.2}%", sweep.dense.top1, sweep.dense.top5);

    println!("{:<12}{}", "retention", SPARSITIES.iter().map(|s| format!("{:>8}", format!("{:.0}%", s * 100.0))).collect::<String>());
    for name in ["wpr", "l1norm", "activation", "random"] {
        let row: String = SPARSITIES
            .iter()
            .map(|&s| {
                let hits: Vec<f64> =
                    sweep.points.iter().filter(|p| p.method == name && (p.sparsity - s).abs() < 1e-12).map(|p| p.retention.top1).collect();
                format!("{:8.2}", hits.iter().sum::<f64>() / hits.len() as f64)
            })
            .collect();
        println!("{name:<12}{row}");
    }
    eprintln!("total {:.1?}", t.elapsed());
    Ok(())
}
