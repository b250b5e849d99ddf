//! Assemble the explicit block graph of a tiny MLP and compare it with the
//! per-layer component view.

use rankprune::graph::{assemble_block_graph, decompose};
use rankprune::linalg::DenseMatrix;
use rankprune::mlp::{Activation, MlpLayer, MlpModel};

fn main() -> anyhow::Result<()> {
    let model = MlpModel::new(vec![
        MlpLayer::new(DenseMatrix::new(2, 2, vec![1., 2., 3., 4.])?, vec![0.; 2], Activation::Identity)?,
        MlpLayer::new(DenseMatrix::new(2, 2, vec![5., 6., 7., 8.])?, vec![0.; 2], Activation::Identity)?,
    ])?;

    let g = assemble_block_graph(&model)?;
    println!("node groups start at {:?}", g.layer_offsets);
    for i in 0..g.num_nodes() {
        println!("W[{i}] = {:?}   A[{i}] = {:?}", g.weight.row(i), g.adjacency.row(i));
    }

    let components = decompose(&model);
    println!("component view: {} nodes in groups {:?}", components.num_nodes(), components.group_widths());
    let x = vec![1.0; components.num_nodes()];
    println!("block matvec on ones: {:?}", components.matvec(&x)?.as_slice());
    Ok(())
}
