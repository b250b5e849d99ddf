//! Classic PageRank next to weighted PageRank on a small hand-written DAG.

use rankprune::centrality::{pagerank, weighted_pagerank, WprParams};
use rankprune::linalg::DenseMatrix;

fn main() -> anyhow::Result<()> {
    // a[i][j] = 1 means an edge j -> i
    #[rustfmt::skip]
    let adj = DenseMatrix::new(4, 4, vec![
        0., 0., 0., 0.,
        1., 0., 0., 0.,
        1., 1., 0., 0.,
        0., 1., 1., 0.,
    ])?;
    #[rustfmt::skip]
    let weights = DenseMatrix::new(4, 4, vec![
        0.,  0.,   0., 0.,
        0.5, 0.,   0., 0.,
        2.0, -1.0, 0., 0.,
        0.,  3.0,  4., 0.,
    ])?;

    let pr = pagerank(&adj, 0.85, 1e-12, 1000)?;
    println!("pagerank           {:?}  ({} iterations)", pr.scores.as_slice(), pr.iterations);

    let beta = [1.0, 2.0, 1.0, 4.0];
    for theta in [0.0, 0.5, 1.0] {
        let p = WprParams { tol: 1e-12, ..WprParams::new(0.85, theta) };
        let w = weighted_pagerank(&adj, &weights, &beta, &p)?;
        println!("wpr theta={theta:<4}     {:?}", w.scores.as_slice());
    }
    Ok(())
}
