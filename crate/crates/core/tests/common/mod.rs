//! Helpers shared by the integration tests, including dense-solver oracles
//! that never touch the library's graph or centrality code.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankprune::linalg::{DenseMatrix, DenseVector};
use rankprune::mlp::{Activation, CalibrationStats, MlpLayer, MlpModel};

pub fn tiny_model() -> MlpModel {
    MlpModel::new(vec![
        MlpLayer::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]), vec![0.0; 2], Activation::Identity).unwrap(),
        MlpLayer::new(DenseMatrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]), vec![0.0; 2], Activation::Identity).unwrap(),
    ])
    .unwrap()
}

/// Random MLP with `layers` in `[min_layers, max_layers]` and widths in `[2, max_width]`.
pub fn random_mlp(rng: &mut ChaCha8Rng, min_layers: usize, max_layers: usize, max_width: usize) -> MlpModel {
    let k = rng.gen_range(min_layers..=max_layers);
    let dims: Vec<usize> = (0..=k).map(|_| rng.gen_range(2..=max_width)).collect();
    let acts = [Activation::Relu, Activation::Sigmoid, Activation::Gelu, Activation::Identity];
    let layers = (0..k)
        .map(|i| {
            let (m, n) = (dims[i + 1], dims[i]);
            let w = (0..m * n).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let b = (0..m).map(|_| rng.gen_range(-0.5f32..0.5)).collect();
            MlpLayer::new(DenseMatrix::new(m, n, w).unwrap(), b, acts[rng.gen_range(0..acts.len())]).unwrap()
        })
        .collect();
    MlpModel::new(layers).unwrap()
}

/// Strictly positive synthetic calibration norms shaped like `model`.
pub fn random_calib(rng: &mut ChaCha8Rng, model: &MlpModel) -> CalibrationStats {
    let mut draw = |n: usize| DenseVector::new((0..n).map(|_| rng.gen_range(0.05..2.0)).collect()).unwrap();
    CalibrationStats {
        sample_count: 1,
        input: draw(model.input_dim()),
        layers: model.widths().into_iter().map(&mut draw).collect(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One weight block of a layered graph: `rows x cols`, row-major.
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

pub fn blocks_of(model: &MlpModel) -> Vec<Block> {
    model
        .layers()
        .iter()
        .map(|l| Block {
            rows: l.out_dim(),
            cols: l.in_dim(),
            weights: l.weights.data().iter().map(|&w| w as f64).collect(),
        })
        .collect()
}

/// Solves the layer-wise weighted PageRank as one linear system
/// `(I - gamma T) phi = (1 - gamma) t` with an LU factorisation, where `T`
/// is assembled from the blocks and `t` is `beta` normalised per group.
pub fn dense_layerwise_wpr(
    input_dim: usize,
    blocks: &[Block],
    betas: &[Vec<f64>],
    gamma: f64,
    theta: f64,
) -> Vec<Vec<f64>> {
    let mut offsets = vec![0, input_dim];
    for b in blocks {
        offsets.push(offsets.last().unwrap() + b.rows);
    }
    let n = *offsets.last().unwrap();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for (k, b) in blocks.iter().enumerate() {
        let (r0, c0) = (offsets[k + 1], offsets[k]);
        for j in 0..b.cols {
            let s: f64 = (0..b.rows).map(|i| b.weights[i * b.cols + j].abs()).sum();
            for i in 0..b.rows {
                let w = if s > 0.0 { b.weights[i * b.cols + j].abs() / s } else { 0.0 };
                t[(r0 + i, c0 + j)] = theta * w + (1.0 - theta) / b.rows as f64;
            }
        }
    }
    let mut rhs = DVector::<f64>::zeros(n);
    for (g, beta) in betas.iter().enumerate() {
        let total: f64 = beta.iter().sum();
        for (i, v) in beta.iter().enumerate() {
            rhs[offsets[g] + i] = (1.0 - gamma) * v / total;
        }
    }
    let lhs = DMatrix::<f64>::identity(n, n) - t * gamma;
    let phi = lhs.lu().solve(&rhs).expect("I - gamma T is unit lower-triangular");
    (0..offsets.len() - 1)
        .map(|g| phi.as_slice()[offsets[g]..offsets[g + 1]].to_vec())
        .collect()
}

pub fn betas_of(calib: &CalibrationStats) -> Vec<Vec<f64>> {
    std::iter::once(calib.input.to_vec())
        .chain(calib.layers.iter().map(|l| l.to_vec()))
        .collect()
}

/// Plain PageRank by direct solve; dangling columns leak their mass.
pub fn dense_pagerank(adjacency: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = adjacency.len();
    let mut t = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let d: f64 = (0..n).map(|i| adjacency[i][j]).sum();
        if d > 0.0 {
            for i in 0..n {
                t[(i, j)] = adjacency[i][j] / d;
            }
        }
    }
    let lhs = DMatrix::<f64>::identity(n, n) - t * gamma;
    let rhs = DVector::<f64>::from_element(n, (1.0 - gamma) / n as f64);
    lhs.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

/// Random DAG on `n` nodes: `adj[i][j] = 1` for an edge `j -> i`, `j < i`.
pub fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if j < i && rng.gen_bool(p) { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn to_dense(rows: &[Vec<f64>]) -> DenseMatrix {
    let f: Vec<Vec<f32>> = rows.iter().map(|r| r.iter().map(|&v| v as f32).collect()).collect();
    DenseMatrix::from_rows(&f)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs_diff_groups(a: &[DenseVector], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| max_abs_diff(x, y)).fold(0.0, f64::max)
}

pub fn random_inputs(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}
