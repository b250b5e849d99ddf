//! PageRank-family centrality.
//!
//! [`pagerank`] and [`weighted_pagerank`] work on explicit `|V| x |V|` graphs
//! and serve as references. [`mlp_wpr`] is the production path: a layer-wise
//! weighted PageRank over a [`ComponentGraph`], where node `i` of layer `k`
//! scores
//!
//! ```text
//! phi_k[i] = gamma * sum_j ( theta * |W_ij| / sum_l |W_lj|
//!                          + (1 - theta) * A_ij / sum_l A_lj ) * phi_{k-1}[j]
//!          + (1 - gamma) * beta_k[i] / sum_l beta_k[l]
//! ```
//!
//! with `beta_k` the calibration norms of layer `k`'s outputs. Input nodes
//! have no incoming edges and score `(1 - gamma) * beta_in / sum(beta_in)`.
//!
//! Columns with zero out-strength or out-degree contribute nothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ComponentGraph;
use crate::linalg::{l1_distance, DenseMatrix, DenseVector};
use crate::mlp::CalibrationStats;

pub const DEFAULT_GAMMA: f64 = 0.85;
pub const DEFAULT_THETA: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WprParams {
    pub gamma: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for WprParams {
    fn default() -> Self {
        Self {
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl WprParams {
    pub fn new(gamma: f64, theta: f64) -> Self {
        Self {
            gamma,
            theta,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParams(format!("gamma {} not in [0, 1]", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParams(format!("theta {} not in [0, 1]", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParams(format!("tol {} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Scores of an explicit graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphScores {
    pub scores: DenseVector,
    pub iterations: usize,
}

/// Metadata carried alongside per-layer scores.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub method: String,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub calibration_sample_count: Option<usize>,
}

/// Per-node importance, grouped like the graph: input surrogates plus one
/// vector per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceScores {
    pub input: DenseVector,
    pub layers: Vec<DenseVector>,
    /// Layer names, aligned with `layers`.
    pub names: Vec<String>,
    pub meta: ScoreMeta,
}

impl ImportanceScores {
    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.len()).collect()
    }

    /// All groups concatenated in node order.
    pub fn stacked(&self) -> Vec<f64> {
        self.input
            .iter()
            .chain(self.layers.iter().flat_map(|l| l.iter()))
            .copied()
            .collect()
    }
}

fn explicit_transition(
    adjacency: &DenseMatrix,
    weights: Option<&DenseMatrix>,
    theta: f64,
) -> Result<Vec<f64>> {
    let n = adjacency.rows();
    if adjacency.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "pagerank (square adjacency)",
            expected: n,
            got: adjacency.cols(),
        });
    }
    if let Some(w) = weights {
        if w.shape() != adjacency.shape() {
            return Err(Error::DimensionMismatch {
                op: "weighted_pagerank (weight shape)",
                expected: n,
                got: w.rows(),
            });
        }
    }
    let degree = adjacency.col_abs_sums();
    let strength = weights.map(DenseMatrix::col_abs_sums);
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            if degree[j] > 0.0 {
                v += (1.0 - theta) * adjacency.get(i, j) as f64 / degree[j];
            }
            if let (Some(w), Some(s)) = (weights, &strength) {
                if s[j] > 0.0 {
                    v += theta * (w.get(i, j) as f64).abs() / s[j];
                }
            }
            t[i * n + j] = v;
        }
    }
    Ok(t)
}

fn explicit_power_iteration(
    transition: &[f64],
    teleport: &[f64],
    gamma: f64,
    tol: f64,
    max_iters: usize,
) -> Result<GraphScores> {
    let n = teleport.len();
    let mut phi: Vec<f64> = teleport.to_vec();
    let mut residual = f64::INFINITY;
    for it in 1..=max_iters {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let row = &transition[i * n..(i + 1) * n];
                gamma * row.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>()
                    + (1.0 - gamma) * teleport[i]
            })
            .collect();
        residual = l1_distance(&next, &phi);
        phi = next;
        if residual < tol {
            return Ok(GraphScores {
                scores: DenseVector::new(phi)?,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual,
    })
}

/// Classic PageRank with uniform teleport `1 / |V|`. `adjacency[i][j] = 1`
/// denotes an edge from node `j` to node `i`.
pub fn pagerank(adjacency: &DenseMatrix, gamma: f64, tol: f64, max_iters: usize) -> Result<GraphScores> {
    WprParams {
        gamma,
        theta: 0.0,
        tol,
        max_iters,
    }
    .validate()?;
    let n = adjacency.rows();
    let t = explicit_transition(adjacency, None, 0.0)?;
    let teleport = vec![1.0 / n as f64; n];
    explicit_power_iteration(&t, &teleport, gamma, tol, max_iters)
}

/// Weighted PageRank with node information `beta`, normalised globally.
pub fn weighted_pagerank(
    adjacency: &DenseMatrix,
    weights: &DenseMatrix,
    beta: &[f64],
    params: &WprParams,
) -> Result<GraphScores> {
    if beta.iter().any(|b| !(*b >= 0.0)) {
        return Err(Error::InvalidParams("beta must be non-negative".into()));
    }
    let total: f64 = beta.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroBeta { layer: 0 });
    }
    let teleport: Vec<f64> = beta.iter().map(|b| b / total).collect();
    weighted_pagerank_with_teleport(adjacency, weights, &teleport, params)
}

/// Weighted PageRank with an already normalised teleport vector. With a
/// teleport normalised per node group this is the explicit-graph form of
/// [`mlp_wpr`].
pub fn weighted_pagerank_with_teleport(
    adjacency: &DenseMatrix,
    weights: &DenseMatrix,
    teleport: &[f64],
    params: &WprParams,
) -> Result<GraphScores> {
    params.validate()?;
    if teleport.len() != adjacency.rows() {
        return Err(Error::DimensionMismatch {
            op: "weighted_pagerank (teleport)",
            expected: adjacency.rows(),
            got: teleport.len(),
        });
    }
    let t = explicit_transition(adjacency, Some(weights), params.theta)?;
    explicit_power_iteration(&t, teleport, params.gamma, params.tol, params.max_iters)
}

/// Precomputed per-layer operator of the layer-wise update.
struct LayerOperator {
    rows: usize,
    cols: usize,
    abs_weights: Vec<f64>,
    /// `1 / sum_l |W_lj|`, or 0 for columns without outgoing strength.
    inv_strength: Vec<f64>,
    teleport: Vec<f64>,
}

impl LayerOperator {
    fn new(rows: usize, cols: usize, weights: &[f64], beta: &[f64], layer: usize) -> Result<Self> {
        let abs_weights: Vec<f64> = weights.iter().map(|w| w.abs()).collect();
        let mut strength = vec![0.0; cols];
        for i in 0..rows {
            for (s, w) in strength.iter_mut().zip(&abs_weights[i * cols..(i + 1) * cols]) {
                *s += w;
            }
        }
        let inv_strength = strength
            .iter()
            .map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 })
            .collect();
        Ok(Self {
            rows,
            cols,
            abs_weights,
            inv_strength,
            teleport: normalized_teleport(beta, layer)?,
        })
    }

    fn apply(&self, prev: &[f64], gamma: f64, theta: f64) -> Vec<f64> {
        debug_assert_eq!(prev.len(), self.cols);
        let scaled: Vec<f64> = prev.iter().zip(&self.inv_strength).map(|(p, s)| p * s).collect();
        // dense adjacency: every column has out-degree `rows`
        let structural = (1.0 - theta) * prev.iter().sum::<f64>() / self.rows as f64;
        (0..self.rows)
            .map(|i| {
                let row = &self.abs_weights[i * self.cols..(i + 1) * self.cols];
                let weighted: f64 = row.iter().zip(&scaled).map(|(w, s)| w * s).sum();
                gamma * (theta * weighted + structural) + (1.0 - gamma) * self.teleport[i]
            })
            .collect()
    }
}

pub(crate) fn normalized_teleport(beta: &[f64], layer: usize) -> Result<Vec<f64>> {
    if beta.iter().any(|b| !(*b >= 0.0) || !b.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "calibration norms of group {layer} must be finite and non-negative"
        )));
    }
    let total: f64 = beta.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroBeta { layer });
    }
    Ok(beta.iter().map(|b| b / total).collect())
}

/// Score of input surrogate nodes: no incoming edges, teleport only.
pub(crate) fn input_scores(beta: &[f64], gamma: f64) -> Result<Vec<f64>> {
    Ok(normalized_teleport(beta, 0)?
        .into_iter()
        .map(|t| (1.0 - gamma) * t)
        .collect())
}

/// One application of the layer-wise update to a single dense block, given
/// the scores of the group feeding it.
pub fn layer_scores(
    weights: &[f64],
    rows: usize,
    cols: usize,
    incoming: &[f64],
    beta: &[f64],
    params: &WprParams,
) -> Result<Vec<f64>> {
    params.validate()?;
    if incoming.len() != cols || beta.len() != rows || weights.len() != rows * cols {
        return Err(Error::DimensionMismatch {
            op: "layer_scores",
            expected: cols,
            got: incoming.len(),
        });
    }
    let op = LayerOperator::new(rows, cols, weights, beta, 1)?;
    Ok(op.apply(incoming, params.gamma, params.theta))
}

fn check_calibration(graph: &ComponentGraph, calib: &CalibrationStats) -> Result<()> {
    if calib.input.len() != graph.input_dim {
        return Err(Error::DimensionMismatch {
            op: "mlp_wpr (input norms)",
            expected: graph.input_dim,
            got: calib.input.len(),
        });
    }
    if calib.layers.len() != graph.layers.len() {
        return Err(Error::DimensionMismatch {
            op: "mlp_wpr (layer count)",
            expected: graph.layers.len(),
            got: calib.layers.len(),
        });
    }
    for (l, c) in graph.layers.iter().zip(&calib.layers) {
        if c.len() != l.rows {
            return Err(Error::DimensionMismatch {
                op: "mlp_wpr (layer norms)",
                expected: l.rows,
                got: c.len(),
            });
        }
    }
    Ok(())
}

struct LayerwiseProblem {
    input: Vec<f64>,
    ops: Vec<LayerOperator>,
    gamma: f64,
    theta: f64,
}

impl LayerwiseProblem {
    fn new(graph: &ComponentGraph, calib: &CalibrationStats, params: &WprParams) -> Result<Self> {
        params.validate()?;
        check_calibration(graph, calib)?;
        let ops = graph
            .layers
            .iter()
            .zip(&calib.layers)
            .enumerate()
            .map(|(k, (l, beta))| LayerOperator::new(l.rows, l.cols, &l.weights, beta, k + 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            input: input_scores(&calib.input, params.gamma)?,
            ops,
            gamma: params.gamma,
            theta: params.theta,
        })
    }

    /// Teleport-only state, the default starting point.
    fn teleport_state(&self) -> Vec<Vec<f64>> {
        std::iter::once(self.input.clone())
            .chain(
                self.ops
                    .iter()
                    .map(|op| op.teleport.iter().map(|t| (1.0 - self.gamma) * t).collect()),
            )
            .collect()
    }

    /// Synchronous update of every group from the previous iterate.
    fn step(&self, state: &[Vec<f64>]) -> Vec<Vec<f64>> {
        std::iter::once(self.input.clone())
            .chain(
                self.ops
                    .iter()
                    .enumerate()
                    .map(|(k, op)| op.apply(&state[k], self.gamma, self.theta)),
            )
            .collect()
    }

    fn sweep(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.input.clone()];
        for op in &self.ops {
            let next = op.apply(out.last().unwrap(), self.gamma, self.theta);
            out.push(next);
        }
        out
    }

    fn iterate(&self, start: Vec<Vec<f64>>, tol: f64, max_iters: usize) -> Result<(Vec<Vec<f64>>, usize)> {
        let mut state = start;
        let mut residual = f64::INFINITY;
        for it in 1..=max_iters {
            let next = self.step(&state);
            residual = state
                .iter()
                .zip(&next)
                .map(|(a, b)| l1_distance(a, b))
                .sum();
            state = next;
            if residual < tol {
                return Ok((state, it));
            }
        }
        Err(Error::NonConvergence {
            iterations: max_iters,
            residual,
        })
    }
}

fn into_scores(
    graph: &ComponentGraph,
    calib: &CalibrationStats,
    params: &WprParams,
    mut groups: Vec<Vec<f64>>,
    iterations: Option<usize>,
) -> Result<ImportanceScores> {
    let layers = groups.split_off(1);
    Ok(ImportanceScores {
        input: DenseVector::new(groups.pop().unwrap())?,
        layers: layers.into_iter().map(DenseVector::new).collect::<Result<_>>()?,
        names: graph.layers.iter().map(|l| l.name.clone()).collect(),
        meta: ScoreMeta {
            method: "wpr".into(),
            gamma: Some(params.gamma),
            theta: Some(params.theta),
            seed: None,
            iterations,
            calibration_sample_count: Some(calib.sample_count),
        },
    })
}

/// Layer-wise weighted PageRank by power iteration from the teleport state.
///
/// On an acyclic layered graph the iterate is exact for one more group after
/// every step, so this terminates after `K + 1` steps for `K` layers (the last
/// step confirms a zero change).
pub fn mlp_wpr(graph: &ComponentGraph, calib: &CalibrationStats, params: &WprParams) -> Result<ImportanceScores> {
    let problem = LayerwiseProblem::new(graph, calib, params)?;
    let (state, iters) = problem.iterate(problem.teleport_state(), params.tol, params.max_iters)?;
    into_scores(graph, calib, params, state, Some(iters))
}

/// Power iteration from a caller-supplied start (one vector per node group).
pub fn mlp_wpr_from(
    graph: &ComponentGraph,
    calib: &CalibrationStats,
    params: &WprParams,
    start: Vec<Vec<f64>>,
) -> Result<ImportanceScores> {
    let problem = LayerwiseProblem::new(graph, calib, params)?;
    let widths = graph.group_widths();
    if start.len() != widths.len() || start.iter().zip(&widths).any(|(s, &w)| s.len() != w) {
        return Err(Error::InvalidParams("start vector does not match node groups".into()));
    }
    let (state, iters) = problem.iterate(start, params.tol, params.max_iters)?;
    into_scores(graph, calib, params, state, Some(iters))
}

/// A seeded positive start state, for checking independence from the start.
pub fn random_start(graph: &ComponentGraph, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    graph
        .group_widths()
        .into_iter()
        .map(|w| (0..w).map(|_| rng.gen_range(0.01..1.0)).collect())
        .collect()
}

/// The fixed point computed directly: one pass in layer order.
pub fn mlp_wpr_sweep(graph: &ComponentGraph, calib: &CalibrationStats, params: &WprParams) -> Result<ImportanceScores> {
    let problem = LayerwiseProblem::new(graph, calib, params)?;
    into_scores(graph, calib, params, problem.sweep(), Some(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{assemble_block_graph, decompose, LayerBlock};
    use crate::mlp::{Activation, MlpLayer, MlpModel};

    fn uniform_calib(graph: &ComponentGraph) -> CalibrationStats {
        CalibrationStats {
            sample_count: 1,
            input: DenseVector::from(vec![1.0; graph.input_dim]),
            layers: graph
                .layers
                .iter()
                .map(|l| DenseVector::from(vec![1.0; l.rows]))
                .collect(),
        }
    }

    #[test]
    fn two_cycle_is_symmetric() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let r = pagerank(&a, 0.85, 1e-14, 1000).unwrap();
        assert!((r.scores[0] - 0.5).abs() < 1e-12);
        assert!((r.scores[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_zero_is_uniform() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]);
        let r = pagerank(&a, 0.0, 1e-12, 10).unwrap();
        assert!(r.scores.iter().all(|&s| (s - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn pagerank_reports_non_convergence() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        // start is already the fixed point for a symmetric cycle; use an asymmetric one
        let b = DenseMatrix::from_rows(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
        assert!(pagerank(&a, 0.85, 1e-12, 1000).is_ok());
        assert!(matches!(
            pagerank(&b, 0.99, 1e-15, 3),
            Err(Error::NonConvergence { iterations: 3, .. })
        ));
    }

    #[test]
    fn wpr_teleport_only_limit() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]);
        let w = DenseMatrix::from_rows(&[[0.0, 2.0], [3.0, 0.0]]);
        let beta = [1.0, 3.0];
        let r = weighted_pagerank(&a, &w, &beta, &WprParams::new(0.0, 0.5)).unwrap();
        assert_eq!(r.scores.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn wpr_rejects_zero_beta() {
        let a = DenseMatrix::identity(2);
        assert!(matches!(
            weighted_pagerank(&a, &a, &[0.0, 0.0], &WprParams::default()),
            Err(Error::ZeroBeta { .. })
        ));
    }

    #[test]
    fn wpr_equal_weights_theta_one_matches_theta_zero() {
        let a = DenseMatrix::from_rows(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]);
        let w = a.scaled(2.5);
        let beta = [1.0, 2.0, 3.0];
        let p0 = weighted_pagerank(&a, &w, &beta, &WprParams::new(0.85, 0.0)).unwrap();
        let p1 = weighted_pagerank(&a, &w, &beta, &WprParams::new(0.85, 1.0)).unwrap();
        for (x, y) in p0.scores.iter().zip(p1.scores.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn params_are_validated() {
        assert!(WprParams::new(1.5, 0.5).validate().is_err());
        assert!(WprParams::new(0.5, -0.1).validate().is_err());
        let mut p = WprParams::default();
        p.tol = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn gamma_zero_gives_normalized_beta() {
        let m = MlpModel::init(&[3, 4, 2], Activation::Relu, 1).unwrap();
        let g = decompose(&m);
        let calib = CalibrationStats {
            sample_count: 1,
            input: DenseVector::from(vec![1.0, 2.0, 1.0]),
            layers: vec![
                DenseVector::from(vec![1.0, 2.0, 3.0, 4.0]),
                DenseVector::from(vec![3.0, 1.0]),
            ],
        };
        let s = mlp_wpr(&g, &calib, &WprParams::new(0.0, 0.5)).unwrap();
        assert_eq!(s.layers[0].as_slice(), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(s.layers[1].as_slice(), &[0.75, 0.25]);
    }

    #[test]
    fn structural_term_is_uniform_within_layer() {
        // theta = 0 and uniform beta: every neuron of a layer gets the same score
        let m = MlpModel::init(&[3, 5, 4], Activation::Relu, 3).unwrap();
        let g = decompose(&m);
        let s = mlp_wpr(&g, &uniform_calib(&g), &WprParams::new(0.85, 0.0)).unwrap();
        for layer in &s.layers {
            assert!(layer.iter().all(|&v| (v - layer[0]).abs() < 1e-15));
        }
        // and equals gamma * sum(prev) / m + (1 - gamma) / m
        let prev: f64 = s.input.sum();
        let expect = 0.85 * prev / 5.0 + 0.15 / 5.0;
        assert!((s.layers[0][0] - expect).abs() < 1e-15);
    }

    #[test]
    fn tiny_model_matches_block_graph() {
        let m = MlpModel::new(vec![
            MlpLayer::new(DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]), vec![0.0; 2], Activation::Identity).unwrap(),
            MlpLayer::new(DenseMatrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]), vec![0.0; 2], Activation::Identity).unwrap(),
        ])
        .unwrap();
        let g = decompose(&m);
        let params = WprParams::new(0.85, 1.0);
        let s = mlp_wpr(&g, &uniform_calib(&g), &params).unwrap();
        let bg = assemble_block_graph(&m).unwrap();
        let teleport = vec![0.5; 6];
        let e = weighted_pagerank_with_teleport(&bg.adjacency, &bg.weight, &teleport, &params).unwrap();
        for (a, b) in s.stacked().iter().zip(e.scores.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn power_iteration_matches_sweep_within_k_plus_one() {
        let m = MlpModel::init(&[4, 6, 5, 3], Activation::Relu, 6).unwrap();
        let g = decompose(&m);
        let c = crate::mlp::calibrate(
            &m,
            &(0..8).map(|s| (0..4).map(|i| ((s * 7 + i) as f64).cos()).collect()).collect::<Vec<_>>(),
        )
        .unwrap();
        let p = WprParams::default();
        let it = mlp_wpr(&g, &c, &p).unwrap();
        let sw = mlp_wpr_sweep(&g, &c, &p).unwrap();
        assert!(it.meta.iterations.unwrap() <= g.layers.len() + 1);
        assert_eq!(it.stacked(), sw.stacked());
    }

    #[test]
    fn zero_beta_layer_is_error() {
        let g = ComponentGraph::new(2, vec![LayerBlock::new("l", 1, 2, vec![1.0, 1.0]).unwrap()]).unwrap();
        let calib = CalibrationStats {
            sample_count: 1,
            input: DenseVector::from(vec![1.0, 1.0]),
            layers: vec![DenseVector::from(vec![0.0])],
        };
        assert!(matches!(
            mlp_wpr(&g, &calib, &WprParams::default()),
            Err(Error::ZeroBeta { layer: 1 })
        ));
    }

    #[test]
    fn mismatched_calibration_is_error() {
        let g = ComponentGraph::new(2, vec![LayerBlock::new("l", 1, 2, vec![1.0, 1.0]).unwrap()]).unwrap();
        let calib = CalibrationStats {
            sample_count: 1,
            input: DenseVector::from(vec![1.0]),
            layers: vec![DenseVector::from(vec![1.0])],
        };
        assert!(mlp_wpr(&g, &calib, &WprParams::default()).is_err());
    }

    #[test]
    fn dangling_columns_contribute_nothing() {
        // column 1 of the only layer has zero strength; its score must not leak
        let g = ComponentGraph::new(2, vec![LayerBlock::new("l", 2, 2, vec![1.0, 0.0, 3.0, 0.0]).unwrap()]).unwrap();
        let calib = CalibrationStats {
            sample_count: 1,
            input: DenseVector::from(vec![1.0, 1.0]),
            layers: vec![DenseVector::from(vec![1.0, 1.0])],
        };
        let p = WprParams::new(0.5, 1.0);
        let s = mlp_wpr(&g, &calib, &p).unwrap();
        // inputs: 0.25 each; weighted mass only from column 0: 0.25 * (1/4, 3/4)
        assert!((s.layers[0][0] - (0.5 * 0.25 * 0.25 + 0.25)).abs() < 1e-15);
        assert!((s.layers[0][1] - (0.5 * 0.25 * 0.75 + 0.25)).abs() < 1e-15);
    }
}
