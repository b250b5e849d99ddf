//! Graph views of a feed-forward network.
//!
//! Every neuron is a node; input features get surrogate nodes. The explicit
//! [`BlockGraph`] places each layer's weight matrix in the block directly
//! below the diagonal of a `|V| x |V|` matrix. It exists to check the
//! [`ComponentGraph`], which keeps only the per-layer blocks and evaluates
//! `W_G x` as a concatenation of per-layer products.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, DenseVector};
use crate::mlp::MlpModel;

/// Largest node count for which [`assemble_block_graph`] materialises `W_G`.
pub const MAX_BLOCK_GRAPH_NODES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraph {
    pub weight: DenseMatrix,
    pub adjacency: DenseMatrix,
    /// Start node of each node group: input surrogates first, then one group per layer.
    pub layer_offsets: Vec<usize>,
}

impl BlockGraph {
    pub fn num_nodes(&self) -> usize {
        self.weight.rows()
    }

    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        self.weight.matvec(x)
    }

    /// Node group of every node (0 = inputs, `k + 1` = layer `k`).
    pub fn node_groups(&self) -> Vec<usize> {
        let n = self.num_nodes();
        let mut out = Vec::with_capacity(n);
        for (g, w) in self.layer_offsets.windows(2).enumerate() {
            out.extend(std::iter::repeat(g).take(w[1] - w[0]));
        }
        let last = *self.layer_offsets.last().unwrap_or(&0);
        out.extend(std::iter::repeat(self.layer_offsets.len() - 1).take(n - last));
        out
    }
}

pub fn assemble_block_graph(model: &MlpModel) -> Result<BlockGraph> {
    let mut layer_offsets = vec![0, model.input_dim()];
    for w in model.widths() {
        layer_offsets.push(layer_offsets.last().unwrap() + w);
    }
    let n = layer_offsets.pop().unwrap();
    if n > MAX_BLOCK_GRAPH_NODES {
        return Err(Error::InvalidParams(format!(
            "block graph would have {n} nodes; limit is {MAX_BLOCK_GRAPH_NODES}"
        )));
    }
    let mut weight = DenseMatrix::zeros(n, n);
    let mut adjacency = DenseMatrix::zeros(n, n);
    for (k, layer) in model.layers().iter().enumerate() {
        let (row0, col0) = (layer_offsets[k + 1], layer_offsets[k]);
        for i in 0..layer.out_dim() {
            for j in 0..layer.in_dim() {
                weight.set(row0 + i, col0 + j, layer.weights.get(i, j));
                adjacency.set(row0 + i, col0 + j, 1.0);
            }
        }
    }
    Ok(BlockGraph {
        weight,
        adjacency,
        layer_offsets,
    })
}

/// One layer's edges: `rows x cols` weights from the previous node group.
/// Adjacency is implicitly all ones (dense layer).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBlock {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
}

impl LayerBlock {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "LayerBlock::new",
                expected: rows * cols,
                got: weights.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            rows,
            cols,
            weights,
        })
    }

    pub fn from_matrix(name: impl Into<String>, m: &DenseMatrix) -> Self {
        Self {
            name: name.into(),
            rows: m.rows(),
            cols: m.cols(),
            weights: m.data().iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGraph {
    pub input_dim: usize,
    pub layers: Vec<LayerBlock>,
}

impl ComponentGraph {
    pub fn new(input_dim: usize, layers: Vec<LayerBlock>) -> Result<Self> {
        let mut width = input_dim;
        for (k, l) in layers.iter().enumerate() {
            if l.cols != width {
                return Err(Error::InvalidModel(format!(
                    "graph layer {k} ({}) expects {} inputs, previous group has {width}",
                    l.name, l.cols
                )));
            }
            width = l.rows;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn num_nodes(&self) -> usize {
        self.input_dim + self.layers.iter().map(|l| l.rows).sum::<usize>()
    }

    /// Widths of every node group, inputs first.
    pub fn group_widths(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(|l| l.rows))
            .collect()
    }

    /// `W_G x` computed block by block: the input group receives nothing and
    /// group `k + 1` receives `W(k) x_k`.
    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        let n = self.num_nodes();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                op: "ComponentGraph::matvec",
                expected: n,
                got: x.len(),
            });
        }
        let mut out = vec![0.0; self.input_dim];
        let mut offset = 0;
        for l in &self.layers {
            out.extend(l.matvec(&x[offset..offset + l.cols]));
            offset += l.cols;
        }
        DenseVector::new(out)
    }
}

pub fn decompose(model: &MlpModel) -> ComponentGraph {
    let layers = model
        .layers()
        .iter()
        .enumerate()
        .map(|(k, l)| LayerBlock::from_matrix(format!("layer{k}"), &l.weights))
        .collect();
    ComponentGraph {
        input_dim: model.input_dim(),
        layers,
    }
}

/// Removes neuron `index` of layer `layer`: row of `W(k)`, entry of `b(k)`
/// and column of `W(k+1)`. The output layer cannot be pruned.
pub fn remove_neuron(model: &MlpModel, layer: usize, index: usize) -> Result<MlpModel> {
    let k_last = model.num_layers() - 1;
    if layer > k_last {
        return Err(Error::IndexOutOfRange {
            what: "layers",
            index: layer,
            len: model.num_layers(),
        });
    }
    if layer == k_last {
        return Err(Error::FinalLayer(layer));
    }
    let mut out = model.clone();
    let layers = out.layers_mut();
    let width = layers[layer].out_dim();
    if index >= width {
        return Err(Error::IndexOutOfRange {
            what: "layer neurons",
            index,
            len: width,
        });
    }
    if width == 1 {
        return Err(Error::InvalidModel(format!(
            "removing the last neuron of layer {layer} would leave it empty"
        )));
    }
    layers[layer].weights = layers[layer].weights.delete_row(index)?;
    layers[layer].bias.remove(index);
    layers[layer + 1].weights = layers[layer + 1].weights.delete_col(index)?;
    Ok(out)
}
