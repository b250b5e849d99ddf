//! Structured pruning of dense networks driven by a layer-wise weighted
//! PageRank over the graph of their weights.
//!
//! An MLP is viewed as a layered directed graph whose edges carry the weight
//! magnitudes. [`centrality::mlp_wpr`] scores every neuron from the scores of
//! the layer below plus its calibration output norm, and [`pruner`] removes
//! the lowest-scoring neurons of each hidden layer in equal proportion.
//! Decoder transformers are handled by chaining their feed-forward sublayers
//! into one deep MLP ([`chain`]).
//!
//! ```
//! use rankprune::centrality::WprParams;
//! use rankprune::mlp::{calibrate, Activation, MlpModel};
//! use rankprune::pruner::{apply, plan, speedup_report};
//! use rankprune::scoring::{score, ScoringMethod};
//!
//! let model = MlpModel::init(&[4, 8, 3], Activation::Relu, 0)?;
//! let calib = calibrate(&model, &[vec![0.5, 1.0, 0.0, 0.2], vec![1.0, 0.1, 0.3, 0.9]])?;
//! let scores = score(&model, Some(&calib), &ScoringMethod::Wpr(WprParams::default()))?;
//! let p = plan(&scores, 0.5)?;
//! let pruned = apply(&model, &p)?;
//! assert_eq!(pruned.widths(), vec![4, 3]);
//! assert_eq!(speedup_report(&p).flops_after, 2 * (4 * 4 + 4 * 3));
//! # Ok::<(), rankprune::Error>(())
//! ```

pub mod centrality;
pub mod chain;
pub mod cli;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod mlp;
pub mod model_io;
pub mod pruner;
pub mod scoring;
pub mod sweep;
pub mod transformer;

pub use error::{Error, Result};
