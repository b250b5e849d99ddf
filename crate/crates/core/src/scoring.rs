//! One entry point for every neuron-importance method.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::centrality::{mlp_wpr, ImportanceScores, ScoreMeta, WprParams};
use crate::error::{Error, Result};
use crate::graph::{decompose, ComponentGraph};
use crate::linalg::DenseVector;
use crate::mlp::{CalibrationStats, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoringMethod {
    /// Layer-wise weighted PageRank.
    Wpr(WprParams),
    /// Sum of absolute incoming weights of each neuron (its row of `W(k)`).
    L1Norm,
    /// Calibration output norm of each neuron.
    Activation,
    /// i.i.d. uniform scores from a seed.
    Random { seed: u64 },
}

impl ScoringMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ScoringMethod::Wpr(_) => "wpr",
            ScoringMethod::L1Norm => "l1norm",
            ScoringMethod::Activation => "activation",
            ScoringMethod::Random { .. } => "random",
        }
    }

    pub fn needs_calibration(&self) -> bool {
        matches!(self, ScoringMethod::Wpr(_) | ScoringMethod::Activation)
    }
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Method names without parameters, as accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Wpr,
    L1Norm,
    Activation,
    Random,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wpr" => Ok(MethodKind::Wpr),
            "l1norm" => Ok(MethodKind::L1Norm),
            "activation" => Ok(MethodKind::Activation),
            "random" => Ok(MethodKind::Random),
            other => Err(Error::InvalidParams(format!("unknown scoring method {other:?}"))),
        }
    }
}

pub fn score(model: &MlpModel, calib: Option<&CalibrationStats>, method: &ScoringMethod) -> Result<ImportanceScores> {
    score_graph(&decompose(model), calib, method)
}

/// Scores any layered graph; the transformer chain goes through here too.
pub fn score_graph(
    graph: &ComponentGraph,
    calib: Option<&CalibrationStats>,
    method: &ScoringMethod,
) -> Result<ImportanceScores> {
    let calib = match (method.needs_calibration(), calib) {
        (true, None) => return Err(Error::MissingCalibration(method.name())),
        (_, c) => c,
    };
    let names = graph.layers.iter().map(|l| l.name.clone()).collect();
    let meta = ScoreMeta {
        method: method.name().into(),
        calibration_sample_count: calib.map(|c| c.sample_count),
        ..ScoreMeta::default()
    };
    match method {
        ScoringMethod::Wpr(params) => mlp_wpr(graph, calib.expect("checked above"), params),
        ScoringMethod::L1Norm => {
            let layers = graph
                .layers
                .iter()
                .map(|l| (0..l.rows).map(|i| l.row(i).iter().map(|w| w.abs()).sum()).collect::<Vec<f64>>())
                .map(DenseVector::new)
                .collect::<Result<Vec<_>>>()?;
            // input nodes: magnitude of their outgoing edges
            let input = match graph.layers.first() {
                Some(first) => {
                    let mut out = vec![0.0; graph.input_dim];
                    for i in 0..first.rows {
                        for (o, w) in out.iter_mut().zip(first.row(i)) {
                            *o += w.abs();
                        }
                    }
                    out
                }
                None => vec![0.0; graph.input_dim],
            };
            Ok(ImportanceScores {
                input: DenseVector::new(input)?,
                layers,
                names,
                meta,
            })
        }
        ScoringMethod::Activation => {
            let c = calib.expect("checked above");
            if c.layers.len() != graph.layers.len()
                || c.layers.iter().zip(&graph.layers).any(|(v, l)| v.len() != l.rows)
            {
                return Err(Error::DimensionMismatch {
                    op: "activation scores",
                    expected: graph.layers.len(),
                    got: c.layers.len(),
                });
            }
            Ok(ImportanceScores {
                input: c.input.clone(),
                layers: c.layers.clone(),
                names,
                meta,
            })
        }
        ScoringMethod::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut draw = |n: usize| DenseVector::from((0..n).map(|_| rng.gen::<f64>()).collect::<Vec<_>>());
            let input = draw(graph.input_dim);
            let layers = graph.layers.iter().map(|l| draw(l.rows)).collect();
            Ok(ImportanceScores {
                input,
                layers,
                names,
                meta: ScoreMeta {
                    seed: Some(*seed),
                    ..meta
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::mlp::{calibrate, Activation, MlpLayer};

    fn model() -> MlpModel {
        MlpModel::new(vec![
            MlpLayer::new(DenseMatrix::from_rows(&[[3.0, -4.0], [1.0, 1.0]]), vec![0.0; 2], Activation::Relu).unwrap(),
            MlpLayer::new(DenseMatrix::from_rows(&[[1.0, 2.0]]), vec![0.0], Activation::Identity).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn l1norm_is_row_abs_sum() {
        let s = score(&model(), None, &ScoringMethod::L1Norm).unwrap();
        assert_eq!(s.layers[0].as_slice(), &[7.0, 2.0]);
        assert_eq!(s.meta.method, "l1norm");
    }

    #[test]
    fn activation_scores_are_calibration_norms() {
        let m = model();
        let c = calibrate(&m, &[vec![1.0, 0.5], vec![-0.3, 2.0]]).unwrap();
        let s = score(&m, Some(&c), &ScoringMethod::Activation).unwrap();
        assert_eq!(s.layers, c.layers);
        assert_eq!(s.input, c.input);
    }

    #[test]
    fn random_is_reproducible() {
        let a = score(&model(), None, &ScoringMethod::Random { seed: 42 }).unwrap();
        let b = score(&model(), None, &ScoringMethod::Random { seed: 42 }).unwrap();
        let c = score(&model(), None, &ScoringMethod::Random { seed: 43 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.meta.seed, Some(42));
    }

    #[test]
    fn missing_calibration_is_reported() {
        for method in [ScoringMethod::Wpr(WprParams::default()), ScoringMethod::Activation] {
            assert!(matches!(
                score(&model(), None, &method),
                Err(Error::MissingCalibration(_))
            ));
        }
    }

    #[test]
    fn all_methods_share_shape() {
        let m = MlpModel::init(&[5, 7, 4, 3], Activation::Relu, 1).unwrap();
        let c = calibrate(&m, &[vec![0.5; 5], vec![1.0; 5]]).unwrap();
        let methods = [
            ScoringMethod::Wpr(WprParams::default()),
            ScoringMethod::L1Norm,
            ScoringMethod::Activation,
            ScoringMethod::Random { seed: 1 },
        ];
        let shapes: Vec<_> = methods
            .iter()
            .map(|mth| {
                let s = score(&m, Some(&c), mth).unwrap();
                (s.input.len(), s.widths(), s.names)
            })
            .collect();
        assert!(shapes.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn parses_method_names() {
        assert_eq!("wpr".parse::<MethodKind>().unwrap(), MethodKind::Wpr);
        assert_eq!("l1norm".parse::<MethodKind>().unwrap(), MethodKind::L1Norm);
        assert!("katz".parse::<MethodKind>().is_err());
    }
}
