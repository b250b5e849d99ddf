//! Accuracy retention of a trained MLP across methods and sparsity levels.

use serde::Serialize;

use crate::error::Result;
use crate::mlp::{evaluate, Accuracy, CalibrationStats, Dataset, MlpModel};
use crate::pruner::{apply, plan};
use crate::scoring::{score, ScoringMethod};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionPoint {
    pub method: String,
    pub sparsity: f64,
    pub accuracy: Accuracy,
    /// Percent of the dense accuracy that survives.
    pub retention: Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetentionSweep {
    pub dense: Accuracy,
    pub points: Vec<RetentionPoint>,
}

impl RetentionSweep {
    pub fn point(&self, method: &str, sparsity: f64) -> Option<&RetentionPoint> {
        self.points
            .iter()
            .find(|p| p.method == method && (p.sparsity - sparsity).abs() < 1e-12)
    }
}

/// Scores once per method, then prunes uniformly at every local sparsity and
/// evaluates on `test`.
pub fn retention_sweep(
    model: &MlpModel,
    calib: &CalibrationStats,
    test: &Dataset,
    methods: &[ScoringMethod],
    sparsities: &[f64],
) -> Result<RetentionSweep> {
    let dense = evaluate(model, test)?;
    let mut points = Vec::with_capacity(methods.len() * sparsities.len());
    for method in methods {
        let scores = score(model, Some(calib), method)?;
        for &s in sparsities {
            let pruned = apply(model, &plan(&scores, s)?)?;
            let accuracy = evaluate(&pruned, test)?;
            points.push(RetentionPoint {
                method: method.name().into(),
                sparsity: s,
                accuracy,
                retention: accuracy.retention(&dense),
            });
        }
    }
    Ok(RetentionSweep { dense, points })
}
