//! Uniform structured pruning: plan, apply, and parameter/FLOP accounting.

use serde::{Deserialize, Serialize};

use crate::centrality::ImportanceScores;
use crate::error::{Error, Result};
use crate::graph::remove_neuron;
use crate::mlp::MlpModel;

/// Removal set of one prunable layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    /// Layer (or chain layer) index.
    pub layer: usize,
    pub name: String,
    /// Width the plan was computed for; a model of any other width is stale.
    pub width: usize,
    /// Strictly increasing neuron indices to remove.
    pub indices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Accounting {
    pub params_before: u64,
    pub params_after: u64,
    pub flops_before: u64,
    pub flops_after: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunePlan {
    pub layers: Vec<LayerPlan>,
    pub sparsity_local: f64,
    pub sparsity_overall_requested: Option<f64>,
    pub accounting: Accounting,
}

impl PrunePlan {
    pub fn removed(&self) -> usize {
        self.layers.iter().map(|l| l.indices.len()).sum()
    }
}

/// Number of neurons removed from a layer of `width` at local sparsity `s`.
/// The small slack keeps products like `0.29 * 100` from flooring to 28.
pub fn prune_count(width: usize, sparsity: f64) -> usize {
    ((sparsity * width as f64) + 1e-9).floor() as usize
}

/// The `count` lowest-scoring indices, ties going to the lower index, sorted ascending.
pub fn lowest_indices(scores: &[f64], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut picked: Vec<usize> = order.into_iter().take(count).collect();
    picked.sort_unstable();
    picked
}

pub(crate) fn check_sparsity(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidParams(format!("local sparsity {s} must lie in [0, 1)")));
    }
    Ok(())
}

/// Dense-layer parameter and FLOP totals for an MLP with the given widths.
/// FLOPs count one multiply and one add per weight.
pub fn mlp_accounting(input_dim: usize, widths_before: &[usize], widths_after: &[usize]) -> Accounting {
    let count = |widths: &[usize]| -> (u64, u64) {
        let mut fan_in = input_dim as u64;
        let (mut params, mut flops) = (0u64, 0u64);
        for &w in widths {
            let w = w as u64;
            params += w * fan_in + w;
            flops += 2 * w * fan_in;
            fan_in = w;
        }
        (params, flops)
    };
    let (params_before, flops_before) = count(widths_before);
    let (params_after, flops_after) = count(widths_after);
    Accounting {
        params_before,
        params_after,
        flops_before,
        flops_after,
    }
}

/// Uniform plan over every layer but the last: each loses its
/// `floor(s * width)` lowest-scoring neurons.
pub fn plan(scores: &ImportanceScores, sparsity_local: f64) -> Result<PrunePlan> {
    check_sparsity(sparsity_local)?;
    let widths = scores.widths();
    let prunable = widths.len().saturating_sub(1);
    let layers: Vec<LayerPlan> = (0..prunable)
        .map(|k| LayerPlan {
            layer: k,
            name: scores.names.get(k).cloned().unwrap_or_else(|| format!("layer{k}")),
            width: widths[k],
            indices: lowest_indices(&scores.layers[k], prune_count(widths[k], sparsity_local)),
            block: None,
            tensor: None,
        })
        .collect();
    let mut after = widths.clone();
    for l in &layers {
        after[l.layer] -= l.indices.len();
    }
    Ok(PrunePlan {
        accounting: mlp_accounting(scores.input.len(), &widths, &after),
        layers,
        sparsity_local,
        sparsity_overall_requested: None,
    })
}

pub(crate) fn check_indices(l: &LayerPlan) -> Result<()> {
    if l.indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::StalePlan(format!("indices of {} are not strictly increasing", l.name)));
    }
    if let Some(&last) = l.indices.last() {
        if last >= l.width {
            return Err(Error::StalePlan(format!("index {last} out of range for {} (width {})", l.name, l.width)));
        }
    }
    if l.indices.len() >= l.width && l.width > 0 {
        return Err(Error::StalePlan(format!("plan would empty layer {}", l.name)));
    }
    Ok(())
}

/// Removes every planned neuron, highest index first within each layer.
pub fn apply(model: &MlpModel, plan: &PrunePlan) -> Result<MlpModel> {
    let widths = model.widths();
    for l in &plan.layers {
        if l.layer + 1 >= widths.len() {
            return Err(Error::FinalLayer(l.layer));
        }
        if widths[l.layer] != l.width {
            return Err(Error::StalePlan(format!(
                "layer {} has width {} but the plan expects {}",
                l.layer, widths[l.layer], l.width
            )));
        }
        check_indices(l)?;
    }
    let mut out = model.clone();
    for l in &plan.layers {
        for &i in l.indices.iter().rev() {
            out = remove_neuron(&out, l.layer, i)?;
        }
    }
    out.validate()?;
    Ok(out)
}

/// Total and prunable parameter counts of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBudget {
    pub total: u64,
    pub prunable: u64,
}

impl ParamBudget {
    /// Prunable parameters of an MLP: for every non-final layer, each neuron's
    /// row, bias and outgoing column.
    pub fn for_mlp(model: &MlpModel) -> Self {
        let layers = model.layers();
        let prunable = (0..layers.len().saturating_sub(1))
            .map(|k| (layers[k].out_dim() * (layers[k].in_dim() + 1 + layers[k + 1].out_dim())) as u64)
            .sum();
        Self {
            total: model.parameter_count() as u64,
            prunable,
        }
    }
}

/// Local sparsity on the prunable set that removes `overall` of all parameters.
pub fn map_overall_to_local(budget: &ParamBudget, overall: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&overall) {
        return Err(Error::InvalidParams(format!("overall sparsity {overall} must lie in [0, 1)")));
    }
    if overall == 0.0 {
        return Ok(0.0);
    }
    if budget.prunable == 0 {
        return Err(Error::Unachievable {
            requested: overall,
            local: f64::INFINITY,
        });
    }
    let local = overall * budget.total as f64 / budget.prunable as f64;
    if local >= 1.0 {
        return Err(Error::Unachievable {
            requested: overall,
            local,
        });
    }
    Ok(local)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub params_before: u64,
    pub params_after: u64,
    pub params_ratio: f64,
    pub flops_before: u64,
    pub flops_after: u64,
    pub flops_ratio: f64,
    /// Theoretical latency speedup, `flops_before / flops_after`.
    pub speedup: f64,
}

pub fn speedup_report(plan: &PrunePlan) -> SpeedupReport {
    let a = plan.accounting;
    let ratio = |after: u64, before: u64| if before == 0 { 1.0 } else { after as f64 / before as f64 };
    SpeedupReport {
        params_before: a.params_before,
        params_after: a.params_after,
        params_ratio: ratio(a.params_after, a.params_before),
        flops_before: a.flops_before,
        flops_after: a.flops_after,
        flops_ratio: ratio(a.flops_after, a.flops_before),
        speedup: if a.flops_after == 0 {
            f64::INFINITY
        } else {
            a.flops_before as f64 / a.flops_after as f64
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::centrality::ScoreMeta;
    use crate::linalg::DenseVector;
    use crate::mlp::Activation;
    use proptest::prelude::*;

    fn scores_for(layers: Vec<Vec<f64>>, input: usize) -> ImportanceScores {
        ImportanceScores {
            input: DenseVector::from(vec![1.0; input]),
            names: (0..layers.len()).map(|k| format!("layer{k}")).collect(),
            layers: layers.into_iter().map(DenseVector::from).collect(),
            meta: ScoreMeta::default(),
        }
    }

    #[test]
    fn bottom_two_of_four() {
        let s = scores_for(vec![vec![0.1, 0.4, 0.2, 0.3], vec![1.0]], 2);
        let p = plan(&s, 0.5).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(p.layers[0].indices, vec![0, 2]);
    }

    #[test]
    fn zero_sparsity_is_empty_plan() {
        let m = MlpModel::init(&[3, 4, 2], Activation::Relu, 0).unwrap();
        let s = crate::scoring::score(&m, None, &crate::scoring::ScoringMethod::L1Norm).unwrap();
        let p = plan(&s, 0.0).unwrap();
        assert_eq!(p.removed(), 0);
        assert_eq!(apply(&m, &p).unwrap(), m);
        assert_eq!(speedup_report(&p).speedup, 1.0);
    }

    #[test]
    fn ties_prune_lower_index() {
        let s = scores_for(vec![vec![1.0; 4], vec![1.0]], 2);
        assert_eq!(plan(&s, 0.25).unwrap().layers[0].indices, vec![0]);
    }

    #[test]
    fn sparsity_bounds() {
        let s = scores_for(vec![vec![1.0; 4], vec![1.0]], 2);
        assert!(plan(&s, 1.0).is_err());
        assert!(plan(&s, -0.1).is_err());
    }

    #[test]
    fn applying_twice_is_stale() {
        let m = MlpModel::init(&[3, 4, 2], Activation::Relu, 0).unwrap();
        let s = crate::scoring::score(&m, None, &crate::scoring::ScoringMethod::L1Norm).unwrap();
        let p = plan(&s, 0.5).unwrap();
        let once = apply(&m, &p).unwrap();
        assert!(matches!(apply(&once, &p), Err(Error::StalePlan(_))));
    }

    #[test]
    fn overall_to_local_ratio() {
        let b = ParamBudget { total: 1000, prunable: 500 };
        assert_eq!(map_overall_to_local(&b, 0.4).unwrap(), 0.8);
        assert_eq!(map_overall_to_local(&b, 0.0).unwrap(), 0.0);
        assert!(matches!(map_overall_to_local(&b, 0.5), Err(Error::Unachievable { .. })));
    }

    #[test]
    fn interior_layers_at_75_percent() {
        // 10 -> 8 -> 8 -> 4; interior layers go 8 -> 2
        let widths = [8, 8, 4];
        let s = scores_for(widths.iter().map(|&w| (0..w).map(|i| i as f64).collect()).collect(), 10);
        let p = plan(&s, 0.75).unwrap();
        let a = p.accounting;
        // explicit recount of m * n per layer
        assert_eq!(a.flops_before, 2 * (8 * 10 + 8 * 8 + 4 * 8));
        assert_eq!(a.flops_after, 2 * (2 * 10 + 2 * 2 + 4 * 2));
        assert_eq!(a.params_after, (2 * 10 + 2) + (2 * 2 + 2) + (4 * 2 + 4));
        let r = speedup_report(&p);
        assert_eq!(r.speedup, 352.0 / 64.0);
    }

    proptest! {
        #[test]
        fn plans_are_nested(scores in proptest::collection::vec(0u8..5, 1..20), s1 in 0.0f64..0.99, s2 in 0.0f64..0.99) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let v: Vec<f64> = scores.iter().map(|&x| x as f64).collect();
            let s = scores_for(vec![v, vec![1.0]], 1);
            let a = plan(&s, lo).unwrap();
            let b = plan(&s, hi).unwrap();
            prop_assert!(a.layers[0].indices.iter().all(|i| b.layers[0].indices.contains(i)));
        }

        #[test]
        fn pruned_count_matches_closed_form(seed in 0u64..50, s in 0.0f64..0.95) {
            let m = MlpModel::init(&[6, 9, 7, 3], Activation::Relu, seed).unwrap();
            let sc = crate::scoring::score(&m, None, &crate::scoring::ScoringMethod::Random { seed }).unwrap();
            let p = plan(&sc, s).unwrap();
            let pruned = apply(&m, &p).unwrap();
            prop_assert_eq!(pruned.parameter_count() as u64, p.accounting.params_after);
            let w1 = 9 - prune_count(9, s);
            let w2 = 7 - prune_count(7, s);
            prop_assert_eq!(pruned.widths(), vec![w1, w2, 3]);
        }

        #[test]
        fn kept_weights_are_preserved(seed in 0u64..50, s in 0.0f64..0.9) {
            let m = MlpModel::init(&[5, 8, 6, 2], Activation::Relu, seed).unwrap();
            let sc = crate::scoring::score(&m, None, &crate::scoring::ScoringMethod::Random { seed: seed + 1 }).unwrap();
            let p = plan(&sc, s).unwrap();
            let pruned = apply(&m, &p).unwrap();
            let kept = |k: usize, width: usize| -> Vec<usize> {
                (0..width).filter(|i| !p.layers.get(k).is_some_and(|l| l.indices.contains(i))).collect()
            };
            let mut in_keep: Vec<usize> = (0..5).collect();
            for (k, layer) in m.layers().iter().enumerate() {
                let out_keep = if k + 1 < m.num_layers() { kept(k, layer.out_dim()) } else { (0..layer.out_dim()).collect() };
                let expect = layer.weights.select_rows(&out_keep).unwrap().select_cols(&in_keep).unwrap();
                prop_assert_eq!(
                    expect.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    pruned.layers()[k].weights.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
                in_keep = out_keep;
            }
        }
    }
}
