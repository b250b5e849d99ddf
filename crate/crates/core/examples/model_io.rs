//! Round-trip a model, calibration, scores and plan through the on-disk
//! formats used by the command line tool.

use rankprune::centrality::WprParams;
use rankprune::mlp::{calibrate, Activation, MlpModel};
use rankprune::model_io::{read_manifest_bytes, read_model, write_model, CalibFile, Model, PlanFile, ScoresFile};
use rankprune::pruner::plan;
use rankprune::scoring::{score, ScoringMethod};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let model = MlpModel::init(&[8, 12, 4], Activation::Relu, 3)?;
    let path = dir.path().join("model.rpm");
    write_model(&Model::Mlp(model.clone()), &path)?;
    let bytes = std::fs::read(&path)?;
    println!("{} bytes, manifest:\n{}", bytes.len(), serde_json::to_string_pretty(&read_manifest_bytes(&bytes)?)?);
    let Model::Mlp(back) = read_model(&path)? else { anyhow::bail!("expected an mlp") };
    assert_eq!(back, model);

    let samples: Vec<Vec<f64>> = (0..4).map(|i| (0..8).map(|j| ((i * 8 + j) as f64).sin()).collect()).collect();
    let stats = calibrate(&model, &samples)?;
    let names: Vec<String> = (0..model.num_layers()).map(|k| format!("layer{k}")).collect();
    let calib_path = dir.path().join("model.calib.json");
    CalibFile::new(&stats, &names, Some(0))?.save(&calib_path)?;
    let stats = CalibFile::load(&calib_path)?.to_stats()?;

    let scores = score(&model, Some(&stats), &ScoringMethod::Wpr(WprParams::default()))?;
    let scores_path = dir.path().join("scores.json");
    ScoresFile::new(&scores, None).save(&scores_path)?;
    let scores = ScoresFile::load(&scores_path)?.to_scores()?;

    let plan_path = dir.path().join("plan.json");
    PlanFile::new(&plan(&scores, 0.25)?).save(&plan_path)?;
    println!("plan.json:\n{}", std::fs::read_to_string(&plan_path)?);
    Ok(())
}
