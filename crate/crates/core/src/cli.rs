//! Command-line front end. [`run`] never exits the process; it returns the
//! exit code: 0 on success, 1 on usage errors, 2 on data or validation errors.
//! Machine output is JSON on stdout (or the `--output` file); diagnostics go
//! to stderr.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::centrality::{WprParams, DEFAULT_GAMMA, DEFAULT_MAX_ITERS, DEFAULT_THETA, DEFAULT_TOL};
use crate::chain::{
    apply_llm_plan, attention_extension_scores, calibrate_transformer, chain_ffns, plan_llm_local,
    prune_attention_experimental, score_chain, transformer_budget,
};
use crate::error::Error;
use crate::graph::{assemble_block_graph, decompose};
use crate::mlp::{calibrate_dataset, evaluate, train, Activation, MlpModel, TrainConfig};
use crate::model_io::{
    load_idx_dataset, read_model, to_canonical_json, write_model, CalibFile, Model, PlanFile, ScoresFile,
    FORMAT_VERSION,
};
use crate::pruner::{apply, map_overall_to_local, plan, speedup_report, ParamBudget};
use crate::scoring::{score, score_graph, ScoringMethod};
use crate::transformer::{random_tokens, FfnKind, ToyTransformer, TransformerConfig};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (rpm format 1)");

#[derive(Debug, Parser)]
#[command(name = "rankprune", version = VERSION, about = "Graph-centrality structured pruning for MLPs and decoder transformers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train an MLP classifier on IDX data with ADAM.
    TrainMlp(TrainArgs),
    /// Gather per-layer output norms on calibration data.
    Calibrate(CalibrateArgs),
    /// Compute neuron importance scores.
    Score(ScoreArgs),
    /// Turn scores into a uniform prune plan.
    Plan(PlanArgs),
    /// Apply a prune plan to a model.
    Prune(PruneArgs),
    /// Evaluate a model.
    Eval(EvalArgs),
    /// Describe the chained-FFN view of a transformer.
    ChainInfo(ModelArg),
    /// Dump the explicit block graph of a small MLP.
    ExportGraph(ExportGraphArgs),
    /// Write a seeded toy transformer.
    ToyFixture(FixtureArgs),
    /// Parameter, FLOP and speedup accounting of a plan.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IdxArgs {
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ActivationArg {
    Relu,
    Sigmoid,
    Gelu,
    Identity,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Gelu => Activation::Gelu,
            ActivationArg::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: IdxArgs,
    /// Layer widths including input and output, e.g. 784,256,10.
    #[arg(long, value_delimiter = ',', default_value = "784,256,10")]
    dims: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    activation: ActivationArg,
    #[arg(long, default_value_t = 3000)]
    steps: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    weight_decay: f64,
    /// Share of samples used for training; the rest is held out.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: IdxArgs,
    /// Samples (MLP) or token sequences (transformer).
    #[arg(long, default_value_t = 128)]
    calib_samples: usize,
    /// Sequence length of random calibration tokens.
    #[arg(long, default_value_t = 16)]
    seq_len: usize,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Wpr,
    L1norm,
    Activation,
    Random,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    calib: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "wpr")]
    method: MethodArg,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also score attention query/key/value rows (transformers, wpr only).
    #[arg(long)]
    attention: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
#[group(id = "sparsity", required = true, multiple = false, args = ["sparsity_local", "sparsity_overall"])]
struct PlanArgs {
    #[arg(long)]
    scores: PathBuf,
    /// Needed for transformers and for --sparsity-overall.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    sparsity_local: Option<f64>,
    #[arg(long)]
    sparsity_overall: Option<f64>,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Prune attention rows by the attention section of --scores.
    #[arg(long, requires_all = ["scores", "attention_sparsity"])]
    experimental_attention: bool,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    attention_sparsity: Option<f64>,
    /// Pruned model file to write.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: IdxArgs,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Token sequences for transformer evaluation.
    #[arg(long, default_value_t = 32)]
    sequences: usize,
    #[arg(long, default_value_t = 16)]
    seq_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct ModelArg {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Args)]
struct ExportGraphArgs {
    #[arg(long)]
    model: PathBuf,
    /// Emit the explicit matrices instead of per-layer blocks.
    #[arg(long)]
    explicit: bool,
    #[command(flatten)]
    out: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FfnArg {
    TwoLayer,
    Gated,
}

#[derive(Debug, Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 64)]
    vocab: usize,
    #[arg(long, default_value_t = 8)]
    d_model: usize,
    #[arg(long, default_value_t = 2)]
    n_heads: usize,
    #[arg(long, default_value_t = 2)]
    n_blocks: usize,
    #[arg(long, default_value_t = 16)]
    d_ff: usize,
    #[arg(long, value_enum, default_value = "two-layer")]
    ffn_kind: FfnArg,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    plan: PathBuf,
    #[command(flatten)]
    out: Output,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::TrainMlp(a) => train_mlp(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Plan(a) => plan_cmd(a),
        Command::Prune(a) => prune_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::ChainInfo(a) => chain_info(a),
        Command::ExportGraph(a) => export_graph(a),
        Command::ToyFixture(a) => toy_fixture(a),
        Command::Report(a) => report(a),
    }
}

fn emit<T: Serialize>(doc: &T, out: &Output) -> CliResult {
    let text = to_canonical_json(doc)?;
    match &out.output {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn idx_pair(d: &IdxArgs, cmd: &str) -> CliResult<(PathBuf, PathBuf)> {
    match (&d.images, &d.labels) {
        (Some(i), Some(l)) => Ok((i.clone(), l.clone())),
        _ => Err(usage(format!("{cmd} needs --images and --labels for an MLP"))),
    }
}

fn load_mlp(path: &Path) -> CliResult<MlpModel> {
    match read_model(path)? {
        Model::Mlp(m) => Ok(m),
        Model::Transformer(_) => Err(Failure::Data(Error::InvalidModel(format!(
            "{} holds a transformer, an MLP is required",
            path.display()
        )))),
    }
}

fn train_mlp(a: TrainArgs) -> CliResult {
    let (images, labels) = idx_pair(&a.data, "train-mlp")?;
    let data = load_idx_dataset(images, labels)?;
    let (train_set, test_set) = data.split(a.train_fraction, a.seed);
    let init = MlpModel::init(&a.dims, a.activation.into(), a.seed)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        batch_size: a.batch_size,
        steps: a.steps,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let out = train(&init, &train_set, &cfg)?;
    let acc = evaluate(&out.model, &test_set)?;
    write_model(&Model::Mlp(out.model.clone()), &a.output)?;
    emit(
        &json!({
            "final_loss": out.final_loss,
            "parameter_count": out.model.parameter_count(),
            "steps": out.steps,
            "test_accuracy": acc,
        }),
        &Output { output: None },
    )
}

fn layer_names(n: usize) -> Vec<String> {
    (0..n).map(|k| format!("layer{k}")).collect()
}

fn calibrate_cmd(a: CalibrateArgs) -> CliResult {
    let file = match read_model(&a.model)? {
        Model::Mlp(m) => {
            let (images, labels) = idx_pair(&a.data, "calibrate")?;
            let data = load_idx_dataset(images, labels)?;
            let (train_set, _) = data.split(a.train_fraction, a.seed);
            let stats = calibrate_dataset(&m, &train_set, a.calib_samples)?;
            CalibFile::new(&stats, &layer_names(m.num_layers()), Some(a.seed))?
        }
        Model::Transformer(t) => {
            let tokens = random_tokens(a.seed, t.vocab, a.calib_samples, a.seq_len);
            let calib = calibrate_transformer(&t, &tokens)?;
            let names: Vec<String> = chain_ffns(&t)?.back_map.iter().map(|r| r.name()).collect();
            CalibFile::for_transformer(&calib, &names, Some(a.seed))?
        }
    };
    emit(&file, &a.out)
}

fn score_cmd(a: ScoreArgs) -> CliResult {
    let params = WprParams {
        gamma: a.gamma,
        theta: a.theta,
        tol: a.tol,
        max_iters: a.max_iters,
    };
    let method = match a.method {
        MethodArg::Wpr => ScoringMethod::Wpr(params),
        MethodArg::L1norm => ScoringMethod::L1Norm,
        MethodArg::Activation => ScoringMethod::Activation,
        MethodArg::Random => ScoringMethod::Random { seed: a.seed },
    };
    let calib = match (&a.calib, method.needs_calibration()) {
        (Some(p), _) => Some(CalibFile::load(p)?),
        (None, true) => return Err(usage(format!("--method {} requires --calib", method.name()))),
        (None, false) => None,
    };
    if a.attention && !matches!(a.method, MethodArg::Wpr) {
        return Err(usage("--attention requires --method wpr"));
    }
    let file = match read_model(&a.model)? {
        Model::Mlp(m) => {
            if a.attention {
                return Err(usage("--attention applies to transformers only"));
            }
            let stats = calib.as_ref().map(CalibFile::to_stats).transpose()?;
            ScoresFile::new(&score(&m, stats.as_ref(), &method)?, None)
        }
        Model::Transformer(t) => {
            let stats = calib.as_ref().map(CalibFile::to_stats).transpose()?;
            let chain = match &stats {
                Some(s) => score_chain(&t, s, &method)?,
                None => {
                    let view = chain_ffns(&t)?;
                    score_graph(&view.graph, None, &method)?
                }
            };
            let attention = if a.attention {
                let tc = calib
                    .as_ref()
                    .ok_or_else(|| usage("--attention requires --calib"))?
                    .to_transformer_calibration()?;
                Some(attention_extension_scores(&t, &tc, &chain, &params)?)
            } else {
                None
            };
            ScoresFile::new(&chain, attention.as_deref())
        }
    };
    emit(&file, &a.out)
}

fn plan_cmd(a: PlanArgs) -> CliResult {
    let scores = ScoresFile::load(&a.scores)?.to_scores()?;
    let model = a.model.as_deref().map(read_model).transpose()?;
    let plan = match model {
        Some(Model::Transformer(t)) => {
            let local = match (a.sparsity_local, a.sparsity_overall) {
                (Some(s), _) => s,
                (None, Some(o)) => map_overall_to_local(&transformer_budget(&t), o)?,
                (None, None) => unreachable!("clap enforces one sparsity flag"),
            };
            plan_llm_local(&t, &scores, local, a.sparsity_overall)?
        }
        Some(Model::Mlp(m)) => {
            let local = match (a.sparsity_local, a.sparsity_overall) {
                (Some(s), _) => s,
                (None, Some(o)) => map_overall_to_local(&ParamBudget::for_mlp(&m), o)?,
                (None, None) => unreachable!("clap enforces one sparsity flag"),
            };
            let mut p = plan(&scores, local)?;
            p.sparsity_overall_requested = a.sparsity_overall;
            p
        }
        None => {
            if a.sparsity_overall.is_some() {
                return Err(usage("--sparsity-overall requires --model"));
            }
            if scores.names.iter().any(|n| n.starts_with("blocks.")) {
                return Err(usage("transformer scores need --model to plan"));
            }
            plan(&scores, a.sparsity_local.expect("clap enforces one sparsity flag"))?
        }
    };
    emit(&PlanFile::new(&plan), &a.out)
}

fn prune_cmd(a: PruneArgs) -> CliResult {
    if a.plan.is_none() && !a.experimental_attention {
        return Err(usage("prune needs --plan or --experimental-attention"));
    }
    let pruned = match read_model(&a.model)? {
        Model::Mlp(m) => {
            if a.experimental_attention {
                return Err(usage("--experimental-attention applies to transformers only"));
            }
            let plan = PlanFile::load(a.plan.as_ref().expect("checked above"))?.plan;
            Model::Mlp(apply(&m, &plan)?)
        }
        Model::Transformer(t) => {
            let mut t = match &a.plan {
                Some(p) => apply_llm_plan(&t, &PlanFile::load(p)?.plan)?,
                None => t,
            };
            if a.experimental_attention {
                let scores = ScoresFile::load(a.scores.as_ref().expect("clap requires --scores"))?
                    .attention_scores()?
                    .ok_or_else(|| usage("scores file has no attention section; rerun score with --attention"))?;
                t = prune_attention_experimental(&t, &scores, a.attention_sparsity.expect("clap requires it"))?;
            }
            Model::Transformer(t)
        }
    };
    write_model(&pruned, &a.output)?;
    eprintln!("wrote {} ({} parameters)", a.output.display(), pruned.parameter_count());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> CliResult {
    match read_model(&a.model)? {
        Model::Mlp(m) => {
            let (images, labels) = idx_pair(&a.data, "eval")?;
            let data = load_idx_dataset(images, labels)?;
            let (_, test_set) = data.split(a.train_fraction, a.seed);
            let acc = evaluate(&m, &test_set)?;
            emit(
                &json!({"accuracy": acc, "parameter_count": m.parameter_count(), "samples": test_set.len()}),
                &a.out,
            )
        }
        Model::Transformer(t) => {
            let (nll, finite) = next_token_nll(&t, &random_tokens(a.seed, t.vocab, a.sequences, a.seq_len))?;
            emit(
                &json!({"finite_logits": finite, "mean_next_token_nll": nll, "parameter_count": t.parameter_count()}),
                &a.out,
            )
        }
    }
}

/// Mean negative log-likelihood of each next token, and whether every logit is finite.
fn next_token_nll(t: &ToyTransformer, seqs: &[Vec<usize>]) -> CliResult<(f64, bool)> {
    let (mut total, mut count, mut finite) = (0.0, 0usize, true);
    for s in seqs {
        let logits = t.forward(s)?;
        for (pos, row) in logits.iter().enumerate() {
            finite &= row.iter().all(|v| v.is_finite());
            if let Some(&next) = s.get(pos + 1) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - row[next];
                count += 1;
            }
        }
    }
    Ok((if count == 0 { 0.0 } else { total / count as f64 }, finite))
}

fn chain_info(a: ModelArg) -> CliResult {
    let t = match read_model(&a.model)? {
        Model::Transformer(t) => t,
        Model::Mlp(_) => return Err(Failure::Data(Error::InvalidModel("chain-info needs a transformer".into()))),
    };
    let view = chain_ffns(&t)?;
    let budget = transformer_budget(&t);
    emit(
        &json!({
            "back_map": view.back_map,
            "layers": view.back_map.iter().map(|r| r.name()).collect::<Vec<_>>(),
            "parameter_count": budget.total,
            "prunable_parameter_count": budget.prunable,
            "widths": view.widths(),
        }),
        &a.out,
    )
}

fn export_graph(a: ExportGraphArgs) -> CliResult {
    let m = load_mlp(&a.model)?;
    let doc = if a.explicit {
        let g = assemble_block_graph(&m)?;
        let rows = |d: &crate::linalg::DenseMatrix| (0..d.rows()).map(|i| d.row(i).to_vec()).collect::<Vec<_>>();
        json!({
            "adjacency": rows(&g.adjacency),
            "layer_offsets": g.layer_offsets,
            "num_nodes": g.num_nodes(),
            "weight": rows(&g.weight),
        })
    } else {
        let g = decompose(&m);
        json!({
            "group_widths": g.group_widths(),
            "input_dim": g.input_dim,
            "layers": g.layers.iter().map(|l| json!({
                "cols": l.cols,
                "name": l.name,
                "rows": l.rows,
                "weights": (0..l.rows).map(|i| l.row(i).to_vec()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "num_nodes": g.num_nodes(),
        })
    };
    emit(&doc, &a.out)
}

fn toy_fixture(a: FixtureArgs) -> CliResult {
    let cfg = TransformerConfig {
        vocab: a.vocab,
        d_model: a.d_model,
        n_heads: a.n_heads,
        n_blocks: a.n_blocks,
        d_ff: a.d_ff,
        ffn_kind: match a.ffn_kind {
            FfnArg::TwoLayer => FfnKind::TwoLayer,
            FfnArg::Gated => FfnKind::Gated,
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let t = ToyTransformer::make_fixture(a.seed, &cfg)?;
    write_model(&Model::Transformer(t.clone()), &a.output)?;
    eprintln!("wrote {} ({} parameters)", a.output.display(), t.parameter_count());
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let plan = PlanFile::load(&a.plan)?.plan;
    emit(
        &json!({
            "format_version": FORMAT_VERSION,
            "neurons_removed": plan.removed(),
            "sparsity_local": plan.sparsity_local,
            "sparsity_overall_requested": plan.sparsity_overall_requested,
            "speedup": speedup_report(&plan),
        }),
        &a.out,
    )
}
