//! Command-line interface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::eval::{run_regime, EvalError, EvalReport};
use crate::kg::{load_kg, load_splits, KgError, KnowledgeGraph, SplitGraphs};
use crate::qe::{load_checkpoint, ModelConfig, QeError, TempMode};
use crate::query::{
    answer_query, generate_queries, generate_training_queries, load_queries, serialize_queries,
    QueryDag, QueryError, QuerySet, Regime, Structure,
};
use crate::temp::{Aggregator, Fusion, TempError};
use crate::train::{train, TrainConfig, TrainError};
use crate::typegraph::build_type_graph;

/// Environment variable consulted when no `--seed` flag is given.
pub const SEED_ENV: &str = "TEMP_CQA_SEED";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Qe(#[from] QeError),
    #[error(transparent)]
    Temp(#[from] TempError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Parser)]
#[command(
    name = "temp-cqa",
    about = "Type-aware complex query answering over knowledge graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a knowledge graph or a split directory and print statistics.
    Load(LoadArgs),
    /// Derive the relation type graph and export it as JSON (and DOT).
    BuildTypegraph(BuildTypegraphArgs),
    /// Sample queries with exact answers into a JSONL file.
    GenQueries(GenQueriesArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on query sets and report MRR / Hits@K.
    Eval(EvalArgs),
    /// Answer one query exactly by subgraph matching.
    Answer(AnswerArgs),
    /// Render a saved evaluation report as a table.
    Report(ReportArgs),
}

#[derive(Args)]
struct LoadArgs {
    /// Split directory with train/valid/test/types TSV files.
    #[arg(long, conflicts_with_all = ["triples", "types"])]
    splits: Option<PathBuf>,
    /// Triples TSV (head<TAB>relation<TAB>tail).
    #[arg(long, requires = "types")]
    triples: Option<PathBuf>,
    /// Type assertions TSV (entity<TAB>type).
    #[arg(long, requires = "triples")]
    types: Option<PathBuf>,
    /// Save the loaded graph (TSV pair plus vocabulary manifest) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildTypegraphArgs {
    #[arg(long)]
    splits: PathBuf,
    /// Which split to derive types from.
    #[arg(long, default_value = "train")]
    graph: String,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Optional DOT rendering for visualization.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args)]
struct GenQueriesArgs {
    #[arg(long)]
    splits: PathBuf,
    /// Query structure: 1p 2p 3p 2i 3i pi ip 2u up.
    #[arg(long)]
    structure: Structure,
    #[arg(long)]
    count: usize,
    /// Evaluation protocol: generalization, deductive, or inductive.
    #[arg(long, default_value = "deductive")]
    regime: Regime,
    /// Sample training queries (answered on the regime's training graph)
    /// instead of evaluation queries.
    #[arg(long)]
    for_training: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    splits: PathBuf,
    /// Training query files (JSONL); repeatable, merged.
    #[arg(long, required = true)]
    queries: Vec<PathBuf>,
    /// Model configuration JSON; flags below override its fields.
    #[arg(long)]
    model_config: Option<PathBuf>,
    /// Training configuration JSON; flags below override its fields.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    /// off, ter_only, trr_only, or both.
    #[arg(long)]
    temp: Option<TempMode>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    negatives: Option<usize>,
    /// highway, mean, or max.
    #[arg(long)]
    aggregator: Option<String>,
    /// gated or concat.
    #[arg(long)]
    fusion: Option<String>,
    #[arg(long)]
    inductive: bool,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    regime: Option<Regime>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the checkpoint and loss curve.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    splits: PathBuf,
    /// Checkpoint directory written by `train`.
    #[arg(long)]
    ckpt: PathBuf,
    /// Query files (JSONL); repeatable.
    #[arg(long, required = true)]
    queries: Vec<PathBuf>,
    #[arg(long)]
    regime: Regime,
    /// Save the report JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnswerArgs {
    #[arg(long)]
    splits: PathBuf,
    /// Which split to answer on.
    #[arg(long, default_value = "test")]
    graph: String,
    #[arg(long)]
    structure: Structure,
    /// Anchor entity names, in structure order; repeatable.
    #[arg(long, required = true)]
    anchor: Vec<String>,
    /// Relation names, in structure order; repeatable.
    #[arg(long, required = true)]
    relation: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON written by `eval`.
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
}

/// Entry point; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap uses exit code 2 for usage errors, 0 for --help/--version
            e.exit();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Load(args) => cmd_load(args),
        Command::BuildTypegraph(args) => cmd_build_typegraph(args),
        Command::GenQueries(args) => cmd_gen_queries(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Answer(args) => cmd_answer(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or(0)
}

fn pick_graph<'a>(splits: &'a SplitGraphs, name: &str) -> Result<&'a KnowledgeGraph, CliError> {
    match name {
        "train" => Ok(&splits.train),
        "valid" => Ok(&splits.valid),
        "test" => Ok(&splits.test),
        other => Err(CliError::Usage(format!(
            "unknown graph `{other}`; expected train, valid, or test"
        ))),
    }
}

fn print_kg_stats(prefix: &str, kg: &KnowledgeGraph) {
    println!(
        "{prefix}: {} entities, {} relations, {} types, {} relation assertions, {} type assertions",
        kg.entity_count(),
        kg.relation_count(),
        kg.type_count(),
        kg.relation_assertions().len(),
        kg.type_assertions().len()
    );
}

fn cmd_load(args: LoadArgs) -> Result<(), CliError> {
    match (args.splits, args.triples, args.types) {
        (Some(dir), None, None) => {
            let splits = load_splits(&dir)?;
            print_kg_stats("train", &splits.train);
            print_kg_stats("valid", &splits.valid);
            print_kg_stats("test", &splits.test);
            println!("inductive: {}", splits.inductive);
            if let Some(out) = args.out {
                splits.test.save(&out)?;
                println!("saved full graph to {}", out.display());
            }
            Ok(())
        }
        (None, Some(triples), Some(types)) => {
            let kg = load_kg(&triples, &types)?;
            print_kg_stats("graph", &kg);
            if let Some(out) = args.out {
                kg.save(&out)?;
                println!("saved to {}", out.display());
            }
            Ok(())
        }
        _ => Err(CliError::Usage(
            "pass either --splits DIR or both --triples and --types".into(),
        )),
    }
}

fn cmd_build_typegraph(args: BuildTypegraphArgs) -> Result<(), CliError> {
    let splits = load_splits(&args.splits)?;
    let kg = pick_graph(&splits, &args.graph)?;
    let tg = build_type_graph(kg);
    std::fs::write(&args.out, tg.to_json()).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    println!(
        "type graph: {} nodes, {} relations -> {}",
        tg.nodes().len(),
        tg.relation_count(),
        args.out.display()
    );
    if let Some(dot) = args.dot {
        std::fs::write(&dot, tg.to_dot(kg)).map_err(|e| CliError::Io {
            path: dot.clone(),
            source: e,
        })?;
        println!("dot rendering -> {}", dot.display());
    }
    Ok(())
}

fn cmd_gen_queries(args: GenQueriesArgs) -> Result<(), CliError> {
    let splits = load_splits(&args.splits)?;
    let seed = resolve_seed(args.seed);
    let qs = if args.for_training {
        generate_training_queries(&splits, args.structure, args.count, args.regime, seed)?
    } else {
        generate_queries(&splits, args.structure, args.count, args.regime, seed)?
    };
    serialize_queries(&qs, &args.out)?;
    println!(
        "{} {} queries ({}) -> {}",
        qs.len(),
        args.structure,
        args.regime,
        args.out.display()
    );
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.clone(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_query_files(paths: &[PathBuf]) -> Result<QuerySet, CliError> {
    let mut merged: Option<QuerySet> = None;
    for path in paths {
        let qs = load_queries(path)?;
        match &mut merged {
            None => merged = Some(qs),
            Some(m) => {
                if !qs.is_empty() && m.regime != qs.regime {
                    return Err(CliError::Usage(format!(
                        "{}: regime {} conflicts with {}",
                        path.display(),
                        qs.regime,
                        m.regime
                    )));
                }
                m.queries.extend(qs.queries);
            }
        }
    }
    Ok(merged.unwrap_or_default())
}

fn parse_aggregator(s: &str) -> Result<Aggregator, CliError> {
    match s {
        "highway" => Ok(Aggregator::Highway),
        "mean" => Ok(Aggregator::Mean),
        "max" => Ok(Aggregator::Max),
        other => Err(CliError::Usage(format!("unknown aggregator `{other}`"))),
    }
}

fn parse_fusion(s: &str) -> Result<Fusion, CliError> {
    match s {
        "gated" => Ok(Fusion::Gated),
        "concat" => Ok(Fusion::Concat),
        other => Err(CliError::Usage(format!("unknown fusion `{other}`"))),
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let splits = load_splits(&args.splits)?;
    let queries = load_query_files(&args.queries)?;

    let mut mconfig: ModelConfig = match &args.model_config {
        Some(path) => read_json(path)?,
        None => ModelConfig::default(),
    };
    if let Some(dim) = args.dim {
        mconfig.dim = dim;
    }
    if let Some(temp) = args.temp {
        mconfig.temp = temp;
    }
    if let Some(margin) = args.margin {
        mconfig.margin = margin;
    }
    if let Some(neg) = args.negatives {
        mconfig.negative_samples = neg;
    }
    if let Some(agg) = &args.aggregator {
        mconfig.entity_aggregator = parse_aggregator(agg)?;
    }
    if let Some(fusion) = &args.fusion {
        mconfig.fusion = parse_fusion(fusion)?;
    }
    if args.inductive {
        mconfig.inductive = true;
    }

    let mut tconfig: TrainConfig = match &args.train_config {
        Some(path) => read_json(path)?,
        None => TrainConfig::default(),
    };
    if let Some(lr) = args.lr {
        tconfig.learning_rate = lr;
    }
    if let Some(batch) = args.batch {
        tconfig.batch_size = batch;
    }
    if let Some(steps) = args.steps {
        tconfig.steps = steps;
    }
    if let Some(regime) = args.regime {
        tconfig.regime = regime;
    } else if !queries.is_empty() {
        tconfig.regime = queries.regime;
    }
    tconfig.seed = resolve_seed(args.seed.or(Some(tconfig.seed)));

    let outcome = train(&splits, &queries, &tconfig, &mconfig, &args.out)?;
    println!(
        "trained {} steps: loss {:.6} -> {:.6}",
        tconfig.steps, outcome.initial_loss, outcome.final_loss
    );
    println!("checkpoint -> {}", outcome.checkpoint_dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let splits = load_splits(&args.splits)?;
    let queries = load_query_files(&args.queries)?;
    let (store, meta) = load_checkpoint(&args.ckpt)?;
    let report = run_regime(args.regime, &splits, &store, &meta, &[&queries])?;
    print!("{}", report.render_table());
    if let Some(out) = args.out {
        report.save(&out)?;
        println!("report -> {}", out.display());
    }
    Ok(())
}

fn cmd_answer(args: AnswerArgs) -> Result<(), CliError> {
    let splits = load_splits(&args.splits)?;
    let kg = pick_graph(&splits, &args.graph)?;
    let anchors = args
        .anchor
        .iter()
        .map(|name| kg.entity_id(name))
        .collect::<Result<Vec<_>, _>>()?;
    let relations = args
        .relation
        .iter()
        .map(|name| kg.relation_id(name))
        .collect::<Result<Vec<_>, _>>()?;
    let dag = QueryDag::from_parts(args.structure, anchors, relations)?;
    let answers = answer_query(kg, &dag)?;
    let mut names: Vec<&str> = answers
        .iter()
        .filter_map(|e| kg.entities().name(e.0))
        .collect();
    names.sort_unstable();
    for name in names {
        println!("{name}");
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let report = EvalReport::load(&args.input)?;
    print!("{}", report.render_table());
    Ok(())
}
