//! `x2g`: command-line front end for the x2graph library. Subcommands are
//! thin wrappers over library operations; every training-adjacent command
//! takes a mandatory `--seed`. Exit codes: 0 success, 2 configuration
//! error, 3 data/IO error, 4 training divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use x2graph::convert::{convert_table, ConversionConfig};
use x2graph::error::{Result, X2gError};
use x2graph::eval::evaluate;
use x2graph::experiment::{
    aggregate_reports, model_outputs, run_experiment, ExperimentManifest,
};
use x2graph::explain::{feature_importance, ExplainOpts};
use x2graph::gnn::{read_checkpoint, write_checkpoint, Arch};
use x2graph::graphio::{read_graph_dataset, write_graph_dataset};
use x2graph::kb::{kb_stats, load_edge_list, write_edge_list};
use x2graph::synth::{generate, SynthSpec};
use x2graph::tabular::{load_csv, one_hot_encode, write_csv, z_score, CsvSchema};
use x2graph::trainer::{
    make_folds, random_search, train_fusion, train_model, FoldSplit, SearchSpace, TrainConfig,
};

#[derive(Parser)]
#[command(name = "x2g", version, about = "Tabular-to-graph learning pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a CSV table into a graph dataset using a KB edge list.
    Convert(ConvertArgs),
    /// Print node/edge counts and the degree histogram of a KB.
    KbStats {
        /// KB edge-list path (tab-separated pairs).
        kb: PathBuf,
    },
    /// Generate a planted-signal synthetic (table, KB, truth) triple.
    Synth(SynthArgs),
    /// Train one model on one fold of a graph dataset.
    Train(TrainArgs),
    /// Random hyperparameter search on one fold.
    Search(SearchArgs),
    /// Evaluate a checkpoint on a split of a graph dataset.
    Evaluate(EvaluateArgs),
    /// Train a late-fusion matrix over several checkpoints.
    Fuse(FuseArgs),
    /// Explain a checkpoint's predictions on a split.
    Explain(ExplainArgs),
    /// Aggregate per-fold reports into mean +/- std rows.
    Report {
        /// Per-fold report.json paths.
        reports: Vec<PathBuf>,
    },
    /// Run a full manifest-driven experiment.
    Run {
        /// Experiment manifest (JSON).
        manifest: PathBuf,
    },
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Label column name in the CSV.
    #[arg(long, default_value = "label")]
    label: String,
    /// Optional `name=kind` schema file for non-numeric columns.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Drop exact-zero cells from the graphs.
    #[arg(long)]
    prune_zeros: bool,
    /// Disable the feature-identity embedding channel.
    #[arg(long)]
    no_id_indexing: bool,
    /// Z-score numeric columns (fit on all rows) before conversion.
    #[arg(long)]
    z_score: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// SynthSpec JSON path; defaults to the desk-scale spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_table: PathBuf,
    #[arg(long)]
    out_kb: PathBuf,
    #[arg(long)]
    out_truth: PathBuf,
    /// Also write a degree-preserving scrambled copy of the KB.
    #[arg(long)]
    out_scrambled_kb: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    folds: usize,
    #[arg(long)]
    fold_id: usize,
    /// Architecture descriptor, e.g. gcn:2:128:gelu or mean:1:64:relu:ln.
    #[arg(long)]
    arch: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    /// Line-delimited epoch history output path.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Write the fold split used for training as JSON (for evaluate/fuse/explain).
    #[arg(long)]
    out_split: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    fold_id: usize,
    #[arg(long)]
    budget: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Trial log + best config output (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Fold-split JSON (a FoldSplit object); omitted = whole dataset.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also print flat CSV metric rows to stdout.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct FuseArgs {
    /// Component checkpoints, one per KB-specific dataset.
    #[arg(long, num_args = 2..)]
    models: Vec<PathBuf>,
    /// Matching graph datasets (same order and sample count).
    #[arg(long, num_args = 2..)]
    data: Vec<PathBuf>,
    /// Fold-split JSON; fusion trains on its val split, reports on test.
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Fold-split JSON; its test indices are explained. Omitted = all.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    top_frac: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| X2gError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| X2gError::Format(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(value: &T, path: &PathBuf) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| X2gError::Format(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| X2gError::io(path.display().to_string(), e))
}

fn load_split(path: &Option<PathBuf>, n: usize) -> Result<Vec<usize>> {
    match path {
        Some(p) => {
            let split: FoldSplit = read_json(p)?;
            Ok(split.test)
        }
        None => Ok((0..n).collect()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(a) => {
            let schema = match &a.schema {
                Some(p) => CsvSchema::from_file(p)?,
                None => CsvSchema::default(),
            };
            let mut table = load_csv(&a.table, &a.label, &schema)?;
            if !table.is_fully_numeric() {
                table = one_hot_encode(&table);
            }
            if a.z_score {
                let all: Vec<usize> = (0..table.n_rows()).collect();
                table = z_score(&table, &all)?.0;
            }
            let kb_name = a
                .kb
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "kb".into());
            let kb = load_edge_list(&a.kb, &kb_name)?;
            let config = ConversionConfig {
                node_pruning: a.prune_zeros,
                id_indexing: !a.no_id_indexing,
            };
            let gd = convert_table(&table, &kb, &config)?;
            write_graph_dataset(&gd, &a.out)?;
            println!(
                "wrote {} graphs over a {}-feature vocabulary to {}",
                gd.graphs.len(),
                gd.vocabulary.len(),
                a.out.display()
            );
        }
        Command::KbStats { kb } => {
            let name = kb
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "kb".into());
            let loaded = load_edge_list(&kb, &name)?;
            let stats = kb_stats(&loaded);
            println!("nodes: {}", stats.nodes);
            println!("edges: {}", stats.edges);
            println!("degree histogram:");
            for (degree, count) in &stats.degree_histogram {
                println!("  {degree}: {count}");
            }
        }
        Command::Synth(a) => {
            let mut spec: SynthSpec = match &a.spec {
                Some(p) => read_json(p)?,
                None => SynthSpec::desk_scale(0),
            };
            spec.seed = a.seed;
            let (table, kb, truth) = generate(&spec)?;
            write_csv(&table, "label", &a.out_table)?;
            write_edge_list(&kb, &a.out_kb)?;
            write_json(&truth, &a.out_truth)?;
            if let Some(out) = &a.out_scrambled_kb {
                let scrambled = x2graph::synth::scramble_kb(&kb, a.seed);
                write_edge_list(&scrambled, out)?;
            }
            println!(
                "generated {} samples x {} features, KB with {} edges, {} signal features",
                spec.n_samples,
                spec.n_features,
                kb.edges.len(),
                truth.len()
            );
        }
        Command::Train(a) => {
            let data = read_graph_dataset(&a.data)?;
            let labels: Vec<usize> = data.graphs.iter().map(|g| g.label as usize).collect();
            let folds = make_folds(&labels, a.folds, a.seed)?;
            let split = folds
                .into_iter()
                .nth(a.fold_id)
                .ok_or_else(|| X2gError::Config(format!("fold_id {} out of range", a.fold_id)))?;
            let arch = Arch::parse(&a.arch)?;
            let mut cfg = TrainConfig::genomic(a.seed);
            cfg.epochs = a.epochs;
            cfg.schedule_period = a.epochs;
            cfg.batch_size = a.batch_size;
            cfg.lr_max = a.lr;
            cfg.early_stop_patience = a.patience.min(a.epochs);
            let (model, history) = train_model(&data, &split, arch, &cfg)?;
            write_checkpoint(&model, &a.out)?;
            if let Some(spath) = &a.out_split {
                write_json(&split, spath)?;
            }
            if let Some(hpath) = &a.history {
                let mut lines = String::new();
                for rec in &history.epochs {
                    lines.push_str(&serde_json::to_string(rec).unwrap());
                    lines.push('\n');
                }
                std::fs::write(hpath, lines)
                    .map_err(|e| X2gError::io(hpath.display().to_string(), e))?;
            }
            println!(
                "best epoch {} val macro-F1 {:.4}; checkpoint: {}",
                history.best_epoch,
                history.best_val_macro_f1,
                a.out.display()
            );
        }
        Command::Search(a) => {
            let data = read_graph_dataset(&a.data)?;
            let labels: Vec<usize> = data.graphs.iter().map(|g| g.label as usize).collect();
            let folds = make_folds(&labels, a.folds, a.seed)?;
            let split = folds
                .into_iter()
                .nth(a.fold_id)
                .ok_or_else(|| X2gError::Config(format!("fold_id {} out of range", a.fold_id)))?;
            let mut cfg = TrainConfig::genomic(a.seed);
            cfg.epochs = a.epochs;
            cfg.schedule_period = a.epochs;
            let result = random_search(
                &data,
                &split,
                &SearchSpace::default(),
                a.budget,
                &cfg,
                a.seed,
            )?;
            write_json(&result, &a.out)?;
            println!(
                "best: {} lr={} val macro-F1 {:.4} over {} trials",
                result.best_arch,
                result.best_lr,
                result.best_val_macro_f1,
                result.trials.len()
            );
        }
        Command::Evaluate(a) => {
            let model = read_checkpoint(&a.model)?;
            let data = read_graph_dataset(&a.data)?;
            let indices = load_split(&a.split, data.graphs.len())?;
            let scores = model_outputs(&model, &data, &indices)?;
            let truth: Vec<usize> = indices
                .iter()
                .map(|&i| data.graphs[i].label as usize)
                .collect();
            let report = evaluate(&scores, &truth, data.class_names.len())?;
            write_json(&report, &a.out)?;
            if a.csv {
                println!("metric,value");
                println!("accuracy,{}", report.accuracy);
                println!("macro_auc,{}", report.macro_auc);
                println!("macro_f1,{}", report.macro_f1);
                println!("kappa,{}", report.kappa);
            } else {
                println!(
                    "accuracy {:.4} | macro AUC {:.4} | macro F1 {:.4} | kappa {:.4}",
                    report.accuracy, report.macro_auc, report.macro_f1, report.kappa
                );
            }
        }
        Command::Fuse(a) => {
            if a.models.len() != a.data.len() {
                return Err(X2gError::Config(format!(
                    "{} models but {} datasets",
                    a.models.len(),
                    a.data.len()
                )));
            }
            let split: FoldSplit = read_json(&a.split)?;
            let mut val_outputs = Vec::new();
            let mut test_outputs = Vec::new();
            let mut labels: Option<Vec<usize>> = None;
            for (mp, dp) in a.models.iter().zip(&a.data) {
                let model = read_checkpoint(mp)?;
                let data = read_graph_dataset(dp)?;
                let l: Vec<usize> = data.graphs.iter().map(|g| g.label as usize).collect();
                if let Some(prev) = &labels {
                    if *prev != l {
                        return Err(X2gError::Config(
                            "datasets disagree on sample labels/order".into(),
                        ));
                    }
                } else {
                    labels = Some(l);
                }
                val_outputs.push(model_outputs(&model, &data, &split.val)?);
                test_outputs.push(model_outputs(&model, &data, &split.test)?);
            }
            let labels = labels.unwrap();
            let val_truth: Vec<usize> = split.val.iter().map(|&i| labels[i]).collect();
            let mut cfg = TrainConfig::genomic(0);
            cfg.epochs = a.epochs;
            cfg.schedule_period = a.epochs;
            cfg.lr_max = a.lr;
            let fusion = train_fusion(&val_outputs, &val_truth, &cfg)?;
            let fused: Vec<Vec<f64>> = (0..split.test.len())
                .map(|s| {
                    let outs: Vec<Vec<f64>> = test_outputs.iter().map(|m| m[s].clone()).collect();
                    fusion.predict(&outs)
                })
                .collect();
            let test_truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
            let n_classes = fused[0].len();
            let report = evaluate(&fused, &test_truth, n_classes)?;
            write_json(&(&fusion, &report), &a.out)?;
            println!(
                "fused macro AUC {:.4} macro F1 {:.4} over {} models",
                report.macro_auc,
                report.macro_f1,
                a.models.len()
            );
        }
        Command::Explain(a) => {
            let model = read_checkpoint(&a.model)?;
            let data = read_graph_dataset(&a.data)?;
            let indices = load_split(&a.split, data.graphs.len())?;
            let opts = ExplainOpts {
                steps: a.steps,
                ..Default::default()
            };
            let report = feature_importance(&model, &data, &indices, a.top_frac, &opts)?;
            write_json(&report, &a.out)?;
            println!(
                "explained {} graphs; argmax agreement {:.3}, mean TV distance {:.4}",
                report.samples.len(),
                report.agreement_rate,
                report.mean_distance
            );
            for (name, count) in report.ranked.iter().take(10) {
                println!("  {name}: {count}");
            }
        }
        Command::Report { reports } => {
            if reports.is_empty() {
                return Err(X2gError::Config("no reports given".into()));
            }
            let loaded = reports
                .iter()
                .map(read_json)
                .collect::<Result<Vec<x2graph::eval::EvalReport>>>()?;
            let agg = aggregate_reports("folds", &loaded);
            println!("metric,mean,std");
            for (name, m) in [
                ("accuracy", agg.accuracy),
                ("macro_auc", agg.macro_auc),
                ("macro_f1", agg.macro_f1),
                ("kappa", agg.kappa),
            ] {
                println!("{name},{},{}", m.mean, m.std);
            }
        }
        Command::Run { manifest } => {
            let manifest = ExperimentManifest::from_file(&manifest)?;
            let agg = run_experiment(&manifest)?;
            for c in agg.components.iter().chain(agg.fusion.iter()) {
                println!(
                    "{}: accuracy {:.4}+/-{:.4} macro AUC {:.4}+/-{:.4} macro F1 {:.4}+/-{:.4} kappa {:.4}+/-{:.4}",
                    c.name,
                    c.accuracy.mean,
                    c.accuracy.std,
                    c.macro_auc.mean,
                    c.macro_auc.std,
                    c.macro_f1.mean,
                    c.macro_f1.std,
                    c.kappa.mean,
                    c.kappa.std
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("X2G_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
