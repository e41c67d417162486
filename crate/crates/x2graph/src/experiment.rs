//! Experiment orchestration: a JSON manifest drives convert -> stratified
//! folds -> per-fold training and evaluation -> optional multi-KB fusion,
//! with per-fold artifacts on disk so interrupted runs resume where they
//! stopped.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::convert::{convert_table, ConversionConfig, GraphDataset};
use crate::error::{Result, X2gError};
use crate::eval::{evaluate, EvalReport};
use crate::gnn::{read_checkpoint, write_checkpoint, Arch, GraphModel};
use crate::kb::load_edge_list;
use crate::tabular::{load_csv, one_hot_encode, z_score, CsvSchema, TabularDataset};
use crate::trainer::{make_folds, train_fusion, train_model, FoldSplit, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub table: PathBuf,
    pub label_column: String,
    /// Optional `name=kind` schema file for non-numeric columns.
    pub schema: Option<PathBuf>,
    /// One edge-list path per KB; more than one enables fusion.
    pub kbs: Vec<PathBuf>,
    #[serde(default)]
    pub conversion: ConversionConfig,
    /// Architecture descriptor, e.g. "gcn:2:64:relu:ln".
    pub arch: String,
    pub train: TrainConfig,
    pub folds: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Z-score numeric columns (fit on all rows) before conversion.
    #[serde(default = "default_true")]
    pub z_score_columns: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentManifest {
    pub fn from_file(path: &Path) -> Result<ExperimentManifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| X2gError::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| X2gError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(X2gError::Config("need at least 2 folds".into()));
        }
        if self.kbs.is_empty() {
            return Err(X2gError::Config("need at least one KB".into()));
        }
        for p in std::iter::once(&self.table)
            .chain(self.schema.iter())
            .chain(self.kbs.iter())
        {
            if !p.exists() {
                return Err(X2gError::Config(format!("missing input: {}", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn summarize(values: &[f64]) -> MetricSummary {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MetricSummary {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentAggregate {
    pub name: String,
    pub accuracy: MetricSummary,
    pub macro_auc: MetricSummary,
    pub macro_f1: MetricSummary,
    pub kappa: MetricSummary,
}

/// Mean +/- std rows over a set of per-fold reports.
pub fn aggregate_reports(name: &str, reports: &[EvalReport]) -> ComponentAggregate {
    let pick = |f: fn(&EvalReport) -> f64| -> MetricSummary {
        summarize(&reports.iter().map(f).collect::<Vec<_>>())
    };
    ComponentAggregate {
        name: name.to_string(),
        accuracy: pick(|r| r.accuracy),
        macro_auc: pick(|r| r.macro_auc),
        macro_f1: pick(|r| r.macro_f1),
        kappa: pick(|r| r.kappa),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub components: Vec<ComponentAggregate>,
    pub fusion: Option<ComponentAggregate>,
}

fn kb_label(path: &Path, i: usize) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("kb{i}"))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| X2gError::Format(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, text).map_err(|e| X2gError::io(path.display().to_string(), e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| X2gError::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| X2gError::Format(format!("{}: {e}", path.display())))
}

/// Class-probability outputs of a model on the listed graphs.
pub fn model_outputs(
    model: &GraphModel,
    data: &GraphDataset,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    indices
        .iter()
        .map(|&i| Ok(model.forward_traced(&data.graphs[i], None)?.probs))
        .collect()
}

fn load_table(manifest: &ExperimentManifest) -> Result<TabularDataset> {
    let schema = match &manifest.schema {
        Some(p) => CsvSchema::from_file(p)?,
        None => CsvSchema::default(),
    };
    let mut table = load_csv(&manifest.table, &manifest.label_column, &schema)?;
    if !table.is_fully_numeric() {
        table = one_hot_encode(&table);
    }
    if manifest.z_score_columns {
        let all: Vec<usize> = (0..table.n_rows()).collect();
        table = z_score(&table, &all)?.0;
    }
    Ok(table)
}

/// Runs the full manifest. Per-fold, per-KB artifacts
/// (`fold{k}/{kb}.ckpt`, `fold{k}/{kb}.report.json`) are reused when they
/// already exist, so a rerun resumes after the last completed unit.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<AggregateReport> {
    manifest.validate()?;
    let arch = Arch::parse(&manifest.arch)?;
    let table = load_table(manifest)?;
    let n_classes = table.n_classes();

    let mut datasets = Vec::new();
    for (i, kb_path) in manifest.kbs.iter().enumerate() {
        let kb = load_edge_list(kb_path, &kb_label(kb_path, i))?;
        datasets.push(convert_table(&table, &kb, &manifest.conversion)?);
    }
    let labels: Vec<usize> = table.labels.clone();
    let folds = make_folds(&labels, manifest.folds, manifest.seed)?;
    std::fs::create_dir_all(&manifest.out_dir)
        .map_err(|e| X2gError::io(manifest.out_dir.display().to_string(), e))?;

    let mut per_kb_reports: Vec<Vec<EvalReport>> = vec![Vec::new(); datasets.len()];
    let mut fusion_reports: Vec<EvalReport> = Vec::new();
    let fuse = datasets.len() > 1;

    for split in &folds {
        let fold_dir = manifest.out_dir.join(format!("fold{}", split.fold_id));
        std::fs::create_dir_all(&fold_dir)
            .map_err(|e| X2gError::io(fold_dir.display().to_string(), e))?;
        let truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
        let mut component_models: Vec<GraphModel> = Vec::new();

        for (k, data) in datasets.iter().enumerate() {
            let name = kb_label(&manifest.kbs[k], k);
            let ckpt = fold_dir.join(format!("{name}.ckpt"));
            let report_path = fold_dir.join(format!("{name}.report.json"));
            let (model, report) = if ckpt.exists() && report_path.exists() {
                (read_checkpoint(&ckpt)?, read_json(&report_path)?)
            } else {
                let mut cfg = manifest.train.clone();
                cfg.seed = manifest
                    .train
                    .seed
                    .wrapping_add(split.fold_id as u64)
                    .wrapping_mul(31)
                    .wrapping_add(k as u64);
                let (model, history) = train_model(data, split, arch, &cfg)?;
                let scores = model_outputs(&model, data, &split.test)?;
                let report = evaluate(&scores, &truth, n_classes)?;
                write_checkpoint(&model, &ckpt)?;
                write_json(&report, &report_path)?;
                write_json(&history, &fold_dir.join(format!("{name}.history.json")))?;
                (model, report)
            };
            per_kb_reports[k].push(report);
            if fuse {
                component_models.push(model);
            }
        }

        if fuse {
            let report_path = fold_dir.join("fusion.report.json");
            let report = if report_path.exists() {
                read_json(&report_path)?
            } else {
                let val_truth: Vec<usize> = split.val.iter().map(|&i| labels[i]).collect();
                let val_outputs: Vec<Vec<Vec<f64>>> = component_models
                    .iter()
                    .zip(&datasets)
                    .map(|(m, d)| model_outputs(m, d, &split.val))
                    .collect::<Result<_>>()?;
                let fusion = train_fusion(&val_outputs, &val_truth, &manifest.train)?;
                let test_outputs: Vec<Vec<Vec<f64>>> = component_models
                    .iter()
                    .zip(&datasets)
                    .map(|(m, d)| model_outputs(m, d, &split.test))
                    .collect::<Result<_>>()?;
                let fused: Vec<Vec<f64>> = (0..split.test.len())
                    .map(|s| {
                        let outs: Vec<Vec<f64>> =
                            test_outputs.iter().map(|m| m[s].clone()).collect();
                        fusion.predict(&outs)
                    })
                    .collect();
                let report = evaluate(&fused, &truth, n_classes)?;
                write_json(&fusion, &fold_dir.join("fusion.weights.json"))?;
                write_json(&report, &report_path)?;
                report
            };
            fusion_reports.push(report);
        }
    }

    let components: Vec<ComponentAggregate> = per_kb_reports
        .iter()
        .enumerate()
        .map(|(k, reports)| aggregate_reports(&kb_label(&manifest.kbs[k], k), reports))
        .collect();
    let fusion = fuse.then(|| aggregate_reports("fusion", &fusion_reports));
    let aggregate = AggregateReport { components, fusion };
    write_json(&aggregate, &manifest.out_dir.join("aggregate.json"))?;
    Ok(aggregate)
}

/// Per-fold train/evaluate on an in-memory dataset; used by the synthetic
/// benchmarks. Returns one report per fold.
pub fn cross_validate(
    data: &GraphDataset,
    folds: &[FoldSplit],
    arch: Arch,
    cfg: &TrainConfig,
) -> Result<Vec<EvalReport>> {
    let labels: Vec<usize> = data.graphs.iter().map(|g| g.label as usize).collect();
    let n_classes = data.class_names.len();
    folds
        .iter()
        .map(|split| {
            let mut fold_cfg = cfg.clone();
            fold_cfg.seed = cfg.seed.wrapping_add(split.fold_id as u64).wrapping_mul(31);
            let (model, _) = train_model(data, split, arch, &fold_cfg)?;
            let scores = model_outputs(&model, data, &split.test)?;
            let truth: Vec<usize> = split.test.iter().map(|&i| labels[i]).collect();
            evaluate(&scores, &truth, n_classes)
        })
        .collect()
}
