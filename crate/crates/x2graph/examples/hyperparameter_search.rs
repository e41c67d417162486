//! Random hyperparameter search over architecture and learning rate on a
//! small synthetic task: samples configurations uniformly, trains each on
//! one fold, and reports the best by validation macro F1.
//!
//! Usage: `cargo run --release --example hyperparameter_search [budget]`

use x2graph::convert::{convert_table, ConversionConfig};
use x2graph::error::Result;
use x2graph::gnn::{Activation, LayerKind, Norm};
use x2graph::synth::{generate, SynthSpec};
use x2graph::trainer::{make_folds, random_search, SearchSpace, TrainConfig};

fn main() -> Result<()> {
    let budget: usize = std::env::args().nth(1).map_or(8, |s| s.parse().unwrap());
    let seed = 0u64;
    let mut spec = SynthSpec::desk_scale(seed);
    spec.n_samples = 200;
    let (table, kb, _) = generate(&spec)?;
    let gd = convert_table(
        &table,
        &kb,
        &ConversionConfig { node_pruning: false, id_indexing: true },
    )?;
    let folds = make_folds(&table.labels, 5, seed)?;

    // a small space keeps the example fast; SearchSpace::default() is wider
    let space = SearchSpace {
        d_choices: vec![8, 16, 32],
        layer_choices: vec![1, 2],
        kinds: vec![LayerKind::Gcn, LayerKind::MeanAgg],
        activations: vec![Activation::Relu, Activation::Gelu],
        norms: vec![Norm::None],
        lr_choices: vec![3e-3, 1e-2, 2e-2],
    };
    let base = TrainConfig {
        epochs: 80,
        batch_size: 32,
        lr_max: 1e-2,
        lr_min: 1e-5,
        schedule_period: 80,
        early_stop_patience: 20,
        aug_max_nodes: usize::MAX,
        aug_max_edges: usize::MAX,
        seed,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let result = random_search(&gd, &folds[0], &space, budget, &base, seed)?;
    for t in &result.trials {
        println!("{t:?}");
    }
    println!(
        "best: {} at lr {} (validation macro F1 {:.3})",
        result.best_arch, result.best_lr, result.best_val_macro_f1
    );
    Ok(())
}
