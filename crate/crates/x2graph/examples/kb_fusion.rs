//! Late fusion across three knowledge-base variants: the true KB, the
//! true KB diluted with random noise edges, and a degree-preserving
//! scramble. One model is trained per KB; a per-model per-class weight
//! matrix is then fit on validation outputs and evaluated on the test
//! split. Fusion should track (or beat) the best single component.
//!
//! Usage: `cargo run --release --example kb_fusion [seed]`

use x2graph::convert::{convert_table, ConversionConfig};
use x2graph::error::Result;
use x2graph::eval::evaluate;
use x2graph::experiment::model_outputs;
use x2graph::gnn::{Activation, Arch, LayerKind, Norm};
use x2graph::synth::{add_noise_edges, generate, scramble_kb, SynthSpec};
use x2graph::trainer::{make_folds, train_fusion, train_model, TrainConfig};

fn main() -> Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(3, |s| s.parse().unwrap());
    let spec = SynthSpec::desk_scale(seed);
    let (table, kb, _) = generate(&spec)?;
    let noisy = add_noise_edges(&kb, kb.edges.len(), seed ^ 0x5eed);
    let scrambled = scramble_kb(&kb, seed);

    let folds = make_folds(&table.labels, 5, seed)?;
    let split = &folds[0];
    let arch = Arch {
        layer_kind: LayerKind::Gcn,
        n_layers: 1,
        d: 16,
        activation: Activation::Relu,
        norm: Norm::None,
        id_indexing: true,
        value_bias: true,
    };
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 32,
        lr_max: 2e-2,
        lr_min: 1e-5,
        schedule_period: 300,
        early_stop_patience: 60,
        aug_max_nodes: usize::MAX,
        aug_max_edges: usize::MAX,
        seed,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    let conv = ConversionConfig { node_pruning: false, id_indexing: true };
    let test_labels: Vec<usize> = split.test.iter().map(|&i| table.labels[i]).collect();
    let val_labels: Vec<usize> = split.val.iter().map(|&i| table.labels[i]).collect();

    let mut val_outs = Vec::new();
    let mut test_outs = Vec::new();
    for kb in [&kb, &noisy, &scrambled] {
        let gd = convert_table(&table, kb, &conv)?;
        let (model, _) = train_model(&gd, split, arch, &cfg)?;
        let test = model_outputs(&model, &gd, &split.test)?;
        let auc = evaluate(&test, &test_labels, table.n_classes())?.macro_auc;
        println!("{}: test macro AUC {auc:.4}", kb.name);
        val_outs.push(model_outputs(&model, &gd, &split.val)?);
        test_outs.push(test);
    }

    let w = train_fusion(&val_outs, &val_labels, &cfg)?;
    println!("fusion weights (rows = models, columns = classes):");
    for i in 0..w.n_models {
        let row: Vec<String> = (0..w.n_classes)
            .map(|j| format!("{:+.3}", w.weights[i * w.n_classes + j]))
            .collect();
        println!("  [{}]", row.join(", "));
    }

    let fused: Vec<Vec<f64>> = (0..split.test.len())
        .map(|r| {
            let per: Vec<Vec<f64>> = test_outs.iter().map(|o| o[r].clone()).collect();
            w.predict(&per)
        })
        .collect();
    let auc = evaluate(&fused, &test_labels, table.n_classes())?.macro_auc;
    println!("fused: test macro AUC {auc:.4}");
    Ok(())
}
