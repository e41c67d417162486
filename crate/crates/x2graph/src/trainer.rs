//! Training harness: stratified k-fold splits, majority-matching
//! oversampling, node/edge subsampling augmentation, Adam with a cosine
//! learning-rate schedule, early stopping on validation macro-F1, random
//! hyperparameter search, and trainable late fusion of component model
//! outputs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convert::{GraphDataset, SampleGraph};
use crate::error::{Result, X2gError};
use crate::eval::{confusion_matrix, macro_f1};
use crate::gnn::{Arch, GraphModel};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    /// Cosine annealing period in epochs; defaults to `epochs`.
    pub schedule_period: usize,
    pub early_stop_patience: usize,
    pub aug_max_nodes: usize,
    pub aug_max_edges: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl TrainConfig {
    /// Genomic-scale defaults: lr 1e-3, batch 64, 200 epochs, caps 6400/3200.
    pub fn genomic(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            lr_max: 1e-3,
            lr_min: 1e-6,
            schedule_period: 200,
            early_stop_patience: 20,
            aug_max_nodes: 6400,
            aug_max_edges: 3200,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Small-table defaults: lr 1e-4, batch 16, 400 epochs, no subsampling.
    pub fn small_table(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 400,
            batch_size: 16,
            lr_max: 1e-4,
            lr_min: 1e-7,
            schedule_period: 400,
            early_stop_patience: 40,
            aug_max_nodes: usize::MAX,
            aug_max_edges: usize::MAX,
            seed,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.schedule_period == 0 {
            return Err(X2gError::Config(
                "epochs, batch_size and schedule_period must be positive".into(),
            ));
        }
        if self.early_stop_patience > self.epochs {
            return Err(X2gError::Config("patience exceeds epoch budget".into()));
        }
        if !(self.lr_max > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_max) {
            return Err(X2gError::Config("need 0 <= lr_min <= lr_max, lr_max > 0".into()));
        }
        Ok(())
    }
}

/// lr(t) on the cosine schedule: lr_max at t=0, lr_min at t=period.
pub fn cosine_lr(cfg: &TrainConfig, epoch: usize) -> f64 {
    let t = (epoch.min(cfg.schedule_period)) as f64 / cfg.schedule_period as f64;
    cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + (std::f64::consts::PI * t).cos())
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified k-fold splits: fold i's test = fold i, val = fold (i+1) mod k,
/// train = the rest. Deterministic per seed.
pub fn make_folds(labels: &[usize], k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(X2gError::Config(format!("need k >= 2 folds, got {k}")));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k {
            return Err(X2gError::Config(format!(
                "class {c} has {} members, fewer than k={k}",
                members.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for members in &by_class {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        for (i, idx) in shuffled.into_iter().enumerate() {
            folds[i % k].push(idx);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    let mut splits = Vec::with_capacity(k);
    for i in 0..k {
        let test = folds[i].clone();
        let val = folds[(i + 1) % k].clone();
        let mut train = Vec::new();
        for (j, f) in folds.iter().enumerate() {
            if j != i && j != (i + 1) % k {
                train.extend_from_slice(f);
            }
        }
        train.sort_unstable();
        splits.push(FoldSplit {
            fold_id: i,
            train,
            val,
            test,
        });
    }
    Ok(splits)
}

/// Expands `train_indices` so every class count equals the majority count.
/// Originals each appear exactly once; the deficit is sampled with
/// replacement from that class.
pub fn oversample(train_indices: &[usize], labels: &[usize], seed: u64) -> Vec<usize> {
    if train_indices.is_empty() {
        return Vec::new();
    }
    let n_classes = train_indices.iter().map(|&i| labels[i]).max().unwrap() + 1;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &i in train_indices {
        by_class[labels[i]].push(i);
    }
    let majority = by_class.iter().map(|c| c.len()).max().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = train_indices.to_vec();
    for members in &by_class {
        if members.is_empty() {
            continue;
        }
        for _ in members.len()..majority {
            out.push(members[rng.gen_range(0..members.len())]);
        }
    }
    out
}

/// Caps a graph to at most `max_nodes` nodes, then at most `max_edges`
/// edges, each by uniform random subsets; canonical node order preserved.
pub fn augment(
    g: &SampleGraph,
    max_nodes: usize,
    max_edges: usize,
    rng: &mut ChaCha8Rng,
) -> SampleGraph {
    let mut g = g.clone();
    if g.n_nodes() > max_nodes {
        let mut keep = rand::seq::index::sample(rng, g.n_nodes(), max_nodes).into_vec();
        keep.sort_unstable();
        let mut remap = vec![u32::MAX; g.n_nodes()];
        for (new_pos, &old_pos) in keep.iter().enumerate() {
            remap[old_pos] = new_pos as u32;
        }
        g.node_index = keep.iter().map(|&p| g.node_index[p]).collect();
        g.node_value = keep.iter().map(|&p| g.node_value[p]).collect();
        g.edges = g
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let (ra, rb) = (remap[a as usize], remap[b as usize]);
                (ra != u32::MAX && rb != u32::MAX).then_some((ra, rb))
            })
            .collect();
    }
    if g.n_edges() > max_edges {
        let mut keep = rand::seq::index::sample(rng, g.n_edges(), max_edges).into_vec();
        keep.sort_unstable();
        g.edges = keep.iter().map(|&e| g.edges[e]).collect();
    }
    g
}

/// Adam with bias correction; the learning rate is supplied per step.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, beta1: f64, beta2: f64, eps: f64) -> AdamState {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_macro_f1: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_macro_f1: f64,
}

fn val_metrics(model: &GraphModel, graphs: &GraphDataset, indices: &[usize]) -> Result<(f64, f64)> {
    let n_classes = graphs.class_names.len();
    let mut pred = Vec::with_capacity(indices.len());
    let mut truth = Vec::with_capacity(indices.len());
    for &i in indices {
        let g = &graphs.graphs[i];
        let trace = model.forward_traced(g, None)?;
        pred.push(trace.predicted_class());
        truth.push(g.label as usize);
    }
    let confusion = confusion_matrix(&pred, &truth, n_classes);
    let acc = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64
        / indices.len().max(1) as f64;
    Ok((macro_f1(&confusion), acc))
}

/// Trains one model on the split's train indices, early-stopping on
/// validation macro-F1; returns the parameters from the best epoch.
pub fn train_model(
    graphs: &GraphDataset,
    split: &FoldSplit,
    arch: Arch,
    cfg: &TrainConfig,
) -> Result<(GraphModel, TrainHistory)> {
    cfg.validate()?;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(X2gError::Config("split has empty train or val set".into()));
    }
    let labels: Vec<usize> = graphs.graphs.iter().map(|g| g.label as usize).collect();
    let n_classes = graphs.class_names.len();
    let mut model = GraphModel::new(arch, graphs.vocabulary.len().max(1), n_classes, cfg.seed)?;
    let mut adam = AdamState::new(model.n_params(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let expanded = oversample(&split.train, &labels, cfg.seed.wrapping_add(2));

    let mut history = TrainHistory::default();
    let mut best_params: Option<Vec<f64>> = None;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0usize;

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg, epoch);
        let mut order = expanded.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; model.n_params()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let g = augment(
                    &graphs.graphs[i],
                    cfg.aug_max_nodes,
                    cfg.aug_max_edges,
                    &mut rng,
                );
                let (loss, g_grads) = model.loss_and_grad(&g)?;
                batch_loss += loss;
                for (acc, gv) in grads.iter_mut().zip(&g_grads) {
                    *acc += gv;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for gv in &mut grads {
                *gv *= scale;
            }
            batch_loss *= scale;
            if !batch_loss.is_finite() {
                return Err(X2gError::Divergence(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            adam.step(&mut model.params, &grads, lr);
            epoch_loss += batch_loss;
            n_batches += 1;
        }
        epoch_loss /= n_batches.max(1) as f64;

        let (val_f1, val_acc) = val_metrics(&model, graphs, &split.val)?;
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_loss: epoch_loss,
            val_macro_f1: val_f1,
            val_accuracy: val_acc,
        });
        if val_f1 > best_f1 {
            best_f1 = val_f1;
            best_epoch = epoch;
            best_params = Some(model.params.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.early_stop_patience {
                break;
            }
        }
    }
    if let Some(p) = best_params {
        model.params = p;
    }
    history.best_epoch = best_epoch;
    history.best_val_macro_f1 = best_f1;
    Ok((model, history))
}

/// Hyperparameter ranges for random search; each field is a uniform choice.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchSpace {
    pub d_choices: Vec<usize>,
    pub layer_choices: Vec<usize>,
    pub kinds: Vec<crate::gnn::LayerKind>,
    pub activations: Vec<crate::gnn::Activation>,
    pub norms: Vec<crate::gnn::Norm>,
    pub lr_choices: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        use crate::gnn::{Activation, LayerKind, Norm};
        SearchSpace {
            d_choices: vec![32, 64, 128, 256, 512, 1024],
            layer_choices: vec![1, 2, 3, 4],
            kinds: vec![LayerKind::Gcn, LayerKind::MeanAgg],
            activations: vec![Activation::Relu, Activation::Gelu],
            norms: vec![Norm::None, Norm::Layer],
            lr_choices: vec![1e-4, 3e-4, 1e-3, 3e-3],
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub arch: String,
    pub lr: f64,
    pub val_macro_f1: f64,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SearchResult {
    pub best_arch: String,
    pub best_lr: f64,
    pub best_val_macro_f1: f64,
    pub trials: Vec<TrialRecord>,
}

fn choose<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.gen_range(0..items.len())]
}

/// Samples `budget` configurations uniformly from the space, trains each on
/// the split, and returns the argmax of validation macro-F1 with the full
/// trial log.
pub fn random_search(
    graphs: &GraphDataset,
    split: &FoldSplit,
    space: &SearchSpace,
    budget: usize,
    base_cfg: &TrainConfig,
    seed: u64,
) -> Result<SearchResult> {
    if budget == 0 {
        return Err(X2gError::Config("search budget must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(budget);
    let mut best: Option<(String, f64, f64)> = None;
    for trial in 0..budget {
        let arch = Arch {
            layer_kind: *choose(&mut rng, &space.kinds),
            n_layers: *choose(&mut rng, &space.layer_choices),
            d: *choose(&mut rng, &space.d_choices),
            activation: *choose(&mut rng, &space.activations),
            norm: *choose(&mut rng, &space.norms),
            id_indexing: true,
            value_bias: true,
        };
        let lr = *choose(&mut rng, &space.lr_choices);
        let mut cfg = base_cfg.clone();
        cfg.lr_max = lr;
        let (_, history) = train_model(graphs, split, arch, &cfg)?;
        let record = TrialRecord {
            trial,
            arch: arch.descriptor(),
            lr,
            val_macro_f1: history.best_val_macro_f1,
            best_epoch: history.best_epoch,
        };
        if best
            .as_ref()
            .map_or(true, |(_, _, f1)| record.val_macro_f1 > *f1)
        {
            best = Some((record.arch.clone(), lr, record.val_macro_f1));
        }
        trials.push(record);
    }
    let (best_arch, best_lr, best_val_macro_f1) = best.unwrap();
    Ok(SearchResult {
        best_arch,
        best_lr,
        best_val_macro_f1,
        trials,
    })
}

/// Trains the MLP baseline on raw rows with the same oversampling, Adam,
/// cosine schedule, and macro-F1 early stopping as the graph models.
/// `hidden` lists the hidden widths only.
pub fn train_mlp(
    rows: &[Vec<f64>],
    labels: &[usize],
    split: &FoldSplit,
    hidden: &[usize],
    activation: crate::gnn::Activation,
    cfg: &TrainConfig,
) -> Result<crate::gnn::MlpBaseline> {
    cfg.validate()?;
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut widths = vec![rows[0].len()];
    widths.extend_from_slice(hidden);
    widths.push(n_classes);
    let mut model = crate::gnn::MlpBaseline::new(widths, activation, cfg.seed)?;
    let mut adam = AdamState::new(model.params.len(), cfg.beta1, cfg.beta2, cfg.eps);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let expanded = oversample(&split.train, labels, cfg.seed.wrapping_add(2));
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0usize;
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg, epoch);
        let mut order = expanded.clone();
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = vec![0.0; model.params.len()];
            let mut batch_loss = 0.0;
            for &i in batch {
                let (loss, g) = model.loss_and_grad(&rows[i], labels[i])?;
                batch_loss += loss;
                for (acc, gv) in grads.iter_mut().zip(&g) {
                    *acc += gv;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            for gv in &mut grads {
                *gv *= scale;
            }
            if !(batch_loss * scale).is_finite() {
                return Err(X2gError::Divergence(format!(
                    "non-finite MLP loss at epoch {epoch}"
                )));
            }
            adam.step(&mut model.params, &grads, lr);
        }
        let mut pred = Vec::with_capacity(split.val.len());
        let mut truth = Vec::with_capacity(split.val.len());
        for &i in &split.val {
            let (_, probs) = model.forward(&rows[i])?;
            pred.push(
                probs
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0,
            );
            truth.push(labels[i]);
        }
        let f1 = macro_f1(&confusion_matrix(&pred, &truth, n_classes));
        if best.as_ref().map_or(true, |(b, _)| f1 > *b) {
            best = Some((f1, model.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > cfg.early_stop_patience {
                break;
            }
        }
    }
    if let Some((_, p)) = best {
        model.params = p;
    }
    Ok(model)
}

/// Trainable late fusion: one weight per (model, class), fused logit
/// o_bar_j = sum_i w_ij * o_j^(i), classified through softmax.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionMatrix {
    pub n_models: usize,
    pub n_classes: usize,
    /// Row-major (model, class) weights.
    pub weights: Vec<f64>,
}

impl FusionMatrix {
    pub fn uniform(n_models: usize, n_classes: usize) -> FusionMatrix {
        FusionMatrix {
            n_models,
            n_classes,
            weights: vec![1.0 / n_models as f64; n_models * n_classes],
        }
    }

    /// Eq.-3 weighted sum; `outputs[i]` is model i's class vector.
    pub fn fuse(&self, outputs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        for (i, o) in outputs.iter().enumerate() {
            for j in 0..self.n_classes {
                out[j] += self.weights[i * self.n_classes + j] * o[j];
            }
        }
        out
    }

    /// Fused class probabilities (softmax over the weighted sum).
    pub fn predict(&self, outputs: &[Vec<f64>]) -> Vec<f64> {
        crate::gnn::softmax(&self.fuse(outputs))
    }
}

/// Learns the fusion matrix by Adam on cross-entropy over the provided
/// (typically validation-split) component outputs.
/// `component_outputs[i][s]` is model i's probability vector for sample s.
pub fn train_fusion(
    component_outputs: &[Vec<Vec<f64>>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<FusionMatrix> {
    let n_models = component_outputs.len();
    if n_models < 2 {
        return Err(X2gError::Config("fusion needs at least 2 models".into()));
    }
    let n_samples = labels.len();
    let n_classes = component_outputs[0]
        .first()
        .map(|o| o.len())
        .ok_or_else(|| X2gError::Config("fusion needs at least one sample".into()))?;
    for (i, outs) in component_outputs.iter().enumerate() {
        if outs.len() != n_samples {
            return Err(X2gError::Config(format!(
                "model {i} has {} outputs, expected {n_samples}",
                outs.len()
            )));
        }
        if outs.iter().any(|o| o.len() != n_classes) {
            return Err(X2gError::Config(format!(
                "model {i} output width differs from {n_classes}"
            )));
        }
    }
    let mut fusion = FusionMatrix::uniform(n_models, n_classes);
    let mut adam = AdamState::new(fusion.weights.len(), cfg.beta1, cfg.beta2, cfg.eps);
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg, epoch);
        let mut grads = vec![0.0; fusion.weights.len()];
        let mut loss = 0.0;
        for s in 0..n_samples {
            let outputs: Vec<Vec<f64>> = component_outputs.iter().map(|m| m[s].clone()).collect();
            let fused = fusion.fuse(&outputs);
            let probs = crate::gnn::softmax(&fused);
            loss += crate::gnn::cross_entropy(&fused, labels[s]);
            for j in 0..n_classes {
                let d = probs[j] - if j == labels[s] { 1.0 } else { 0.0 };
                for i in 0..n_models {
                    grads[i * n_classes + j] += d * outputs[i][j];
                }
            }
        }
        let scale = 1.0 / n_samples as f64;
        for g in &mut grads {
            *g *= scale;
        }
        loss *= scale;
        if !loss.is_finite() {
            return Err(X2gError::Divergence("fusion loss non-finite".into()));
        }
        adam.step(&mut fusion.weights, &grads, lr);
    }
    Ok(fusion)
}
