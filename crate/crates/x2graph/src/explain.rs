//! Soft edge-mask explainer: learns a sigmoid gate per edge so the gated
//! graph reproduces the model's full-graph prediction, regularized toward
//! sparse, near-binary masks. Selected edges are mapped back to feature
//! names through the node indices and aggregated into an importance
//! ranking.

use rayon::prelude::*;

use crate::convert::{GraphDataset, SampleGraph};
use crate::error::Result;
use crate::gnn::GraphModel;

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ExplainOpts {
    pub steps: usize,
    pub lambda_sparse: f64,
    pub lambda_entropy: f64,
    pub lr: f64,
}

impl Default for ExplainOpts {
    fn default() -> Self {
        ExplainOpts {
            steps: 400,
            lambda_sparse: 0.005,
            lambda_entropy: 0.1,
            lr: 0.05,
        }
    }
}

/// Per-edge mask logits for one explained graph.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EdgeMask {
    pub logits: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl EdgeMask {
    /// Sigmoid mask values in (0, 1).
    pub fn values(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }
}

/// Optimizes an edge mask by gradient descent on
/// CE(masked prediction, full-graph argmax)
///   + lambda_sparse * mean(mask) + lambda_entropy * mean(binary entropy).
/// Model parameters are never modified.
pub fn explain_graph(model: &GraphModel, g: &SampleGraph, opts: &ExplainOpts) -> Result<EdgeMask> {
    let n_edges = g.n_edges();
    if n_edges == 0 {
        return Ok(EdgeMask { logits: Vec::new() });
    }
    let target = model.forward_traced(g, None)?.predicted_class();
    let mut logits = vec![0.0f64; n_edges];
    for _ in 0..opts.steps {
        let weights: Vec<f64> = logits.iter().map(|&l| sigmoid(l)).collect();
        let trace = model.forward_traced(g, Some(&weights))?;
        let (_, edge_grads) = model.backward(g, &trace, target, Some(&weights), true);
        let edge_grads = edge_grads.expect("edge grads requested");
        let inv_m = 1.0 / n_edges as f64;
        for e in 0..n_edges {
            let w = weights[e];
            let dsig = w * (1.0 - w);
            // d/dlogit of binary entropy H(sigmoid(l)) = -l * sigmoid'(l)
            let grad = edge_grads[e] * dsig
                + opts.lambda_sparse * dsig * inv_m
                + opts.lambda_entropy * (-logits[e]) * dsig * inv_m;
            logits[e] -= opts.lr * grad;
        }
    }
    Ok(EdgeMask { logits })
}

/// Indices of the ceil(fraction * |E|) highest-mask edges, ties broken by
/// lower edge index; returned in ascending index order.
pub fn top_edges(mask: &EdgeMask, fraction: f64) -> Vec<usize> {
    let m = mask.logits.len();
    if m == 0 {
        return Vec::new();
    }
    let k = ((fraction * m as f64).ceil() as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        mask.logits[b]
            .partial_cmp(&mask.logits[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    keep
}

/// The graph restricted to the given edge indices (all nodes retained).
pub fn edge_subgraph(g: &SampleGraph, keep: &[usize]) -> SampleGraph {
    let mut sub = g.clone();
    sub.edges = keep.iter().map(|&e| g.edges[e]).collect();
    sub
}

/// Does the top-fraction mask predict the same class as the full graph,
/// and how far apart are the probability vectors (total-variation
/// distance)? The mask is binarized and applied as 0/1 edge weights so
/// dropped edges carry no message while degree normalization is
/// unchanged — the hard limit of the soft mask the explainer optimizes.
pub fn fidelity(
    model: &GraphModel,
    g: &SampleGraph,
    mask: &EdgeMask,
    fraction: f64,
) -> Result<(bool, f64)> {
    let full = model.forward_traced(g, None)?;
    let mut weights = vec![0.0; g.edges.len()];
    for e in top_edges(mask, fraction) {
        weights[e] = 1.0;
    }
    let masked = model.forward_traced(g, Some(&weights))?;
    let agreement = full.predicted_class() == masked.predicted_class();
    let distance = 0.5
        * full
            .probs
            .iter()
            .zip(&masked.probs)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    Ok((agreement, distance))
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SampleSummary {
    pub graph_index: usize,
    pub predicted_class: usize,
    pub selected_edges: Vec<usize>,
    pub selected_features: Vec<String>,
    /// Per selected feature, the largest mask value among its selected
    /// incident edges; keeps one strong edge from being outvoted by many
    /// weak ones at a hub node.
    pub feature_weights: Vec<f64>,
    pub argmax_agreement: bool,
    pub probability_distance: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ImportanceReport {
    /// (feature name, summed mask weight), sorted descending.
    pub ranked: Vec<(String, f64)>,
    pub samples: Vec<SampleSummary>,
    pub agreement_rate: f64,
    pub mean_distance: f64,
}

/// Explains each listed graph, selects the nodes incident to its top-mask
/// edges, and accrues each selected feature's best incident mask value
/// across graphs.
pub fn feature_importance(
    model: &GraphModel,
    data: &GraphDataset,
    indices: &[usize],
    fraction: f64,
    opts: &ExplainOpts,
) -> Result<ImportanceReport> {
    let samples: Vec<SampleSummary> = indices
        .par_iter()
        .map(|&i| -> Result<SampleSummary> {
            let g = &data.graphs[i];
            let mask = explain_graph(model, g, opts)?;
            let keep = top_edges(&mask, fraction);
            let (agreement, distance) = fidelity(model, g, &mask, fraction)?;
            let values = mask.values();
            let mut node_best: std::collections::BTreeMap<usize, f64> =
                std::collections::BTreeMap::new();
            for &e in &keep {
                let (a, b) = g.edges[e];
                for pos in [a as usize, b as usize] {
                    let w = node_best.entry(pos).or_insert(0.0);
                    *w = w.max(values[e]);
                }
            }
            let mut selected_features = Vec::with_capacity(node_best.len());
            let mut feature_weights = Vec::with_capacity(node_best.len());
            for (pos, w) in node_best {
                selected_features
                    .push(data.vocabulary.names[g.node_index[pos] as usize].clone());
                feature_weights.push(w);
            }
            Ok(SampleSummary {
                graph_index: i,
                predicted_class: model.forward_traced(g, None)?.predicted_class(),
                selected_edges: keep,
                selected_features,
                feature_weights,
                argmax_agreement: agreement,
                probability_distance: distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts: std::collections::BTreeMap<String, f64> = std::collections::BTreeMap::new();
    for s in &samples {
        for (f, w) in s.selected_features.iter().zip(&s.feature_weights) {
            *counts.entry(f.clone()).or_default() += w;
        }
    }
    let mut ranked: Vec<(String, f64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let n = samples.len().max(1) as f64;
    let agreement_rate = samples.iter().filter(|s| s.argmax_agreement).count() as f64 / n;
    let mean_distance = samples.iter().map(|s| s.probability_distance).sum::<f64>() / n;
    Ok(ImportanceReport {
        ranked,
        samples,
        agreement_rate,
        mean_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::ConversionConfig;
    use crate::gnn::{Activation, Arch, LayerKind, Norm};
    use crate::kb::FeatureVocabulary;

    fn arch() -> Arch {
        Arch {
            layer_kind: LayerKind::Gcn,
            n_layers: 1,
            d: 8,
            activation: Activation::Relu,
            norm: Norm::None,
            id_indexing: true,
            value_bias: true,
        }
    }

    fn triangle(values: [f64; 3]) -> SampleGraph {
        SampleGraph {
            node_index: vec![0, 1, 2],
            node_value: values.to_vec(),
            edges: vec![(0, 1), (0, 2), (1, 2)],
            label: 0,
            vocab_size: 3,
        }
    }

    #[test]
    fn zero_steps_is_initialization() {
        let model = GraphModel::new(arch(), 3, 2, 1).unwrap();
        let g = triangle([1.0, -0.5, 2.0]);
        let opts = ExplainOpts {
            steps: 0,
            lambda_sparse: 0.0,
            lambda_entropy: 0.0,
            lr: 0.01,
        };
        let mask = explain_graph(&model, &g, &opts).unwrap();
        assert_eq!(mask.logits, vec![0.0; 3]);
        assert!(mask.values().iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn zero_edge_graph_empty_mask() {
        let model = GraphModel::new(arch(), 3, 2, 1).unwrap();
        let g = SampleGraph {
            node_index: vec![0],
            node_value: vec![1.0],
            edges: vec![],
            label: 0,
            vocab_size: 3,
        };
        let mask = explain_graph(&model, &g, &ExplainOpts::default()).unwrap();
        assert!(mask.logits.is_empty());
        let (agree, dist) = fidelity(&model, &g, &mask, 0.5).unwrap();
        assert!(agree);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn edge_invariant_prediction_drives_mask_down() {
        // zero node values make every message zero, so CE is flat in the
        // mask and the sparsity term dominates
        let model = GraphModel::new(arch(), 3, 2, 7).unwrap();
        let g = triangle([0.0, 0.0, 0.0]);
        let opts = ExplainOpts {
            steps: 400,
            lambda_sparse: 0.05,
            lambda_entropy: 0.0,
            lr: 0.1,
        };
        let mask = explain_graph(&model, &g, &opts).unwrap();
        let vals = mask.values();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(mean < 0.5, "mask mean {mean}");
    }

    #[test]
    fn model_params_untouched() {
        let model = GraphModel::new(arch(), 3, 2, 3).unwrap();
        let before = model.params.clone();
        let g = triangle([1.0, 2.0, 3.0]);
        explain_graph(&model, &g, &ExplainOpts::default()).unwrap();
        assert_eq!(model.params, before);
    }

    #[test]
    fn top_edges_hand_case() {
        // sigmoid is monotone, so logits order == value order
        let mask = EdgeMask {
            logits: vec![2.0, -1.5, 0.8],
        };
        assert_eq!(top_edges(&mask, 2.0 / 3.0), vec![0, 2]);
        assert_eq!(top_edges(&mask, 1.0), vec![0, 1, 2]);
        assert_eq!(top_edges(&mask, 1e-9), vec![0]);
        // exact ties resolved toward the lower index
        let tied = EdgeMask {
            logits: vec![1.0, 1.0, 1.0],
        };
        assert_eq!(top_edges(&tied, 1.0 / 3.0), vec![0]);
    }

    #[test]
    fn fidelity_full_fraction_exact_zero() {
        let model = GraphModel::new(arch(), 3, 2, 5).unwrap();
        let g = triangle([0.3, -1.2, 0.9]);
        let mask = EdgeMask {
            logits: vec![0.4, -0.3, 1.1],
        };
        let (agree, dist) = fidelity(&model, &g, &mask, 1.0).unwrap();
        assert!(agree);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn importance_single_graph_single_edge() {
        let model = GraphModel::new(arch(), 3, 2, 5).unwrap();
        let g = SampleGraph {
            node_index: vec![0, 2],
            node_value: vec![1.0, -1.0],
            edges: vec![(0, 1)],
            label: 0,
            vocab_size: 3,
        };
        let data = GraphDataset {
            vocabulary: FeatureVocabulary::from_names(vec![
                "a".into(),
                "b".into(),
                "c".into(),
            ]),
            graphs: vec![g],
            class_names: vec!["x".into(), "y".into()],
            config: ConversionConfig::default(),
            kb_name: "t".into(),
        };
        let opts = ExplainOpts {
            steps: 0,
            ..Default::default()
        };
        // untrained mask: every logit 0, value exactly 0.5
        let report = feature_importance(&model, &data, &[0], 1.0, &opts).unwrap();
        assert_eq!(
            report.ranked,
            vec![("a".to_string(), 0.5), ("c".to_string(), 0.5)]
        );
    }

    #[test]
    fn importance_sums_across_samples() {
        let model = GraphModel::new(arch(), 4, 2, 5).unwrap();
        let mk = |idx: [u32; 2]| SampleGraph {
            node_index: idx.to_vec(),
            node_value: vec![1.0, 2.0],
            edges: vec![(0, 1)],
            label: 0,
            vocab_size: 4,
        };
        let data = GraphDataset {
            vocabulary: FeatureVocabulary::from_names(vec![
                "a".into(),
                "b".into(),
                "c".into(),
                "d".into(),
            ]),
            graphs: vec![mk([0, 1]), mk([2, 3]), mk([0, 1])],
            class_names: vec!["x".into(), "y".into()],
            config: ConversionConfig::default(),
            kb_name: "t".into(),
        };
        let opts = ExplainOpts {
            steps: 0,
            ..Default::default()
        };
        let report = feature_importance(&model, &data, &[0, 1, 2], 1.0, &opts).unwrap();
        assert_eq!(report.ranked[0], ("a".to_string(), 1.0));
        assert_eq!(report.ranked[1], ("b".to_string(), 1.0));
        assert_eq!(
            report.ranked[2..],
            [("c".to_string(), 0.5), ("d".to_string(), 0.5)]
        );
        // order invariance across graphs
        let rev = feature_importance(&model, &data, &[2, 1, 0], 1.0, &opts).unwrap();
        assert_eq!(rev.ranked, report.ranked);
    }
}
