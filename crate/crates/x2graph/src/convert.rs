//! Row-to-graph conversion: each table row becomes a graph whose nodes are
//! the vocabulary features present in the row (optionally pruning exact
//! zeros) and whose edges come from the knowledge base restricted to the
//! vocabulary.

use rayon::prelude::*;

use crate::error::{Result, X2gError};
use crate::kb::{self, FeatureVocabulary, KnowledgeBase};
use crate::tabular::TabularDataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct ConversionConfig {
    /// Drop nodes whose cell value is exactly 0.0 (CNV-style pruning).
    pub node_pruning: bool,
    /// Feed the feature index into the model's embedding branch. Graphs
    /// always carry indices; this flag only gates the model side.
    pub id_indexing: bool,
}

/// One row as a graph. Nodes are stored in ascending feature-index order
/// (canonical form); edges index into the node list, stored once, u < v.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGraph {
    pub node_index: Vec<u32>,
    pub node_value: Vec<f64>,
    pub edges: Vec<(u32, u32)>,
    pub label: u32,
    pub vocab_size: u32,
}

impl SampleGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_index.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset {
    pub vocabulary: FeatureVocabulary,
    pub graphs: Vec<SampleGraph>,
    pub class_names: Vec<String>,
    pub config: ConversionConfig,
    pub kb_name: String,
}

pub fn is_node_eligible(value: f64, config: &ConversionConfig) -> bool {
    if config.node_pruning {
        value != 0.0
    } else {
        true
    }
}

/// Converts one row (values aligned to the vocabulary) into a graph.
/// `kb_edges` must be the KB restricted to vocabulary indices.
pub fn convert_row(
    row_values: &[f64],
    vocab: &FeatureVocabulary,
    kb_edges: &[(usize, usize)],
    config: &ConversionConfig,
    label: u32,
) -> Result<SampleGraph> {
    if row_values.len() < vocab.len() {
        return Err(X2gError::VocabMismatch(format!(
            "row has {} values, vocabulary needs {}",
            row_values.len(),
            vocab.len()
        )));
    }
    let mut node_index = Vec::new();
    let mut node_value = Vec::new();
    // node position of each surviving vocabulary index, usize::MAX = dropped
    let mut position = vec![usize::MAX; vocab.len()];
    for (j, &v) in row_values.iter().take(vocab.len()).enumerate() {
        if is_node_eligible(v, config) {
            position[j] = node_index.len();
            node_index.push(j as u32);
            node_value.push(v);
        }
    }
    let mut edges = Vec::new();
    for &(u, v) in kb_edges {
        let (pu, pv) = (position[u], position[v]);
        if pu != usize::MAX && pv != usize::MAX {
            edges.push((pu as u32, pv as u32));
        }
    }
    edges.sort_unstable();
    edges.dedup();
    Ok(SampleGraph {
        node_index,
        node_value,
        edges,
        label,
        vocab_size: vocab.len() as u32,
    })
}

/// Converts every row of a dataset against a KB. The vocabulary is the
/// sorted intersection of column names and KB features; rows are processed
/// in parallel, output order preserved.
pub fn convert_table(
    ds: &TabularDataset,
    kb: &KnowledgeBase,
    config: &ConversionConfig,
) -> Result<GraphDataset> {
    if !ds.is_fully_numeric() {
        return Err(X2gError::Schema(
            "convert_table requires fully numeric data; run one_hot_encode first".into(),
        ));
    }
    let names = ds.column_names();
    let vocab = kb::intersect(&names, kb);
    if vocab.is_empty() {
        eprintln!(
            "warning: empty intersection between dataset columns and KB `{}`; all graphs will be empty",
            kb.name
        );
    }
    let kb_edges = kb::restrict_edges(kb, &vocab);
    // table column index of each vocabulary feature
    let col_of: Vec<usize> = vocab
        .names
        .iter()
        .map(|n| names.iter().position(|c| c == n).unwrap())
        .collect();

    let graphs: Result<Vec<SampleGraph>> = (0..ds.n_rows())
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = col_of.iter().map(|&c| ds.value(i, c)).collect();
            convert_row(&row, &vocab, &kb_edges, config, ds.labels[i] as u32)
        })
        .collect();

    Ok(GraphDataset {
        vocabulary: vocab,
        graphs: graphs?,
        class_names: ds.class_names.clone(),
        config: *config,
        kb_name: kb.name.clone(),
    })
}

/// Inverse of `convert_row` over the vocabulary: node values written back at
/// their feature index, absent features zero-filled (pruning drops only
/// exact zeros, so the round trip is exact either way).
pub fn reconstruct_row(g: &SampleGraph, vocab: &FeatureVocabulary) -> Result<Vec<f64>> {
    if g.vocab_size as usize != vocab.len() {
        return Err(X2gError::VocabMismatch(format!(
            "graph vocab_size {} != vocabulary length {}",
            g.vocab_size,
            vocab.len()
        )));
    }
    let mut row = vec![0.0; vocab.len()];
    for (&j, &v) in g.node_index.iter().zip(&g.node_value) {
        row[j as usize] = v;
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_edge_list;
    use crate::tabular::TabularDataset;

    fn shared_fixture() -> (FeatureVocabulary, Vec<(usize, usize)>) {
        let kb = parse_edge_list("g1\tg2\ng2\tg4\ng4\tg5\n", "fixture").unwrap();
        let vocab = kb::intersect(
            &["g1".to_string(), "g2".to_string(), "g3".to_string(), "g4".to_string()],
            &kb,
        );
        let edges = kb::restrict_edges(&kb, &vocab);
        (vocab, edges)
    }

    #[test]
    fn eligibility_rules() {
        let pruning = ConversionConfig {
            node_pruning: true,
            id_indexing: true,
        };
        let keep_all = ConversionConfig {
            node_pruning: false,
            id_indexing: true,
        };
        assert!(!is_node_eligible(0.0, &pruning));
        assert!(is_node_eligible(0.0, &keep_all));
        assert!(is_node_eligible(-0.7, &pruning));
    }

    #[test]
    fn convert_row_pruning_on() {
        let (vocab, edges) = shared_fixture();
        let cfg = ConversionConfig {
            node_pruning: true,
            id_indexing: true,
        };
        let g = convert_row(&[0.0, 1.2, 3.3], &vocab, &edges, &cfg, 0).unwrap();
        assert_eq!(g.node_index, vec![1, 2]);
        assert_eq!(g.node_value, vec![1.2, 3.3]);
        assert_eq!(g.edges, vec![(0, 1)]);
    }

    #[test]
    fn convert_row_pruning_off() {
        let (vocab, edges) = shared_fixture();
        let cfg = ConversionConfig {
            node_pruning: false,
            id_indexing: true,
        };
        let g = convert_row(&[0.0, 1.2, 3.3], &vocab, &edges, &cfg, 0).unwrap();
        assert_eq!(g.node_index, vec![0, 1, 2]);
        assert_eq!(g.node_value, vec![0.0, 1.2, 3.3]);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn convert_row_empty_vocab() {
        let vocab = FeatureVocabulary::from_names(vec![]);
        let cfg = ConversionConfig::default();
        let g = convert_row(&[], &vocab, &[], &cfg, 3).unwrap();
        assert_eq!(g.n_nodes(), 0);
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.label, 3);
    }

    fn fixture_table(names: &[&str], rows: Vec<Vec<f64>>) -> TabularDataset {
        let n = rows.len();
        TabularDataset::from_numeric(
            names.iter().map(|s| s.to_string()).collect(),
            rows,
            vec![0; n],
            vec!["x".into(), "y".into()],
        )
        .unwrap()
    }

    #[test]
    fn convert_table_matches_rowwise() {
        let kb = parse_edge_list("g1\tg2\ng2\tg4\ng4\tg5\n", "fixture").unwrap();
        let ds = fixture_table(
            &["g1", "g2", "g3", "g4"],
            vec![vec![0.0, 1.2, 9.0, 3.3], vec![1.0, 0.0, 9.0, 2.0]],
        );
        let cfg = ConversionConfig {
            node_pruning: true,
            id_indexing: true,
        };
        let gd = convert_table(&ds, &kb, &cfg).unwrap();
        assert_eq!(gd.graphs.len(), 2);
        let (vocab, edges) = shared_fixture();
        let g0 = convert_row(&[0.0, 1.2, 3.3], &vocab, &edges, &cfg, 0).unwrap();
        let g1 = convert_row(&[1.0, 0.0, 2.0], &vocab, &edges, &cfg, 0).unwrap();
        assert_eq!(gd.graphs[0], g0);
        assert_eq!(gd.graphs[1], g1);
    }

    #[test]
    fn convert_table_column_permutation_invariant() {
        let kb = parse_edge_list("g1\tg2\ng2\tg4\ng4\tg5\n", "fixture").unwrap();
        let cfg = ConversionConfig::default();
        let ds = fixture_table(
            &["g1", "g2", "g3", "g4"],
            vec![vec![0.5, 1.2, 9.0, 3.3]],
        );
        let permuted = fixture_table(
            &["g4", "g1", "g3", "g2"],
            vec![vec![3.3, 0.5, 9.0, 1.2]],
        );
        let a = convert_table(&ds, &kb, &cfg).unwrap();
        let b = convert_table(&permuted, &kb, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn convert_table_empty() {
        let kb = parse_edge_list("g1\tg2\n", "t").unwrap();
        let ds = TabularDataset::from_numeric(
            vec!["g1".into(), "g2".into()],
            vec![],
            vec![],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let gd = convert_table(&ds, &kb, &ConversionConfig::default()).unwrap();
        assert!(gd.graphs.is_empty());
    }

    #[test]
    fn same_edge_structure_without_pruning() {
        let kb = parse_edge_list("g1\tg2\ng2\tg4\ng4\tg5\n", "fixture").unwrap();
        let ds = fixture_table(
            &["g1", "g2", "g4"],
            vec![vec![0.0, 1.0, 2.0], vec![5.0, 0.0, 0.0], vec![1.0, 1.0, 1.0]],
        );
        let cfg = ConversionConfig {
            node_pruning: false,
            id_indexing: true,
        };
        let gd = convert_table(&ds, &kb, &cfg).unwrap();
        for g in &gd.graphs {
            assert_eq!(g.edges, gd.graphs[0].edges);
            assert_eq!(g.node_index, gd.graphs[0].node_index);
        }
    }

    #[test]
    fn round_trip_both_modes() {
        let (vocab, edges) = shared_fixture();
        let row = [0.0, 1.2, 3.3];
        for pruning in [false, true] {
            let cfg = ConversionConfig {
                node_pruning: pruning,
                id_indexing: true,
            };
            let g = convert_row(&row, &vocab, &edges, &cfg, 0).unwrap();
            let back = reconstruct_row(&g, &vocab).unwrap();
            assert_eq!(back, row.to_vec());
        }
    }

    #[test]
    fn round_trip_empty_graph() {
        let (vocab, edges) = shared_fixture();
        let cfg = ConversionConfig {
            node_pruning: true,
            id_indexing: true,
        };
        let g = convert_row(&[0.0, 0.0, 0.0], &vocab, &edges, &cfg, 0).unwrap();
        assert_eq!(g.n_nodes(), 0);
        let back = reconstruct_row(&g, &vocab).unwrap();
        assert_eq!(back, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn reconstruct_vocab_mismatch() {
        let (vocab, edges) = shared_fixture();
        let cfg = ConversionConfig::default();
        let g = convert_row(&[1.0, 2.0, 3.0], &vocab, &edges, &cfg, 0).unwrap();
        let other = FeatureVocabulary::from_names(vec!["a".into()]);
        assert!(reconstruct_row(&g, &other).is_err());
    }
}
