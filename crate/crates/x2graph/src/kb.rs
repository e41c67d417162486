//! Knowledge bases as undirected feature-relation sets: edge-list ingestion,
//! intersection with dataset columns, and edge restriction to a vocabulary.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Result, X2gError};

/// Undirected binary relation over feature names. Edges are stored as
/// ordered pairs (u < v), so symmetry and self-loop exclusion hold by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub name: String,
    pub features: Vec<String>,
    pub edges: BTreeSet<(String, String)>,
}

/// The sorted intersection of dataset columns and KB features; graph node
/// indices come from positions in this list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVocabulary {
    pub names: Vec<String>,
    pub index_of: BTreeMap<String, usize>,
}

impl FeatureVocabulary {
    pub fn from_names(mut names: Vec<String>) -> Self {
        names.sort();
        names.dedup();
        let index_of = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        FeatureVocabulary { names, index_of }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl KnowledgeBase {
    pub fn from_edges(name: &str, pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut features = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (u, v) in pairs {
            if u == v {
                continue;
            }
            features.insert(u.clone());
            features.insert(v.clone());
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            edges.insert((a, b));
        }
        KnowledgeBase {
            name: name.to_string(),
            features: features.into_iter().collect(),
            edges,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.features.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
}

/// Loads a `u<TAB>v` edge list. `#` comment lines are skipped; self-loops
/// dropped; duplicates (and reversed duplicates) collapse. A third
/// whitespace-separated field is rejected: weighted edge lists are not
/// supported, the relation is binary.
pub fn load_edge_list(path: &Path, name: &str) -> Result<KnowledgeBase> {
    let text =
        std::fs::read_to_string(path).map_err(|e| X2gError::io(path.display().to_string(), e))?;
    parse_edge_list(&text, name).map_err(|e| match e {
        X2gError::Format(msg) => X2gError::Format(format!("{}: {}", path.display(), msg)),
        other => other,
    })
}

pub fn parse_edge_list(text: &str, name: &str) -> Result<KnowledgeBase> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let u = parts.next().filter(|s| !s.is_empty());
        let v = parts.next().filter(|s| !s.is_empty());
        let extra = parts.next();
        match (u, v, extra) {
            (Some(u), Some(v), None) => pairs.push((u.to_string(), v.to_string())),
            (_, _, Some(_)) => {
                return Err(X2gError::Format(format!(
                    "line {}: expected `u<TAB>v`, got extra field (weighted edges unsupported)",
                    lineno + 1
                )))
            }
            _ => {
                return Err(X2gError::Format(format!(
                    "line {}: expected `u<TAB>v`",
                    lineno + 1
                )))
            }
        }
    }
    Ok(KnowledgeBase::from_edges(name, pairs))
}

/// Serializes back to the edge-list format (sorted, one edge per line).
pub fn write_edge_list(kb: &KnowledgeBase, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (u, v) in &kb.edges {
        out.push_str(u);
        out.push('\t');
        out.push_str(v);
        out.push('\n');
    }
    // isolated features would be lost by the pure edge format; none are
    // produced by load_edge_list, so this round-trips cleanly
    std::fs::write(path, out).map_err(|e| X2gError::io(path.display().to_string(), e))
}

/// Sorted set intersection of dataset column names and KB features.
pub fn intersect(ds_columns: &[String], kb: &KnowledgeBase) -> FeatureVocabulary {
    let kb_set: BTreeSet<&String> = kb.features.iter().collect();
    let common: Vec<String> = ds_columns
        .iter()
        .filter(|c| kb_set.contains(c))
        .cloned()
        .collect();
    FeatureVocabulary::from_names(common)
}

/// Keeps exactly the KB edges with both endpoints in the vocabulary,
/// remapped to vocabulary indices (u < v).
pub fn restrict_edges(kb: &KnowledgeBase, vocab: &FeatureVocabulary) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (u, v) in &kb.edges {
        if let (Some(&i), Some(&j)) = (vocab.index_of.get(u), vocab.index_of.get(v)) {
            out.push(if i < j { (i, j) } else { (j, i) });
        }
    }
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct KbStats {
    pub name: String,
    pub nodes: usize,
    pub edges: usize,
    pub degree_histogram: BTreeMap<usize, usize>,
}

pub fn kb_stats(kb: &KnowledgeBase) -> KbStats {
    let mut degree: BTreeMap<&str, usize> = kb.features.iter().map(|f| (f.as_str(), 0)).collect();
    for (u, v) in &kb.edges {
        *degree.get_mut(u.as_str()).unwrap() += 1;
        *degree.get_mut(v.as_str()).unwrap() += 1;
    }
    let mut histogram = BTreeMap::new();
    for (_, d) in degree {
        *histogram.entry(d).or_insert(0) += 1;
    }
    KbStats {
        name: kb.name.clone(),
        nodes: kb.n_nodes(),
        edges: kb.n_edges(),
        degree_histogram: histogram,
    }
}
