//! Synthetic benchmark generator with planted, KB-aligned relational
//! signal, plus a degree-preserving KB scrambler used as the control
//! condition.
//!
//! Each class owns a block of signal features arranged in a cycle in the
//! true KB. A `hop_coupling` fraction of the class signal is expressed as a
//! sign-correlated perturbation on the two endpoints of each planted edge:
//! both endpoints move by `+a` or both by `-a` with equal probability, so
//! each feature's marginal mean stays zero while the *product* of adjacent
//! features acquires a positive mean. Models that treat features
//! independently cannot see this component; one round of message passing
//! along the true KB can. The remaining `1 - hop_coupling` fraction is an
//! ordinary per-feature mean shift. Off-class planted edges receive the
//! same perturbation with independent endpoint signs, so per-feature
//! marginal distributions are identical across classes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, X2gError};
use crate::kb::KnowledgeBase;
use crate::tabular::TabularDataset;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Fraction of all feature pairs present as KB edges (planted edges included).
    pub kb_edge_density: f64,
    /// Planted signal features per class.
    pub signal_features: usize,
    pub signal_strength: f64,
    /// Fraction of the signal expressed only through neighbor interaction.
    pub hop_coupling: f64,
    pub noise_std: f64,
    /// Probability that a background cell is exactly zero (CNV-style
    /// sparsity); signal cells are always present.
    #[serde(default)]
    pub zero_prob: f64,
    /// Fraction of features mentioned by the KB (signal features are
    /// always covered); mirrors real KBs covering a subset of columns.
    #[serde(default = "default_coverage")]
    pub kb_coverage: f64,
    pub seed: u64,
}

fn default_coverage() -> f64 {
    1.0
}

impl SynthSpec {
    /// Desk-scale default: 400 samples, 600 features, 3 classes, 5 signal
    /// features per class.
    pub fn desk_scale(seed: u64) -> SynthSpec {
        SynthSpec {
            n_samples: 400,
            n_features: 600,
            n_classes: 3,
            kb_edge_density: 0.04,
            signal_features: 10,
            signal_strength: 5.0,
            hop_coupling: 0.7,
            noise_std: 1.0,
            zero_prob: 0.0,
            kb_coverage: 0.167,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_features == 0 || self.n_classes < 2 {
            return Err(X2gError::Config(
                "need n_samples > 0, n_features > 0, n_classes >= 2".into(),
            ));
        }
        if self.signal_features * self.n_classes > self.n_features {
            return Err(X2gError::Config(format!(
                "{} signal features x {} classes exceed {} features",
                self.signal_features, self.n_classes, self.n_features
            )));
        }
        for (name, v) in [
            ("kb_edge_density", self.kb_edge_density),
            ("hop_coupling", self.hop_coupling),
            ("zero_prob", self.zero_prob),
            ("kb_coverage", self.kb_coverage),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(X2gError::Config(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.signal_strength < 0.0 || self.noise_std < 0.0 {
            return Err(X2gError::Config(
                "signal_strength and noise_std must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn feature_name(j: usize) -> String {
    format!("f{j:05}")
}

/// Planted-edge cycles: class c's signal features are indices
/// [c*k, (c+1)*k) joined in a cycle (or a single edge when k == 2, none
/// when k < 2).
fn planted_edges(spec: &SynthSpec) -> Vec<Vec<(usize, usize)>> {
    let k = spec.signal_features;
    (0..spec.n_classes)
        .map(|c| {
            let base = c * k;
            match k {
                0 | 1 => Vec::new(),
                2 => vec![(base, base + 1)],
                _ => (0..k).map(|i| (base + i, base + (i + 1) % k)).collect(),
            }
        })
        .collect()
}

/// Generates (table, true KB, planted signal feature names).
pub fn generate(spec: &SynthSpec) -> Result<(TabularDataset, KnowledgeBase, Vec<String>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std.max(f64::MIN_POSITIVE))
        .map_err(|e| X2gError::Config(format!("bad noise_std: {e}")))?;
    let names: Vec<String> = (0..spec.n_features).map(feature_name).collect();
    let class_names: Vec<String> = (0..spec.n_classes).map(|c| format!("class{c}")).collect();
    let per_class = planted_edges(spec);
    let hop_amp = spec.hop_coupling * spec.signal_strength;
    // the first round(hop * k) features of each class block carry the
    // relational (shared-sign) signal; the rest share the node-local
    // (1 - hop) budget as a plain mean shift
    let k_hop = ((spec.hop_coupling * spec.signal_features as f64).round() as usize)
        .min(spec.signal_features);
    let k_loc = spec.signal_features - k_hop;
    let shift = if k_loc > 0 {
        (1.0 - spec.hop_coupling) * spec.signal_strength / k_loc as f64
    } else {
        0.0
    };

    let n_signal = spec.n_classes * spec.signal_features;
    let labels: Vec<usize> = (0..spec.n_samples).map(|i| i % spec.n_classes).collect();
    let mut rows = Vec::with_capacity(spec.n_samples);
    for &label in &labels {
        let mut row: Vec<f64> = (0..spec.n_features)
            .map(|j| {
                if j >= n_signal && spec.zero_prob > 0.0 && rng.gen::<f64>() < spec.zero_prob {
                    return 0.0;
                }
                if spec.noise_std > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        for c in 0..spec.n_classes {
            if c == label {
                // one shared sign for the relational sub-block: every
                // KB-adjacent pair's product gains a positive mean while
                // each marginal stays centered; the remaining features
                // carry the node-local mean shift
                let s = if rng.gen::<bool>() { hop_amp } else { -hop_amp };
                for j in 0..spec.signal_features {
                    row[c * spec.signal_features + j] += if j < k_hop { s } else { shift };
                }
            } else {
                // independent signs on the relational sub-block: identical
                // marginals, zero correlation
                for j in 0..k_hop {
                    let s = if rng.gen::<bool>() { hop_amp } else { -hop_amp };
                    row[c * spec.signal_features + j] += s;
                }
            }
        }
        rows.push(row);
    }

    // KB coverage: every signal feature plus a random slice of background
    let n_covered = ((spec.kb_coverage * spec.n_features as f64).round() as usize)
        .clamp(n_signal.max(2), spec.n_features);
    let mut covered: Vec<usize> = (0..n_signal).collect();
    if n_covered > n_signal {
        let extra = rand::seq::index::sample(
            &mut rng,
            spec.n_features - n_signal,
            n_covered - n_signal,
        );
        covered.extend(extra.into_iter().map(|i| i + n_signal));
    }
    // true KB: all planted edges plus random edges among covered features
    // up to the target density
    let mut edge_set: std::collections::BTreeSet<(usize, usize)> = per_class
        .iter()
        .flatten()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect();
    let target =
        ((spec.kb_edge_density * (n_covered * (n_covered - 1)) as f64) / 2.0).round() as usize;
    let mut guard = 0usize;
    while edge_set.len() < target && guard < 100 * target.max(1) {
        let u = covered[rng.gen_range(0..n_covered)];
        let v = covered[rng.gen_range(0..n_covered)];
        if u != v {
            edge_set.insert((u.min(v), u.max(v)));
        }
        guard += 1;
    }
    let kb = KnowledgeBase::from_edges(
        "synthetic-true",
        edge_set
            .into_iter()
            .map(|(u, v)| (names[u].clone(), names[v].clone())),
    );

    let truth: Vec<String> = (0..spec.n_classes * spec.signal_features)
        .map(feature_name)
        .collect();
    let table = TabularDataset::from_numeric(names, rows, labels, class_names)?;
    Ok((table, kb, truth))
}

/// Adds `extra` random edges among the KB's existing features (skipping
/// self-loops and duplicates; gives up after 100·`extra` attempts on
/// near-complete graphs). Existing edges are kept, so signal structure
/// survives but is diluted by noise.
pub fn add_noise_edges(kb: &KnowledgeBase, extra: usize, seed: u64) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = kb.edges.clone();
    let feats = &kb.features;
    let target = kb.edges.len() + extra;
    let mut attempts = 0usize;
    while edges.len() < target && attempts < 100 * extra.max(1) {
        attempts += 1;
        let i = rng.gen_range(0..feats.len());
        let j = rng.gen_range(0..feats.len());
        if i == j {
            continue;
        }
        let (a, b) = (&feats[i.min(j)], &feats[i.max(j)]);
        edges.insert((a.clone(), b.clone()));
    }
    let mut out = KnowledgeBase::from_edges(&format!("{}-noisy", kb.name), edges);
    for f in &kb.features {
        if !out.features.contains(f) {
            out.features.push(f.clone());
        }
    }
    out.features.sort();
    out
}

/// Degree-preserving random rewiring by double-edge swaps (10·|E|
/// attempts). Node and edge counts are unchanged; the degree sequence is
/// preserved exactly.
pub fn scramble_kb(kb: &KnowledgeBase, seed: u64) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(String, String)> = kb.edges.iter().cloned().collect();
    let m = edges.len();
    if m >= 2 {
        let present: std::collections::HashSet<(String, String)> = edges.iter().cloned().collect();
        let mut present = present;
        for _ in 0..10 * m {
            let i = rng.gen_range(0..m);
            let j = rng.gen_range(0..m);
            if i == j {
                continue;
            }
            let (a, b) = edges[i].clone();
            let (c, d) = edges[j].clone();
            // swap to (a, d), (c, b)
            if a == d || c == b {
                continue;
            }
            let e1 = (a.clone().min(d.clone()), a.clone().max(d.clone()));
            let e2 = (c.clone().min(b.clone()), c.clone().max(b.clone()));
            if present.contains(&e1) || present.contains(&e2) || e1 == e2 {
                continue;
            }
            present.remove(&edges[i]);
            present.remove(&edges[j]);
            present.insert(e1.clone());
            present.insert(e2.clone());
            edges[i] = e1;
            edges[j] = e2;
        }
    }
    let mut out = KnowledgeBase::from_edges(&kb.name, edges);
    out.name = format!("{}-scrambled", kb.name);
    // keep isolated features (if any) in the vocabulary
    for f in &kb.features {
        if !out.features.contains(f) {
            out.features.push(f.clone());
        }
    }
    out.features.sort();
    out
}
