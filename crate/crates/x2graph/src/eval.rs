//! Classification metrics: micro accuracy, macro one-vs-rest AUC
//! (midrank tie handling), macro F1, Cohen's kappa, per-class PR curves
//! with step-integral Average Precision.

use crate::error::{Result, X2gError};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// None when the class has no positives or no negatives in the truth.
    pub auc: Option<f64>,
    pub average_precision: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub macro_auc: f64,
    pub macro_f1: f64,
    pub kappa: f64,
    pub per_class: Vec<PerClassMetrics>,
    pub confusion: Vec<Vec<usize>>,
    /// Per-class (recall, precision) points in threshold order.
    pub pr_curves: Vec<Vec<(f64, f64)>>,
}

pub fn confusion_matrix(pred: &[usize], truth: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        m[t][p] += 1;
    }
    m
}

/// kappa = (p_o - p_e) / (1 - p_e); defined as 0 when p_e = 1.
pub fn cohen_kappa(confusion: &[Vec<usize>]) -> f64 {
    let total: usize = confusion.iter().map(|r| r.iter().sum::<usize>()).sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    let n = confusion.len();
    let trace: usize = (0..n).map(|i| confusion[i][i]).sum();
    let p_o = trace as f64 / total;
    let mut p_e = 0.0;
    for c in 0..n {
        let row: usize = confusion[c].iter().sum();
        let col: usize = confusion.iter().map(|r| r[c]).sum();
        p_e += (row as f64) * (col as f64) / (total * total);
    }
    if (1.0 - p_e).abs() < 1e-15 {
        return 0.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

/// Per-class F1 (0 when undefined), unweighted mean over all classes.
pub fn macro_f1(confusion: &[Vec<usize>]) -> f64 {
    let n = confusion.len();
    if n == 0 {
        return 0.0;
    }
    (0..n).map(|c| class_f1(confusion, c)).sum::<f64>() / n as f64
}

fn class_precision_recall(confusion: &[Vec<usize>], c: usize) -> (f64, f64) {
    let tp = confusion[c][c] as f64;
    let pred_c: usize = confusion.iter().map(|r| r[c]).sum();
    let truth_c: usize = confusion[c].iter().sum();
    let precision = if pred_c == 0 { 0.0 } else { tp / pred_c as f64 };
    let recall = if truth_c == 0 { 0.0 } else { tp / truth_c as f64 };
    (precision, recall)
}

fn class_f1(confusion: &[Vec<usize>], c: usize) -> f64 {
    let (p, r) = class_precision_recall(confusion, c);
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// One-vs-rest AUC for one class via the rank statistic (Mann-Whitney),
/// ties contributing 1/2. None when the class lacks positives or negatives.
pub fn roc_auc_binary(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // midranks over the pooled sample
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }
    let rank_sum: f64 = (0..scores.len()).filter(|&k| positive[k]).map(|k| ranks[k]).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Per-class one-vs-rest AUC plus the macro mean over classes that have
/// both positives and negatives.
pub fn roc_auc_ovr(scores: &[Vec<f64>], truth: &[usize], n_classes: usize) -> (Vec<Option<f64>>, f64) {
    let mut per_class = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let class_scores: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        let auc = roc_auc_binary(&class_scores, &positive);
        if auc.is_none() {
            eprintln!("warning: class {c} has no positives or no negatives; excluded from macro AUC");
        }
        per_class.push(auc);
    }
    let included: Vec<f64> = per_class.iter().filter_map(|&a| a).collect();
    let macro_auc = if included.is_empty() {
        0.0
    } else {
        included.iter().sum::<f64>() / included.len() as f64
    };
    (per_class, macro_auc)
}

/// PR curve points (recall, precision) at every distinct score threshold
/// (descending) and the step-integral AP = sum (R_k - R_{k-1}) * P_k.
pub fn pr_curve_ap(scores: &[f64], positive: &[bool]) -> (Vec<(f64, f64)>, Option<f64>) {
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return (Vec::new(), None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut points = Vec::new();
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut k = 0;
    while k < order.len() {
        // advance over a tie group: thresholds sit between distinct scores
        let mut j = k;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[k]] {
            j += 1;
        }
        for &idx in &order[k..=j] {
            if positive[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos as f64;
        points.push((recall, precision));
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        k = j + 1;
    }
    (points, Some(ap))
}

/// Full report from per-sample class probabilities and truth labels.
pub fn evaluate(scores: &[Vec<f64>], truth: &[usize], n_classes: usize) -> Result<EvalReport> {
    if scores.len() != truth.len() {
        return Err(X2gError::Config(
            "scores and truth have different lengths".into(),
        ));
    }
    if scores.is_empty() {
        return Err(X2gError::Config("cannot evaluate an empty split".into()));
    }
    let pred: Vec<usize> = scores
        .iter()
        .map(|s| {
            s.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect();
    let confusion = confusion_matrix(&pred, truth, n_classes);
    let accuracy =
        pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64;
    let kappa = cohen_kappa(&confusion);
    let f1 = macro_f1(&confusion);
    let (aucs, macro_auc) = roc_auc_ovr(scores, truth, n_classes);
    let mut per_class = Vec::with_capacity(n_classes);
    let mut pr_curves = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let (precision, recall) = class_precision_recall(&confusion, c);
        let class_scores: Vec<f64> = scores.iter().map(|s| s[c]).collect();
        let positive: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        let (curve, ap) = pr_curve_ap(&class_scores, &positive);
        per_class.push(PerClassMetrics {
            precision,
            recall,
            f1: class_f1(&confusion, c),
            auc: aucs[c],
            average_precision: ap,
            support: confusion[c].iter().sum(),
        });
        pr_curves.push(curve);
    }
    Ok(EvalReport {
        accuracy,
        macro_auc,
        macro_f1: f1,
        kappa,
        per_class,
        confusion,
        pr_curves,
    })
}
