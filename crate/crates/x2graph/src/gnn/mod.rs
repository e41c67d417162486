//! Differentiable model core: node projection (index embedding + value
//! linear), message-passing layers (GCN and mean-neighbor aggregation),
//! mean pooling, a linear classifier head, and an MLP baseline. Gradients
//! are computed by hand-rolled reverse-mode accumulation over a recorded
//! forward trace.

mod checkpoint;
mod mlp;
mod model;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use mlp::MlpBaseline;
pub use model::{gcn_layer, mean_agg_layer, Adjacency, ForwardTrace, GraphModel};

use crate::error::{Result, X2gError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LayerKind {
    Gcn,
    MeanAgg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Activation {
    Relu,
    Gelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Norm {
    None,
    Layer,
}

/// Architecture descriptor. String form `kind:layers:d:act[:ln]`,
/// e.g. `gcn:2:128:gelu` or `mean:1:32:relu:ln`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Arch {
    pub layer_kind: LayerKind,
    pub n_layers: usize,
    pub d: usize,
    pub activation: Activation,
    pub norm: Norm,
    pub id_indexing: bool,
    pub value_bias: bool,
}

impl Arch {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d % 2 != 0 {
            return Err(X2gError::Config(format!(
                "feature dimension d must be a positive even number, got {}",
                self.d
            )));
        }
        if !(1..=4).contains(&self.n_layers) {
            return Err(X2gError::Config(format!(
                "layer count must be in 1..=4, got {}",
                self.n_layers
            )));
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<Arch> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() < 4 || parts.len() > 5 {
            return Err(X2gError::Config(format!(
                "bad architecture `{s}`, expected kind:layers:d:act[:ln]"
            )));
        }
        let layer_kind = match parts[0] {
            "gcn" => LayerKind::Gcn,
            "mean" | "sage" => LayerKind::MeanAgg,
            other => return Err(X2gError::Config(format!("unknown layer kind `{other}`"))),
        };
        let n_layers: usize = parts[1]
            .parse()
            .map_err(|_| X2gError::Config(format!("bad layer count `{}`", parts[1])))?;
        let d: usize = parts[2]
            .parse()
            .map_err(|_| X2gError::Config(format!("bad dimension `{}`", parts[2])))?;
        let activation = match parts[3] {
            "relu" => Activation::Relu,
            "gelu" => Activation::Gelu,
            other => return Err(X2gError::Config(format!("unknown activation `{other}`"))),
        };
        let norm = match parts.get(4) {
            None => Norm::None,
            Some(&"ln") => Norm::Layer,
            Some(other) => return Err(X2gError::Config(format!("unknown norm `{other}`"))),
        };
        let arch = Arch {
            layer_kind,
            n_layers,
            d,
            activation,
            norm,
            id_indexing: true,
            value_bias: true,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn descriptor(&self) -> String {
        let kind = match self.layer_kind {
            LayerKind::Gcn => "gcn",
            LayerKind::MeanAgg => "mean",
        };
        let act = match self.activation {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
        };
        let mut s = format!("{kind}:{}:{}:{act}", self.n_layers, self.d);
        if self.norm == Norm::Layer {
            s.push_str(":ln");
        }
        s
    }
}

// tanh-approximation GELU; constants fixed for reproducibility
const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub(crate) fn activate(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => x.max(0.0),
        Activation::Gelu => {
            let inner = GELU_C * (x + GELU_A * x * x * x);
            0.5 * x * (1.0 + inner.tanh())
        }
    }
}

pub(crate) fn activate_grad(act: Activation, x: f64) -> f64 {
    match act {
        Activation::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Activation::Gelu => {
            let inner = GELU_C * (x + GELU_A * x * x * x);
            let t = inner.tanh();
            let sech2 = 1.0 - t * t;
            0.5 * (1.0 + t) + 0.5 * x * sech2 * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Cross-entropy of a softmax distribution against a hard label.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    lse - logits[label]
}

/// Row-major matrix buffer for forward traces and parameter views.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// out[n x q] = a[n x p] * b[p x q], b given as a flat row-major slice.
pub(crate) fn matmul(a: &Mat, b: &[f64], q: usize) -> Mat {
    let p = a.cols;
    debug_assert_eq!(b.len(), p * q);
    let mut out = Mat::zeros(a.rows, q);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (k, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b[k * q..(k + 1) * q];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// out[n x p] = a[n x q] * b^T where b is p x q row-major.
pub(crate) fn matmul_bt(a: &Mat, b: &[f64], p: usize) -> Mat {
    let q = a.cols;
    debug_assert_eq!(b.len(), p * q);
    let mut out = Mat::zeros(a.rows, p);
    for i in 0..a.rows {
        let arow = a.row(i);
        let orow = out.row_mut(i);
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * q..(j + 1) * q];
            *o = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// acc[p x q] += a^T[p x n] * b[n x q], accumulated into a flat buffer.
pub(crate) fn accumulate_at_b(a: &Mat, b: &Mat, acc: &mut [f64]) {
    let p = a.cols;
    let q = b.cols;
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(acc.len(), p * q);
    for i in 0..a.rows {
        let arow = a.row(i);
        let brow = b.row(i);
        for (k, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let accrow = &mut acc[k * q..(k + 1) * q];
            for (o, &bv) in accrow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_descriptor_round_trip() {
        for s in ["gcn:2:128:gelu", "mean:1:32:relu:ln", "gcn:4:64:relu"] {
            let arch = Arch::parse(s).unwrap();
            assert_eq!(arch.descriptor(), s);
        }
        assert!(Arch::parse("gcn:0:32:relu").is_err());
        assert!(Arch::parse("gcn:2:33:relu").is_err());
        assert!(Arch::parse("gat:2:32:relu").is_err());
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
        // stability under large logits
        let p = softmax(&[1000.0, 1001.0]);
        assert!(p.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn gelu_matches_finite_difference() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let eps = 1e-6;
            let fd = (activate(Activation::Gelu, x + eps) - activate(Activation::Gelu, x - eps))
                / (2.0 * eps);
            assert!((activate_grad(Activation::Gelu, x) - fd).abs() < 1e-8);
        }
    }

    #[test]
    fn matmul_small() {
        let a = Mat {
            rows: 2,
            cols: 2,
            data: vec![1.0, 2.0, 3.0, 4.0],
        };
        let b = vec![5.0, 6.0, 7.0, 8.0];
        let c = matmul(&a, &b, 2);
        assert_eq!(c.data, vec![19.0, 22.0, 43.0, 50.0]);
        let d = matmul_bt(&c, &b, 2);
        // c * b^T
        assert_eq!(d.data[0], 19.0 * 5.0 + 22.0 * 6.0);
    }
}
