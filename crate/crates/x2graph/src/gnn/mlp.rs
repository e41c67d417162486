//! Dense feed-forward baseline operating on the raw row vector over the
//! feature vocabulary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{activate, activate_grad, cross_entropy, softmax, Activation};
use crate::error::{Result, X2gError};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpBaseline {
    /// Layer widths including input and output: [D, h1, ..., C].
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpTrace {
    // per layer: input and pre-activation
    inputs: Vec<Vec<f64>>,
    pre_act: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl MlpTrace {
    pub fn loss(&self, label: usize) -> f64 {
        cross_entropy(&self.logits, label)
    }
}

impl MlpBaseline {
    pub fn new(widths: Vec<usize>, activation: Activation, seed: u64) -> Result<MlpBaseline> {
        if widths.len() < 2 {
            return Err(X2gError::Config(
                "MLP needs at least input and output widths".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for pair in widths.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Ok(MlpBaseline {
            widths,
            activation,
            params,
        })
    }

    pub fn n_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        // (weight offset, bias offset) per layer
        let mut out = Vec::new();
        let mut off = 0;
        for pair in self.widths.windows(2) {
            let w = off;
            let b = off + pair[0] * pair[1];
            off = b + pair[1];
            out.push((w, b));
        }
        out
    }

    pub fn forward_traced(&self, row: &[f64]) -> Result<MlpTrace> {
        if row.len() != self.widths[0] {
            return Err(X2gError::VocabMismatch(format!(
                "input has {} values, MLP expects {}",
                row.len(),
                self.widths[0]
            )));
        }
        let offsets = self.layer_offsets();
        let n_layers = offsets.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre_act = Vec::with_capacity(n_layers);
        let mut x = row.to_vec();
        for (l, &(wo, bo)) in offsets.iter().enumerate() {
            let fan_out = self.widths[l + 1];
            let mut z = self.params[bo..bo + fan_out].to_vec();
            for (i, &xv) in x.iter().enumerate() {
                if xv == 0.0 {
                    continue;
                }
                let wrow = &self.params[wo + i * fan_out..wo + (i + 1) * fan_out];
                for (zv, &wv) in z.iter_mut().zip(wrow) {
                    *zv += xv * wv;
                }
            }
            inputs.push(x);
            let last = l == n_layers - 1;
            let next = if last {
                z.clone()
            } else {
                z.iter().map(|&v| activate(self.activation, v)).collect()
            };
            pre_act.push(z);
            x = next;
        }
        let logits = x;
        let probs = softmax(&logits);
        Ok(MlpTrace {
            inputs,
            pre_act,
            logits,
            probs,
        })
    }

    pub fn forward(&self, row: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.forward_traced(row)?;
        Ok((t.logits, t.probs))
    }

    pub fn backward(&self, trace: &MlpTrace, label: usize) -> Vec<f64> {
        let offsets = self.layer_offsets();
        let mut grads = vec![0.0; self.params.len()];
        let mut dz = trace.probs.clone();
        dz[label] -= 1.0;
        for (l, &(wo, bo)) in offsets.iter().enumerate().rev() {
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let input = &trace.inputs[l];
            for (c, &d) in dz.iter().enumerate() {
                grads[bo + c] += d;
            }
            for i in 0..fan_in {
                let xv = input[i];
                if xv != 0.0 {
                    for (c, &d) in dz.iter().enumerate() {
                        grads[wo + i * fan_out + c] += xv * d;
                    }
                }
            }
            if l > 0 {
                let mut dx = vec![0.0; fan_in];
                for (i, dxv) in dx.iter_mut().enumerate() {
                    let wrow = &self.params[wo + i * fan_out..wo + (i + 1) * fan_out];
                    *dxv = wrow.iter().zip(&dz).map(|(w, d)| w * d).sum();
                }
                // through the previous layer's activation
                let prev_pre = &trace.pre_act[l - 1];
                dz = dx
                    .iter()
                    .zip(prev_pre)
                    .map(|(d, &z)| d * activate_grad(self.activation, z))
                    .collect();
            }
        }
        grads
    }

    pub fn loss_and_grad(&self, row: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        let trace = self.forward_traced(row)?;
        Ok((trace.loss(label), self.backward(&trace, label)))
    }
}
