//! The graph classifier: Eq.-style node projection (index embedding
//! concatenated with a value projection), stacked message-passing layers,
//! mean pooling, and a linear head. Parameters live in one flat buffer so
//! the optimizer, checkpointing, and finite-difference checks all see the
//! same view.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    accumulate_at_b, activate, activate_grad, cross_entropy, dot, matmul, matmul_bt, softmax,
    Activation, Arch, LayerKind, Mat, Norm,
};
use crate::convert::SampleGraph;
use crate::error::{Result, X2gError};

const LN_EPS: f64 = 1e-5;

/// Precomputed per-graph aggregation structure. GCN coefficients follow the
/// symmetric normalization with self-loops: deg = 1 + neighbor count,
/// self weight 1/deg_i, edge weight 1/sqrt(deg_i * deg_j).
#[derive(Debug, Clone)]
pub struct Adjacency {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub gcn_self: Vec<f64>,
    pub gcn_edge: Vec<f64>,
    pub nbr_count: Vec<f64>,
}

impl Adjacency {
    pub fn build(n: usize, edges: &[(u32, u32)]) -> Adjacency {
        let edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a as usize, b as usize)).collect();
        let mut nbr_count = vec![0.0; n];
        for &(a, b) in &edges {
            nbr_count[a] += 1.0;
            nbr_count[b] += 1.0;
        }
        let deg: Vec<f64> = nbr_count.iter().map(|&c| c + 1.0).collect();
        let gcn_self: Vec<f64> = deg.iter().map(|&d| 1.0 / d).collect();
        let gcn_edge: Vec<f64> = edges
            .iter()
            .map(|&(a, b)| 1.0 / (deg[a] * deg[b]).sqrt())
            .collect();
        Adjacency {
            n,
            edges,
            gcn_self,
            gcn_edge,
            nbr_count,
        }
    }
}

/// M = A_hat * H, with optional per-edge gates scaling the off-diagonal
/// (message) terms only.
pub fn gcn_aggregate(h: &Mat, adj: &Adjacency, edge_weights: Option<&[f64]>) -> Mat {
    let mut out = Mat::zeros(h.rows, h.cols);
    for i in 0..h.rows {
        let s = adj.gcn_self[i];
        let hrow = h.row(i);
        let orow = out.row_mut(i);
        for (o, &x) in orow.iter_mut().zip(hrow) {
            *o = s * x;
        }
    }
    for (e, &(a, b)) in adj.edges.iter().enumerate() {
        let w = edge_weights.map_or(1.0, |m| m[e]) * adj.gcn_edge[e];
        for c in 0..h.cols {
            out.data[a * h.cols + c] += w * h.data[b * h.cols + c];
            out.data[b * h.cols + c] += w * h.data[a * h.cols + c];
        }
    }
    out
}

/// N_i = mean over neighbors of H (zero when isolated); gated edges scale
/// contributions while the divisor stays the ungated neighbor count.
pub fn mean_neighbor_aggregate(h: &Mat, adj: &Adjacency, edge_weights: Option<&[f64]>) -> Mat {
    let mut out = Mat::zeros(h.rows, h.cols);
    for (e, &(a, b)) in adj.edges.iter().enumerate() {
        let w = edge_weights.map_or(1.0, |m| m[e]);
        for c in 0..h.cols {
            out.data[a * h.cols + c] += w * h.data[b * h.cols + c] / adj.nbr_count[a];
            out.data[b * h.cols + c] += w * h.data[a * h.cols + c] / adj.nbr_count[b];
        }
    }
    out
}

/// Columnwise mean; zero vector for the empty graph.
pub fn mean_pool(h: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; h.cols];
    if h.rows == 0 {
        return out;
    }
    for i in 0..h.rows {
        for (o, &x) in out.iter_mut().zip(h.row(i)) {
            *o += x;
        }
    }
    for o in &mut out {
        *o /= h.rows as f64;
    }
    out
}

/// One GCN layer: act(norm(A_hat * H * W + b)). `act`/`norm` optional so
/// the bare linear form is testable in isolation.
pub fn gcn_layer(
    h: &Mat,
    adj: &Adjacency,
    w: &[f64],
    b: &[f64],
    act: Option<Activation>,
) -> Mat {
    let m = gcn_aggregate(h, adj, None);
    let mut z = matmul(&m, w, b.len());
    for i in 0..z.rows {
        for (zv, &bv) in z.row_mut(i).iter_mut().zip(b) {
            *zv += bv;
        }
    }
    if let Some(a) = act {
        for v in &mut z.data {
            *v = activate(a, *v);
        }
    }
    z
}

/// One mean-aggregation layer: act(H * W_self + mean_nbr(H) * W_nbr + b).
pub fn mean_agg_layer(
    h: &Mat,
    adj: &Adjacency,
    w_self: &[f64],
    w_nbr: &[f64],
    b: &[f64],
    act: Option<Activation>,
) -> Mat {
    let n = mean_neighbor_aggregate(h, adj, None);
    let mut z = matmul(h, w_self, b.len());
    let zn = matmul(&n, w_nbr, b.len());
    for (zv, nv) in z.data.iter_mut().zip(&zn.data) {
        *zv += nv;
    }
    for i in 0..z.rows {
        for (zv, &bv) in z.row_mut(i).iter_mut().zip(b) {
            *zv += bv;
        }
    }
    if let Some(a) = act {
        for v in &mut z.data {
            *v = activate(a, *v);
        }
    }
    z
}

#[derive(Debug, Clone)]
struct LayerLayout {
    w: Range<usize>,
    w_nbr: Option<Range<usize>>,
    b: Range<usize>,
    ln_gamma: Option<Range<usize>>,
    ln_beta: Option<Range<usize>>,
}

#[derive(Debug, Clone)]
struct Layout {
    half: usize,
    embed: Range<usize>,
    value_w: Range<usize>,
    value_b: Option<Range<usize>>,
    layers: Vec<LayerLayout>,
    head_w: Range<usize>,
    head_b: Range<usize>,
    total: usize,
}

impl Layout {
    fn new(arch: &Arch, vocab_size: usize, n_classes: usize) -> Layout {
        let d = arch.d;
        let half = d / 2;
        let mut off = 0;
        let mut take = |len: usize| {
            let r = off..off + len;
            off += len;
            r
        };
        let embed = take(vocab_size * half);
        let value_w = take(half);
        let value_b = arch.value_bias.then(|| take(half));
        let mut layers = Vec::with_capacity(arch.n_layers);
        for _ in 0..arch.n_layers {
            let w = take(d * d);
            let w_nbr = (arch.layer_kind == LayerKind::MeanAgg).then(|| take(d * d));
            let b = take(d);
            let (ln_gamma, ln_beta) = if arch.norm == Norm::Layer {
                (Some(take(d)), Some(take(d)))
            } else {
                (None, None)
            };
            layers.push(LayerLayout {
                w,
                w_nbr,
                b,
                ln_gamma,
                ln_beta,
            });
        }
        let head_w = take(d * n_classes);
        let head_b = take(n_classes);
        Layout {
            half,
            embed,
            value_w,
            value_b,
            layers,
            head_w,
            head_b,
            total: off,
        }
    }
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Mat,
    agg: Mat,
    ln_zhat: Option<Mat>,
    ln_inv_std: Option<Vec<f64>>,
    act_in: Mat,
}

/// Recorded forward pass; everything backward needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    adj: Adjacency,
    h0: Mat,
    layers: Vec<LayerTrace>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn loss(&self, label: usize) -> f64 {
        cross_entropy(&self.logits, label)
    }

    pub fn predicted_class(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphModel {
    pub arch: Arch,
    pub vocab_size: usize,
    pub n_classes: usize,
    pub seed: u64,
    pub params: Vec<f64>,
    layout: Layout,
}

// Layout is derived from (arch, vocab_size, n_classes); compare the rest.
impl PartialEq for Layout {
    fn eq(&self, _: &Layout) -> bool {
        true
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl GraphModel {
    /// Fresh model with seeded initialization: matrices
    /// uniform(±sqrt(1/fan_in)), biases zero, embedding rows
    /// normal(0, 1/sqrt(d/2)), layer-norm gain 1 / shift 0.
    pub fn new(arch: Arch, vocab_size: usize, n_classes: usize, seed: u64) -> Result<GraphModel> {
        arch.validate()?;
        if n_classes < 2 {
            return Err(X2gError::Config(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        let layout = Layout::new(&arch, vocab_size, n_classes);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = layout.half;
        let embed_std = 1.0 / (half as f64).sqrt();
        for v in &mut params[layout.embed.clone()] {
            *v = embed_std * box_muller(&mut rng);
        }
        // value projection has fan_in = 1
        for v in &mut params[layout.value_w.clone()] {
            *v = rng.gen_range(-1.0..1.0);
        }
        let d = arch.d;
        let bound = (1.0 / d as f64).sqrt();
        for l in &layout.layers {
            for v in &mut params[l.w.clone()] {
                *v = rng.gen_range(-bound..bound);
            }
            if let Some(wn) = &l.w_nbr {
                for v in &mut params[wn.clone()] {
                    *v = rng.gen_range(-bound..bound);
                }
            }
            if let Some(g) = &l.ln_gamma {
                for v in &mut params[g.clone()] {
                    *v = 1.0;
                }
            }
        }
        for v in &mut params[layout.head_w.clone()] {
            *v = rng.gen_range(-bound..bound);
        }
        Ok(GraphModel {
            arch,
            vocab_size,
            n_classes,
            seed,
            params,
            layout,
        })
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    /// Rebuilds the layout for a parameter buffer loaded from a checkpoint.
    pub fn from_parts(
        arch: Arch,
        vocab_size: usize,
        n_classes: usize,
        seed: u64,
        params: Vec<f64>,
    ) -> Result<GraphModel> {
        arch.validate()?;
        let layout = Layout::new(&arch, vocab_size, n_classes);
        if params.len() != layout.total {
            return Err(X2gError::Format(format!(
                "parameter buffer has {} values, architecture needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(GraphModel {
            arch,
            vocab_size,
            n_classes,
            seed,
            params,
            layout,
        })
    }

    fn check_graph(&self, g: &SampleGraph) -> Result<()> {
        if g.vocab_size as usize != self.vocab_size {
            return Err(X2gError::VocabMismatch(format!(
                "graph vocab_size {} != model vocab_size {}",
                g.vocab_size, self.vocab_size
            )));
        }
        if let Some(&j) = g.node_index.iter().find(|&&j| j as usize >= self.vocab_size) {
            return Err(X2gError::VocabMismatch(format!(
                "node index {} out of range for vocabulary of {}",
                j, self.vocab_size
            )));
        }
        Ok(())
    }

    /// Node projection: row k = [embed[idx_k], value_w * val_k + value_b].
    /// With id_indexing off the embedding half is zeroed, width preserved.
    pub fn project_nodes(&self, g: &SampleGraph) -> Result<Mat> {
        self.check_graph(g)?;
        let d = self.arch.d;
        let half = self.layout.half;
        let embed = &self.params[self.layout.embed.clone()];
        let value_w = &self.params[self.layout.value_w.clone()];
        let zero_b = vec![0.0; half];
        let value_b: &[f64] = match &self.layout.value_b {
            Some(r) => &self.params[r.clone()],
            None => &zero_b,
        };
        let mut h = Mat::zeros(g.n_nodes(), d);
        for (k, (&j, &v)) in g.node_index.iter().zip(&g.node_value).enumerate() {
            let row = h.row_mut(k);
            if self.arch.id_indexing {
                let j = j as usize;
                row[..half].copy_from_slice(&embed[j * half..(j + 1) * half]);
            }
            for t in 0..half {
                row[half + t] = value_w[t] * v + value_b[t];
            }
        }
        Ok(h)
    }

    /// Full forward pass recording intermediates; `edge_weights` (when
    /// given, one gate per undirected edge) scales message terms and is
    /// what the explainer optimizes.
    pub fn forward_traced(
        &self,
        g: &SampleGraph,
        edge_weights: Option<&[f64]>,
    ) -> Result<ForwardTrace> {
        let h0 = self.project_nodes(g)?;
        if let Some(w) = edge_weights {
            if w.len() != g.n_edges() {
                return Err(X2gError::Config(format!(
                    "edge weight vector length {} != edge count {}",
                    w.len(),
                    g.n_edges()
                )));
            }
        }
        let adj = Adjacency::build(g.n_nodes(), &g.edges);
        let d = self.arch.d;
        let mut layers = Vec::with_capacity(self.arch.n_layers);
        let mut h = h0.clone();
        for l in &self.layout.layers {
            let input = h.clone();
            let agg = match self.arch.layer_kind {
                LayerKind::Gcn => gcn_aggregate(&input, &adj, edge_weights),
                LayerKind::MeanAgg => mean_neighbor_aggregate(&input, &adj, edge_weights),
            };
            let w = &self.params[l.w.clone()];
            let b = &self.params[l.b.clone()];
            let mut z = match self.arch.layer_kind {
                LayerKind::Gcn => matmul(&agg, w, d),
                LayerKind::MeanAgg => {
                    let mut z = matmul(&input, w, d);
                    let w_nbr = &self.params[l.w_nbr.as_ref().unwrap().clone()];
                    let zn = matmul(&agg, w_nbr, d);
                    for (zv, nv) in z.data.iter_mut().zip(&zn.data) {
                        *zv += nv;
                    }
                    z
                }
            };
            for i in 0..z.rows {
                for (zv, &bv) in z.row_mut(i).iter_mut().zip(b) {
                    *zv += bv;
                }
            }
            let (ln_zhat, ln_inv_std, act_in) = if self.arch.norm == Norm::Layer {
                let gamma = &self.params[l.ln_gamma.as_ref().unwrap().clone()];
                let beta = &self.params[l.ln_beta.as_ref().unwrap().clone()];
                let mut zhat = Mat::zeros(z.rows, d);
                let mut inv_std = vec![0.0; z.rows];
                let mut y = Mat::zeros(z.rows, d);
                for i in 0..z.rows {
                    let row = z.row(i);
                    let mean = row.iter().sum::<f64>() / d as f64;
                    let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d as f64;
                    let istd = 1.0 / (var + LN_EPS).sqrt();
                    inv_std[i] = istd;
                    for t in 0..d {
                        let zh = (row[t] - mean) * istd;
                        zhat.row_mut(i)[t] = zh;
                        y.row_mut(i)[t] = gamma[t] * zh + beta[t];
                    }
                }
                (Some(zhat), Some(inv_std), y)
            } else {
                (None, None, z.clone())
            };
            let mut out = act_in.clone();
            for v in &mut out.data {
                *v = activate(self.arch.activation, *v);
            }
            layers.push(LayerTrace {
                input,
                agg,
                ln_zhat,
                ln_inv_std,
                act_in,
            });
            h = out;
        }
        let pooled = mean_pool(&h);
        let head_w = &self.params[self.layout.head_w.clone()];
        let head_b = &self.params[self.layout.head_b.clone()];
        let mut logits = head_b.to_vec();
        for (k, &pv) in pooled.iter().enumerate() {
            if pv == 0.0 {
                continue;
            }
            for c in 0..self.n_classes {
                logits[c] += pv * head_w[k * self.n_classes + c];
            }
        }
        let probs = softmax(&logits);
        Ok(ForwardTrace {
            adj,
            h0,
            layers,
            pooled,
            logits,
            probs,
        })
    }

    /// Inference-only forward.
    pub fn forward(&self, g: &SampleGraph) -> Result<(Vec<f64>, Vec<f64>)> {
        let t = self.forward_traced(g, None)?;
        Ok((t.logits, t.probs))
    }

    /// Reverse-mode gradients of the cross-entropy loss at `label` w.r.t.
    /// every parameter, and optionally w.r.t. the per-edge gates.
    pub fn backward(
        &self,
        g: &SampleGraph,
        trace: &ForwardTrace,
        label: usize,
        edge_weights: Option<&[f64]>,
        want_edge_grads: bool,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let d = self.arch.d;
        let half = self.layout.half;
        let n = trace.h0.rows;
        let mut grads = vec![0.0; self.params.len()];
        let mut edge_grads = want_edge_grads.then(|| vec![0.0; g.n_edges()]);

        // softmax-CE: dlogits = p - onehot
        let mut dlogits = trace.probs.clone();
        dlogits[label] -= 1.0;

        let head_w = &self.params[self.layout.head_w.clone()];
        {
            let gw = self.layout.head_w.clone();
            for (k, &pv) in trace.pooled.iter().enumerate() {
                for c in 0..self.n_classes {
                    grads[gw.start + k * self.n_classes + c] += pv * dlogits[c];
                }
            }
            let gb = self.layout.head_b.clone();
            for (c, &dl) in dlogits.iter().enumerate() {
                grads[gb.start + c] += dl;
            }
        }
        if n == 0 {
            return (grads, edge_grads);
        }

        // d pooled, then spread over nodes (mean pool)
        let mut dh = Mat::zeros(n, d);
        for k in 0..d {
            let dp: f64 = (0..self.n_classes)
                .map(|c| head_w[k * self.n_classes + c] * dlogits[c])
                .sum();
            let per_node = dp / n as f64;
            for i in 0..n {
                dh.row_mut(i)[k] = per_node;
            }
        }

        for (li, l) in self.layout.layers.iter().enumerate().rev() {
            let t = &trace.layers[li];
            // activation
            let mut dy = dh;
            for (g_, &x) in dy.data.iter_mut().zip(&t.act_in.data) {
                *g_ *= activate_grad(self.arch.activation, x);
            }
            // layer norm
            let dz = if self.arch.norm == Norm::Layer {
                let gamma = &self.params[l.ln_gamma.as_ref().unwrap().clone()];
                let zhat = t.ln_zhat.as_ref().unwrap();
                let inv_std = t.ln_inv_std.as_ref().unwrap();
                let gg = l.ln_gamma.as_ref().unwrap().clone();
                let gb = l.ln_beta.as_ref().unwrap().clone();
                let mut dz = Mat::zeros(dy.rows, d);
                for i in 0..dy.rows {
                    let dyr = dy.row(i);
                    let zr = zhat.row(i);
                    for tix in 0..d {
                        grads[gg.start + tix] += dyr[tix] * zr[tix];
                        grads[gb.start + tix] += dyr[tix];
                    }
                    let dzhat: Vec<f64> = (0..d).map(|tix| dyr[tix] * gamma[tix]).collect();
                    let mean_dzhat = dzhat.iter().sum::<f64>() / d as f64;
                    let mean_dzhat_zhat =
                        dzhat.iter().zip(zr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    let istd = inv_std[i];
                    for tix in 0..d {
                        dz.row_mut(i)[tix] =
                            istd * (dzhat[tix] - mean_dzhat - zr[tix] * mean_dzhat_zhat);
                    }
                }
                dz
            } else {
                dy
            };
            // bias
            {
                let gb = l.b.clone();
                for i in 0..dz.rows {
                    for (tix, &v) in dz.row(i).iter().enumerate() {
                        grads[gb.start + tix] += v;
                    }
                }
            }
            let w = &self.params[l.w.clone()];
            match self.arch.layer_kind {
                LayerKind::Gcn => {
                    accumulate_at_b(&t.agg, &dz, &mut grads[l.w.clone()]);
                    let dm = matmul_bt(&dz, w, d);
                    if let Some(eg) = edge_grads.as_mut() {
                        for (e, &(a, b)) in trace.adj.edges.iter().enumerate() {
                            let c = trace.adj.gcn_edge[e];
                            eg[e] += c * (dot(dm.row(a), t.input.row(b))
                                + dot(dm.row(b), t.input.row(a)));
                        }
                    }
                    // A_hat is symmetric: dH = A_hat(dM) with the same gates
                    dh = gcn_aggregate(&dm, &trace.adj, edge_weights);
                }
                LayerKind::MeanAgg => {
                    accumulate_at_b(&t.input, &dz, &mut grads[l.w.clone()]);
                    let wn_range = l.w_nbr.as_ref().unwrap().clone();
                    accumulate_at_b(&t.agg, &dz, &mut grads[wn_range.clone()]);
                    let w_nbr = &self.params[wn_range];
                    let mut dhin = matmul_bt(&dz, w, d);
                    let dn = matmul_bt(&dz, w_nbr, d);
                    for (e, &(a, b)) in trace.adj.edges.iter().enumerate() {
                        let wgt = edge_weights.map_or(1.0, |m| m[e]);
                        let ca = adjacency_inv(&trace.adj, a);
                        let cb = adjacency_inv(&trace.adj, b);
                        for cix in 0..d {
                            dhin.data[b * d + cix] += wgt * dn.data[a * d + cix] * ca;
                            dhin.data[a * d + cix] += wgt * dn.data[b * d + cix] * cb;
                        }
                        if let Some(eg) = edge_grads.as_mut() {
                            eg[e] += ca * dot(dn.row(a), t.input.row(b))
                                + cb * dot(dn.row(b), t.input.row(a));
                        }
                    }
                    dh = dhin;
                }
            }
        }

        // projection
        let value_w = self.layout.value_w.clone();
        for (k, (&j, &v)) in g.node_index.iter().zip(&g.node_value).enumerate() {
            let row = dh.row(k);
            if self.arch.id_indexing {
                let j = j as usize;
                let er = self.layout.embed.start + j * half;
                for t in 0..half {
                    grads[er + t] += row[t];
                }
            }
            for t in 0..half {
                grads[value_w.start + t] += row[half + t] * v;
            }
            if let Some(vb) = &self.layout.value_b {
                for t in 0..half {
                    grads[vb.start + t] += row[half + t];
                }
            }
        }
        (grads, edge_grads)
    }

    /// Convenience: loss and parameter gradients in one call.
    pub fn loss_and_grad(&self, g: &SampleGraph) -> Result<(f64, Vec<f64>)> {
        let trace = self.forward_traced(g, None)?;
        let loss = trace.loss(g.label as usize);
        let (grads, _) = self.backward(g, &trace, g.label as usize, None, false);
        Ok((loss, grads))
    }
}

fn adjacency_inv(adj: &Adjacency, node: usize) -> f64 {
    1.0 / adj.nbr_count[node]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convert::SampleGraph;

    fn graph(node_index: Vec<u32>, node_value: Vec<f64>, edges: Vec<(u32, u32)>) -> SampleGraph {
        SampleGraph {
            vocab_size: node_index.iter().copied().max().map_or(1, |m| m + 1),
            label: 0,
            node_index,
            node_value,
            edges,
        }
    }

    fn base_arch() -> Arch {
        Arch {
            layer_kind: LayerKind::Gcn,
            n_layers: 1,
            d: 4,
            activation: Activation::Relu,
            norm: Norm::None,
            id_indexing: true,
            value_bias: true,
        }
    }

    #[test]
    fn project_nodes_definition() {
        let g = graph(vec![0], vec![1.0], vec![]);
        let mut model = GraphModel::new(base_arch(), 1, 2, 0).unwrap();
        // embed row [a,b] = [0.1, 0.2], value_w [w1,w2] = [3,4], value_b [c1,c2] = [5,6]
        model.params[model.layout.embed.clone()].copy_from_slice(&[0.1, 0.2]);
        model.params[model.layout.value_w.clone()].copy_from_slice(&[3.0, 4.0]);
        let vb = model.layout.value_b.clone().unwrap();
        model.params[vb].copy_from_slice(&[5.0, 6.0]);
        let h = model.project_nodes(&g).unwrap();
        assert_eq!(h.row(0), &[0.1, 0.2, 8.0, 10.0]);

        let mut off = model.clone();
        off.arch.id_indexing = false;
        let h = off.project_nodes(&g).unwrap();
        assert_eq!(h.row(0), &[0.0, 0.0, 8.0, 10.0]);
    }

    #[test]
    fn project_zero_node_graph() {
        let g = graph(vec![], vec![], vec![]);
        let model = GraphModel::new(base_arch(), 1, 2, 0).unwrap();
        let h = model.project_nodes(&g).unwrap();
        assert_eq!(h.rows, 0);
        assert_eq!(h.cols, 4);
    }

    #[test]
    fn project_index_out_of_range() {
        let mut g = graph(vec![5], vec![1.0], vec![]);
        g.vocab_size = 1;
        let model = GraphModel::new(base_arch(), 1, 2, 0).unwrap();
        assert!(model.project_nodes(&g).is_err());
    }

    #[test]
    fn gcn_layer_isolated_node_identity() {
        // degree-1 self loop: A_hat weight is 1, identity W passes input through
        let adj = Adjacency::build(1, &[]);
        let h = Mat {
            rows: 1,
            cols: 2,
            data: vec![0.3, -0.7],
        };
        let w = vec![1.0, 0.0, 0.0, 1.0];
        let b = vec![0.0, 0.0];
        let out = gcn_layer(&h, &adj, &w, &b, None);
        assert_eq!(out.data, h.data);
    }

    #[test]
    fn gcn_layer_single_edge_hand_value() {
        // two nodes, one edge: A_hat = [[1/2, 1/2], [1/2, 1/2]]
        let adj = Adjacency::build(2, &[(0, 1)]);
        let h = Mat {
            rows: 2,
            cols: 1,
            data: vec![1.0, 3.0],
        };
        let out = gcn_layer(&h, &adj, &[1.0], &[0.0], None);
        assert_eq!(out.data, vec![2.0, 2.0]);
    }

    #[test]
    fn gcn_layer_chain_matches_dense_oracle() {
        // 3-node chain 0-1-2; dense D^{-1/2}(A+I)D^{-1/2} oracle
        let n = 3;
        let edges = [(0u32, 1u32), (1, 2)];
        let mut a = vec![vec![0.0; n]; n];
        for &(u, v) in &edges {
            a[u as usize][v as usize] = 1.0;
            a[v as usize][u as usize] = 1.0;
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += 1.0;
        }
        let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
        let mut a_hat = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                a_hat[i][j] = a[i][j] / (deg[i] * deg[j]).sqrt();
            }
        }
        let h = Mat {
            rows: 3,
            cols: 1,
            data: vec![1.0, 0.0, 0.0],
        };
        let expected: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a_hat[i][j] * h.data[j]).sum())
            .collect();
        let adj = Adjacency::build(3, &edges);
        let out = gcn_layer(&h, &adj, &[1.0], &[0.0], None);
        for (o, e) in out.data.iter().zip(&expected) {
            assert!((o - e).abs() < 1e-12, "{o} vs {e}");
        }
    }

    #[test]
    fn mean_agg_layer_cases() {
        // isolated node: neighbor term zero
        let adj = Adjacency::build(1, &[]);
        let h = Mat {
            rows: 1,
            cols: 1,
            data: vec![2.0],
        };
        let out = mean_agg_layer(&h, &adj, &[1.0], &[1.0], &[0.5], None);
        assert_eq!(out.data, vec![2.5]);

        // star center with neighbors [2], [4], identity weights: self + mean = center + 3
        let adj = Adjacency::build(3, &[(0, 1), (0, 2)]);
        let h = Mat {
            rows: 3,
            cols: 1,
            data: vec![1.0, 2.0, 4.0],
        };
        let out = mean_agg_layer(&h, &adj, &[1.0], &[1.0], &[0.0], None);
        assert_eq!(out.data[0], 1.0 + 3.0);

        // symmetric pair with equal features -> equal outputs
        let adj = Adjacency::build(2, &[(0, 1)]);
        let h = Mat {
            rows: 2,
            cols: 1,
            data: vec![5.0, 5.0],
        };
        let out = mean_agg_layer(&h, &adj, &[0.3], &[0.7], &[0.1], None);
        assert_eq!(out.data[0], out.data[1]);
    }

    #[test]
    fn mean_pool_cases() {
        let h = Mat {
            rows: 2,
            cols: 2,
            data: vec![1.0, 3.0, 3.0, 5.0],
        };
        assert_eq!(mean_pool(&h), vec![2.0, 4.0]);
        let single = Mat {
            rows: 1,
            cols: 2,
            data: vec![7.0, -1.0],
        };
        assert_eq!(mean_pool(&single), vec![7.0, -1.0]);
        assert_eq!(mean_pool(&Mat::zeros(0, 3)), vec![0.0; 3]);
    }

    #[test]
    fn forward_zero_params_uniform() {
        let g = graph(vec![0, 1], vec![1.0, 2.0], vec![(0, 1)]);
        let mut model = GraphModel::new(base_arch(), 2, 4, 0).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let (_, probs) = model.forward(&g).unwrap();
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_node_order_invariant() {
        let mut arch = base_arch();
        arch.n_layers = 2;
        arch.activation = Activation::Gelu;
        let model = GraphModel::new(arch, 5, 3, 42).unwrap();
        let g = SampleGraph {
            node_index: vec![0, 2, 4],
            node_value: vec![0.5, -1.0, 2.0],
            edges: vec![(0, 1), (1, 2)],
            label: 0,
            vocab_size: 5,
        };
        // permuted storage order with remapped edges: order [2,0,1] of nodes
        let permuted = SampleGraph {
            node_index: vec![4, 0, 2],
            node_value: vec![2.0, 0.5, -1.0],
            edges: vec![(1, 2), (2, 0)],
            label: 0,
            vocab_size: 5,
        };
        let (l1, _) = model.forward(&g).unwrap();
        let (l2, _) = model.forward(&permuted).unwrap();
        for (a, b) in l1.iter().zip(&l2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_single_node_hand_trace() {
        // d=2 model, handset params, one node (j=0, v=2.0), no edges
        let arch = Arch {
            layer_kind: LayerKind::Gcn,
            n_layers: 1,
            d: 2,
            activation: Activation::Relu,
            norm: Norm::None,
            id_indexing: true,
            value_bias: false,
        };
        let mut model = GraphModel::new(arch, 1, 2, 0).unwrap();
        model.params[model.layout.embed.clone()].copy_from_slice(&[0.5]);
        model.params[model.layout.value_w.clone()].copy_from_slice(&[1.5]);
        // layer W identity, b zero
        model.params[model.layout.layers[0].w.clone()].copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
        model.params[model.layout.layers[0].b.clone()].copy_from_slice(&[0.0, 0.0]);
        // head: W = [[1, -1], [2, 0]], b = [0.25, 0]
        model.params[model.layout.head_w.clone()].copy_from_slice(&[1.0, -1.0, 2.0, 0.0]);
        model.params[model.layout.head_b.clone()].copy_from_slice(&[0.25, 0.0]);
        let g = graph(vec![0], vec![2.0], vec![]);
        let (logits, _) = model.forward(&g).unwrap();
        // h0 = [0.5, 3.0]; gcn isolated = identity; relu keeps it; pool = [0.5, 3.0]
        // logits = [0.5*1 + 3*2 + 0.25, 0.5*(-1) + 0] = [6.75, -0.5]
        assert!((logits[0] - 6.75).abs() < 1e-12);
        assert!((logits[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_logit_head_bias_gradient() {
        let g = graph(vec![0, 1], vec![1.0, -1.0], vec![(0, 1)]);
        let mut model = GraphModel::new(base_arch(), 2, 4, 0).unwrap();
        model.params.iter_mut().for_each(|p| *p = 0.0);
        let trace = model.forward_traced(&g, None).unwrap();
        let (grads, _) = model.backward(&g, &trace, 2, None, false);
        let gb = model.layout.head_b.clone();
        let expected = [0.25, 0.25, -0.75, 0.25];
        for (c, e) in expected.iter().enumerate() {
            assert!((grads[gb.start + c] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_node_graph_grads() {
        let g = graph(vec![], vec![], vec![]);
        let model = GraphModel::new(base_arch(), 1, 2, 7).unwrap();
        let trace = model.forward_traced(&g, None).unwrap();
        let (grads, _) = model.backward(&g, &trace, 0, None, false);
        // everything except head bias is zero (pooled vector is zero)
        for r in [
            model.layout.embed.clone(),
            model.layout.value_w.clone(),
            model.layout.layers[0].w.clone(),
            model.layout.layers[0].b.clone(),
            model.layout.head_w.clone(),
        ] {
            assert!(grads[r].iter().all(|&g| g == 0.0));
        }
        let gb = model.layout.head_b.clone();
        assert!(grads[gb].iter().any(|&g| g != 0.0));
    }

    /// Central finite differences over every parameter.
    fn check_gradients(model: &GraphModel, g: &SampleGraph, label: usize) -> f64 {
        let trace = model.forward_traced(g, None).unwrap();
        let (grads, _) = model.backward(g, &trace, label, None, false);
        let mut m = model.clone();
        let eps = 1e-4;
        let mut max_rel = 0.0f64;
        for i in 0..m.params.len() {
            let orig = m.params[i];
            m.params[i] = orig + eps;
            let lp = m.forward_traced(g, None).unwrap().loss(label);
            m.params[i] = orig - eps;
            let lm = m.forward_traced(g, None).unwrap().loss(label);
            m.params[i] = orig;
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(grads[i].abs()).max(1e-6);
            max_rel = max_rel.max((fd - grads[i]).abs() / denom);
        }
        max_rel
    }

    #[test]
    fn gradients_match_finite_differences_all_variants() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for kind in [LayerKind::Gcn, LayerKind::MeanAgg] {
            for act in [Activation::Relu, Activation::Gelu] {
                for norm in [Norm::None, Norm::Layer] {
                    for id_indexing in [true, false] {
                        let arch = Arch {
                            layer_kind: kind,
                            n_layers: 2,
                            d: 4,
                            activation: act,
                            norm,
                            id_indexing,
                            value_bias: true,
                        };
                        let model = GraphModel::new(arch, 5, 3, rng.gen()).unwrap();
                        let g = SampleGraph {
                            node_index: vec![0, 1, 3, 4],
                            node_value: vec![0.7, -0.3, 1.1, 0.2],
                            edges: vec![(0, 1), (1, 2), (2, 3), (0, 3)],
                            label: 1,
                            vocab_size: 5,
                        };
                        let err = check_gradients(&model, &g, 1);
                        assert!(
                            err < 1e-3,
                            "kind={kind:?} act={act:?} norm={norm:?} id={id_indexing} err={err}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn edge_gradients_match_finite_differences() {
        for kind in [LayerKind::Gcn, LayerKind::MeanAgg] {
            let arch = Arch {
                layer_kind: kind,
                n_layers: 2,
                d: 4,
                activation: Activation::Gelu,
                norm: Norm::None,
                id_indexing: true,
                value_bias: true,
            };
            let model = GraphModel::new(arch, 4, 2, 5).unwrap();
            let g = SampleGraph {
                node_index: vec![0, 1, 2, 3],
                node_value: vec![0.5, -1.2, 0.8, 2.0],
                edges: vec![(0, 1), (1, 2), (2, 3)],
                label: 0,
                vocab_size: 4,
            };
            let weights = vec![0.8, 0.4, 0.6];
            let trace = model.forward_traced(&g, Some(&weights)).unwrap();
            let (_, eg) = model.backward(&g, &trace, 0, Some(&weights), true);
            let eg = eg.unwrap();
            let eps = 1e-5;
            for e in 0..weights.len() {
                let mut wp = weights.clone();
                wp[e] += eps;
                let lp = model.forward_traced(&g, Some(&wp)).unwrap().loss(0);
                wp[e] -= 2.0 * eps;
                let lm = model.forward_traced(&g, Some(&wp)).unwrap().loss(0);
                let fd = (lp - lm) / (2.0 * eps);
                assert!(
                    (fd - eg[e]).abs() < 1e-6 * fd.abs().max(1.0),
                    "kind={kind:?} edge {e}: fd={fd} got={}",
                    eg[e]
                );
            }
        }
    }

    #[test]
    fn gcn_constant_features_on_regular_graph() {
        // 4-cycle is 2-regular: A_hat preserves constant node features
        let arch = Arch {
            layer_kind: LayerKind::Gcn,
            n_layers: 1,
            d: 2,
            activation: Activation::Relu,
            norm: Norm::None,
            id_indexing: false,
            value_bias: true,
        };
        let model = GraphModel::new(arch, 4, 2, 3).unwrap();
        let g = SampleGraph {
            node_index: vec![0, 1, 2, 3],
            node_value: vec![1.5, 1.5, 1.5, 1.5],
            edges: vec![(0, 1), (1, 2), (2, 3), (0, 3)],
            label: 0,
            vocab_size: 4,
        };
        let trace = model.forward_traced(&g, None).unwrap();
        let out = &trace.layers[0].agg;
        for i in 1..4 {
            for c in 0..2 {
                assert!((out.data[i * 2 + c] - out.data[c]).abs() < 1e-12);
            }
        }
    }
}
