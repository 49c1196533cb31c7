//! GNN model container: one flat f64 parameter vector plus a layout.
//!
//! Layouts (row-major, out × in):
//! - GCN/SAGE: `W1 (5×5) | b1 (5) | W2 (2×5) | b2 (2)` — 42 params.
//! - GAT with H heads: per layer-1 head `W (5×5) | b (5) | a (10)`, then per
//!   layer-2 head `W (2×5H) | b (2) | a (4)`; attention vectors store the
//!   left half (for the receiving node) first.
//!
//! Class 0 is "target": a crawled target neighbor is encoded (1,0) and the
//! score is the softmax probability of class 0 at the candidate node.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::conv::{self, AggKind};
use super::gat::{self, GatLayout};
use super::{Dense, EgoGraph, GnnKind, HIDDEN_DIM, INPUT_DIM, OUTPUT_DIM};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GnnModel {
    kind: GnnKind,
    heads: usize,
    params: Vec<f64>,
}

/// (range, fan_in, is_bias) for every tensor, in layout order.
fn tensor_table(kind: GnnKind, heads: usize) -> Vec<(Range<usize>, usize, bool)> {
    match kind {
        GnnKind::Gcn | GnnKind::Sage => vec![
            (conv::W1, INPUT_DIM, false),
            (conv::B1, INPUT_DIM, true),
            (conv::W2, HIDDEN_DIM, false),
            (conv::B2, HIDDEN_DIM, true),
        ],
        GnnKind::Gat => {
            let l = GatLayout { heads };
            let mut t = Vec::new();
            for h in 0..heads {
                t.push((l.l1_w(h), INPUT_DIM, false));
                t.push((l.l1_b(h), INPUT_DIM, true));
                t.push((l.l1_a(h), 2 * HIDDEN_DIM, false));
            }
            for h in 0..heads {
                t.push((l.l2_w(h), l.hidden_concat(), false));
                t.push((l.l2_b(h), l.hidden_concat(), true));
                t.push((l.l2_a(h), 2 * OUTPUT_DIM, false));
            }
            t
        }
    }
}

pub(crate) fn param_len(kind: GnnKind, heads: usize) -> usize {
    match kind {
        GnnKind::Gcn | GnnKind::Sage => conv::PARAM_LEN,
        GnnKind::Gat => GatLayout { heads }.param_len(),
    }
}

impl GnnModel {
    /// Uniform `[-1/√fan_in, 1/√fan_in]` weight init, zero biases.
    pub fn init(kind: GnnKind, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut params = vec![0.0; param_len(kind, heads)];
        for (range, fan_in, is_bias) in tensor_table(kind, heads) {
            if is_bias {
                continue;
            }
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Self { kind, heads, params }
    }

    pub fn kind(&self) -> GnnKind {
        self.kind
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn layer1_range(&self) -> Range<usize> {
        match self.kind {
            GnnKind::Gcn | GnnKind::Sage => 0..conv::W1.end + HIDDEN_DIM,
            GnnKind::Gat => GatLayout { heads: self.heads }.layer1_range(),
        }
    }

    /// Per-node 2-dim logits.
    pub fn forward(&self, g: &EgoGraph) -> Vec<[f64; OUTPUT_DIM]> {
        let logits = self.forward_dense(g);
        (0..logits.rows)
            .map(|i| [logits.row(i)[0], logits.row(i)[1]])
            .collect()
    }

    pub(crate) fn forward_dense(&self, g: &EgoGraph) -> Dense {
        match self.kind {
            GnnKind::Gcn => conv::forward(&self.params, g, AggKind::GcnSym).0,
            GnnKind::Sage => conv::forward(&self.params, g, AggKind::SageMean).0,
            GnnKind::Gat => gat::forward(&self.params, g, self.heads).0,
        }
    }

    /// Cross-entropy of the candidate node against `label`, with analytic
    /// parameter gradients over the candidate-rooted fast path (the one
    /// training uses).
    pub fn loss_grad(&self, g: &EgoGraph, label: bool) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.loss_grad_into(g, label, &mut grad);
        (loss, grad)
    }

    /// As [`GnnModel::loss_grad`] but accumulating into an existing buffer;
    /// returns the loss.
    pub(crate) fn loss_grad_into(&self, g: &EgoGraph, label: bool, grad: &mut [f64]) -> f64 {
        let class = usize::from(!label); // target -> class 0
        match self.kind {
            GnnKind::Gcn => {
                conv::candidate_loss_grad(&self.params, g, AggKind::GcnSym, class, grad)
            }
            GnnKind::Sage => {
                conv::candidate_loss_grad(&self.params, g, AggKind::SageMean, class, grad)
            }
            GnnKind::Gat => gat::candidate_loss_grad(&self.params, g, self.heads, class, grad),
        }
    }

    /// Reference loss and gradients computed through the full per-node
    /// forward/backward pass; slower, kept for verification against the
    /// candidate-rooted path.
    pub fn loss_grad_full(&self, g: &EgoGraph, label: bool) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let class = usize::from(!label);
        let loss = match self.kind {
            GnnKind::Gcn | GnnKind::Sage => {
                let agg = if self.kind == GnnKind::Gcn {
                    AggKind::GcnSym
                } else {
                    AggKind::SageMean
                };
                let (logits, cache) = conv::forward(&self.params, g, agg);
                let (loss, dlogits) = candidate_ce(&logits, g.candidate, class);
                conv::backward(&self.params, g, agg, &cache, &dlogits, &mut grad);
                loss
            }
            GnnKind::Gat => {
                let (logits, cache) = gat::forward(&self.params, g, self.heads);
                let (loss, dlogits) = candidate_ce(&logits, g.candidate, class);
                gat::backward(&self.params, g, self.heads, &cache, &dlogits, &mut grad);
                loss
            }
        };
        (loss, grad)
    }

    /// Candidate-row logits via the fast path; equal to the candidate row
    /// of [`GnnModel::forward`].
    pub fn candidate_logits(&self, g: &EgoGraph) -> [f64; OUTPUT_DIM] {
        match self.kind {
            GnnKind::Gcn => conv::candidate_logits(&self.params, g, AggKind::GcnSym),
            GnnKind::Sage => conv::candidate_logits(&self.params, g, AggKind::SageMean),
            GnnKind::Gat => gat::candidate_logits(&self.params, g, self.heads),
        }
    }

    /// Cross-entropy of the candidate node without gradients.
    pub fn loss(&self, g: &EgoGraph, label: bool) -> f64 {
        let z = self.candidate_logits(g);
        let class = usize::from(!label);
        log_sum_exp(&z) - z[class]
    }

    /// Softmax probability of the target class at the candidate node,
    /// strictly inside (0, 1).
    pub fn score(&self, g: &EgoGraph) -> f64 {
        let z = self.candidate_logits(g);
        1.0 / (1.0 + (z[1] - z[0]).exp())
    }

    /// Attention row sums of every (layer, head, node); GAT only, for
    /// invariant checks.
    pub fn attention_row_sums(&self, g: &EgoGraph) -> Option<Vec<f64>> {
        match self.kind {
            GnnKind::Gat => Some(gat::attention_row_sums(&self.params, g, self.heads)),
            _ => None,
        }
    }

    /// Portable text dump: kind, heads, parameter count, then one value per
    /// line in layout order (shortest round-trip decimal).
    pub fn save_text(&self) -> String {
        let mut out = String::new();
        out.push_str("harvest-gnn v1\n");
        out.push_str(&format!("kind {}\n", self.kind));
        out.push_str(&format!("heads {}\n", self.heads));
        out.push_str(&format!("params {}\n", self.params.len()));
        for p in &self.params {
            out.push_str(&format!("{p:?}\n"));
        }
        out
    }

    pub fn load_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::ModelParse(m.to_string());
        if lines.next() != Some("harvest-gnn v1") {
            return Err(bad("missing header"));
        }
        let kind = match lines.next().and_then(|l| l.strip_prefix("kind ")) {
            Some("gcn") => GnnKind::Gcn,
            Some("sage") => GnnKind::Sage,
            Some("gat") => GnnKind::Gat,
            _ => return Err(bad("bad kind line")),
        };
        let heads: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("heads "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad heads line"))?;
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("params "))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad params line"))?;
        if count != param_len(kind, heads) {
            return Err(bad("parameter count does not match layout"));
        }
        let params: Vec<f64> = lines
            .map(|l| l.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&format!("bad value: {e}")))?;
        if params.len() != count {
            return Err(bad("wrong number of values"));
        }
        Ok(Self { kind, heads, params })
    }
}

/// Mean-free cross-entropy at one node: returns the loss and a dlogits
/// matrix that is zero everywhere except the candidate row.
fn candidate_ce(logits: &Dense, candidate: usize, class: usize) -> (f64, Dense) {
    let z = logits.row(candidate);
    let lse = log_sum_exp(z);
    let loss = lse - z[class];
    let mut dlogits = Dense::zeros(logits.rows, OUTPUT_DIM);
    let drow = dlogits.row_mut(candidate);
    for o in 0..OUTPUT_DIM {
        drow[o] = (z[o] - lse).exp() - if o == class { 1.0 } else { 0.0 };
    }
    (loss, dlogits)
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln()
}

/// Softmax probability of the target class for the candidate of `g`.
pub fn gnn_score(model: &GnnModel, g: &EgoGraph) -> f64 {
    model.score(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{gat, GnnKind, INPUT_DIM};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_ego(n: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> EgoGraph {
        crate::gnn::train::tests::random_ego(n, edge_prob, rng)
    }

    // ------------------------------------------------------------------
    // Dense-matrix oracles, independent of the sparse message passing.
    // ------------------------------------------------------------------

    type Mat = Vec<Vec<f64>>;

    fn dense_adj_selfloops(g: &EgoGraph) -> Mat {
        let n = g.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = 1.0;
        }
        for &(u, v) in &g.edges {
            a[u][v] = 1.0;
            a[v][u] = 1.0;
        }
        a
    }

    fn matmul(a: &Mat, b: &Mat) -> Mat {
        let (n, k, m) = (a.len(), b.len(), b[0].len());
        let mut out = vec![vec![0.0; m]; n];
        for i in 0..n {
            for t in 0..k {
                for j in 0..m {
                    out[i][j] += a[i][t] * b[t][j];
                }
            }
        }
        out
    }

    fn weights_as_mat(w: &[f64], out_dim: usize, in_dim: usize) -> Mat {
        // stored row-major out x in; oracle wants in x out for X * W
        let mut m = vec![vec![0.0; out_dim]; in_dim];
        for o in 0..out_dim {
            for k in 0..in_dim {
                m[k][o] = w[o * in_dim + k];
            }
        }
        m
    }

    fn x_as_mat(g: &EgoGraph) -> Mat {
        g.x.iter().map(|r| r.to_vec()).collect()
    }

    fn add_bias(m: &mut Mat, b: &[f64]) {
        for row in m.iter_mut() {
            for (v, bb) in row.iter_mut().zip(b) {
                *v += bb;
            }
        }
    }

    fn relu_mat(m: &mut Mat) {
        for row in m.iter_mut() {
            for v in row.iter_mut() {
                *v = v.max(0.0);
            }
        }
    }

    fn dense_conv_oracle(model: &GnnModel, g: &EgoGraph, sage: bool) -> Mat {
        let n = g.len();
        let a = dense_adj_selfloops(g);
        let deg: Vec<f64> = (0..n).map(|i| a[i].iter().sum()).collect();
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if a[i][j] != 0.0 {
                    s[i][j] = if sage {
                        1.0 / deg[i]
                    } else {
                        1.0 / (deg[i] * deg[j]).sqrt()
                    };
                }
            }
        }
        let p = model.params();
        let w1 = weights_as_mat(&p[conv::W1], 5, 5);
        let w2 = weights_as_mat(&p[conv::W2], 2, 5);
        let mut h1 = matmul(&matmul(&s, &x_as_mat(g)), &w1);
        add_bias(&mut h1, &p[conv::B1]);
        relu_mat(&mut h1);
        let mut z2 = matmul(&matmul(&s, &h1), &w2);
        add_bias(&mut z2, &p[conv::B2]);
        z2
    }

    fn dense_gat_layer(
        params: &[f64],
        layout: &gat::GatLayout,
        g: &EgoGraph,
        x: &Mat,
        layer: usize,
    ) -> Mat {
        let n = g.len();
        let heads = layout.heads;
        let f_out = if layer == 1 { 5 } else { 2 };
        let adj = dense_adj_selfloops(g);
        let mut outs: Vec<Mat> = Vec::new();
        for h in 0..heads {
            let (wr, br, ar) = if layer == 1 {
                (layout.l1_w(h), layout.l1_b(h), layout.l1_a(h))
            } else {
                (layout.l2_w(h), layout.l2_b(h), layout.l2_a(h))
            };
            let w = weights_as_mat(&params[wr], f_out, x[0].len());
            let gmat = matmul(x, &w);
            let a = &params[ar];
            let (al, arr) = a.split_at(f_out);
            let mut out = vec![vec![0.0; f_out]; n];
            for i in 0..n {
                let pi: f64 = al.iter().zip(&gmat[i]).map(|(a, v)| a * v).sum();
                let mut weights = Vec::new();
                for j in 0..n {
                    if adj[i][j] != 0.0 {
                        let qj: f64 = arr.iter().zip(&gmat[j]).map(|(a, v)| a * v).sum();
                        let s = pi + qj;
                        let e = if s >= 0.0 { s } else { 0.2 * s };
                        weights.push((j, e));
                    }
                }
                let mx = weights.iter().map(|&(_, e)| e).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = weights.iter().map(|&(_, e)| (e - mx).exp()).sum();
                for &(j, e) in &weights {
                    let alpha = (e - mx).exp() / z;
                    for o in 0..f_out {
                        out[i][o] += alpha * gmat[j][o];
                    }
                }
                for o in 0..f_out {
                    out[i][o] += params[br.clone()][o];
                }
            }
            outs.push(out);
        }
        if layer == 1 {
            let mut cat = vec![vec![0.0; f_out * heads]; n];
            for (h, out) in outs.iter().enumerate() {
                for i in 0..n {
                    for o in 0..f_out {
                        cat[i][h * f_out + o] = out[i][o];
                    }
                }
            }
            cat
        } else {
            let mut mean = vec![vec![0.0; f_out]; n];
            for out in &outs {
                for i in 0..n {
                    for o in 0..f_out {
                        mean[i][o] += out[i][o] / heads as f64;
                    }
                }
            }
            mean
        }
    }

    fn dense_gat_oracle(model: &GnnModel, g: &EgoGraph) -> Mat {
        let layout = gat::GatLayout {
            heads: model.heads(),
        };
        let mut h1 = dense_gat_layer(model.params(), &layout, g, &x_as_mat(g), 1);
        relu_mat(&mut h1);
        dense_gat_layer(model.params(), &layout, g, &h1, 2)
    }

    fn assert_logits_match(model: &GnnModel, g: &EgoGraph, oracle: &Mat, tol: f64) {
        let got = model.forward(g);
        for i in 0..g.len() {
            for o in 0..2 {
                assert!(
                    (got[i][o] - oracle[i][o]).abs() <= tol,
                    "node {i} logit {o}: {} vs {}",
                    got[i][o],
                    oracle[i][o]
                );
            }
        }
    }

    #[test]
    fn sparse_forward_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..20 {
            let n = 2 + trial % 8;
            let g = random_ego(n, 0.5, &mut rng);
            let gcn = GnnModel::init(GnnKind::Gcn, 1, &mut rng);
            assert_logits_match(&gcn, &g, &dense_conv_oracle(&gcn, &g, false), 1e-9);
            let sage = GnnModel::init(GnnKind::Sage, 1, &mut rng);
            assert_logits_match(&sage, &g, &dense_conv_oracle(&sage, &g, true), 1e-9);
            let gat = GnnModel::init(GnnKind::Gat, 3, &mut rng);
            assert_logits_match(&gat, &g, &dense_gat_oracle(&gat, &g), 1e-9);
        }
    }

    #[test]
    fn single_node_identity_gcn_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = GnnModel::init(GnnKind::Gcn, 1, &mut rng);
        model.params_mut().fill(0.0);
        for k in 0..5 {
            model.params_mut()[conv::W1][k * INPUT_DIM + k] = 1.0; // W1 = I
        }
        model.params_mut()[conv::W2][0] = 1.0; // logits = (h1[0], h1[1])
        model.params_mut()[conv::W2][HIDDEN_DIM + 1] = 1.0;
        let mut g = random_ego(1, 0.0, &mut rng);
        g.x[0] = [1.0, 0.0, 0.0, 0.0, 0.0];
        let logits = model.forward(&g);
        assert!((logits[0][0] - 1.0).abs() < 1e-15);
        assert!(logits[0][1].abs() < 1e-15);
    }

    #[test]
    fn automorphic_nodes_get_identical_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // two connected nodes with identical inputs
        let mut g = random_ego(2, 0.0, &mut rng);
        g.edges = vec![(0, 1)];
        g.nbrs = vec![vec![1], vec![0]];
        g.x[1] = g.x[0];
        for (kind, heads) in [(GnnKind::Gcn, 1), (GnnKind::Sage, 1), (GnnKind::Gat, 3)] {
            let model = GnnModel::init(kind, heads, &mut rng);
            let l = model.forward(&g);
            assert!((l[0][0] - l[1][0]).abs() < 1e-12 && (l[0][1] - l[1][1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sage_isolated_node_is_a_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_ego(1, 0.0, &mut rng);
        let model = GnnModel::init(GnnKind::Sage, 1, &mut rng);
        let p = model.params();
        // by hand: relu(W1 x + b1), then W2 h + b2
        let mut h = [0.0; 5];
        for o in 0..5 {
            h[o] = (0..5).map(|k| p[conv::W1][o * 5 + k] * g.x[0][k]).sum::<f64>()
                + p[conv::B1][o];
            h[o] = h[o].max(0.0);
        }
        let mut z = [0.0; 2];
        for o in 0..2 {
            z[o] = (0..5).map(|k| p[conv::W2][o * 5 + k] * h[k]).sum::<f64>() + p[conv::B2][o];
        }
        let got = model.forward(&g)[0];
        assert!((got[0] - z[0]).abs() < 1e-12 && (got[1] - z[1]).abs() < 1e-12);
    }

    #[test]
    fn gat_attention_is_uniform_for_equal_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut g = random_ego(3, 0.0, &mut rng);
        g.edges = vec![(0, 1), (0, 2)];
        g.nbrs = vec![vec![1, 2], vec![0], vec![0]];
        let x0 = g.x[0];
        g.x = vec![x0; 3];
        let model = GnnModel::init(GnnKind::Gat, 3, &mut rng);
        let alphas = gat::attention_weights(model.params(), &g, 3);
        // layer-1 heads: node 0 attends over [1, 2, 0] uniformly
        for head in &alphas[..3] {
            for a in &head[0] {
                assert!((a - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let g = random_ego(6, 0.5, &mut rng);
            let model = GnnModel::init(GnnKind::Gat, 3, &mut rng);
            for s in model.attention_row_sums(&g).unwrap() {
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (kind, heads) in [(GnnKind::Gcn, 1), (GnnKind::Sage, 1), (GnnKind::Gat, 3)] {
            let g = random_ego(7, 0.4, &mut rng);
            let model = GnnModel::init(kind, heads, &mut rng);
            let base = model.forward(&g);
            // random permutation of local indices
            let mut perm: Vec<usize> = (0..g.len()).collect();
            for i in (1..perm.len()).rev() {
                let j = rng.random_range(0..=i);
                perm.swap(i, j);
            }
            let mut pg = g.clone();
            pg.candidate = perm[g.candidate];
            for (i, &pi) in perm.iter().enumerate() {
                pg.x[pi] = g.x[i];
                pg.nodes[pi] = g.nodes[i];
            }
            pg.edges = g
                .edges
                .iter()
                .map(|&(u, v)| {
                    let (a, b) = (perm[u], perm[v]);
                    (a.min(b), a.max(b))
                })
                .collect();
            let mut nbrs = vec![Vec::new(); g.len()];
            for &(u, v) in &pg.edges {
                nbrs[u].push(v);
                nbrs[v].push(u);
            }
            nbrs.iter_mut().for_each(|l| l.sort_unstable());
            pg.nbrs = nbrs;
            let permuted = model.forward(&pg);
            for i in 0..g.len() {
                for o in 0..2 {
                    assert!(
                        (base[i][o] - permuted[perm[i]][o]).abs() < 1e-9,
                        "{kind} node {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn score_is_calibrated_softmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = random_ego(1, 0.0, &mut rng);
        let mut model = GnnModel::init(GnnKind::Gcn, 1, &mut rng);
        model.params_mut().fill(0.0);
        // zero everything: logits (0,0) -> 0.5
        assert_eq!(model.score(&g), 0.5);
        // saturate: logits (+10, -10) at the target coordinate
        model.params_mut()[conv::B2][0] = 10.0;
        model.params_mut()[conv::B2][1] = -10.0;
        assert!((model.score(&g) - 1.0).abs() < 1e-8);
        // strictly inside (0,1) and normalized
        let mut m2 = GnnModel::init(GnnKind::Gat, 3, &mut rng);
        m2.params_mut()[0] = 5.0;
        let s = m2.score(&g);
        assert!(s > 0.0 && s < 1.0);
        let z = m2.forward(&g)[g.candidate];
        let p0 = 1.0 / (1.0 + (z[1] - z[0]).exp());
        let p1 = 1.0 / (1.0 + (z[0] - z[1]).exp());
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_path_matches_full_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..12 {
            let n = 1 + trial % 9;
            let g = random_ego(n, 0.5, &mut rng).with_label(trial % 2 == 0);
            let label = g.label.unwrap();
            for (kind, heads) in [(GnnKind::Gcn, 1), (GnnKind::Sage, 1), (GnnKind::Gat, 3)] {
                let model = GnnModel::init(kind, heads, &mut rng);
                // candidate logits equal the candidate row of the full pass
                let full = model.forward(&g)[g.candidate];
                let fast = model.candidate_logits(&g);
                assert!(
                    (full[0] - fast[0]).abs() <= 1e-12 && (full[1] - fast[1]).abs() <= 1e-12,
                    "{kind} logits {full:?} vs {fast:?}"
                );
                // losses and gradients agree between the two routes
                let (lf, gf) = model.loss_grad_full(&g, label);
                let (l, gr) = model.loss_grad(&g, label);
                assert!((lf - l).abs() <= 1e-12);
                for (a, b) in gf.iter().zip(&gr) {
                    assert!(
                        (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0),
                        "{kind}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for (kind, heads) in [(GnnKind::Gcn, 1), (GnnKind::Sage, 1), (GnnKind::Gat, 3)] {
            let model = GnnModel::init(kind, heads, &mut rng);
            let loaded = GnnModel::load_text(&model.save_text()).unwrap();
            assert_eq!(model, loaded);
        }
        assert!(GnnModel::load_text("nonsense").is_err());
    }
}
