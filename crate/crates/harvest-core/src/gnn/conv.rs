//! Shared forward/backward for the two convolution-style layers.
//!
//! GCN aggregates with symmetric self-loop normalization
//! `c(i,j) = 1/√((d_i+1)(d_j+1))` over `N(i) ∪ {i}`; SAGE's "gcn" mean
//! aggregator uses `c(i,j) = 1/(d_i+1)`. Both stacks are
//! `agg → linear → ReLU → agg → linear`.

use super::{linear, relu, relu_grad, Dense, EgoGraph, HIDDEN_DIM, INPUT_DIM, OUTPUT_DIM};

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum AggKind {
    /// Symmetric normalized adjacency with self-loops (GCN). Self-adjoint.
    GcnSym,
    /// Row-normalized mean over neighbors plus self (SAGE 'gcn' aggregator).
    SageMean,
}

/// out[i] = Σ_{j ∈ N(i)∪{i}} c(i,j) · input[j]
fn aggregate(g: &EgoGraph, kind: AggKind, input: &Dense) -> Dense {
    let n = g.len();
    let mut out = Dense::zeros(n, input.cols);
    for i in 0..n {
        let di = (g.nbrs[i].len() + 1) as f64;
        let scale_self = match kind {
            AggKind::GcnSym => 1.0 / di,
            AggKind::SageMean => 1.0 / di,
        };
        axpy(out.row_mut(i), input.row(i), scale_self);
        for &j in &g.nbrs[i] {
            let c = match kind {
                AggKind::GcnSym => {
                    let dj = (g.nbrs[j].len() + 1) as f64;
                    1.0 / (di * dj).sqrt()
                }
                AggKind::SageMean => 1.0 / di,
            };
            axpy(out.row_mut(i), input.row(j), c);
        }
    }
    out
}

/// out[j] = Σ_i c(i,j) · input[i] — transpose of [`aggregate`]. For the
/// symmetric GCN operator this equals the forward aggregation.
fn aggregate_t(g: &EgoGraph, kind: AggKind, input: &Dense) -> Dense {
    match kind {
        AggKind::GcnSym => aggregate(g, kind, input),
        AggKind::SageMean => {
            let n = g.len();
            let mut out = Dense::zeros(n, input.cols);
            for i in 0..n {
                let c = 1.0 / ((g.nbrs[i].len() + 1) as f64);
                axpy(out.row_mut(i), input.row(i), c);
                for &j in &g.nbrs[i] {
                    axpy(out.row_mut(j), input.row(i), c);
                }
            }
            out
        }
    }
}

#[inline]
fn axpy(dst: &mut [f64], src: &[f64], c: f64) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// Parameter layout for GCN/SAGE: W1 (5×5), b1 (5), W2 (2×5), b2 (2),
/// all row-major (out × in).
pub(crate) const W1: std::ops::Range<usize> = 0..25;
pub(crate) const B1: std::ops::Range<usize> = 25..30;
pub(crate) const W2: std::ops::Range<usize> = 30..40;
pub(crate) const B2: std::ops::Range<usize> = 40..42;
pub(crate) const PARAM_LEN: usize = 42;

pub(crate) struct ConvCache {
    m1: Dense,
    z1: Dense,
    m2: Dense,
}

/// Two-layer forward pass; returns per-node logits and the intermediates
/// needed for the backward pass.
pub(crate) fn forward(
    params: &[f64],
    g: &EgoGraph,
    kind: AggKind,
) -> (Dense, ConvCache) {
    let x = Dense {
        rows: g.len(),
        cols: INPUT_DIM,
        a: g.x.as_flattened().to_vec(),
    };
    let m1 = aggregate(g, kind, &x);
    let z1 = linear(&m1, &params[W1], &params[B1], HIDDEN_DIM);
    let mut h1 = z1.clone();
    h1.a.iter_mut().for_each(|v| *v = relu(*v));
    let m2 = aggregate(g, kind, &h1);
    let logits = linear(&m2, &params[W2], &params[B2], OUTPUT_DIM);
    (logits, ConvCache { m1, z1, m2 })
}

/// Accumulates parameter gradients for upstream `dlogits` into `grad`.
pub(crate) fn backward(
    params: &[f64],
    g: &EgoGraph,
    kind: AggKind,
    cache: &ConvCache,
    dlogits: &Dense,
    grad: &mut [f64],
) {
    let n = g.len();
    // layer 2: logits = m2 · W2ᵀ + b2
    for i in 0..n {
        let d = dlogits.row(i);
        let m = cache.m2.row(i);
        for o in 0..OUTPUT_DIM {
            grad[B2][o] += d[o];
            for k in 0..HIDDEN_DIM {
                grad[W2][o * HIDDEN_DIM + k] += d[o] * m[k];
            }
        }
    }
    // dm2 = dlogits · W2, then back through aggregation and ReLU
    let w2 = &params[W2];
    let mut dm2 = Dense::zeros(n, HIDDEN_DIM);
    for i in 0..n {
        let d = dlogits.row(i);
        let out = dm2.row_mut(i);
        for o in 0..OUTPUT_DIM {
            for k in 0..HIDDEN_DIM {
                out[k] += d[o] * w2[o * HIDDEN_DIM + k];
            }
        }
    }
    let mut dz1 = aggregate_t(g, kind, &dm2);
    for (v, z) in dz1.a.iter_mut().zip(&cache.z1.a) {
        *v *= relu_grad(*z);
    }
    // layer 1: z1 = m1 · W1ᵀ + b1
    for i in 0..n {
        let d = dz1.row(i);
        let m = cache.m1.row(i);
        for o in 0..HIDDEN_DIM {
            grad[B1][o] += d[o];
            for k in 0..INPUT_DIM {
                grad[W1][o * INPUT_DIM + k] += d[o] * m[k];
            }
        }
    }
}

// ---------------------------------------------------------------------
// Candidate-rooted fast path.
//
// Training and frontier scoring only consume the candidate's logits, and
// in a 2-hop ego graph those depend on layer-1 states of the candidate's
// direct neighborhood only. Computing just those rows (and backpropagating
// only through them — the upstream gradient is zero everywhere else) is
// algebraically identical to the full pass and much cheaper. Equality with
// the full forward is asserted by tests.
// ---------------------------------------------------------------------

#[inline]
fn coeff(g: &EgoGraph, kind: AggKind, i: usize, j: usize) -> f64 {
    match kind {
        AggKind::GcnSym => {
            let di = (g.nbrs[i].len() + 1) as f64;
            let dj = (g.nbrs[j].len() + 1) as f64;
            1.0 / (di * dj).sqrt()
        }
        AggKind::SageMean => 1.0 / ((g.nbrs[i].len() + 1) as f64),
    }
}

/// Aggregated input row `Σ_{w ∈ N(u)∪{u}} c(u,w) x_w`.
#[inline]
fn agg_input_row(g: &EgoGraph, kind: AggKind, u: usize) -> [f64; INPUT_DIM] {
    let mut acc = [0.0; INPUT_DIM];
    let c = coeff(g, kind, u, u);
    for (a, &v) in acc.iter_mut().zip(&g.x[u]) {
        *a += c * v;
    }
    for &w in &g.nbrs[u] {
        let c = coeff(g, kind, u, w);
        for (a, &v) in acc.iter_mut().zip(&g.x[w]) {
            *a += c * v;
        }
    }
    acc
}

/// Logits of the candidate node only; equals the candidate row of the full
/// forward pass.
pub(crate) fn candidate_logits(params: &[f64], g: &EgoGraph, kind: AggKind) -> [f64; OUTPUT_DIM] {
    let cand = g.candidate;
    let w1 = &params[W1];
    let b1 = &params[B1];
    let w2 = &params[W2];
    let b2 = &params[B2];
    let mut m2 = [0.0; HIDDEN_DIM];
    for &u in g.nbrs[cand].iter().chain(std::iter::once(&cand)) {
        let m1 = agg_input_row(g, kind, u);
        let c = coeff(g, kind, cand, u);
        for (o, (wo, &bo)) in w1.chunks_exact(INPUT_DIM).zip(b1).enumerate() {
            let z: f64 = wo.iter().zip(&m1).map(|(w, v)| w * v).sum::<f64>() + bo;
            m2[o] += c * relu(z);
        }
    }
    let mut logits = [0.0; OUTPUT_DIM];
    for (lo, (wo, &bo)) in logits.iter_mut().zip(w2.chunks_exact(HIDDEN_DIM).zip(b2)) {
        *lo = wo.iter().zip(&m2).map(|(w, v)| w * v).sum::<f64>() + bo;
    }
    logits
}

/// Candidate cross-entropy with analytic gradients accumulated into `grad`;
/// touches only the rows the loss actually depends on.
pub(crate) fn candidate_loss_grad(
    params: &[f64],
    g: &EgoGraph,
    kind: AggKind,
    class: usize,
    grad: &mut [f64],
) -> f64 {
    let cand = g.candidate;
    let w1 = &params[W1];
    let b1 = &params[B1];
    let w2 = &params[W2];
    let b2 = &params[B2];
    let deg1 = g.nbrs[cand].len() + 1;
    let mut m1s: Vec<[f64; INPUT_DIM]> = Vec::with_capacity(deg1);
    let mut z1s: Vec<[f64; HIDDEN_DIM]> = Vec::with_capacity(deg1);
    let mut m2 = [0.0; HIDDEN_DIM];
    for &u in g.nbrs[cand].iter().chain(std::iter::once(&cand)) {
        let m1 = agg_input_row(g, kind, u);
        let mut z1 = [0.0; HIDDEN_DIM];
        for (zo, (wo, &bo)) in z1.iter_mut().zip(w1.chunks_exact(INPUT_DIM).zip(b1)) {
            *zo = wo.iter().zip(&m1).map(|(w, v)| w * v).sum::<f64>() + bo;
        }
        let c = coeff(g, kind, cand, u);
        for (mo, zo) in m2.iter_mut().zip(&z1) {
            *mo += c * relu(*zo);
        }
        m1s.push(m1);
        z1s.push(z1);
    }
    let mut z = [0.0; OUTPUT_DIM];
    for (lo, (wo, &bo)) in z.iter_mut().zip(w2.chunks_exact(HIDDEN_DIM).zip(b2)) {
        *lo = wo.iter().zip(&m2).map(|(w, v)| w * v).sum::<f64>() + bo;
    }
    let m = z[0].max(z[1]);
    let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
    let loss = lse - z[class];
    let mut dz = [0.0; OUTPUT_DIM];
    for o in 0..OUTPUT_DIM {
        dz[o] = (z[o] - lse).exp() - if o == class { 1.0 } else { 0.0 };
    }

    // layer 2
    let mut dm2 = [0.0; HIDDEN_DIM];
    for o in 0..OUTPUT_DIM {
        grad[B2][o] += dz[o];
        let wo = &w2[o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
        let go = &mut grad[W2][o * HIDDEN_DIM..(o + 1) * HIDDEN_DIM];
        for k in 0..HIDDEN_DIM {
            go[k] += dz[o] * m2[k];
            dm2[k] += dz[o] * wo[k];
        }
    }
    // layer 1, only the candidate's neighborhood rows
    for (t, &u) in g.nbrs[cand].iter().chain(std::iter::once(&cand)).enumerate() {
        let c = coeff(g, kind, cand, u);
        let z1 = &z1s[t];
        let m1 = &m1s[t];
        for o in 0..HIDDEN_DIM {
            let dz1 = c * dm2[o] * relu_grad(z1[o]);
            if dz1 == 0.0 {
                continue;
            }
            grad[B1][o] += dz1;
            let go = &mut grad[W1][o * INPUT_DIM..(o + 1) * INPUT_DIM];
            for k in 0..INPUT_DIM {
                go[k] += dz1 * m1[k];
            }
        }
    }
    loss
}
