//! Graph attention layers with multi-head attention.
//!
//! Per head h over `j ∈ N(i) ∪ {i}`:
//! `s_ij = aL·(W x_i) + aR·(W x_j)`, `α = softmax_j(LeakyReLU(s))`,
//! `out_i = Σ_j α_ij W x_j + b`. Layer 1 concatenates head outputs
//! (5 per head) and applies ReLU; layer 2 maps to 2 logits per head and
//! averages heads.
//!
//! Attention rows are stored flat (one slab per head, row offsets shared by
//! both layers); this code sits in the innermost training loop and per-node
//! allocations would dominate it.

use std::ops::Range;

use super::{leaky_relu, leaky_relu_grad, relu, relu_grad, Dense, EgoGraph};
use super::{HIDDEN_DIM, INPUT_DIM, OUTPUT_DIM};

const L1_PER_HEAD: usize = 25 + 5 + 10; // W 5x5, b 5, a 10
// Layer-2 sizes depend on the head count through the concatenated hidden
// dim, so everything below goes through GatLayout.

/// Offsets of every tensor in the flat parameter vector for a given head
/// count.
#[derive(Clone, Copy, Debug)]
pub(crate) struct GatLayout {
    pub heads: usize,
}

impl GatLayout {
    pub fn hidden_concat(&self) -> usize {
        HIDDEN_DIM * self.heads
    }

    fn l2_per_head(&self) -> usize {
        OUTPUT_DIM * self.hidden_concat() + OUTPUT_DIM + 2 * OUTPUT_DIM
    }

    pub fn param_len(&self) -> usize {
        self.heads * L1_PER_HEAD + self.heads * self.l2_per_head()
    }

    pub fn l1_w(&self, h: usize) -> Range<usize> {
        let b = h * L1_PER_HEAD;
        b..b + HIDDEN_DIM * INPUT_DIM
    }

    pub fn l1_b(&self, h: usize) -> Range<usize> {
        let b = h * L1_PER_HEAD + HIDDEN_DIM * INPUT_DIM;
        b..b + HIDDEN_DIM
    }

    pub fn l1_a(&self, h: usize) -> Range<usize> {
        let b = h * L1_PER_HEAD + HIDDEN_DIM * INPUT_DIM + HIDDEN_DIM;
        b..b + 2 * HIDDEN_DIM
    }

    fn l2_base(&self, h: usize) -> usize {
        self.heads * L1_PER_HEAD + h * self.l2_per_head()
    }

    pub fn l2_w(&self, h: usize) -> Range<usize> {
        let b = self.l2_base(h);
        b..b + OUTPUT_DIM * self.hidden_concat()
    }

    pub fn l2_b(&self, h: usize) -> Range<usize> {
        let b = self.l2_base(h) + OUTPUT_DIM * self.hidden_concat();
        b..b + OUTPUT_DIM
    }

    pub fn l2_a(&self, h: usize) -> Range<usize> {
        let b = self.l2_base(h) + OUTPUT_DIM * self.hidden_concat() + OUTPUT_DIM;
        b..b + 2 * OUTPUT_DIM
    }

    /// All layer-1 parameters (used to freeze the hidden layer in tests).
    pub fn layer1_range(&self) -> Range<usize> {
        0..self.heads * L1_PER_HEAD
    }
}

#[derive(Clone, Copy)]
enum Combine {
    Concat,
    Mean,
}

/// Per-head intermediates; attention rows live in one flat slab indexed by
/// the shared row offsets (`nbrs[i] ++ [i]` per node).
struct HeadCache {
    g: Dense,
    alpha: Vec<f64>,
    /// Raw scores before LeakyReLU.
    s: Vec<f64>,
}

pub(crate) struct GatCache {
    /// Row offsets into the attention slabs; row i covers
    /// `offsets[i]..offsets[i+1]`.
    offsets: Vec<usize>,
    layer1: Vec<HeadCache>,
    h1pre: Dense,
    h1: Dense,
    layer2: Vec<HeadCache>,
}

struct HeadParams<'a> {
    w: &'a [f64],
    b: &'a [f64],
    a_left: &'a [f64],
    a_right: &'a [f64],
}

fn row_offsets(g: &EgoGraph) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(g.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for nbrs in &g.nbrs {
        acc += nbrs.len() + 1;
        offsets.push(acc);
    }
    offsets
}

fn head_forward(
    hp: &HeadParams,
    g_nbrs: &[Vec<usize>],
    offsets: &[usize],
    x: &Dense,
    f_out: usize,
) -> (Dense, HeadCache) {
    let n = x.rows;
    // g = x Wᵀ
    let mut g = Dense::zeros(n, f_out);
    for (xi, gi) in x.a.chunks_exact(x.cols).zip(g.a.chunks_exact_mut(f_out)) {
        for (go, wo) in gi.iter_mut().zip(hp.w.chunks_exact(x.cols)) {
            *go = wo.iter().zip(xi).map(|(w, v)| w * v).sum();
        }
    }
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for ((gi, pi), qi) in g.a.chunks_exact(f_out).zip(&mut p).zip(&mut q) {
        *pi = hp.a_left.iter().zip(gi).map(|(a, v)| a * v).sum();
        *qi = hp.a_right.iter().zip(gi).map(|(a, v)| a * v).sum();
    }
    let total = offsets[n];
    let mut s = vec![0.0; total];
    let mut alpha = vec![0.0; total];
    let mut out = Dense::zeros(n, f_out);
    for i in 0..n {
        let base = offsets[i];
        let len = offsets[i + 1] - base;
        let mut max = f64::NEG_INFINITY;
        for t in 0..len {
            let j = if t + 1 == len { i } else { g_nbrs[i][t] };
            let raw = p[i] + q[j];
            s[base + t] = raw;
            let e = leaky_relu(raw);
            alpha[base + t] = e;
            if e > max {
                max = e;
            }
        }
        let mut sum = 0.0;
        for t in 0..len {
            let e = (alpha[base + t] - max).exp();
            alpha[base + t] = e;
            sum += e;
        }
        let inv = 1.0 / sum;
        let oi = out.row_mut(i);
        for t in 0..len {
            alpha[base + t] *= inv;
            let j = if t + 1 == len { i } else { g_nbrs[i][t] };
            let a = alpha[base + t];
            let gj = &g.a[j * f_out..(j + 1) * f_out];
            for o in 0..f_out {
                oi[o] += a * gj[o];
            }
        }
        for o in 0..f_out {
            oi[o] += hp.b[o];
        }
    }
    (out, HeadCache { g, alpha, s })
}

/// Backward through one head. Accumulates dW/db/da into the grad slices and
/// dx into `dx`. `dalpha` is caller-provided scratch of at least the widest
/// row.
#[allow(clippy::too_many_arguments)]
fn head_backward(
    hp: &HeadParams,
    g_nbrs: &[Vec<usize>],
    offsets: &[usize],
    x: &Dense,
    cache: &HeadCache,
    dhead: &Dense,
    dw: &mut [f64],
    db: &mut [f64],
    da: &mut [f64],
    dx: &mut Dense,
    dalpha: &mut Vec<f64>,
) {
    let n = x.rows;
    let f_out = cache.g.cols;
    let mut dg = Dense::zeros(n, f_out);
    let mut dp = vec![0.0; n];
    let mut dq = vec![0.0; n];
    for i in 0..n {
        let dout = dhead.row(i);
        for o in 0..f_out {
            db[o] += dout[o];
        }
        let base = offsets[i];
        let len = offsets[i + 1] - base;
        dalpha.clear();
        dalpha.resize(len, 0.0);
        let mut m = 0.0;
        for t in 0..len {
            let j = if t + 1 == len { i } else { g_nbrs[i][t] };
            let gj = cache.g.row(j);
            let a = cache.alpha[base + t];
            let d: f64 = dout.iter().zip(gj).map(|(d, v)| d * v).sum();
            dalpha[t] = d;
            m += a * d;
            let dgj = dg.row_mut(j);
            for o in 0..f_out {
                dgj[o] += a * dout[o];
            }
        }
        for t in 0..len {
            let j = if t + 1 == len { i } else { g_nbrs[i][t] };
            let a = cache.alpha[base + t];
            let ds = a * (dalpha[t] - m) * leaky_relu_grad(cache.s[base + t]);
            dp[i] += ds;
            dq[j] += ds;
        }
    }
    // attention vectors and their contribution to dg
    for u in 0..n {
        let gu = cache.g.row(u);
        for o in 0..f_out {
            da[o] += dp[u] * gu[o];
            da[f_out + o] += dq[u] * gu[o];
        }
        let dgu = dg.row_mut(u);
        for o in 0..f_out {
            dgu[o] += dp[u] * hp.a_left[o] + dq[u] * hp.a_right[o];
        }
    }
    // dW and dx through g = x Wᵀ
    for u in 0..n {
        let dgu = dg.row(u);
        let xu = x.row(u);
        let dxu = dx.row_mut(u);
        for (((&d, wo), dwo), _) in dgu
            .iter()
            .zip(hp.w.chunks_exact(x.cols))
            .zip(dw.chunks_exact_mut(x.cols))
            .zip(0..f_out)
        {
            if d == 0.0 {
                continue;
            }
            for ((dwk, dxk), (&xk, &wk)) in
                dwo.iter_mut().zip(dxu.iter_mut()).zip(xu.iter().zip(wo))
            {
                *dwk += d * xk;
                *dxk += d * wk;
            }
        }
    }
}

pub(crate) fn forward(params: &[f64], g: &EgoGraph, heads: usize) -> (Dense, GatCache) {
    let layout = GatLayout { heads };
    let n = g.len();
    let x = Dense {
        rows: n,
        cols: INPUT_DIM,
        a: g.x.as_flattened().to_vec(),
    };
    let offsets = row_offsets(g);
    let (h1pre, caches1) = layer_forward(params, &layout, g, &offsets, &x, 1, Combine::Concat);
    let mut h1 = h1pre.clone();
    h1.a.iter_mut().for_each(|v| *v = relu(*v));
    let (logits, caches2) = layer_forward(params, &layout, g, &offsets, &h1, 2, Combine::Mean);
    (
        logits,
        GatCache {
            offsets,
            layer1: caches1,
            h1pre,
            h1,
            layer2: caches2,
        },
    )
}

fn layer_forward(
    params: &[f64],
    layout: &GatLayout,
    g: &EgoGraph,
    offsets: &[usize],
    x: &Dense,
    layer: usize,
    combine: Combine,
) -> (Dense, Vec<HeadCache>) {
    let heads = layout.heads;
    let f_out = if layer == 1 { HIDDEN_DIM } else { OUTPUT_DIM };
    let mut caches = Vec::with_capacity(heads);
    let mut out = match combine {
        Combine::Concat => Dense::zeros(x.rows, f_out * heads),
        Combine::Mean => Dense::zeros(x.rows, f_out),
    };
    for h in 0..heads {
        let hp = head_params(params, layout, layer, h);
        let (head_out, cache) = head_forward(&hp, &g.nbrs, offsets, x, f_out);
        match combine {
            Combine::Concat => {
                for i in 0..x.rows {
                    out.row_mut(i)[h * f_out..(h + 1) * f_out].copy_from_slice(head_out.row(i));
                }
            }
            Combine::Mean => {
                let scale = 1.0 / heads as f64;
                for (o, v) in out.a.iter_mut().zip(&head_out.a) {
                    *o += scale * v;
                }
            }
        }
        caches.push(cache);
    }
    (out, caches)
}

fn head_params<'a>(
    params: &'a [f64],
    layout: &GatLayout,
    layer: usize,
    h: usize,
) -> HeadParams<'a> {
    let (w, b, a, f_out) = if layer == 1 {
        (layout.l1_w(h), layout.l1_b(h), layout.l1_a(h), HIDDEN_DIM)
    } else {
        (layout.l2_w(h), layout.l2_b(h), layout.l2_a(h), OUTPUT_DIM)
    };
    let a = &params[a];
    HeadParams {
        w: &params[w],
        b: &params[b],
        a_left: &a[..f_out],
        a_right: &a[f_out..],
    }
}

pub(crate) fn backward(
    params: &[f64],
    g: &EgoGraph,
    heads: usize,
    cache: &GatCache,
    dlogits: &Dense,
    grad: &mut [f64],
) {
    let layout = GatLayout { heads };
    let n = g.len();
    let x = Dense {
        rows: n,
        cols: INPUT_DIM,
        a: g.x.as_flattened().to_vec(),
    };
    let mut dalpha_scratch: Vec<f64> = Vec::new();
    // layer 2 (mean combine): each head receives dlogits / heads
    let mut dh1 = Dense::zeros(n, layout.hidden_concat());
    let scale = 1.0 / heads as f64;
    let mut dhead2 = dlogits.clone();
    dhead2.a.iter_mut().for_each(|v| *v *= scale);
    for h in 0..heads {
        let hp = head_params(params, &layout, 2, h);
        let (wr, br, ar) = (layout.l2_w(h), layout.l2_b(h), layout.l2_a(h));
        let (mut dw, mut db, mut da) = split_grad(grad, wr, br, ar);
        head_backward(
            &hp,
            &g.nbrs,
            &cache.offsets,
            &cache.h1,
            &cache.layer2[h],
            &dhead2,
            &mut dw,
            &mut db,
            &mut da,
            &mut dh1,
            &mut dalpha_scratch,
        );
        merge_grad(grad, layout.l2_w(h), dw);
        merge_grad(grad, layout.l2_b(h), db);
        merge_grad(grad, layout.l2_a(h), da);
    }
    // ReLU between layers
    for (v, z) in dh1.a.iter_mut().zip(&cache.h1pre.a) {
        *v *= relu_grad(*z);
    }
    // layer 1 (concat combine): slice per head
    let mut dx = Dense::zeros(n, INPUT_DIM); // discarded, inputs are data
    let mut dhead = Dense::zeros(n, HIDDEN_DIM);
    for h in 0..heads {
        let hp = head_params(params, &layout, 1, h);
        for i in 0..n {
            dhead
                .row_mut(i)
                .copy_from_slice(&dh1.row(i)[h * HIDDEN_DIM..(h + 1) * HIDDEN_DIM]);
        }
        let (wr, br, ar) = (layout.l1_w(h), layout.l1_b(h), layout.l1_a(h));
        let (mut dw, mut db, mut da) = split_grad(grad, wr, br, ar);
        head_backward(
            &hp,
            &g.nbrs,
            &cache.offsets,
            &x,
            &cache.layer1[h],
            &dhead,
            &mut dw,
            &mut db,
            &mut da,
            &mut dx,
            &mut dalpha_scratch,
        );
        merge_grad(grad, layout.l1_w(h), dw);
        merge_grad(grad, layout.l1_b(h), db);
        merge_grad(grad, layout.l1_a(h), da);
    }
}

// The parameter vector and its gradient share one layout; heads write into
// disjoint ranges, copied out and back to keep the borrow checker simple.
fn split_grad(
    grad: &[f64],
    w: Range<usize>,
    b: Range<usize>,
    a: Range<usize>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (grad[w].to_vec(), grad[b].to_vec(), grad[a].to_vec())
}

fn merge_grad(grad: &mut [f64], r: Range<usize>, val: Vec<f64>) {
    grad[r].copy_from_slice(&val);
}

/// Attention weights of every node for one trained model; used by invariant
/// tests (each row sums to 1).
pub(crate) fn attention_row_sums(params: &[f64], g: &EgoGraph, heads: usize) -> Vec<f64> {
    attention_weights(params, g, heads)
        .iter()
        .flatten()
        .map(|row| row.iter().sum())
        .collect()
}

/// Per (layer-then-head, node) attention rows over `nbrs[i] ++ [i]`.
pub(crate) fn attention_weights(params: &[f64], g: &EgoGraph, heads: usize) -> Vec<Vec<Vec<f64>>> {
    let (_, cache) = forward(params, g, heads);
    cache
        .layer1
        .iter()
        .chain(cache.layer2.iter())
        .map(|hc| {
            (0..g.len())
                .map(|i| cache.alpha_row(hc, i).to_vec())
                .collect()
        })
        .collect()
}

impl GatCache {
    fn alpha_row<'a>(&self, hc: &'a HeadCache, i: usize) -> &'a [f64] {
        &hc.alpha[self.offsets[i]..self.offsets[i + 1]]
    }
}

// ---------------------------------------------------------------------
// Candidate-rooted fast path.
//
// Only the candidate's logits feed the loss and the frontier scores, and
// they depend on layer-1 outputs of the candidate's direct neighborhood
// only; the upstream gradient is zero at every other node. These passes
// compute exactly those rows. Tests assert equality with the full forward.
// ---------------------------------------------------------------------

/// Per-head transformed features `x Wᵀ` (needed for every node: they are the
/// attention values of the rows we do compute).
fn transformed_all(params: &[f64], layout: &GatLayout, g: &EgoGraph, h: usize) -> Dense {
    let n = g.len();
    let w = &params[layout.l1_w(h)];
    let mut out = Dense::zeros(n, HIDDEN_DIM);
    for (xi, gi) in g
        .x
        .as_flattened()
        .chunks_exact(INPUT_DIM)
        .zip(out.a.chunks_exact_mut(HIDDEN_DIM))
    {
        for (go, wo) in gi.iter_mut().zip(w.chunks_exact(INPUT_DIM)) {
            *go = wo.iter().zip(xi).map(|(w, v)| w * v).sum();
        }
    }
    out
}

/// Attention row of node `u` over `nbrs[u] ++ [u]`: writes α into `alpha`
/// (and raw scores into `s` when provided), returns the aggregated output
/// plus bias.
fn attention_row(
    g_vals: &Dense,
    q: &[f64],
    p_u: f64,
    list: &[usize],
    u: usize,
    b: &[f64],
    alpha: &mut Vec<f64>,
    s: Option<&mut Vec<f64>>,
    out: &mut [f64],
) {
    let f_out = g_vals.cols;
    let len = list.len() + 1;
    alpha.clear();
    let mut max = f64::NEG_INFINITY;
    for t in 0..len {
        let j = if t + 1 == len { u } else { list[t] };
        let raw = p_u + q[j];
        let e = leaky_relu(raw);
        alpha.push(e);
        if e > max {
            max = e;
        }
    }
    if let Some(s) = s {
        s.clear();
        for t in 0..len {
            let j = if t + 1 == len { u } else { list[t] };
            s.push(p_u + q[j]);
        }
    }
    let mut sum = 0.0;
    for a in alpha.iter_mut() {
        *a = (*a - max).exp();
        sum += *a;
    }
    let inv = 1.0 / sum;
    out[..f_out].copy_from_slice(b);
    for (t, a) in alpha.iter_mut().enumerate() {
        *a *= inv;
        let j = if t + 1 == len { u } else { list[t] };
        let gj = g_vals.row(j);
        for (o, &gv) in out[..f_out].iter_mut().zip(gj) {
            *o += *a * gv;
        }
    }
}

/// Candidate logits only; equals the candidate row of [`forward`].
pub(crate) fn candidate_logits(params: &[f64], g: &EgoGraph, heads: usize) -> [f64; OUTPUT_DIM] {
    let layout = GatLayout { heads };
    let cand = g.candidate;
    let rows1: Vec<usize> = g.nbrs[cand].iter().copied().chain([cand]).collect();
    let hidden = layout.hidden_concat();
    // layer 1 for the candidate's neighborhood rows
    let mut h1: Vec<Vec<f64>> = vec![vec![0.0; hidden]; rows1.len()];
    let mut alpha = Vec::new();
    for h in 0..heads {
        let gh = transformed_all(params, &layout, g, h);
        let a = &params[layout.l1_a(h)];
        let (al, ar) = a.split_at(HIDDEN_DIM);
        let q: Vec<f64> = gh
            .a
            .chunks_exact(HIDDEN_DIM)
            .map(|row| ar.iter().zip(row).map(|(a, v)| a * v).sum())
            .collect();
        let b = &params[layout.l1_b(h)];
        for (t, &u) in rows1.iter().enumerate() {
            let p_u: f64 = al.iter().zip(gh.row(u)).map(|(a, v)| a * v).sum();
            let mut out = [0.0; HIDDEN_DIM];
            attention_row(&gh, &q, p_u, &g.nbrs[u], u, b, &mut alpha, None, &mut out);
            h1[t][h * HIDDEN_DIM..(h + 1) * HIDDEN_DIM].copy_from_slice(&out);
        }
    }
    for row in &mut h1 {
        row.iter_mut().for_each(|v| *v = relu(*v));
    }
    // layer 2 at the candidate row, averaging heads
    let mut logits = [0.0; OUTPUT_DIM];
    let scale = 1.0 / heads as f64;
    for h in 0..heads {
        let w = &params[layout.l2_w(h)];
        let b = &params[layout.l2_b(h)];
        let a = &params[layout.l2_a(h)];
        let (al, ar) = a.split_at(OUTPUT_DIM);
        // transformed values for rows1 (candidate is the last entry)
        let g2: Vec<[f64; OUTPUT_DIM]> = h1
            .iter()
            .map(|hu| {
                let mut out = [0.0; OUTPUT_DIM];
                for (o, wo) in out.iter_mut().zip(w.chunks_exact(hidden)) {
                    *o = wo.iter().zip(hu).map(|(w, v)| w * v).sum();
                }
                out
            })
            .collect();
        let q2: Vec<f64> = g2
            .iter()
            .map(|v| ar.iter().zip(v).map(|(a, x)| a * x).sum())
            .collect();
        let p_c: f64 = al.iter().zip(&g2[rows1.len() - 1]).map(|(a, x)| a * x).sum();
        // softmax over rows1 (same order as nbrs[cand] ++ [cand])
        let mut max = f64::NEG_INFINITY;
        alpha.clear();
        for t in 0..rows1.len() {
            let e = leaky_relu(p_c + q2[t]);
            alpha.push(e);
            if e > max {
                max = e;
            }
        }
        let mut sum = 0.0;
        for v in alpha.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for (t, v) in alpha.iter().enumerate() {
            let a = v / sum;
            for o in 0..OUTPUT_DIM {
                logits[o] += scale * a * g2[t][o];
            }
        }
        for o in 0..OUTPUT_DIM {
            logits[o] += scale * b[o];
        }
    }
    logits
}

/// Candidate cross-entropy with analytic gradients, touching only the rows
/// the loss depends on. Accumulates into `grad`, returns the loss.
pub(crate) fn candidate_loss_grad(
    params: &[f64],
    g: &EgoGraph,
    heads: usize,
    class: usize,
    grad: &mut [f64],
) -> f64 {
    let layout = GatLayout { heads };
    let cand = g.candidate;
    let rows1: Vec<usize> = g.nbrs[cand].iter().copied().chain([cand]).collect();
    let nrows = rows1.len();
    let hidden = layout.hidden_concat();
    let n = g.len();

    // ---- forward, caching per-head values and attention rows ----
    let mut g1: Vec<Dense> = Vec::with_capacity(heads);
    let mut alpha1: Vec<Vec<Vec<f64>>> = Vec::with_capacity(heads);
    let mut s1: Vec<Vec<Vec<f64>>> = Vec::with_capacity(heads);
    let mut h1pre: Vec<Vec<f64>> = vec![vec![0.0; hidden]; nrows];
    let mut scratch_alpha = Vec::new();
    let mut scratch_s = Vec::new();
    for h in 0..heads {
        let gh = transformed_all(params, &layout, g, h);
        let a = &params[layout.l1_a(h)];
        let (al, ar) = a.split_at(HIDDEN_DIM);
        let q: Vec<f64> = gh
            .a
            .chunks_exact(HIDDEN_DIM)
            .map(|row| ar.iter().zip(row).map(|(a, v)| a * v).sum())
            .collect();
        let b = &params[layout.l1_b(h)];
        let mut rows_alpha = Vec::with_capacity(nrows);
        let mut rows_s = Vec::with_capacity(nrows);
        for (t, &u) in rows1.iter().enumerate() {
            let p_u: f64 = al.iter().zip(gh.row(u)).map(|(a, v)| a * v).sum();
            let mut out = [0.0; HIDDEN_DIM];
            attention_row(
                &gh,
                &q,
                p_u,
                &g.nbrs[u],
                u,
                b,
                &mut scratch_alpha,
                Some(&mut scratch_s),
                &mut out,
            );
            h1pre[t][h * HIDDEN_DIM..(h + 1) * HIDDEN_DIM].copy_from_slice(&out);
            rows_alpha.push(scratch_alpha.clone());
            rows_s.push(scratch_s.clone());
        }
        g1.push(gh);
        alpha1.push(rows_alpha);
        s1.push(rows_s);
    }
    let h1: Vec<Vec<f64>> = h1pre
        .iter()
        .map(|row| row.iter().map(|&v| relu(v)).collect())
        .collect();

    // layer 2 at the candidate row
    let scale = 1.0 / heads as f64;
    let mut g2: Vec<Vec<[f64; OUTPUT_DIM]>> = Vec::with_capacity(heads);
    let mut alpha2: Vec<Vec<f64>> = Vec::with_capacity(heads);
    let mut s2: Vec<Vec<f64>> = Vec::with_capacity(heads);
    let mut z = [0.0; OUTPUT_DIM];
    for h in 0..heads {
        let w = &params[layout.l2_w(h)];
        let b = &params[layout.l2_b(h)];
        let a = &params[layout.l2_a(h)];
        let (al, ar) = a.split_at(OUTPUT_DIM);
        let vals: Vec<[f64; OUTPUT_DIM]> = h1
            .iter()
            .map(|hu| {
                let mut out = [0.0; OUTPUT_DIM];
                for (o, wo) in out.iter_mut().zip(w.chunks_exact(hidden)) {
                    *o = wo.iter().zip(hu).map(|(w, v)| w * v).sum();
                }
                out
            })
            .collect();
        let p_c: f64 = al.iter().zip(&vals[nrows - 1]).map(|(a, x)| a * x).sum();
        let mut s_row = Vec::with_capacity(nrows);
        let mut a_row = Vec::with_capacity(nrows);
        let mut max = f64::NEG_INFINITY;
        for t in 0..nrows {
            let q_t: f64 = ar.iter().zip(&vals[t]).map(|(a, x)| a * x).sum();
            let raw = p_c + q_t;
            s_row.push(raw);
            let e = leaky_relu(raw);
            a_row.push(e);
            if e > max {
                max = e;
            }
        }
        let mut sum = 0.0;
        for v in a_row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in a_row.iter_mut() {
            *v /= sum;
        }
        for (t, &a_t) in a_row.iter().enumerate() {
            for o in 0..OUTPUT_DIM {
                z[o] += scale * a_t * vals[t][o];
            }
        }
        for o in 0..OUTPUT_DIM {
            z[o] += scale * b[o];
        }
        g2.push(vals);
        alpha2.push(a_row);
        s2.push(s_row);
    }

    let mx = z[0].max(z[1]);
    let lse = mx + ((z[0] - mx).exp() + (z[1] - mx).exp()).ln();
    let loss = lse - z[class];
    let mut dz = [0.0; OUTPUT_DIM];
    for o in 0..OUTPUT_DIM {
        dz[o] = (z[o] - lse).exp() - if o == class { 1.0 } else { 0.0 };
    }

    // ---- backward ----
    let mut dh1: Vec<Vec<f64>> = vec![vec![0.0; hidden]; nrows];
    let mut dalpha: Vec<f64> = Vec::new();
    for h in 0..heads {
        let dhead = [dz[0] * scale, dz[1] * scale];
        let vals = &g2[h];
        let a_row = &alpha2[h];
        let s_row = &s2[h];
        let a = &params[layout.l2_a(h)];
        let (al, ar) = a.split_at(OUTPUT_DIM);
        let w = &params[layout.l2_w(h)];
        let mut dw = vec![0.0; OUTPUT_DIM * hidden];
        let dw = &mut dw[..];
        let mut db = [0.0; OUTPUT_DIM];
        let mut da = [0.0; 2 * OUTPUT_DIM];
        let mut dvals: Vec<[f64; OUTPUT_DIM]> = vec![[0.0; OUTPUT_DIM]; nrows];
        for o in 0..OUTPUT_DIM {
            db[o] += dhead[o];
        }
        dalpha.clear();
        let mut m = 0.0;
        for t in 0..nrows {
            let d: f64 = dhead.iter().zip(&vals[t]).map(|(d, v)| d * v).sum();
            dalpha.push(d);
            m += a_row[t] * d;
            for o in 0..OUTPUT_DIM {
                dvals[t][o] += a_row[t] * dhead[o];
            }
        }
        let mut dp = 0.0;
        for t in 0..nrows {
            let ds = a_row[t] * (dalpha[t] - m) * leaky_relu_grad(s_row[t]);
            dp += ds;
            // dq contribution of row t
            for o in 0..OUTPUT_DIM {
                da[OUTPUT_DIM + o] += ds * vals[t][o];
                dvals[t][o] += ds * ar[o];
            }
        }
        for o in 0..OUTPUT_DIM {
            da[o] += dp * vals[nrows - 1][o];
            dvals[nrows - 1][o] += dp * al[o];
        }
        // back through vals = W2 h1
        for t in 0..nrows {
            for o in 0..OUTPUT_DIM {
                let d = dvals[t][o];
                if d == 0.0 {
                    continue;
                }
                let wo = &w[o * hidden..(o + 1) * hidden];
                let dwo = &mut dw[o * hidden..(o + 1) * hidden];
                for k in 0..hidden {
                    dwo[k] += d * h1[t][k];
                    dh1[t][k] += d * wo[k];
                }
            }
        }
        add_into(grad, layout.l2_w(h), dw);
        add_into(grad, layout.l2_b(h), &db);
        add_into(grad, layout.l2_a(h), &da);
    }
    // ReLU
    for (t, row) in dh1.iter_mut().enumerate() {
        for (v, &pre) in row.iter_mut().zip(&h1pre[t]) {
            *v *= relu_grad(pre);
        }
    }
    // layer 1
    for h in 0..heads {
        let gh = &g1[h];
        let a = &params[layout.l1_a(h)];
        let (al, ar) = a.split_at(HIDDEN_DIM);
        let mut dw = [0.0; HIDDEN_DIM * INPUT_DIM];
        let mut db = [0.0; HIDDEN_DIM];
        let mut da = [0.0; 2 * HIDDEN_DIM];
        let mut dgh = Dense::zeros(n, HIDDEN_DIM);
        let mut dq = vec![0.0; n];
        for (t, &u) in rows1.iter().enumerate() {
            let dout = &dh1[t][h * HIDDEN_DIM..(h + 1) * HIDDEN_DIM];
            if dout.iter().all(|&v| v == 0.0) {
                continue;
            }
            for o in 0..HIDDEN_DIM {
                db[o] += dout[o];
            }
            let a_row = &alpha1[h][t];
            let s_row = &s1[h][t];
            let list = &g.nbrs[u];
            let len = list.len() + 1;
            dalpha.clear();
            let mut m = 0.0;
            for tt in 0..len {
                let j = if tt + 1 == len { u } else { list[tt] };
                let gj = gh.row(j);
                let d: f64 = dout.iter().zip(gj).map(|(d, v)| d * v).sum();
                dalpha.push(d);
                m += a_row[tt] * d;
                let dgj = dgh.row_mut(j);
                for o in 0..HIDDEN_DIM {
                    dgj[o] += a_row[tt] * dout[o];
                }
            }
            let mut dp_u = 0.0;
            for tt in 0..len {
                let j = if tt + 1 == len { u } else { list[tt] };
                let ds = a_row[tt] * (dalpha[tt] - m) * leaky_relu_grad(s_row[tt]);
                dp_u += ds;
                dq[j] += ds;
            }
            let gu = gh.row(u);
            let dgu = dgh.row_mut(u);
            for o in 0..HIDDEN_DIM {
                da[o] += dp_u * gu[o];
                dgu[o] += dp_u * al[o];
            }
        }
        for w_node in 0..n {
            if dq[w_node] != 0.0 {
                let gw = gh.row(w_node);
                let dgw = dgh.row_mut(w_node);
                for o in 0..HIDDEN_DIM {
                    da[HIDDEN_DIM + o] += dq[w_node] * gw[o];
                    dgw[o] += dq[w_node] * ar[o];
                }
            }
        }
        for w_node in 0..n {
            let dgw = dgh.row(w_node);
            if dgw.iter().all(|&v| v == 0.0) {
                continue;
            }
            let xw = &g.x[w_node];
            for o in 0..HIDDEN_DIM {
                let d = dgw[o];
                if d == 0.0 {
                    continue;
                }
                let dwo = &mut dw[o * INPUT_DIM..(o + 1) * INPUT_DIM];
                for k in 0..INPUT_DIM {
                    dwo[k] += d * xw[k];
                }
            }
        }
        add_into(grad, layout.l1_w(h), &dw);
        add_into(grad, layout.l1_b(h), &db);
        add_into(grad, layout.l1_a(h), &da);
    }
    loss
}

fn add_into(grad: &mut [f64], r: Range<usize>, delta: &[f64]) {
    for (g, d) in grad[r].iter_mut().zip(delta) {
        *g += d;
    }
}
