//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass as a node; calling
//! [`Tape::backward`] on a scalar root fills per-node gradients by walking the
//! nodes in reverse. Attention, layer norm, and both training losses are
//! single fused nodes: their backward rules are hand-derived, which keeps the
//! graph short and makes the gradient-check oracle cheap to run.

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`]. Only valid for the tape that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

struct LnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

enum Op {
    Leaf,
    Matmul(Var, Var),
    Add(Var, Var),
    /// `x + b` where `b` is a single row broadcast over all rows of `x`.
    AddRowBroadcast(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        cache: LnCache,
    },
    SoftmaxRows(Var),
    /// Multi-head scaled dot-product attention with a causal mask, applied
    /// independently to each consecutive block of `seq_len` rows.
    CausalAttention {
        q: Var,
        k: Var,
        v: Var,
        n_heads: usize,
        seq_len: usize,
        /// Attention probabilities, one `seq_len x seq_len` lower-triangular
        /// matrix per (block, head), indexed `block * n_heads + head`.
        probs: Vec<Tensor>,
    },
    GatherRows {
        x: Var,
        indices: Vec<usize>,
    },
    /// Rows of `src` added into a fresh zero matrix at `indices`.
    ScatterAddRows {
        src: Var,
        indices: Vec<usize>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    Clamp {
        x: Var,
        lo: f64,
        hi: f64,
    },
    /// Scalar `sum(x * weights)`; used to seed tests and reductions.
    SumWeighted {
        x: Var,
        weights: Tensor,
    },
    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, averaged over rows where `mask` is true.
    CrossEntropyRows {
        logits: Var,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Tensor,
    },
    /// Mean over unmasked rows of (diagonal-Gaussian NLL - lambda * entropy).
    GaussianNllEntropy {
        mu: Var,
        log_sigma: Var,
        targets: Tensor,
        mask: Vec<bool>,
        lambda: f64,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.044_715;

fn sqrt_2_over_pi() -> f64 {
    (2.0 / std::f64::consts::PI).sqrt()
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new(), grads: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Non-trainable leaf (inputs, targets used as features).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let t = self.value(v);
        assert_eq!(t.len(), 1, "scalar_value on non-scalar node");
        t.data[0]
    }

    /// Gradient of the last `backward` root with respect to `v`.
    /// `None` when the node does not require grad or was not reached.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).matmul(self.value(b));
        let req = self.requires(a) || self.requires(b);
        self.push(out, Op::Matmul(a, b), req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!((av.rows, av.cols), (bv.rows, bv.cols), "add shape mismatch");
        let mut out = av.clone();
        out.add_assign(bv);
        let req = self.requires(a) || self.requires(b);
        self.push(out, Op::Add(a, b), req)
    }

    pub fn add_row_broadcast(&mut self, x: Var, b: Var) -> Var {
        let (xv, bv) = (self.value(x), self.value(b));
        assert_eq!(bv.rows, 1, "broadcast operand must be a single row");
        assert_eq!(xv.cols, bv.cols, "broadcast width mismatch");
        let mut out = xv.clone();
        for r in 0..out.rows {
            for (o, &add) in out.row_mut(r).iter_mut().zip(&bv.data) {
                *o += add;
            }
        }
        let req = self.requires(x) || self.requires(b);
        self.push(out, Op::AddRowBroadcast(x, b), req)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale_assign(c);
        let req = self.requires(x);
        self.push(out, Op::Scale(x, c), req)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let c = sqrt_2_over_pi();
        let mut out = xv.clone();
        for v in &mut out.data {
            let u = c * (*v + GELU_C * *v * *v * *v);
            *v = 0.5 * *v * (1.0 + u.tanh());
        }
        let req = self.requires(x);
        self.push(out, Op::Gelu(x), req)
    }

    /// Per-row layer norm followed by a learned row-broadcast affine.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
        assert_eq!(gv.rows, 1, "layer_norm gain must be a single row");
        assert_eq!(bv.rows, 1, "layer_norm bias must be a single row");
        assert_eq!(xv.cols, gv.cols, "layer_norm gain width mismatch");
        assert_eq!(xv.cols, bv.cols, "layer_norm bias width mismatch");
        let (rows, cols) = (xv.rows, xv.cols);
        let mut xhat = Tensor::zeros(rows, cols);
        let mut inv_std = vec![0.0; rows];
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = is;
            let xh = xhat.row_mut(r);
            let o = out.row_mut(r);
            for c in 0..cols {
                let h = (row[c] - mean) * is;
                xh[c] = h;
                o[c] = gv.data[c] * h + bv.data[c];
            }
        }
        let req = self.requires(x) || self.requires(gain) || self.requires(bias);
        self.push(out, Op::LayerNorm { x, gain, bias, cache: LnCache { xhat, inv_std } }, req)
    }

    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut out = xv.clone();
        for r in 0..out.rows {
            softmax_row_in_place(out.row_mut(r));
        }
        let req = self.requires(x);
        self.push(out, Op::SoftmaxRows(x), req)
    }

    /// Causal multi-head attention over blocks of `seq_len` consecutive rows.
    /// Row `i` of a block attends to rows `0..=i` of the same block only.
    pub fn causal_attention(&mut self, q: Var, k: Var, v: Var, n_heads: usize, seq_len: usize) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        assert_eq!((qv.rows, qv.cols), (kv.rows, kv.cols), "attention q/k shape mismatch");
        assert_eq!((qv.rows, qv.cols), (vv.rows, vv.cols), "attention q/v shape mismatch");
        assert!(seq_len > 0 && qv.rows % seq_len == 0, "rows must tile into sequences");
        assert!(n_heads > 0 && qv.cols % n_heads == 0, "width must tile into heads");
        let d = qv.cols;
        let dh = d / n_heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let n_blocks = qv.rows / seq_len;
        let mut out = Tensor::zeros(qv.rows, d);
        let mut probs = Vec::with_capacity(n_blocks * n_heads);
        for b in 0..n_blocks {
            let base = b * seq_len;
            for h in 0..n_heads {
                let off = h * dh;
                let mut p = Tensor::zeros(seq_len, seq_len);
                for i in 0..seq_len {
                    let qrow = &qv.row(base + i)[off..off + dh];
                    let prow = p.row_mut(i);
                    let mut max_s = f64::NEG_INFINITY;
                    for (j, pj) in prow.iter_mut().enumerate().take(i + 1) {
                        let krow = &kv.row(base + j)[off..off + dh];
                        let mut s = 0.0;
                        for t in 0..dh {
                            s += qrow[t] * krow[t];
                        }
                        s *= scale;
                        *pj = s;
                        if s > max_s {
                            max_s = s;
                        }
                    }
                    let mut z = 0.0;
                    for pj in prow.iter_mut().take(i + 1) {
                        *pj = (*pj - max_s).exp();
                        z += *pj;
                    }
                    for pj in prow.iter_mut().take(i + 1) {
                        *pj /= z;
                    }
                }
                for i in 0..seq_len {
                    for j in 0..=i {
                        let w = p.at(i, j);
                        if w == 0.0 {
                            continue;
                        }
                        let vrow_ptr = base + j;
                        for t in 0..dh {
                            out.data[(base + i) * d + off + t] += w * vv.at(vrow_ptr, off + t);
                        }
                    }
                }
                probs.push(p);
            }
        }
        let req = self.requires(q) || self.requires(k) || self.requires(v);
        self.push(out, Op::CausalAttention { q, k, v, n_heads, seq_len, probs }, req)
    }

    /// Attention probabilities recorded by a `causal_attention` node, one
    /// lower-triangular matrix per (block, head).
    pub fn attention_probs(&self, attn: Var) -> &[Tensor] {
        match &self.nodes[attn.0].op {
            Op::CausalAttention { probs, .. } => probs,
            _ => panic!("attention_probs on a non-attention node"),
        }
    }

    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Var {
        let xv = self.value(x);
        let mut out = Tensor::zeros(indices.len(), xv.cols);
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).copy_from_slice(xv.row(i));
        }
        let req = self.requires(x);
        self.push(out, Op::GatherRows { x, indices: indices.to_vec() }, req)
    }

    /// `out` has `n_rows` rows; row `indices[i]` accumulates row `i` of `src`.
    pub fn scatter_add_rows(&mut self, src: Var, indices: &[usize], n_rows: usize) -> Var {
        let sv = self.value(src);
        assert_eq!(sv.rows, indices.len(), "one index per source row");
        let mut out = Tensor::zeros(n_rows, sv.cols);
        for (r, &i) in indices.iter().enumerate() {
            assert!(i < n_rows, "scatter index out of range");
            for (o, &s) in out.row_mut(i).iter_mut().zip(sv.row(r)) {
                *o += s;
            }
        }
        let req = self.requires(src);
        self.push(out, Op::ScatterAddRows { src, indices: indices.to_vec() }, req)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Var {
        let xv = self.value(x);
        assert!(start + width <= xv.cols, "column slice out of range");
        let mut out = Tensor::zeros(xv.rows, width);
        for r in 0..xv.rows {
            out.row_mut(r).copy_from_slice(&xv.row(r)[start..start + width]);
        }
        let req = self.requires(x);
        self.push(out, Op::SliceCols { x, start }, req)
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let mut out = self.value(x).clone();
        for v in &mut out.data {
            *v = v.clamp(lo, hi);
        }
        let req = self.requires(x);
        self.push(out, Op::Clamp { x, lo, hi }, req)
    }

    /// Scalar `sum(x * weights)`.
    pub fn sum_weighted(&mut self, x: Var, weights: Tensor) -> Var {
        let xv = self.value(x);
        assert_eq!((xv.rows, xv.cols), (weights.rows, weights.cols), "weight shape mismatch");
        let s: f64 = xv.data.iter().zip(&weights.data).map(|(a, b)| a * b).sum();
        let req = self.requires(x);
        self.push(Tensor::from_vec(1, 1, vec![s]), Op::SumWeighted { x, weights }, req)
    }

    /// Mean cross-entropy of `targets` under row-wise softmax of `logits`,
    /// over rows where `mask` is true. All rows masked yields 0.
    pub fn cross_entropy_rows(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len(), "one target per row");
        assert_eq!(lv.rows, mask.len(), "one mask entry per row");
        let mut probs = lv.clone();
        let mut total = 0.0;
        let mut n = 0usize;
        for r in 0..probs.rows {
            let row = probs.row_mut(r);
            let max_s = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max_s).exp();
                z += *v;
            }
            for v in row.iter_mut() {
                *v /= z;
            }
            if mask[r] {
                assert!(targets[r] < lv.cols, "target class out of range");
                total -= row[targets[r]].ln();
                n += 1;
            }
        }
        let loss = if n == 0 { 0.0 } else { total / n as f64 };
        let req = self.requires(logits);
        self.push(
            Tensor::from_vec(1, 1, vec![loss]),
            Op::CrossEntropyRows { logits, targets: targets.to_vec(), mask: mask.to_vec(), probs },
            req,
        )
    }

    /// Mean over unmasked rows of
    /// `sum_k [0.5 ln 2pi + log_sigma_k + 0.5 z_k^2] - lambda * H`
    /// where `z = (target - mu) / sigma` and
    /// `H = 0.5 k ln(2 pi e) + sum_k log_sigma_k`.
    pub fn gaussian_nll_entropy(
        &mut self,
        mu: Var,
        log_sigma: Var,
        targets: Tensor,
        mask: &[bool],
        lambda: f64,
    ) -> Var {
        let (mv, sv) = (self.value(mu), self.value(log_sigma));
        assert_eq!((mv.rows, mv.cols), (sv.rows, sv.cols), "mu/log_sigma shape mismatch");
        assert_eq!((mv.rows, mv.cols), (targets.rows, targets.cols), "target shape mismatch");
        assert_eq!(mv.rows, mask.len(), "one mask entry per row");
        let k = mv.cols as f64;
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        let mut total = 0.0;
        let mut n = 0usize;
        for r in 0..mv.rows {
            if !mask[r] {
                continue;
            }
            let mut nll = 0.5 * k * ln_2pi;
            let mut sum_ls = 0.0;
            for c in 0..mv.cols {
                let ls = sv.at(r, c);
                let z = (targets.at(r, c) - mv.at(r, c)) * (-ls).exp();
                nll += ls + 0.5 * z * z;
                sum_ls += ls;
            }
            let entropy = 0.5 * k * (ln_2pi + 1.0) + sum_ls;
            total += nll - lambda * entropy;
            n += 1;
        }
        let loss = if n == 0 { 0.0 } else { total / n as f64 };
        let req = self.requires(mu) || self.requires(log_sigma);
        self.push(
            Tensor::from_vec(1, 1, vec![loss]),
            Op::GaussianNllEntropy { mu, log_sigma, targets, mask: mask.to_vec(), lambda },
            req,
        )
    }

    /// Fill gradients for every node reachable from `root`, which must be a
    /// scalar. Gradients of earlier backward calls on this tape are replaced.
    pub fn backward(&mut self, root: Var) {
        let n = self.nodes.len();
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        {
            let rv = &self.nodes[root.0].value;
            assert_eq!(rv.len(), 1, "backward root must be scalar");
            grads[root.0] = Some(Tensor::from_vec(1, 1, vec![1.0]));
        }
        let nodes = &self.nodes;
        for i in (0..n).rev() {
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            if nodes[i].requires_grad {
                dispatch_backward(nodes, &mut grads, i, &g);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
    }
}

fn softmax_row_in_place(row: &mut [f64]) {
    let max_s = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max_s).exp();
        z += *v;
    }
    for v in row.iter_mut() {
        *v /= z;
    }
}

fn add_grad(nodes: &[Node], grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
    if !nodes[v.0].requires_grad {
        return;
    }
    match &mut grads[v.0] {
        Some(g) => g.add_assign(&delta),
        slot @ None => *slot = Some(delta),
    }
}

fn dispatch_backward(nodes: &[Node], grads: &mut [Option<Tensor>], i: usize, g: &Tensor) {
    match &nodes[i].op {
        Op::Leaf => {}
        Op::Matmul(a, b) => {
            if nodes[a.0].requires_grad {
                let da = g.matmul_bt(&nodes[b.0].value);
                add_grad(nodes, grads, *a, da);
            }
            if nodes[b.0].requires_grad {
                let db = nodes[a.0].value.tmatmul(g);
                add_grad(nodes, grads, *b, db);
            }
        }
        Op::Add(a, b) => {
            add_grad(nodes, grads, *a, g.clone());
            add_grad(nodes, grads, *b, g.clone());
        }
        Op::AddRowBroadcast(x, b) => {
            add_grad(nodes, grads, *x, g.clone());
            if nodes[b.0].requires_grad {
                let mut db = Tensor::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, &gv) in db.data.iter_mut().zip(g.row(r)) {
                        *d += gv;
                    }
                }
                add_grad(nodes, grads, *b, db);
            }
        }
        Op::Scale(x, c) => {
            let mut dx = g.clone();
            dx.scale_assign(*c);
            add_grad(nodes, grads, *x, dx);
        }
        Op::Gelu(x) => {
            let xv = &nodes[x.0].value;
            let c = sqrt_2_over_pi();
            let mut dx = g.clone();
            for (d, &v) in dx.data.iter_mut().zip(&xv.data) {
                let u = c * (v + GELU_C * v * v * v);
                let t = u.tanh();
                let du = c * (1.0 + 3.0 * GELU_C * v * v);
                *d *= 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
            }
            add_grad(nodes, grads, *x, dx);
        }
        Op::LayerNorm { x, gain, bias, cache } => {
            let gv = &nodes[gain.0].value;
            let cols = gv.cols;
            if nodes[gain.0].requires_grad {
                let mut dg = Tensor::zeros(1, cols);
                for r in 0..g.rows {
                    for c in 0..cols {
                        dg.data[c] += g.at(r, c) * cache.xhat.at(r, c);
                    }
                }
                add_grad(nodes, grads, *gain, dg);
            }
            if nodes[bias.0].requires_grad {
                let mut db = Tensor::zeros(1, cols);
                for r in 0..g.rows {
                    for (d, &gv2) in db.data.iter_mut().zip(g.row(r)) {
                        *d += gv2;
                    }
                }
                add_grad(nodes, grads, *bias, db);
            }
            if nodes[x.0].requires_grad {
                let mut dx = Tensor::zeros(g.rows, cols);
                let nf = cols as f64;
                for r in 0..g.rows {
                    let xh = cache.xhat.row(r);
                    let grow = g.row(r);
                    let mut mean_dxh = 0.0;
                    let mut mean_dxh_xh = 0.0;
                    for c in 0..cols {
                        let dxh = grow[c] * gv.data[c];
                        mean_dxh += dxh;
                        mean_dxh_xh += dxh * xh[c];
                    }
                    mean_dxh /= nf;
                    mean_dxh_xh /= nf;
                    let is = cache.inv_std[r];
                    let drow = dx.row_mut(r);
                    for c in 0..cols {
                        let dxh = grow[c] * gv.data[c];
                        drow[c] = is * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
                    }
                }
                add_grad(nodes, grads, *x, dx);
            }
        }
        Op::SoftmaxRows(x) => {
            let p = &nodes[i].value;
            let mut dx = Tensor::zeros(p.rows, p.cols);
            for r in 0..p.rows {
                let prow = p.row(r);
                let grow = g.row(r);
                let inner: f64 = prow.iter().zip(grow).map(|(a, b)| a * b).sum();
                let drow = dx.row_mut(r);
                for c in 0..p.cols {
                    drow[c] = prow[c] * (grow[c] - inner);
                }
            }
            add_grad(nodes, grads, *x, dx);
        }
        Op::CausalAttention { q, k, v, n_heads, seq_len, probs } => {
            let qv = &nodes[q.0].value;
            let kv = &nodes[k.0].value;
            let vv = &nodes[v.0].value;
            let d = qv.cols;
            let dh = d / n_heads;
            let scale = 1.0 / (dh as f64).sqrt();
            let n_blocks = qv.rows / seq_len;
            let mut dq = Tensor::zeros(qv.rows, d);
            let mut dk = Tensor::zeros(qv.rows, d);
            let mut dv = Tensor::zeros(qv.rows, d);
            for b in 0..n_blocks {
                let base = b * seq_len;
                for h in 0..*n_heads {
                    let off = h * dh;
                    let p = &probs[b * n_heads + h];
                    for i2 in 0..*seq_len {
                        let grow = &g.row(base + i2)[off..off + dh];
                        let prow = p.row(i2);
                        // dV[j] += P[i][j] * dOut[i]; dP[i][j] = dOut[i] . V[j]
                        let mut dp = vec![0.0; i2 + 1];
                        for (j, dpj) in dp.iter_mut().enumerate() {
                            let w = prow[j];
                            let vrow = &vv.row(base + j)[off..off + dh];
                            let mut acc = 0.0;
                            for t in 0..dh {
                                acc += grow[t] * vrow[t];
                            }
                            *dpj = acc;
                            if w != 0.0 {
                                let dvrow = &mut dv.row_mut(base + j)[off..off + dh];
                                for t in 0..dh {
                                    dvrow[t] += w * grow[t];
                                }
                            }
                        }
                        // Softmax backward within the causal row, then chain
                        // through the scaled dot products.
                        let mut inner = 0.0;
                        for (j, dpj) in dp.iter().enumerate() {
                            inner += dpj * prow[j];
                        }
                        let qrow: Vec<f64> = qv.row(base + i2)[off..off + dh].to_vec();
                        for (j, dpj) in dp.iter().enumerate() {
                            let ds = prow[j] * (dpj - inner) * scale;
                            if ds == 0.0 {
                                continue;
                            }
                            let krow = &kv.row(base + j)[off..off + dh];
                            let dqrow = &mut dq.row_mut(base + i2)[off..off + dh];
                            for t in 0..dh {
                                dqrow[t] += ds * krow[t];
                            }
                            let dkrow = &mut dk.row_mut(base + j)[off..off + dh];
                            for t in 0..dh {
                                dkrow[t] += ds * qrow[t];
                            }
                        }
                    }
                }
            }
            add_grad(nodes, grads, *q, dq);
            add_grad(nodes, grads, *k, dk);
            add_grad(nodes, grads, *v, dv);
        }
        Op::GatherRows { x, indices } => {
            if nodes[x.0].requires_grad {
                let xv = &nodes[x.0].value;
                let mut dx = Tensor::zeros(xv.rows, xv.cols);
                for (r, &idx) in indices.iter().enumerate() {
                    for (d, &gv) in dx.row_mut(idx).iter_mut().zip(g.row(r)) {
                        *d += gv;
                    }
                }
                add_grad(nodes, grads, *x, dx);
            }
        }
        Op::ScatterAddRows { src, indices } => {
            if nodes[src.0].requires_grad {
                let sv = &nodes[src.0].value;
                let mut ds = Tensor::zeros(sv.rows, sv.cols);
                for (r, &idx) in indices.iter().enumerate() {
                    ds.row_mut(r).copy_from_slice(g.row(idx));
                }
                add_grad(nodes, grads, *src, ds);
            }
        }
        Op::SliceCols { x, start } => {
            let xv = &nodes[x.0].value;
            let mut dx = Tensor::zeros(xv.rows, xv.cols);
            for r in 0..g.rows {
                dx.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
            }
            add_grad(nodes, grads, *x, dx);
        }
        Op::Clamp { x, lo, hi } => {
            let xv = &nodes[x.0].value;
            let mut dx = g.clone();
            for (d, &v) in dx.data.iter_mut().zip(&xv.data) {
                if v < *lo || v > *hi {
                    *d = 0.0;
                }
            }
            add_grad(nodes, grads, *x, dx);
        }
        Op::SumWeighted { x, weights } => {
            let s = g.data[0];
            let mut dx = weights.clone();
            dx.scale_assign(s);
            add_grad(nodes, grads, *x, dx);
        }
        Op::CrossEntropyRows { logits, targets, mask, probs } => {
            if nodes[logits.0].requires_grad {
                let n = mask.iter().filter(|m| **m).count();
                let mut dx = Tensor::zeros(probs.rows, probs.cols);
                if n > 0 {
                    let s = g.data[0] / n as f64;
                    for r in 0..probs.rows {
                        if !mask[r] {
                            continue;
                        }
                        let prow = probs.row(r);
                        let drow = dx.row_mut(r);
                        for c in 0..probs.cols {
                            drow[c] = s * prow[c];
                        }
                        drow[targets[r]] -= s;
                    }
                }
                add_grad(nodes, grads, *logits, dx);
            }
        }
        Op::GaussianNllEntropy { mu, log_sigma, targets, mask, lambda } => {
            let mv = &nodes[mu.0].value;
            let sv = &nodes[log_sigma.0].value;
            let n = mask.iter().filter(|m| **m).count();
            let mut dmu = Tensor::zeros(mv.rows, mv.cols);
            let mut dls = Tensor::zeros(mv.rows, mv.cols);
            if n > 0 {
                let s = g.data[0] / n as f64;
                for r in 0..mv.rows {
                    if !mask[r] {
                        continue;
                    }
                    for c in 0..mv.cols {
                        let ls = sv.at(r, c);
                        let inv_sig = (-ls).exp();
                        let z = (targets.at(r, c) - mv.at(r, c)) * inv_sig;
                        *dmu.at_mut(r, c) = s * (-z) * inv_sig;
                        *dls.at_mut(r, c) = s * (1.0 - z * z - lambda);
                    }
                }
            }
            add_grad(nodes, grads, *mu, dmu);
            add_grad(nodes, grads, *log_sigma, dls);
        }
    }
}
