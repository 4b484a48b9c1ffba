use super::kernels::{mm_nn, mm_nt, mm_tn};
use super::Tensor;
use crate::error::{G2pError, Result};
use crate::scalar::Scalar;

/// Handle to a node of a [`Graph`]. Only valid for the graph that issued it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// a · bᵀ
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    SliceCols { src: NodeId, start: usize },
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SelectRows { keep_first: Vec<bool>, a: NodeId, b: NodeId },
    Embedding { table: NodeId, ids: Vec<usize> },
    Softmax(NodeId),
    LogSoftmax(NodeId),
    MaskedSoftmax(NodeId),
    CrossEntropy { logits: NodeId, targets: Vec<usize>, pad: usize, count: usize },
    Sum(NodeId),
    Stack(Vec<NodeId>),
    AttnScores { query: NodeId, memory: NodeId },
    AttnContext { weights: NodeId, memory: NodeId },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    requires_grad: bool,
}

/// Append-only computation tape. Inputs of a node always precede it, so
/// the node order is a valid topological order.
#[derive(Debug)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

fn mismatch<T: Scalar>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> G2pError {
    G2pError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node created after the first `len`; earlier handles stay
    /// valid. Lets a long-lived inference graph keep its parameter leaves
    /// while discarding per-step intermediates.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    /// Differentiable leaf (a parameter).
    pub fn param(&mut self, value: Tensor<T>) -> NodeId {
        self.push_unchecked(value, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push_unchecked(value, Op::Leaf, false)
    }

    fn push_unchecked(&mut self, value: Tensor<T>, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Tensor<T>, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(G2pError::NonFinite(name.to_string()));
        }
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    fn dims(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        let v = self.value(id);
        v.matrix_dims().ok_or_else(|| G2pError::Shape {
            op,
            left: v.shape().to_vec(),
            right: vec![],
        })
    }

    fn matrix(&self, id: NodeId, op: &'static str) -> Result<(usize, usize)> {
        match self.value(id).shape() {
            [r, c] => Ok((*r, *c)),
            s => Err(G2pError::Shape {
                op,
                left: s.to_vec(),
                right: vec![],
            }),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.matrix(a, "matmul")?;
        let (k2, n) = self.matrix(b, "matmul")?;
        if k != k2 {
            return Err(mismatch("matmul", self.value(a), self.value(b)));
        }
        let mut out = vec![T::zero(); m * n];
        mm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push("matmul", Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`, the layout used by weights stored as `[out × in]`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.matrix(a, "matmul_nt")?;
        let (n, k2) = self.matrix(b, "matmul_nt")?;
        if k != k2 {
            return Err(mismatch("matmul_nt", self.value(a), self.value(b)));
        }
        let mut out = vec![T::zero(); m * n];
        mm_nt(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        self.push("matmul_nt", Tensor::new(vec![m, n], out)?, Op::MatMulNT(a, b), &[a, b])
    }

    fn zip_same(&mut self, name: &'static str, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T, op: Op) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(name, va, vb));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        self.push(name, out, op, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_same("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_same("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a bias vector `[n]` to every row of `a: [rows × n]`.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.dims(a, "add_row")?;
        let vb = self.value(bias);
        if vb.shape() != [cols] {
            return Err(mismatch("add_row", self.value(a), vb));
        }
        let b = vb.data().to_vec();
        let mut out = self.value(a).clone();
        for r in 0..rows {
            for (o, &bv) in out.row_mut(r).iter_mut().zip(&b) {
                *o += bv;
            }
        }
        self.push("add_row", out, Op::AddRow(a, bias), &[a, bias])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).map(|v| v.tanh());
        self.push("tanh", out, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let out = self.value(a).map(sigmoid);
        self.push("sigmoid", out, Op::Sigmoid(a), &[a])
    }

    pub fn slice_cols(&mut self, src: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (rows, cols) = self.matrix(src, "slice_cols")?;
        if start + len > cols {
            return Err(G2pError::IndexOutOfRange {
                index: start + len,
                size: cols,
            });
        }
        let v = self.value(src);
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&v.row(r)[start..start + len]);
        }
        let out = Tensor::new(vec![rows, len], data)?;
        self.push("slice_cols", out, Op::SliceCols { src, start }, &[src])
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(G2pError::EmptyInput("concat_cols"))?;
        let (rows, _) = self.matrix(first, "concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.matrix(p, "concat_cols")?;
            if r != rows {
                return Err(mismatch("concat_cols", self.value(first), self.value(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::new(vec![rows, total], data)?;
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts.first().ok_or(G2pError::EmptyInput("concat_rows"))?;
        let (_, cols) = self.matrix(first, "concat_rows")?;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.matrix(p, "concat_rows")?;
            if c != cols {
                return Err(mismatch("concat_rows", self.value(first), self.value(p)));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::new(vec![rows, cols], data)?;
        self.push("concat_rows", out, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Row `r` of the result comes from `a` when `keep_first[r]`, else from `b`.
    pub fn select_rows(&mut self, keep_first: &[bool], a: NodeId, b: NodeId) -> Result<NodeId> {
        let (rows, _) = self.matrix(a, "select_rows")?;
        if self.value(a).shape() != self.value(b).shape() || keep_first.len() != rows {
            return Err(mismatch("select_rows", self.value(a), self.value(b)));
        }
        let mut out = self.value(b).clone();
        for (r, &first) in keep_first.iter().enumerate() {
            if first {
                out.row_mut(r).copy_from_slice(self.value(a).row(r));
            }
        }
        let op = Op::SelectRows {
            keep_first: keep_first.to_vec(),
            a,
            b,
        };
        self.push("select_rows", out, op, &[a, b])
    }

    /// Gathers rows of `table: [V × d]`.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let (vocab, dim) = self.matrix(table, "embedding")?;
        let t = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(G2pError::IndexOutOfRange { index: id, size: vocab });
            }
            data.extend_from_slice(t.row(id));
        }
        let out = Tensor::new(vec![ids.len(), dim], data)?;
        let op = Op::Embedding {
            table,
            ids: ids.to_vec(),
        };
        self.push("embedding", out, op, &[table])
    }

    /// Row-wise softmax (a vector is a single row).
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, _) = self.dims(a, "softmax")?;
        let mut out = self.value(a).clone();
        for r in 0..rows {
            let p = super::softmax_vec(out.row(r));
            out.row_mut(r).copy_from_slice(&p);
        }
        self.push("softmax", out, Op::Softmax(a), &[a])
    }

    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let (rows, _) = self.dims(a, "log_softmax")?;
        let mut out = self.value(a).clone();
        for r in 0..rows {
            let lse = super::log_sum_exp(out.row(r));
            for v in out.row_mut(r) {
                *v -= lse;
            }
        }
        self.push("log_softmax", out, Op::LogSoftmax(a), &[a])
    }

    /// Row-wise softmax restricted to positions where `mask` is true;
    /// masked positions receive exactly zero weight and zero gradient.
    pub fn masked_softmax(&mut self, a: NodeId, mask: &[bool]) -> Result<NodeId> {
        let (rows, cols) = self.dims(a, "masked_softmax")?;
        if mask.len() != rows * cols {
            return Err(G2pError::Shape {
                op: "masked_softmax",
                left: self.value(a).shape().to_vec(),
                right: vec![mask.len()],
            });
        }
        let mut out = self.value(a).clone();
        for r in 0..rows {
            let m = &mask[r * cols..(r + 1) * cols];
            if !m.iter().any(|&v| v) {
                return Err(G2pError::EmptyInput("masked_softmax row"));
            }
            let row = out.row_mut(r);
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &keep)| keep)
                .map(|(&v, _)| v)
                .fold(T::neg_infinity(), T::max);
            let mut total = T::zero();
            for (v, &keep) in row.iter_mut().zip(m) {
                *v = if keep { (*v - max).exp() } else { T::zero() };
                total += *v;
            }
            for v in row.iter_mut() {
                *v = *v / total;
            }
        }
        self.push("masked_softmax", out, Op::MaskedSoftmax(a), &[a])
    }

    /// Mean negative log-likelihood of `targets` under row-wise softmax of
    /// `logits: [N × V]`, skipping rows whose target is `pad`.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize], pad: usize) -> Result<NodeId> {
        let (rows, vocab) = self.matrix(logits, "cross_entropy")?;
        if targets.len() != rows {
            return Err(G2pError::Shape {
                op: "cross_entropy",
                left: vec![rows, vocab],
                right: vec![targets.len()],
            });
        }
        let v = self.value(logits);
        let mut total = T::zero();
        let mut count = 0usize;
        for (r, &t) in targets.iter().enumerate() {
            if t == pad {
                continue;
            }
            if t >= vocab {
                return Err(G2pError::IndexOutOfRange { index: t, size: vocab });
            }
            let row = v.row(r);
            total += super::log_sum_exp(row) - row[t];
            count += 1;
        }
        if count == 0 {
            return Err(G2pError::EmptyTarget);
        }
        let loss = total / T::from_usize(count).unwrap();
        let op = Op::CrossEntropy {
            logits,
            targets: targets.to_vec(),
            pad,
            count,
        };
        self.push("cross_entropy", Tensor::scalar(loss), op, &[logits])
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Stacks `S` matrices of shape `[B × h]` into `[S × B × h]`.
    pub fn stack(&mut self, steps: &[NodeId]) -> Result<NodeId> {
        let first = *steps.first().ok_or(G2pError::EmptyInput("stack"))?;
        let (b, h) = self.matrix(first, "stack")?;
        let mut data = Vec::with_capacity(steps.len() * b * h);
        for &s in steps {
            if self.value(s).shape() != [b, h] {
                return Err(mismatch("stack", self.value(first), self.value(s)));
            }
            data.extend_from_slice(self.value(s).data());
        }
        let out = Tensor::new(vec![steps.len(), b, h], data)?;
        self.push("stack", out, Op::Stack(steps.to_vec()), steps)
    }

    fn memory_dims(&self, memory: NodeId) -> Result<(usize, usize, usize)> {
        match self.value(memory).shape() {
            [s, b, h] => Ok((*s, *b, *h)),
            other => Err(G2pError::Shape {
                op: "attention memory",
                left: other.to_vec(),
                right: vec![],
            }),
        }
    }

    /// `scores[b, s] = Σ_k query[b, k] · memory[s, b, k]`.
    pub fn attn_scores(&mut self, query: NodeId, memory: NodeId) -> Result<NodeId> {
        let (s_len, b_len, h) = self.memory_dims(memory)?;
        if self.value(query).shape() != [b_len, h] {
            return Err(mismatch("attn_scores", self.value(query), self.value(memory)));
        }
        let (q, m) = (self.value(query).data(), self.value(memory).data());
        let mut out = vec![T::zero(); b_len * s_len];
        for s in 0..s_len {
            for b in 0..b_len {
                let qr = &q[b * h..(b + 1) * h];
                let mr = &m[(s * b_len + b) * h..(s * b_len + b + 1) * h];
                out[b * s_len + s] = qr.iter().zip(mr).map(|(&x, &y)| x * y).sum();
            }
        }
        let out = Tensor::new(vec![b_len, s_len], out)?;
        self.push("attn_scores", out, Op::AttnScores { query, memory }, &[query, memory])
    }

    /// `context[b, k] = Σ_s weights[b, s] · memory[s, b, k]`.
    pub fn attn_context(&mut self, weights: NodeId, memory: NodeId) -> Result<NodeId> {
        let (s_len, b_len, h) = self.memory_dims(memory)?;
        if self.value(weights).shape() != [b_len, s_len] {
            return Err(mismatch("attn_context", self.value(weights), self.value(memory)));
        }
        let (w, m) = (self.value(weights).data(), self.value(memory).data());
        let mut out = vec![T::zero(); b_len * h];
        for s in 0..s_len {
            for b in 0..b_len {
                let wv = w[b * s_len + s];
                let mr = &m[(s * b_len + b) * h..(s * b_len + b + 1) * h];
                for (o, &mv) in out[b * h..(b + 1) * h].iter_mut().zip(mr) {
                    *o += wv * mv;
                }
            }
        }
        let out = Tensor::new(vec![b_len, h], out)?;
        self.push("attn_context", out, Op::AttnContext { weights, memory }, &[weights, memory])
    }

    /// Reverse-mode accumulation seeded with 1 at `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(G2pError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::filled(lv.shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let nodes = &self.nodes;
        // Lazily creates a zero accumulator for an input that needs a gradient.
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [T])| {
            if !nodes[id.0].requires_grad {
                return;
            }
            let slot = grads[id.0].get_or_insert_with(|| Tensor::zeros(nodes[id.0].value.shape()));
            f(slot.data_mut());
        };
        let gd = g.data();
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[1];
                acc(*a, &mut |da| mm_nt(gd, vb.data(), da, m, n, k));
                acc(*b, &mut |db| mm_tn(va.data(), gd, db, m, k, n));
            }
            Op::MatMulNT(a, b) => {
                let (va, vb) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = vb.shape()[0];
                acc(*a, &mut |da| mm_nn(gd, vb.data(), da, m, n, k));
                acc(*b, &mut |db| mm_tn(gd, va.data(), db, m, n, k));
            }
            Op::Add(a, b) => {
                acc(*a, &mut |da| add_into(da, gd));
                acc(*b, &mut |db| add_into(db, gd));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                acc(*a, &mut |da| {
                    for ((d, &gv), &y) in da.iter_mut().zip(gd).zip(vb) {
                        *d += gv * y;
                    }
                });
                acc(*b, &mut |db| {
                    for ((d, &gv), &x) in db.iter_mut().zip(gd).zip(va) {
                        *d += gv * x;
                    }
                });
            }
            Op::AddRow(a, bias) => {
                acc(*a, &mut |da| add_into(da, gd));
                let cols = nodes[bias.0].value.len();
                acc(*bias, &mut |db| {
                    for row in gd.chunks(cols) {
                        add_into(db, row);
                    }
                });
            }
            Op::Tanh(a) => acc(*a, &mut |da| {
                for ((d, &gv), &t) in da.iter_mut().zip(gd).zip(out.data()) {
                    *d += gv * (T::one() - t * t);
                }
            }),
            Op::Sigmoid(a) => acc(*a, &mut |da| {
                for ((d, &gv), &s) in da.iter_mut().zip(gd).zip(out.data()) {
                    *d += gv * s * (T::one() - s);
                }
            }),
            Op::SliceCols { src, start } => {
                let cols = nodes[src.0].value.shape()[1];
                let len = out.shape()[1];
                acc(*src, &mut |ds| {
                    for (r, grow) in gd.chunks(len).enumerate() {
                        add_into(&mut ds[r * cols + start..r * cols + start + len], grow);
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let total = out.shape()[1];
                let mut offset = 0;
                for p in parts {
                    let w = nodes[p.0].value.shape()[1];
                    acc(*p, &mut |dp| {
                        for (r, grow) in gd.chunks(total).enumerate() {
                            add_into(&mut dp[r * w..(r + 1) * w], &grow[offset..offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = nodes[p.0].value.len();
                    acc(*p, &mut |dp| add_into(dp, &gd[offset..offset + n]));
                    offset += n;
                }
            }
            Op::SelectRows { keep_first, a, b } => {
                let cols = out.shape()[1];
                acc(*a, &mut |da| {
                    for (r, &first) in keep_first.iter().enumerate() {
                        if first {
                            add_into(&mut da[r * cols..(r + 1) * cols], &gd[r * cols..(r + 1) * cols]);
                        }
                    }
                });
                acc(*b, &mut |db| {
                    for (r, &first) in keep_first.iter().enumerate() {
                        if !first {
                            add_into(&mut db[r * cols..(r + 1) * cols], &gd[r * cols..(r + 1) * cols]);
                        }
                    }
                });
            }
            Op::Embedding { table, ids } => {
                let dim = nodes[table.0].value.shape()[1];
                acc(*table, &mut |dt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * dim..(id + 1) * dim], &gd[r * dim..(r + 1) * dim]);
                    }
                });
            }
            // Masked entries have y = 0, so their gradient vanishes here too.
            Op::Softmax(a) | Op::MaskedSoftmax(a) => {
                let (rows, cols) = out.matrix_dims().unwrap();
                acc(*a, &mut |da| {
                    for r in 0..rows {
                        let y = &out.data()[r * cols..(r + 1) * cols];
                        let gr = &gd[r * cols..(r + 1) * cols];
                        let dot: T = y.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for c in 0..cols {
                            da[r * cols + c] += y[c] * (gr[c] - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let (rows, cols) = out.matrix_dims().unwrap();
                acc(*a, &mut |da| {
                    for r in 0..rows {
                        let y = &out.data()[r * cols..(r + 1) * cols];
                        let gr = &gd[r * cols..(r + 1) * cols];
                        let total: T = gr.iter().copied().sum();
                        for c in 0..cols {
                            da[r * cols + c] += gr[c] - y[c].exp() * total;
                        }
                    }
                });
            }
            Op::CrossEntropy {
                logits,
                targets,
                pad,
                count,
            } => {
                let lv = &nodes[logits.0].value;
                let vocab = lv.shape()[1];
                let scale = gd[0] / T::from_usize(*count).unwrap();
                acc(*logits, &mut |dl| {
                    for (r, &t) in targets.iter().enumerate() {
                        if t == *pad {
                            continue;
                        }
                        let p = super::softmax_vec(lv.row(r));
                        let row = &mut dl[r * vocab..(r + 1) * vocab];
                        for (c, (d, &pv)) in row.iter_mut().zip(&p).enumerate() {
                            let onehot = if c == t { T::one() } else { T::zero() };
                            *d += scale * (pv - onehot);
                        }
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |da| {
                for d in da.iter_mut() {
                    *d += gd[0];
                }
            }),
            Op::Stack(steps) => {
                let n = out.shape()[1] * out.shape()[2];
                for (s, step) in steps.iter().enumerate() {
                    acc(*step, &mut |ds| add_into(ds, &gd[s * n..(s + 1) * n]));
                }
            }
            Op::AttnScores { query, memory } => {
                let (q, m) = (nodes[query.0].value.data(), nodes[memory.0].value.data());
                let ms = nodes[memory.0].value.shape();
                let (s_len, b_len, h) = (ms[0], ms[1], ms[2]);
                acc(*query, &mut |dq| {
                    for s in 0..s_len {
                        for b in 0..b_len {
                            let gv = gd[b * s_len + s];
                            let mr = &m[(s * b_len + b) * h..(s * b_len + b + 1) * h];
                            for (d, &mv) in dq[b * h..(b + 1) * h].iter_mut().zip(mr) {
                                *d += gv * mv;
                            }
                        }
                    }
                });
                acc(*memory, &mut |dm| {
                    for s in 0..s_len {
                        for b in 0..b_len {
                            let gv = gd[b * s_len + s];
                            let qr = &q[b * h..(b + 1) * h];
                            let base = (s * b_len + b) * h;
                            for (d, &qv) in dm[base..base + h].iter_mut().zip(qr) {
                                *d += gv * qv;
                            }
                        }
                    }
                });
            }
            Op::AttnContext { weights, memory } => {
                let (w, m) = (nodes[weights.0].value.data(), nodes[memory.0].value.data());
                let ms = nodes[memory.0].value.shape();
                let (s_len, b_len, h) = (ms[0], ms[1], ms[2]);
                acc(*weights, &mut |dw| {
                    for s in 0..s_len {
                        for b in 0..b_len {
                            let mr = &m[(s * b_len + b) * h..(s * b_len + b + 1) * h];
                            let gr = &gd[b * h..(b + 1) * h];
                            dw[b * s_len + s] += mr.iter().zip(gr).map(|(&x, &y)| x * y).sum::<T>();
                        }
                    }
                });
                acc(*memory, &mut |dm| {
                    for s in 0..s_len {
                        for b in 0..b_len {
                            let wv = w[b * s_len + s];
                            let base = (s * b_len + b) * h;
                            for (d, &gv) in dm[base..base + h].iter_mut().zip(&gd[b * h..(b + 1) * h]) {
                                *d += wv * gv;
                            }
                        }
                    }
                });
            }
        }
    }
}

fn add_into<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when the node does not influence the loss or is a constant.
    pub fn get(&self, id: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    /// Gradient of a node, or zeros shaped like `like` if it has none.
    pub fn get_or_zeros(&self, id: NodeId, like: &Tensor<T>) -> Tensor<T> {
        self.get(id).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor<T>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}
