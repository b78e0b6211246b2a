//! Define-by-run reverse-mode differentiation over a closed set of
//! array primitives.
//!
//! Every builder method computes its value eagerly and appends a node to
//! the tape. [`Graph::backward`] walks the tape in reverse, producing the
//! gradient of a scalar node with respect to every node that depends on a
//! parameter or differentiable leaf. [`Graph::accumulate_into`] then adds
//! parameter gradients into a [`ParamSet`].

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numeric::array::matmul;
use crate::numeric::ops;
use crate::numeric::{Array, ParamId, ParamSet, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

enum Op<T> {
    Leaf,
    Param(ParamId),
    Constant,
    Affine {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    MatMulNT {
        a: NodeId,
        b: NodeId,
    },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Scale(NodeId, T),
    MulConst(NodeId, Array<T>),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    GatherRows {
        x: NodeId,
        rows: Vec<usize>,
    },
    Lstm {
        x: NodeId,
        h: NodeId,
        c: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b: NodeId,
        gates: Array<T>,
        tanh_c: Array<T>,
    },
    SoftmaxXent {
        logits: NodeId,
        targets: Vec<usize>,
        weights: Vec<T>,
        probs: Array<T>,
        row_nll: Vec<T>,
    },
    Sum(NodeId),
    SumSquares(NodeId),
}

struct Node<T> {
    value: Array<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// A recorded forward computation.
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
    param_nodes: HashMap<ParamId, NodeId>,
    grads: Vec<Option<Array<T>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
            grads: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array<T> {
        &self.nodes[id.0].value
    }

    /// Gradient of the last `backward` target with respect to `id`, if
    /// `id` was reached.
    pub fn grad(&self, id: NodeId) -> Option<&Array<T>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    fn push(&mut self, value: Array<T>, op: Op<T>, parents: &[NodeId]) -> NodeId {
        let needs_grad = match op {
            Op::Leaf | Op::Param(_) => true,
            Op::Constant => false,
            _ => parents.iter().any(|p| self.nodes[p.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Differentiable input that is not a parameter.
    pub fn leaf(&mut self, value: Array<T>) -> NodeId {
        self.push(value, Op::Leaf, &[])
    }

    pub fn constant(&mut self, value: Array<T>) -> NodeId {
        self.push(value, Op::Constant, &[])
    }

    /// Node holding the current value of a parameter. Repeated calls with
    /// the same id return the same node.
    pub fn param(&mut self, params: &ParamSet<T>, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let entry = params.entry(id);
        let n = if entry.flags.trainable {
            self.push(entry.value.clone(), Op::Param(id), &[])
        } else {
            self.push(entry.value.clone(), Op::Constant, &[])
        };
        self.param_nodes.insert(id, n);
        n
    }

    pub fn affine(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        let value = ops::affine(self.value(x), self.value(w), b.map(|b| self.value(b)))?;
        let mut parents = vec![x, w];
        parents.extend(b);
        Ok(self.push(value, Op::Affine { x, w, b }, &parents))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = matmul(self.value(a), false, self.value(b), true)?;
        Ok(self.push(value, Op::MatMulNT { a, b }, &[a, b]))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        Ok(self.push(v, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let mut v = self.value(a).clone();
        for (x, &y) in v.data_mut().iter_mut().zip(self.value(b).data()) {
            *x = *x - y;
        }
        Ok(self.push(v, Op::Sub(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: NodeId, s: T) -> NodeId {
        let v = self.value(x).map(|e| e * s);
        self.push(v, Op::Scale(x, s), &[x])
    }

    /// Elementwise product with a constant array (dropout masks).
    pub fn mul_const(&mut self, x: NodeId, mask: Array<T>) -> Result<NodeId> {
        if mask.shape() != self.value(x).shape() {
            return Err(Error::shape(
                "mul_const",
                format!("{:?} vs mask {:?}", self.value(x).shape(), mask.shape()),
            ));
        }
        let mut v = self.value(x).clone();
        for (a, &m) in v.data_mut().iter_mut().zip(mask.data()) {
            *a = *a * m;
        }
        Ok(self.push(v, Op::MulConst(x, mask), &[x]))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|e| e.tanh());
        self.push(v, Op::Tanh(x), &[x])
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(ops::sigmoid);
        self.push(v, Op::Sigmoid(x), &[x])
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|e| e.max(T::zero()));
        self.push(v, Op::Relu(x), &[x])
    }

    pub fn concat_cols(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(Error::Empty { what: "concat input" })?;
        let n = self.value(first).rows();
        if xs.iter().any(|&x| self.value(x).rows() != n) {
            return Err(Error::shape("concat_cols", "row counts differ"));
        }
        let total: usize = xs.iter().map(|&x| self.value(x).cols()).sum();
        let mut out = Array::zeros(&[n, total]);
        for r in 0..n {
            let mut off = 0;
            for &x in xs {
                let src = self.nodes[x.0].value.row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(xs.to_vec()), xs))
    }

    pub fn concat_rows(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = *xs.first().ok_or(Error::Empty { what: "concat input" })?;
        let c = self.value(first).cols();
        if xs.iter().any(|&x| self.value(x).cols() != c) {
            return Err(Error::shape("concat_rows", "column counts differ"));
        }
        let rows: usize = xs.iter().map(|&x| self.value(x).rows()).sum();
        let mut data = Vec::with_capacity(rows * c);
        for &x in xs {
            data.extend_from_slice(self.value(x).data());
        }
        let out = Array::from_vec(&[rows, c], data)?;
        Ok(self.push(out, Op::ConcatRows(xs.to_vec()), xs))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let src = self.value(x);
        if start + len > src.cols() {
            return Err(Error::shape(
                "slice_cols",
                format!("{start}..{} of {:?}", start + len, src.shape()),
            ));
        }
        let n = src.rows();
        let mut out = Array::zeros(&[n, len]);
        for r in 0..n {
            out.row_mut(r).copy_from_slice(&src.row(r)[start..start + len]);
        }
        Ok(self.push(out, Op::SliceCols { x, start }, &[x]))
    }

    /// Row gather; with a parameter table this is an embedding lookup.
    pub fn gather_rows(&mut self, x: NodeId, rows: &[usize]) -> Result<NodeId> {
        let src = self.value(x);
        let n = src.rows();
        if let Some(&bad) = rows.iter().find(|&&r| r >= n) {
            return Err(Error::shape(
                "gather_rows",
                format!("row {bad} of {:?}", src.shape()),
            ));
        }
        let c = src.cols();
        let mut data = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            data.extend_from_slice(src.row(r));
        }
        let out = Array::from_vec(&[rows.len(), c], data)?;
        Ok(self.push(
            out,
            Op::GatherRows {
                x,
                rows: rows.to_vec(),
            },
            &[x],
        ))
    }

    /// One LSTM step; returns `(h_t, c_t)`.
    pub fn lstm_cell(
        &mut self,
        x: NodeId,
        h: NodeId,
        c: NodeId,
        w_ih: NodeId,
        w_hh: NodeId,
        b: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let step = ops::lstm_cell(
            self.value(x),
            self.value(h),
            self.value(c),
            self.value(w_ih),
            self.value(w_hh),
            self.value(b),
        )?;
        let (n, hidden) = (step.h.rows(), step.h.cols());
        let mut joined = Array::zeros(&[n, 2 * hidden]);
        for r in 0..n {
            let row = joined.row_mut(r);
            row[..hidden].copy_from_slice(step.h.row(r));
            row[hidden..].copy_from_slice(step.c.row(r));
        }
        let node = self.push(
            joined,
            Op::Lstm {
                x,
                h,
                c,
                w_ih,
                w_hh,
                b,
                gates: step.gates,
                tanh_c: step.tanh_c,
            },
            &[x, h, c, w_ih, w_hh, b],
        );
        let h_t = self.slice_cols(node, 0, hidden)?;
        let c_t = self.slice_cols(node, hidden, hidden)?;
        Ok((h_t, c_t))
    }

    /// Weighted sum over rows of `-ln softmax(logits)[target]`. Rows with
    /// weight zero (padding) contribute neither value nor gradient.
    pub fn softmax_xent_sum(
        &mut self,
        logits: NodeId,
        targets: &[usize],
        weights: Option<&[T]>,
    ) -> Result<NodeId> {
        let l = self.value(logits);
        let (n, v) = (l.rows(), l.cols());
        if targets.len() != n {
            return Err(Error::shape(
                "softmax_xent",
                format!("{} targets for logits {:?}", targets.len(), l.shape()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= v) {
            return Err(Error::invalid(format!("target {bad} outside 0..{v}")));
        }
        let weights: Vec<T> = match weights {
            Some(w) if w.len() == n => w.to_vec(),
            Some(w) => {
                return Err(Error::shape(
                    "softmax_xent",
                    format!("{} weights for {n} rows", w.len()),
                ))
            }
            None => vec![T::one(); n],
        };
        let logp = ops::log_softmax_rows(l);
        let probs = logp.map(|x| x.exp());
        let row_nll: Vec<T> = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| -logp.get2(r, t))
            .collect();
        let total = T::total(
            row_nll
                .iter()
                .zip(&weights)
                .filter(|(_, &w)| w != T::zero())
                .map(|(&l, &w)| l * w),
        );
        Ok(self.push(
            Array::scalar(total),
            Op::SoftmaxXent {
                logits,
                targets: targets.to_vec(),
                weights,
                probs,
                row_nll,
            },
            &[logits],
        ))
    }

    /// Mean cross-entropy over all rows.
    pub fn softmax_xent(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        if targets.is_empty() {
            return Err(Error::Empty { what: "target list" });
        }
        let s = self.softmax_xent_sum(logits, targets, None)?;
        Ok(self.scale(s, T::one() / T::lit(targets.len() as f64)))
    }

    /// Per-row negative log-likelihoods cached by a cross-entropy node.
    pub fn row_nll(&self, id: NodeId) -> Option<&[T]> {
        match &self.nodes[id.0].op {
            Op::SoftmaxXent { row_nll, .. } => Some(row_nll),
            _ => None,
        }
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = Array::scalar(self.value(x).sum());
        self.push(v, Op::Sum(x), &[x])
    }

    pub fn sum_squares(&mut self, x: NodeId) -> NodeId {
        let v = Array::scalar(self.value(x).sum_squares());
        self.push(v, Op::SumSquares(x), &[x])
    }

    /// Reverse pass from the scalar node `loss`.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::invalid("loss node does not belong to this graph"));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Array<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array::full(self.value(loss).shape(), T::one()));

        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.propagate(i, &gy, &mut grads)?;
            grads[i] = Some(gy);
        }
        self.grads = grads;
        Ok(())
    }

    /// Adds the gradients of parameter nodes into `params`.
    pub fn accumulate_into(&self, params: &mut ParamSet<T>) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(Some(g)) = self.grads.get(i) {
                    let dst = params.grad_mut(id);
                    if dst.shape() != g.shape() {
                        return Err(Error::shape(
                            "accumulate",
                            format!("grad {:?} into {:?}", g.shape(), dst.shape()),
                        ));
                    }
                    dst.add_assign(g);
                }
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, gy: &Array<T>, grads: &mut [Option<Array<T>>]) -> Result<()> {
        let node = &self.nodes[i];
        let needs = |id: NodeId| self.nodes[id.0].needs_grad;
        let acc = |id: NodeId, g: Array<T>, grads: &mut [Option<Array<T>>]| match &mut grads[id.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        };
        match &node.op {
            Op::Leaf | Op::Param(_) | Op::Constant => {}
            Op::Affine { x, w, b } => {
                let (xv, wv) = (self.value(*x), self.value(*w));
                if needs(*x) {
                    acc(*x, matmul(gy, false, wv, true)?, grads);
                }
                if needs(*w) {
                    acc(*w, matmul(xv, true, gy, false)?, grads);
                }
                if let Some(b) = b {
                    if needs(*b) {
                        acc(*b, col_sum(gy, self.value(*b).shape()), grads);
                    }
                }
            }
            Op::MatMulNT { a, b } => {
                if needs(*a) {
                    acc(*a, matmul(gy, false, self.value(*b), false)?, grads);
                }
                if needs(*b) {
                    acc(*b, matmul(gy, true, self.value(*a), false)?, grads);
                }
            }
            Op::Add(a, b) => {
                if needs(*a) {
                    acc(*a, gy.clone(), grads);
                }
                if needs(*b) {
                    acc(*b, gy.clone(), grads);
                }
            }
            Op::Sub(a, b) => {
                if needs(*a) {
                    acc(*a, gy.clone(), grads);
                }
                if needs(*b) {
                    acc(*b, gy.map(|v| -v), grads);
                }
            }
            Op::Scale(x, s) => {
                let s = *s;
                acc(*x, gy.map(|v| v * s), grads);
            }
            Op::MulConst(x, mask) => {
                let mut g = gy.clone();
                for (a, &m) in g.data_mut().iter_mut().zip(mask.data()) {
                    *a = *a * m;
                }
                acc(*x, g, grads);
            }
            Op::Tanh(x) => {
                let mut g = gy.clone();
                for (a, &y) in g.data_mut().iter_mut().zip(node.value.data()) {
                    *a = *a * (T::one() - y * y);
                }
                acc(*x, g, grads);
            }
            Op::Sigmoid(x) => {
                let mut g = gy.clone();
                for (a, &y) in g.data_mut().iter_mut().zip(node.value.data()) {
                    *a = *a * y * (T::one() - y);
                }
                acc(*x, g, grads);
            }
            Op::Relu(x) => {
                let mut g = gy.clone();
                for (a, &y) in g.data_mut().iter_mut().zip(node.value.data()) {
                    if y <= T::zero() {
                        *a = T::zero();
                    }
                }
                acc(*x, g, grads);
            }
            Op::ConcatCols(xs) => {
                let n = gy.rows();
                let mut off = 0;
                for &x in xs {
                    let c = self.value(x).cols();
                    if needs(x) {
                        let mut g = Array::zeros(self.value(x).shape());
                        for r in 0..n {
                            g.row_mut(r).copy_from_slice(&gy.row(r)[off..off + c]);
                        }
                        acc(x, g, grads);
                    }
                    off += c;
                }
            }
            Op::ConcatRows(xs) => {
                let c = gy.cols();
                let mut off = 0;
                for &x in xs {
                    let len = self.value(x).rows() * c;
                    if needs(x) {
                        let g = Array::from_vec(
                            self.value(x).shape(),
                            gy.data()[off..off + len].to_vec(),
                        )?;
                        acc(x, g, grads);
                    }
                    off += len;
                }
            }
            Op::SliceCols { x, start } => {
                let mut g = Array::zeros(self.value(*x).shape());
                let len = gy.cols();
                for r in 0..gy.rows() {
                    g.row_mut(r)[*start..*start + len].copy_from_slice(gy.row(r));
                }
                acc(*x, g, grads);
            }
            Op::GatherRows { x, rows } => {
                let mut g = Array::zeros(self.value(*x).shape());
                for (k, &r) in rows.iter().enumerate() {
                    for (d, &s) in g.row_mut(r).iter_mut().zip(gy.row(k)) {
                        *d = *d + s;
                    }
                }
                acc(*x, g, grads);
            }
            Op::Lstm {
                x,
                h,
                c,
                w_ih,
                w_hh,
                b,
                gates,
                tanh_c,
            } => {
                let hidden = tanh_c.cols();
                let n = tanh_c.rows();
                let c_prev = self.value(*c);
                let mut dpre = Array::zeros(&[n, 4 * hidden]);
                let mut dc_prev = Array::zeros(&[n, hidden]);
                for r in 0..n {
                    let g = gates.row(r);
                    let dy = gy.row(r);
                    let tc = tanh_c.row(r);
                    let cp = c_prev.row(r);
                    let dp = dpre.row_mut(r);
                    for j in 0..hidden {
                        let (ig, fg, cg, og) = (g[j], g[hidden + j], g[2 * hidden + j], g[3 * hidden + j]);
                        let dh = dy[j];
                        let dc = dy[hidden + j] + dh * og * (T::one() - tc[j] * tc[j]);
                        let d_o = dh * tc[j];
                        let d_i = dc * cg;
                        let d_g = dc * ig;
                        let d_f = dc * cp[j];
                        dp[j] = d_i * ig * (T::one() - ig);
                        dp[hidden + j] = d_f * fg * (T::one() - fg);
                        dp[2 * hidden + j] = d_g * (T::one() - cg * cg);
                        dp[3 * hidden + j] = d_o * og * (T::one() - og);
                        dc_prev.row_mut(r)[j] = dc * fg;
                    }
                }
                if needs(*x) {
                    acc(*x, matmul(&dpre, false, self.value(*w_ih), true)?, grads);
                }
                if needs(*h) {
                    acc(*h, matmul(&dpre, false, self.value(*w_hh), true)?, grads);
                }
                if needs(*c) {
                    acc(*c, dc_prev, grads);
                }
                if needs(*w_ih) {
                    acc(*w_ih, matmul(self.value(*x), true, &dpre, false)?, grads);
                }
                if needs(*w_hh) {
                    acc(*w_hh, matmul(self.value(*h), true, &dpre, false)?, grads);
                }
                if needs(*b) {
                    acc(*b, col_sum(&dpre, self.value(*b).shape()), grads);
                }
            }
            Op::SoftmaxXent {
                logits,
                targets,
                weights,
                probs,
                ..
            } => {
                let s = gy.item();
                let mut g = probs.clone();
                for (r, (&t, &w)) in targets.iter().zip(weights).enumerate() {
                    let row = g.row_mut(r);
                    if w == T::zero() {
                        row.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    row[t] = row[t] - T::one();
                    let k = s * w;
                    row.iter_mut().for_each(|v| *v = *v * k);
                }
                acc(*logits, g, grads);
            }
            Op::Sum(x) => {
                acc(*x, Array::full(self.value(*x).shape(), gy.item()), grads);
            }
            Op::SumSquares(x) => {
                let k = gy.item() + gy.item();
                acc(*x, self.value(*x).map(|v| v * k), grads);
            }
        }
        Ok(())
    }
}

fn col_sum<T: Scalar>(g: &Array<T>, shape: &[usize]) -> Array<T> {
    let mut out = Array::zeros(shape);
    let c = g.cols();
    for r in 0..g.rows() {
        for (o, &v) in out.data_mut()[..c].iter_mut().zip(g.row(r)) {
            *o = *o + v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ParamFlags;

    #[test]
    fn backward_on_empty_tape_errors() {
        let mut g = Graph::<f64>::new();
        let fake = NodeId(0);
        assert!(matches!(g.backward(fake), Err(Error::EmptyTape)));
    }

    #[test]
    fn sum_gives_ones() {
        let mut ps = ParamSet::<f64>::new();
        let w = ps
            .insert("w", Array::from_f64(&[2, 3], &[1., -2., 3., 0.5, 0., 9.]).unwrap(), ParamFlags::default())
            .unwrap();
        let mut g = Graph::new();
        let wn = g.param(&ps, w);
        let s = g.sum(wn);
        g.backward(s).unwrap();
        g.accumulate_into(&mut ps).unwrap();
        assert!(ps.grad(w).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn xent_grad_is_softmax_minus_onehot() {
        let mut g = Graph::<f64>::new();
        let logits = g.leaf(Array::full(&[1, 4], 0.3));
        let loss = g.softmax_xent(logits, &[2]).unwrap();
        g.backward(loss).unwrap();
        let gl = g.grad(logits).unwrap();
        for (j, &v) in gl.data().iter().enumerate() {
            let want = 0.25 - if j == 2 { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-15);
        }
    }

    #[test]
    fn padded_rows_get_no_gradient() {
        let mut g = Graph::<f64>::new();
        let logits = g.leaf(Array::from_f64(&[2, 2], &[0.1, 0.7, -0.3, 0.2]).unwrap());
        let loss = g.softmax_xent_sum(logits, &[0, 1], Some(&[1.0, 0.0])).unwrap();
        g.backward(loss).unwrap();
        assert!(g.grad(logits).unwrap().row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unreached_params_get_zero() {
        let mut ps = ParamSet::<f64>::new();
        let a = ps.insert("a", Array::ones(&[2]), ParamFlags::default()).unwrap();
        let b = ps.insert("b", Array::ones(&[2]), ParamFlags::default()).unwrap();
        let mut g = Graph::new();
        let an = g.param(&ps, a);
        let s = g.sum_squares(an);
        g.backward(s).unwrap();
        g.accumulate_into(&mut ps).unwrap();
        assert_eq!(ps.grad(a).data(), &[2.0, 2.0]);
        assert_eq!(ps.grad(b).data(), &[0.0, 0.0]);
    }
}
