//! Tape-based reverse-mode differentiation over 2-D matrices.
//!
//! A [`Graph`] borrows the parameters immutably, so several graphs (one per
//! training example) can run in parallel; their [`Grads`] are summed
//! afterwards.

use super::matrix::{dot, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    /// Total number of scalars.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|m| m.data.len()).sum()
    }
}

/// Gradient per parameter; `None` for parameters the graph never touched.
#[derive(Debug, Clone)]
pub struct Grads {
    pub slots: Vec<Option<Matrix>>,
}

impl Grads {
    pub fn new(n: usize) -> Self {
        Grads {
            slots: vec![None; n],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.slots[id.0].as_ref()
    }

    fn slot(&mut self, id: ParamId, rows: usize, cols: usize) -> &mut Matrix {
        self.slots[id.0].get_or_insert_with(|| Matrix::zeros(rows, cols))
    }

    pub fn accumulate(&mut self, id: ParamId, g: &Matrix) {
        let slot = self.slot(id, g.rows, g.cols);
        slot.add_assign(g);
    }

    pub fn merge(&mut self, other: &Grads) {
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(ParamId(i), g);
            }
        }
    }

    pub fn scale(&mut self, s: f32) {
        for g in self.slots.iter_mut().flatten() {
            g.scale(s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.slots.iter().flatten().map(Matrix::sum_squares).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    Embed { table: ParamId, ids: Vec<usize> },
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f32),
    Relu(Var),
    Softmax(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Matrix, inv_std: Vec<f32> },
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Matrix },
}

struct Node {
    /// `None` for parameters, which are read from the store.
    value: Option<Matrix>,
    op: Op,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    losses: Vec<f64>,
}

const LN_EPS: f32 = 1e-5;

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            losses: Vec::new(),
        }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.store.get(*id),
            (None, _) => unreachable!("only parameter nodes borrow their value"),
        }
    }

    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    /// Rows `ids` of the table parameter.
    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Var {
        let t = self.store.get(table);
        let mut out = Matrix::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(
            out,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_bt(self.value(b));
        self.push(v, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// Broadcast-add the 1×n `row` to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let mut v = self.value(a).clone();
        let r = self.value(row);
        assert_eq!((r.rows, r.cols), (1, v.cols), "add_row shape mismatch");
        for i in 0..v.rows {
            for (x, &b) in v.row_mut(i).iter_mut().zip(&r.data) {
                *x += b;
            }
        }
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, s: f32) -> Var {
        let mut v = self.value(a).clone();
        v.scale(s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for x in &mut v.data {
            *x = x.max(0.0);
        }
        self.push(v, Op::Relu(a))
    }

    /// Row-wise softmax; with `causal`, entry (i, j) for j > i is masked out.
    pub fn softmax_rows(&mut self, a: Var, causal: bool) -> Var {
        let mut v = self.value(a).clone();
        for i in 0..v.rows {
            let row = v.row_mut(i);
            let limit = if causal { (i + 1).min(row.len()) } else { row.len() };
            let max = row[..limit].iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let mut sum = 0.0;
            for x in &mut row[..limit] {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in &mut row[..limit] {
                *x /= sum;
            }
            for x in &mut row[limit..] {
                *x = 0.0;
            }
        }
        self.push(v, Op::Softmax(a))
    }

    /// Row-wise layer normalization with 1×n `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let (rows, cols) = xv.shape();
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = xv.row(i);
            let mean = row.iter().sum::<f32>() / cols as f32;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / cols as f32;
            let is = 1.0 / (var + LN_EPS).sqrt();
            inv_std.push(is);
            for (h, &v) in xhat.row_mut(i).iter_mut().zip(row) {
                *h = (v - mean) * is;
            }
        }
        let g = self.value(gamma);
        let b = self.value(beta);
        let mut out = xhat.clone();
        for i in 0..rows {
            for ((o, &gv), &bv) in out.row_mut(i).iter_mut().zip(&g.data).zip(&b.data) {
                *o = *o * gv + bv;
            }
        }
        self.push(
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let xv = self.value(x);
        let mut out = Matrix::zeros(xv.rows, end - start);
        for i in 0..xv.rows {
            out.row_mut(i).copy_from_slice(&xv.row(i)[start..end]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Var {
        let xv = self.value(x);
        let out = Matrix::from_vec(end - start, xv.cols, xv.data[start * xv.cols..end * xv.cols].to_vec());
        self.push(out, Op::SliceRows { x, start })
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let pv = self.value(p);
            for i in 0..rows {
                out.row_mut(i)[offset..offset + pv.cols].copy_from_slice(pv.row(i));
            }
            offset += pv.cols;
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Summed token cross-entropy `Σ_i −log softmax(logits_i)[targets_i]`
    /// as a 1×1 node; the f64 sum is kept for [`Graph::loss`].
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Var {
        let lv = self.value(logits);
        assert_eq!(lv.rows, targets.len(), "one target per logits row");
        let mut probs = Matrix::zeros(lv.rows, lv.cols);
        let mut total = 0.0f64;
        for (i, &t) in targets.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
            let sum: f64 = row.iter().map(|&z| (z as f64 - max).exp()).sum();
            let lse = max + sum.ln();
            total += lse - row[t] as f64;
            for (p, &z) in probs.row_mut(i).iter_mut().zip(row) {
                *p = ((z as f64 - lse).exp()) as f32;
            }
        }
        self.losses.push(total);
        
        self.push(
            Matrix::from_vec(1, 1, vec![total as f32]),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// f64 value of the most recent cross-entropy node.
    pub fn last_loss(&self) -> f64 {
        *self.losses.last().expect("no loss node in graph")
    }

    fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    /// Gradients of the 1×1 node `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));
        let mut out = Grads::new(self.store.len());
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::Embed { table, ids } => {
                    let t = self.store.get(*table);
                    let slot = out.slot(*table, t.rows, t.cols);
                    for (r, &id) in ids.iter().enumerate() {
                        for (s, &v) in slot.row_mut(id).iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let da = g.matmul_bt(self.value(*b));
                    let db = self.value(*a).matmul_at(&g);
                    Self::accumulate(&mut grads, *a, da);
                    Self::accumulate(&mut grads, *b, db);
                }
                Op::MatMulBt(a, b) => {
                    let da = g.matmul(self.value(*b));
                    let db = g.matmul_at(self.value(*a));
                    Self::accumulate(&mut grads, *a, da);
                    Self::accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    Self::accumulate(&mut grads, *a, g.clone());
                    Self::accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, row) => {
                    Self::accumulate(&mut grads, *row, g.col_sums());
                    Self::accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => {
                    let mut d = g;
                    d.scale(*s);
                    Self::accumulate(&mut grads, *a, d);
                }
                Op::Relu(a) => {
                    let mut d = g;
                    for (dv, &x) in d.data.iter_mut().zip(&self.value(*a).data) {
                        if x <= 0.0 {
                            *dv = 0.0;
                        }
                    }
                    Self::accumulate(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    let y = self.value(Var(idx));
                    let mut d = Matrix::zeros(y.rows, y.cols);
                    for i in 0..y.rows {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let s = dot(yr, gr);
                        for ((dv, &yv), &gv) in d.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *dv = yv * (gv - s);
                        }
                    }
                    Self::accumulate(&mut grads, *a, d);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let gm = self.value(*gamma);
                    let (rows, cols) = xhat.shape();
                    let mut dgamma = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    for (i, &inv) in inv_std.iter().enumerate().take(rows) {
                        let gr = g.row(i);
                        let hr = xhat.row(i);
                        let mut dxhat = vec![0.0f32; cols];
                        for j in 0..cols {
                            dgamma.data[j] += gr[j] * hr[j];
                            dxhat[j] = gr[j] * gm.data[j];
                        }
                        let mean_d = dxhat.iter().sum::<f32>() / cols as f32;
                        let mean_dh = dot(&dxhat, hr) / cols as f32;
                        for (j, o) in dx.row_mut(i).iter_mut().enumerate() {
                            *o = inv * (dxhat[j] - mean_d - hr[j] * mean_dh);
                        }
                    }
                    Self::accumulate(&mut grads, *beta, g.col_sums());
                    Self::accumulate(&mut grads, *gamma, dgamma);
                    Self::accumulate(&mut grads, *x, dx);
                }
                Op::SliceCols { x, start } => {
                    let xv = self.value(*x);
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    for i in 0..g.rows {
                        d.row_mut(i)[*start..*start + g.cols].copy_from_slice(g.row(i));
                    }
                    Self::accumulate(&mut grads, *x, d);
                }
                Op::SliceRows { x, start } => {
                    let xv = self.value(*x);
                    let mut d = Matrix::zeros(xv.rows, xv.cols);
                    d.data[start * xv.cols..(start + g.rows) * xv.cols].copy_from_slice(&g.data);
                    Self::accumulate(&mut grads, *x, d);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut d = Matrix::zeros(g.rows, cols);
                        for i in 0..g.rows {
                            d.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + cols]);
                        }
                        offset += cols;
                        Self::accumulate(&mut grads, p, d);
                    }
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let scale = g.data[0];
                    let mut d = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        d.data[i * d.cols + t] -= 1.0;
                    }
                    d.scale(scale);
                    Self::accumulate(&mut grads, *logits, d);
                }
            }
        }
        out
    }
}
