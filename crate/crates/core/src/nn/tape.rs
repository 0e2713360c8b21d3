//! Reverse-mode gradient tape over 2-D tensors.
//!
//! Every op records its output value and the handles of its inputs. A
//! single call to [`Tape::backward`] walks the records in reverse and
//! accumulates gradients for the parameters that were read through
//! [`Tape::param`].

use std::collections::HashMap;
use std::rc::Rc;

use rand::Rng;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_nt_acc, matmul_tn_acc, Tensor};
use super::NnError;

/// Floor applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MulConst(Var, Rc<Vec<f64>>),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    GatherRows(Var, Rc<Vec<usize>>),
    MeanRows(Var),
    Sum(Var),
    MaskedSoftmax(Var),
    Scatter(Var, Rc<Vec<Option<usize>>>),
    Nll(Var, Rc<Vec<usize>>),
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    stochastic: bool,
    consumed: bool,
}

fn dims(t: &Tensor) -> (usize, usize) {
    (t.rows(), t.cols())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
            stochastic: false,
            consumed: false,
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// True once an active dropout mask has been recorded.
    pub fn is_stochastic(&self) -> bool {
        self.stochastic
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(op: &str, a: &Tensor, b: &Tensor) -> NnError {
        NnError::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape()))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Reads a trainable tensor; repeated reads share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let value = self.store.value(id).clone();
        let v = self.push(value, Op::Param(id));
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let ((m, k), (k2, n)) = (dims(ta), dims(tb));
        if k != k2 {
            return Err(Self::shape_err("matmul", ta, tb));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(ta.data(), tb.data(), &mut out, m, k, n);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NnError> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = ta.data()[i * n + j];
            }
        }
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a, b)))
    }

    /// Adds the `[1, n]` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, n) = dims(ta);
        if dims(tb) != (1, n) {
            return Err(Self::shape_err("add_row", ta, tb));
        }
        let mut out = ta.data().to_vec();
        for row in out.chunks_mut(n) {
            for (o, bv) in row.iter_mut().zip(tb.data()) {
                *o += bv;
            }
        }
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::AddRow(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(value, Op::Scale(a, factor))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data).expect("same shape");
        self.push(value, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let m = self.value(parts[0]).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rows() != m {
                return Err(Self::shape_err("concat_cols", self.value(parts[0]), t));
            }
            widths.push(t.cols());
        }
        let n: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let n = self.value(parts[0]).cols();
        let mut out = Vec::new();
        let mut m = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != n {
                return Err(Self::shape_err("concat_rows", self.value(parts[0]), t));
            }
            out.extend_from_slice(t.data());
            m += t.rows();
        }
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::ConcatRows(parts.to_vec())))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NnError> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        if start >= end || end > n {
            return Err(NnError::Shape(format!("slice_cols {start}..{end} of {n} columns")));
        }
        let mut out = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            out.extend_from_slice(&ta.row(r)[start..end]);
        }
        Ok(self.push(Tensor::matrix(m, end - start, out)?, Op::SliceCols(a, start)))
    }

    /// Stacks the listed rows of `a` (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, rows: Vec<usize>) -> Result<Var, NnError> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in &rows {
            if r >= m {
                return Err(NnError::Shape(format!("gather_rows: row {r} of {m}")));
            }
            out.extend_from_slice(ta.row(r));
        }
        let value = Tensor::matrix(rows.len(), n, out)?;
        Ok(self.push(value, Op::GatherRows(a, Rc::new(rows))))
    }

    pub fn row(&mut self, a: Var, r: usize) -> Result<Var, NnError> {
        self.gather_rows(a, vec![r])
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        let mut out = vec![0.0; n];
        for r in 0..m {
            for (o, v) in out.iter_mut().zip(ta.row(r)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        self.push(Tensor::row_vector(out), Op::MeanRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// Row-wise softmax restricted to `mask` entries; masked-out entries
    /// are exactly zero. Every row needs at least one unmasked entry.
    pub fn masked_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var, NnError> {
        let ta = self.value(a);
        let (m, n) = dims(ta);
        if mask.len() != m * n {
            return Err(NnError::Shape(format!("mask of {} for {m}x{n}", mask.len())));
        }
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            let row = ta.row(r);
            let keep = &mask[r * n..(r + 1) * n];
            let max = row
                .iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(&x, _)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            if !keep.contains(&true) {
                return Err(NnError::Shape(format!("masked_softmax: row {r} is fully masked")));
            }
            let o = &mut out[r * n..(r + 1) * n];
            let mut total = 0.0;
            for c in 0..n {
                if keep[c] {
                    o[c] = (row[c] - max).exp();
                    total += o[c];
                }
            }
            o.iter_mut().for_each(|x| *x /= total);
        }
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MaskedSoftmax(a)))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, NnError> {
        let len = self.value(a).len();
        self.masked_softmax(a, &vec![true; len])
    }

    /// Builds a `[rows, cols]` matrix whose entry `e` is `g[index[e]]`, or
    /// zero where `index[e]` is `None`. `g` must be a column `[k, 1]`.
    pub fn scatter(
        &mut self,
        g: Var,
        index: Vec<Option<usize>>,
        rows: usize,
        cols: usize,
    ) -> Result<Var, NnError> {
        let tg = self.value(g);
        if tg.cols() != 1 || index.len() != rows * cols {
            return Err(NnError::Shape(format!(
                "scatter {:?} into {rows}x{cols} with {} indices",
                tg.shape(),
                index.len()
            )));
        }
        let k = tg.rows();
        let mut out = vec![0.0; rows * cols];
        for (o, idx) in out.iter_mut().zip(&index) {
            if let Some(i) = *idx {
                if i >= k {
                    return Err(NnError::Shape(format!("scatter index {i} of {k}")));
                }
                *o = tg.data()[i];
            }
        }
        let value = Tensor::matrix(rows, cols, out)?;
        Ok(self.push(value, Op::Scatter(g, Rc::new(index))))
    }

    /// `-Σ_r ln max(p[r, gold[r]], 1e-12)` for row-stochastic `p`.
    pub fn nll(&mut self, p: Var, gold: Vec<usize>) -> Result<Var, NnError> {
        let tp = self.value(p);
        let (m, n) = dims(tp);
        if gold.len() != m || gold.iter().any(|&g| g >= n) {
            return Err(NnError::Shape(format!("nll: labels {gold:?} for {m}x{n}")));
        }
        let loss: f64 = gold
            .iter()
            .enumerate()
            .map(|(r, &g)| -tp.get(r, g).max(LOG_FLOOR).ln())
            .sum();
        Ok(self.push(Tensor::scalar(loss), Op::Nll(p, Rc::new(gold))))
    }

    /// Inverted dropout. Identity when `train` is false or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        rate: f64,
        rng: &mut R,
        train: bool,
    ) -> Result<Var, NnError> {
        let mask = dropout_mask(self.value(a).len(), rate, rng, train)?;
        match mask {
            None => Ok(a),
            Some(mask) => {
                self.stochastic = true;
                let ta = self.value(a);
                let data = ta.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
                let value = Tensor::new(ta.shape().to_vec(), data)?;
                Ok(self.push(value, Op::MulConst(a, Rc::new(mask))))
            }
        }
    }

    /// Reverse pass from the scalar `loss`. A tape can be differentiated
    /// only once.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, NnError> {
        if self.consumed {
            return Err(NnError::BackwardTwice);
        }
        if self.value(loss).shape() != [1, 1] {
            return Err(NnError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(self.store);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = &node.value;
            let (m, n) = dims(y);
            let nodes = &self.nodes;
            let mut acc = |v: Var, f: &dyn Fn(&mut [f64])| {
                let buf = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
                f(buf);
            };
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let k = ta.cols();
                    acc(*a, &|d| matmul_nt_acc(&g, tb.data(), d, m, k, n));
                    acc(*b, &|d| matmul_tn_acc(ta.data(), &g, d, m, k, n));
                }
                Op::Transpose(a) => acc(*a, &|d| {
                    // y is [m, n] and a is [n, m]
                    for i in 0..m {
                        for j in 0..n {
                            d[j * m + i] += g[i * n + j];
                        }
                    }
                }),
                Op::Add(a, b) => {
                    acc(*a, &|d| add_into(d, &g));
                    acc(*b, &|d| add_into(d, &g));
                }
                Op::AddRow(a, b) => {
                    acc(*a, &|d| add_into(d, &g));
                    acc(*b, &|d| {
                        for row in g.chunks(n) {
                            add_into(d, row);
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                    acc(*a, &|d| {
                        for ((d, g), x) in d.iter_mut().zip(&g).zip(tb.data()) {
                            *d += g * x;
                        }
                    });
                    acc(*b, &|d| {
                        for ((d, g), x) in d.iter_mut().zip(&g).zip(ta.data()) {
                            *d += g * x;
                        }
                    });
                }
                Op::Scale(a, f) => acc(*a, &|d| {
                    for (d, g) in d.iter_mut().zip(&g) {
                        *d += g * f;
                    }
                }),
                Op::MulConst(a, mask) => acc(*a, &|d| {
                    for ((d, g), k) in d.iter_mut().zip(&g).zip(mask.iter()) {
                        *d += g * k;
                    }
                }),
                Op::Sigmoid(a) => acc(*a, &|d| {
                    for ((d, g), s) in d.iter_mut().zip(&g).zip(y.data()) {
                        *d += g * s * (1.0 - s);
                    }
                }),
                Op::Tanh(a) => acc(*a, &|d| {
                    for ((d, g), t) in d.iter_mut().zip(&g).zip(y.data()) {
                        *d += g * (1.0 - t * t);
                    }
                }),
                Op::Relu(a) => acc(*a, &|d| {
                    for ((d, g), x) in d.iter_mut().zip(&g).zip(nodes[a.0].value.data()) {
                        if *x > 0.0 {
                            *d += g;
                        }
                    }
                }),
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = nodes[p.0].value.cols();
                        acc(*p, &|d| {
                            for r in 0..m {
                                add_into(&mut d[r * w..(r + 1) * w], &g[r * n + offset..r * n + offset + w]);
                            }
                        });
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let len = nodes[p.0].value.len();
                        acc(*p, &|d| add_into(d, &g[offset..offset + len]));
                        offset += len;
                    }
                }
                Op::SliceCols(a, start) => {
                    let w = nodes[a.0].value.cols();
                    acc(*a, &|d| {
                        for r in 0..m {
                            add_into(&mut d[r * w + start..r * w + start + n], &g[r * n..(r + 1) * n]);
                        }
                    });
                }
                Op::GatherRows(a, rows) => acc(*a, &|d| {
                    for (i, &r) in rows.iter().enumerate() {
                        add_into(&mut d[r * n..(r + 1) * n], &g[i * n..(i + 1) * n]);
                    }
                }),
                Op::MeanRows(a) => {
                    let rows = nodes[a.0].value.rows();
                    acc(*a, &|d| {
                        for r in 0..rows {
                            for (dv, gv) in d[r * n..(r + 1) * n].iter_mut().zip(&g) {
                                *dv += gv / rows as f64;
                            }
                        }
                    });
                }
                Op::Sum(a) => acc(*a, &|d| d.iter_mut().for_each(|x| *x += g[0])),
                Op::MaskedSoftmax(a) => acc(*a, &|d| {
                    for r in 0..m {
                        let yr = &y.data()[r * n..(r + 1) * n];
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..n {
                            d[r * n + c] += yr[c] * (gr[c] - dot);
                        }
                    }
                }),
                Op::Scatter(src, index) => acc(*src, &|d| {
                    for (gv, idx) in g.iter().zip(index.iter()) {
                        if let Some(i) = idx {
                            d[*i] += gv;
                        }
                    }
                }),
                Op::Nll(p, gold) => {
                    let tp = &nodes[p.0].value;
                    let w = tp.cols();
                    acc(*p, &|d| {
                        for (r, &c) in gold.iter().enumerate() {
                            let pv = tp.get(r, c);
                            if pv > LOG_FLOOR {
                                d[r * w + c] -= g[0] / pv;
                            }
                        }
                    });
                }
            }
        }
        out.reshape_to(self.store);
        Ok(out)
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Multiplicative inverted-dropout mask, or `None` when dropout is inactive.
pub fn dropout_mask<R: Rng + ?Sized>(
    len: usize,
    rate: f64,
    rng: &mut R,
    train: bool,
) -> Result<Option<Vec<f64>>, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidDropout(rate));
    }
    if !train || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    ))
}

/// Standalone dropout over a tensor, seeded.
pub fn dropout(x: &Tensor, rate: f64, seed: u64, train: bool) -> Result<Tensor, NnError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    match dropout_mask(x.len(), rate, &mut rng, train)? {
        None => Ok(x.clone()),
        Some(mask) => {
            let data = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
            Tensor::new(x.shape().to_vec(), data)
        }
    }
}
