//! Per-invocation reverse-mode tape.
//!
//! A [`Graph`] borrows a [`ParamStore`] read-only, records every op applied
//! through it, and is consumed by [`Graph::backward`], which returns the
//! parameter [`Gradients`]. Nothing survives between invocations.

use std::collections::HashMap;

use crate::error::{Result, TensorError};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{self as k, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine { x: Var, scale: f64 },
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Embedding { table: Var, index: usize },
    Gather { x: Var, rows: Vec<usize> },
    AddRow(Var, Var),
    LogSoftmax(Var),
    CrossEntropy { logits: Var, target: usize },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    // `None` for parameters, whose values live in the store.
    value: Option<Tensor>,
    op: Op,
    needs_grad: bool,
}

pub struct Graph<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

impl<'s> Graph<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            params: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.store.value(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value: Some(value),
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Constant,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// The node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.params.get(&id) {
            return *v;
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = k::matmul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = k::add(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = k::sub(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = k::mul(self.value(a), self.value(b))?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    /// `scale · x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let out = k::map(self.value(x), |v| scale * v + shift);
        self.push(out, Op::Affine { x, scale }, &[x])
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.affine(x, factor, 0.0)
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = k::tanh(self.value(x));
        self.push(out, Op::Tanh(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = k::sigmoid(self.value(x));
        self.push(out, Op::Sigmoid(x), &[x])
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let values: Vec<&Tensor> = parts.iter().map(|v| self.value(*v)).collect();
        let out = k::concat(&values)?;
        Ok(self.push(out, Op::Concat(parts.to_vec()), parts))
    }

    pub fn embedding(&mut self, table: Var, index: usize) -> Result<Var> {
        let out = k::embedding(self.value(table), index)?;
        Ok(self.push(out, Op::Embedding { table, index }, &[table]))
    }

    /// The rows of `x` at `rows`, stacked in order (repeats allowed).
    pub fn gather(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let src = self.value(x);
        let cols = src.cols();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            if r >= src.rows() {
                return Err(TensorError::IndexOutOfRange { op: "gather", index: r, extent: src.rows() });
            }
            data.extend_from_slice(src.row_slice(r));
        }
        let out = Tensor::new(vec![rows.len(), cols], data)?;
        Ok(self.push(out, Op::Gather { x, rows: rows.to_vec() }, &[x]))
    }

    /// `a + b` with the single row `b` added to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if bv.shape().len() != 2 || av.shape().len() != 2 || bv.rows() != 1 || bv.cols() != av.cols() {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: av.shape().to_vec(),
                right: bv.shape().to_vec(),
            });
        }
        let cols = av.cols();
        let brow = bv.data();
        let data = av.data().iter().enumerate().map(|(i, v)| v + brow[i % cols]).collect();
        let out = Tensor::new(av.shape().to_vec(), data)?;
        Ok(self.push(out, Op::AddRow(a, b), &[a, b]))
    }

    pub fn log_softmax(&mut self, x: Var) -> Var {
        let out = k::log_softmax(self.value(x));
        self.push(out, Op::LogSoftmax(x), &[x])
    }

    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let loss = k::cross_entropy(self.value(logits), target)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, target },
            &[logits],
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum(x), &[x])
    }

    /// Sum of several scalar nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let mut iter = terms.iter();
        let first = *iter.next().ok_or(TensorError::ShapeMismatch {
            op: "add_all",
            left: vec![],
            right: vec![],
        })?;
        let mut acc = first;
        for t in iter {
            acc = self.add(acc, *t)?;
        }
        Ok(acc)
    }

    /// Back-propagates from a scalar `loss` and returns parameter gradients.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(TensorError::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut out = Gradients::default();
        if !self.nodes[loss.0].needs_grad {
            return Ok(out);
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(loss_value.shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => match out.dense.get_mut(id) {
                    Some(acc) => add_into(acc, &g),
                    None => {
                        out.dense.insert(*id, g);
                    }
                },
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let ga = k::matmul_bt(&g, self.value(*b))?;
                        self.acc(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = k::matmul_at(self.value(*a), &g)?;
                        self.acc(&mut grads, *b, gb);
                    }
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, g.clone());
                    self.acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, g.clone());
                    self.acc(&mut grads, *b, k::map(&g, |v| -v));
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        let ga = k::mul(&g, self.value(*b))?;
                        self.acc(&mut grads, *a, ga);
                    }
                    if self.needs(*b) {
                        let gb = k::mul(&g, self.value(*a))?;
                        self.acc(&mut grads, *b, gb);
                    }
                }
                Op::Affine { x, scale } => {
                    let s = *scale;
                    self.acc(&mut grads, *x, k::map(&g, |v| v * s));
                }
                Op::Tanh(x) => {
                    let y = node.value.as_ref().expect("tanh value");
                    let gx = zip(&g, y, |gv, yv| gv * (1.0 - yv * yv));
                    self.acc(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().expect("sigmoid value");
                    let gx = zip(&g, y, |gv, yv| gv * yv * (1.0 - yv));
                    self.acc(&mut grads, *x, gx);
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let cols = self.value(*p).cols();
                        if self.needs(*p) {
                            let mut data = Vec::with_capacity(rows * cols);
                            for r in 0..rows {
                                let start = r * total + offset;
                                data.extend_from_slice(&g.data()[start..start + cols]);
                            }
                            self.acc(&mut grads, *p, Tensor::new(vec![rows, cols], data)?);
                        }
                        offset += cols;
                    }
                }
                Op::Embedding { table, index } => {
                    if let Op::Param(id) = self.nodes[table.0].op {
                        let rows = out.rows.entry(id).or_default();
                        match rows.get_mut(index) {
                            Some(acc) => acc.iter_mut().zip(g.data()).for_each(|(a, v)| *a += v),
                            None => {
                                rows.insert(*index, g.data().to_vec());
                            }
                        }
                    } else if self.needs(*table) {
                        let tv = self.value(*table);
                        let mut dense = Tensor::zeros(tv.shape());
                        let cols = tv.cols();
                        dense.data_mut()[index * cols..(index + 1) * cols]
                            .copy_from_slice(g.data());
                        self.acc(&mut grads, *table, dense);
                    }
                }
                Op::Gather { x, rows } => {
                    let cols = g.cols();
                    if let Op::Param(id) = self.nodes[x.0].op {
                        let acc = out.rows.entry(id).or_default();
                        for (i, &r) in rows.iter().enumerate() {
                            let src = &g.data()[i * cols..(i + 1) * cols];
                            match acc.get_mut(&r) {
                                Some(a) => a.iter_mut().zip(src).for_each(|(a, v)| *a += v),
                                None => {
                                    acc.insert(r, src.to_vec());
                                }
                            }
                        }
                    } else if self.needs(*x) {
                        let mut dense = Tensor::zeros(self.value(*x).shape());
                        for (i, &r) in rows.iter().enumerate() {
                            let dst = &mut dense.data_mut()[r * cols..(r + 1) * cols];
                            dst.iter_mut().zip(&g.data()[i * cols..(i + 1) * cols]).for_each(|(a, v)| *a += v);
                        }
                        self.acc(&mut grads, *x, dense);
                    }
                }
                Op::AddRow(a, b) => {
                    if self.needs(*b) {
                        let cols = g.cols();
                        let mut gb = vec![0.0; cols];
                        for (i, v) in g.data().iter().enumerate() {
                            gb[i % cols] += v;
                        }
                        self.acc(&mut grads, *b, Tensor::new(vec![1, cols], gb)?);
                    }
                    self.acc(&mut grads, *a, g);
                }
                Op::LogSoftmax(x) => {
                    let y = node.value.as_ref().expect("log_softmax value");
                    let cols = y.cols();
                    let mut gx = g.clone();
                    for r in 0..y.rows() {
                        let gs: f64 = g.row_slice(r).iter().sum();
                        for c in 0..cols {
                            let idx = r * cols + c;
                            gx.data_mut()[idx] = g.data()[idx] - y.data()[idx].exp() * gs;
                        }
                    }
                    self.acc(&mut grads, *x, gx);
                }
                Op::CrossEntropy { logits, target } => {
                    let upstream = g.item();
                    let mut gx = k::map(&k::log_softmax(self.value(*logits)), |v| v.exp());
                    gx.data_mut()[*target] -= 1.0;
                    gx.data_mut().iter_mut().for_each(|v| *v *= upstream);
                    self.acc(&mut grads, *logits, gx);
                }
                Op::Sum(x) => {
                    let gx = Tensor::full(self.value(*x).shape(), g.item());
                    self.acc(&mut grads, *x, gx);
                }
            }
        }
        Ok(out)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => add_into(existing, &g),
            slot => *slot = Some(g),
        }
    }
}

fn add_into(acc: &mut Tensor, g: &Tensor) {
    for (a, v) in acc.data_mut().iter_mut().zip(g.data()) {
        *a += v;
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("same shape")
}
