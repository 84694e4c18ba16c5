//! Recording tape for reverse-mode differentiation.
//!
//! Every primitive appends one node holding its forward value and the
//! handles of its parents. Nodes are appended in evaluation order, so the
//! tape is topologically sorted by construction and [`Tape::backward`] is a
//! single reverse sweep.

use std::rc::Rc;

use super::tensor::{gemm, Tensor};
use super::AutodiffError;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    Scale(Var, f64),
    Log2(Var),
    Exp(Var),
    Relu(Var),
    Sigmoid(Var),
    MaxReduce {
        input: Var,
        argmax: Vec<usize>,
    },
    SumReduce {
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    MeanReduce {
        input: Var,
        outer: usize,
        len: usize,
        inner: usize,
    },
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        widths: Vec<usize>,
    },
    GatherRows {
        input: Var,
        index: Rc<[usize]>,
    },
    Reshape(Var),
    Broadcast(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` if `v` does not
    /// influence the loss through a differentiable path.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, materializing zeros of `shape` when absent.
    pub fn get_or_zeros(&self, v: Var, shape: &[usize]) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape))
    }
}

/// An append-only record of tensor operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = gemm(
            self.value(a).data(),
            m,
            k,
            false,
            self.value(b).data(),
            k,
            n,
            false,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], data)?, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let out_shape = broadcast_shape(ta.shape(), tb.shape()).ok_or_else(|| {
            AutodiffError::ShapeMismatch {
                op: name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            }
        })?;
        let data = if ta.shape() == tb.shape() {
            ta.data()
                .iter()
                .zip(tb.data())
                .map(|(&x, &y)| f(x, y))
                .collect()
        } else {
            let mut out = vec![0.0; out_shape.iter().product()];
            let (da, db) = (ta.data(), tb.data());
            for_each_broadcast(&out_shape, ta.shape(), tb.shape(), |o, i, j| {
                out[o] = f(da[i], db[j]);
            });
            out
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(out_shape, data)?, op, rg))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x + c);
        let rg = self.rg(a);
        self.push(v, Op::AddScalar(a), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).map(|x| x * c);
        let rg = self.rg(a);
        self.push(v, Op::Scale(a, c), rg)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Base-2 logarithm. Every input element must be strictly positive.
    pub fn log2(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if let Some(pos) = t.data().iter().position(|&x| !(x > 0.0)) {
            return Err(AutodiffError::Domain {
                op: "log2",
                index: pos,
                value: t.data()[pos],
            });
        }
        let v = t.map(f64::log2);
        let rg = self.rg(a);
        Ok(self.push(v, Op::Log2(a), rg))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).map(f64::exp);
        let rg = self.rg(a);
        self.push(v, Op::Exp(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(v, Op::Relu(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(v, Op::Sigmoid(a), rg)
    }

    /// Maximum over `axis`, removing it from the shape. Ties go to the lowest
    /// index along the axis; an empty axis yields zeros.
    pub fn max_reduce(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let (outer, len, inner, out_shape) = split_axis(self.shape(a), axis, "max_reduce")?;
        let src = self.value(a).data();
        let mut out = vec![0.0; outer * inner];
        let mut argmax = vec![usize::MAX; outer * inner];
        for o in 0..outer {
            for l in 0..len {
                let base = (o * len + l) * inner;
                for i in 0..inner {
                    let x = src[base + i];
                    let slot = o * inner + i;
                    if l == 0 || x > out[slot] {
                        out[slot] = x;
                        argmax[slot] = base + i;
                    }
                }
            }
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::MaxReduce { input: a, argmax },
            rg,
        ))
    }

    /// Sum over `axis`, removing it from the shape.
    pub fn sum_reduce(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let (outer, len, inner, out_shape) = split_axis(self.shape(a), axis, "sum_reduce")?;
        let out = reduce_sum(self.value(a).data(), outer, len, inner);
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::SumReduce {
                input: a,
                outer,
                len,
                inner,
            },
            rg,
        ))
    }

    /// Mean over `axis`, removing it from the shape. An empty axis yields zeros.
    pub fn mean_reduce(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let (outer, len, inner, out_shape) = split_axis(self.shape(a), axis, "mean_reduce")?;
        let mut out = reduce_sum(self.value(a).data(), outer, len, inner);
        if len > 0 {
            let s = 1.0 / len as f64;
            out.iter_mut().for_each(|x| *x *= s);
        }
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::MeanReduce {
                input: a,
                outer,
                len,
                inner,
            },
            rg,
        ))
    }

    /// Sum of every element, as a one-element tensor.
    pub fn sum_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let n = self.value(a).len();
        let flat = self.reshape(a, &[1, n])?;
        self.sum_reduce(flat, 1)
    }

    /// Mean of every element, as a one-element tensor.
    pub fn mean_all(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let n = self.value(a).len();
        let flat = self.reshape(a, &[1, n])?;
        self.mean_reduce(flat, 1)
    }

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        let first = inputs.first().ok_or(AutodiffError::EmptyConcat)?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(AutodiffError::Axis {
                op: "concat",
                axis,
                ndim: base.len(),
            });
        }
        let mut widths = Vec::with_capacity(inputs.len());
        let mut total_axis = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total_axis += s[axis];
            widths.push(s[axis..].iter().product::<usize>());
        }
        let outer: usize = base[..axis].iter().product();
        let row: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(outer * row);
        for o in 0..outer {
            for (&v, &w) in inputs.iter().zip(&widths) {
                out.extend_from_slice(&self.value(v).data()[o * w..(o + 1) * w]);
            }
        }
        let mut out_shape = base;
        out_shape[axis] = total_axis;
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(out_shape, out)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                outer,
                widths,
            },
            rg,
        ))
    }

    /// Selects rows (first-axis slices) by index; repeated indices allowed.
    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        let rows = t.rows();
        let w = t.row_len();
        if let Some(&bad) = index.iter().find(|&&i| i >= rows) {
            return Err(AutodiffError::Index { index: bad, rows });
        }
        let mut out = Vec::with_capacity(index.len() * w);
        for &i in index.iter() {
            out.extend_from_slice(&t.data()[i * w..(i + 1) * w]);
        }
        let mut shape = t.shape().to_vec();
        if shape.is_empty() {
            shape.push(1);
        }
        shape[0] = index.len();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::GatherRows { input: a, index },
            rg,
        ))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let v = self.value(a).clone().reshaped(shape)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Reshape(a), rg))
    }

    /// Expands size-1 dimensions to `shape`.
    pub fn broadcast_to(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let t = self.value(a);
        if broadcast_shape(t.shape(), shape).as_deref() != Some(shape) {
            return Err(AutodiffError::ShapeMismatch {
                op: "broadcast",
                lhs: t.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let src = t.data();
        let mut out = vec![0.0; shape.iter().product()];
        for_each_broadcast(shape, t.shape(), shape, |o, i, _| out[o] = src[i]);
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(shape.to_vec(), out)?, Op::Broadcast(a), rg))
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutodiffError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::full(lt.shape(), 1.0));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k) = (ta.shape()[0], ta.shape()[1]);
                let n = tb.shape()[1];
                if self.rg(*a) {
                    let d = gemm(g.data(), m, n, false, tb.data(), k, n, true);
                    accumulate(grads, *a, Tensor::new(vec![m, k], d).unwrap());
                }
                if self.rg(*b) {
                    let d = gemm(ta.data(), m, k, true, g.data(), m, n, false);
                    accumulate(grads, *b, Tensor::new(vec![k, n], d).unwrap());
                }
            }
            Op::Add(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, unbroadcast(g, self.shape(*a)));
                }
                if self.rg(*b) {
                    accumulate(grads, *b, unbroadcast(g, self.shape(*b)));
                }
            }
            Op::Sub(a, b) => {
                if self.rg(*a) {
                    accumulate(grads, *a, unbroadcast(g, self.shape(*a)));
                }
                if self.rg(*b) {
                    accumulate(grads, *b, unbroadcast(&g.map(|x| -x), self.shape(*b)));
                }
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let is_div = matches!(node.op, Op::Div(..));
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (da, db) = (ta.data(), tb.data());
                let mut ga = vec![0.0; g.len()];
                let mut gb = vec![0.0; g.len()];
                let gd = g.data();
                for_each_broadcast(out.shape(), ta.shape(), tb.shape(), |o, i, j| {
                    if is_div {
                        ga[o] = gd[o] / db[j];
                        gb[o] = -gd[o] * da[i] / (db[j] * db[j]);
                    } else {
                        ga[o] = gd[o] * db[j];
                        gb[o] = gd[o] * da[i];
                    }
                });
                if self.rg(*a) {
                    let full = Tensor::new(out.shape().to_vec(), ga).unwrap();
                    accumulate(grads, *a, unbroadcast(&full, ta.shape()));
                }
                if self.rg(*b) {
                    let full = Tensor::new(out.shape().to_vec(), gb).unwrap();
                    accumulate(grads, *b, unbroadcast(&full, tb.shape()));
                }
            }
            Op::AddScalar(a) => accumulate(grads, *a, g.clone()),
            Op::Scale(a, c) => accumulate(grads, *a, g.map(|x| x * c)),
            Op::Log2(a) => {
                let x = self.value(*a);
                let d = zip_map(g, x, |gi, xi| gi / (xi * std::f64::consts::LN_2));
                accumulate(grads, *a, d);
            }
            Op::Exp(a) => accumulate(grads, *a, zip_map(g, out, |gi, yi| gi * yi)),
            Op::Relu(a) => {
                let x = self.value(*a);
                accumulate(
                    grads,
                    *a,
                    zip_map(g, x, |gi, xi| if xi > 0.0 { gi } else { 0.0 }),
                );
            }
            Op::Sigmoid(a) => {
                accumulate(grads, *a, zip_map(g, out, |gi, yi| gi * yi * (1.0 - yi)));
            }
            Op::MaxReduce { input, argmax } => {
                let mut d = Tensor::zeros(self.shape(*input));
                let dd = d.data_mut();
                for (slot, &src) in argmax.iter().enumerate() {
                    if src != usize::MAX {
                        dd[src] += g.data()[slot];
                    }
                }
                accumulate(grads, *input, d);
            }
            Op::SumReduce {
                input,
                outer,
                len,
                inner,
            } => {
                let d = expand_axis(g.data(), *outer, *len, *inner, 1.0);
                accumulate(
                    grads,
                    *input,
                    Tensor::new(self.shape(*input).to_vec(), d).unwrap(),
                );
            }
            Op::MeanReduce {
                input,
                outer,
                len,
                inner,
            } => {
                let s = if *len > 0 { 1.0 / *len as f64 } else { 0.0 };
                let d = expand_axis(g.data(), *outer, *len, *inner, s);
                accumulate(
                    grads,
                    *input,
                    Tensor::new(self.shape(*input).to_vec(), d).unwrap(),
                );
            }
            Op::Concat {
                inputs,
                outer,
                widths,
            } => {
                let row: usize = widths.iter().sum();
                let mut offset = 0;
                for (&v, &w) in inputs.iter().zip(widths) {
                    if self.rg(v) {
                        let mut d = Vec::with_capacity(outer * w);
                        for o in 0..*outer {
                            let start = o * row + offset;
                            d.extend_from_slice(&g.data()[start..start + w]);
                        }
                        accumulate(grads, v, Tensor::new(self.shape(v).to_vec(), d).unwrap());
                    }
                    offset += w;
                }
            }
            Op::GatherRows { input, index } => {
                let mut d = Tensor::zeros(self.shape(*input));
                let w = d.row_len();
                let dd = d.data_mut();
                for (r, &i) in index.iter().enumerate() {
                    let src = &g.data()[r * w..(r + 1) * w];
                    for (x, y) in dd[i * w..(i + 1) * w].iter_mut().zip(src) {
                        *x += y;
                    }
                }
                accumulate(grads, *input, d);
            }
            Op::Reshape(a) => {
                let d = g.clone().reshaped(self.shape(*a)).unwrap();
                accumulate(grads, *a, d);
            }
            Op::Broadcast(a) => accumulate(grads, *a, unbroadcast(g, self.shape(*a))),
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, d: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

fn zip_map(g: &Tensor, x: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = g
        .data()
        .iter()
        .zip(x.data())
        .map(|(&a, &b)| f(a, b))
        .collect();
    Tensor::new(x.shape().to_vec(), data).unwrap()
}

fn split_axis(
    shape: &[usize],
    axis: usize,
    op: &'static str,
) -> Result<(usize, usize, usize, Vec<usize>), AutodiffError> {
    if axis >= shape.len() {
        return Err(AutodiffError::Axis {
            op,
            axis,
            ndim: shape.len(),
        });
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    let mut out_shape: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|&(d, _)| d != axis)
        .map(|(_, &s)| s)
        .collect();
    if out_shape.is_empty() {
        out_shape.push(1);
    }
    Ok((outer, shape[axis], inner, out_shape))
}

fn reduce_sum(src: &[f64], outer: usize, len: usize, inner: usize) -> Vec<f64> {
    let mut out = vec![0.0; outer * inner];
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for l in 0..len {
            let base = (o * len + l) * inner;
            for (x, y) in dst.iter_mut().zip(&src[base..base + inner]) {
                *x += y;
            }
        }
    }
    out
}

fn expand_axis(g: &[f64], outer: usize, len: usize, inner: usize, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let src = &g[o * inner..(o + 1) * inner];
        for _ in 0..len {
            out.extend(src.iter().map(|x| x * scale));
        }
    }
    out
}

/// Numpy-style broadcast of two equal-rank shapes.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    if a.len() != b.len() {
        return None;
    }
    a.iter()
        .zip(b)
        .map(|(&x, &y)| match (x, y) {
            _ if x == y => Some(x),
            (1, _) => Some(y),
            (_, 1) => Some(x),
            _ => None,
        })
        .collect()
}

fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = if shape[d] == 1 && out[d] != 1 { 0 } else { acc };
        acc *= shape[d];
    }
    strides
}

/// Calls `f(out_index, a_index, b_index)` for every element of `out`.
fn for_each_broadcast(
    out: &[usize],
    a: &[usize],
    b: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let total: usize = out.iter().product();
    if total == 0 {
        return;
    }
    let nd = out.len();
    let (sa, sb) = (broadcast_strides(a, out), broadcast_strides(b, out));
    let last = nd - 1;
    let inner = out[last];
    let mut idx = vec![0usize; nd];
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut o = 0;
    loop {
        for t in 0..inner {
            f(o + t, ia + t * sa[last], ib + t * sb[last]);
        }
        o += inner;
        if o >= total {
            break;
        }
        // Advance the multi-index over all dimensions but the last.
        let mut d = last;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out[d] {
                break;
            }
            ia -= sa[d] * idx[d];
            ib -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
}

/// Sums `g` down to `shape` over the dimensions that were broadcast.
fn unbroadcast(g: &Tensor, shape: &[usize]) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Tensor::zeros(shape);
    let od = out.data_mut();
    let gd = g.data();
    for_each_broadcast(g.shape(), shape, g.shape(), |o, i, _| od[i] += gd[o]);
    out
}
