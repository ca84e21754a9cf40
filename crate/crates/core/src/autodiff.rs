//! Tape-based reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! Every differentiable operation appends a node to a [`Tape`]; [`Var`] is a
//! cheap copyable handle to one node. [`Tape::backward`] walks the tape once
//! in reverse and returns a fresh [`Gradients`] table. The tape itself is
//! never mutated by a backward pass, so calling it twice yields identical
//! gradients.
//!
//! ```
//! use haucl::autodiff::Tape;
//! use haucl::tensor::Tensor;
//!
//! let tape = Tape::new();
//! let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 3.0]));
//! let loss = x.mul(x).unwrap().sum();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(x).unwrap().data(), &[2.0, -4.0, 6.0]);
//! ```

use std::cell::{Ref, RefCell};

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{broadcast_index_map, broadcast_shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum UnaryKind {
    Neg,
    Relu,
    Softplus,
    Sigmoid,
    Tanh,
    Exp,
    Log,
    Sqrt,
    SafeRecip,
}

impl UnaryKind {
    fn name(self) -> &'static str {
        match self {
            UnaryKind::Neg => "neg",
            UnaryKind::Relu => "relu",
            UnaryKind::Softplus => "softplus",
            UnaryKind::Sigmoid => "sigmoid",
            UnaryKind::Tanh => "tanh",
            UnaryKind::Exp => "exp",
            UnaryKind::Log => "log",
            UnaryKind::Sqrt => "sqrt",
            UnaryKind::SafeRecip => "safe_recip",
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Binary { kind: BinaryKind, a: usize, b: usize, map_a: Vec<usize>, map_b: Vec<usize> },
    Unary { kind: UnaryKind, a: usize },
    Scale { a: usize, factor: f64 },
    Clamp { a: usize, lo: f64, hi: f64 },
    MatMul { a: usize, b: usize },
    Transpose { a: usize },
    Sum { a: usize },
    SumAxis { a: usize, axis: usize },
    Softmax { a: usize, axis: usize },
    LogSoftmax { a: usize, axis: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    Gather { a: usize, indices: Vec<usize> },
    Reshape { a: usize },
    StraightThrough { soft: usize },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Binary { kind, .. } => match kind {
                BinaryKind::Add => "add",
                BinaryKind::Sub => "sub",
                BinaryKind::Mul => "mul",
                BinaryKind::Div => "div",
            },
            Op::Unary { kind, .. } => kind.name(),
            Op::Scale { .. } => "scale",
            Op::Clamp { .. } => "clamp",
            Op::MatMul { .. } => "matmul",
            Op::Transpose { .. } => "transpose",
            Op::Sum { .. } => "sum",
            Op::SumAxis { .. } => "sum_axis",
            Op::Softmax { .. } => "softmax",
            Op::LogSoftmax { .. } => "log_softmax",
            Op::Concat { .. } => "concat",
            Op::Gather { .. } => "gather",
            Op::Reshape { .. } => "reshape",
            Op::StraightThrough { .. } => "straight_through",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Append-only record of executed operations.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    corrupt_op: Option<String>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Test hook: the backward rule of every op named `op` emits a gradient
    /// scaled by 1.5. Used as a negative control for gradient checking.
    pub fn with_corrupted_backward(op: &str) -> Self {
        Tape { nodes: RefCell::default(), corrupt_op: Some(op.to_string()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A differentiable input.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Var { tape: self, id: nodes.len() - 1 }
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Concatenates same-rank tensors along `axis`; all other dimensions must agree.
    pub fn concat<'t>(&'t self, parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let value = {
            let nodes = self.nodes.borrow();
            let base = nodes[first.id].value.shape().to_vec();
            if axis >= base.len() {
                return Err(Error::shape("concat", &base, &[axis]));
            }
            let mut total = 0;
            for p in parts {
                let s = nodes[p.id].value.shape();
                let compatible =
                    s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(k, (x, y))| k == axis || x == y);
                if !compatible {
                    return Err(Error::shape("concat", &base, s));
                }
                total += s[axis];
            }
            let outer: usize = base[..axis].iter().product();
            let inner: usize = base[axis + 1..].iter().product();
            let mut data = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for p in parts {
                    let v = &nodes[p.id].value;
                    let chunk = v.shape()[axis] * inner;
                    data.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
                }
            }
            let mut shape = base;
            shape[axis] = total;
            Tensor::new(shape, data)?
        };
        let inputs: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let rg = self.requires(&inputs);
        Ok(self.push(value, Op::Concat { inputs, axis }, rg))
    }

    /// Reverse-mode sweep from a one-element `loss`.
    ///
    /// Every differentiable leaf receives a gradient, zero if unreachable.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::Contract(format!("backward needs a scalar loss, got shape {:?}", root.value.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let scale = match &self.corrupt_op {
                Some(name) if name == node.op.name() => 1.5,
                _ => 1.0,
            };
            let g = if scale != 1.0 { g.iter().map(|v| v * scale).collect() } else { g };
            propagate(&nodes, node, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (id, node) in nodes.iter().enumerate().take(loss.id + 1) {
            if node.requires_grad && matches!(node.op, Op::Leaf) && grads[id].is_none() {
                grads[id] = Some(vec![0.0; node.value.numel()]);
            }
        }
        let shapes = nodes.iter().take(loss.id + 1).map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, f: impl FnOnce(&mut [f64])) {
    if !nodes[id].requires_grad {
        return;
    }
    let slot = grads[id].get_or_insert_with(|| vec![0.0; nodes[id].value.numel()]);
    f(slot);
}

fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn propagate(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let out = node.value.data();
    match &node.op {
        Op::Leaf => {}
        Op::Binary { kind, a, b, map_a, map_b } => {
            let av = nodes[*a].value.data();
            let bv = nodes[*b].value.data();
            accumulate(grads, nodes, *a, |ga| {
                for (k, gk) in g.iter().enumerate() {
                    let d = match kind {
                        BinaryKind::Add | BinaryKind::Sub => 1.0,
                        BinaryKind::Mul => bv[map_b[k]],
                        BinaryKind::Div => 1.0 / bv[map_b[k]],
                    };
                    ga[map_a[k]] += gk * d;
                }
            });
            accumulate(grads, nodes, *b, |gb| {
                for (k, gk) in g.iter().enumerate() {
                    let d = match kind {
                        BinaryKind::Add => 1.0,
                        BinaryKind::Sub => -1.0,
                        BinaryKind::Mul => av[map_a[k]],
                        BinaryKind::Div => {
                            let y = bv[map_b[k]];
                            -av[map_a[k]] / (y * y)
                        }
                    };
                    gb[map_b[k]] += gk * d;
                }
            });
        }
        Op::Unary { kind, a } => {
            let x = nodes[*a].value.data();
            accumulate(grads, nodes, *a, |ga| {
                for k in 0..g.len() {
                    let d = match kind {
                        UnaryKind::Neg => -1.0,
                        UnaryKind::Relu => {
                            if x[k] > 0.0 {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        UnaryKind::Softplus => sigmoid(x[k]),
                        UnaryKind::Sigmoid => out[k] * (1.0 - out[k]),
                        UnaryKind::Tanh => 1.0 - out[k] * out[k],
                        UnaryKind::Exp => out[k],
                        UnaryKind::Log => 1.0 / x[k],
                        UnaryKind::Sqrt => {
                            if out[k] > 0.0 {
                                0.5 / out[k]
                            } else {
                                0.0
                            }
                        }
                        UnaryKind::SafeRecip => -out[k] * out[k],
                    };
                    ga[k] += g[k] * d;
                }
            });
        }
        Op::Scale { a, factor } => accumulate(grads, nodes, *a, |ga| {
            for (x, gk) in ga.iter_mut().zip(g) {
                *x += gk * factor;
            }
        }),
        Op::Clamp { a, lo, hi } => {
            let x = nodes[*a].value.data();
            accumulate(grads, nodes, *a, |ga| {
                for k in 0..g.len() {
                    if x[k] >= *lo && x[k] <= *hi {
                        ga[k] += g[k];
                    }
                }
            });
        }
        Op::MatMul { a, b } => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let (m, k) = (av.rows(), av.cols());
            let n = bv.cols();
            // dA = dC · Bᵀ
            accumulate(grads, nodes, *a, |ga| {
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += g[i * n + j] * bv.data()[p * n + j];
                        }
                        ga[i * k + p] += s;
                    }
                }
            });
            // dB = Aᵀ · dC
            accumulate(grads, nodes, *b, |gb| {
                for i in 0..m {
                    for p in 0..k {
                        let aip = av.data()[i * k + p];
                        if aip == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            gb[p * n + j] += aip * g[i * n + j];
                        }
                    }
                }
            });
        }
        Op::Transpose { a } => {
            let (r, c) = (node.value.rows(), node.value.cols());
            accumulate(grads, nodes, *a, |ga| {
                for i in 0..r {
                    for j in 0..c {
                        ga[j * r + i] += g[i * c + j];
                    }
                }
            });
        }
        Op::Sum { a } => accumulate(grads, nodes, *a, |ga| {
            for x in ga.iter_mut() {
                *x += g[0];
            }
        }),
        Op::SumAxis { a, axis } => {
            let (outer, len, inner) = axis_layout(nodes[*a].value.shape(), *axis);
            accumulate(grads, nodes, *a, |ga| {
                for o in 0..outer {
                    for l in 0..len {
                        for i in 0..inner {
                            ga[(o * len + l) * inner + i] += g[o * inner + i];
                        }
                    }
                }
            });
        }
        Op::Softmax { a, axis } => {
            let (outer, len, inner) = axis_layout(node.value.shape(), *axis);
            accumulate(grads, nodes, *a, |ga| {
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |l: usize| (o * len + l) * inner + i;
                        let dot: f64 = (0..len).map(|l| g[idx(l)] * out[idx(l)]).sum();
                        for l in 0..len {
                            ga[idx(l)] += out[idx(l)] * (g[idx(l)] - dot);
                        }
                    }
                }
            });
        }
        Op::LogSoftmax { a, axis } => {
            let (outer, len, inner) = axis_layout(node.value.shape(), *axis);
            accumulate(grads, nodes, *a, |ga| {
                for o in 0..outer {
                    for i in 0..inner {
                        let idx = |l: usize| (o * len + l) * inner + i;
                        let total: f64 = (0..len).map(|l| g[idx(l)]).sum();
                        for l in 0..len {
                            ga[idx(l)] += g[idx(l)] - out[idx(l)].exp() * total;
                        }
                    }
                }
            });
        }
        Op::Concat { inputs, axis } => {
            let shape = node.value.shape();
            let (outer, total, inner) = axis_layout(shape, *axis);
            let mut offset = 0;
            for &p in inputs {
                let len = nodes[p].value.shape()[*axis];
                accumulate(grads, nodes, p, |gp| {
                    for o in 0..outer {
                        let src = (o * total + offset) * inner;
                        let dst = o * len * inner;
                        for k in 0..len * inner {
                            gp[dst + k] += g[src + k];
                        }
                    }
                });
                offset += len;
            }
        }
        Op::Gather { a, indices } => accumulate(grads, nodes, *a, |ga| {
            for (k, &src) in indices.iter().enumerate() {
                ga[src] += g[k];
            }
        }),
        Op::Reshape { a } | Op::StraightThrough { soft: a } => accumulate(grads, nodes, *a, |ga| {
            for (x, gk) in ga.iter_mut().zip(g) {
                *x += gk;
            }
        }),
    }
}

/// Inputs of `safe_recip` below this magnitude map to 0, which keeps the
/// squared output (the gradient factor) finite.
pub const RECIP_FLOOR: f64 = 1.5e-154;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    // log(1 + e^x) without overflow for large |x|
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Borrow of the recorded value. Do not hold it across further ops on the same tape.
    pub fn value_ref(&self) -> Ref<'t, Tensor> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn value(&self) -> Tensor {
        self.value_ref().clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value_ref().shape().to_vec()
    }

    /// Value of a one-element var.
    pub fn item(&self) -> f64 {
        self.value_ref().item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }

    fn same_tape(&self, other: &Var<'_>) {
        assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
    }

    fn binary(self, other: Var<'t>, kind: BinaryKind, name: &'static str) -> Result<Var<'t>> {
        self.same_tape(&other);
        let (value, map_a, map_b) = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            let b = &nodes[other.id].value;
            let shape =
                broadcast_shape(a.shape(), b.shape()).ok_or_else(|| Error::shape(name, a.shape(), b.shape()))?;
            let map_a = broadcast_index_map(a.shape(), &shape);
            let map_b = broadcast_index_map(b.shape(), &shape);
            let (ad, bd) = (a.data(), b.data());
            let data = map_a
                .iter()
                .zip(&map_b)
                .map(|(&i, &j)| match kind {
                    BinaryKind::Add => ad[i] + bd[j],
                    BinaryKind::Sub => ad[i] - bd[j],
                    BinaryKind::Mul => ad[i] * bd[j],
                    BinaryKind::Div => ad[i] / bd[j],
                })
                .collect();
            (Tensor::new(shape, data)?, map_a, map_b)
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        let op = Op::Binary { kind, a: self.id, b: other.id, map_a, map_b };
        Ok(self.tape.push(value, op, rg))
    }

    /// Broadcasting addition.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, BinaryKind::Add, "add")
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, BinaryKind::Sub, "sub")
    }

    /// Broadcasting elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, BinaryKind::Mul, "mul")
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, BinaryKind::Div, "div")
    }

    fn unary(self, kind: UnaryKind, f: impl Fn(f64) -> f64) -> Var<'t> {
        let value = self.value_ref().map(f);
        let rg = self.requires_grad();
        self.tape.push(value, Op::Unary { kind, a: self.id }, rg)
    }

    pub fn neg(self) -> Var<'t> {
        self.unary(UnaryKind::Neg, |x| -x)
    }

    /// `max(x, 0)`; the derivative at exactly 0 is 0.
    pub fn relu(self) -> Var<'t> {
        self.unary(UnaryKind::Relu, |x| x.max(0.0))
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(UnaryKind::Softplus, softplus)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(UnaryKind::Sigmoid, sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(UnaryKind::Tanh, f64::tanh)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(UnaryKind::Exp, f64::exp)
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(self) -> Result<Var<'t>> {
        if let Some(bad) = self.value_ref().data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain { op: "log", msg: format!("non-positive input {bad}") });
        }
        Ok(self.unary(UnaryKind::Log, f64::ln))
    }

    /// Square root of a nonnegative input; the derivative at 0 is taken as 0.
    pub fn sqrt(self) -> Result<Var<'t>> {
        if let Some(bad) = self.value_ref().data().iter().find(|&&x| !(x >= 0.0)) {
            return Err(Error::Domain { op: "sqrt", msg: format!("negative input {bad}") });
        }
        Ok(self.unary(UnaryKind::Sqrt, f64::sqrt))
    }

    /// `1/x`, with `1/x` defined as 0 for `|x| < RECIP_FLOOR` (including 0).
    pub fn safe_recip(self) -> Var<'t> {
        self.unary(UnaryKind::SafeRecip, |x| if x.abs() < RECIP_FLOOR { 0.0 } else { 1.0 / x })
    }

    pub fn scale(self, factor: f64) -> Var<'t> {
        let value = self.value_ref().map(|x| x * factor);
        let rg = self.requires_grad();
        self.tape.push(value, Op::Scale { a: self.id, factor }, rg)
    }

    /// Clamps into `[lo, hi]`; gradient is zero outside the interval.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let value = self.value_ref().map(|x| x.clamp(lo, hi));
        let rg = self.requires_grad();
        self.tape.push(value, Op::Clamp { a: self.id, lo, hi }, rg)
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.same_tape(&other);
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id].value;
            let b = &nodes[other.id].value;
            if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
                return Err(Error::shape("matmul", a.shape(), b.shape()));
            }
            let (m, k, n) = (a.rows(), a.cols(), b.cols());
            let mut data = vec![0.0; m * n];
            for i in 0..m {
                for p in 0..k {
                    let aip = a.data()[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    let brow = &b.data()[p * n..(p + 1) * n];
                    let crow = &mut data[i * n..(i + 1) * n];
                    for (c, bv) in crow.iter_mut().zip(brow) {
                        *c += aip * bv;
                    }
                }
            }
            Tensor::new(vec![m, n], data)?
        };
        let rg = self.tape.requires(&[self.id, other.id]);
        Ok(self.tape.push(value, Op::MatMul { a: self.id, b: other.id }, rg))
    }

    /// Matrix transpose.
    pub fn t(self) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            if a.rank() != 2 {
                return Err(Error::shape("transpose", a.shape(), &[2]));
            }
            let (r, c) = (a.rows(), a.cols());
            let mut data = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    data[j * r + i] = a.data()[i * c + j];
                }
            }
            Tensor::new(vec![c, r], data)?
        };
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::Transpose { a: self.id }, rg))
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(self) -> Var<'t> {
        let value = Tensor::scalar(self.value_ref().sum());
        let rg = self.requires_grad();
        self.tape.push(value, Op::Sum { a: self.id }, rg)
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value_ref().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Sum along `axis`, keeping it as a length-1 dimension.
    pub fn sum_axis(self, axis: usize) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            if axis >= a.rank() {
                return Err(Error::shape("sum_axis", a.shape(), &[axis]));
            }
            let (outer, len, inner) = axis_layout(a.shape(), axis);
            let mut data = vec![0.0; outer * inner];
            for o in 0..outer {
                for l in 0..len {
                    for i in 0..inner {
                        data[o * inner + i] += a.data()[(o * len + l) * inner + i];
                    }
                }
            }
            let mut shape = a.shape().to_vec();
            shape[axis] = 1;
            Tensor::new(shape, data)?
        };
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::SumAxis { a: self.id, axis }, rg))
    }

    fn softmax_like(self, axis: usize, log: bool) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            if axis >= a.rank() {
                return Err(Error::shape("softmax", a.shape(), &[axis]));
            }
            let (outer, len, inner) = axis_layout(a.shape(), axis);
            let x = a.data();
            let mut data = vec![0.0; x.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let idx = |l: usize| (o * len + l) * inner + i;
                    let max = (0..len).map(|l| x[idx(l)]).fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = (0..len).map(|l| (x[idx(l)] - max).exp()).sum();
                    let log_z = z.ln();
                    for l in 0..len {
                        let shifted = x[idx(l)] - max;
                        data[idx(l)] = if log { shifted - log_z } else { shifted.exp() / z };
                    }
                }
            }
            Tensor::new(a.shape().to_vec(), data)?
        };
        let rg = self.requires_grad();
        let op = if log { Op::LogSoftmax { a: self.id, axis } } else { Op::Softmax { a: self.id, axis } };
        Ok(self.tape.push(value, op, rg))
    }

    /// Softmax along `axis`, computed with max-subtraction.
    pub fn softmax(self, axis: usize) -> Result<Var<'t>> {
        self.softmax_like(axis, false)
    }

    pub fn log_softmax(self, axis: usize) -> Result<Var<'t>> {
        self.softmax_like(axis, true)
    }

    /// Flat gather: output entry `k` is input entry `indices[k]` (row-major).
    pub fn gather(self, indices: Vec<usize>, shape: Vec<usize>) -> Result<Var<'t>> {
        let value = {
            let a = self.value_ref();
            if let Some(&bad) = indices.iter().find(|&&i| i >= a.numel()) {
                return Err(Error::Index { what: "gather", index: bad, bound: a.numel() });
            }
            let data = indices.iter().map(|&i| a.data()[i]).collect();
            Tensor::new(shape, data)?
        };
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::Gather { a: self.id, indices }, rg))
    }

    /// Selects rows of a matrix, in the given order (repeats allowed).
    pub fn select_rows(self, rows: &[usize]) -> Result<Var<'t>> {
        let shape = self.shape();
        if shape.len() != 2 {
            return Err(Error::shape("select_rows", &shape, &[2]));
        }
        let cols = shape[1];
        if let Some(&bad) = rows.iter().find(|&&r| r >= shape[0]) {
            return Err(Error::Index { what: "row", index: bad, bound: shape[0] });
        }
        let indices = rows.iter().flat_map(|&r| (r * cols)..(r + 1) * cols).collect();
        self.gather(indices, vec![rows.len(), cols])
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Var<'t>> {
        let value = self.value().reshape(shape)?;
        let rg = self.requires_grad();
        Ok(self.tape.push(value, Op::Reshape { a: self.id }, rg))
    }

    /// Forward value `hard`, gradient passed unchanged to `self`.
    pub fn straight_through(self, hard: Tensor) -> Result<Var<'t>> {
        {
            let soft = self.value_ref();
            if soft.shape() != hard.shape() {
                return Err(Error::shape("straight_through", soft.shape(), hard.shape()));
            }
        }
        let rg = self.requires_grad();
        Ok(self.tape.push(hard, Op::StraightThrough { soft: self.id }, rg))
    }

    /// Multiplies by a fixed mask (as produced by [`dropout_mask`]); `None` is the identity.
    pub fn apply_mask(self, mask: Option<Tensor>) -> Result<Var<'t>> {
        match mask {
            Some(m) => self.mul(self.tape.constant(m)),
            None => Ok(self),
        }
    }

    /// Inverted dropout: in train mode each entry is zeroed with probability
    /// `p` and survivors scaled by `1/(1-p)`; in eval mode this is the identity.
    pub fn dropout<R: Rng + ?Sized>(self, p: f64, train: bool, rng: &mut R) -> Result<Var<'t>> {
        if !train || p == 0.0 {
            return Ok(self);
        }
        let mask = dropout_mask(&self.shape(), p, rng)?;
        self.apply_mask(Some(mask))
    }
}

/// Inverted-dropout mask: entries are `0` with probability `p`, else `1/(1-p)`.
pub fn dropout_mask<R: Rng + ?Sized>(shape: &[usize], p: f64, rng: &mut R) -> Result<Tensor> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Parameter(format!("dropout rate {p} not in [0, 1)")));
    }
    let keep = 1.0 / (1.0 - p);
    let numel: usize = shape.iter().product();
    let data = (0..numel).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
    Tensor::new(shape.to_vec(), data)
}

/// Gradients produced by one [`Tape::backward`] sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `var`, if the var participates in differentiation.
    pub fn wrt(&self, var: Var<'_>) -> Option<Tensor> {
        let g = self.grads.get(var.id)?.as_ref()?;
        Tensor::new(self.shapes[var.id].clone(), g.clone()).ok()
    }
}
