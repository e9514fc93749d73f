//! Tape-based reverse-mode automatic differentiation over small dense tensors.
//!
//! Every primitive appends one node to a [`Tape`]. Node values live in a
//! single contiguous arena, so a whole closed-loop rollout (a few thousand
//! nodes) is recorded without per-node allocation. Node ids are assigned in
//! recording order, which makes the tape topologically sorted by construction:
//! [`Tape::backward`] walks it once in reverse.
//!
//! Tensors are scalars (1x1), column vectors (n x 1) or row-major matrices.
//! Leaves come in two flavours: parameters (`param`) carry gradients,
//! constants (`constant`) do not, and nodes that depend only on constants are
//! skipped during the backward sweep.
//!
//! A non-finite forward value does not panic. The tape records the first such
//! event (primitive name and node id) and every caller that advances a
//! simulation checks [`Tape::status`] before continuing. Shape mismatches are
//! programming errors and panic.

use alloc::vec::Vec;
use core::fmt;

use crate::math;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn id(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { rows: 1, cols: 1 };

    pub fn vector(n: usize) -> Self {
        Shape { rows: n, cols: 1 }
    }

    pub fn matrix(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub fn len(self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

/// Primitive kinds, used by [`Tape::record`] and in diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    MatVec,
    Scale(f64),
    Offset(f64),
    Tanh,
    Sigmoid,
    Exp,
    Recip,
    /// `max(x, 0)`; subgradient 1 at zero.
    Relu,
    /// Clamp into `[lo, hi]`; gradient 1 on the closed interval.
    Clamp(f64, f64),
    Sin,
    Cos,
    Abs,
    Square,
    Sum,
    Slice { start: usize, len: usize },
    Concat,
    AvgPool2,
    Broadcast(usize),
    Reshape { rows: usize, cols: usize },
}

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::MatVec => "matvec",
            Primitive::Scale(_) => "scale",
            Primitive::Offset(_) => "offset",
            Primitive::Tanh => "tanh",
            Primitive::Sigmoid => "sigmoid",
            Primitive::Exp => "exp",
            Primitive::Recip => "recip",
            Primitive::Relu => "relu",
            Primitive::Clamp(..) => "clamp",
            Primitive::Sin => "sin",
            Primitive::Cos => "cos",
            Primitive::Abs => "abs",
            Primitive::Square => "square",
            Primitive::Sum => "sum",
            Primitive::Slice { .. } => "slice",
            Primitive::Concat => "concat",
            Primitive::AvgPool2 => "avg_pool2",
            Primitive::Broadcast(_) => "broadcast",
            Primitive::Reshape { .. } => "reshape",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TapeError {
    NonFinite { primitive: &'static str, node: usize },
    NonScalarOutput { node: usize, len: usize },
}

impl fmt::Display for TapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeError::NonFinite { primitive, node } => {
                write!(f, "non-finite value produced by `{primitive}` at node {node}")
            }
            TapeError::NonScalarOutput { node, len } => {
                write!(f, "backward requires a scalar output, node {node} has {len} elements")
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatVec(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    Tanh(Var),
    Sigmoid(Var),
    Exp(Var),
    Recip(Var),
    Relu(Var),
    Clamp(Var, f64, f64),
    Sin(Var),
    Cos(Var),
    Abs(Var),
    Square(Var),
    Sum(Var),
    Slice(Var, u32),
    /// Inputs stored in `Tape::links[start..start + count]`.
    Concat(u32, u32),
    AvgPool2(Var),
    Broadcast(Var),
    Reshape(Var),
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    offset: u32,
    shape: Shape,
    requires_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
    links: Vec<Var>,
    error: Option<TapeError>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize, values: usize) -> Self {
        Tape {
            nodes: Vec::with_capacity(nodes),
            values: Vec::with_capacity(values),
            links: Vec::new(),
            error: None,
        }
    }

    /// Drops every node but keeps the allocations.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.values.clear();
        self.links.clear();
        self.error = None;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// First non-finite event since the last [`Tape::clear`].
    pub fn status(&self) -> Result<(), TapeError> {
        match &self.error {
            None => Ok(()),
            Some(e) => Err(e.clone()),
        }
    }

    pub fn shape(&self, v: Var) -> Shape {
        self.nodes[v.id()].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let n = &self.nodes[v.id()];
        let start = n.offset as usize;
        &self.values[start..start + n.shape.len()]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "node {} is not a scalar", v.id());
        val[0]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.id()].requires_grad
    }

    // ---- leaves ------------------------------------------------------------

    fn leaf(&mut self, data: &[f64], shape: Shape, requires_grad: bool) -> Var {
        assert_eq!(data.len(), shape.len(), "leaf data does not match its shape");
        let id = self.nodes.len();
        let offset = self.values.len();
        self.values.extend_from_slice(data);
        self.nodes.push(Node { op: Op::Leaf, offset: offset as u32, shape, requires_grad });
        if data.iter().any(|x| !x.is_finite()) && self.error.is_none() {
            self.error = Some(TapeError::NonFinite { primitive: "leaf", node: id });
        }
        Var(id as u32)
    }

    pub fn param(&mut self, data: &[f64], shape: Shape) -> Var {
        self.leaf(data, shape, true)
    }

    pub fn param_vector(&mut self, data: &[f64]) -> Var {
        self.leaf(data, Shape::vector(data.len()), true)
    }

    pub fn param_scalar(&mut self, x: f64) -> Var {
        self.leaf(&[x], Shape::SCALAR, true)
    }

    pub fn constant(&mut self, data: &[f64], shape: Shape) -> Var {
        self.leaf(data, shape, false)
    }

    pub fn constant_vector(&mut self, data: &[f64]) -> Var {
        self.leaf(data, Shape::vector(data.len()), false)
    }

    pub fn constant_scalar(&mut self, x: f64) -> Var {
        self.leaf(&[x], Shape::SCALAR, false)
    }

    // ---- recording ---------------------------------------------------------

    fn push(&mut self, op: Op, shape: Shape, requires_grad: bool) -> (Var, usize) {
        let id = self.nodes.len();
        let offset = self.values.len();
        self.values.resize(offset + shape.len(), 0.0);
        self.nodes.push(Node { op, offset: offset as u32, shape, requires_grad });
        (Var(id as u32), offset)
    }

    fn check_finite(&mut self, v: Var, name: &'static str) {
        if self.error.is_none() && self.value(v).iter().any(|x| !x.is_finite()) {
            self.error = Some(TapeError::NonFinite { primitive: name, node: v.id() });
        }
    }

    fn unary(&mut self, op: Op, x: Var, name: &'static str, f: impl Fn(f64) -> f64) -> Var {
        let xn = self.nodes[x.id()];
        let (out, off) = self.push(op, xn.shape, xn.requires_grad);
        let src = xn.offset as usize;
        for i in 0..xn.shape.len() {
            self.values[off + i] = f(self.values[src + i]);
        }
        self.check_finite(out, name);
        out
    }

    fn binary(&mut self, op: Op, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Var {
        let an = self.nodes[a.id()];
        let bn = self.nodes[b.id()];
        assert_eq!(an.shape.len(), bn.shape.len(), "`{name}` shape mismatch: {:?} vs {:?}", an.shape, bn.shape);
        let (out, off) = self.push(op, an.shape, an.requires_grad || bn.requires_grad);
        let (sa, sb) = (an.offset as usize, bn.offset as usize);
        for i in 0..an.shape.len() {
            self.values[off + i] = f(self.values[sa + i], self.values[sb + i]);
        }
        self.check_finite(out, name);
        out
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Add(a, b), a, b, "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Sub(a, b), a, b, "sub", |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(Op::Mul(a, b), a, b, "mul", |x, y| x * y)
    }

    /// `m · x` for an (r x c) matrix and a length-c vector.
    pub fn matvec(&mut self, m: Var, x: Var) -> Var {
        let mn = self.nodes[m.id()];
        let xn = self.nodes[x.id()];
        let (rows, cols) = (mn.shape.rows, mn.shape.cols);
        assert_eq!(cols, xn.shape.len(), "`matvec` shape mismatch: {:?} x {:?}", mn.shape, xn.shape);
        let (out, off) = self.push(Op::MatVec(m, x), Shape::vector(rows), mn.requires_grad || xn.requires_grad);
        let (sm, sx) = (mn.offset as usize, xn.offset as usize);
        for r in 0..rows {
            let row = &self.values[sm + r * cols..sm + (r + 1) * cols];
            let xs = &self.values[sx..sx + cols];
            let mut acc = 0.0;
            for (w, v) in row.iter().zip(xs) {
                acc += w * v;
            }
            self.values[off + r] = acc;
        }
        self.check_finite(out, "matvec");
        out
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(Op::Scale(x, c), x, "scale", |v| v * c)
    }

    pub fn offset(&mut self, x: Var, c: f64) -> Var {
        self.unary(Op::Offset(x), x, "offset", |v| v + c)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(Op::Tanh(x), x, "tanh", math::tanh)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(Op::Sigmoid(x), x, "sigmoid", math::sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(Op::Exp(x), x, "exp", math::exp)
    }

    pub fn recip(&mut self, x: Var) -> Var {
        self.unary(Op::Recip(x), x, "recip", |v| 1.0 / v)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(Op::Relu(x), x, "relu", |v| if v >= 0.0 { v } else { 0.0 })
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        assert!(lo <= hi, "`clamp` with lo > hi");
        self.unary(Op::Clamp(x, lo, hi), x, "clamp", |v| v.max(lo).min(hi))
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(Op::Sin(x), x, "sin", math::sin)
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.unary(Op::Cos(x), x, "cos", math::cos)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(Op::Abs(x), x, "abs", f64::abs)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(Op::Square(x), x, "square", |v| v * v)
    }

    /// Sum of every element, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let xn = self.nodes[x.id()];
        let (out, off) = self.push(Op::Sum(x), Shape::SCALAR, xn.requires_grad);
        let src = xn.offset as usize;
        let mut acc = 0.0;
        for i in 0..xn.shape.len() {
            acc += self.values[src + i];
        }
        self.values[off] = acc;
        self.check_finite(out, "sum");
        out
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Var {
        let xn = self.nodes[x.id()];
        assert!(start + len <= xn.shape.len(), "`slice` out of range");
        let (out, off) = self.push(Op::Slice(x, start as u32), Shape::vector(len), xn.requires_grad);
        let src = xn.offset as usize + start;
        self.values.copy_within(src..src + len, off);
        out
    }

    /// Concatenates the flattened inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "`concat` of nothing");
        let total: usize = parts.iter().map(|p| self.nodes[p.id()].shape.len()).sum();
        let grad = parts.iter().any(|p| self.nodes[p.id()].requires_grad);
        let start = self.links.len() as u32;
        self.links.extend_from_slice(parts);
        let (out, mut off) = self.push(Op::Concat(start, parts.len() as u32), Shape::vector(total), grad);
        for p in parts {
            let pn = self.nodes[p.id()];
            let src = pn.offset as usize;
            let n = pn.shape.len();
            self.values.copy_within(src..src + n, off);
            off += n;
        }
        out
    }

    /// Non-overlapping mean pooling with window 2; a trailing odd element is dropped.
    pub fn avg_pool2(&mut self, x: Var) -> Var {
        let xn = self.nodes[x.id()];
        let n = xn.shape.len() / 2;
        let (out, off) = self.push(Op::AvgPool2(x), Shape::vector(n), xn.requires_grad);
        let src = xn.offset as usize;
        for i in 0..n {
            self.values[off + i] = 0.5 * (self.values[src + 2 * i] + self.values[src + 2 * i + 1]);
        }
        out
    }

    /// Repeats a scalar `n` times.
    pub fn broadcast(&mut self, s: Var, n: usize) -> Var {
        let sn = self.nodes[s.id()];
        assert_eq!(sn.shape.len(), 1, "`broadcast` expects a scalar");
        let (out, off) = self.push(Op::Broadcast(s), Shape::vector(n), sn.requires_grad);
        let v = self.values[sn.offset as usize];
        self.values[off..off + n].fill(v);
        out
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let xn = self.nodes[x.id()];
        assert_eq!(xn.shape.len(), rows * cols, "`reshape` changes the element count");
        let (out, off) = self.push(Op::Reshape(x), Shape::matrix(rows, cols), xn.requires_grad);
        let src = xn.offset as usize;
        self.values.copy_within(src..src + rows * cols, off);
        out
    }

    /// Records `prim` applied to `inputs`.
    pub fn record(&mut self, prim: Primitive, inputs: &[Var]) -> Var {
        let arity = |n: usize| assert_eq!(inputs.len(), n, "`{}` takes {n} input(s)", prim.name());
        match prim {
            Primitive::Add => { arity(2); self.add(inputs[0], inputs[1]) }
            Primitive::Sub => { arity(2); self.sub(inputs[0], inputs[1]) }
            Primitive::Mul => { arity(2); self.mul(inputs[0], inputs[1]) }
            Primitive::MatVec => { arity(2); self.matvec(inputs[0], inputs[1]) }
            Primitive::Scale(c) => { arity(1); self.scale(inputs[0], c) }
            Primitive::Offset(c) => { arity(1); self.offset(inputs[0], c) }
            Primitive::Tanh => { arity(1); self.tanh(inputs[0]) }
            Primitive::Sigmoid => { arity(1); self.sigmoid(inputs[0]) }
            Primitive::Exp => { arity(1); self.exp(inputs[0]) }
            Primitive::Recip => { arity(1); self.recip(inputs[0]) }
            Primitive::Relu => { arity(1); self.relu(inputs[0]) }
            Primitive::Clamp(lo, hi) => { arity(1); self.clamp(inputs[0], lo, hi) }
            Primitive::Sin => { arity(1); self.sin(inputs[0]) }
            Primitive::Cos => { arity(1); self.cos(inputs[0]) }
            Primitive::Abs => { arity(1); self.abs(inputs[0]) }
            Primitive::Square => { arity(1); self.square(inputs[0]) }
            Primitive::Sum => { arity(1); self.sum(inputs[0]) }
            Primitive::Slice { start, len } => { arity(1); self.slice(inputs[0], start, len) }
            Primitive::Concat => self.concat(inputs),
            Primitive::AvgPool2 => { arity(1); self.avg_pool2(inputs[0]) }
            Primitive::Broadcast(n) => { arity(1); self.broadcast(inputs[0], n) }
            Primitive::Reshape { rows, cols } => { arity(1); self.reshape(inputs[0], rows, cols) }
        }
    }

    // ---- reverse sweep -----------------------------------------------------

    /// Adjoints of every node with respect to the scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients<'_>, TapeError> {
        let mut adj = Vec::new();
        self.backward_into(output, &mut adj)?;
        Ok(Gradients { tape: self, adj })
    }

    /// As [`Tape::backward`], writing into a reusable adjoint buffer.
    pub fn backward_into(&self, output: Var, adj: &mut Vec<f64>) -> Result<(), TapeError> {
        let out = self.nodes[output.id()];
        if out.shape.len() != 1 {
            return Err(TapeError::NonScalarOutput { node: output.id(), len: out.shape.len() });
        }
        adj.clear();
        adj.resize(self.values.len(), 0.0);
        adj[out.offset as usize] = 1.0;
        let vals = &self.values;
        for id in (0..=output.id()).rev() {
            let node = self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let off = node.offset as usize;
            let n = node.shape.len();
            // Inputs always precede `off` in the arena.
            let (lo, hi) = adj.split_at_mut(off);
            let g = &hi[..n];
            let range = |v: Var| {
                let nn = self.nodes[v.id()];
                (nn.offset as usize, nn.shape.len(), nn.requires_grad)
            };
            match node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    for (v, sign) in [(a, 1.0), (b, 1.0)] {
                        let (o, _, rg) = range(v);
                        if rg {
                            for i in 0..n {
                                lo[o + i] += sign * g[i];
                            }
                        }
                    }
                }
                Op::Sub(a, b) => {
                    for (v, sign) in [(a, 1.0), (b, -1.0)] {
                        let (o, _, rg) = range(v);
                        if rg {
                            for i in 0..n {
                                lo[o + i] += sign * g[i];
                            }
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (oa, _, ga) = range(a);
                    let (ob, _, gb) = range(b);
                    if ga {
                        for i in 0..n {
                            lo[oa + i] += g[i] * vals[ob + i];
                        }
                    }
                    if gb {
                        for i in 0..n {
                            lo[ob + i] += g[i] * vals[oa + i];
                        }
                    }
                }
                Op::MatVec(m, x) => {
                    let mn = self.nodes[m.id()];
                    let (rows, cols) = (mn.shape.rows, mn.shape.cols);
                    let (om, _, gm) = range(m);
                    let (ox, _, gx) = range(x);
                    if gm {
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for c in 0..cols {
                                    lo[om + r * cols + c] += gr * vals[ox + c];
                                }
                            }
                        }
                    }
                    if gx {
                        for r in 0..rows {
                            let gr = g[r];
                            if gr != 0.0 {
                                for c in 0..cols {
                                    lo[ox + c] += gr * vals[om + r * cols + c];
                                }
                            }
                        }
                    }
                }
                Op::Scale(x, c) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] += c * g[i];
                    }
                }
                Op::Offset(x) | Op::Reshape(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] += g[i];
                    }
                }
                Op::Tanh(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        let y = vals[off + i];
                        lo[o + i] += g[i] * (1.0 - y * y);
                    }
                }
                Op::Sigmoid(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        let y = vals[off + i];
                        lo[o + i] += g[i] * y * (1.0 - y);
                    }
                }
                Op::Exp(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] += g[i] * vals[off + i];
                    }
                }
                Op::Recip(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        let y = vals[off + i];
                        lo[o + i] -= g[i] * y * y;
                    }
                }
                Op::Relu(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        if vals[o + i] >= 0.0 {
                            lo[o + i] += g[i];
                        }
                    }
                }
                Op::Clamp(x, a, b) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        let v = vals[o + i];
                        if v >= a && v <= b {
                            lo[o + i] += g[i];
                        }
                    }
                }
                Op::Sin(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] += g[i] * math::cos(vals[o + i]);
                    }
                }
                Op::Cos(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] -= g[i] * math::sin(vals[o + i]);
                    }
                }
                Op::Abs(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        let v = vals[o + i];
                        if v > 0.0 {
                            lo[o + i] += g[i];
                        } else if v < 0.0 {
                            lo[o + i] -= g[i];
                        }
                    }
                }
                Op::Square(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + i] += 2.0 * g[i] * vals[o + i];
                    }
                }
                Op::Sum(x) => {
                    let (o, len, _) = range(x);
                    let g0 = g[0];
                    for i in 0..len {
                        lo[o + i] += g0;
                    }
                }
                Op::Slice(x, start) => {
                    let (o, _, _) = range(x);
                    let o = o + start as usize;
                    for i in 0..n {
                        lo[o + i] += g[i];
                    }
                }
                Op::Concat(start, count) => {
                    let mut k = 0;
                    for p in &self.links[start as usize..(start + count) as usize] {
                        let (o, len, rg) = range(*p);
                        if rg {
                            for i in 0..len {
                                lo[o + i] += g[k + i];
                            }
                        }
                        k += len;
                    }
                }
                Op::AvgPool2(x) => {
                    let (o, _, _) = range(x);
                    for i in 0..n {
                        lo[o + 2 * i] += 0.5 * g[i];
                        lo[o + 2 * i + 1] += 0.5 * g[i];
                    }
                }
                Op::Broadcast(s) => {
                    let (o, _, _) = range(s);
                    let mut acc = 0.0;
                    for gi in g {
                        acc += gi;
                    }
                    lo[o] += acc;
                }
            }
        }
        Ok(())
    }

    /// Reads the adjoint of `v` out of a buffer filled by [`Tape::backward_into`].
    pub fn adjoint<'a>(&self, adj: &'a [f64], v: Var) -> &'a [f64] {
        let n = &self.nodes[v.id()];
        let start = n.offset as usize;
        &adj[start..start + n.shape.len()]
    }
}

/// Adjoint map returned by [`Tape::backward`].
pub struct Gradients<'t> {
    tape: &'t Tape,
    adj: Vec<f64>,
}

impl Gradients<'_> {
    /// `∂output/∂v`; zero for nodes the output does not depend on.
    pub fn get(&self, v: Var) -> &[f64] {
        self.tape.adjoint(&self.adj, v)
    }

    pub fn into_buffer(self) -> Vec<f64> {
        self.adj
    }
}

/// Compares reverse-mode gradients of `f` at `theta` against central
/// differences with step `h`.
///
/// `f` receives a fresh tape and the parameter vector as a single leaf and
/// must return a scalar node. The result is the largest
/// `|analytic - numeric| / max(1, |analytic|)` over all coordinates, or
/// infinity if anything is non-finite.
pub fn check_gradient<F>(f: F, theta: &[f64], h: f64) -> f64
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let mut tape = Tape::new();
    let x = tape.param_vector(theta);
    let y = f(&mut tape, x);
    if tape.status().is_err() {
        return f64::INFINITY;
    }
    let grads = match tape.backward(y) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };
    let analytic: Vec<f64> = grads.get(x).to_vec();
    drop(grads);

    let eval = |point: &[f64]| -> f64 {
        let mut t = Tape::new();
        let x = t.constant_vector(point);
        let y = f(&mut t, x);
        if t.status().is_err() {
            f64::NAN
        } else {
            t.scalar(y)
        }
    };

    let mut worst: f64 = 0.0;
    let mut point = theta.to_vec();
    for i in 0..theta.len() {
        point[i] = theta[i] + h;
        let up = eval(&point);
        point[i] = theta[i] - h;
        let down = eval(&point);
        point[i] = theta[i];
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        if !numeric.is_finite() || !a.is_finite() {
            return f64::INFINITY;
        }
        let err = (a - numeric).abs() / a.abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Convenience: gradient of a scalar function at `theta`, by reverse mode.
pub fn gradient<F>(f: F, theta: &[f64]) -> Result<(f64, Vec<f64>), TapeError>
where
    F: Fn(&mut Tape, Var) -> Var,
{
    let mut tape = Tape::new();
    let x = tape.param_vector(theta);
    let y = f(&mut tape, x);
    tape.status()?;
    let value = tape.scalar(y);
    let g = tape.backward(y)?;
    Ok((value, g.get(x).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let mut t = Tape::new();
        let x = t.constant_scalar(0.0);
        let y = t.record(Primitive::Tanh, &[x]);
        assert_eq!(t.scalar(y), 0.0);

        let a = t.constant_scalar(2.0);
        let b = t.constant_scalar(3.0);
        let p = t.record(Primitive::Mul, &[a, b]);
        assert_eq!(t.scalar(p), 6.0);

        let v = t.constant_vector(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let pooled = t.record(Primitive::AvgPool2, &[v]);
        assert_eq!(t.value(pooled), &[1.5, 3.5]);
    }

    #[test]
    fn backward_examples() {
        let mut t = Tape::new();
        let x = t.param_scalar(2.0);
        let y = t.param_scalar(3.0);
        let f = t.mul(x, y);
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(x), &[3.0]);
        assert_eq!(g.get(y), &[2.0]);

        let mut t = Tape::new();
        let x = t.param_scalar(0.0);
        let f = t.tanh(x);
        assert_eq!(t.backward(f).unwrap().get(x), &[1.0]);

        let mut t = Tape::new();
        let x = t.param_scalar(0.0);
        let f = t.sigmoid(x);
        assert_eq!(t.backward(f).unwrap().get(x), &[0.25]);
    }

    #[test]
    fn unused_leaf_gets_zero() {
        let mut t = Tape::new();
        let x = t.param_scalar(1.5);
        let unused = t.param_vector(&[1.0, 2.0]);
        let f = t.square(x);
        let g = t.backward(f).unwrap();
        assert_eq!(g.get(unused), &[0.0, 0.0]);
        assert_eq!(g.get(x), &[3.0]);
    }

    #[test]
    fn non_scalar_backward_is_rejected() {
        let mut t = Tape::new();
        let x = t.param_vector(&[1.0, 2.0]);
        assert!(matches!(t.backward(x), Err(TapeError::NonScalarOutput { len: 2, .. })));
    }

    #[test]
    fn non_finite_is_reported_with_primitive_and_node() {
        let mut t = Tape::new();
        let x = t.constant_scalar(0.0);
        let r = t.recip(x);
        let _ = t.exp(r);
        assert_eq!(t.status(), Err(TapeError::NonFinite { primitive: "recip", node: r.id() }));
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn shape_mismatch_panics() {
        let mut t = Tape::new();
        let a = t.constant_vector(&[1.0, 2.0]);
        let b = t.constant_vector(&[1.0, 2.0, 3.0]);
        t.add(a, b);
    }

    #[test]
    fn check_gradient_quadratic() {
        let err = check_gradient(|t, x| { let s = t.square(x); t.sum(s) }, &[3.0], 1e-5);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn clamp_gradient_at_kink_is_left_limit() {
        let mut t = Tape::new();
        let x = t.param_vector(&[0.0, -1e-12]);
        let r = t.relu(x);
        let s = t.sum(r);
        assert_eq!(t.backward(s).unwrap().get(x), &[1.0, 0.0]);
    }

    #[test]
    fn matvec_and_concat_gradients() {
        // f(m, x) = sum(concat(m x, x))
        let mut t = Tape::new();
        let m = t.param(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Shape::matrix(2, 3));
        let x = t.param_vector(&[1.0, -1.0, 0.5]);
        let y = t.matvec(m, x);
        assert_eq!(t.value(y), &[1.0 - 2.0 + 1.5, 4.0 - 5.0 + 3.0]);
        let c = t.concat(&[y, x]);
        let s = t.sum(c);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(m), &[1.0, -1.0, 0.5, 1.0, -1.0, 0.5]);
        assert_eq!(g.get(x), &[1.0 + 4.0 + 1.0, 2.0 + 5.0 + 1.0, 3.0 + 6.0 + 1.0]);
    }

    #[test]
    fn constants_do_not_require_grad() {
        let mut t = Tape::new();
        let c = t.constant_vector(&[1.0, 2.0]);
        let p = t.param_vector(&[3.0, 4.0]);
        let a = t.tanh(c);
        assert!(!t.requires_grad(a));
        let b = t.mul(a, p);
        assert!(t.requires_grad(b));
    }
}
