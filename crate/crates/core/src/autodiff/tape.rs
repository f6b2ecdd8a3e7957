//! Scalar reverse-mode tape.
//!
//! Every arithmetic operation on a [`Var`] appends a node holding its operand
//! indices and the local partial derivatives with respect to each operand.
//! Nodes are appended in evaluation order, so operands always precede their
//! users and a single backward pass over the node list accumulates adjoints.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use super::real::{sigmoid, softplus, Real};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Operation that produced a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf,
    Param,
    Const,
    Add,
    Sub,
    Mul,
    Neg,
    Scale,
    Offset,
    Sin,
    Cos,
    Tanh,
    Exp,
    Sigmoid,
    Softplus,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    args: [u32; 2],
    partials: [f64; 2],
}

/// Index of a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub u32);

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    /// (node, parameter slot) for every parameter leaf.
    slots: RefCell<Vec<(u32, usize)>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.len())
            .field("params", &self.slots.borrow().len())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Forget all nodes, keeping allocations.
    pub fn clear(&mut self) {
        self.nodes.get_mut().clear();
        self.slots.get_mut().clear();
    }

    fn push(&self, op: Op, args: [u32; 2], partials: [f64; 2], value: f64) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let idx = nodes.len() as u32;
        nodes.push(Node { op, args, partials });
        Var { tape: self, idx, val: value }
    }

    /// Independent input that is not a trainable parameter.
    pub fn leaf(&self, value: f64) -> Var<'_> {
        self.push(Op::Leaf, [NONE; 2], [0.0; 2], value)
    }

    pub fn constant(&self, value: f64) -> Var<'_> {
        self.push(Op::Const, [NONE; 2], [0.0; 2], value)
    }

    /// Leaf bound to position `slot` of the flat parameter vector.
    pub fn param(&self, slot: usize, value: f64) -> Var<'_> {
        let v = self.push(Op::Param, [NONE; 2], [0.0; 2], value);
        self.slots.borrow_mut().push((v.idx, slot));
        v
    }

    /// One parameter leaf per entry of `theta`, bound to slots `0..theta.len()`.
    pub fn params(&self, theta: &[f64]) -> Vec<Var<'_>> {
        theta.iter().enumerate().map(|(k, &x)| self.param(k, x)).collect()
    }

    pub fn op(&self, id: NodeId) -> Option<Op> {
        self.nodes.borrow().get(id.0 as usize).map(|n| n.op)
    }

    /// Adjoint of `output` with respect to every node.
    pub fn adjoints(&self, output: NodeId) -> Result<Adjoints> {
        let nodes = self.nodes.borrow();
        let out = output.0 as usize;
        if out >= nodes.len() {
            return Err(Error::Contract(format!(
                "node {out} is not on this tape ({} nodes)",
                nodes.len()
            )));
        }
        let mut adj = vec![0.0; out + 1];
        adj[out] = 1.0;
        for i in (0..=out).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = &nodes[i];
            for k in 0..2 {
                let arg = node.args[k];
                if arg != NONE {
                    adj[arg as usize] += a * node.partials[k];
                }
            }
        }
        Ok(Adjoints(adj))
    }

    /// Gradient of `output` over the parameter slots. Slots the output does
    /// not depend on get zero.
    pub fn backward(&self, output: NodeId) -> Result<Vec<f64>> {
        let adj = self.adjoints(output)?;
        let slots = self.slots.borrow();
        let n = slots.iter().map(|&(_, s)| s + 1).max().unwrap_or(0);
        let mut grad = vec![0.0; n];
        for &(node, slot) in slots.iter() {
            grad[slot] += adj.0.get(node as usize).copied().unwrap_or(0.0);
        }
        Ok(grad)
    }
}

/// Result of a reverse sweep.
#[derive(Debug, Clone)]
pub struct Adjoints(Vec<f64>);

impl Adjoints {
    pub fn of(&self, v: Var<'_>) -> f64 {
        self.0.get(v.idx as usize).copied().unwrap_or(0.0)
    }
}

/// Scalar variable recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.idx, self.val)
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> NodeId {
        NodeId(self.idx)
    }

    fn unary(self, op: Op, value: f64, partial: f64) -> Self {
        self.tape.push(op, [self.idx, NONE], [partial, 0.0], value)
    }

    fn binary(self, o: Self, op: Op, value: f64, pa: f64, pb: f64) -> Self {
        assert!(std::ptr::eq(self.tape, o.tape), "operands recorded on different tapes");
        self.tape.push(op, [self.idx, o.idx], [pa, pb], value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        self.binary(o, Op::Add, self.val + o.val, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self.binary(o, Op::Sub, self.val - o.val, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        self.binary(o, Op::Mul, self.val * o.val, o.val, self.val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.val, -1.0)
    }
}

impl<'t> Real for Var<'t> {
    fn value(&self) -> f64 {
        self.val
    }
    fn lift(&self, c: f64) -> Self {
        self.tape.constant(c)
    }
    fn scale(self, c: f64) -> Self {
        self.unary(Op::Scale, self.val * c, c)
    }
    fn offset(self, c: f64) -> Self {
        self.unary(Op::Offset, self.val + c, 1.0)
    }
    fn sin(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.unary(Op::Sin, s, c)
    }
    fn cos(self) -> Self {
        let (s, c) = self.val.sin_cos();
        self.unary(Op::Cos, c, -s)
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        self.unary(Op::Tanh, t, 1.0 - t * t)
    }
    fn exp(self) -> Self {
        let e = self.val.exp();
        self.unary(Op::Exp, e, e)
    }
    fn sigmoid(self) -> Self {
        let s = sigmoid(self.val);
        self.unary(Op::Sigmoid, s, s * (1.0 - s))
    }
    fn softplus(self) -> Self {
        self.unary(Op::Softplus, softplus(self.val), sigmoid(self.val))
    }
}
