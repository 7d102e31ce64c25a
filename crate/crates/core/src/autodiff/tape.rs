//! Scalar reverse-mode tape.
//!
//! Every arithmetic operation on a [`Var`] appends one node holding its value
//! and the local partials with respect to (at most two) operands. Nodes are
//! appended in evaluation order, so the node list is already topologically
//! sorted and the reverse sweep is a single backwards pass.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::{AutodiffError, JetScalar};
use crate::Real;

/// Operation that produced a tape node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Input,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    MulConst,
    Tanh,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Recip,
    Powi,
    Powf,
}

#[derive(Clone, Copy, Debug)]
struct Node {
    op: Op,
    args: [u32; 2],
    partials: [Real; 2],
    arity: u8,
    value: Real,
}

/// Append-only record of scalar operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(capacity)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops all nodes, keeping the allocation.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
    }

    /// A differentiable leaf.
    pub fn var(&self, value: Real) -> Var<'_> {
        self.push(Op::Input, [0, 0], [0.0, 0.0], 0, value)
    }

    pub fn vars(&self, values: &[Real]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    pub fn constant(&self, value: Real) -> Var<'_> {
        self.push(Op::Const, [0, 0], [0.0, 0.0], 0, value)
    }

    fn push(&self, op: Op, args: [u32; 2], partials: [Real; 2], arity: u8, value: Real) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len() as u32;
        nodes.push(Node {
            op,
            args,
            partials,
            arity,
            value,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Adjoints `∂output/∂node` for every node up to and including `output`.
    ///
    /// Fails on the first (in evaluation order) node whose value is not
    /// finite, since its adjoint contributions would be meaningless.
    pub fn adjoints(&self, output: Var<'_>) -> Result<Vec<Real>, AutodiffError> {
        debug_assert!(std::ptr::eq(self, output.tape), "variable from another tape");
        let nodes = self.nodes.borrow();
        let end = output.index as usize + 1;
        if let Some((node, n)) = nodes[..end].iter().enumerate().find(|(_, n)| !n.value.is_finite()) {
            return Err(AutodiffError::NonFinite { node, op: n.op });
        }
        let mut adj = vec![0.0 as Real; end];
        adj[end - 1] = 1.0;
        for i in (0..end).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = &nodes[i];
            for k in 0..n.arity as usize {
                adj[n.args[k] as usize] += a * n.partials[k];
            }
        }
        Ok(adj)
    }
}

/// A scalar recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: Real,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}, {})", self.index, self.value)
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.index as usize
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: Op, value: Real, partial: Real) -> Self {
        self.tape.push(op, [self.index, 0], [partial, 0.0], 1, value)
    }

    fn binary(self, rhs: Self, op: Op, value: Real, dl: Real, dr: Real) -> Self {
        debug_assert!(std::ptr::eq(self.tape, rhs.tape), "variables from different tapes");
        self.tape.push(op, [self.index, rhs.index], [dl, dr], 2, value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        let q = self.value * inv;
        self.binary(rhs, Op::Div, q, inv, -q * inv)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<Real> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Real) -> Self {
        self.unary(Op::AddConst, self.value + rhs, 1.0)
    }
}

impl<'t> Sub<Real> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Real) -> Self {
        self.unary(Op::AddConst, self.value - rhs, 1.0)
    }
}

impl<'t> Mul<Real> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Real) -> Self {
        self.unary(Op::MulConst, self.value * rhs, rhs)
    }
}

impl<'t> Div<Real> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Real) -> Self {
        self.unary(Op::MulConst, self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for Real {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for Real {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(Op::AddConst, self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for Real {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> JetScalar for Var<'t> {
    fn value(&self) -> Real {
        self.value
    }

    fn lift(&self, c: Real) -> Self {
        self.tape.constant(c)
    }

    fn tanh(&self) -> Self {
        let t = self.value.tanh();
        self.unary(Op::Tanh, t, 1.0 - t * t)
    }

    fn sin(&self) -> Self {
        self.unary(Op::Sin, self.value.sin(), self.value.cos())
    }

    fn cos(&self) -> Self {
        self.unary(Op::Cos, self.value.cos(), -self.value.sin())
    }

    fn exp(&self) -> Self {
        let e = self.value.exp();
        self.unary(Op::Exp, e, e)
    }

    fn ln(&self) -> Self {
        self.unary(Op::Ln, self.value.ln(), 1.0 / self.value)
    }

    fn sqrt(&self) -> Self {
        let s = self.value.sqrt();
        self.unary(Op::Sqrt, s, 0.5 / s)
    }

    fn recip(&self) -> Self {
        let r = 1.0 / self.value;
        self.unary(Op::Recip, r, -r * r)
    }

    fn powi(&self, n: i32) -> Self {
        let d = if n == 0 {
            0.0
        } else {
            n as Real * self.value.powi(n - 1)
        };
        self.unary(Op::Powi, self.value.powi(n), d)
    }

    fn powf(&self, p: Real) -> Self {
        let d = if p == 0.0 { 0.0 } else { p * self.value.powf(p - 1.0) };
        self.unary(Op::Powf, self.value.powf(p), d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let tape = Tape::new();
        let x = tape.var(3.0);
        let y = tape.var(-2.0);
        let z = x * y + x.sin();
        let adj = tape.adjoints(z).unwrap();
        assert_eq!(adj[x.index()], -2.0 + (3.0 as Real).cos());
        assert_eq!(adj[y.index()], 3.0);
    }

    #[test]
    fn reused_operand_accumulates() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let z = x * x * x;
        let adj = tape.adjoints(z).unwrap();
        assert!((adj[x.index()] - 3.0 * 1.5 * 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_names_first_node() {
        let tape = Tape::new();
        let x = tape.var(0.0);
        let y = tape.var(2.0);
        let bad = y / x;
        let worse = bad * y;
        match tape.adjoints(worse) {
            Err(AutodiffError::NonFinite { node, op }) => {
                assert_eq!(node, bad.index());
                assert_eq!(op, Op::Div);
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn reset_reuses_tape() {
        let mut tape = Tape::new();
        {
            let x = tape.var(1.0);
            let _ = x + 1.0;
        }
        assert_eq!(tape.len(), 2);
        tape.reset();
        assert!(tape.is_empty());
    }
}
