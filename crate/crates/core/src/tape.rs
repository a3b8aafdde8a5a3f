//! Minimal reverse-mode automatic differentiation on a Wengert list.
//!
//! A [`Tape`] records one node per primitive result; each node stores its
//! value and the local partial derivatives with respect to its parents.
//! Constants never touch the tape: a [`Var`] without a tape reference is a
//! plain number, so quantities computed outside the differentiated region
//! cost nothing and contribute no gradient.
//!
//! Nodes are appended in evaluation order, so every node's parents precede
//! it and a single reverse sweep accumulates all adjoints.
//!
//! Besides ordinary nodes the tape supports *implicit blocks*: a contiguous
//! run of leaves whose adjoint is mapped through a user-supplied linear solve
//! and injected into earlier target nodes. This realises implicit-function
//! derivatives without recording the iterations that produced the leaves.

use std::cell::RefCell;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::real::{sigmoid_f64, Real};

#[derive(Debug, Clone, Copy)]
struct Node {
    value: f64,
    edge_start: usize,
    edge_end: usize,
}

/// Maps the adjoint of an implicit leaf block to adjoints of its targets.
pub type AdjointMap = Box<dyn Fn(&[f64]) -> Vec<f64>>;

struct ImplicitBlock {
    first_leaf: usize,
    leaf_count: usize,
    targets: Vec<Option<usize>>,
    map: AdjointMap,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    edges: RefCell<Vec<(usize, f64)>>,
    blocks: RefCell<Vec<ImplicitBlock>>,
}

impl std::fmt::Debug for Tape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.len())
            .field("edges", &self.edges.borrow().len())
            .field("implicit_blocks", &self.blocks.borrow().len())
            .finish()
    }
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: usize,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var#{}({})", self.index, self.value),
            None => write!(f, "Const({})", self.value),
        }
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

    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(value, std::iter::empty());
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    pub fn vars(&self, values: &[f64]) -> Vec<Var<'_>> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Recorded value of node `index`.
    pub fn value(&self, index: usize) -> f64 {
        self.nodes.borrow()[index].value
    }

    fn push(&self, value: f64, parents: impl IntoIterator<Item = (usize, f64)>) -> usize {
        let mut edges = self.edges.borrow_mut();
        let edge_start = edges.len();
        edges.extend(parents);
        let edge_end = edges.len();
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            edge_start,
            edge_end,
        });
        nodes.len() - 1
    }

    /// Creates `values.len()` fresh leaves whose adjoint, once complete, is
    /// passed through `map` and added to the adjoints of `targets`.
    ///
    /// Targets must already be on the tape (or be constants, which are
    /// ignored), so they are visited after the block during the reverse
    /// sweep.
    pub fn implicit_leaves<'t>(
        &'t self,
        values: &[f64],
        targets: &[Var<'t>],
        map: AdjointMap,
    ) -> Vec<Var<'t>> {
        let first_leaf = self.len();
        let leaves = self.vars(values);
        let targets = targets
            .iter()
            .map(|t| {
                t.tape.map(|tape| {
                    debug_assert!(std::ptr::eq(tape, self));
                    debug_assert!(t.index < first_leaf);
                    t.index
                })
            })
            .collect();
        self.blocks.borrow_mut().push(ImplicitBlock {
            first_leaf,
            leaf_count: values.len(),
            targets,
            map,
        });
        leaves
    }

    /// Reverse sweep seeded with `d output / d output = 1`; returns the full
    /// adjoint vector indexed by node.
    pub fn adjoints(&self, output: usize) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let edges = self.edges.borrow();
        let blocks = self.blocks.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output] = 1.0;

        let mut pending: Vec<&ImplicitBlock> = blocks
            .iter()
            .filter(|b| b.first_leaf <= output)
            .collect();
        pending.sort_by_key(|b| b.first_leaf);

        for i in (0..=output).rev() {
            let a = adj[i];
            let node = nodes[i];
            if a != 0.0 {
                for &(parent, partial) in &edges[node.edge_start..node.edge_end] {
                    adj[parent] += partial * a;
                }
            }
            while let Some(block) = pending.last() {
                if block.first_leaf != i {
                    break;
                }
                let leaf_adj = &adj[block.first_leaf..block.first_leaf + block.leaf_count];
                if leaf_adj.iter().any(|&v| v != 0.0) {
                    let injected = (block.map)(leaf_adj);
                    debug_assert_eq!(injected.len(), block.targets.len());
                    for (target, w) in block.targets.iter().zip(injected) {
                        if let Some(t) = target {
                            adj[*t] += w;
                        }
                    }
                }
                pending.pop();
            }
        }
        adj
    }

    /// Gradient of `output` with respect to `wrt`.
    pub fn gradient(&self, output: Var<'_>, wrt: &[Var<'_>]) -> Vec<f64> {
        let Some(out) = output.index() else {
            return vec![0.0; wrt.len()];
        };
        let adj = self.adjoints(out);
        wrt.iter()
            .map(|v| v.index().map_or(0.0, |i| adj[i]))
            .collect()
    }
}

impl<'t> Var<'t> {
    pub fn constant(value: f64) -> Self {
        Var {
            tape: None,
            index: usize::MAX,
            value,
        }
    }

    /// Node index when the variable lives on a tape.
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.index)
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    /// Drops the dependency on the tape, keeping the value.
    pub fn detach(self) -> Self {
        Var::constant(self.value)
    }

    fn unary(self, value: f64, partial: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(tape) => Var {
                tape: Some(tape),
                index: tape.push(value, [(self.index, partial)]),
                value,
            },
        }
    }

    fn binary(a: Self, b: Self, value: f64, da: f64, db: f64) -> Self {
        let tape = match (a.tape, b.tape) {
            (None, None) => return Var::constant(value),
            (Some(t), None) | (None, Some(t)) => t,
            (Some(t), Some(u)) => {
                debug_assert!(std::ptr::eq(t, u), "mixing variables from two tapes");
                t
            }
        };
        let parents = a
            .tape
            .map(|_| (a.index, da))
            .into_iter()
            .chain(b.tape.map(|_| (b.index, db)));
        Var {
            tape: Some(tape),
            index: tape.push(value, parents),
            value,
        }
    }
}

impl Add for Var<'_> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Var::binary(self, rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl Sub for Var<'_> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Var::binary(self, rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl Mul for Var<'_> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Var::binary(self, rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl Div for Var<'_> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        Var::binary(self, rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl Neg for Var<'_> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl AddAssign for Var<'_> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Real for Var<'_> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }

    fn value(self) -> f64 {
        self.value
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.value);
        self.unary(s, s * (1.0 - s))
    }

    fn relu(self) -> Self {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            Var::constant(0.0)
        }
    }

    fn leaky_relu(self, slope: f64) -> Self {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            self.unary(self.value * slope, slope)
        }
    }

    fn sum(xs: &[Self]) -> Self {
        let mut value = 0.0;
        for x in xs {
            value += x.value;
        }
        n_ary(xs.iter().map(|x| (*x, 1.0)), value)
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut value = 0.0;
        for (x, y) in a.iter().zip(b) {
            value += x.value * y.value;
        }
        n_ary(
            a.iter()
                .zip(b)
                .flat_map(|(x, y)| [(*x, y.value), (*y, x.value)]),
            value,
        )
    }

    fn weighted_sum(weights: &[f64], xs: &[Self]) -> Self {
        debug_assert_eq!(weights.len(), xs.len());
        let mut value = 0.0;
        for (w, x) in weights.iter().zip(xs) {
            value += x.value * w;
        }
        n_ary(xs.iter().zip(weights).map(|(x, w)| (*x, *w)), value)
    }
}

/// Single node with many parents. Constant parents are skipped.
fn n_ary<'t>(parents: impl Iterator<Item = (Var<'t>, f64)>, value: f64) -> Var<'t> {
    let mut tape = None;
    let mut edges = Vec::new();
    for (p, partial) in parents {
        if let Some(t) = p.tape {
            tape = Some(t);
            edges.push((p.index, partial));
        }
    }
    match tape {
        None => Var::constant(value),
        Some(t) => Var {
            tape: Some(t),
            index: t.push(value, edges),
            value,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::softmax;

    fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i] += h;
                dn[i] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            })
            .collect()
    }

    fn composite<R: Real>(x: &[R]) -> R {
        let p = softmax(x);
        let a = R::dot(&p, x);
        let b = (x[0] * x[1]).tanh() + x[2].sigmoid() / (x[1].exp() + R::cst(2.0));
        let c = R::sum(&[x[0].relu(), x[1].leaky_relu(0.1), (x[2] * x[2] + R::cst(1.0)).ln()]);
        a * b - c + R::weighted_sum(&[0.5, -2.0, 3.0], x)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x0 = [0.7, -1.3, 0.4];
        let tape = Tape::new();
        let x = tape.vars(&x0);
        let y = composite(&x);
        assert_eq!(y.value(), composite(&x0));
        let g = tape.gradient(y, &x);
        let fd = central_diff(|v| composite(v), &x0, 1e-6);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-8, "{g:?} vs {fd:?}");
        }
    }

    #[test]
    fn constants_do_not_record() {
        let tape = Tape::new();
        let a = Var::constant(2.0);
        let b = Var::constant(3.0);
        let c = (a * b).exp() + a;
        assert!(c.is_constant());
        assert!(tape.is_empty());
    }

    #[test]
    fn detached_path_has_zero_gradient() {
        let tape = Tape::new();
        let x = tape.var(1.5);
        let y = x * x.detach();
        assert_eq!(tape.gradient(y, &[x]), vec![1.5]);
    }

    #[test]
    fn implicit_block_injects_mapped_adjoint() {
        // y = 2 z where z is an implicit leaf standing for z(x) with dz/dx = 3.
        // Target is t = x, map multiplies the adjoint by 3.
        let tape = Tape::new();
        let x = tape.var(1.0);
        let z = tape.implicit_leaves(&[4.0], &[x], Box::new(|a| vec![3.0 * a[0]]));
        let y = z[0] * Var::constant(2.0) + x;
        assert_eq!(tape.gradient(y, &[x]), vec![7.0]);
    }
}
