//! Scalar reverse-mode tape for differentiating through RK4 rollouts.
//!
//! A [`Var`] is an index into a Wengert list plus its value. Operators push
//! nodes holding parent indices and local partials; [`Tape::grad`] runs one
//! reverse sweep. Leaves must be created before any dependent node.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
struct Node {
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Growable Wengert list. Interior-mutable so `Var` (which borrows the tape)
/// can stay `Copy`.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// One tape variable: node index plus current value.
#[derive(Debug, Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: u32,
    val: f64,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape {
            nodes: RefCell::new(Vec::with_capacity(n)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Creates an independent variable (leaf).
    pub fn var(&self, val: f64) -> Var<'_> {
        let idx = self.push_next([0.0, 0.0], [None, None]);
        Var {
            tape: self,
            idx,
            val,
        }
    }

    fn push_next(&self, partials: [f64; 2], parents: [Option<u32>; 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let idx = u32::try_from(nodes.len()).expect("tape exceeds u32 indices");
        nodes.push(Node {
            parents: [parents[0].unwrap_or(idx), parents[1].unwrap_or(idx)],
            partials,
        });
        idx
    }

    /// Adjoints of every node w.r.t. `output` (leaves included).
    pub fn grad(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.idx as usize] = 1.0;
        for i in (0..=output.idx as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = &nodes[i];
            for slot in 0..2 {
                let p = n.parents[slot] as usize;
                if p != i {
                    adj[p] += n.partials[slot] * a;
                }
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> usize {
        self.idx as usize
    }

    fn unary(self, partial: f64, val: f64) -> Var<'t> {
        let idx = self.tape.push_next([partial, 0.0], [Some(self.idx), None]);
        Var {
            tape: self.tape,
            idx,
            val,
        }
    }

    fn binary(self, other: Var<'t>, pa: f64, pb: f64, val: f64) -> Var<'t> {
        let idx = self
            .tape
            .push_next([pa, pb], [Some(self.idx), Some(other.idx)]);
        Var {
            tape: self.tape,
            idx,
            val,
        }
    }

    /// Splices an externally differentiated scalar function of `self` into
    /// the tape: `val = f(self)`, `partial = f'(self)`.
    pub fn custom_unary(self, val: f64, partial: f64) -> Var<'t> {
        self.unary(partial, val)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, 1.0, self.val + rhs.val)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, 1.0, -1.0, self.val - rhs.val)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.binary(rhs, rhs.val, self.val, self.val * rhs.val)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        // Value is the exact division so tape and plain-f64 rollouts agree
        // bitwise; only the partials use the reciprocal.
        let val = self.val / rhs.val;
        let inv = 1.0 / rhs.val;
        self.binary(rhs, inv, -val * inv, val)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(-1.0, -self.val)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, c: f64) -> Var<'t> {
        self.unary(1.0, self.val + c)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, c: f64) -> Var<'t> {
        self.unary(1.0, self.val - c)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, c: f64) -> Var<'t> {
        self.unary(c, self.val * c)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, c: f64) -> Var<'t> {
        self.unary(1.0 / c, self.val / c)
    }
}

impl<'t> Scalar for Var<'t> {
    fn value(self) -> f64 {
        self.val
    }

    fn rsub(self, c: f64) -> Self {
        self.unary(-1.0, c - self.val)
    }

    fn rdiv(self, c: f64) -> Self {
        let v = c / self.val;
        self.unary(-v / self.val, v)
    }

    fn exp(self) -> Self {
        let v = self.val.exp();
        self.unary(v, v)
    }

    fn ln(self) -> Self {
        self.unary(1.0 / self.val, self.val.ln())
    }

    fn tanh(self) -> Self {
        let v = self.val.tanh();
        self.unary(1.0 - v * v, v)
    }

    fn relu(self) -> Self {
        if self.val > 0.0 {
            self.unary(1.0, self.val)
        } else {
            self.unary(0.0, 0.0)
        }
    }

    fn powi(self, n: u32) -> Self {
        let v = self.val.powi(n as i32);
        let p = if n == 0 {
            0.0
        } else {
            n as f64 * self.val.powi(n as i32 - 1)
        };
        self.unary(p, v)
    }
}
