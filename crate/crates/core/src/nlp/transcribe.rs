//! Single-shooting transcription of one [`OcpSpec`] into a smooth objective
//! over flat increment variables.
//!
//! Two substitutions make the surrogate differentiable: box and rate clamps
//! use the log-sum-exp soft clamp (`kappa`), and the piecewise-linear
//! comfort penalties use softplus hinges (`hinge_sharpness`). Reconstruction
//! of a solution always goes through the exact hard-clamped operations.
//!
//! Layout of the decision vector: step-major triples,
//! `a = [a1(0), a2(0), a3(0), a1(1), ...]`, length `3 * horizon`.

use crate::economics::{penalty_generic, penalty_smoothed_generic, stage_cost_economic_generic};
use crate::nlp::ad::{Tape, Var};
use crate::nlp::increment::{apply_increments_hard, increment_step_soft};
use crate::nlp::{AlState, OcpSpec, TerminalCost};
use crate::plant::model::{discrete_step, output_map_generic};
use crate::plant::{ControlInput, State};
use crate::scalar::Scalar;

/// Values of one objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalOut {
    /// OCP objective on the soft-clamped, hinge-smoothed rollout (stage costs
    /// + terminal cost).
    pub base: f64,
    /// `base` plus augmented-Lagrangian terminal terms (equals `base` when no
    /// terminal region or no multiplier state is active).
    pub augmented: f64,
    /// Soft-clamped predicted terminal state x(k0 + Np).
    pub terminal_state: [f64; 4],
}

/// Scalar kinds that can route a terminal-cost evaluation; the tape variant
/// splices the externally computed value/derivative pair into the graph.
pub trait RolloutScalar: Scalar {
    fn terminal_cost(self, tc: &dyn TerminalCost, k: f64) -> Self;
}

impl RolloutScalar for f64 {
    fn terminal_cost(self, tc: &dyn TerminalCost, k: f64) -> Self {
        tc.value_grad(self, k).0
    }
}

impl<'t> RolloutScalar for Var<'t> {
    fn terminal_cost(self, tc: &dyn TerminalCost, k: f64) -> Self {
        let (v, g) = tc.value_grad(self.value(), k);
        self.custom_unary(v, g)
    }
}

/// A transcribed OCP ready for repeated evaluation.
pub struct RolloutProgram<'a> {
    spec: &'a OcpSpec<'a>,
    kappa: f64,
    hinge_sharpness: f64,
}

impl<'a> RolloutProgram<'a> {
    pub fn new(spec: &'a OcpSpec<'a>, kappa: f64, hinge_sharpness: f64) -> Self {
        RolloutProgram {
            spec,
            kappa,
            hinge_sharpness,
        }
    }

    pub fn dim(&self) -> usize {
        3 * self.spec.horizon
    }

    pub fn spec(&self) -> &OcpSpec<'a> {
        self.spec
    }

    fn rollout<S: RolloutScalar>(&self, a: &[S], al: Option<&AlState>, lift: impl Fn(f64) -> S) -> (S, S, [S; 4]) {
        let spec = self.spec;
        let x0 = spec.x0.as_array();
        let u0 = spec.u_prev.as_array();
        let mut x = [lift(x0[0]), lift(x0[1]), lift(x0[2]), lift(x0[3])];
        let mut u = [lift(u0[0]), lift(u0[1]), lift(u0[2])];
        let mut base = lift(0.0);

        for j in 0..spec.horizon {
            let aj = [a[3 * j], a[3 * j + 1], a[3 * j + 2]];
            u = increment_step_soft(&u, &aj, spec.bounds, self.kappa);
            let d = spec.disturbances[j].as_array();
            let x_next = discrete_step(&x, &u, &d, spec.params);
            let econ = stage_cost_economic_generic(x[0], x_next[0], &u, spec.prices, spec.dt);
            let y = output_map_generic(&x_next);
            let pen = penalty_smoothed_generic(&y, spec.bounds, spec.prices, self.hinge_sharpness);
            base = base + econ + pen;
            x = x_next;
        }

        if let Some(tc) = spec.terminal_cost {
            let k_n = (spec.k0 + spec.horizon) as f64;
            base = base + x[0].terminal_cost(tc, k_n);
        }

        let mut augmented = base;
        if let (Some(region), Some(al)) = (&spec.terminal_region, al) {
            let (lo, hi) = region.bounds();
            for i in 0..4 {
                let s = 1.0 / region.scale(i);
                let g_lo = x[i].rsub(lo[i]) * s;
                let g_hi = (x[i] - hi[i]) * s;
                augmented = augmented + al_term(g_lo, al.mu_lo[i], al.rho);
                augmented = augmented + al_term(g_hi, al.mu_hi[i], al.rho);
            }
        }

        (base, augmented, x)
    }

    /// Objective value only (plain `f64` rollout).
    pub fn eval_value(&self, a: &[f64], al: Option<&AlState>) -> EvalOut {
        assert_eq!(a.len(), self.dim(), "decision vector length");
        let (base, augmented, x) = self.rollout(a, al, |v| v);
        EvalOut {
            base,
            augmented,
            terminal_state: x,
        }
    }

    /// Objective value and gradient of the augmented objective (or of the
    /// base objective when `al` is `None`), via one reverse sweep.
    pub fn eval_grad(&self, a: &[f64], al: Option<&AlState>, grad: &mut [f64]) -> EvalOut {
        assert_eq!(a.len(), self.dim(), "decision vector length");
        assert_eq!(grad.len(), self.dim(), "gradient length");
        let tape = Tape::with_capacity(1700 * self.spec.horizon + 64);
        let leaves: Vec<Var<'_>> = a.iter().map(|&v| tape.var(v)).collect();
        let (base, augmented, x) = self.rollout(&leaves, al, |v| tape.var(v));
        let adj = tape.grad(augmented);
        for (g, leaf) in grad.iter_mut().zip(&leaves) {
            *g = adj[leaf.index()];
        }
        EvalOut {
            base: base.value(),
            augmented: augmented.value(),
            terminal_state: [x[0].value(), x[1].value(), x[2].value(), x[3].value()],
        }
    }

    /// Hard-clamp reconstruction of a decision vector: applied inputs, their
    /// exact rollout, and the objective of that trajectory (stage costs plus
    /// terminal cost).
    pub fn reconstruct(&self, a: &[f64]) -> (Vec<ControlInput>, Vec<State>, f64) {
        assert_eq!(a.len(), self.dim(), "decision vector length");
        let spec = self.spec;
        let increments: Vec<[f64; 3]> = a.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let inputs_raw = apply_increments_hard(&spec.u_prev.as_array(), &increments, spec.bounds);

        let mut states = Vec::with_capacity(spec.horizon);
        let mut objective = 0.0;
        let mut x = spec.x0.as_array();
        for (j, u) in inputs_raw.iter().enumerate() {
            let d = spec.disturbances[j].as_array();
            let x_next = discrete_step(&x, u, &d, spec.params);
            let econ = stage_cost_economic_generic(x[0], x_next[0], u, spec.prices, spec.dt);
            let pen = penalty_generic(&output_map_generic(&x_next), spec.bounds, spec.prices);
            objective += econ + pen;
            states.push(State::from_array(x_next));
            x = x_next;
        }
        if let Some(tc) = spec.terminal_cost {
            objective += tc.value_grad(x[0], (spec.k0 + spec.horizon) as f64).0;
        }

        let inputs = inputs_raw.into_iter().map(ControlInput::from_array).collect();
        (inputs, states, objective)
    }
}

/// Augmented-Lagrangian term for one inequality `g <= 0`:
/// `(rho/2) max(0, mu/rho + g)^2 - mu^2/(2 rho)`.
fn al_term<S: Scalar>(g: S, mu: f64, rho: f64) -> S {
    (g + mu / rho).relu().powi(2) * (rho / 2.0) + (-mu * mu / (2.0 * rho))
}
