//! Optimal control transcription and solution.
//!
//! The finite-horizon economic OCP is transcribed by single shooting over
//! action-increment variables `a in [-1,1]^{3 Np}` (input box and rate
//! constraints hold by construction of the clamped increment map) and solved
//! with a projected limited-memory quasi-Newton method; an optional terminal
//! region is enforced by an outer augmented-Lagrangian loop.

pub mod ad;
pub mod increment;
pub mod solver;
pub mod transcribe;

pub use increment::{
    apply_increments_hard, increment_step_hard, increment_step_soft, inputs_to_increments,
};
pub use solver::{minimize_box, solve_ocp, BoxProblem, InnerResult};
pub use transcribe::{EvalOut, RolloutProgram};

use serde::{Deserialize, Serialize};

use crate::economics::PriceTable;
use crate::error::{CoreError, Result};
use crate::plant::{BoundTable, ControlInput, Disturbance, ParameterVector, State};

/// Terminal cost evaluator plugged into the transcription: value and
/// d(value)/d(x1) at raw dry weight `x1` and time index `k`.
pub trait TerminalCost {
    fn value_grad(&self, x1: f64, k: f64) -> (f64, f64);
}

/// Symmetric relative box `[(1 - eps) center, (1 + eps) center]` around a
/// predicted terminal state. Requires a nonnegative center so the box is
/// ordered componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalRegion {
    pub center: [f64; 4],
    pub epsilon: f64,
}

impl TerminalRegion {
    pub fn new(center: [f64; 4], epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(CoreError::InvalidArgument(format!(
                "terminal region epsilon must be in [0, 1], got {epsilon}"
            )));
        }
        if center.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::InvalidArgument(format!(
                "terminal region center must be finite and nonnegative, got {center:?}"
            )));
        }
        Ok(TerminalRegion { center, epsilon })
    }

    pub fn bounds(&self) -> ([f64; 4], [f64; 4]) {
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for i in 0..4 {
            lo[i] = (1.0 - self.epsilon) * self.center[i];
            hi[i] = (1.0 + self.epsilon) * self.center[i];
        }
        (lo, hi)
    }

    /// Per-component scale used to express violations relatively.
    pub fn scale(&self, i: usize) -> f64 {
        self.center[i].abs().max(1e-12)
    }

    /// Largest relative violation of the box, 0 when inside.
    pub fn max_relative_violation(&self, x: &[f64; 4]) -> f64 {
        let (lo, hi) = self.bounds();
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            let s = self.scale(i);
            worst = worst.max((lo[i] - x[i]) / s).max((x[i] - hi[i]) / s);
        }
        worst
    }
}

/// Augmented-Lagrangian state for the terminal-region inequalities, in the
/// same relative scaling as [`TerminalRegion::max_relative_violation`].
#[derive(Debug, Clone, Copy)]
pub struct AlState {
    pub mu_lo: [f64; 4],
    pub mu_hi: [f64; 4],
    pub rho: f64,
}

impl AlState {
    pub fn new(rho: f64) -> Self {
        AlState {
            mu_lo: [0.0; 4],
            mu_hi: [0.0; 4],
            rho,
        }
    }
}

/// One finite-horizon optimal control problem instance.
#[derive(Clone, Copy)]
pub struct OcpSpec<'a> {
    /// Prediction horizon Np in steps.
    pub horizon: usize,
    /// State at the start of the horizon, x(k0).
    pub x0: State,
    /// Input applied before the horizon, u(k0 - 1).
    pub u_prev: ControlInput,
    /// Absolute time index of `x0` (enters the terminal cost).
    pub k0: usize,
    /// Disturbance window starting at k0; at least `horizon + 1` entries.
    pub disturbances: &'a [Disturbance],
    /// Prediction-model parameters.
    pub params: &'a ParameterVector,
    pub bounds: &'a BoundTable,
    pub prices: &'a PriceTable,
    pub dt: f64,
    pub terminal_cost: Option<&'a dyn TerminalCost>,
    pub terminal_region: Option<TerminalRegion>,
}

impl OcpSpec<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.disturbances.len() < self.horizon + 1 {
            return Err(CoreError::InvalidArgument(format!(
                "disturbance window has {} entries, horizon {} needs at least {}",
                self.disturbances.len(),
                self.horizon,
                self.horizon + 1
            )));
        }
        let u = self.u_prev.as_array();
        for i in 0..3 {
            if !(self.bounds.u_min[i]..=self.bounds.u_max[i]).contains(&u[i]) {
                return Err(CoreError::InvalidArgument(format!(
                    "previous input component {i} = {} outside [{}, {}]",
                    u[i], self.bounds.u_min[i], self.bounds.u_max[i]
                )));
            }
        }
        if !self.x0.is_finite() {
            return Err(CoreError::InvalidArgument("non-finite initial state".into()));
        }
        Ok(())
    }
}

/// Solver configuration; defaults documented in the experiment config schema.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    pub stationarity_tol: f64,
    /// Maximum relative terminal violation accepted as converged.
    pub terminal_tol: f64,
    pub lbfgs_memory: usize,
    pub armijo_c: f64,
    pub max_line_search: usize,
    /// Initial augmented-Lagrangian penalty.
    pub init_penalty: f64,
    pub penalty_growth: f64,
    /// Soft-clamp sharpness (see `increment_step_soft`).
    pub kappa: f64,
    /// Softplus sharpness of the comfort-penalty hinges in the solver
    /// surrogate, in inverse cost units (see `penalty_smoothed_generic`).
    pub hinge_sharpness: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_inner_iters: 200,
            max_outer_iters: 10,
            stationarity_tol: 1e-6,
            terminal_tol: 1e-4,
            lbfgs_memory: 10,
            armijo_c: 1e-4,
            max_line_search: 30,
            init_penalty: 10.0,
            penalty_growth: 10.0,
            kappa: 2000.0,
            hinge_sharpness: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    IterationLimit,
    TerminalInfeasible,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Converged => "converged",
            SolveStatus::IterationLimit => "iteration-limit",
            SolveStatus::TerminalInfeasible => "terminal-infeasible",
        };
        f.write_str(s)
    }
}

/// Solution of one OCP instance.
///
/// `inputs` come from the hard-clamped increment map, so they satisfy box and
/// rate constraints to machine precision, and `states` is their exact
/// single-shooting rollout: re-simulating `inputs` through the plant
/// reproduces `states` bit for bit. `objective` is evaluated on that
/// hard-clamped trajectory with the exact piecewise-linear penalties;
/// `surrogate_objective` is the soft-clamp, hinge-smoothed value the solver
/// actually minimized (monotone w.r.t. the warm start for solves without a
/// terminal region).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NlpSolution {
    /// Optimal increments, one `[-1,1]^3` triple per step.
    pub increments: Vec<[f64; 3]>,
    /// u(k0 .. k0+Np-1).
    pub inputs: Vec<ControlInput>,
    /// x(k0+1 .. k0+Np).
    pub states: Vec<State>,
    pub objective: f64,
    pub surrogate_objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub stationarity: f64,
    /// Max relative terminal-region violation (0 without a region).
    pub terminal_violation: f64,
}
