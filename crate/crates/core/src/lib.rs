//! Economic greenhouse control: a discretized lettuce-greenhouse model,
//! economic MPC over input increments, a soft actor-critic agent, and the
//! RL-derived terminal cost + terminal region that guide the MPC.
//!
//! Layering, bottom up: [`scalar`] and [`error`] are shared substrate;
//! [`plant`] is the simulation model; [`economics`] prices trajectories;
//! [`nn`] and [`nlp`] provide the two differentiation engines (dense tensors
//! for networks, a scalar tape for optimal control); [`sac`] trains the
//! policy; [`terminal`] distills it into MPC ingredients; [`controllers`]
//! closes the loop; [`env`] owns ground-truth transitions.

pub mod controllers;
pub mod economics;
pub mod env;
pub mod error;
pub mod nlp;
pub mod nn;
pub mod plant;
pub mod sac;
pub mod scalar;
pub mod terminal;

pub use controllers::{
    run_episode, ControlDecision, Controller, ControllerArtifacts, ControllerConfig,
    ControllerKind, EpisodeResult, StepRecord, StepStatus,
};
pub use economics::{PriceTable, TransitionCost};
pub use env::{EnvTemplate, GreenhouseEnv};
pub use error::{CoreError, Result};
pub use nlp::{solve_ocp, NlpSolution, OcpSpec, SolveStatus, SolverOptions, TerminalRegion};
pub use plant::{
    initial_input, initial_state, BoundTable, ControlInput, Disturbance, DisturbanceSeries,
    Output, ParameterVector, State, DT, T_F,
};
pub use sac::{SacAgent, SacConfig};
pub use terminal::{TerminalCostFn, TerminalFitConfig};
