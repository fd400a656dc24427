//! RL-derived MPC ingredients: a learned cost-to-go on (dry weight, time)
//! and, per control step, a terminal region plus warm start rolled out from
//! the actor.

pub mod dataset;
pub mod fit;
pub mod ingredients;

pub use dataset::{
    nominal_trajectory, sample_rollouts, ApproximatorDataset, NominalBand, RolloutSample,
};
pub use fit::{fit_terminal_cost, TerminalCostFn, TerminalFitConfig, TerminalNorm};
pub use ingredients::{initial_ingredients, next_ingredients, TerminalIngredients};
