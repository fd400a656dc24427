//! Per-step terminal region and warm start rolled out from the actor.
//!
//! The first control step rolls the deterministic policy horizon + 1 steps
//! from the episode initial conditions; every later step advances the
//! previous solution's terminal state one model step under the policy and
//! shifts the previous input sequence. Increments returned here always lie
//! in [-1, 1], so they are a valid solver guess as-is.

use crate::error::{CoreError, Result};
use crate::nlp::{inputs_to_increments, NlpSolution, TerminalRegion};
use crate::plant::{
    discrete_step, initial_input, initial_state, BoundTable, ControlInput, DisturbanceSeries,
    ParameterVector, State,
};
use crate::sac::{action_to_input, SacAgent};

/// Terminal region plus warm-start increments for one optimization problem.
#[derive(Debug, Clone)]
pub struct TerminalIngredients {
    pub region: TerminalRegion,
    /// One increment triple per horizon step.
    pub guess: Vec<[f64; 3]>,
}

fn policy_step(
    agent: &SacAgent,
    x: &State,
    u_prev: &ControlInput,
    weather: &DisturbanceSeries,
    params: &ParameterVector,
    bounds: &BoundTable,
    k: usize,
) -> Result<(ControlInput, State)> {
    let d = weather.get(k);
    let obs = agent.normalizer.make_observation(x, u_prev, d, k);
    let a = agent.act_deterministic(&obs)?;
    let u = action_to_input(&a, u_prev, bounds);
    let next = discrete_step(&x.as_array(), &u.as_array(), &d.as_array(), params);
    for (i, v) in next.iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::Diverged(format!(
                "non-finite state component {i} in policy rollout at step {k}"
            )));
        }
    }
    Ok((u, State::from_array(next)))
}

/// Ingredients for the problem at k0 = 0: policy rollout of horizon + 1
/// steps from the initial conditions; region centered on its final state;
/// warm start = the rollout's last `horizon` inputs.
pub fn initial_ingredients(
    agent: &SacAgent,
    weather: &DisturbanceSeries,
    params: &ParameterVector,
    bounds: &BoundTable,
    horizon: usize,
    epsilon: f64,
) -> Result<TerminalIngredients> {
    if horizon == 0 {
        return Err(CoreError::InvalidArgument("horizon must be positive".into()));
    }
    weather.require_len(horizon + 1)?;
    let mut x = initial_state();
    let mut u_prev = initial_input();
    let mut inputs = Vec::with_capacity(horizon + 1);
    for k in 0..=horizon {
        let (u, next) = policy_step(agent, &x, &u_prev, weather, params, bounds, k)?;
        inputs.push(u);
        x = next;
        u_prev = u;
    }

    let region = TerminalRegion::new(x.as_array(), epsilon)?;
    let desired: Vec<[f64; 3]> = inputs[1..].iter().map(|u| u.as_array()).collect();
    let guess = inputs_to_increments(&initial_input().as_array(), &desired, bounds);
    Ok(TerminalIngredients { region, guess })
}

/// Ingredients for the problem at k0 + 1 from the solution at k0: the
/// region center is the previous terminal prediction advanced one step
/// under the policy; the warm start is the previous inputs shifted left
/// with that policy input appended.
pub fn next_ingredients(
    prev: &NlpSolution,
    k0: usize,
    agent: &SacAgent,
    weather: &DisturbanceSeries,
    params: &ParameterVector,
    bounds: &BoundTable,
    epsilon: f64,
) -> Result<TerminalIngredients> {
    let np = prev.inputs.len();
    if np == 0 || prev.states.len() != np {
        return Err(CoreError::InvalidArgument(format!(
            "previous solution has {} inputs and {} states",
            np,
            prev.states.len()
        )));
    }
    let k_term = k0 + np;
    weather.require_len(k_term + 1)?;

    let x_term = prev.states[np - 1];
    let u_last = prev.inputs[np - 1];
    let (u_pi, x_f) = policy_step(agent, &x_term, &u_last, weather, params, bounds, k_term)?;

    let region = TerminalRegion::new(x_f.as_array(), epsilon)?;
    let mut desired: Vec<[f64; 3]> = prev.inputs[1..].iter().map(|u| u.as_array()).collect();
    desired.push(u_pi.as_array());
    let guess = inputs_to_increments(&prev.inputs[0].as_array(), &desired, bounds);
    Ok(TerminalIngredients { region, guess })
}
