//! The evaluated controllers behind one step interface: the raw RL policy,
//! economic MPC, RL-guided MPC (terminal cost + terminal region), and the
//! value-function-only ablation. Closed-loop episode execution lives here
//! too.
//!
//! Controllers predict with the nominal parameter vector and their own bound
//! table (possibly a tightened humidity ceiling); the environment always
//! scores against its own nominal bounds, so controller-side tightening
//! never changes the reward definition.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::economics::{epi, PriceTable};
use crate::env::GreenhouseEnv;
use crate::error::{CoreError, Result};
use crate::nlp::{
    inputs_to_increments, solve_ocp, NlpSolution, OcpSpec, SolveStatus, SolverOptions,
    TerminalCost,
};
use crate::plant::{
    output_map, BoundTable, ControlInput, DisturbanceSeries, Output, ParameterVector, State, DT,
};
use crate::sac::{action_to_input, ActMode, SacAgent};
use crate::terminal::{initial_ingredients, next_ingredients, TerminalCostFn};

/// Controller families compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControllerKind {
    #[serde(rename = "rl")]
    Rl,
    #[serde(rename = "mpc")]
    Mpc,
    #[serde(rename = "rlmpc")]
    RlMpc,
    #[serde(rename = "rlmpc-vfo")]
    RlMpcVfo,
}

impl ControllerKind {
    pub fn uses_solver(&self) -> bool {
        !matches!(self, ControllerKind::Rl)
    }

    pub fn uses_policy(&self) -> bool {
        !matches!(self, ControllerKind::Mpc)
    }

    pub fn uses_terminal_cost(&self) -> bool {
        matches!(self, ControllerKind::RlMpc | ControllerKind::RlMpcVfo)
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ControllerKind::Rl => "rl",
            ControllerKind::Mpc => "mpc",
            ControllerKind::RlMpc => "rlmpc",
            ControllerKind::RlMpcVfo => "rlmpc-vfo",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rl" => Ok(ControllerKind::Rl),
            "mpc" => Ok(ControllerKind::Mpc),
            "rlmpc" => Ok(ControllerKind::RlMpc),
            "rlmpc-vfo" => Ok(ControllerKind::RlMpcVfo),
            other => Err(CoreError::InvalidArgument(format!(
                "unknown controller kind '{other}' (rl | mpc | rlmpc | rlmpc-vfo)"
            ))),
        }
    }
}

/// Per-controller settings. `humidity_max_pct` is the bound the controller
/// plans against (the environment keeps its own); `deterministic_policy`
/// picks the RL evaluation mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub kind: ControllerKind,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_humidity_pct")]
    pub humidity_max_pct: f64,
    #[serde(default = "default_true")]
    pub deterministic_policy: bool,
}

fn default_horizon() -> usize {
    6
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_humidity_pct() -> f64 {
    80.0
}

fn default_true() -> bool {
    true
}

impl ControllerConfig {
    pub fn new(kind: ControllerKind, horizon: usize) -> Self {
        ControllerConfig {
            kind,
            horizon,
            epsilon: default_epsilon(),
            solver: SolverOptions::default(),
            humidity_max_pct: default_humidity_pct(),
            deterministic_policy: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.uses_solver() && self.horizon == 0 {
            return Err(CoreError::InvalidArgument(
                "prediction horizon must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(CoreError::InvalidArgument(format!(
                "terminal region epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if !(0.0..=100.0).contains(&self.humidity_max_pct) {
            return Err(CoreError::InvalidArgument(format!(
                "humidity bound {}% outside [0, 100]",
                self.humidity_max_pct
            )));
        }
        Ok(())
    }
}

/// Trained artifacts a controller may need.
#[derive(Clone, Default)]
pub struct ControllerArtifacts {
    pub agent: Option<Arc<SacAgent>>,
    pub terminal_cost: Option<Arc<TerminalCostFn>>,
}

/// What a controller reports alongside the input it chose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepStatus {
    /// Direct policy evaluation, no optimization.
    Policy,
    Converged,
    IterationLimit,
    TerminalInfeasible,
}

impl From<SolveStatus> for StepStatus {
    fn from(s: SolveStatus) -> Self {
        match s {
            SolveStatus::Converged => StepStatus::Converged,
            SolveStatus::IterationLimit => StepStatus::IterationLimit,
            SolveStatus::TerminalInfeasible => StepStatus::TerminalInfeasible,
        }
    }
}

impl fmt::Display for StepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StepStatus::Policy => "policy",
            StepStatus::Converged => "converged",
            StepStatus::IterationLimit => "iteration-limit",
            StepStatus::TerminalInfeasible => "terminal-infeasible",
        };
        f.write_str(s)
    }
}

/// One controller decision with its solver diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct ControlDecision {
    pub u: ControlInput,
    pub status: StepStatus,
    pub iterations: usize,
    /// Optimized objective for solver kinds.
    pub objective: Option<f64>,
}

/// Stateful closed-loop controller; create one per episode.
pub struct Controller {
    cfg: ControllerConfig,
    bounds: BoundTable,
    prices: PriceTable,
    params: ParameterVector,
    weather: Arc<DisturbanceSeries>,
    agent: Option<Arc<SacAgent>>,
    terminal: Option<Arc<TerminalCostFn>>,
    u_prev: ControlInput,
    prev_solution: Option<NlpSolution>,
    pending: Option<crate::terminal::TerminalIngredients>,
    rng: ChaCha12Rng,
    started: bool,
}

impl Controller {
    /// `bounds`/`prices` are the environment's; the humidity ceiling from
    /// `cfg` replaces the environment's on the controller side. `params`
    /// must be the nominal vector (the prediction model never sees the
    /// true draw).
    pub fn new(
        cfg: ControllerConfig,
        artifacts: &ControllerArtifacts,
        weather: Arc<DisturbanceSeries>,
        params: ParameterVector,
        bounds: BoundTable,
        prices: PriceTable,
        u_init: ControlInput,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind.uses_policy() && artifacts.agent.is_none() {
            return Err(CoreError::InvalidArgument(format!(
                "controller kind {} needs an agent checkpoint",
                cfg.kind
            )));
        }
        if cfg.kind.uses_terminal_cost() && artifacts.terminal_cost.is_none() {
            return Err(CoreError::InvalidArgument(format!(
                "controller kind {} needs a terminal cost checkpoint",
                cfg.kind
            )));
        }
        let bounds = bounds.with_humidity_max(cfg.humidity_max_pct);
        Ok(Controller {
            cfg,
            bounds,
            prices,
            params,
            weather,
            agent: artifacts.agent.clone(),
            terminal: artifacts.terminal_cost.clone(),
            u_prev: u_init,
            prev_solution: None,
            pending: None,
            rng: ChaCha12Rng::seed_from_u64(seed),
            started: false,
        })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn last_solution(&self) -> Option<&NlpSolution> {
        self.prev_solution.as_ref()
    }

    /// Computes the input for time step `k` given the measured state.
    /// Solver failures degrade to the best iterate, never to an error.
    pub fn step(&mut self, x: &State, k: usize) -> Result<ControlDecision> {
        let decision = match self.cfg.kind {
            ControllerKind::Rl => self.step_policy(x, k)?,
            ControllerKind::Mpc => self.step_mpc(x, k)?,
            ControllerKind::RlMpc | ControllerKind::RlMpcVfo => self.step_guided(x, k)?,
        };
        self.u_prev = decision.u;
        self.started = true;
        Ok(decision)
    }

    fn step_policy(&mut self, x: &State, k: usize) -> Result<ControlDecision> {
        let agent = self.agent.as_ref().expect("validated in new");
        let obs = agent
            .normalizer
            .make_observation(x, &self.u_prev, self.weather.get(k), k);
        let a = if self.cfg.deterministic_policy {
            agent.act_deterministic(&obs)?
        } else {
            agent.act(&obs, ActMode::Stochastic, &mut self.rng)?
        };
        Ok(ControlDecision {
            u: action_to_input(&a, &self.u_prev, &self.bounds),
            status: StepStatus::Policy,
            iterations: 0,
            objective: None,
        })
    }

    fn window(&self, k: usize) -> Result<&[crate::plant::Disturbance]> {
        let end = k + self.cfg.horizon + 1;
        self.weather.require_len(end)?;
        Ok(&self.weather.records()[k..end])
    }

    fn mpc_guess(&self) -> Vec<[f64; 3]> {
        match &self.prev_solution {
            None => vec![[0.0; 3]; self.cfg.horizon],
            Some(prev) => {
                // Shift the previous plan one step and repeat its last
                // input; the prefix converts to the same increments because
                // solution inputs are rate-feasible by construction.
                let mut desired: Vec<[f64; 3]> =
                    prev.inputs[1..].iter().map(|u| u.as_array()).collect();
                let last = prev.inputs[prev.inputs.len() - 1].as_array();
                desired.push(last);
                inputs_to_increments(&prev.inputs[0].as_array(), &desired, &self.bounds)
            }
        }
    }

    fn step_mpc(&mut self, x: &State, k: usize) -> Result<ControlDecision> {
        let window = self.window(k)?;
        let guess = self.mpc_guess();
        let spec = OcpSpec {
            horizon: self.cfg.horizon,
            x0: *x,
            u_prev: self.u_prev,
            k0: k,
            disturbances: window,
            params: &self.params,
            bounds: &self.bounds,
            prices: &self.prices,
            dt: DT,
            terminal_cost: None,
            terminal_region: None,
        };
        let sol = solve_ocp(&spec, &guess, &self.cfg.solver)?;
        let decision = ControlDecision {
            u: sol.inputs[0],
            status: sol.status.into(),
            iterations: sol.iterations,
            objective: Some(sol.objective),
        };
        self.prev_solution = Some(sol);
        Ok(decision)
    }

    fn step_guided(&mut self, x: &State, k: usize) -> Result<ControlDecision> {
        let agent = self.agent.as_ref().expect("validated in new").clone();
        let terminal = self.terminal.as_ref().expect("validated in new").clone();
        let ingredients = match self.pending.take() {
            Some(p) => p,
            None => {
                if self.started {
                    return Err(CoreError::InvalidArgument(
                        "guided controller lost its warm-start carryover".into(),
                    ));
                }
                if k != 0 {
                    return Err(CoreError::InvalidArgument(
                        "guided controller must start at k = 0".into(),
                    ));
                }
                initial_ingredients(
                    &agent,
                    &self.weather,
                    &self.params,
                    &self.bounds,
                    self.cfg.horizon,
                    self.cfg.epsilon,
                )?
            }
        };

        let region = match self.cfg.kind {
            ControllerKind::RlMpc => Some(ingredients.region),
            _ => None,
        };
        let window = self.window(k)?;
        let spec = OcpSpec {
            horizon: self.cfg.horizon,
            x0: *x,
            u_prev: self.u_prev,
            k0: k,
            disturbances: window,
            params: &self.params,
            bounds: &self.bounds,
            prices: &self.prices,
            dt: DT,
            terminal_cost: Some(terminal.as_ref() as &dyn TerminalCost),
            terminal_region: region,
        };
        let sol = solve_ocp(&spec, &ingredients.guess, &self.cfg.solver)?;
        let decision = ControlDecision {
            u: sol.inputs[0],
            status: sol.status.into(),
            iterations: sol.iterations,
            objective: Some(sol.objective),
        };
        self.pending = Some(next_ingredients(
            &sol,
            k,
            &agent,
            &self.weather,
            &self.params,
            &self.bounds,
            self.cfg.epsilon,
        )?);
        self.prev_solution = Some(sol);
        Ok(decision)
    }
}

/// One logged control step: the pre-transition state/output, the applied
/// input, and the transition's costs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub state: State,
    pub output: Output,
    pub input: ControlInput,
    pub cost_econ: f64,
    pub cost_pen: f64,
    pub reward: f64,
    pub status: StepStatus,
    pub iterations: usize,
}

/// Full episode log plus its aggregates. The trajectory is recoverable as
/// `steps[*].state` followed by `final_state`, so EPI and cumulative reward
/// can be recomputed from the log alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub steps: Vec<StepRecord>,
    pub final_state: State,
    pub final_output: Output,
    pub epi: f64,
    pub cum_reward: f64,
    /// Not part of any reproducibility comparison.
    pub wall_clock_s: f64,
}

impl EpisodeResult {
    /// `k,x1,x2,x3,x4,y2,y3,y4,u1,u2,u3,cost_econ,cost_pen,reward,status,iters`
    /// rows plus a trailing row for the final state.
    pub fn steps_csv(&self) -> String {
        let mut out = String::from(
            "k,x1,x2,x3,x4,y2,y3,y4,u1,u2,u3,cost_econ,cost_pen,reward,status,iters\n",
        );
        for s in &self.steps {
            let x = s.state.as_array();
            let u = s.input.as_array();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                s.k,
                x[0],
                x[1],
                x[2],
                x[3],
                s.output.co2_ppm,
                s.output.temperature,
                s.output.humidity_pct,
                u[0],
                u[1],
                u[2],
                s.cost_econ,
                s.cost_pen,
                s.reward,
                s.status,
                s.iterations
            ));
        }
        let x = self.final_state.as_array();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},,,,,,,,\n",
            self.steps.len(),
            x[0],
            x[1],
            x[2],
            x[3],
            self.final_output.co2_ppm,
            self.final_output.temperature,
            self.final_output.humidity_pct,
        ));
        out
    }
}

/// Runs one closed-loop episode: the controller plans with nominal
/// `prediction_params`, the environment transitions and scores with its own
/// (possibly perturbed) parameters and nominal bounds.
pub fn run_episode(
    cfg: &ControllerConfig,
    env: &GreenhouseEnv,
    prediction_params: &ParameterVector,
    artifacts: &ControllerArtifacts,
    seed: u64,
) -> Result<EpisodeResult> {
    let need = if cfg.kind.uses_solver() {
        env.t_f() + cfg.horizon
    } else {
        env.t_f() + 1
    };
    env.weather().require_len(need)?;

    let start = Instant::now();
    let mut controller = Controller::new(
        cfg.clone(),
        artifacts,
        Arc::clone(env.weather()),
        *prediction_params,
        *env.bounds(),
        *env.prices(),
        env.initial_input(),
        seed,
    )?;

    let t_f = env.t_f();
    let mut x = env.initial_state();
    let mut steps = Vec::with_capacity(t_f);
    let mut states = Vec::with_capacity(t_f + 1);
    let mut inputs = Vec::with_capacity(t_f);
    let mut cum_reward = 0.0;
    states.push(x);

    for k in 0..t_f {
        let y = output_map(&x)?;
        let decision = controller.step(&x, k)?;
        let (x_next, _y_next, cost) = env.step(&x, &decision.u, k)?;
        steps.push(StepRecord {
            k,
            state: x,
            output: y,
            input: decision.u,
            cost_econ: cost.economic,
            cost_pen: cost.penalty,
            reward: cost.reward(),
            status: decision.status,
            iterations: decision.iterations,
        });
        cum_reward += cost.reward();
        inputs.push(decision.u);
        states.push(x_next);
        x = x_next;
    }

    let final_output = output_map(&x)?;
    let episode_epi = epi(&states, &inputs, env.prices(), env.dt())?;
    Ok(EpisodeResult {
        steps,
        final_state: x,
        final_output,
        epi: episode_epi,
        cum_reward,
        wall_clock_s: start.elapsed().as_secs_f64(),
    })
}
