//! Rollout-return dataset for the terminal cost approximator.
//!
//! A nominal closed-loop trajectory defines a multiplicative band; sampled
//! (time, state) pairs inside the band are rolled to the episode end under
//! the deterministic policy and their cumulative stage cost recorded. All
//! draws come from one seeded stream in a fixed order (per sample: the time
//! index, then four state components), so the dataset is a pure function of
//! (policy, environment, seed) regardless of rollout parallelism.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::economics::stage_cost_total;
use crate::env::GreenhouseEnv;
use crate::error::{CoreError, Result};
use crate::plant::{discrete_step, ControlInput, State};
use crate::sac::SacAgent;

/// Deterministic policy trajectory plus the sampling spread around it.
#[derive(Debug, Clone)]
pub struct NominalBand {
    /// x(0..t_f), length t_f + 1.
    pub states: Vec<State>,
    /// u(0..t_f-1), length t_f.
    pub inputs: Vec<ControlInput>,
    /// Relative half-width of the sampling band.
    pub sigma: f64,
}

impl NominalBand {
    /// `[x(k)(1 - sigma), x(k)(1 + sigma)]`, ordered because the nominal
    /// states are verified nonnegative at construction.
    pub fn bounds_at(&self, k: usize) -> ([f64; 4], [f64; 4]) {
        let x = self.states[k].as_array();
        let mut lo = [0.0; 4];
        let mut hi = [0.0; 4];
        for i in 0..4 {
            lo[i] = x[i] * (1.0 - self.sigma);
            hi[i] = x[i] * (1.0 + self.sigma);
        }
        (lo, hi)
    }

    /// The input the policy applied entering step `k` (the episode's
    /// initial input for k = 0).
    pub fn input_before(&self, k: usize, initial: &ControlInput) -> ControlInput {
        if k == 0 {
            *initial
        } else {
            self.inputs[k - 1]
        }
    }
}

/// One (time, state, return) record.
#[derive(Debug, Clone, Copy)]
pub struct RolloutSample {
    pub k: usize,
    pub state: State,
    /// Cumulative stage cost from `k` to the episode end.
    pub cost: f64,
}

/// The full sample set with a fixed, disjoint, exhaustive 80/20 split.
#[derive(Debug, Clone)]
pub struct ApproximatorDataset {
    pub samples: Vec<RolloutSample>,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    /// Samples discarded for non-finite returns and redrawn.
    pub redraws: usize,
}

impl ApproximatorDataset {
    /// Persists as `i,k,x1,x2,x3,x4,J` rows.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("i,k,x1,x2,x3,x4,J\n");
        for (i, s) in self.samples.iter().enumerate() {
            let x = s.state.as_array();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                i, s.k, x[0], x[1], x[2], x[3], s.cost
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Rolls the deterministic policy from the environment's initial conditions
/// over the whole episode under nominal dynamics.
pub fn nominal_trajectory(agent: &SacAgent, env: &GreenhouseEnv, sigma: f64) -> Result<NominalBand> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(CoreError::InvalidArgument(format!(
            "band sigma {sigma} outside [0, 1)"
        )));
    }
    let mut x = env.initial_state();
    let mut u_prev = env.initial_input();
    let mut states = Vec::with_capacity(env.t_f() + 1);
    let mut inputs = Vec::with_capacity(env.t_f());
    states.push(x);
    for k in 0..env.t_f() {
        let obs = agent
            .normalizer
            .make_observation(&x, &u_prev, env.disturbance(k), k);
        let a = agent.act_deterministic(&obs)?;
        let u = crate::sac::action_to_input(&a, &u_prev, env.bounds());
        let (x_next, _y, _c) = env.step(&x, &u, k)?;
        inputs.push(u);
        states.push(x_next);
        x = x_next;
        u_prev = u;
    }
    for (k, s) in states.iter().enumerate() {
        for (i, v) in s.as_array().iter().enumerate() {
            if *v < 0.0 {
                return Err(CoreError::Diverged(format!(
                    "nominal trajectory component {i} negative ({v:.3e}) at step {k}; \
                     sampling band would invert"
                )));
            }
        }
    }
    Ok(NominalBand {
        states,
        inputs,
        sigma,
    })
}

struct Descriptor {
    k: usize,
    state: State,
}

fn draw_descriptor(band: &NominalBand, t_f: usize, rng: &mut ChaCha12Rng) -> Descriptor {
    let k = rng.random_range(0..=t_f);
    let (lo, hi) = band.bounds_at(k);
    let mut x = [0.0; 4];
    for i in 0..4 {
        let u: f64 = rng.random();
        x[i] = lo[i] + (hi[i] - lo[i]) * u;
    }
    Descriptor {
        k,
        state: State::from_array(x),
    }
}

/// Samples `n` rollouts inside the band. Failed rollouts (non-finite state
/// or return) are redrawn from the same stream in index order, so the
/// result is deterministic for a fixed seed even with parallel rollouts.
pub fn sample_rollouts(
    agent: &SacAgent,
    band: &NominalBand,
    env: &GreenhouseEnv,
    n: usize,
    seed: u64,
) -> Result<ApproximatorDataset> {
    if n == 0 || n % 5 != 0 {
        return Err(CoreError::InvalidArgument(format!(
            "sample count {n} must be a positive multiple of 5 for the 80/20 split"
        )));
    }
    let t_f = env.t_f();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut descriptors: Vec<Descriptor> =
        (0..n).map(|_| draw_descriptor(band, t_f, &mut rng)).collect();

    let mut costs: Vec<Option<f64>> = vec![None; n];
    let mut redraws = 0usize;
    for round in 0.. {
        let pending: Vec<usize> = (0..n).filter(|&i| costs[i].is_none()).collect();
        if pending.is_empty() {
            break;
        }
        if round >= 20 {
            return Err(CoreError::Diverged(format!(
                "{} rollout samples still non-finite after 20 redraw rounds",
                pending.len()
            )));
        }
        let results: Vec<Option<f64>> = pending
            .par_iter()
            .map(|&i| policy_return(agent, env, band, &descriptors[i]))
            .collect();
        for (slot, res) in pending.iter().zip(results) {
            match res {
                Some(c) => costs[*slot] = Some(c),
                None => {
                    redraws += 1;
                    descriptors[*slot] = draw_descriptor(band, t_f, &mut rng);
                }
            }
        }
    }

    let samples: Vec<RolloutSample> = descriptors
        .iter()
        .zip(&costs)
        .map(|(d, c)| RolloutSample {
            k: d.k,
            state: d.state,
            cost: c.expect("filled above"),
        })
        .collect();

    // Fisher-Yates over indices gives the split; drawn after all sample
    // draws so descriptor and split streams stay reproducible.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let n_train = n * 4 / 5;
    let mut train_idx = order[..n_train].to_vec();
    let mut val_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    Ok(ApproximatorDataset {
        samples,
        train_idx,
        val_idx,
        redraws,
    })
}

/// Deterministic-policy return from a sampled (k, state), using the nominal
/// input history for the first observation.
fn policy_return(
    agent: &SacAgent,
    env: &GreenhouseEnv,
    band: &NominalBand,
    desc: &Descriptor,
) -> Option<f64> {
    let t_f = env.t_f();
    let initial = env.initial_input();
    let mut x = desc.state;
    let mut u_prev = band.input_before(desc.k, &initial);
    let mut total = 0.0;
    for k in desc.k..t_f {
        let obs = agent
            .normalizer
            .make_observation(&x, &u_prev, env.disturbance(k), k);
        let a = agent.act_deterministic(&obs).ok()?;
        let u = crate::sac::action_to_input(&a, &u_prev, env.bounds());
        let x_next = discrete_step(
            &x.as_array(),
            &u.as_array(),
            &env.disturbance(k).as_array(),
            env.params(),
        );
        if x_next.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let x_next = State::from_array(x_next);
        let cost = stage_cost_total(&x, &u, &x_next, env.bounds(), env.prices(), env.dt());
        total += cost.total();
        x = x_next;
        u_prev = u;
    }
    total.is_finite().then_some(total)
}
