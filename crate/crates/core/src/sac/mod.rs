//! Soft actor-critic for the greenhouse environment: observation
//! construction, squashed-Gaussian actor, twin critics with targets,
//! entropy temperature, replay buffer, and the action-to-input bridge.

pub mod buffer;
pub mod checkpoint;
pub mod train;

pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use train::{
    actor_terms, random_policy_baseline, train, train_step, SacOptimizers, StepDiagnostics,
    TrainRecord,
};

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nlp::increment::increment_step_hard;
use crate::nn::{Activation, Mlp};
use crate::plant::{BoundTable, ControlInput, Disturbance, State};

/// Observation feature count: x (4), u(k-1) (3), d (4), k (1).
pub const OBS_DIM: usize = 12;

/// Action dimension (input increments).
pub const ACT_DIM: usize = 3;

/// Log-standard-deviation clamp range for the actor head.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Normalized observation vector, feature order
/// `(x1, x2, x3, x4, u1, u2, u3, d1, d2, d3, d4, k)`.
pub type Observation = [f64; OBS_DIM];

/// Fixed affine feature ranges; features are mapped to `(v - lo)/(hi - lo)`.
///
/// The ranges come from the input/output bound table, the synthetic-weather
/// envelope, and the episode length; they are stored with the agent so
/// inference is reproducible without running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub lo: [f64; OBS_DIM],
    pub hi: [f64; OBS_DIM],
}

impl ObsNormalizer {
    pub fn from_bounds(bounds: &BoundTable, t_f: usize) -> Self {
        let lo = [
            0.0, 0.0, 0.0, 0.0, // states
            bounds.u_min[0],
            bounds.u_min[1],
            bounds.u_min[2],
            0.0,
            0.0,
            -15.0,
            0.0, // weather
            0.0, // time
        ];
        let hi = [
            0.5,
            0.005,
            30.0,
            0.015,
            bounds.u_max[0],
            bounds.u_max[1],
            bounds.u_max[2],
            600.0,
            0.0015,
            30.0,
            0.012,
            t_f as f64,
        ];
        ObsNormalizer { lo, hi }
    }

    pub fn normalize(&self, raw: &[f64; OBS_DIM]) -> Observation {
        let mut z = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            z[i] = (raw[i] - self.lo[i]) / (self.hi[i] - self.lo[i]);
        }
        z
    }

    pub fn denormalize(&self, z: &Observation) -> [f64; OBS_DIM] {
        let mut raw = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            raw[i] = self.lo[i] + z[i] * (self.hi[i] - self.lo[i]);
        }
        raw
    }

    /// Builds the normalized observation `s(k) = (x(k), u(k-1), d(k), k)`.
    pub fn make_observation(
        &self,
        x: &State,
        u_prev: &ControlInput,
        d: &Disturbance,
        k: usize,
    ) -> Observation {
        let xs = x.as_array();
        let us = u_prev.as_array();
        let ds = d.as_array();
        let raw = [
            xs[0], xs[1], xs[2], xs[3], us[0], us[1], us[2], ds[0], ds[1], ds[2], ds[3], k as f64,
        ];
        self.normalize(&raw)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * OBS_DIM);
        v.extend_from_slice(&self.lo);
        v.extend_from_slice(&self.hi);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * OBS_DIM {
            return Err(CoreError::Checkpoint(format!(
                "normalization block has {} values, expected {}",
                flat.len(),
                2 * OBS_DIM
            )));
        }
        let mut lo = [0.0; OBS_DIM];
        let mut hi = [0.0; OBS_DIM];
        lo.copy_from_slice(&flat[..OBS_DIM]);
        hi.copy_from_slice(&flat[OBS_DIM..]);
        Ok(ObsNormalizer { lo, hi })
    }
}

/// SAC hyperparameters (defaults follow the training protocol of the study:
/// 100 episodes with 9 uniform-random warmup episodes, two 128-wide hidden
/// layers, batch 1024, learning rate 5e-3, buffer 100k, gamma 0.95; Polyak
/// tau, target entropy, and the update cadence are documented defaults).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub episodes: usize,
    pub warmup_episodes: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub gamma: f64,
    pub tau: f64,
    pub target_entropy: f64,
    /// Gradient steps per eligible environment step.
    pub updates_per_step: usize,
    /// Run updates every this many environment steps.
    pub update_every: usize,
    pub alpha_init: f64,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            episodes: 100,
            warmup_episodes: 9,
            hidden_width: 128,
            hidden_layers: 2,
            batch_size: 1024,
            learning_rate: 5e-3,
            buffer_capacity: 100_000,
            gamma: 0.95,
            tau: 0.005,
            target_entropy: -(ACT_DIM as f64),
            updates_per_step: 1,
            update_every: 1,
            alpha_init: 1.0,
            seed: 0,
        }
    }
}

/// Action selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Actor, twin critics with Polyak targets, entropy temperature, and the
/// observation normalizer.
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub actor: Mlp,
    pub critic1: Mlp,
    pub critic2: Mlp,
    pub target1: Mlp,
    pub target2: Mlp,
    pub log_alpha: f64,
    pub normalizer: ObsNormalizer,
    pub config: SacConfig,
}

impl SacAgent {
    /// Fresh agent with seeded initialization (sub-seeds are derived from
    /// `config.seed` in a fixed order: actor, critic1, critic2).
    pub fn new(config: SacConfig, normalizer: ObsNormalizer) -> Result<Self> {
        let mut sizes = vec![OBS_DIM];
        sizes.extend(std::iter::repeat_n(config.hidden_width, config.hidden_layers));
        sizes.push(2 * ACT_DIM);
        let mut acts = vec![Activation::Relu; config.hidden_layers];
        acts.push(Activation::Linear);

        let mut critic_sizes = vec![OBS_DIM + ACT_DIM];
        critic_sizes.extend(std::iter::repeat_n(config.hidden_width, config.hidden_layers));
        critic_sizes.push(1);

        let actor = Mlp::new(&sizes, &acts, config.seed.wrapping_add(1))?;
        let critic1 = Mlp::new(&critic_sizes, &acts, config.seed.wrapping_add(2))?;
        let critic2 = Mlp::new(&critic_sizes, &acts, config.seed.wrapping_add(3))?;
        let target1 = critic1.clone();
        let target2 = critic2.clone();

        if config.gamma <= 0.0 || config.gamma > 1.0 {
            return Err(CoreError::InvalidArgument(format!(
                "gamma must be in (0, 1], got {}",
                config.gamma
            )));
        }

        Ok(SacAgent {
            actor,
            critic1,
            critic2,
            target1,
            target2,
            log_alpha: config.alpha_init.max(f64::MIN_POSITIVE).ln(),
            normalizer,
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Actor head at one observation: `(mean, clamped log-std)` per action.
    pub fn actor_head(&self, s: &Observation) -> Result<([f64; ACT_DIM], [f64; ACT_DIM])> {
        let x = Array2::from_shape_vec((1, OBS_DIM), s.to_vec()).expect("fixed shape");
        let out = self.actor.infer(&x)?;
        let mut mean = [0.0; ACT_DIM];
        let mut log_std = [0.0; ACT_DIM];
        for j in 0..ACT_DIM {
            mean[j] = out[[0, j]];
            log_std[j] = out[[0, ACT_DIM + j]].clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok((mean, log_std))
    }

    /// Samples (or takes the mode of) the tanh-squashed Gaussian policy.
    /// Outputs lie in [-1, 1]^3 (tanh saturates to exactly +-1 in floating
    /// point for large pre-activations).
    pub fn act<R: Rng>(
        &self,
        s: &Observation,
        mode: ActMode,
        rng: &mut R,
    ) -> Result<[f64; ACT_DIM]> {
        let (mean, log_std) = self.actor_head(s)?;
        let mut a = [0.0; ACT_DIM];
        match mode {
            ActMode::Deterministic => {
                for j in 0..ACT_DIM {
                    a[j] = mean[j].tanh();
                }
            }
            ActMode::Stochastic => {
                for j in 0..ACT_DIM {
                    let xi: f64 = rng.sample(rand_distr::StandardNormal);
                    a[j] = (mean[j] + log_std[j].exp() * xi).tanh();
                }
            }
        }
        Ok(a)
    }

    /// The policy mode, `tanh(mean)`; no randomness involved.
    pub fn act_deterministic(&self, s: &Observation) -> Result<[f64; ACT_DIM]> {
        let (mean, _) = self.actor_head(s)?;
        Ok([mean[0].tanh(), mean[1].tanh(), mean[2].tanh()])
    }
}

/// Realizes an action as a control input:
/// `clamp(u_prev + a * du_max, u_min, u_max)`.
pub fn action_to_input(a: &[f64; 3], u_prev: &ControlInput, bounds: &BoundTable) -> ControlInput {
    ControlInput::from_array(increment_step_hard(&u_prev.as_array(), a, bounds))
}
