//! SAC updates and the training loop.
//!
//! All gradients flow through the explicit MLP backward pass. The actor
//! update routes the critic's input gradient (w.r.t. the action columns)
//! through the tanh-squashed reparameterized sample; the temperature is
//! optimized in log space. One ChaCha stream drives every random choice in a
//! fixed order (episode draws, warmup/exploration actions, batch indices,
//! target noise, actor noise), so training is a pure function of the seed.

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::economics::epi;
use crate::env::EnvTemplate;
use crate::error::{CoreError, Result};
use crate::nn::{mse_loss, polyak_update, AdamConfig, AdamScalar, AdamState};
use crate::sac::{
    action_to_input, ActMode, ReplayBuffer, SacAgent, SacConfig, Transition, ACT_DIM,
    LOG_STD_MAX, LOG_STD_MIN, OBS_DIM,
};

use rand::SeedableRng;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
const SQUASH_EPS: f64 = 1e-6;

/// Loss/temperature diagnostics of one gradient step.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub critic1_loss: f64,
    pub critic2_loss: f64,
    pub actor_loss: f64,
    pub alpha_loss: f64,
    pub alpha: f64,
}

/// Per-episode training record (the learning curve).
#[derive(Debug, Clone, Copy)]
pub struct TrainRecord {
    pub episode: usize,
    pub cum_reward: f64,
    pub epi: f64,
}

/// Adam state for the three online networks and the temperature.
pub struct SacOptimizers {
    actor: AdamState,
    critic1: AdamState,
    critic2: AdamState,
    alpha: AdamScalar,
}

impl SacOptimizers {
    pub fn new(agent: &SacAgent) -> Self {
        let cfg = AdamConfig::with_lr(agent.config.learning_rate);
        SacOptimizers {
            actor: AdamState::new(&agent.actor, cfg),
            critic1: AdamState::new(&agent.critic1, cfg),
            critic2: AdamState::new(&agent.critic2, cfg),
            alpha: AdamScalar::new(cfg),
        }
    }
}

/// Reparameterized tanh-Gaussian sample with everything the backward pass
/// needs cached elementwise.
struct Squashed {
    a: Array2<f64>,
    /// Per-row log-density of the squashed sample.
    logp: Vec<f64>,
    sd: Array2<f64>,
    xi: Array2<f64>,
    /// d a / d z = 1 - a^2.
    da_dz: Array2<f64>,
    /// 1 where the raw log-std was inside the clamp range.
    mask: Array2<f64>,
    /// d logp / d z = 2 a (1 - a^2) / (1 - a^2 + eps).
    dlogp_dz: Array2<f64>,
}

fn squash(head: &Array2<f64>, xi: &Array2<f64>) -> Squashed {
    let b = head.nrows();
    let mut a = Array2::zeros((b, ACT_DIM));
    let mut sd = Array2::zeros((b, ACT_DIM));
    let mut da_dz = Array2::zeros((b, ACT_DIM));
    let mut mask = Array2::zeros((b, ACT_DIM));
    let mut dlogp_dz = Array2::zeros((b, ACT_DIM));
    let mut logp = vec![0.0; b];

    for i in 0..b {
        for j in 0..ACT_DIM {
            let mu = head[[i, j]];
            let ls_raw = head[[i, ACT_DIM + j]];
            let ls = ls_raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let s = ls.exp();
            let x = xi[[i, j]];
            let z = mu + s * x;
            let t = z.tanh();
            let one_minus = 1.0 - t * t;

            a[[i, j]] = t;
            sd[[i, j]] = s;
            da_dz[[i, j]] = one_minus;
            mask[[i, j]] = if (LOG_STD_MIN..=LOG_STD_MAX).contains(&ls_raw) {
                1.0
            } else {
                0.0
            };
            dlogp_dz[[i, j]] = 2.0 * t * one_minus / (one_minus + SQUASH_EPS);
            logp[i] += -ls - 0.5 * x * x - HALF_LN_2PI - (one_minus + SQUASH_EPS).ln();
        }
    }

    Squashed {
        a,
        logp,
        sd,
        xi: xi.clone(),
        da_dz,
        mask,
        dlogp_dz,
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample(StandardNormal))
}

fn hstack(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a.view(), b.view()]).expect("row counts match")
}

/// Actor objective `mean(alpha logp - min(Q1, Q2))` at fixed reparameterization
/// noise `xi` and temperature, with its gradients w.r.t. the actor parameters
/// (hand-derived chain rule through the tanh-squashed sample and the selected
/// critic's input gradient) and the batch-mean log-density.
pub fn actor_terms(
    actor: &crate::nn::Mlp,
    critic1: &crate::nn::Mlp,
    critic2: &crate::nn::Mlp,
    s: &Array2<f64>,
    xi: &Array2<f64>,
    alpha: f64,
) -> Result<(f64, crate::nn::Gradients, f64)> {
    let bsz = s.nrows();
    let tape_a = actor.forward(s)?;
    let sq = squash(tape_a.output(), xi);
    let x_pi = hstack(s, &sq.a);
    let t1 = critic1.forward(&x_pi)?;
    let t2 = critic2.forward(&x_pi)?;
    let q1 = t1.output();
    let q2 = t2.output();

    let mut sel1 = Array2::zeros((bsz, 1));
    let mut sel2 = Array2::zeros((bsz, 1));
    let mut actor_loss = 0.0;
    for i in 0..bsz {
        if q1[[i, 0]] <= q2[[i, 0]] {
            sel1[[i, 0]] = 1.0;
        } else {
            sel2[[i, 0]] = 1.0;
        }
        actor_loss += alpha * sq.logp[i] - q1[[i, 0]].min(q2[[i, 0]]);
    }
    actor_loss /= bsz as f64;

    // d qmin / d action via the input gradient of the selected critic.
    let gin1 = critic1.backward(&t1, &sel1)?.input;
    let gin2 = critic2.backward(&t2, &sel2)?.input;
    let mut dhead = Array2::zeros((bsz, 2 * ACT_DIM));
    let inv_b = 1.0 / bsz as f64;
    for i in 0..bsz {
        for j in 0..ACT_DIM {
            let ga = gin1[[i, OBS_DIM + j]] + gin2[[i, OBS_DIM + j]];
            let common = alpha * sq.dlogp_dz[[i, j]] - ga * sq.da_dz[[i, j]];
            dhead[[i, j]] = common * inv_b;
            dhead[[i, ACT_DIM + j]] =
                (common * sq.sd[[i, j]] * sq.xi[[i, j]] - alpha) * sq.mask[[i, j]] * inv_b;
        }
    }
    let actor_grads = actor.backward(&tape_a, &dhead)?;
    let mean_logp = sq.logp.iter().sum::<f64>() * inv_b;
    Ok((actor_loss, actor_grads, mean_logp))
}

/// One SAC gradient step: critics (clipped double-Q target with entropy
/// bonus), then actor (reparameterized, against the freshly updated
/// critics), then temperature, then Polyak target blend.
pub fn train_step(
    agent: &mut SacAgent,
    opt: &mut SacOptimizers,
    buffer: &ReplayBuffer,
    rng: &mut ChaCha12Rng,
) -> Result<StepDiagnostics> {
    let bsz = agent.config.batch_size;
    let idx = buffer.sample_indices(bsz, rng)?;

    let mut s = Array2::zeros((bsz, OBS_DIM));
    let mut a = Array2::zeros((bsz, ACT_DIM));
    let mut r = Array2::zeros((bsz, 1));
    let mut s2 = Array2::zeros((bsz, OBS_DIM));
    let mut live = Array2::zeros((bsz, 1));
    for (row, &i) in idx.iter().enumerate() {
        let t = buffer.get(i);
        for c in 0..OBS_DIM {
            s[[row, c]] = t.s[c];
            s2[[row, c]] = t.s2[c];
        }
        for c in 0..ACT_DIM {
            a[[row, c]] = t.a[c];
        }
        r[[row, 0]] = t.r;
        live[[row, 0]] = if t.done { 0.0 } else { 1.0 };
    }

    let xi2 = normal_matrix(bsz, ACT_DIM, rng);
    let xi = normal_matrix(bsz, ACT_DIM, rng);
    let alpha = agent.alpha();
    let gamma = agent.config.gamma;

    // Bootstrapped targets from the target critics and the current policy.
    let head2 = agent.actor.infer(&s2)?;
    let sq2 = squash(&head2, &xi2);
    let x2 = hstack(&s2, &sq2.a);
    let q1t = agent.target1.infer(&x2)?;
    let q2t = agent.target2.infer(&x2)?;
    let mut y = Array2::zeros((bsz, 1));
    for i in 0..bsz {
        let qmin = q1t[[i, 0]].min(q2t[[i, 0]]);
        y[[i, 0]] = r[[i, 0]] + gamma * live[[i, 0]] * (qmin - alpha * sq2.logp[i]);
    }

    // Critic regression toward the shared target.
    let x_sa = hstack(&s, &a);
    let mut critic_losses = [0.0; 2];
    for (c, (net, state)) in [
        (&mut agent.critic1, &mut opt.critic1),
        (&mut agent.critic2, &mut opt.critic2),
    ]
    .into_iter()
    .enumerate()
    {
        let tape = net.forward(&x_sa)?;
        let (loss, dpred) = mse_loss(tape.output(), &y)?;
        if !loss.is_finite() {
            return Err(CoreError::Diverged(format!("critic{} loss", c + 1)));
        }
        let grads = net.backward(&tape, &dpred)?;
        state.update(net, &grads);
        critic_losses[c] = loss;
    }

    // Actor: minimize mean(alpha logp - min Q) through the squashed sample.
    let (actor_loss, actor_grads, mean_logp) =
        actor_terms(&agent.actor, &agent.critic1, &agent.critic2, &s, &xi, alpha)?;
    if !actor_loss.is_finite() {
        return Err(CoreError::Diverged("actor loss".into()));
    }
    opt.actor.update(&mut agent.actor, &actor_grads);

    // Temperature toward the entropy target, in log space.
    let excess = mean_logp + agent.config.target_entropy;
    opt.alpha.update(&mut agent.log_alpha, -excess);
    let alpha_loss = -agent.log_alpha * excess;

    polyak_update(&mut agent.target1, &agent.critic1, agent.config.tau);
    polyak_update(&mut agent.target2, &agent.critic2, agent.config.tau);

    Ok(StepDiagnostics {
        critic1_loss: critic_losses[0],
        critic2_loss: critic_losses[1],
        actor_loss,
        alpha_loss,
        alpha: agent.alpha(),
    })
}

/// Runs the full training protocol against environments instantiated from
/// `template` (a fresh parameter draw per episode in the stochastic case).
///
/// Warmup episodes act uniformly at random; afterwards the stochastic policy
/// collects data and `updates_per_step` gradient steps run every
/// `update_every` environment steps (once the buffer can fill a batch).
pub fn train(config: &SacConfig, template: &EnvTemplate) -> Result<(SacAgent, Vec<TrainRecord>)> {
    let normalizer = crate::sac::ObsNormalizer::from_bounds(&template.bounds, template.t_f);
    let mut agent = SacAgent::new(*config, normalizer)?;
    let mut opt = SacOptimizers::new(&agent);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let env = if template.uncertainty.is_some() {
            let draw = rng.random::<u64>();
            template.instantiate(Some(draw))?
        } else {
            template.instantiate(None)?
        };

        let mut x = env.initial_state();
        let mut u_prev = env.initial_input();
        let mut cum_reward = 0.0;
        let mut states = Vec::with_capacity(env.t_f() + 1);
        let mut inputs = Vec::with_capacity(env.t_f());
        states.push(x);

        for k in 0..env.t_f() {
            let obs = agent
                .normalizer
                .make_observation(&x, &u_prev, env.disturbance(k), k);
            let act = if episode < config.warmup_episodes {
                [
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                ]
            } else {
                agent.act(&obs, ActMode::Stochastic, &mut rng)?
            };
            let u = action_to_input(&act, &u_prev, &template.bounds);
            let (x_next, _y, cost) = env.step(&x, &u, k)?;
            let reward = cost.reward();
            let obs2 =
                agent
                    .normalizer
                    .make_observation(&x_next, &u, env.disturbance(k + 1), k + 1);
            buffer.push(Transition {
                s: obs,
                a: act,
                r: reward,
                s2: obs2,
                done: k + 1 == env.t_f(),
            });

            if episode >= config.warmup_episodes
                && (k + 1) % config.update_every == 0
                && buffer.len() >= config.batch_size
            {
                for _ in 0..config.updates_per_step {
                    train_step(&mut agent, &mut opt, &buffer, &mut rng)?;
                }
            }

            cum_reward += reward;
            inputs.push(u);
            states.push(x_next);
            x = x_next;
            u_prev = u;
        }

        let episode_epi = epi(&states, &inputs, &template.prices, crate::plant::DT)?;
        records.push(TrainRecord {
            episode,
            cum_reward,
            epi: episode_epi,
        });

        if !agent.actor.is_finite() || !agent.critic1.is_finite() || !agent.critic2.is_finite() {
            return Err(CoreError::Diverged(format!(
                "non-finite network after episode {episode}"
            )));
        }
    }

    Ok((agent, records))
}

/// Cumulative rewards (and EPI) of uniform-random episodes, the baseline for
/// sanity-checking trained agents.
pub fn random_policy_baseline(
    template: &EnvTemplate,
    episodes: usize,
    seed: u64,
) -> Result<Vec<TrainRecord>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let env = if template.uncertainty.is_some() {
            let draw = rng.random::<u64>();
            template.instantiate(Some(draw))?
        } else {
            template.instantiate(None)?
        };
        let mut x = env.initial_state();
        let mut u_prev = env.initial_input();
        let mut cum_reward = 0.0;
        let mut states = Vec::with_capacity(env.t_f() + 1);
        let mut inputs = Vec::with_capacity(env.t_f());
        states.push(x);
        for k in 0..env.t_f() {
            let act = [
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            ];
            let u = action_to_input(&act, &u_prev, &template.bounds);
            let (x_next, _y, cost) = env.step(&x, &u, k)?;
            cum_reward += cost.reward();
            inputs.push(u);
            states.push(x_next);
            x = x_next;
            u_prev = u;
        }
        let episode_epi = epi(&states, &inputs, &template.prices, crate::plant::DT)?;
        records.push(TrainRecord {
            episode,
            cum_reward,
            epi: episode_epi,
        });
    }
    Ok(records)
}
