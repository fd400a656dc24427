//! Agent checkpointing: one directory holding the five networks in the
//! binary weight format plus a JSON sidecar with hyperparameters, the
//! temperature, and the observation normalizer ranges.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::{load_weights, save_weights};
use crate::sac::{ObsNormalizer, SacAgent, SacConfig, OBS_DIM};

const META_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    version: u32,
    config: SacConfig,
    log_alpha: f64,
}

/// Writes `actor.mlpw`, `critic{1,2}.mlpw`, `target{1,2}.mlpw` and
/// `meta.json` into `dir` (created if missing).
pub fn save_checkpoint(agent: &SacAgent, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let norm = agent.normalizer.to_flat();
    save_weights(&agent.actor, &norm, &dir.join("actor.mlpw"))?;
    save_weights(&agent.critic1, &[], &dir.join("critic1.mlpw"))?;
    save_weights(&agent.critic2, &[], &dir.join("critic2.mlpw"))?;
    save_weights(&agent.target1, &[], &dir.join("target1.mlpw"))?;
    save_weights(&agent.target2, &[], &dir.join("target2.mlpw"))?;
    let meta = CheckpointMeta {
        version: META_VERSION,
        config: agent.config,
        log_alpha: agent.log_alpha,
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| CoreError::Checkpoint(format!("meta serialization: {e}")))?;
    fs::write(dir.join("meta.json"), json)?;
    Ok(())
}

/// Restores an agent saved by [`save_checkpoint`], validating the version and
/// that the actor's normalizer block has the expected length.
pub fn load_checkpoint(dir: &Path) -> Result<SacAgent> {
    let meta_raw = fs::read_to_string(dir.join("meta.json"))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_raw)
        .map_err(|e| CoreError::Checkpoint(format!("meta parse: {e}")))?;
    if meta.version != META_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported checkpoint version {}",
            meta.version
        )));
    }
    if !meta.log_alpha.is_finite() {
        return Err(CoreError::Checkpoint("non-finite log_alpha".into()));
    }

    let (actor, norm) = load_weights(&dir.join("actor.mlpw"))?;
    let normalizer = ObsNormalizer::from_flat(&norm)?;
    let (critic1, _) = load_weights(&dir.join("critic1.mlpw"))?;
    let (critic2, _) = load_weights(&dir.join("critic2.mlpw"))?;
    let (target1, _) = load_weights(&dir.join("target1.mlpw"))?;
    let (target2, _) = load_weights(&dir.join("target2.mlpw"))?;

    if actor.input_dim() != OBS_DIM {
        return Err(CoreError::Checkpoint(format!(
            "actor input dim {} (want {OBS_DIM})",
            actor.input_dim()
        )));
    }
    for (name, net) in [
        ("critic1", &critic1),
        ("critic2", &critic2),
        ("target1", &target1),
        ("target2", &target2),
    ] {
        if net.input_dim() != OBS_DIM + crate::sac::ACT_DIM || net.output_dim() != 1 {
            return Err(CoreError::Checkpoint(format!("{name} has wrong shape")));
        }
    }

    Ok(SacAgent {
        actor,
        critic1,
        critic2,
        target1,
        target2,
        log_alpha: meta.log_alpha,
        normalizer,
        config: meta.config,
    })
}
