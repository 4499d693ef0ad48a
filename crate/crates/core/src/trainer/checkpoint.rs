use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::baselines::{Fuser, FuserSpec};
use crate::ccmt::{read_checkpoint, write_checkpoint, CcmtConfig};
use crate::error::{Error, Result};
use crate::numerics::ParamStore;

/// Configuration block stored in every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointConfig {
    pub fuser: FuserSpec,
    pub model: CcmtConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    fuser: &Fuser,
    train: Option<&TrainConfig>,
    params: &ParamStore<f32>,
) -> Result<()> {
    let cfg = CheckpointConfig {
        fuser: fuser.spec.clone(),
        model: fuser.cfg.clone(),
        train: train.cloned(),
    };
    write_checkpoint(path, &serde_json::to_value(&cfg)?, params)
}

/// Rebuild the fuser and check every expected parameter is present with the right shape.
pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<(Fuser, CheckpointConfig, ParamStore<f32>)> {
    let (value, params) = read_checkpoint(path)?;
    let cfg: CheckpointConfig = serde_json::from_value(value)?;
    let fuser = Fuser::new(cfg.fuser.clone(), cfg.model.clone())?;
    let template = fuser.init_params(&mut crate::tokenstore::Rng::new(0))?;
    for (name, t) in template.iter() {
        match params.get(name) {
            None => return Err(Error::Config(format!("checkpoint lacks parameter {name}"))),
            Some(p) if p.shape() != t.shape() => {
                return Err(Error::Dimension {
                    op: "load_checkpoint",
                    left: p.shape().to_vec(),
                    right: t.shape().to_vec(),
                })
            }
            Some(_) => {}
        }
    }
    if params.len() != template.len() {
        return Err(Error::Config(format!(
            "checkpoint has {} parameters, the model expects {}",
            params.len(),
            template.len()
        )));
    }
    Ok((fuser, cfg, params))
}
