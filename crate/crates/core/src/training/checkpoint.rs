use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};
use crate::graph::{DataSplit, InteractionGraph, SideFeatures};
use crate::model::{DiffGt, ParamStore};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained parameters with everything needed to rebuild and verify them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub dataset_hash: String,
    pub config: TrainConfig,
    pub num_users: usize,
    pub num_items: usize,
    pub best_epoch: usize,
    pub schedule: NoiseSchedule,
    pub params: ParamStore,
}

/// SHA-256 of the canonical JSON encoding of `cfg`.
pub fn config_hash(cfg: &TrainConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(cfg)?)))
}

/// SHA-256 over the graph, side features and split.
pub fn dataset_hash(graph: &InteractionGraph, side: &SideFeatures, split: &DataSplit) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(graph)?);
    h.update(serde_json::to_vec(side)?);
    h.update(serde_json::to_vec(split)?);
    Ok(hex::encode(h.finalize()))
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, model: &DiffGt, dataset_hash: String, best_epoch: usize) -> Result<Self> {
        if config.model != *model.config() {
            return Err(Error::Config("model was built from a different configuration".into()));
        }
        Ok(Self {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(config)?,
            dataset_hash,
            config: config.clone(),
            num_users: model.num_users(),
            num_items: model.num_items(),
            best_epoch,
            schedule: model.schedule().clone(),
            params: model.params().clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and checks the version, the config hash and the stored schedule.
    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Integrity(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        let actual = config_hash(&ckpt.config)?;
        if actual != ckpt.config_hash {
            return Err(Error::Integrity(format!(
                "config hash mismatch: stored {}, recomputed {actual}",
                ckpt.config_hash
            )));
        }
        Ok(ckpt)
    }

    pub fn verify_dataset(&self, hash: &str) -> Result<()> {
        if hash == self.dataset_hash {
            Ok(())
        } else {
            Err(Error::Integrity(format!(
                "dataset hash mismatch: checkpoint was trained on {}, bundle is {hash}",
                self.dataset_hash
            )))
        }
    }

    pub fn model(&self) -> Result<DiffGt> {
        let model = DiffGt::from_parts(self.config.model.clone(), self.num_users, self.num_items, self.params.clone())?;
        if model.schedule() != &self.schedule {
            return Err(Error::Integrity("stored noise schedule disagrees with the config".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomSource;

    fn sample() -> Checkpoint {
        let mut cfg = TrainConfig::default();
        cfg.model.dim = 3;
        cfg.model.steps = 6;
        let model = DiffGt::new(cfg.model.clone(), 2, 3, &mut RandomSource::new(1)).unwrap();
        Checkpoint::new(&cfg, &model, "abc".into(), 4).unwrap()
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.model().unwrap().params(), &c.params);
    }

    #[test]
    fn tampered_config_is_refused() {
        let mut c = sample();
        c.config.learning_rate = 0.5;
        let err = Checkpoint::from_json(&c.to_json().unwrap()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn dataset_mismatch() {
        let c = sample();
        assert!(c.verify_dataset("abc").is_ok());
        assert!(matches!(c.verify_dataset("abd"), Err(Error::Integrity(_))));
    }

    #[test]
    fn hash_covers_nested_fields() {
        let a = TrainConfig::default();
        let mut b = a.clone();
        b.model.beta_end = 0.03;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        assert_eq!(config_hash(&a).unwrap(), config_hash(&a.clone()).unwrap());
    }
}
