use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

use super::{GdpModel, History, TrainConfig, TrainedModel};

/// Everything needed to score or resume a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub seed: u64,
    pub train: TrainConfig,
    pub model: GdpModel,
    pub history: History,
    /// Resolved run configuration, as flat key/value pairs.
    #[serde(default)]
    pub config: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(trained: &TrainedModel, config: BTreeMap<String, String>) -> Self {
        Self {
            version: crate::VERSION.to_string(),
            seed: trained.seed,
            train: trained.config.clone(),
            model: trained.model.clone(),
            history: trained.history.clone(),
            config,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        ck.check()?;
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn check(&self) -> Result<()> {
        let s = &self.model.shape;
        let pairs = super::EdgeLogits::pair_count(s.n, self.model.psi.tied());
        if self.model.psi.n() != s.n || self.model.psi.values.shape() != [pairs, 2] {
            return contract("checkpoint edge logits do not match the model shape");
        }
        if self.model.poly.order() != s.k {
            return contract("checkpoint polynomial order does not match the model shape");
        }
        Ok(())
    }

    pub fn trained(&self) -> TrainedModel {
        TrainedModel { model: self.model.clone(), history: self.history.clone(), config: self.train.clone(), seed: self.seed }
    }
}
