//! Versioned JSON checkpoints.
//!
//! A file is `{"format_version", "sha256", "body"}`; the digest covers the
//! compact serialization of `body` and is checked before anything in it is
//! trusted. Random streams are keyed on `(seed, iteration)`, so the
//! iteration counter is the whole generator state.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tasktalk::agents::{ABot, QBot};
use tasktalk::numcore::{AdamState, ParamSet};
use tasktalk::world::{DatasetSplit, Episode};
use tasktalk::{AgentConfig, Agents, MetricRecord, TrainerConfig, TrainingState, TreeSnapshot};

use crate::preset::PresetName;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("checkpoint format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("checkpoint digest mismatch: file says {stored}, contents hash to {actual}")]
    Digest { stored: String, actual: String },
    #[error("checkpoint does not describe valid agents: {0}")]
    Agents(#[from] tasktalk::agents::AgentError),
}

/// How the run was configured, kept verbatim for provenance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_file: Option<String>,
    pub flags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub preset: Option<PresetName>,
    pub seed: u64,
    pub iteration: u64,
    pub provenance: Provenance,
    pub agent_config: AgentConfig,
    pub trainer: TrainerConfig,
    pub split: DatasetSplit,
    pub qbot: ParamSet,
    pub abot: ParamSet,
    pub q_adam: AdamState,
    pub a_adam: AdamState,
    pub misclassified: Vec<Episode>,
    pub streak: u64,
    pub history: Vec<MetricRecord>,
    pub snapshots: Vec<TreeSnapshot>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u64,
    sha256: String,
    body: serde_json::Value,
}

impl Checkpoint {
    pub fn from_state(state: &TrainingState, preset: Option<PresetName>, provenance: Provenance) -> Self {
        Checkpoint {
            preset,
            seed: state.config.seed,
            iteration: state.iteration,
            provenance,
            agent_config: state.agents.config(),
            trainer: state.config,
            split: state.split.clone(),
            qbot: state.agents.qbot.params.clone(),
            abot: state.agents.abot.params.clone(),
            q_adam: state.q_adam.clone(),
            a_adam: state.a_adam.clone(),
            misclassified: state.misclassified.iter().copied().collect(),
            streak: state.streak,
            history: state.history.clone(),
            snapshots: state.snapshots.clone(),
        }
    }

    pub fn agents(&self) -> Result<Agents, CheckpointError> {
        Ok(Agents {
            qbot: QBot::from_params(self.agent_config, self.qbot.clone())?,
            abot: ABot::from_params(self.agent_config, self.abot.clone())?,
        })
    }

    pub fn to_state(&self) -> Result<TrainingState, CheckpointError> {
        Ok(TrainingState {
            config: self.trainer,
            split: self.split.clone(),
            agents: self.agents()?,
            q_adam: self.q_adam.clone(),
            a_adam: self.a_adam.clone(),
            misclassified: self.misclassified.iter().copied().collect(),
            iteration: self.iteration,
            streak: self.streak,
            history: self.history.clone(),
            snapshots: self.snapshots.clone(),
        })
    }

    /// Hex SHA-256 of the canonical body encoding.
    pub fn digest(&self) -> Result<String, CheckpointError> {
        let body = serde_json::to_value(self)?;
        Ok(digest_of(&body)?)
    }

    pub fn to_json(&self) -> Result<String, CheckpointError> {
        let body = serde_json::to_value(self)?;
        let envelope = Envelope {
            format_version: FORMAT_VERSION.into(),
            sha256: digest_of(&body)?,
            body,
        };
        Ok(serde_json::to_string(&envelope)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let envelope: Envelope = serde_json::from_str(text)?;
        if envelope.format_version != u64::from(FORMAT_VERSION) {
            return Err(CheckpointError::Version { found: envelope.format_version });
        }
        let actual = digest_of(&envelope.body)?;
        if actual != envelope.sha256 {
            return Err(CheckpointError::Digest { stored: envelope.sha256, actual });
        }
        let checkpoint: Checkpoint = serde_json::from_value(envelope.body)?;
        checkpoint.agents()?;
        Ok(checkpoint)
    }

    /// Written to a sibling temporary file first, then renamed into place.
    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()?).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn digest_of(body: &serde_json::Value) -> Result<String, serde_json::Error> {
    let bytes = serde_json::to_vec(body)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tasktalk::world::split_dataset;

    fn state() -> TrainingState {
        let cfg = TrainerConfig { batch_size: 16, max_epochs: 2, ..TrainerConfig::with_seed(3) };
        let mut s = TrainingState::new(AgentConfig::new(3, 4, true), cfg, split_dataset(3)).unwrap();
        s.train_iteration().unwrap();
        s
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let s = state();
        let ck = Checkpoint::from_state(&s, Some(PresetName::NomemMin), Provenance::default());
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_state().unwrap(), s);
        assert_eq!(back.digest().unwrap(), ck.digest().unwrap());
    }

    #[test]
    fn corrupt_files_are_refused() {
        let ck = Checkpoint::from_state(&state(), None, Provenance::default());
        let text = ck.to_json().unwrap();
        assert!(matches!(Checkpoint::from_json(&text[..text.len() / 2]), Err(CheckpointError::Malformed(_))));
        let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(matches!(Checkpoint::from_json(&bumped), Err(CheckpointError::Version { found: 2 })));
        let tampered = text.replacen("\"iteration\":1", "\"iteration\":7", 1);
        assert_ne!(tampered, text);
        assert!(matches!(Checkpoint::from_json(&tampered), Err(CheckpointError::Digest { .. })));
    }
}
