//! Flat TOML run configuration. Every key is optional and overrides the
//! preset; command-line flags override the file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tasktalk::numcore::ClipMode;
use tasktalk::{AgentConfig, Baseline, Estimator, TrainerConfig};

use crate::preset::PresetName;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<PresetName>,
    pub seed: Option<u64>,
    pub q_vocab: Option<usize>,
    pub a_vocab: Option<usize>,
    pub memoryless_abot: Option<bool>,
    pub hidden_dim: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    /// `"value"`, `"global-norm"` or `"none"`.
    pub clip_mode: Option<String>,
    pub clip_bound: Option<f64>,
    pub reward_correct: Option<f64>,
    pub reward_wrong: Option<f64>,
    pub max_epochs: Option<u64>,
    pub eval_every: Option<u64>,
    pub curriculum_fraction: Option<f64>,
    pub estimator: Option<Estimator>,
    pub baseline: Option<Baseline>,
    pub rollouts_per_pair: Option<usize>,
    pub entropy_coef: Option<f64>,
    pub patience: Option<u64>,
    pub snapshot_every: Option<u64>,
    pub checkpoint_every: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config file")
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn apply(&self, agent: &mut AgentConfig, trainer: &mut TrainerConfig) -> Result<()> {
        macro_rules! set {
            ($target:ident . $field:ident) => {
                if let Some(v) = self.$field {
                    $target.$field = v;
                }
            };
        }
        set!(agent.q_vocab);
        set!(agent.a_vocab);
        set!(agent.hidden_dim);
        if let Some(v) = self.memoryless_abot {
            agent.memoryless_abot = v;
        }
        set!(trainer.seed);
        set!(trainer.batch_size);
        set!(trainer.learning_rate);
        set!(trainer.max_epochs);
        set!(trainer.eval_every);
        set!(trainer.curriculum_fraction);
        set!(trainer.estimator);
        set!(trainer.baseline);
        set!(trainer.rollouts_per_pair);
        set!(trainer.entropy_coef);
        set!(trainer.patience);
        set!(trainer.snapshot_every);
        if let Some(v) = self.reward_correct {
            trainer.rewards.correct = v;
        }
        if let Some(v) = self.reward_wrong {
            trainer.rewards.wrong = v;
        }
        let bound = self.clip_bound.or(match trainer.clip {
            ClipMode::Value(b) | ClipMode::GlobalNorm(b) => Some(b),
            ClipMode::None => None,
        });
        let mode = self.clip_mode.as_deref().unwrap_or(match trainer.clip {
            ClipMode::Value(_) => "value",
            ClipMode::GlobalNorm(_) => "global-norm",
            ClipMode::None => "none",
        });
        trainer.clip = match (mode, bound) {
            ("none", _) => ClipMode::None,
            ("value", Some(b)) => ClipMode::Value(b),
            ("global-norm", Some(b)) => ClipMode::GlobalNorm(b),
            ("value" | "global-norm", None) => bail!("clip_mode `{mode}` needs clip_bound"),
            _ => bail!("unknown clip_mode `{mode}`"),
        };
        Ok(())
    }
}
