use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tasktalk::{AgentConfig, TrainerConfig};

/// The three built-in settings, in order of increasing restriction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Overcomplete,
    AttrValue,
    NomemMin,
}

impl PresetName {
    pub const ALL: [PresetName; 3] = [PresetName::Overcomplete, PresetName::AttrValue, PresetName::NomemMin];

    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Overcomplete => "overcomplete",
            PresetName::AttrValue => "attr-value",
            PresetName::NomemMin => "nomem-min",
        }
    }

    pub fn preset(self) -> ExperimentPreset {
        let (q_vocab, a_vocab, abot_memoryless) = match self {
            PresetName::Overcomplete => (64, 64, false),
            PresetName::AttrValue => (3, 12, false),
            PresetName::NomemMin => (3, 4, true),
        };
        ExperimentPreset {
            name: self,
            q_vocab,
            a_vocab,
            abot_memoryless,
            trainer: TrainerConfig::default(),
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown preset `{0}` (expected overcomplete, attr-value or nomem-min)")]
pub struct UnknownPreset(pub String);

impl FromStr for PresetName {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| UnknownPreset(s.to_owned()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub q_vocab: usize,
    pub a_vocab: usize,
    pub abot_memoryless: bool,
    pub trainer: TrainerConfig,
}

impl ExperimentPreset {
    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig::new(self.q_vocab, self.a_vocab, self.abot_memoryless)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_the_three_settings() {
        let got: Vec<_> = PresetName::ALL
            .iter()
            .map(|p| {
                let p = p.preset();
                (p.q_vocab, p.a_vocab, p.abot_memoryless)
            })
            .collect();
        assert_eq!(got, [(64, 64, false), (3, 12, false), (3, 4, true)]);
    }

    #[test]
    fn names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.as_str().parse::<PresetName>().unwrap(), p);
        }
        assert!("nomem".parse::<PresetName>().is_err());
    }
}
