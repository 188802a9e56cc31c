//! Greedy evaluation: "Both" (exact ordered pair) and "One" (at least one
//! position right) accuracies, and the misclassified pool for the curriculum.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::agents::{AgentError, DialogTranscript, Team};
use crate::world::{episodes_for, Episode, GroundTruth, ObjectInstance, Task};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("cannot evaluate on an empty instance set")]
    EmptyInstanceSet,
    #[error(transparent)]
    Agent(#[from] AgentError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpisodeOutcome {
    pub instance: ObjectInstance,
    pub task: Task,
    pub prediction: GroundTruth,
    pub truth: GroundTruth,
    pub both: bool,
    pub one: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AccuracyReport {
    pub both_pct: f64,
    pub one_pct: f64,
    pub outcomes: Vec<EpisodeOutcome>,
}

impl AccuracyReport {
    pub fn from_transcripts<'a>(transcripts: impl IntoIterator<Item = &'a DialogTranscript>) -> Self {
        let outcomes: Vec<EpisodeOutcome> = transcripts
            .into_iter()
            .map(|t| {
                let truth = t.truth();
                let p = t.prediction;
                EpisodeOutcome {
                    instance: t.instance,
                    task: t.task,
                    prediction: p,
                    truth,
                    both: p == truth,
                    one: p.0 == truth.0 || p.1 == truth.1,
                }
            })
            .collect();
        let n = outcomes.len().max(1) as f64;
        let both = outcomes.iter().filter(|o| o.both).count() as f64;
        let one = outcomes.iter().filter(|o| o.one).count() as f64;
        AccuracyReport {
            both_pct: 100.0 * both / n,
            one_pct: 100.0 * one / n,
            outcomes,
        }
    }

    /// Pairs whose ordered prediction was wrong.
    pub fn misclassified(&self) -> BTreeSet<Episode> {
        self.outcomes
            .iter()
            .filter(|o| !o.both)
            .map(|o| (o.instance, o.task))
            .collect()
    }

    pub fn episodes(&self) -> usize {
        self.outcomes.len()
    }
}

/// Greedy rollouts over `instances` × all 6 tasks.
pub fn evaluate<T: Team + ?Sized>(team: &T, instances: &[ObjectInstance]) -> Result<AccuracyReport, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::EmptyInstanceSet);
    }
    let transcripts = team.play_greedy(&episodes_for(instances))?;
    Ok(AccuracyReport::from_transcripts(&transcripts))
}

/// Every (instance, task) of `train` that the greedy team gets wrong.
pub fn find_misclassified<T: Team + ?Sized>(team: &T, train: &[ObjectInstance]) -> Result<BTreeSet<Episode>, EvalError> {
    if train.is_empty() {
        return Ok(BTreeSet::new());
    }
    Ok(evaluate(team, train)?.misclassified())
}

/// Percentages are reported with one decimal.
pub fn format_pct(pct: f64) -> String {
    format!("{pct:.1}")
}
