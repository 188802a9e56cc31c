//! Q-bot and A-bot policies and the dialog rollout engine.
//!
//! The neural agents are built on [`crate::numcore::Graph`]: every rollout
//! records one graph per agent, so each agent's log-probabilities depend only
//! on its own parameters and the tokens it observed.

mod abot;
pub mod lookup;
mod qbot;
mod rollout;

pub use abot::ABot;
pub use lookup::LookupTeam;
pub use qbot::QBot;
pub use rollout::{replay, run_batch, run_episode, Rollout};

use alloc::string::String;
use alloc::vec::Vec;

use crate::numcore::{
    argmax, sample_categorical, stream_rng, Graph, GraphError, SampleError, Stream, StreamRng, Var,
};
use crate::world::{Episode, GroundTruth, ObjectInstance, Task};

/// Sizes of both agents. Defaults: 20-dim token
/// and attribute embeddings, 50-dim LSTM state, two rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentConfig {
    pub q_vocab: usize,
    pub a_vocab: usize,
    pub token_embed_dim: usize,
    pub hidden_dim: usize,
    pub attr_embed_dim: usize,
    pub memoryless_abot: bool,
    pub rounds: usize,
}

impl AgentConfig {
    pub fn new(q_vocab: usize, a_vocab: usize, memoryless_abot: bool) -> Self {
        AgentConfig {
            q_vocab,
            a_vocab,
            token_embed_dim: 20,
            hidden_dim: 50,
            attr_embed_dim: 20,
            memoryless_abot,
            rounds: 2,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let dims = [
            self.q_vocab,
            self.a_vocab,
            self.token_embed_dim,
            self.hidden_dim,
            self.attr_embed_dim,
            self.rounds,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(AgentError::Config(alloc::format!("all sizes must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("token {token} is outside a vocabulary of {vocab}")]
    InvalidToken { token: usize, vocab: usize },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("parameter layout: {0}")]
    Layout(String),
    #[error("forced decoding ran out of recorded actions")]
    ScriptExhausted,
    #[error("transcript is missing log-probabilities or tokens")]
    IncompleteTranscript,
    #[error("sampling needs one generator per episode ({rows} rows, {rngs} generators)")]
    RngCount { rows: usize, rngs: usize },
}

/// How actions are chosen from a policy distribution.
#[derive(Debug)]
pub enum Decoding<'a> {
    /// Argmax, lowest index on ties.
    Greedy,
    /// One generator per batch row.
    Sample(&'a mut [StreamRng]),
    /// Replay recorded actions: each choice takes the next entry of the
    /// script (one token per row), in speaking order `q1, a1, ..., ŵ1, ŵ2`.
    Forced(&'a mut Script),
}

/// Recorded per-row actions for [`Decoding::Forced`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    steps: alloc::collections::VecDeque<Vec<usize>>,
}

impl Script {
    pub fn new(steps: impl IntoIterator<Item = Vec<usize>>) -> Self {
        Script {
            steps: steps.into_iter().collect(),
        }
    }

    /// Script replaying `transcripts` as one batch.
    pub fn from_transcripts(transcripts: &[DialogTranscript]) -> Self {
        let Some(first) = transcripts.first() else {
            return Script::default();
        };
        let rounds = first.questions.len();
        let mut steps = Vec::with_capacity(2 * rounds + 2);
        for r in 0..rounds {
            steps.push(transcripts.iter().map(|t| t.questions[r]).collect());
            steps.push(transcripts.iter().map(|t| t.answers[r]).collect());
        }
        steps.push(transcripts.iter().map(|t| t.prediction.0.index()).collect());
        steps.push(transcripts.iter().map(|t| t.prediction.1.index()).collect());
        Script::new(steps)
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }
}

impl Decoding<'_> {
    fn check_rows(&self, rows: usize) -> Result<(), AgentError> {
        match self {
            Decoding::Sample(rngs) if rngs.len() != rows => Err(AgentError::RngCount { rows, rngs: rngs.len() }),
            _ => Ok(()),
        }
    }

    /// Shorter-lived copy for passing down into a single agent call.
    pub fn reborrow(&mut self) -> Decoding<'_> {
        match self {
            Decoding::Greedy => Decoding::Greedy,
            Decoding::Sample(rngs) => Decoding::Sample(rngs),
            Decoding::Forced(script) => Decoding::Forced(script),
        }
    }

    pub fn is_greedy(&self) -> bool {
        matches!(self, Decoding::Greedy)
    }
}

/// Actions chosen for every row of a batch, with the graph nodes holding the
/// distribution (`B × V`) and the chosen log-probabilities (`B × 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub tokens: Vec<usize>,
    pub probs: Var,
    /// Full `B × V` log-distribution.
    pub log_probs: Var,
    pub log_prob: Var,
}

/// Softmax head over `logits`, evaluated, with one action picked per row.
pub(crate) fn choose(
    g: &mut Graph,
    params: &crate::numcore::ParamSet,
    logits: Var,
    decoding: &mut Decoding<'_>,
) -> Result<Choice, AgentError> {
    let (rows, _) = g.shape(logits);
    decoding.check_rows(rows)?;
    let probs = g.softmax(logits);
    let log_probs = g.log_softmax(logits);
    g.forward(params, &Default::default())?;
    let vocab = g.shape(logits).1;
    let tokens = match decoding {
        Decoding::Forced(script) => {
            let step = script.steps.pop_front().ok_or(AgentError::ScriptExhausted)?;
            if step.len() != rows {
                return Err(AgentError::RngCount { rows, rngs: step.len() });
            }
            check_tokens(&step, vocab)?;
            step
        }
        Decoding::Greedy => (0..rows).map(|r| argmax(g.row(probs, r))).collect(),
        Decoding::Sample(rngs) => {
            let mut tokens = Vec::with_capacity(rows);
            for (r, rng) in rngs.iter_mut().enumerate() {
                tokens.push(sample_categorical(g.row(probs, r), rng)?.0);
            }
            tokens
        }
    };
    let log_prob = g.pick(log_probs, &tokens)?;
    g.forward(params, &Default::default())?;
    Ok(Choice {
        tokens,
        probs,
        log_probs,
        log_prob,
    })
}

pub(crate) fn check_tokens(tokens: &[usize], vocab: usize) -> Result<(), AgentError> {
    match tokens.iter().find(|&&t| t >= vocab) {
        Some(&token) => Err(AgentError::InvalidToken { token, vocab }),
        None => Ok(()),
    }
}

/// One played game.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DialogTranscript {
    pub task: Task,
    pub instance: ObjectInstance,
    pub questions: Vec<usize>,
    pub answers: Vec<usize>,
    pub prediction: GroundTruth,
    pub question_log_probs: Vec<f64>,
    pub answer_log_probs: Vec<f64>,
    pub prediction_log_probs: [f64; 2],
    pub reward: f64,
}

impl DialogTranscript {
    /// Dialog tokens in speaking order `q1, a1, q2, a2, ...`.
    pub fn tokens(&self) -> Vec<usize> {
        self.questions
            .iter()
            .zip(&self.answers)
            .flat_map(|(&q, &a)| [q, a])
            .collect()
    }

    /// Log-probabilities of every action in order `q1, a1, q2, a2, ŵ1, ŵ2`.
    pub fn log_probs(&self) -> Vec<f64> {
        self.question_log_probs
            .iter()
            .zip(&self.answer_log_probs)
            .flat_map(|(&q, &a)| [q, a])
            .chain(self.prediction_log_probs)
            .collect()
    }

    pub fn truth(&self) -> GroundTruth {
        crate::world::ground_truth(self.instance, self.task)
    }

    pub fn is_correct(&self) -> bool {
        self.prediction == self.truth()
    }
}

/// A pair of agents that can play the game greedily.
///
/// Evaluation, dialog trees and grounding extraction are written against
/// this trait, so hand-built lookup policies and trained networks are
/// analyzed by the same code.
pub trait Team {
    /// `(|V_Q|, |V_A|)`.
    fn vocab_sizes(&self) -> (usize, usize);

    fn rounds(&self) -> usize {
        2
    }

    /// Greedy transcripts, in the order of `episodes`.
    fn play_greedy(&self, episodes: &[Episode]) -> Result<Vec<DialogTranscript>, AgentError>;

    /// Greedy answer to `question` about `instance` from a fresh A-bot state.
    fn probe_answer(&self, question: usize, instance: ObjectInstance) -> Result<usize, AgentError>;
}

/// A trained or freshly initialized pair of neural agents.
#[derive(Clone, Debug, PartialEq)]
pub struct Agents {
    pub qbot: QBot,
    pub abot: ABot,
}

impl Agents {
    /// Xavier-initialized agents. Q-bot and A-bot draw from separate
    /// substreams of `seed`.
    pub fn new(config: AgentConfig, seed: u64) -> Result<Self, AgentError> {
        config.validate()?;
        let mut qrng = stream_rng(seed, Stream::Init, 0, 0);
        let mut arng = stream_rng(seed, Stream::Init, 0, 1);
        Ok(Agents {
            qbot: QBot::new(config, &mut qrng),
            abot: ABot::new(config, &mut arng),
        })
    }

    pub fn config(&self) -> AgentConfig {
        self.qbot.config
    }
}

impl Team for Agents {
    fn vocab_sizes(&self) -> (usize, usize) {
        (self.qbot.config.q_vocab, self.qbot.config.a_vocab)
    }

    fn rounds(&self) -> usize {
        self.qbot.config.rounds
    }

    fn play_greedy(&self, episodes: &[Episode]) -> Result<Vec<DialogTranscript>, AgentError> {
        if episodes.is_empty() {
            return Ok(Vec::new());
        }
        let rollout = run_batch(&self.qbot, &self.abot, episodes, Decoding::Greedy, &Default::default())?;
        Ok(rollout.transcripts)
    }

    fn probe_answer(&self, question: usize, instance: ObjectInstance) -> Result<usize, AgentError> {
        Ok(self.abot.greedy_answers(&[question], instance)?[0])
    }
}
