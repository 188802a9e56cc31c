//! Task & Talk: a two-agent cooperative reference game in which a questioner
//! (Q-bot) and an answerer (A-bot) invent a language from scratch.
//!
//! The crate is `no_std` + `alloc`. It contains everything that is pure
//! computation: a small reverse-mode differentiation engine with the recurrent
//! cell, sampling and optimizer the agents need ([`numcore`]), the synthetic
//! world ([`world`]), the policy networks and rollout engine ([`agents`]),
//! REINFORCE training ([`training`]), greedy evaluation ([`evaluation`]) and
//! the language analyses ([`analysis`]).
//!
//! IO, checkpoints and the command line live in the `tasktalk-cli` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod agents;
pub mod analysis;
pub mod evaluation;
pub mod numcore;
pub mod training;
pub mod world;

pub use agents::{ABot, AgentConfig, Agents, DialogTranscript, LookupTeam, QBot, Team};
pub use evaluation::{evaluate, find_misclassified, AccuracyReport};
pub use training::{Baseline, Estimator, MetricRecord, TrainerConfig, TrainingState, TreeSnapshot};

pub use world::{Attribute, AttrValue, DatasetSplit, GroundTruth, ObjectInstance, Task};
