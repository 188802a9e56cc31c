//! REINFORCE training with a misclassified-pair curriculum.
//!
//! Every iteration samples one batch, plays it with sampled actions, takes
//! one clipped Adam step per agent, then replays the whole grid greedily to
//! refresh metrics and the curriculum pool.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::agents::{replay, run_batch, ABot, AgentConfig, AgentError, Agents, Decoding, DialogTranscript, QBot, Team};
use crate::evaluation::AccuracyReport;
use crate::numcore::{
    adam_step, clip_gradients, stream_rng, AdamState, ClipMode, Gradients, OptimError, Stream, StreamRng,
};
use crate::world::{
    enumerate_instances, episodes_for, sample_training_batch, DatasetSplit, Episode, RewardScheme,
    DEFAULT_BATCH_SIZE, DEFAULT_CURRICULUM_FRACTION,
};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error("non-finite {agent} parameters after iteration {iteration}")]
    Diverged { iteration: u64, agent: &'static str },
    #[error("invalid trainer configuration: {0}")]
    Config(&'static str),
}

/// How the policy gradient is estimated from a sampled batch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Estimator {
    /// Score-function estimate over all six sampled actions.
    #[default]
    Reinforce,
    /// Dialog tokens are sampled; the two prediction draws are summed out
    /// exactly (see [`Rollout::expected_reward_gradients`]).
    ///
    /// [`Rollout::expected_reward_gradients`]: crate::agents::Rollout::expected_reward_gradients
    ExpectedPrediction,
}

/// Reward baseline subtracted before weighting log-probs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Baseline {
    #[default]
    None,
    /// Mean reward of the whole batch.
    BatchMean,
    /// Mean reward of the other rollouts of the same pair.
    LeaveOneOut,
}

impl Baseline {
    /// One baseline value per reward; `group` consecutive rewards share a pair.
    pub fn values(self, rewards: &[f64], group: usize) -> Vec<f64> {
        match self {
            Baseline::None => alloc::vec![0.0; rewards.len()],
            Baseline::BatchMean => {
                let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
                alloc::vec![mean; rewards.len()]
            }
            Baseline::LeaveOneOut => rewards
                .chunks(group)
                .flat_map(|c| {
                    let total: f64 = c.iter().sum();
                    let others = (c.len().max(2) - 1) as f64;
                    c.iter().map(move |r| (total - r) / others)
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainerConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip: ClipMode,
    pub rewards: RewardScheme,
    /// Upper bound on iterations.
    pub max_epochs: u64,
    /// Greedy re-evaluation (metrics and curriculum refresh) cadence.
    pub eval_every: u64,
    pub seed: u64,
    pub curriculum_fraction: f64,
    pub estimator: Estimator,
    pub baseline: Baseline,
    /// Independent rollouts of each sampled pair; the batch holds
    /// `batch_size / rollouts_per_pair` distinct pairs.
    pub rollouts_per_pair: usize,
    /// Weight of the mean policy entropy bonus; 0 disables it.
    pub entropy_coef: f64,
    /// Stop once training accuracy has been 100% for this many evaluations.
    pub patience: u64,
    /// Record a dialog-tree snapshot every this many iterations.
    pub snapshot_every: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            batch_size: DEFAULT_BATCH_SIZE,
            learning_rate: AdamState::DEFAULT_LEARNING_RATE,
            clip: ClipMode::default(),
            rewards: RewardScheme::default(),
            max_epochs: 1000,
            eval_every: 1,
            seed: 0,
            curriculum_fraction: DEFAULT_CURRICULUM_FRACTION,
            estimator: Estimator::Reinforce,
            baseline: Baseline::None,
            rollouts_per_pair: 1,
            entropy_coef: 0.0,
            patience: 10,
            snapshot_every: 5,
        }
    }
}

impl TrainerConfig {
    pub fn with_seed(seed: u64) -> Self {
        TrainerConfig {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.curriculum_fraction) {
            return Err(TrainError::Config("curriculum_fraction must lie in [0, 1]"));
        }
        if self.rollouts_per_pair == 0 || self.rollouts_per_pair > self.batch_size {
            return Err(TrainError::Config("rollouts_per_pair must lie in [1, batch_size]"));
        }
        if self.baseline == Baseline::LeaveOneOut && self.rollouts_per_pair < 2 {
            return Err(TrainError::Config("a leave-one-out baseline needs rollouts_per_pair >= 2"));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(TrainError::Config("entropy_coef must be non-negative and finite"));
        }
        if self.eval_every == 0 || self.snapshot_every == 0 {
            return Err(TrainError::Config("eval_every and snapshot_every must be positive"));
        }
        match self.clip {
            ClipMode::Value(b) | ClipMode::GlobalNorm(b) if !(b > 0.0) => {
                Err(TrainError::Config("clip bound must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Accuracies after one iteration, in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricRecord {
    pub iteration: u64,
    pub train_both: f64,
    pub train_one: f64,
    pub test_both: f64,
    pub test_one: f64,
    /// Mean sampled reward of the batch used for this update.
    pub mean_reward: f64,
}

/// Greedy token paths `[q1, a1, q2, a2]` for every (instance, task) pair in
/// [`snapshot_episodes`] order.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeSnapshot {
    pub iteration: u64,
    pub train_both: f64,
    pub test_both: f64,
    pub paths: Vec<[u16; 4]>,
    pub correct: Vec<bool>,
}

/// All 64 × 6 pairs, instance-major.
pub fn snapshot_episodes() -> Vec<Episode> {
    episodes_for(&enumerate_instances())
}

/// Everything needed to continue training bit-identically. Random streams
/// are derived from `(config.seed, iteration)`, so no generator state is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingState {
    pub config: TrainerConfig,
    pub split: DatasetSplit,
    pub agents: Agents,
    pub q_adam: AdamState,
    pub a_adam: AdamState,
    pub misclassified: BTreeSet<Episode>,
    /// Completed iterations.
    pub iteration: u64,
    /// Consecutive evaluations at 100% training accuracy.
    pub streak: u64,
    pub history: Vec<MetricRecord>,
    pub snapshots: Vec<TreeSnapshot>,
}

impl TrainingState {
    /// Fresh agents from `config.seed`, evaluated once so the first batch
    /// already has a curriculum and iteration 0 has a snapshot.
    pub fn new(agent_config: AgentConfig, config: TrainerConfig, split: DatasetSplit) -> Result<Self, TrainError> {
        config.validate()?;
        let agents = Agents::new(agent_config, config.seed)?;
        Self::from_agents(agents, config, split)
    }

    pub fn from_agents(agents: Agents, config: TrainerConfig, split: DatasetSplit) -> Result<Self, TrainError> {
        config.validate()?;
        let q_adam = AdamState::new(&agents.qbot.params, config.learning_rate);
        let a_adam = AdamState::new(&agents.abot.params, config.learning_rate);
        let mut state = TrainingState {
            config,
            split,
            agents,
            q_adam,
            a_adam,
            misclassified: BTreeSet::new(),
            iteration: 0,
            streak: 0,
            history: Vec::new(),
            snapshots: Vec::new(),
        };
        let eval = state.evaluate_grid()?;
        state.misclassified = eval.train.misclassified();
        state.snapshots.push(eval.snapshot(0));
        Ok(state)
    }

    pub fn is_converged(&self) -> bool {
        self.streak >= self.config.patience
    }

    pub fn is_finished(&self) -> bool {
        self.is_converged() || self.iteration >= self.config.max_epochs
    }

    pub fn last_metrics(&self) -> Option<&MetricRecord> {
        self.history.last()
    }

    /// One gradient update followed (on evaluation iterations) by a greedy
    /// pass over the grid.
    pub fn train_iteration(&mut self) -> Result<MetricRecord, TrainError> {
        let cfg = self.config;
        let it = self.iteration;
        let group = cfg.rollouts_per_pair;
        let mut batch_rng = stream_rng(cfg.seed, Stream::Batch, it, 0);
        let mut batch = sample_training_batch(
            &self.split,
            &self.misclassified,
            &mut batch_rng,
            cfg.batch_size / group,
            cfg.curriculum_fraction,
        );
        if group > 1 {
            batch.episodes = batch.episodes.iter().flat_map(|&e| core::iter::repeat(e).take(group)).collect();
        }
        let mut rngs: Vec<StreamRng> = (0..batch.episodes.len() as u64)
            .map(|i| stream_rng(cfg.seed, Stream::Rollout, it, i))
            .collect();
        let Agents { qbot, abot } = &mut self.agents;
        let mut rollout = run_batch(qbot, abot, &batch.episodes, Decoding::Sample(&mut rngs), &cfg.rewards)?;
        let rewards: Vec<f64> = rollout.transcripts.iter().map(|t| t.reward).collect();
        let mean_reward = rewards.iter().sum::<f64>() / rewards.len() as f64;
        let baseline = |r: &[f64]| cfg.baseline.values(r, group);
        let (mut gq, mut ga) = match cfg.estimator {
            Estimator::Reinforce => {
                let b = baseline(&rewards);
                let weights = reinforce_weights(&rewards, &b);
                rollout.regularized_gradients(qbot, abot, &weights, cfg.entropy_coef)?
            }
            Estimator::ExpectedPrediction => {
                let (q, a, _) =
                    rollout.expected_reward_gradients(qbot, abot, &cfg.rewards, &baseline, cfg.entropy_coef)?;
                (q, a)
            }
        };
        drop(rollout);
        clip_gradients(&mut gq, cfg.clip);
        clip_gradients(&mut ga, cfg.clip);
        adam_step(&mut qbot.params, &gq, &mut self.q_adam)?;
        adam_step(&mut abot.params, &ga, &mut self.a_adam)?;
        self.iteration += 1;
        if !qbot.params.is_finite() {
            return Err(TrainError::Diverged { iteration: self.iteration, agent: "Q-bot" });
        }
        if !abot.params.is_finite() {
            return Err(TrainError::Diverged { iteration: self.iteration, agent: "A-bot" });
        }

        let record = if self.iteration % cfg.eval_every == 0 {
            let eval = self.evaluate_grid()?;
            self.misclassified = eval.train.misclassified();
            if self.iteration % cfg.snapshot_every == 0 {
                self.snapshots.push(eval.snapshot(self.iteration));
            }
            if eval.train.both_pct >= 100.0 {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
            MetricRecord {
                iteration: self.iteration,
                train_both: eval.train.both_pct,
                train_one: eval.train.one_pct,
                test_both: eval.test.both_pct,
                test_one: eval.test.one_pct,
                mean_reward,
            }
        } else {
            let prev = self.history.last().copied().unwrap_or(MetricRecord {
                iteration: 0,
                train_both: 0.0,
                train_one: 0.0,
                test_both: 0.0,
                test_one: 0.0,
                mean_reward,
            });
            MetricRecord {
                iteration: self.iteration,
                mean_reward,
                ..prev
            }
        };
        self.history.push(record);
        Ok(record)
    }

    /// Iterate until converged or out of epochs; `observer` sees the state
    /// after every iteration.
    pub fn run(&mut self, mut observer: impl FnMut(&TrainingState)) -> Result<(), TrainError> {
        while !self.is_finished() {
            self.train_iteration()?;
            observer(self);
        }
        Ok(())
    }

    fn evaluate_grid(&self) -> Result<GridEvaluation, AgentError> {
        let episodes = snapshot_episodes();
        let transcripts = self.agents.play_greedy(&episodes)?;
        Ok(GridEvaluation::new(&self.split, transcripts))
    }
}

struct GridEvaluation {
    transcripts: Vec<DialogTranscript>,
    train: AccuracyReport,
    test: AccuracyReport,
}

impl GridEvaluation {
    fn new(split: &DatasetSplit, transcripts: Vec<DialogTranscript>) -> Self {
        let train_set: BTreeSet<_> = split.train.iter().copied().collect();
        let train = AccuracyReport::from_transcripts(transcripts.iter().filter(|t| train_set.contains(&t.instance)));
        let test = AccuracyReport::from_transcripts(transcripts.iter().filter(|t| !train_set.contains(&t.instance)));
        GridEvaluation { transcripts, train, test }
    }

    fn snapshot(&self, iteration: u64) -> TreeSnapshot {
        TreeSnapshot {
            iteration,
            train_both: self.train.both_pct,
            test_both: self.test.both_pct,
            paths: self
                .transcripts
                .iter()
                .map(|t| [t.questions[0], t.answers[0], t.questions[1], t.answers[1]].map(|x| x as u16))
                .collect(),
            correct: self.transcripts.iter().map(|t| t.is_correct()).collect(),
        }
    }
}

/// Per-episode weights on `log π` whose gradient, descended, is the
/// REINFORCE ascent direction: `−(R_b − b_b) / B`.
pub fn reinforce_weights(rewards: &[f64], baseline: &[f64]) -> Vec<f64> {
    let n = rewards.len() as f64;
    rewards.iter().zip(baseline).map(|(r, b)| -(r - b) / n).collect()
}

/// Single-episode REINFORCE gradient `−R · ∇ log π(actions)` for each agent,
/// with the actions and reward taken from the transcript.
pub fn episode_gradient(
    qbot: &QBot,
    abot: &ABot,
    transcript: &DialogTranscript,
) -> Result<(Gradients, Gradients), AgentError> {
    let mut rollout = replay(qbot, abot, core::slice::from_ref(transcript), &RewardScheme::default())?;
    rollout.weighted_log_prob_gradients(qbot, abot, &[-transcript.reward])
}
