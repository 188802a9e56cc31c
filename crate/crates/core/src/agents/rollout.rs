use alloc::vec::Vec;

use super::{ABot, AgentError, Decoding, DialogTranscript, QBot, Script};
use crate::numcore::{Gradients, Graph, Inputs, Var};
use crate::world::{ground_truth, AttrValue, Episode, GroundTruth, ObjectInstance, RewardScheme, Task};

/// A played batch together with both agents' recorded graphs.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub q_graph: Graph,
    pub a_graph: Graph,
    /// Per-episode sum of Q-bot action log-probs (questions and both
    /// prediction steps), `B × 1`.
    pub q_log_prob: Var,
    /// Per-episode sum of A-bot answer log-probs, `B × 1`.
    pub a_log_prob: Var,
    /// `(probs, log_probs)` of every Q-bot decision head.
    pub q_heads: Vec<(Var, Var)>,
    /// Per-episode sum of Q-bot question log-probs, `B × 1`.
    pub q_question_log_prob: Var,
    /// Prediction distributions, `B × 12` each.
    pub prediction_probs: [Var; 2],
    pub a_heads: Vec<(Var, Var)>,
    pub transcripts: Vec<DialogTranscript>,
}

impl Rollout {
    /// Gradients of `Σ_b weights[b] · log π(actions_b)` for each agent.
    ///
    /// With `weights[b] = −R_b / B` this is the REINFORCE surrogate whose
    /// descent direction ascends expected reward.
    pub fn weighted_log_prob_gradients(
        &mut self,
        qbot: &QBot,
        abot: &ABot,
        weights: &[f64],
    ) -> Result<(Gradients, Gradients), AgentError> {
        self.regularized_gradients(qbot, abot, weights, 0.0)
    }

    /// As [`weighted_log_prob_gradients`](Self::weighted_log_prob_gradients),
    /// minus `entropy_coef` times the batch-mean entropy of every decision.
    pub fn regularized_gradients(
        &mut self,
        qbot: &QBot,
        abot: &ABot,
        weights: &[f64],
        entropy_coef: f64,
    ) -> Result<(Gradients, Gradients), AgentError> {
        let mut q = Gradients::zeros_like(&qbot.params);
        let mut a = Gradients::zeros_like(&abot.params);
        let q_heads = if entropy_coef == 0.0 { &[][..] } else { &self.q_heads[..] };
        let a_heads = if entropy_coef == 0.0 { &[][..] } else { &self.a_heads[..] };
        let objective = Objective { weights, entropy_coef, heads: q_heads };
        objective.backprop(&mut self.q_graph, &qbot.params, self.q_log_prob, &mut q)?;
        let objective = Objective { heads: a_heads, ..objective };
        objective.backprop(&mut self.a_graph, &abot.params, self.a_log_prob, &mut a)?;
        Ok((q, a))
    }
}

impl Rollout {
    /// Gradients with the final prediction summed out exactly.
    ///
    /// Given a dialog, the expected reward over the Q-bot's two prediction
    /// draws is `wrong + (correct − wrong) · P(w₁) · P(w₂)`. Dialog tokens are
    /// reinforced with that expectation (minus `baseline`, one value per
    /// episode) and the prediction head receives the exact gradient of the
    /// success probability. Returns the per-episode expected rewards too.
    ///
    /// The loss is the negated batch mean, so descent ascends expected reward.
    pub fn expected_reward_gradients(
        &mut self,
        qbot: &QBot,
        abot: &ABot,
        rewards: &RewardScheme,
        baseline: &dyn Fn(&[f64]) -> Vec<f64>,
        entropy_coef: f64,
    ) -> Result<(Gradients, Gradients, Vec<f64>), AgentError> {
        let rows = self.transcripts.len();
        let truth: Vec<GroundTruth> = self.transcripts.iter().map(|t| t.truth()).collect();
        let first: Vec<usize> = truth.iter().map(|t| t.0.index()).collect();
        let second: Vec<usize> = truth.iter().map(|t| t.1.index()).collect();
        let g = &mut self.q_graph;
        let p1 = g.pick(self.prediction_probs[0], &first)?;
        let p2 = g.pick(self.prediction_probs[1], &second)?;
        let success = g.mul(p1, p2)?;
        g.forward(&qbot.params, &Inputs::new())?;
        let gain = rewards.correct - rewards.wrong;
        let expected: Vec<f64> = g.value(success).iter().map(|p| rewards.wrong + gain * p).collect();
        let b = baseline(&expected);
        let n = rows as f64;
        let weights: Vec<f64> = expected.iter().zip(&b).map(|(r, b)| -(r - b) / n).collect();

        let mut q = Gradients::zeros_like(&qbot.params);
        let mut a = Gradients::zeros_like(&abot.params);
        let question_heads = &self.q_heads[..self.q_heads.len() - 2];
        let objective = Objective {
            weights: &weights,
            entropy_coef,
            heads: if entropy_coef == 0.0 { &[] } else { question_heads },
        };
        let s = self.q_graph.sum(success);
        let success_term = self.q_graph.scale(s, -gain / n);
        objective.backprop_with(&mut self.q_graph, &qbot.params, self.q_question_log_prob, Some(success_term), &mut q)?;
        let objective = Objective {
            heads: if entropy_coef == 0.0 { &[] } else { &self.a_heads[..] },
            ..objective
        };
        objective.backprop(&mut self.a_graph, &abot.params, self.a_log_prob, &mut a)?;
        Ok((q, a, expected))
    }
}

#[derive(Clone, Copy)]
struct Objective<'a> {
    weights: &'a [f64],
    entropy_coef: f64,
    heads: &'a [(Var, Var)],
}

impl Objective<'_> {
    fn backprop(
        &self,
        g: &mut Graph,
        params: &crate::numcore::ParamSet,
        log_prob: Var,
        grads: &mut Gradients,
    ) -> Result<(), AgentError> {
        self.backprop_with(g, params, log_prob, None, grads)
    }

    fn backprop_with(
        &self,
        g: &mut Graph,
        params: &crate::numcore::ParamSet,
        log_prob: Var,
        extra: Option<Var>,
        grads: &mut Gradients,
    ) -> Result<(), AgentError> {
        let rows = g.shape(log_prob).0;
        let w = g.constant(rows, 1, self.weights.to_vec())?;
        let weighted = g.mul(log_prob, w)?;
        let mut total = g.sum(weighted);
        if let Some(extra) = extra {
            total = g.add(total, extra)?;
        }
        for &(p, lp) in self.heads {
            // Σ p log p = −H, summed over the batch
            let plogp = g.mul(p, lp)?;
            let neg_entropy = g.sum(plogp);
            let term = g.scale(neg_entropy, self.entropy_coef / rows as f64);
            total = g.add(total, term)?;
        }
        g.forward(params, &Inputs::new())?;
        g.backward(total, 1.0, grads)?;
        Ok(())
    }
}

fn sum_columns(g: &mut Graph, terms: &[Var]) -> Result<Var, AgentError> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = g.add(acc, t)?;
    }
    Ok(acc)
}

/// Play `episodes` as one batch: `rounds` × (question, answer), then the
/// two-step prediction, then the shared reward.
pub fn run_batch(
    qbot: &QBot,
    abot: &ABot,
    episodes: &[Episode],
    mut decoding: Decoding<'_>,
    rewards: &RewardScheme,
) -> Result<Rollout, AgentError> {
    let (qc, ac) = (qbot.config, abot.config);
    if qc.q_vocab != ac.q_vocab || qc.a_vocab != ac.a_vocab || qc.rounds != ac.rounds {
        return Err(AgentError::Config(alloc::format!(
            "Q-bot and A-bot disagree on vocabularies or rounds: {qc:?} vs {ac:?}"
        )));
    }
    if episodes.is_empty() {
        return Err(AgentError::Config("empty batch".into()));
    }
    let rows = episodes.len();
    let instances: Vec<ObjectInstance> = episodes.iter().map(|e| e.0).collect();
    let tasks: Vec<Task> = episodes.iter().map(|e| e.1).collect();

    let mut qg = Graph::new();
    let mut ag = Graph::new();
    let mut q_state = qbot.init_state(&mut qg, &tasks)?;
    let encoding = abot.encode_instances(&mut ag, &instances)?;
    let mut a_state = None;

    let mut q_terms = Vec::new();
    let mut a_terms = Vec::new();
    let mut q_heads = Vec::new();
    let mut a_heads = Vec::new();
    let mut questions = Vec::with_capacity(qc.rounds);
    let mut answers = Vec::with_capacity(qc.rounds);
    for _ in 0..qc.rounds {
        let q = qbot.speak(&mut qg, q_state, decoding.reborrow())?;
        let (a, next) = abot.respond(&mut ag, a_state, &q.tokens, encoding, decoding.reborrow())?;
        a_state = Some(next);
        q_state = qbot.listen(&mut qg, q_state, &q.tokens, &a.tokens)?;
        q_terms.push(q.log_prob);
        a_terms.push(a.log_prob);
        q_heads.push((q.probs, q.log_probs));
        a_heads.push((a.probs, a.log_probs));
        questions.push(q);
        answers.push(a);
    }
    let [p1, p2] = qbot.predict(&mut qg, q_state, &tasks, decoding.reborrow())?;
    q_terms.push(p1.log_prob);
    q_terms.push(p2.log_prob);
    q_heads.push((p1.probs, p1.log_probs));
    q_heads.push((p2.probs, p2.log_probs));
    let q_question_log_prob = sum_columns(&mut qg, &q_terms[..qc.rounds])?;
    let q_log_prob = sum_columns(&mut qg, &q_terms)?;
    let a_log_prob = sum_columns(&mut ag, &a_terms)?;
    qg.forward(&qbot.params, &Inputs::new())?;
    ag.forward(&abot.params, &Inputs::new())?;

    let mut transcripts = Vec::with_capacity(rows);
    for (r, &(instance, task)) in episodes.iter().enumerate() {
        let prediction = GroundTruth(AttrValue(p1.tokens[r] as u8), AttrValue(p2.tokens[r] as u8));
        transcripts.push(DialogTranscript {
            task,
            instance,
            questions: questions.iter().map(|c| c.tokens[r]).collect(),
            answers: answers.iter().map(|c| c.tokens[r]).collect(),
            prediction,
            question_log_probs: questions.iter().map(|c| qg.value(c.log_prob)[r]).collect(),
            answer_log_probs: answers.iter().map(|c| ag.value(c.log_prob)[r]).collect(),
            prediction_log_probs: [qg.value(p1.log_prob)[r], qg.value(p2.log_prob)[r]],
            reward: rewards.reward(prediction, ground_truth(instance, task)),
        });
    }
    Ok(Rollout {
        q_graph: qg,
        a_graph: ag,
        q_log_prob,
        a_log_prob,
        q_heads,
        q_question_log_prob,
        prediction_probs: [p1.probs, p2.probs],
        a_heads,
        transcripts,
    })
}

/// Play a single game.
pub fn run_episode(
    qbot: &QBot,
    abot: &ABot,
    instance: ObjectInstance,
    task: Task,
    decoding: Decoding<'_>,
) -> Result<DialogTranscript, AgentError> {
    let mut r = run_batch(qbot, abot, &[(instance, task)], decoding, &RewardScheme::default())?;
    Ok(r.transcripts.remove(0))
}

/// Rebuild the graphs of recorded transcripts by forcing their actions.
pub fn replay(
    qbot: &QBot,
    abot: &ABot,
    transcripts: &[DialogTranscript],
    rewards: &RewardScheme,
) -> Result<Rollout, AgentError> {
    let rounds = qbot.config.rounds;
    for t in transcripts {
        if t.questions.len() != rounds
            || t.answers.len() != rounds
            || t.question_log_probs.len() != rounds
            || t.answer_log_probs.len() != rounds
        {
            return Err(AgentError::IncompleteTranscript);
        }
    }
    let episodes: Vec<Episode> = transcripts.iter().map(|t| (t.instance, t.task)).collect();
    let mut script = Script::from_transcripts(transcripts);
    run_batch(qbot, abot, &episodes, Decoding::Forced(&mut script), rewards)
}
