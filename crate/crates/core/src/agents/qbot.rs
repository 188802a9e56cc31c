use alloc::format;
use alloc::vec::Vec;

use super::{check_tokens, choose, AgentConfig, AgentError, Choice, Decoding};
use crate::numcore::{xavier_init, Graph, GraphError, LstmCell, LstmState, ParamId, ParamSet, StreamRng, Tensor};
use crate::world::{Task, NUM_TASKS, NUM_VALUES};

/// The questioner. It knows the task, asks questions, listens to
/// `(question, answer)` pairs and finally predicts two attribute values.
///
/// Parameters:
/// - `task_embed` (6 × 2E): task one-hot into the listener's input space
/// - `token_embed` ((|V_Q|+|V_A|) × E): its own embedding of both vocabularies
/// - `listener.{w,b}`: LSTM over `[emb(q), emb(a)]`
/// - `speaker.{w,b}`: hidden → |V_Q| logits
/// - `predictor.{w,b}`: LSTM over the raw task one-hot, started from the
///   final listener state and unrolled twice
/// - `predict_head.{w,b}`: hidden → 12 attribute-value logits
#[derive(Clone, Debug, PartialEq)]
pub struct QBot {
    pub config: AgentConfig,
    pub params: ParamSet,
    layout: Layout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    task_embed: ParamId,
    token_embed: ParamId,
    listener: LstmCell,
    speaker_w: ParamId,
    speaker_b: ParamId,
    predictor: LstmCell,
    head_w: ParamId,
    head_b: ParamId,
}

fn dense(params: &mut ParamSet, name: &str, out: usize, inp: usize, rng: &mut StreamRng) -> (ParamId, ParamId) {
    let w = params.add(format!("{name}.w"), xavier_init(&[out, inp], rng).expect("positive sizes"));
    let b = params.add(format!("{name}.b"), Tensor::zeros(&[out]).expect("positive sizes"));
    (w, b)
}

pub(crate) fn lookup(params: &ParamSet, name: &str, shape: &[usize]) -> Result<ParamId, AgentError> {
    let id = params
        .find(name)
        .ok_or_else(|| AgentError::Layout(format!("missing parameter `{name}`")))?;
    if params.get(id).shape != shape {
        return Err(AgentError::Layout(format!(
            "`{name}` has shape {:?}, expected {shape:?}",
            params.get(id).shape
        )));
    }
    Ok(id)
}

impl QBot {
    pub fn new(config: AgentConfig, rng: &mut StreamRng) -> Self {
        let (e, h) = (config.token_embed_dim, config.hidden_dim);
        let mut params = ParamSet::new();
        let task_embed = params.add("task_embed", xavier_init(&[NUM_TASKS, 2 * e], rng).expect("positive sizes"));
        let token_embed = params.add(
            "token_embed",
            xavier_init(&[config.q_vocab + config.a_vocab, e], rng).expect("positive sizes"),
        );
        let listener = LstmCell::register(&mut params, "listener", 2 * e, h, rng);
        let (speaker_w, speaker_b) = dense(&mut params, "speaker", config.q_vocab, h, rng);
        let predictor = LstmCell::register(&mut params, "predictor", NUM_TASKS, h, rng);
        let (head_w, head_b) = dense(&mut params, "predict_head", NUM_VALUES, h, rng);
        QBot {
            config,
            params,
            layout: Layout {
                task_embed,
                token_embed,
                listener,
                speaker_w,
                speaker_b,
                predictor,
                head_w,
                head_b,
            },
        }
    }

    /// Rebuild from stored parameters, checking names and shapes.
    pub fn from_params(config: AgentConfig, params: ParamSet) -> Result<Self, AgentError> {
        config.validate()?;
        let (e, h) = (config.token_embed_dim, config.hidden_dim);
        let cell = |name: &str, input_dim: usize| -> Result<LstmCell, AgentError> {
            Ok(LstmCell {
                weight: lookup(&params, &format!("{name}.w"), &[4 * h, input_dim + h])?,
                bias: lookup(&params, &format!("{name}.b"), &[4 * h])?,
                input_dim,
                hidden_dim: h,
            })
        };
        let layout = Layout {
            task_embed: lookup(&params, "task_embed", &[NUM_TASKS, 2 * e])?,
            token_embed: lookup(&params, "token_embed", &[config.q_vocab + config.a_vocab, e])?,
            listener: cell("listener", 2 * e)?,
            speaker_w: lookup(&params, "speaker.w", &[config.q_vocab, h])?,
            speaker_b: lookup(&params, "speaker.b", &[config.q_vocab])?,
            predictor: cell("predictor", NUM_TASKS)?,
            head_w: lookup(&params, "predict_head.w", &[NUM_VALUES, h])?,
            head_b: lookup(&params, "predict_head.b", &[NUM_VALUES])?,
        };
        if params.len() != 10 {
            return Err(AgentError::Layout(format!("expected 10 Q-bot tensors, found {}", params.len())));
        }
        Ok(QBot { config, params, layout })
    }

    pub fn speaker_weights(&self) -> (ParamId, ParamId) {
        (self.layout.speaker_w, self.layout.speaker_b)
    }

    pub fn predict_head_weights(&self) -> (ParamId, ParamId) {
        (self.layout.head_w, self.layout.head_b)
    }

    pub fn token_embedding(&self) -> ParamId {
        self.layout.token_embed
    }

    /// Listener advanced one step from the zero state on the embedded task.
    pub fn init_state(&self, g: &mut Graph, tasks: &[Task]) -> Result<LstmState, GraphError> {
        let table = g.param(&self.params, self.layout.task_embed);
        let rows: Vec<usize> = tasks.iter().map(|t| t.index()).collect();
        let x = g.gather(table, &rows)?;
        let zero = self.layout.listener.zero_state(g, tasks.len());
        self.layout.listener.step(g, &self.params, x, zero)
    }

    /// Question distribution from the current state, and the chosen tokens.
    pub fn speak(&self, g: &mut Graph, state: LstmState, mut decoding: Decoding<'_>) -> Result<Choice, AgentError> {
        let w = g.param(&self.params, self.layout.speaker_w);
        let b = g.param(&self.params, self.layout.speaker_b);
        let logits = g.affine(w, state.h, Some(b))?;
        choose(g, &self.params, logits, &mut decoding)
    }

    /// One listener step on `[emb(q), emb(|V_Q| + a)]`.
    pub fn listen(
        &self,
        g: &mut Graph,
        state: LstmState,
        questions: &[usize],
        answers: &[usize],
    ) -> Result<LstmState, AgentError> {
        check_tokens(questions, self.config.q_vocab)?;
        check_tokens(answers, self.config.a_vocab)?;
        let table = g.param(&self.params, self.layout.token_embed);
        let q = g.gather(table, questions)?;
        let shifted: Vec<usize> = answers.iter().map(|a| a + self.config.q_vocab).collect();
        let a = g.gather(table, &shifted)?;
        let x = g.concat(&[q, a])?;
        Ok(self.layout.listener.step(g, &self.params, x, state)?)
    }

    /// Two prediction steps, each a 12-way choice over attribute values.
    /// The task one-hot is the input at both steps; the second step sees
    /// the first only through the recurrent state.
    pub fn predict(
        &self,
        g: &mut Graph,
        state: LstmState,
        tasks: &[Task],
        mut decoding: Decoding<'_>,
    ) -> Result<[Choice; 2], AgentError> {
        let mut onehot = alloc::vec![0.0; tasks.len() * NUM_TASKS];
        for (r, t) in tasks.iter().enumerate() {
            onehot[r * NUM_TASKS + t.index()] = 1.0;
        }
        let x = g.constant(tasks.len(), NUM_TASKS, onehot)?;
        let w = g.param(&self.params, self.layout.head_w);
        let b = g.param(&self.params, self.layout.head_b);
        let s1 = self.layout.predictor.step(g, &self.params, x, state)?;
        let logits1 = g.affine(w, s1.h, Some(b))?;
        let first = choose(g, &self.params, logits1, &mut decoding)?;
        let s2 = self.layout.predictor.step(g, &self.params, x, s1)?;
        let logits2 = g.affine(w, s2.h, Some(b))?;
        let second = choose(g, &self.params, logits2, &mut decoding)?;
        Ok([first, second])
    }
}
