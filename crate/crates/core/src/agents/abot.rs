use alloc::format;
use alloc::vec::Vec;

use super::qbot::lookup;
use super::{check_tokens, choose, AgentConfig, AgentError, Choice, Decoding};
use crate::numcore::{xavier_init, Graph, GraphError, Inputs, LstmCell, LstmState, ParamId, ParamSet, StreamRng, Tensor, Var};
use crate::world::{ObjectInstance, NUM_ATTRIBUTES, NUM_VALUES};

/// The answerer. It sees the object, listens to each question together with
/// the instance encoding, answers, and then listens to its own answer.
///
/// Parameters:
/// - `attr_embed` (12 × A): one embedding per attribute value; the instance
///   encoding concatenates the three values' rows (3A = 60 by default)
/// - `token_embed` ((|V_Q|+|V_A|) × E): independent of Q-bot's table
/// - `listener.{w,b}`: LSTM over `[emb(token), instance]`
/// - `speaker.{w,b}`: hidden → |V_A| logits
#[derive(Clone, Debug, PartialEq)]
pub struct ABot {
    pub config: AgentConfig,
    pub params: ParamSet,
    layout: Layout,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layout {
    attr_embed: ParamId,
    token_embed: ParamId,
    listener: LstmCell,
    speaker_w: ParamId,
    speaker_b: ParamId,
}

impl ABot {
    pub fn new(config: AgentConfig, rng: &mut StreamRng) -> Self {
        let (e, h, a) = (config.token_embed_dim, config.hidden_dim, config.attr_embed_dim);
        let mut params = ParamSet::new();
        let attr_embed = params.add("attr_embed", xavier_init(&[NUM_VALUES, a], rng).expect("positive sizes"));
        let token_embed = params.add(
            "token_embed",
            xavier_init(&[config.q_vocab + config.a_vocab, e], rng).expect("positive sizes"),
        );
        let listener = LstmCell::register(&mut params, "listener", e + NUM_ATTRIBUTES * a, h, rng);
        let speaker_w = params.add("speaker.w", xavier_init(&[config.a_vocab, h], rng).expect("positive sizes"));
        let speaker_b = params.add("speaker.b", Tensor::zeros(&[config.a_vocab]).expect("positive sizes"));
        ABot {
            config,
            params,
            layout: Layout {
                attr_embed,
                token_embed,
                listener,
                speaker_w,
                speaker_b,
            },
        }
    }

    pub fn from_params(config: AgentConfig, params: ParamSet) -> Result<Self, AgentError> {
        config.validate()?;
        let (e, h, a) = (config.token_embed_dim, config.hidden_dim, config.attr_embed_dim);
        let input_dim = e + NUM_ATTRIBUTES * a;
        let layout = Layout {
            attr_embed: lookup(&params, "attr_embed", &[NUM_VALUES, a])?,
            token_embed: lookup(&params, "token_embed", &[config.q_vocab + config.a_vocab, e])?,
            listener: LstmCell {
                weight: lookup(&params, "listener.w", &[4 * h, input_dim + h])?,
                bias: lookup(&params, "listener.b", &[4 * h])?,
                input_dim,
                hidden_dim: h,
            },
            speaker_w: lookup(&params, "speaker.w", &[config.a_vocab, h])?,
            speaker_b: lookup(&params, "speaker.b", &[config.a_vocab])?,
        };
        if params.len() != 6 {
            return Err(AgentError::Layout(format!("expected 6 A-bot tensors, found {}", params.len())));
        }
        Ok(ABot { config, params, layout })
    }

    pub fn token_embedding(&self) -> ParamId {
        self.layout.token_embed
    }

    pub fn speaker_weights(&self) -> (ParamId, ParamId) {
        (self.layout.speaker_w, self.layout.speaker_b)
    }

    /// `B × 3A` concatenation of the three value embeddings.
    pub fn encode_instances(&self, g: &mut Graph, instances: &[ObjectInstance]) -> Result<Var, GraphError> {
        let table = g.param(&self.params, self.layout.attr_embed);
        let mut parts = Vec::with_capacity(NUM_ATTRIBUTES);
        for attr in crate::world::Attribute::ALL {
            let rows: Vec<usize> = instances.iter().map(|i| i.value(attr).index()).collect();
            parts.push(g.gather(table, &rows)?);
        }
        g.concat(&parts)
    }

    fn listen(&self, g: &mut Graph, rows: &[usize], encoding: Var, state: LstmState) -> Result<LstmState, GraphError> {
        let table = g.param(&self.params, self.layout.token_embed);
        let tok = g.gather(table, rows)?;
        let x = g.concat(&[tok, encoding])?;
        self.layout.listener.step(g, &self.params, x, state)
    }

    /// Hear `questions`, answer, and listen to the answer.
    ///
    /// `state` is the carried recurrent state (`None` at the start of a
    /// dialog). A memoryless A-bot ignores it and starts from zeros.
    pub fn respond(
        &self,
        g: &mut Graph,
        state: Option<LstmState>,
        questions: &[usize],
        encoding: Var,
        mut decoding: Decoding<'_>,
    ) -> Result<(Choice, LstmState), AgentError> {
        check_tokens(questions, self.config.q_vocab)?;
        let rows = questions.len();
        let start = match state {
            Some(s) if !self.config.memoryless_abot => s,
            _ => self.layout.listener.zero_state(g, rows),
        };
        let heard = self.listen(g, questions, encoding, start)?;
        let w = g.param(&self.params, self.layout.speaker_w);
        let b = g.param(&self.params, self.layout.speaker_b);
        let logits = g.affine(w, heard.h, Some(b))?;
        let choice = choose(g, &self.params, logits, &mut decoding)?;
        // a memoryless A-bot drops its state before the next question, so
        // listening to its own answer would be dead computation
        if self.config.memoryless_abot {
            return Ok((choice, heard));
        }
        let shifted: Vec<usize> = choice.tokens.iter().map(|a| a + self.config.q_vocab).collect();
        let after = self.listen(g, &shifted, encoding, heard)?;
        g.forward(&self.params, &Inputs::new())?;
        Ok((choice, after))
    }

    /// Greedy answers to a fixed question sequence about one instance.
    pub fn greedy_answers(&self, questions: &[usize], instance: ObjectInstance) -> Result<Vec<usize>, AgentError> {
        let mut g = Graph::new();
        let enc = self.encode_instances(&mut g, &[instance])?;
        let mut state = None;
        let mut out = Vec::with_capacity(questions.len());
        for &q in questions {
            let (choice, next) = self.respond(&mut g, state, &[q], enc, Decoding::Greedy)?;
            out.push(choice.tokens[0]);
            state = Some(next);
        }
        Ok(out)
    }
}
