use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::agents::{AgentError, Team};
use crate::world::{enumerate_instances, Attribute, Episode, Task, TASKS, VALUES_PER_ATTRIBUTE};

/// Greedy question pair the Q-bot uses for a task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuestionGrounding {
    pub task: Task,
    /// Most frequent `(q1, q2)` over all instances.
    pub questions: [usize; 2],
    /// Every instance gets the same pair.
    pub consistent: bool,
}

/// What an answer to one question token encodes.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnswerGrounding {
    pub question: usize,
    /// The first attribute whose value determines the answer, if any.
    pub attribute: Option<Attribute>,
    /// Answer token per value of `attribute`.
    pub tokens: Vec<usize>,
    pub injective: bool,
}

impl AnswerGrounding {
    pub fn consistent(&self) -> bool {
        self.attribute.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundingTable {
    pub q_vocab: usize,
    pub a_vocab: usize,
    pub questions: Vec<QuestionGrounding>,
    pub answers: Vec<AnswerGrounding>,
}

impl GroundingTable {
    /// `X`, `Y`, `Z` for up to three question tokens, numbers otherwise.
    pub fn question_label(&self, q: usize) -> String {
        if self.q_vocab <= 3 {
            String::from(["X", "Y", "Z"][q])
        } else {
            format!("{q}")
        }
    }

    /// Answers are shown 1-based.
    pub fn answer_label(a: usize) -> String {
        format!("{}", a + 1)
    }

    /// Question tokens used by some task.
    pub fn used_questions(&self) -> Vec<usize> {
        let mut used: Vec<usize> = self.questions.iter().flat_map(|g| g.questions).collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub fn answer(&self, question: usize) -> Option<&AnswerGrounding> {
        self.answers.iter().find(|a| a.question == question)
    }

    /// Every used question encodes one attribute, injectively.
    pub fn is_compositional(&self) -> bool {
        self.used_questions()
            .iter()
            .all(|&q| self.answer(q).is_some_and(|a| a.consistent() && a.injective))
    }
}

impl fmt::Display for GroundingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "A-bot")?;
        for a in &self.answers {
            let q = self.question_label(a.question);
            match a.attribute {
                Some(attr) => {
                    let pairs: Vec<String> = a
                        .tokens
                        .iter()
                        .enumerate()
                        .map(|(v, &t)| format!("{}->{}", crate::world::AttrValue::new(attr, v), Self::answer_label(t)))
                        .collect();
                    let note = if a.injective { "" } else { " (not injective)" };
                    writeln!(f, "  {q}: {attr}: {}{note}", pairs.join(" "))?;
                }
                None => writeln!(f, "  {q}: inconsistent")?,
            }
        }
        writeln!(f, "Q-bot")?;
        for g in &self.questions {
            let note = if g.consistent { "" } else { " (varies by instance)" };
            writeln!(
                f,
                "  {}: {}, {}{note}",
                g.task,
                self.question_label(g.questions[0]),
                self.question_label(g.questions[1])
            )?;
        }
        Ok(())
    }
}

/// Q-bot table from greedy dialogs over all 64 instances per task; A-bot
/// table by probing every question token on every instance from a fresh
/// state.
pub fn extract_grounding_tables<T: Team + ?Sized>(team: &T) -> Result<GroundingTable, AgentError> {
    let (q_vocab, a_vocab) = team.vocab_sizes();
    let instances = enumerate_instances();
    let mut questions = Vec::with_capacity(TASKS.len());
    for task in TASKS {
        let episodes: Vec<Episode> = instances.iter().map(|&i| (i, task)).collect();
        let mut counts: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for t in team.play_greedy(&episodes)? {
            if t.questions.len() < 2 {
                return Err(AgentError::IncompleteTranscript);
            }
            *counts.entry([t.questions[0], t.questions[1]]).or_default() += 1;
        }
        let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(q, _)| *q);
        questions.push(QuestionGrounding {
            task,
            questions: best.unwrap_or_default(),
            consistent: counts.len() == 1,
        });
    }

    let mut answers = Vec::with_capacity(q_vocab);
    for q in 0..q_vocab {
        let replies: Vec<usize> = instances
            .iter()
            .map(|&i| team.probe_answer(q, i))
            .collect::<Result<_, _>>()?;
        let mut grounding = AnswerGrounding {
            question: q,
            attribute: None,
            tokens: Vec::new(),
            injective: false,
        };
        for attr in Attribute::ALL {
            let mut map = [None; VALUES_PER_ATTRIBUTE];
            let functional = instances.iter().zip(&replies).all(|(inst, &r)| {
                let slot = &mut map[inst.value(attr).value()];
                *slot.get_or_insert(r) == r
            });
            if functional {
                let tokens: Vec<usize> = map.iter().map(|t| t.unwrap_or_default()).collect();
                let mut distinct = tokens.clone();
                distinct.sort_unstable();
                distinct.dedup();
                grounding.injective = distinct.len() == tokens.len();
                grounding.attribute = Some(attr);
                grounding.tokens = tokens;
                break;
            }
        }
        answers.push(grounding);
    }
    Ok(GroundingTable {
        q_vocab,
        a_vocab,
        questions,
        answers,
    })
}
