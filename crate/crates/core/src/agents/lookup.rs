use alloc::vec::Vec;

use super::{check_tokens, AgentError, DialogTranscript, Team};
use crate::world::{ground_truth, reward, Attribute, Episode, GroundTruth, ObjectInstance, Task, TASKS};

/// Deterministic table-driven agents.
///
/// Each question token asks about one attribute, and the A-bot answers with
/// a fixed token per value of that attribute. The Q-bot asks a fixed
/// question pair per task and decodes the answers back into values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LookupTeam {
    pub a_vocab: usize,
    /// `questions[task index]` = (q1, q2).
    pub questions: [[usize; 2]; 6],
    /// Attribute asked by each question token.
    pub question_attribute: Vec<Attribute>,
    /// `answers[q][value]` = answer token for `value` of `question_attribute[q]`.
    pub answers: Vec<[usize; 4]>,
}

/// Question tokens X, Y, Z.
pub const X: usize = 0;
pub const Y: usize = 1;
pub const Z: usize = 2;

impl LookupTeam {
    /// The compositional code learned with a memoryless A-bot and minimal
    /// vocabularies: X asks color, Y shape, Z style; answer `k` (0-based)
    /// names the `k`-th value of the asked attribute.
    pub fn table2() -> Self {
        let mut questions = [[0; 2]; 6];
        for (i, t) in TASKS.iter().enumerate() {
            use Attribute::*;
            questions[i] = match (t.first, t.second) {
                (Color, Shape) | (Shape, Color) => [Y, X],
                (Shape, Style) | (Style, Shape) => [Y, Z],
                (Color, Style) => [Z, X],
                (Style, Color) => [X, Z],
                _ => unreachable!("tasks have distinct attributes"),
            };
        }
        LookupTeam {
            a_vocab: 4,
            questions,
            question_attribute: alloc::vec![Attribute::Color, Attribute::Shape, Attribute::Style],
            answers: alloc::vec![[0, 1, 2, 3]; 3],
        }
    }

    fn answer(&self, question: usize, instance: ObjectInstance) -> usize {
        let attr = self.question_attribute[question];
        self.answers[question][instance.value(attr).value()]
    }

    /// Recover the value of `attr` from the dialog, if it was asked about.
    fn decode(&self, attr: Attribute, questions: &[usize; 2], answers: &[usize; 2]) -> crate::world::AttrValue {
        for (q, a) in questions.iter().zip(answers) {
            if self.question_attribute[*q] == attr {
                if let Some(v) = self.answers[*q].iter().position(|t| t == a) {
                    return crate::world::AttrValue::new(attr, v);
                }
            }
        }
        crate::world::AttrValue::new(attr, 0)
    }

    fn play(&self, instance: ObjectInstance, task: Task) -> DialogTranscript {
        let questions = self.questions[task.index()];
        let answers = questions.map(|q| self.answer(q, instance));
        let prediction = GroundTruth(
            self.decode(task.first, &questions, &answers),
            self.decode(task.second, &questions, &answers),
        );
        DialogTranscript {
            task,
            instance,
            questions: questions.to_vec(),
            answers: answers.to_vec(),
            prediction,
            question_log_probs: alloc::vec![0.0; 2],
            answer_log_probs: alloc::vec![0.0; 2],
            prediction_log_probs: [0.0; 2],
            reward: reward(prediction, ground_truth(instance, task)),
        }
    }
}

impl Team for LookupTeam {
    fn vocab_sizes(&self) -> (usize, usize) {
        (self.question_attribute.len(), self.a_vocab)
    }

    fn play_greedy(&self, episodes: &[Episode]) -> Result<Vec<DialogTranscript>, AgentError> {
        Ok(episodes.iter().map(|&(i, t)| self.play(i, t)).collect())
    }

    fn probe_answer(&self, question: usize, instance: ObjectInstance) -> Result<usize, AgentError> {
        check_tokens(&[question], self.question_attribute.len())?;
        Ok(self.answer(question, instance))
    }
}
