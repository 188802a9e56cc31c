use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::agents::{AgentError, DialogTranscript, Team};
use crate::training::TreeSnapshot;
use crate::world::{Episode, ObjectInstance, Task};

/// `[q1, a1, q2, a2]`.
pub type DialogPath = [u16; 4];

pub const TREE_DEPTH: usize = 4;

/// Every two-round dialog as a root-to-leaf path, with the (instance, task)
/// pairs whose greedy dialog follows it stored at the leaf. Only occupied
/// leaves are materialized.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DialogTree {
    pub q_vocab: usize,
    pub a_vocab: usize,
    leaves: BTreeMap<DialogPath, Vec<Episode>>,
}

impl DialogTree {
    pub fn new(q_vocab: usize, a_vocab: usize) -> Self {
        DialogTree {
            q_vocab,
            a_vocab,
            leaves: BTreeMap::new(),
        }
    }

    pub fn from_transcripts(q_vocab: usize, a_vocab: usize, transcripts: &[DialogTranscript]) -> Result<Self, AgentError> {
        let mut tree = DialogTree::new(q_vocab, a_vocab);
        for t in transcripts {
            if t.questions.len() != 2 || t.answers.len() != 2 {
                return Err(AgentError::IncompleteTranscript);
            }
            let path = [t.questions[0], t.answers[0], t.questions[1], t.answers[1]].map(|x| x as u16);
            tree.insert(path, (t.instance, t.task))?;
        }
        Ok(tree)
    }

    /// Tree of a stored snapshot; `episodes[i]` followed `snapshot.paths[i]`.
    pub fn from_snapshot(
        q_vocab: usize,
        a_vocab: usize,
        snapshot: &TreeSnapshot,
        episodes: &[Episode],
    ) -> Result<Self, AgentError> {
        if snapshot.paths.len() != episodes.len() {
            return Err(AgentError::IncompleteTranscript);
        }
        let mut tree = DialogTree::new(q_vocab, a_vocab);
        for (&path, &ep) in snapshot.paths.iter().zip(episodes) {
            tree.insert(path, ep)?;
        }
        Ok(tree)
    }

    pub fn insert(&mut self, path: DialogPath, episode: Episode) -> Result<(), AgentError> {
        for (i, &tok) in path.iter().enumerate() {
            let vocab = if i % 2 == 0 { self.q_vocab } else { self.a_vocab };
            if tok as usize >= vocab {
                return Err(AgentError::InvalidToken { token: tok as usize, vocab });
            }
        }
        self.leaves.entry(path).or_default().push(episode);
        Ok(())
    }

    /// `|V_Q|² · |V_A|²`, occupied or not.
    pub fn leaf_count(&self) -> usize {
        self.q_vocab * self.q_vocab * self.a_vocab * self.a_vocab
    }

    pub fn depth(&self) -> usize {
        TREE_DEPTH
    }

    pub fn leaf(&self, path: &DialogPath) -> &[Episode] {
        self.leaves.get(path).map_or(&[], |v| v.as_slice())
    }

    pub fn occupied_leaves(&self) -> impl Iterator<Item = (&DialogPath, &Vec<Episode>)> {
        self.leaves.iter()
    }

    pub fn total_tuples(&self) -> usize {
        self.leaves.values().map(Vec::len).sum()
    }

    /// All tuples in the subtree under `prefix` (length 0..=4).
    pub fn subtree(&self, prefix: &[u16]) -> Vec<Episode> {
        self.leaves
            .iter()
            .filter(|(p, _)| p.starts_with(prefix))
            .flat_map(|(_, v)| v.iter().copied())
            .collect()
    }

    /// Subtree tuples of one task.
    pub fn subtree_for_task(&self, prefix: &[u16], task: Task) -> Vec<Episode> {
        self.subtree(prefix).into_iter().filter(|e| e.1 == task).collect()
    }

    pub fn path_of(&self, instance: ObjectInstance, task: Task) -> Option<DialogPath> {
        self.leaves
            .iter()
            .find(|(_, v)| v.contains(&(instance, task)))
            .map(|(p, _)| *p)
    }
}

/// Greedy dialog tree of `team` over `instances` × `tasks`.
pub fn build_dialog_tree<T: Team + ?Sized>(
    team: &T,
    instances: &[ObjectInstance],
    tasks: &[Task],
) -> Result<DialogTree, AgentError> {
    let episodes: Vec<Episode> = instances
        .iter()
        .flat_map(|&i| tasks.iter().map(move |&t| (i, t)))
        .collect();
    let (q, a) = team.vocab_sizes();
    let transcripts = team.play_greedy(&episodes)?;
    DialogTree::from_transcripts(q, a, &transcripts)
}
