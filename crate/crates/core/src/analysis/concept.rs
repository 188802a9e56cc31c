use core::fmt;

use crate::world::{Attribute, AttrValue, Episode, Task, NUM_ATTRIBUTES};

/// Most specific pattern covering a set of same-task tuples: each instance
/// slot is a value or a wildcard (`None`); the task is always fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Concept {
    pub slots: [Option<AttrValue>; NUM_ATTRIBUTES],
    pub task: Task,
}

impl Concept {
    pub fn of(episode: Episode) -> Self {
        let (instance, task) = episode;
        Concept {
            slots: instance.values().map(Some),
            task,
        }
    }

    pub fn matches(&self, episode: Episode) -> bool {
        let (instance, task) = episode;
        task == self.task
            && Attribute::ALL
                .iter()
                .zip(&self.slots)
                .all(|(&a, s)| s.map_or(true, |v| instance.value(a) == v))
    }

    /// Smallest generalization also covering `episode`; `None` across tasks.
    pub fn generalize(&self, episode: Episode) -> Option<Self> {
        if episode.1 != self.task {
            return None;
        }
        let mut out = *self;
        for (slot, a) in out.slots.iter_mut().zip(Attribute::ALL) {
            if *slot != Some(episode.0.value(a)) {
                *slot = None;
            }
        }
        Some(out)
    }

    pub fn wildcards(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }
}

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for s in &self.slots {
            match s {
                Some(v) => write!(f, "{v}, ")?,
                None => f.write_str("*, ")?,
            }
        }
        write!(f, "{}, {})", self.task.first, self.task.second)
    }
}

/// Common pattern of `tuples`; `None` when empty or when tasks differ.
pub fn leaf_concept(tuples: &[Episode]) -> Option<Concept> {
    let (&first, rest) = tuples.split_first()?;
    rest.iter().try_fold(Concept::of(first), |c, &e| c.generalize(e))
}

/// Every tuple satisfies `concept`. An empty node is pure.
pub fn is_pure(tuples: &[Episode], concept: &Concept) -> bool {
    tuples.iter().all(|&e| concept.matches(e))
}
