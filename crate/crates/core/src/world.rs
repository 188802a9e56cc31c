//! The synthetic Task & Talk world: 64 objects described by three
//! attributes, six ordered attribute-pair tasks, ground truth, reward,
//! the train/test split and curriculum batches.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::numcore::{stream_rng, uniform_index, Stream, StreamRng};

pub const NUM_ATTRIBUTES: usize = 3;
pub const VALUES_PER_ATTRIBUTE: usize = 4;
/// Size of the joint value vocabulary (12).
pub const NUM_VALUES: usize = NUM_ATTRIBUTES * VALUES_PER_ATTRIBUTE;
pub const NUM_INSTANCES: usize = 64;
pub const NUM_TASKS: usize = 6;
pub const TRAIN_SIZE: usize = 51;

pub const ATTRIBUTE_NAMES: [&str; NUM_ATTRIBUTES] = ["color", "shape", "style"];
pub const VALUE_NAMES: [[&str; VALUES_PER_ATTRIBUTE]; NUM_ATTRIBUTES] = [
    ["blue", "purple", "green", "red"],
    ["triangle", "square", "circle", "star"],
    ["dotted", "filled", "dashed", "solid"],
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Attribute {
    Color = 0,
    Shape = 1,
    Style = 2,
}

impl Attribute {
    pub const ALL: [Attribute; NUM_ATTRIBUTES] = [Attribute::Color, Attribute::Shape, Attribute::Style];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        ATTRIBUTE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ATTRIBUTE_NAMES.iter().position(|n| *n == name).map(|i| Self::ALL[i])
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the 12 attribute values, numbered `attribute * 4 + value`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttrValue(pub u8);

impl AttrValue {
    pub fn new(attribute: Attribute, value: usize) -> Self {
        assert!(value < VALUES_PER_ATTRIBUTE);
        AttrValue((attribute.index() * VALUES_PER_ATTRIBUTE + value) as u8)
    }

    pub fn attribute(self) -> Attribute {
        Attribute::ALL[self.0 as usize / VALUES_PER_ATTRIBUTE]
    }

    /// Position within its attribute, `0..4`.
    pub fn value(self) -> usize {
        self.0 as usize % VALUES_PER_ATTRIBUTE
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn name(self) -> &'static str {
        VALUE_NAMES[self.attribute().index()][self.value()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        (0..NUM_VALUES as u8).map(AttrValue).find(|v| v.name() == name)
    }
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An object: one value index per attribute in (color, shape, style) order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectInstance(pub [u8; NUM_ATTRIBUTES]);

impl ObjectInstance {
    pub fn new(color: usize, shape: usize, style: usize) -> Self {
        assert!(color < 4 && shape < 4 && style < 4, "attribute value out of range");
        ObjectInstance([color as u8, shape as u8, style as u8])
    }

    /// Mixed-radix index with color varying slowest.
    pub fn index(self) -> usize {
        let [c, s, t] = self.0;
        (c as usize * VALUES_PER_ATTRIBUTE + s as usize) * VALUES_PER_ATTRIBUTE + t as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < NUM_INSTANCES);
        ObjectInstance::new(i / 16, (i / 4) % 4, i % 4)
    }

    pub fn value(self, attribute: Attribute) -> AttrValue {
        AttrValue::new(attribute, self.0[attribute.index()] as usize)
    }

    pub fn values(self) -> [AttrValue; NUM_ATTRIBUTES] {
        Attribute::ALL.map(|a| self.value(a))
    }

    pub fn from_names(color: &str, shape: &str, style: &str) -> Option<Self> {
        let find = |a: usize, n: &str| VALUE_NAMES[a].iter().position(|v| *v == n);
        Some(ObjectInstance::new(find(0, color)?, find(1, shape)?, find(2, style)?))
    }
}

impl fmt::Display for ObjectInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [c, s, t] = self.values();
        write!(f, "({c}, {s}, {t})")
    }
}

/// Ordered pair of distinct attributes Q-bot has to report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Task {
    pub first: Attribute,
    pub second: Attribute,
}

/// Task order used everywhere (one-hot position = index here).
pub const TASKS: [Task; NUM_TASKS] = [
    Task::new_const(Attribute::Color, Attribute::Shape),
    Task::new_const(Attribute::Shape, Attribute::Color),
    Task::new_const(Attribute::Shape, Attribute::Style),
    Task::new_const(Attribute::Style, Attribute::Shape),
    Task::new_const(Attribute::Color, Attribute::Style),
    Task::new_const(Attribute::Style, Attribute::Color),
];

impl Task {
    const fn new_const(first: Attribute, second: Attribute) -> Self {
        Task { first, second }
    }

    pub fn new(first: Attribute, second: Attribute) -> Option<Self> {
        (first != second).then_some(Task { first, second })
    }

    pub fn index(self) -> usize {
        TASKS.iter().position(|t| *t == self).expect("tasks have distinct attributes")
    }

    pub fn from_index(i: usize) -> Option<Self> {
        TASKS.get(i).copied()
    }

    pub fn swapped(self) -> Self {
        Task {
            first: self.second,
            second: self.first,
        }
    }

    pub fn attributes(self) -> [Attribute; 2] {
        [self.first, self.second]
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.first, self.second)
    }
}

/// Ordered value pair, either the truth for a task or a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth(pub AttrValue, pub AttrValue);

impl GroundTruth {
    pub fn swapped(self) -> Self {
        GroundTruth(self.1, self.0)
    }

    pub fn as_array(self) -> [AttrValue; 2] {
        [self.0, self.1]
    }
}

impl fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

pub fn enumerate_instances() -> Vec<ObjectInstance> {
    (0..NUM_INSTANCES).map(ObjectInstance::from_index).collect()
}

pub fn enumerate_tasks() -> Vec<Task> {
    TASKS.to_vec()
}

pub fn ground_truth(instance: ObjectInstance, task: Task) -> GroundTruth {
    GroundTruth(instance.value(task.first), instance.value(task.second))
}

/// Reward for a prediction; both agents receive the same value.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardScheme {
    pub correct: f64,
    pub wrong: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme {
            correct: 1.0,
            wrong: -10.0,
        }
    }
}

impl RewardScheme {
    pub fn reward(&self, prediction: GroundTruth, truth: GroundTruth) -> f64 {
        if prediction == truth {
            self.correct
        } else {
            self.wrong
        }
    }
}

/// `+1` for an exact ordered match, `-10` otherwise.
pub fn reward(prediction: GroundTruth, truth: GroundTruth) -> f64 {
    RewardScheme::default().reward(prediction, truth)
}

/// An (instance, task) pair: one game.
pub type Episode = (ObjectInstance, Task);

/// Disjoint 51/13 partition of the 64 instances, both halves sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetSplit {
    pub train: Vec<ObjectInstance>,
    pub test: Vec<ObjectInstance>,
    pub seed: u64,
}

impl DatasetSplit {
    /// Every attribute value occurs in at least one training instance.
    pub fn covers_all_values(&self) -> bool {
        let seen: BTreeSet<AttrValue> = self.train.iter().flat_map(|i| i.values()).collect();
        seen.len() == NUM_VALUES
    }

    pub fn train_episodes(&self) -> Vec<Episode> {
        episodes_for(&self.train)
    }

    pub fn test_episodes(&self) -> Vec<Episode> {
        episodes_for(&self.test)
    }

    /// Structural validity: sizes, disjointness, coverage.
    pub fn is_valid(&self) -> bool {
        let all: BTreeSet<ObjectInstance> = self.train.iter().chain(&self.test).copied().collect();
        self.train.len() == TRAIN_SIZE
            && self.test.len() == NUM_INSTANCES - TRAIN_SIZE
            && all.len() == NUM_INSTANCES
            && self.covers_all_values()
    }
}

/// Every (instance, task) pair for `instances`, instance-major.
pub fn episodes_for(instances: &[ObjectInstance]) -> Vec<Episode> {
    instances
        .iter()
        .flat_map(|&i| TASKS.iter().map(move |&t| (i, t)))
        .collect()
}

/// Reproducible split: shuffle the 64 instances with the seed's split
/// stream, take the first 51 for training, and redraw (next attempt's
/// substream) until training covers every attribute value.
pub fn split_dataset(seed: u64) -> DatasetSplit {
    for attempt in 0.. {
        let mut rng = stream_rng(seed, Stream::Split, 0, attempt);
        let mut order = enumerate_instances();
        shuffle(&mut order, &mut rng);
        let mut train = order[..TRAIN_SIZE].to_vec();
        let mut test = order[TRAIN_SIZE..].to_vec();
        train.sort();
        test.sort();
        let split = DatasetSplit { train, test, seed };
        if split.covers_all_values() {
            return split;
        }
    }
    unreachable!("attempt counter is unbounded")
}

fn shuffle<T>(items: &mut [T], rng: &mut StreamRng) {
    for i in (1..items.len()).rev() {
        let j = uniform_index(i + 1, rng);
        items.swap(i, j);
    }
}

/// A training batch. The first `curriculum` entries were drawn from the
/// misclassified pool, the rest uniformly from all training pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub episodes: Vec<Episode>,
    pub curriculum: usize,
}

pub const DEFAULT_BATCH_SIZE: usize = 1000;
pub const DEFAULT_CURRICULUM_FRACTION: f64 = 0.8;

/// Curriculum batch: `round(fraction · size)` episodes uniformly (with
/// replacement) from `misclassified`, the remainder uniformly from
/// train × tasks. An empty pool makes the whole batch uniform.
pub fn sample_training_batch(
    split: &DatasetSplit,
    misclassified: &BTreeSet<Episode>,
    rng: &mut StreamRng,
    size: usize,
    fraction: f64,
) -> Batch {
    let all = split.train_episodes();
    let pool: Vec<Episode> = misclassified.iter().copied().collect();
    let curriculum = if pool.is_empty() {
        0
    } else {
        ((fraction * size as f64).round() as usize).min(size)
    };
    let mut episodes = Vec::with_capacity(size);
    for _ in 0..curriculum {
        episodes.push(pool[uniform_index(pool.len(), rng)]);
    }
    for _ in curriculum..size {
        episodes.push(all[uniform_index(all.len(), rng)]);
    }
    Batch { episodes, curriculum }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(c: &str, s: &str, t: &str) -> ObjectInstance {
        ObjectInstance::from_names(c, s, t).unwrap()
    }

    fn value(n: &str) -> AttrValue {
        AttrValue::from_name(n).unwrap()
    }

    #[test]
    fn instances_enumerate_in_mixed_radix_order() {
        let all = enumerate_instances();
        assert_eq!(all.len(), 64);
        assert_eq!(all[0], named("blue", "triangle", "dotted"));
        assert_eq!(all[1], named("blue", "triangle", "filled"));
        assert_eq!(all[63], named("red", "star", "solid"));
        let distinct: BTreeSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 64);
        for (i, inst) in all.iter().enumerate() {
            assert_eq!(inst.index(), i);
        }
    }

    #[test]
    fn six_ordered_tasks() {
        let tasks = enumerate_tasks();
        assert_eq!(tasks.len(), 6);
        let cs = Task::new(Attribute::Color, Attribute::Shape).unwrap();
        assert!(tasks.contains(&cs) && tasks.contains(&cs.swapped()));
        assert!(tasks.iter().all(|t| t.first != t.second));
        assert!(Task::new(Attribute::Color, Attribute::Color).is_none());
        for (i, t) in tasks.iter().enumerate() {
            assert_eq!(t.index(), i);
        }
    }

    #[test]
    fn ground_truth_examples() {
        let rsf = named("red", "square", "filled");
        let shape_color = Task::new(Attribute::Shape, Attribute::Color).unwrap();
        assert_eq!(ground_truth(rsf, shape_color), GroundTruth(value("square"), value("red")));
        assert_eq!(ground_truth(rsf, shape_color.swapped()), GroundTruth(value("red"), value("square")));
        let gsd = named("green", "square", "dotted");
        let color_style = Task::new(Attribute::Color, Attribute::Style).unwrap();
        assert_eq!(ground_truth(gsd, color_style), GroundTruth(value("green"), value("dotted")));
    }

    #[test]
    fn ground_truth_commutes_with_swap() {
        for i in enumerate_instances() {
            for t in TASKS {
                assert_eq!(ground_truth(i, t.swapped()), ground_truth(i, t).swapped());
            }
        }
    }

    #[test]
    fn reward_examples() {
        let gd = GroundTruth(value("green"), value("dotted"));
        assert_eq!(reward(gd, gd), 1.0);
        assert_eq!(reward(gd.swapped(), gd), -10.0);
        assert_eq!(reward(GroundTruth(value("green"), value("filled")), gd), -10.0);
    }

    #[test]
    fn exactly_one_rewarded_prediction_per_game() {
        for i in enumerate_instances() {
            for t in TASKS {
                let truth = ground_truth(i, t);
                let winners = (0..12u8)
                    .flat_map(|a| (0..12u8).map(move |b| GroundTruth(AttrValue(a), AttrValue(b))))
                    .filter(|&p| reward(p, truth) > 0.0)
                    .count();
                assert_eq!(winners, 1);
            }
        }
    }

    #[test]
    fn split_sizes_and_coverage() {
        for seed in 0..20 {
            let s = split_dataset(seed);
            assert_eq!((s.train.len(), s.test.len()), (51, 13));
            assert!(s.is_valid());
            let train: BTreeSet<_> = s.train.iter().collect();
            assert!(s.test.iter().all(|i| !train.contains(i)));
        }
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        assert_eq!(split_dataset(5), split_dataset(5));
        let distinct: BTreeSet<Vec<ObjectInstance>> = (0..10).map(|s| split_dataset(s).test).collect();
        assert!(distinct.len() > 5);
    }

    #[test]
    fn batch_composition() {
        let split = split_dataset(1);
        let mut rng = stream_rng(1, Stream::Batch, 0, 0);
        let empty = BTreeSet::new();
        let b = sample_training_batch(&split, &empty, &mut rng, 1000, 0.8);
        assert_eq!(b.episodes.len(), 1000);
        assert_eq!(b.curriculum, 0);
        let train: BTreeSet<_> = split.train_episodes().into_iter().collect();
        assert!(b.episodes.iter().all(|e| train.contains(e)));

        let hard: BTreeSet<Episode> = split.train_episodes().into_iter().step_by(7).take(10).collect();
        let b = sample_training_batch(&split, &hard, &mut rng, 1000, 0.8);
        assert_eq!(b.episodes.len(), 1000);
        assert_eq!(b.curriculum, 800);
        assert!(b.episodes[..800].iter().all(|e| hard.contains(e)));
        assert!(b.episodes.iter().all(|e| train.contains(e)));
        assert!(b.episodes.iter().filter(|e| hard.contains(e)).count() >= 800);
    }
}
