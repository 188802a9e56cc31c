//! CSV and JSON artifacts.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tasktalk::analysis::{
    backtrack_evolution, build_dialog_tree, leaf_concept, extract_grounding_tables, grounding_timeline, DialogTree,
    GroundingTable, TimelinePoint,
};
use tasktalk::evaluation::{evaluate, format_pct};
use tasktalk::training::snapshot_episodes;
use tasktalk::world::{enumerate_instances, ground_truth, DatasetSplit, Task, TASKS};
use tasktalk::{Agents, MetricRecord, Team, TreeSnapshot};

use crate::checkpoint::Checkpoint;

/// One Table 1 row: a (setting, seed) pair.
#[derive(Clone, Debug, PartialEq, Serialize, serde::Deserialize)]
pub struct Table1Row {
    pub setting: String,
    pub seed: u64,
    #[serde(rename = "V_Q")]
    pub q_vocab: usize,
    #[serde(rename = "V_A")]
    pub a_vocab: usize,
    #[serde(rename = "A_memory")]
    pub a_memory: bool,
    #[serde(rename = "Q_memory")]
    pub q_memory: bool,
    pub seen_both: String,
    pub seen_one: String,
    pub unseen_both: String,
    pub unseen_one: String,
}

pub const TABLE1_HEADER: [&str; 10] = [
    "setting",
    "seed",
    "V_Q",
    "V_A",
    "A_memory",
    "Q_memory",
    "seen_both",
    "seen_one",
    "unseen_both",
    "unseen_one",
];

impl Table1Row {
    pub fn for_team<T: Team + ?Sized>(
        setting: &str,
        seed: u64,
        a_memory: bool,
        team: &T,
        split: &DatasetSplit,
    ) -> Result<Self> {
        let seen = evaluate(team, &split.train)?;
        let unseen = evaluate(team, &split.test)?;
        let (q_vocab, a_vocab) = team.vocab_sizes();
        Ok(Table1Row {
            setting: setting.to_owned(),
            seed,
            q_vocab,
            a_vocab,
            a_memory,
            q_memory: true,
            seen_both: format_pct(seen.both_pct),
            seen_one: format_pct(seen.one_pct),
            unseen_both: format_pct(unseen.both_pct),
            unseen_one: format_pct(unseen.one_pct),
        })
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self> {
        let agents = checkpoint.agents()?;
        let setting = checkpoint.preset.map_or("custom", |p| p.as_str());
        Self::for_team(setting, checkpoint.seed, !checkpoint.agent_config.memoryless_abot, &agents, &checkpoint.split)
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table1(path: &Path, rows: &[Table1Row]) -> Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(TABLE1_HEADER)?;
        w.flush()?;
        return Ok(());
    }
    write_csv(path, rows)
}

pub fn write_metrics(path: &Path, history: &[MetricRecord]) -> Result<()> {
    write_csv(path, history)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Node path like `Y>1>X` (question labels X/Y/Z for small vocabularies,
/// 1-based answers).
pub fn path_label(table_q_vocab: usize, prefix: &[u16]) -> String {
    prefix
        .iter()
        .enumerate()
        .map(|(i, &tok)| {
            if i % 2 == 0 {
                if table_q_vocab <= 3 {
                    ["X", "Y", "Z"][tok as usize].to_owned()
                } else {
                    format!("q{tok}")
                }
            } else {
                (tok + 1).to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(">")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionRow {
    pub task: String,
    pub node: String,
    pub depth: usize,
    pub concept: String,
    pub purity_iteration: u64,
    pub train_both: String,
    pub test_both: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimelineRow {
    pub iteration: u64,
    pub grounded: usize,
    pub train_both: String,
    pub test_both: String,
}

pub struct Evolution {
    pub rows: Vec<EvolutionRow>,
    pub timeline: Vec<TimelinePoint>,
    /// Iteration of each timeline point.
    pub iterations: Vec<u64>,
    pub snapshots: Vec<TreeSnapshot>,
}

impl Evolution {
    pub fn timeline_rows(&self) -> Vec<TimelineRow> {
        self.timeline
            .iter()
            .zip(&self.snapshots)
            .map(|(p, s)| TimelineRow {
                iteration: s.iteration,
                grounded: p.grounded,
                train_both: format_pct(s.train_both),
                test_both: format_pct(s.test_both),
            })
            .collect()
    }
}

/// Backtracked grounding of every node of the final tree over the stored
/// snapshots (the final state is appended if it was not snapshotted).
pub fn evolution(checkpoint: &Checkpoint, agents: &Agents) -> Result<Evolution> {
    let cfg = checkpoint.agent_config;
    let episodes = snapshot_episodes();
    let mut snapshots = checkpoint.snapshots.clone();
    if snapshots.last().map(|s| s.iteration) != Some(checkpoint.iteration) {
        let transcripts = agents.play_greedy(&episodes)?;
        let train = evaluate(agents, &checkpoint.split.train)?;
        let test = evaluate(agents, &checkpoint.split.test)?;
        snapshots.push(TreeSnapshot {
            iteration: checkpoint.iteration,
            train_both: train.both_pct,
            test_both: test.both_pct,
            paths: transcripts
                .iter()
                .map(|t| [t.questions[0], t.answers[0], t.questions[1], t.answers[1]].map(|x| x as u16))
                .collect(),
            correct: transcripts.iter().map(|t| t.is_correct()).collect(),
        });
    }
    let trees = snapshots
        .iter()
        .map(|s| DialogTree::from_snapshot(cfg.q_vocab, cfg.a_vocab, s, &episodes))
        .collect::<Result<Vec<_>, _>>()?;
    let final_tree = trees.last().expect("at least one snapshot");
    let records = backtrack_evolution(&trees, final_tree);
    let rows = records
        .iter()
        .map(|r| {
            let s = &snapshots[r.checkpoint];
            EvolutionRow {
                task: r.node.task.to_string(),
                node: path_label(cfg.q_vocab, &r.node.prefix),
                depth: r.node.prefix.len(),
                concept: r.concept.to_string(),
                purity_iteration: s.iteration,
                train_both: format_pct(s.train_both),
                test_both: format_pct(s.test_both),
            }
        })
        .collect();
    let accuracies: Vec<f64> = snapshots.iter().map(|s| s.train_both).collect();
    let timeline = grounding_timeline(&records, &accuracies);
    let iterations = snapshots.iter().map(|s| s.iteration).collect();
    Ok(Evolution { rows, timeline, iterations, snapshots })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LeafRow {
    pub task: String,
    pub path: String,
    pub tuples: usize,
    pub concept: String,
    pub single_truth: bool,
}

/// Occupied leaves of the greedy dialog tree, optionally for one task.
pub fn tree_leaves<T: Team + ?Sized>(team: &T, task: Option<Task>) -> Result<(DialogTree, Vec<LeafRow>)> {
    let tasks: Vec<Task> = task.map_or_else(|| TASKS.to_vec(), |t| vec![t]);
    let tree = build_dialog_tree(team, &enumerate_instances(), &tasks)?;
    let mut rows = Vec::new();
    for &t in &tasks {
        for (path, tuples) in tree.occupied_leaves() {
            let mine: Vec<_> = tuples.iter().copied().filter(|e| e.1 == t).collect();
            if mine.is_empty() {
                continue;
            }
            let concept = leaf_concept(&mine);
            let truth = ground_truth(mine[0].0, t);
            let single_truth = mine.iter().all(|e| ground_truth(e.0, t) == truth);
            rows.push(LeafRow {
                task: t.to_string(),
                path: path_label(tree.q_vocab, path),
                tuples: mine.len(),
                concept: concept.map_or_else(|| "-".to_owned(), |c| c.to_string()),
                single_truth,
            });
        }
    }
    Ok((tree, rows))
}

pub fn grounding<T: Team + ?Sized>(team: &T) -> Result<GroundingTable> {
    Ok(extract_grounding_tables(team)?)
}
