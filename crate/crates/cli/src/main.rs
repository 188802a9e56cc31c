use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tasktalk::evaluation::format_pct;
use tasktalk::world::{Attribute, Task, TASKS};
use tasktalk_cli::report::{self, Table1Row};
use tasktalk_cli::run::{self, resolve_checkpoints};
use tasktalk_cli::{Checkpoint, PresetName, TrainOptions};

#[derive(Parser)]
#[command(name = "tasktalk", version, about = "Train and analyze Task & Talk agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a preset (or a config file) to convergence or --max-epochs.
    Train {
        #[arg(long)]
        preset: Option<PresetName>,
        #[arg(long)]
        seed: Option<u64>,
        /// Flat TOML file of TrainerConfig/AgentConfig keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        checkpoint_every: Option<u64>,
        #[arg(long, default_value = "runs/latest")]
        out_dir: PathBuf,
        #[arg(long)]
        max_epochs: Option<u64>,
    },
    /// Greedy seen/unseen accuracy of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print the greedy dialog tree and the grounding tables.
    AnalyzeTree {
        checkpoint: PathBuf,
        /// Restrict to one task, e.g. `shape,color`.
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Backtrack when each node of the final tree became pure.
    Evolution {
        checkpoint: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// One Table 1 row per run (run directories or checkpoint files).
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "table1.csv")]
        out: PathBuf,
    },
}

fn parse_task(s: &str) -> Result<Task> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let attr = |name: &str| -> Result<Attribute> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.to_string() == name)
            .with_context(|| format!("unknown attribute `{name}`"))
    };
    let [a, b] = parts[..] else {
        anyhow::bail!("task must look like `shape,color`");
    };
    let (first, second) = (attr(a)?, attr(b)?);
    TASKS
        .into_iter()
        .find(|t| t.first == first && t.second == second)
        .with_context(|| format!("`{s}` is not a task"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { preset, seed, config, resume, checkpoint_every, out_dir, max_epochs } => {
            let opts = TrainOptions { preset, seed, config, resume, checkpoint_every, out_dir, max_epochs };
            let ck = run::train(&opts, |s| {
                if let Some(m) = s.last_metrics() {
                    if s.iteration % 10 == 0 || s.is_finished() {
                        eprintln!(
                            "iter {:5}  reward {:7.3}  seen {:>5}/{:>5}  unseen {:>5}/{:>5}",
                            m.iteration,
                            m.mean_reward,
                            format_pct(m.train_both),
                            format_pct(m.train_one),
                            format_pct(m.test_both),
                            format_pct(m.test_one)
                        );
                    }
                }
            })?;
            let summary = run::summarize(&ck)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            println!("artifacts in {}", opts.out_dir.display());
        }
        Command::Eval { checkpoint, out_dir } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let summary = run::summarize(&ck)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                report::write_table1(&dir.join("table1.csv"), &[Table1Row::from_checkpoint(&ck)?])?;
                report::write_json(&dir.join("accuracy.json"), &summary)?;
            }
        }
        Command::AnalyzeTree { checkpoint, task, out_dir } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let agents = ck.agents()?;
            let task = task.as_deref().map(parse_task).transpose()?;
            let (tree, leaves) = report::tree_leaves(&agents, task)?;
            println!(
                "{} leaves, {} occupied, {} tuples",
                tree.leaf_count(),
                tree.occupied_leaves().count(),
                tree.total_tuples()
            );
            for l in &leaves {
                let mark = if l.single_truth { "" } else { "  (mixed)" };
                println!("{:<16} {:<12} {:>3}  {}{mark}", l.task, l.path, l.tuples, l.concept);
            }
            let table = report::grounding(&agents)?;
            println!("\n{table}");
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                report::write_csv(&dir.join("tree.csv"), &leaves)?;
                report::write_json(&dir.join("grounding.json"), &table)?;
            }
        }
        Command::Evolution { checkpoint, out_dir } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let agents = ck.agents()?;
            let evo = report::evolution(&ck, &agents)?;
            for r in &evo.rows {
                println!("{:>6}  {:<16} {:<12} {}", r.purity_iteration, r.task, r.node, r.concept);
            }
            if let Some(dir) = out_dir {
                std::fs::create_dir_all(&dir)?;
                report::write_csv(&dir.join("evolution.csv"), &evo.rows)?;
                report::write_csv(&dir.join("timeline.csv"), &evo.timeline_rows())?;
            }
        }
        Command::Report { runs, out } => {
            let rows = resolve_checkpoints(&runs)?
                .iter()
                .map(|p| Table1Row::from_checkpoint(&Checkpoint::load(p)?))
                .collect::<Result<Vec<_>>>()?;
            report::write_table1(&out, &rows)?;
            for r in &rows {
                println!(
                    "{:<13} seed {:<4} seen {:>5}/{:>5}  unseen {:>5}/{:>5}",
                    r.setting, r.seed, r.seen_both, r.seen_one, r.unseen_both, r.unseen_one
                );
            }
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
