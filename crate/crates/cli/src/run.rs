use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use tasktalk::evaluation::evaluate;
use tasktalk::world::split_dataset;
use tasktalk::{AgentConfig, TrainerConfig, TrainingState};

use crate::checkpoint::{Checkpoint, Provenance};
use crate::config::ConfigFile;
use crate::preset::PresetName;
use crate::report::{self, Table1Row};

pub const DEFAULT_CHECKPOINT_EVERY: u64 = 100;

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub preset: Option<PresetName>,
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub checkpoint_every: Option<u64>,
    pub out_dir: PathBuf,
    pub max_epochs: Option<u64>,
}

/// Fully resolved configuration of a fresh run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub preset: Option<PresetName>,
    pub agent: AgentConfig,
    pub trainer: TrainerConfig,
    pub checkpoint_every: u64,
    pub provenance: Provenance,
}

impl RunSpec {
    /// Preset, then config file, then flags.
    pub fn resolve(opts: &TrainOptions) -> Result<Self> {
        let (file, text) = match &opts.config {
            Some(path) => {
                let (f, t) = ConfigFile::load(path)?;
                (f, Some(t))
            }
            None => (ConfigFile::default(), None),
        };
        let preset = opts.preset.or(file.preset);
        let (mut agent, mut trainer) = match preset {
            Some(p) => {
                let p = p.preset();
                (p.agent_config(), p.trainer)
            }
            None => {
                let (Some(q), Some(a)) = (file.q_vocab, file.a_vocab) else {
                    bail!("either --preset or a config file with q_vocab and a_vocab is required");
                };
                (AgentConfig::new(q, a, file.memoryless_abot.unwrap_or(false)), TrainerConfig::default())
            }
        };
        file.apply(&mut agent, &mut trainer)?;
        let mut flags = BTreeMap::new();
        if let Some(p) = opts.preset {
            flags.insert("preset".to_owned(), p.to_string());
        }
        if let Some(seed) = opts.seed {
            trainer.seed = seed;
            flags.insert("seed".to_owned(), seed.to_string());
        }
        if let Some(m) = opts.max_epochs {
            trainer.max_epochs = m;
            flags.insert("max-epochs".to_owned(), m.to_string());
        }
        let checkpoint_every = opts.checkpoint_every.or(file.checkpoint_every).unwrap_or(DEFAULT_CHECKPOINT_EVERY);
        if let Some(c) = opts.checkpoint_every {
            flags.insert("checkpoint-every".to_owned(), c.to_string());
        }
        if checkpoint_every == 0 {
            bail!("checkpoint-every must be positive");
        }
        agent.validate()?;
        trainer.validate()?;
        Ok(RunSpec { preset, agent, trainer, checkpoint_every, provenance: Provenance { config_file: text, flags } })
    }

    pub fn initial_state(&self) -> Result<TrainingState> {
        Ok(TrainingState::new(self.agent, self.trainer, split_dataset(self.trainer.seed))?)
    }
}

/// Final accuracies of a run, written as `accuracy.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub setting: String,
    pub seed: u64,
    pub iterations: u64,
    pub converged: bool,
    pub train_both: f64,
    pub train_one: f64,
    pub test_both: f64,
    pub test_one: f64,
    pub digest: String,
}

pub fn checkpoint_path(out_dir: &Path, iteration: u64) -> PathBuf {
    out_dir.join("checkpoints").join(format!("iter_{iteration:06}.json"))
}

/// Train (or resume) to completion, writing periodic checkpoints and the
/// final artifacts into `opts.out_dir`.
pub fn train(opts: &TrainOptions, mut progress: impl FnMut(&TrainingState)) -> Result<Checkpoint> {
    let (mut state, preset, mut provenance, every) = match &opts.resume {
        Some(path) => {
            let ck = Checkpoint::load(path).with_context(|| format!("resuming from {}", path.display()))?;
            if let Some(p) = opts.preset {
                if ck.preset != Some(p) {
                    bail!("checkpoint was trained with preset {:?}, not {p}", ck.preset.map(|p| p.as_str()));
                }
            }
            if let Some(seed) = opts.seed {
                if seed != ck.seed {
                    bail!("checkpoint was trained with seed {}, not {seed}", ck.seed);
                }
            }
            if opts.config.is_some() {
                bail!("--config cannot be combined with --resume; the checkpoint carries its configuration");
            }
            let mut state = ck.to_state()?;
            if let Some(m) = opts.max_epochs {
                state.config.max_epochs = m;
            }
            let every = opts.checkpoint_every.unwrap_or(DEFAULT_CHECKPOINT_EVERY);
            (state, ck.preset, ck.provenance, every)
        }
        None => {
            let spec = RunSpec::resolve(opts)?;
            (spec.initial_state()?, spec.preset, spec.provenance, spec.checkpoint_every)
        }
    };
    if opts.resume.is_some() {
        if let Some(m) = opts.max_epochs {
            provenance.flags.insert("max-epochs".to_owned(), m.to_string());
        }
    }
    let ck_dir = opts.out_dir.join("checkpoints");
    fs::create_dir_all(&ck_dir).with_context(|| format!("creating {}", ck_dir.display()))?;
    let mut save_error = None;
    state.run(|s| {
        if s.iteration % every == 0 && save_error.is_none() {
            let ck = Checkpoint::from_state(s, preset, provenance.clone());
            if let Err(e) = ck.save(&checkpoint_path(&opts.out_dir, s.iteration)) {
                save_error = Some(e);
            }
        }
        progress(s);
    })?;
    if let Some(e) = save_error {
        return Err(e.into());
    }
    let ck = Checkpoint::from_state(&state, preset, provenance);
    ck.save(&opts.out_dir.join("final.json"))?;
    write_artifacts(&opts.out_dir, &ck)?;
    Ok(ck)
}

pub fn summarize(ck: &Checkpoint) -> Result<RunSummary> {
    let agents = ck.agents()?;
    let train = evaluate(&agents, &ck.split.train)?;
    let test = evaluate(&agents, &ck.split.test)?;
    Ok(RunSummary {
        setting: ck.preset.map_or("custom", |p| p.as_str()).to_owned(),
        seed: ck.seed,
        iterations: ck.iteration,
        converged: ck.streak >= ck.trainer.patience,
        train_both: train.both_pct,
        train_one: train.one_pct,
        test_both: test.both_pct,
        test_one: test.one_pct,
        digest: ck.digest()?,
    })
}

/// `metrics.csv`, `table1.csv`, `accuracy.json`, `evolution.csv`,
/// `timeline.csv` and `grounding.json` for one checkpoint.
pub fn write_artifacts(out_dir: &Path, ck: &Checkpoint) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let agents = ck.agents()?;
    report::write_metrics(&out_dir.join("metrics.csv"), &ck.history)?;
    report::write_table1(&out_dir.join("table1.csv"), &[Table1Row::from_checkpoint(ck)?])?;
    report::write_json(&out_dir.join("accuracy.json"), &summarize(ck)?)?;
    let evo = report::evolution(ck, &agents)?;
    report::write_csv(&out_dir.join("evolution.csv"), &evo.rows)?;
    report::write_csv(&out_dir.join("timeline.csv"), &evo.timeline_rows())?;
    report::write_json(&out_dir.join("grounding.json"), &report::grounding(&agents)?)?;
    Ok(())
}

/// Checkpoint files given directly, or `final.json` inside run directories.
pub fn resolve_checkpoints(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let f = p.join("final.json");
            if !f.exists() {
                bail!("{} has no final.json", p.display());
            }
            out.push(f);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}
