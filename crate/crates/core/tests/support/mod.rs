//! Oracles shared by the core integration tests and the acceptance suite.
#![allow(dead_code)]

use tasktalk::agents::{replay, run_batch, Decoding, DialogTranscript};
use tasktalk::numcore::{finite_difference_check, stream_rng, FdOptions, Gradients, Inputs, ParamSet, Stream, StreamRng};
use tasktalk::world::{enumerate_instances, AttrValue, Episode, GroundTruth, ObjectInstance, RewardScheme, TASKS};
use tasktalk::{AgentConfig, Agents};

pub struct GradCheck {
    pub draws: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub failures: Vec<String>,
}

/// Central differences against the analytic gradient of
/// `Σ log π(actions)` for both agents on 20 parameter draws, alternating
/// one- and two-round dialogs, vocabularies and A-bot memory.
pub fn gradient_check() -> GradCheck {
    let mut out = GradCheck { draws: 0, max_rel_error: 0.0, max_abs_error: 0.0, failures: Vec::new() };
    for draw in 0..20u64 {
        let memoryless = draw % 2 == 0;
        let mut config = if draw % 3 == 0 { AgentConfig::new(3, 12, memoryless) } else { AgentConfig::new(3, 4, memoryless) };
        config.rounds = if draw % 4 < 2 { 1 } else { 2 };
        let agents = Agents::new(config, 1000 + draw).unwrap();
        let episodes: Vec<Episode> = (0..4)
            .map(|i| (enumerate_instances()[(draw as usize * 13 + i * 17) % 64], TASKS[(draw as usize + i) % 6]))
            .collect();
        let mut rngs: Vec<StreamRng> = (0..episodes.len() as u64).map(|i| stream_rng(draw, Stream::Test, 1, i)).collect();
        let mut rollout =
            run_batch(&agents.qbot, &agents.abot, &episodes, Decoding::Sample(&mut rngs), &RewardScheme::default()).unwrap();
        let opts = FdOptions { max_coords: Some(12), seed: draw, ..Default::default() };
        let q_out = rollout.q_graph.sum(rollout.q_log_prob);
        let a_out = rollout.a_graph.sum(rollout.a_log_prob);
        let reports = [
            ("Q-bot", finite_difference_check(&rollout.q_graph, &agents.qbot.params, &Inputs::new(), q_out, &opts).unwrap()),
            ("A-bot", finite_difference_check(&rollout.a_graph, &agents.abot.params, &Inputs::new(), a_out, &opts).unwrap()),
        ];
        for (who, report) in reports {
            out.max_rel_error = out.max_rel_error.max(report.max_rel_error());
            for e in &report.entries {
                out.max_abs_error = out.max_abs_error.max(e.max_abs_error);
            }
            for f in report.failures() {
                out.failures.push(format!("draw {draw} {who} {}: rel {:.2e}", f.name, f.max_rel_error));
            }
        }
        out.draws += 1;
    }
    out
}

/// The reduced game: color and shape restricted to their first two values,
/// style fixed, tasks (color, shape) and (shape, color), one round, binary
/// vocabularies.
pub fn micro_config() -> AgentConfig {
    AgentConfig { rounds: 1, ..AgentConfig::new(2, 2, false) }
}

pub fn micro_episodes() -> Vec<Episode> {
    let mut eps = Vec::new();
    for c in 0..2 {
        for s in 0..2 {
            for t in &TASKS[..2] {
                eps.push((ObjectInstance::new(c, s, 0), *t));
            }
        }
    }
    eps
}

const PREDICTIONS: usize = 12 * 12;
const PER_EPISODE: usize = 2 * 2 * PREDICTIONS;

/// Every transcript of every micro episode, replayed under `agents`, in
/// `(episode, q, a, ŵ1, ŵ2)` mixed-radix order.
pub fn enumerate_transcripts(agents: &Agents) -> Vec<DialogTranscript> {
    let mut skeleton = Vec::with_capacity(micro_episodes().len() * PER_EPISODE);
    for (instance, task) in micro_episodes() {
        for q in 0..2 {
            for a in 0..2 {
                for w1 in 0..12u8 {
                    for w2 in 0..12u8 {
                        skeleton.push(DialogTranscript {
                            task,
                            instance,
                            questions: vec![q],
                            answers: vec![a],
                            prediction: GroundTruth(AttrValue(w1), AttrValue(w2)),
                            question_log_probs: vec![0.0],
                            answer_log_probs: vec![0.0],
                            prediction_log_probs: [0.0; 2],
                            reward: 0.0,
                        });
                    }
                }
            }
        }
    }
    replay(&agents.qbot, &agents.abot, &skeleton, &RewardScheme::default()).unwrap().transcripts
}

pub fn transcript_index(episode: usize, t: &DialogTranscript) -> usize {
    ((episode * 2 + t.questions[0]) * 2 + t.answers[0]) * PREDICTIONS
        + t.prediction.0 .0 as usize * 12
        + t.prediction.1 .0 as usize
}

fn probability(t: &DialogTranscript) -> f64 {
    t.log_probs().iter().sum::<f64>().exp()
}

/// Expected reward with episodes drawn uniformly, by exhaustive summation.
pub fn expected_reward(agents: &Agents) -> f64 {
    let all = enumerate_transcripts(agents);
    all.iter().map(|t| probability(t) * t.reward).sum::<f64>() / micro_episodes().len() as f64
}

fn flatten(g: &Gradients) -> Vec<f64> {
    g.iter().flatten().copied().collect()
}

fn nudge(params: &mut ParamSet, flat: usize, delta: f64) {
    let mut k = flat;
    for id in params.ids().collect::<Vec<_>>() {
        let t = params.get_mut(id);
        if k < t.data.len() {
            t.data[k] += delta;
            return;
        }
        k -= t.data.len();
    }
    panic!("coordinate out of range");
}

pub struct UnbiasednessReport {
    /// Largest |exact REINFORCE − finite-difference gradient of E[R]|.
    pub max_abs_error: f64,
    pub coords_checked: usize,
    /// `(sample mean, exact, standard error)` along fixed random directions.
    pub projections: Vec<(f64, f64, f64)>,
    pub samples: usize,
}

impl UnbiasednessReport {
    pub fn exact_ok(&self) -> bool {
        self.max_abs_error <= 1e-8
    }

    pub fn sampled_ok(&self) -> bool {
        self.projections.iter().all(|&(m, e, se)| (m - e).abs() <= 3.0 * se)
    }
}

/// Exact score-function expectation vs. the gradient of the exactly summed
/// expected reward (fourth-order central differences), and a sampled
/// estimate vs. the exact expectation.
pub fn reinforce_unbiasedness(samples: usize) -> UnbiasednessReport {
    let agents = Agents::new(micro_config(), 77).unwrap();
    let episodes = micro_episodes();
    let n_eps = episodes.len() as f64;
    let all = enumerate_transcripts(&agents);

    // Σ_τ P(τ) R(τ) ∇ log P(τ) / |E| as one weighted backward pass
    let weights: Vec<f64> = all.iter().map(|t| probability(t) * t.reward / n_eps).collect();
    let mut rollout = replay(&agents.qbot, &agents.abot, &all, &RewardScheme::default()).unwrap();
    let (gq, ga) = rollout.weighted_log_prob_gradients(&agents.qbot, &agents.abot, &weights).unwrap();
    let exact = [flatten(&gq), flatten(&ga)];

    let h = 1e-3;
    let mut max_abs_error = 0.0_f64;
    let mut coords_checked = 0;
    for (agent, grad) in exact.iter().enumerate() {
        let step = (grad.len() / 15).max(1);
        for k in (0..grad.len()).step_by(step) {
            let at = |delta: f64| {
                let mut a = agents.clone();
                let params = if agent == 0 { &mut a.qbot.params } else { &mut a.abot.params };
                nudge(params, k, delta);
                expected_reward(&a)
            };
            let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
            max_abs_error = max_abs_error.max((fd - grad[k]).abs());
            coords_checked += 1;
        }
    }

    // per-transcript R ∇ log P projected on fixed directions
    let direction = |d: usize, n: usize, on: bool| -> Vec<f64> {
        (0..n)
            .map(|k| if on { ((k * 2_654_435_761 + d * 40_503) % 10_007) as f64 / 10_007.0 - 0.5 } else { 0.0 })
            .collect()
    };
    let directions: Vec<[Vec<f64>; 2]> = (0..3)
        .map(|d| [direction(d, exact[0].len(), d != 1), direction(d, exact[1].len(), d != 0)])
        .collect();
    let dot = |u: &[f64], g: &[f64]| u.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    let mut per_transcript = vec![vec![0.0; directions.len()]; all.len()];
    for (i, t) in all.iter().enumerate() {
        if t.reward == 0.0 {
            continue;
        }
        let mut r = replay(&agents.qbot, &agents.abot, std::slice::from_ref(t), &RewardScheme::default()).unwrap();
        let (q, a) = r.weighted_log_prob_gradients(&agents.qbot, &agents.abot, &[t.reward]).unwrap();
        let (q, a) = (flatten(&q), flatten(&a));
        for (d, [uq, ua]) in directions.iter().enumerate() {
            per_transcript[i][d] = dot(uq, &q) + dot(ua, &a);
        }
    }
    let exact_proj: Vec<f64> = directions.iter().map(|[uq, ua]| dot(uq, &exact[0]) + dot(ua, &exact[1])).collect();

    let mut sum = vec![0.0; directions.len()];
    let mut sum_sq = vec![0.0; directions.len()];
    let chunk = 10_000;
    let mut drawn = 0;
    while drawn < samples {
        let rows = chunk.min(samples - drawn);
        let batch: Vec<Episode> = (drawn..drawn + rows).map(|i| episodes[i % episodes.len()]).collect();
        let mut rngs: Vec<StreamRng> =
            (drawn..drawn + rows).map(|i| stream_rng(11, Stream::Test, 2, i as u64)).collect();
        let played =
            run_batch(&agents.qbot, &agents.abot, &batch, Decoding::Sample(&mut rngs), &RewardScheme::default()).unwrap();
        for (j, t) in played.transcripts.iter().enumerate() {
            let idx = transcript_index((drawn + j) % episodes.len(), t);
            for d in 0..directions.len() {
                let x = per_transcript[idx][d];
                sum[d] += x;
                sum_sq[d] += x * x;
            }
        }
        drawn += rows;
    }
    let n = samples as f64;
    let projections = (0..directions.len())
        .map(|d| {
            let mean = sum[d] / n;
            let var = (sum_sq[d] / n - mean * mean).max(0.0) * n / (n - 1.0);
            (mean, exact_proj[d], (var / n).sqrt())
        })
        .collect();
    UnbiasednessReport { max_abs_error, coords_checked, projections, samples }
}
