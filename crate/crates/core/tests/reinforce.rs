mod support;

use support::{enumerate_transcripts, micro_config, micro_episodes, transcript_index};
use tasktalk::Agents;

#[test]
fn micro_game_enumeration_is_a_distribution() {
    let agents = Agents::new(micro_config(), 3).unwrap();
    let all = enumerate_transcripts(&agents);
    assert_eq!(all.len(), micro_episodes().len() * 576);
    for (e, chunk) in all.chunks(576).enumerate() {
        let total: f64 = chunk.iter().map(|t| t.log_probs().iter().sum::<f64>().exp()).sum();
        assert!((total - 1.0).abs() < 1e-12, "episode {e}: {total}");
        for (k, t) in chunk.iter().enumerate() {
            assert_eq!(transcript_index(e, t), e * 576 + k);
        }
        // exactly one of the 144 predictions is rewarded per dialog
        assert_eq!(chunk.iter().filter(|t| t.reward > 0.0).count(), 4);
    }
}

#[test]
fn score_function_gradient_is_unbiased() {
    let report = support::reinforce_unbiasedness(100_000);
    assert!(report.coords_checked >= 20);
    assert!(report.exact_ok(), "exact vs finite differences: {:.3e}", report.max_abs_error);
    assert!(report.sampled_ok(), "{:?}", report.projections);
}
