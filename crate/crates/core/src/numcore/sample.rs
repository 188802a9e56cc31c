//! Seeded randomness.
//!
//! All randomness comes from ChaCha8 (`rand_chacha`). A generator is keyed by
//! the experiment seed via `seed_from_u64`, and its 64-bit stream id is
//! `tag << 56 | iteration << 24 | index`, so every episode of every
//! iteration draws from its own substream regardless of evaluation order.
//! Uniform doubles take the top 53 bits of `next_u64`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::math;

pub type StreamRng = ChaCha8Rng;

/// Purpose tag of a substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Stream {
    Split = 1,
    Batch = 2,
    Rollout = 3,
    Init = 4,
    Test = 0xff,
}

const MAX_ITERATION: u64 = 1 << 32;
const MAX_INDEX: u64 = 1 << 24;

/// Generator for `(seed, purpose, iteration, index)`.
pub fn stream_rng(seed: u64, stream: Stream, iteration: u64, index: u64) -> StreamRng {
    assert!(iteration < MAX_ITERATION, "iteration {iteration} exceeds the stream id space");
    assert!(index < MAX_INDEX, "index {index} exceeds the stream id space");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 56) | (iteration << 24) | index);
    rng
}

/// Uniform draw from `[0, 1)` with 53 bits of resolution.
pub fn uniform01(rng: &mut StreamRng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n`.
pub fn uniform_index(n: usize, rng: &mut StreamRng) -> usize {
    assert!(n > 0, "cannot draw from an empty range");
    ((uniform01(rng) * n as f64) as usize).min(n - 1)
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SampleError {
    #[error("probability {value} at index {index} is negative or not finite")]
    BadProbability { index: usize, value: f64 },
    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("empty distribution")]
    Empty,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// Inverse-CDF draw from `probs`. Returns the index and `ln probs[index]`.
pub fn sample_categorical(probs: &[f64], rng: &mut StreamRng) -> Result<(usize, f64), SampleError> {
    if probs.is_empty() {
        return Err(SampleError::Empty);
    }
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0) || !p.is_finite()) {
        return Err(SampleError::BadProbability { index, value });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(SampleError::NotNormalized(total));
    }
    let u = uniform01(rng) * total;
    let mut acc = 0.0;
    let mut chosen = None;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            chosen = Some(i);
            break;
        }
    }
    // rounding can leave u just above the last partial sum
    let index = chosen.unwrap_or_else(|| probs.iter().rposition(|&p| p > 0.0).expect("total is 1"));
    Ok((index, math::ln(probs[index])))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn degenerate_distribution() {
        let mut rng = stream_rng(0, Stream::Test, 0, 0);
        for _ in 0..10 {
            assert_eq!(sample_categorical(&[1.0, 0.0, 0.0], &mut rng).unwrap(), (0, 0.0));
        }
    }

    #[test]
    fn golden_draws_are_stable() {
        // frozen from the first run of this generator; any change to the
        // stream layout or the uniform conversion shows up here
        let mut rng = stream_rng(42, Stream::Test, 0, 0);
        let draws: Vec<usize> = (0..8)
            .map(|_| sample_categorical(&[0.25; 4], &mut rng).unwrap().0)
            .collect();
        assert_eq!(draws, GOLDEN);
    }

    const GOLDEN: [usize; 8] = [1, 1, 2, 0, 2, 3, 0, 2];

    #[test]
    fn same_state_same_draw() {
        let mut a = stream_rng(9, Stream::Rollout, 3, 17);
        let mut b = stream_rng(9, Stream::Rollout, 3, 17);
        for _ in 0..100 {
            assert_eq!(uniform01(&mut a).to_bits(), uniform01(&mut b).to_bits());
        }
        let mut c = stream_rng(9, Stream::Rollout, 3, 18);
        let mut a = stream_rng(9, Stream::Rollout, 3, 17);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn rejects_bad_distributions() {
        let mut rng = stream_rng(0, Stream::Test, 0, 0);
        assert!(matches!(
            sample_categorical(&[0.5, -0.1, 0.6], &mut rng),
            Err(SampleError::BadProbability { index: 1, .. })
        ));
        assert!(matches!(
            sample_categorical(&[0.5, 0.4], &mut rng),
            Err(SampleError::NotNormalized(_))
        ));
        assert_eq!(sample_categorical(&[], &mut rng), Err(SampleError::Empty));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let n = 1_000_000usize;
        let mut counts = [0usize; 4];
        let mut rng = stream_rng(7, Stream::Test, 1, 0);
        for _ in 0..n {
            counts[sample_categorical(&probs, &mut rng).unwrap().0] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            let dev = (*c as f64 - n as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "count {c} for p={p}: deviation {dev} > 3σ {}", 3.0 * sigma);
        }
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }
}
