//! Noise distribution for negative sampling: unigram frequency raised to a
//! power (0.75 by convention), normalized. Sampling inverts the cumulative
//! weight table with a binary search, so probabilities are exact rather than
//! quantized through a lookup table.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::stream_rng;

/// Exponent applied to unigram counts.
pub const NEGATIVE_EXPONENT: f64 = 0.75;

pub struct NegativeSampler {
    cumulative: Vec<f64>,
    total: f64,
    rng: ChaCha8Rng,
}

impl NegativeSampler {
    /// Builds the sampler over raw counts with the conventional exponent,
    /// drawing from the dedicated substream of `seed`.
    pub fn new(counts: &[u64], seed: u64) -> Self {
        Self::with_rng(counts, NEGATIVE_EXPONENT, stream_rng(seed, "sgns.negatives"))
    }

    pub fn with_rng(counts: &[u64], exponent: f64, rng: ChaCha8Rng) -> Self {
        assert!(!counts.is_empty(), "sampler needs a non-empty vocabulary");
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(exponent);
            cumulative.push(total);
        }
        Self { cumulative, total, rng }
    }

    /// Draws one token id from the noise distribution.
    pub fn next_index(&mut self) -> usize {
        let r = self.rng.random::<f64>() * self.total;
        // First slot whose cumulative weight exceeds r.
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical(counts: &[u64], seed: u64, draws: usize) -> Vec<f64> {
        let mut sampler = NegativeSampler::new(counts, seed);
        let mut hits = vec![0usize; counts.len()];
        for _ in 0..draws {
            hits[sampler.next_index()] += 1;
        }
        hits.into_iter().map(|h| h as f64 / draws as f64).collect()
    }

    #[test]
    fn symmetric_counts_sample_evenly() {
        let freqs = empirical(&[1, 1], 42, 100_000);
        assert!((freqs[0] - 0.5).abs() <= 0.02, "{freqs:?}");
        assert!((freqs[1] - 0.5).abs() <= 0.02, "{freqs:?}");
    }

    #[test]
    fn power_law_matches_closed_form() {
        // 16^0.75 / (16^0.75 + 1) = 8/9.
        let freqs = empirical(&[16, 1], 42, 100_000);
        assert!((freqs[0] - 8.0 / 9.0).abs() <= 0.01, "{freqs:?}");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let mut a = NegativeSampler::new(&[5, 3, 2, 7], 7);
        let mut b = NegativeSampler::new(&[5, 3, 2, 7], 7);
        for _ in 0..256 {
            assert_eq!(a.next_index(), b.next_index());
        }
    }
}
