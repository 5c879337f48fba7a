//! Seeded random streams and with-replacement index sampling.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit master seed and
//! positioned on its own 64-bit stream id, so each `(seed, stream_id)` pair
//! replays the same draws no matter how many other streams were consumed
//! before it or on which thread.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{McaError, Result};

/// Probabilities below this value after normalization are treated as zero.
pub const MIN_PROBABILITY: f64 = 1e-15;

/// Deterministic random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform double in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.inner.next_u64() >> 11) as f64 * SCALE
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Mixes a master seed with an index into a new, well-separated seed
/// (SplitMix64 finalizer). Used to give every trial of a suite its own key.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Normalized probability vector plus its cumulative table.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    id: u64,
}

impl SamplingDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Content fingerprint; distributions with identical probabilities share it.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn uniform(k: usize) -> Result<Self> {
        make_distribution(&vec![1.0; k])
    }

    /// Single draw by inverse transform over the cumulative table.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let u = rng.next_f64();
        self.cdf.partition_point(|&c| c <= u)
    }
}

/// Normalizes non-negative weights into a sampling distribution.
pub fn make_distribution(weights: &[f64]) -> Result<SamplingDistribution> {
    if weights.is_empty() {
        return Err(McaError::Degenerate("no weights".into()));
    }
    if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(McaError::Domain(format!(
            "weight {i} is {}, weights must be finite and non-negative",
            weights[i]
        )));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(McaError::Degenerate("all weights are zero".into()));
    }
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    if probs.iter().any(|&p| p > 0.0 && p < MIN_PROBABILITY) {
        for p in probs.iter_mut() {
            if *p < MIN_PROBABILITY {
                *p = 0.0;
            }
        }
        let kept: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= kept;
        }
    }

    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in &probs {
        acc += p;
        cdf.push(acc);
    }
    // Pin the tail to exactly 1 from the last supported index on, so a
    // uniform draw in [0, 1) always lands on an entry with positive mass.
    let last = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("normalized weights have positive mass");
    for c in &mut cdf[last..] {
        *c = 1.0;
    }

    let id = probs
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, p| {
            (h ^ p.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        });
    Ok(SamplingDistribution { probs, cdf, id })
}

/// Draws `r` i.i.d. indices with replacement.
pub fn draw_indices(
    dist: &SamplingDistribution,
    r: usize,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    if r == 0 {
        return Err(McaError::Domain("sample count must be at least 1".into()));
    }
    Ok((0..r).map(|_| dist.sample(rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalization() {
        let d = make_distribution(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(d.probs(), &[0.25; 4]);
        let d = make_distribution(&[9.0, 16.0]).unwrap();
        assert_eq!(d.probs(), &[0.36, 0.64]);
        assert_eq!(*d.cdf().last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(make_distribution(&[0.0, 0.0]), Err(McaError::Degenerate(_))));
        assert!(matches!(make_distribution(&[1.0, -0.5]), Err(McaError::Domain(_))));
        assert!(matches!(make_distribution(&[1.0, f64::NAN]), Err(McaError::Domain(_))));
        assert!(make_distribution(&[]).is_err());
    }

    #[test]
    fn tiny_probabilities_are_clamped() {
        let d = make_distribution(&[1.0, 1e-17, 1.0]).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.5]);
    }

    #[test]
    fn point_mass_always_hits() {
        let d = make_distribution(&[0.0, 1.0]).unwrap();
        let mut rng = RngStream::new(3, 0);
        assert!(draw_indices(&d, 1000, &mut rng).unwrap().iter().all(|&i| i == 1));

        let d = make_distribution(&[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert!(draw_indices(&d, 1000, &mut rng).unwrap().iter().all(|&i| i == 1));
    }

    #[test]
    fn zero_draws_rejected() {
        let d = make_distribution(&[1.0]).unwrap();
        assert!(draw_indices(&d, 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn fair_coin_frequency_within_three_sigma() {
        let d = make_distribution(&[0.5, 0.5]).unwrap();
        let draws = draw_indices(&d, 100_000, &mut RngStream::new(11, 4)).unwrap();
        let freq = draws.iter().filter(|&&i| i == 0).count() as f64 / 1e5;
        assert!((0.494..=0.506).contains(&freq), "frequency {freq}");
    }

    #[test]
    fn replay_is_independent_of_interleaving() {
        let d = make_distribution(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let solo = draw_indices(&d, 64, &mut RngStream::new(99, 7)).unwrap();

        let mut other = RngStream::new(99, 8);
        let mut target = RngStream::new(99, 7);
        let mut interleaved = Vec::new();
        for _ in 0..64 {
            draw_indices(&d, 3, &mut other).unwrap();
            interleaved.push(d.sample(&mut target));
        }
        assert_eq!(solo, interleaved);
        assert_ne!(solo, draw_indices(&d, 64, &mut RngStream::new(99, 8)).unwrap());
    }

    #[test]
    fn chi_square_goodness_of_fit() {
        let weights = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let d = make_distribution(&weights).unwrap();
        let n = 1_000_000;
        let mut counts = [0u64; 8];
        let mut rng = RngStream::new(2024, 1);
        for _ in 0..n {
            counts[d.sample(&mut rng)] += 1;
        }
        let stat: f64 = counts
            .iter()
            .zip(d.probs())
            .map(|(&c, &p)| {
                let expected = p * n as f64;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        // 0.999 quantile of chi-square with 7 degrees of freedom.
        assert!(stat < 24.3219, "chi-square statistic {stat}");
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }

    proptest! {
        #[test]
        fn cdf_invariants(weights in prop::collection::vec(0.0f64..10.0, 1..40)) {
            prop_assume!(weights.iter().any(|&w| w > 0.0));
            let d = make_distribution(&weights).unwrap();
            let sum: f64 = d.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(d.cdf().windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*d.cdf().last().unwrap(), 1.0);
        }

        #[test]
        fn zero_mass_never_drawn(
            weights in prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..5.0], 1..20),
            seed in any::<u64>(),
        ) {
            prop_assume!(weights.iter().any(|&w| w > 0.0));
            let d = make_distribution(&weights).unwrap();
            let draws = draw_indices(&d, 500, &mut RngStream::new(seed, 0)).unwrap();
            prop_assert!(draws.iter().all(|&i| d.probs()[i] > 0.0));
        }

        #[test]
        fn same_key_same_draws(seed in any::<u64>(), stream in any::<u64>()) {
            let d = make_distribution(&[3.0, 1.0, 0.5]).unwrap();
            let a = draw_indices(&d, 32, &mut RngStream::new(seed, stream)).unwrap();
            let b = draw_indices(&d, 32, &mut RngStream::new(seed, stream)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
