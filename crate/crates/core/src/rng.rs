//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a [`Stream`] obtained
//! from a [`StreamKey`]. Keys are derived by hashing, streams are ChaCha8
//! instances positioned by `(stream id, block offset)`, so any trial of any
//! experiment can be regenerated on its own without replaying its
//! predecessors. The sampling helpers below consume raw words directly
//! instead of going through `rand`'s distributions, which keeps golden
//! fixtures stable across dependency upgrades.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::bits::BitString;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn from_u64(seed: u64) -> Self {
        Self::hash(&[b"derand-lab/root/u64", &seed.to_le_bytes()])
    }

    pub fn from_bits(seed: &BitString) -> Self {
        Self::hash(&[
            b"derand-lab/root/bits",
            &(seed.len() as u64).to_le_bytes(),
            seed.as_bytes(),
        ])
    }

    pub fn derive(&self, label: &str) -> Self {
        Self::hash(&[&self.0, b"/", label.as_bytes()])
    }

    pub fn child(&self, index: u64) -> Self {
        Self::hash(&[&self.0, b"#", &index.to_le_bytes()])
    }

    /// Stream `id`, starting at block window `offset`. Windows are 2^32
    /// words apart, far more than any single trial consumes.
    pub fn stream(&self, id: u64, offset: u64) -> Stream {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(id);
        if offset != 0 {
            rng.set_word_pos((offset as u128) << 32);
        }
        rng
    }

    pub fn rng(&self) -> Stream {
        self.stream(0, 0)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    fn hash(parts: &[&[u8]]) -> Self {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        Self(h.finalize().into())
    }
}

/// Uniform on `[0, 1)` with 53 bits of precision.
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `0..n` (Lemire's multiply-and-reject).
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "empty range");
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

pub fn bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    unit_f64(rng) < p
}

pub fn shuffle<T, R: RngCore + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// Inverse-CDF sampler over a finite alphabet.
#[derive(Clone, Debug)]
pub struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    /// `probs` must be nonnegative with a positive sum; it is used as given
    /// (callers validate normalisation).
    pub fn new(probs: &[f64]) -> Self {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            acc += p;
            cdf.push(acc);
        }
        // Pin the top of the CDF to 1 from the last positive entry on, so
        // rounding never lets a draw fall past it or onto a zero entry.
        if let Some(last) = probs.iter().rposition(|&p| p > 0.0) {
            for c in &mut cdf[last..] {
                *c = 1.0;
            }
        }
        Self { cdf }
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = unit_f64(rng);
        self.cdf.partition_point(|&c| c <= u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let key = StreamKey::from_u64(7);
        let a: Vec<u64> = (0..4).map(|_| key.stream(3, 9).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(key.stream(3, 9).next_u64(), key.stream(3, 10).next_u64());
        assert_ne!(key.stream(3, 9).next_u64(), key.stream(4, 9).next_u64());
        assert_ne!(key.derive("a"), key.derive("b"));
        assert_ne!(key.child(0), key.child(1));
    }

    #[test]
    fn bit_keys_separate_lengths() {
        let a = StreamKey::from_bits(&BitString::zeros(3));
        let b = StreamKey::from_bits(&BitString::zeros(4));
        assert_ne!(a, b);
    }

    #[test]
    fn categorical_skips_zero_mass() {
        let c = Categorical::new(&[0.0, 0.5, 0.0, 0.5, 0.0]);
        let mut rng = StreamKey::from_u64(1).rng();
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            counts[c.sample(&mut rng)] += 1;
        }
        assert_eq!(counts[0] + counts[2] + counts[4], 0);
        assert!((counts[1] as f64 / 10_000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn below_is_in_range_and_roughly_uniform() {
        let mut rng = StreamKey::from_u64(2).rng();
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[below(&mut rng, 3) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }
}
