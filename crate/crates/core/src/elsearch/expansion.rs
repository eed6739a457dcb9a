//! The fixed seed-expansion function.
//!
//! `expand(seed, L)` is the first `L` bits of the ChaCha20 keystream whose
//! 256-bit key is the seed, zero-padded on the right, and whose stream id is
//! the seed's bit length (so `0` and `00` expand differently). Keystream
//! bytes are read in order and bits most-significant first. ChaCha20's
//! keystream is specified independently of platform endianness, which makes
//! the expansion bit-exact everywhere.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use super::ElError;
use crate::bits::BitString;

pub const ALGORITHM_ID: &str = "chacha20-ctr-zeropad/v1";
pub const MAX_SEED_BITS: usize = 256;
pub const DEFAULT_MAX_OUTPUT_BITS: usize = 1 << 28;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionFunction {
    max_output_bits: usize,
}

impl Default for ExpansionFunction {
    fn default() -> Self {
        Self {
            max_output_bits: DEFAULT_MAX_OUTPUT_BITS,
        }
    }
}

impl ExpansionFunction {
    pub fn with_max_output_bits(max_output_bits: usize) -> Self {
        Self { max_output_bits }
    }

    pub fn algorithm_id(&self) -> &'static str {
        ALGORITHM_ID
    }

    pub fn max_output_bits(&self) -> usize {
        self.max_output_bits
    }

    /// The raw keystream for `seed`, usable as a random source.
    pub fn stream(&self, seed: &BitString) -> Result<ExpansionStream, ElError> {
        if seed.len() > MAX_SEED_BITS {
            return Err(ElError::SeedTooLong {
                bits: seed.len(),
                max: MAX_SEED_BITS,
            });
        }
        let mut key = [0u8; 32];
        key[..seed.as_bytes().len()].copy_from_slice(seed.as_bytes());
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(seed.len() as u64);
        Ok(ExpansionStream(rng))
    }

    pub fn expand(&self, seed: &BitString, out_len: usize) -> Result<BitString, ElError> {
        if out_len > self.max_output_bits {
            return Err(ElError::OutputTooLong {
                bits: out_len,
                max: self.max_output_bits,
            });
        }
        let mut bytes = vec![0u8; out_len.div_ceil(8)];
        self.stream(seed)?.fill_bytes(&mut bytes);
        Ok(BitString::from_bytes(&bytes, out_len).expect("sized to fit"))
    }
}

/// Keystream of one seed.
#[derive(Clone, Debug)]
pub struct ExpansionStream(ChaCha20Rng);

impl RngCore for ExpansionStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
