//! Random codebooks, joint-typicality decoding and error-rate experiments.
//!
//! Messages are numbered `1..=M`; decoders answer `0` when no codeword, or
//! more than one, is jointly typical with the received block.

mod decoder;
mod experiment;
mod typical;

pub use decoder::Decoder;
pub use experiment::{
    empirical_joint_aep, estimate_error, tradeoff_experiment, AepReport, ErrorReport,
    TradeoffRow,
};
pub use typical::{is_jointly_typical, TypicalityParams};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::channel::{ChannelError, Distribution};
use crate::elsearch::{ElError, ExpansionFunction};

/// `ceil(n R)` may not exceed this; keeps `M <= 2^30`.
pub const MAX_LOG_WORDS: u32 = 30;

#[derive(Debug, Error, PartialEq)]
pub enum CodebookError {
    #[error("ceil(nR) = {log_words} exceeds the limit of {MAX_LOG_WORDS}")]
    RateTooLarge { log_words: u64 },
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("block length must be at least 1")]
    EmptyBlock,
    #[error("input alphabet is empty")]
    EmptyAlphabet,
    #[error("block has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("symbol {symbol} outside alphabet of size {alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },
    #[error("epsilon must be nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("codebook file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Expansion(#[from] ElError),
}

/// An `M x n` matrix of input symbols; row `w - 1` encodes message `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    n: usize,
    num_words: usize,
    words: Vec<usize>,
    gen_seed: Option<BitString>,
}

/// `ceil(n R)`, tolerant of `n R` landing a rounding error above an integer.
pub fn log_words(n: usize, rate: f64) -> u64 {
    (n as f64 * rate - 1e-9).ceil().max(0.0) as u64
}

impl Codebook {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self, CodebookError> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || n == 0 {
            return Err(CodebookError::EmptyBlock);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(CodebookError::LengthMismatch {
                got: bad.len(),
                expected: n,
            });
        }
        Ok(Self {
            n,
            num_words: rows.len(),
            words: rows.concat(),
            gen_seed: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    /// Realised rate `log2(M) / n`.
    pub fn rate(&self) -> f64 {
        (self.num_words as f64).log2() / self.n as f64
    }

    pub fn gen_seed(&self) -> Option<&BitString> {
        self.gen_seed.as_ref()
    }

    /// Row `index` (0-based), i.e. the codeword of message `index + 1`.
    pub fn row(&self, index: usize) -> &[usize] {
        &self.words[index * self.n..(index + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.words.chunks(self.n)
    }

    pub fn to_file(&self) -> CodebookFile {
        CodebookFile {
            n: self.n,
            m: self.num_words,
            seed_hex: self.gen_seed.as_ref().map(BitString::to_hex),
            seed_bits: self.gen_seed.as_ref().map(BitString::len),
            rows: self.rows().map(<[usize]>::to_vec).collect(),
        }
    }

    pub fn from_file(file: CodebookFile) -> Result<Self, CodebookError> {
        let mut cb = Self::from_rows(file.rows)?;
        if cb.n != file.n || cb.num_words != file.m {
            return Err(CodebookError::Malformed(format!(
                "declared {}x{} but rows are {}x{}",
                file.m, file.n, cb.num_words, cb.n
            )));
        }
        cb.gen_seed = match file.seed_hex {
            Some(h) => Some(
                BitString::from_hex(&h, file.seed_bits)
                    .map_err(|e| CodebookError::Malformed(e.to_string()))?,
            ),
            None => None,
        };
        Ok(cb)
    }
}

/// On-disk form `{"n", "M", "seed_hex", "seed_bits", "rows"}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodebookFile {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_hex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_bits: Option<usize>,
    pub rows: Vec<Vec<usize>>,
}

/// Draws `2^ceil(nR)` codewords i.i.d. from `q`, entry by entry in row-major
/// order, from the expansion keystream of `seed`.
pub fn generate_codebook(
    q: &Distribution,
    n: usize,
    rate: f64,
    seed: &BitString,
) -> Result<Codebook, CodebookError> {
    if n == 0 {
        return Err(CodebookError::EmptyBlock);
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(CodebookError::InvalidRate(rate));
    }
    if q.is_empty() {
        return Err(CodebookError::EmptyAlphabet);
    }
    let lw = log_words(n, rate);
    if lw > MAX_LOG_WORDS as u64 {
        return Err(CodebookError::RateTooLarge { log_words: lw });
    }
    let num_words = 1usize << lw;
    let mut stream = ExpansionFunction::default().stream(seed)?;
    let sampler = q.sampler();
    let words = (0..num_words * n).map(|_| sampler.sample(&mut stream)).collect();
    Ok(Codebook {
        n,
        num_words,
        words,
        gen_seed: Some(seed.clone()),
    })
}

/// Joint-typicality decoding straight from the definition. [`Decoder`] is
/// the fast equivalent for repeated use.
pub fn decode(
    codebook: &Codebook,
    y_block: &[usize],
    params: &TypicalityParams,
) -> Result<usize, CodebookError> {
    let mut found = 0;
    for (i, row) in codebook.rows().enumerate() {
        if is_jointly_typical(row, y_block, params)? {
            if found != 0 {
                return Ok(0);
            }
            found = i + 1;
        }
    }
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use rand_core::RngCore;

    #[test]
    fn point_mass_gives_zero_matrix() {
        let q = Distribution::point_mass(3, 0);
        let cb = generate_codebook(&q, 7, 0.5, &BitString::from_u64(5, 8)).unwrap();
        assert_eq!(cb.num_words(), 16);
        assert!(cb.rows().all(|r| r.iter().all(|&s| s == 0)));
    }

    #[test]
    fn golden_small_codebook() {
        // Captured once from the reference expansion and frozen; matches an
        // independent ChaCha20 block-function implementation.
        let seed = BitString::from_hex("c0ffee", None).unwrap();
        let cb = generate_codebook(&Distribution::uniform(2), 4, 0.5, &seed).unwrap();
        let rows: Vec<Vec<usize>> = cb.rows().map(<[usize]>::to_vec).collect();
        assert_eq!(
            rows,
            vec![
                vec![0, 1, 0, 1],
                vec![1, 1, 1, 0],
                vec![0, 0, 0, 1],
                vec![0, 0, 1, 0]
            ]
        );
        assert_eq!(cb.rate(), 0.5);
    }

    #[test]
    fn reproducible_from_seed() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let seed = BitString::from_u64(0xdead_beef, 32);
        let a = generate_codebook(&q, 9, 0.7, &seed).unwrap();
        let b = generate_codebook(&q, 9, 0.7, a.gen_seed().unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_seeds_give_distinct_codebooks() {
        // Two uniform 4x4 binary matrices coincide with probability 2^-16;
        // all 100 pairs must differ (miss chance < 1 - (1 - 2^-16)^100).
        let mut rng = StreamKey::from_u64(17).rng();
        let q = Distribution::uniform(2);
        let mut differ = 0;
        for _ in 0..100 {
            let s1 = BitString::from_u64(rng.next_u64(), 64);
            let s2 = BitString::from_u64(rng.next_u64(), 64);
            let a = generate_codebook(&q, 4, 0.5, &s1).unwrap();
            let b = generate_codebook(&q, 4, 0.5, &s2).unwrap();
            differ += (a != b) as usize;
        }
        assert_eq!(differ, 100);
    }

    #[test]
    fn guards() {
        let q = Distribution::uniform(2);
        let s = BitString::new();
        assert_eq!(
            generate_codebook(&q, 31, 1.0, &s),
            Err(CodebookError::RateTooLarge { log_words: 31 })
        );
        assert_eq!(generate_codebook(&q, 0, 1.0, &s), Err(CodebookError::EmptyBlock));
        assert!(matches!(
            generate_codebook(&q, 4, 0.0, &s),
            Err(CodebookError::InvalidRate(_))
        ));
    }

    #[test]
    fn rate_rounding() {
        assert_eq!(log_words(40, 0.3), 12);
        assert_eq!(log_words(10, 0.3), 3);
        assert_eq!(log_words(3, 0.1), 1);
        assert_eq!(log_words(5, 0.5), 3);
    }

    #[test]
    fn file_roundtrip() {
        let seed = BitString::from_hex("abc", Some(11)).unwrap();
        let cb = generate_codebook(&Distribution::uniform(3), 5, 0.4, &seed).unwrap();
        let json = serde_json::to_string(&cb.to_file()).unwrap();
        assert!(json.contains("\"M\":4"));
        let back = Codebook::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, cb);
    }
}
