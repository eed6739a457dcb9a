//! Seed search against a fixed expansion function.
//!
//! A solution's time-bounded complexity is proxied by the length of the
//! shortest seed whose expansion, passed through a sampler, is accepted by
//! a polynomial-time verifier. The proxy excludes the constant-size
//! description of the expansion function and of the problem parameters;
//! reports carry the predicted budget next to the found length instead of
//! claiming an absolute complexity.

mod expansion;
mod search;

pub use expansion::{
    ExpansionFunction, ExpansionStream, ALGORITHM_ID, DEFAULT_MAX_OUTPUT_BITS, MAX_SEED_BITS,
};
pub use search::{
    ceil_log2, estimate_acceptance, hash_preimage_search, predicted_seed_budget, seed_search,
    CompressingMap, DropLastBits, FnVerifier, IdentitySampler, PreimageReport, ProofVerifier,
    Sampler, SearchConfig, SearchStrategy, SeedCertificate, XorFold, DEFAULT_LOG_CONSTANT,
    MAX_EXHAUSTIVE_SEED_BITS,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElError {
    #[error("requested {bits} output bits, limit is {max}")]
    OutputTooLong { bits: usize, max: usize },
    #[error("seed of {bits} bits exceeds the {max}-bit key")]
    SeedTooLong { bits: usize, max: usize },
    #[error("exhaustive search is limited to {max} seed bits, got {bits}")]
    ExhaustiveTooLong { bits: usize, max: usize },
    #[error("sampler maps {raw} raw bits to {got} bits, verifier expects {expected}")]
    SamplerLength {
        raw: usize,
        got: usize,
        expected: usize,
    },
    #[error("target has {got} bits, map outputs {expected}")]
    TargetLength { got: usize, expected: usize },
    #[error("no accepted seed after {tried} attempts (max seed length {max_seed_len})")]
    NotFound { tried: u64, max_seed_len: usize },
}
