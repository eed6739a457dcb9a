//! Three problem families with generators, proof encodings and verifiers:
//! cycle partitions of regular graphs, vector balancing, and bounded
//! occurrence k-SAT.

mod balance;
mod graph;
mod ksat;
mod numeric;
mod proofs;

pub use balance::{
    balancing_threshold, gen_binary_matrix, max_discrepancy, verify_balancing, BinaryMatrix, SignVector,
};
pub use graph::{
    component_count, cycles_constraint_system, decode_graph, decode_partition, encode_graph, encode_partition,
    gen_regular_graph, partition_width, stronger_neighbor_condition, verify_cycle_partition, Partition,
    RegularGraph, MAX_PAIRING_ATTEMPTS,
};
pub use ksat::{
    gen_bounded_ksat, ksat_constraint_system, occurrence_cap, verify_ksat, BoundedKSatFormula, Literal,
    MAX_KSAT_ATTEMPTS,
};
pub use proofs::{BalanceVerifier, CyclesVerifier, KSatVerifier};

use rand_core::RngCore;
use serde::Serialize;
use thiserror::Error;

use crate::bits::BitString;
use crate::rng::{Stream, StreamKey};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("degree {k} is below 5")]
    DegreeTooSmall { k: usize },
    #[error("no simple {k}-regular graph on {n} vertices")]
    InfeasibleDegreeSequence { n: usize, k: usize },
    #[error("generator gave up after {attempts} attempts")]
    RejectionBudgetExhausted { attempts: u32 },
    #[error("partition has {got} components, degree requires {expected}")]
    ComponentCountMismatch { expected: usize, got: usize },
    #[error("length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("occurrence cap {cap} for k={k} cannot fit m={m} clauses over n={n} variables")]
    InfeasibleOccurrenceBound { n: usize, k: usize, m: usize, cap: i64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl ProblemError {
    pub(crate) fn parse(line: usize, message: &str) -> Self {
        Self::Parse {
            line,
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemParams {
    Cycles { n: usize, k: usize },
    KSat { n: usize, k: usize, m: usize },
    Balance { n: usize },
}

/// Bits of `-log2 delta`, the bound on how rare a random proof is:
/// `2n/k^2` for cycles, `2 e m 2^-k` for k-SAT and `-log2(1 - 2 n^-7)` for
/// balancing.
pub fn success_probability_bounds(params: ProblemParams) -> Result<f64, ProblemError> {
    match params {
        ProblemParams::Cycles { n, k } => {
            component_count(k)?;
            Ok(2.0 * n as f64 / (k * k) as f64)
        }
        ProblemParams::KSat { n, k, m } => {
            let cap = occurrence_cap(k);
            if cap < 1 {
                return Err(ProblemError::InfeasibleOccurrenceBound { n, k, m, cap });
            }
            Ok(2.0 * std::f64::consts::E * m as f64 * 2f64.powi(-(k as i32)))
        }
        ProblemParams::Balance { n } => {
            let fail = 2.0 * (n as f64).powi(-7);
            Ok(-(-fail).ln_1p() / std::f64::consts::LN_2)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
    pub rate: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn new(successes: u64, trials: u64) -> Self {
        let rate = successes as f64 / trials as f64;
        Self {
            successes,
            trials,
            rate,
            std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
        }
    }
}

/// Runs `trial` on `key.stream(0, t)` for every `t < trials`.
pub fn monte_carlo(trials: u64, key: &StreamKey, trial: impl Fn(&mut Stream) -> bool + Sync) -> McEstimate {
    assert!(trials > 0, "at least one trial");
    let run = |t: u64| trial(&mut key.stream(0, t)) as u64;
    #[cfg(feature = "parallel")]
    let hits = (0..trials).into_par_iter().map(run).sum();
    #[cfg(not(feature = "parallel"))]
    let hits = (0..trials).map(run).sum();
    McEstimate::new(hits, trials)
}

/// How often a uniform partition into `component_count(k)` parts meets the
/// neighbour condition.
pub fn partition_pass_rate(g: &RegularGraph, trials: u64, key: &StreamKey) -> Result<McEstimate, ProblemError> {
    let c = component_count(g.k())?;
    Ok(monte_carlo(trials, key, |rng| {
        stronger_neighbor_condition(g, &Partition::random(g.n(), c, rng)).expect("lengths match")
    }))
}

/// How often a uniform assignment satisfies `f`.
pub fn ksat_random_satisfaction_rate(f: &BoundedKSatFormula, trials: u64, key: &StreamKey) -> McEstimate {
    monte_carlo(trials, key, |rng| {
        let a: Vec<bool> = (0..f.n()).map(|_| rng.next_u32() & 1 == 1).collect();
        verify_ksat(f, &a).expect("lengths match")
    })
}

/// How often a uniform sign vector fails the balancing bound.
pub fn balancing_failure_rate(m: &BinaryMatrix, trials: u64, key: &StreamKey) -> McEstimate {
    monte_carlo(trials, key, |rng| {
        let b = SignVector::from_bits(&random_bits(m.n(), rng));
        !verify_balancing(m, &b).expect("lengths match")
    })
}

pub(crate) fn random_bits(n: usize, rng: &mut Stream) -> BitString {
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    BitString::from_bytes(&bytes, n).expect("sized to fit")
}
