//! The three families as proof verifiers over raw bit strings.

use super::balance::{verify_balancing, BinaryMatrix, SignVector};
use super::graph::{component_count, decode_partition, partition_width, verify_cycle_partition, RegularGraph};
use super::ksat::{verify_ksat, BoundedKSatFormula};
use super::ProblemError;
use crate::bits::BitString;
use crate::elsearch::ProofVerifier;

/// Proofs are partitions in `n ceil(log2 k)` bits.
#[derive(Clone, Debug)]
pub struct CyclesVerifier {
    graph: RegularGraph,
    c: usize,
}

impl CyclesVerifier {
    pub fn new(graph: RegularGraph) -> Result<Self, ProblemError> {
        let c = component_count(graph.k())?;
        Ok(Self { graph, c })
    }

    pub fn graph(&self) -> &RegularGraph {
        &self.graph
    }
}

impl ProofVerifier for CyclesVerifier {
    fn proof_len(&self) -> usize {
        self.graph.n() * partition_width(self.graph.k())
    }

    fn verify(&self, proof: &BitString) -> bool {
        decode_partition(proof, self.graph.n(), self.graph.k(), self.c)
            .and_then(|p| verify_cycle_partition(&self.graph, &p))
            .unwrap_or(false)
    }

    fn verifier_id(&self) -> String {
        format!("cycles/n={}/k={}", self.graph.n(), self.graph.k())
    }
}

/// Proofs are sign vectors in `n` bits.
#[derive(Clone, Debug)]
pub struct BalanceVerifier {
    matrix: BinaryMatrix,
}

impl BalanceVerifier {
    pub fn new(matrix: BinaryMatrix) -> Self {
        Self { matrix }
    }
}

impl ProofVerifier for BalanceVerifier {
    fn proof_len(&self) -> usize {
        self.matrix.n()
    }

    fn verify(&self, proof: &BitString) -> bool {
        proof.len() == self.matrix.n()
            && verify_balancing(&self.matrix, &SignVector::from_bits(proof)).unwrap_or(false)
    }

    fn verifier_id(&self) -> String {
        format!("balance/n={}", self.matrix.n())
    }
}

/// Proofs are assignments in `n` bits, bit 1 meaning true.
#[derive(Clone, Debug)]
pub struct KSatVerifier {
    formula: BoundedKSatFormula,
}

impl KSatVerifier {
    pub fn new(formula: BoundedKSatFormula) -> Self {
        Self { formula }
    }
}

impl ProofVerifier for KSatVerifier {
    fn proof_len(&self) -> usize {
        self.formula.n()
    }

    fn verify(&self, proof: &BitString) -> bool {
        let a: Vec<bool> = proof.iter().collect();
        verify_ksat(&self.formula, &a).unwrap_or(false)
    }

    fn verifier_id(&self) -> String {
        format!(
            "ksat/n={}/k={}/m={}",
            self.formula.n(),
            self.formula.k(),
            self.formula.m()
        )
    }
}
